#pragma once

#include <charconv>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "semflow/corpus.hpp"
#include "semflow/error.hpp"
#include "semflow/text.hpp"

namespace semflow {

enum class MissingPolicy { kDrop, kError };

// One d-dimensional vector per vocabulary term, stored row-major. Terms that
// were not found in the embedding file keep a zero row and `covered = false`.
struct EmbeddingMatrix {
  std::size_t dim = 0;
  std::vector<double> data;
  std::vector<bool> covered;
  double coverage = 0.0;

  std::size_t size() const { return covered.size(); }

  std::span<const double> vector(TermId t) const {
    return {data.data() + static_cast<std::size_t>(t) * dim, dim};
  }
};

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace detail

/// Reads a word2vec text file (`<count> <dim>` header, then `word v1 .. vd`
/// lines) and picks out the rows for `vocab`. Words outside the vocabulary
/// are skipped; for repeated words the first row wins.
inline EmbeddingMatrix load_embeddings(const std::string& path, const Vocabulary& vocab,
                                       MissingPolicy policy) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw FormatError(path, 1, "empty embedding file");
  const auto header = detail::split_ws(lines[0]);
  if (header.size() != 2) throw FormatError(path, 1, "expected '<count> <dim>' header");
  const std::uint64_t count = detail::parse_count(std::string(header[0]), path, 1);
  const std::uint64_t dim = detail::parse_count(std::string(header[1]), path, 1);
  if (dim == 0) throw FormatError(path, 1, "dimension must be positive");

  EmbeddingMatrix x;
  x.dim = dim;
  x.data.assign(vocab.size() * dim, 0.0);
  x.covered.assign(vocab.size(), false);

  std::size_t rows = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = detail::split_ws(lines[i]);
    if (fields.empty()) continue;
    ++rows;
    if (fields.size() != dim + 1) {
      throw Error(ErrorKind::kDimMismatch,
                  path + ":" + std::to_string(i + 1) + ": row has " +
                      std::to_string(fields.size() - 1) + " values, header says " +
                      std::to_string(dim));
    }
    const auto term = vocab.find(std::string(fields[0]));
    if (!term || x.covered[*term]) continue;
    double* row = x.data.data() + static_cast<std::size_t>(*term) * dim;
    for (std::size_t k = 0; k < dim; ++k) {
      const std::string_view f = fields[k + 1];
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v)) {
        throw FormatError(path, i + 1, "bad value '" + std::string(f) + "'");
      }
      row[k] = v;
    }
    x.covered[*term] = true;
  }
  if (rows != count) {
    throw FormatError(path, lines.size(), "header announces " + std::to_string(count) +
                                              " rows, file has " + std::to_string(rows));
  }

  std::size_t found = 0;
  for (std::size_t t = 0; t < vocab.size(); ++t) {
    if (x.covered[t]) {
      ++found;
    } else if (policy == MissingPolicy::kError) {
      throw Error(ErrorKind::kMissingTerm, "no embedding for '" + vocab.terms[t] + "'");
    }
  }
  x.coverage = vocab.size() == 0 ? 1.0
                                 : static_cast<double>(found) / static_cast<double>(vocab.size());
  return x;
}

struct EmbeddedCorpus {
  Corpus corpus;
  EmbeddingMatrix embeddings;
  std::vector<std::string> dropped_terms;
  std::vector<std::string> dropped_documents;
};

/// Removes uncovered terms from the vocabulary (ids are re-densified), strips
/// them from token sequences and renormalizes the nBOW vectors. Documents
/// left empty are dropped.
inline EmbeddedCorpus restrict_to_embeddings(const Corpus& corpus,
                                             const EmbeddingMatrix& x) {
  EmbeddedCorpus out;
  const Vocabulary& vocab = corpus.vocabulary;
  std::vector<std::string> terms;
  std::vector<std::uint32_t> freqs;
  std::vector<TermId> old_ids;
  for (std::size_t t = 0; t < vocab.size(); ++t) {
    if (x.covered[t]) {
      terms.push_back(vocab.terms[t]);
      freqs.push_back(vocab.doc_freq[t]);
      old_ids.push_back(static_cast<TermId>(t));
    } else {
      out.dropped_terms.push_back(vocab.terms[t]);
    }
  }
  out.corpus.vocabulary = make_vocabulary(std::move(terms), std::move(freqs));
  const Vocabulary& kept = out.corpus.vocabulary;

  double total_tokens = 0.0;
  for (const Document& d : corpus.documents) {
    Document doc;
    doc.id = d.id;
    for (const std::string& t : d.tokens) {
      if (kept.find(t)) doc.tokens.push_back(t);
    }
    if (doc.tokens.empty()) {
      out.dropped_documents.push_back(d.id);
      continue;
    }
    doc.nbow = make_nbow(doc.tokens, kept);
    total_tokens += static_cast<double>(doc.tokens.size());
    out.corpus.documents.push_back(std::move(doc));
  }
  if (out.corpus.documents.empty()) {
    throw Error(ErrorKind::kAllDocumentsEmpty, "no document has an embedded term");
  }
  out.corpus.m_avg = total_tokens / static_cast<double>(out.corpus.documents.size());
  out.corpus.reindex();

  // doc_freq can only shrink through dropped documents, which contained no
  // covered term, so the copied frequencies stay exact.
  out.embeddings.dim = x.dim;
  out.embeddings.covered.assign(old_ids.size(), true);
  out.embeddings.data.reserve(old_ids.size() * x.dim);
  for (TermId old : old_ids) {
    const auto v = x.vector(old);
    out.embeddings.data.insert(out.embeddings.data.end(), v.begin(), v.end());
  }
  out.embeddings.coverage = 1.0;
  return out;
}

}  // namespace semflow
