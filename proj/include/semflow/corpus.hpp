#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "semflow/error.hpp"
#include "semflow/text.hpp"

namespace semflow {

using TermId = std::uint32_t;

struct RawDocument {
  std::string id;
  std::string text;
};

struct Vocabulary {
  std::vector<std::string> terms;
  std::unordered_map<std::string, TermId> term_to_id;
  std::vector<std::uint32_t> doc_freq;

  std::size_t size() const { return terms.size(); }

  std::optional<TermId> find(const std::string& term) const {
    auto it = term_to_id.find(term);
    if (it == term_to_id.end()) return std::nullopt;
    return it->second;
  }

  bool operator==(const Vocabulary&) const = default;
};

struct NBowEntry {
  TermId term;
  double weight;
  bool operator==(const NBowEntry&) const = default;
};

// Normalized bag of words: strictly increasing term ids, positive weights
// summing to one.
struct NBowVector {
  std::vector<NBowEntry> entries;

  std::size_t support() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  bool operator==(const NBowVector&) const = default;
};

struct Document {
  std::string id;
  NBowVector nbow;
  std::vector<std::string> tokens;  // retained tokens, original order
  bool operator==(const Document&) const = default;
};

struct Corpus {
  Vocabulary vocabulary;
  std::vector<Document> documents;
  double m_avg = 0.0;

  std::size_t size() const { return documents.size(); }

  // Builders call reindex() before returning, so concurrent readers never
  // trigger the lazy rebuild below.
  std::optional<std::size_t> find(const std::string& doc_id) const {
    if (id_index_.size() != documents.size()) reindex();
    auto it = id_index_.find(doc_id);
    if (it == id_index_.end()) return std::nullopt;
    return it->second;
  }

  bool operator==(const Corpus& other) const {
    return vocabulary == other.vocabulary && documents == other.documents &&
           m_avg == other.m_avg;
  }

  void reindex() const {
    id_index_.clear();
    for (std::size_t i = 0; i < documents.size(); ++i) id_index_[documents[i].id] = i;
  }

 private:
  mutable std::unordered_map<std::string, std::size_t> id_index_;
};

inline Vocabulary make_vocabulary(std::vector<std::string> terms,
                                  std::vector<std::uint32_t> doc_freq) {
  Vocabulary v;
  v.terms = std::move(terms);
  v.doc_freq = std::move(doc_freq);
  v.term_to_id.reserve(v.terms.size());
  for (std::size_t i = 0; i < v.terms.size(); ++i) {
    v.term_to_id.emplace(v.terms[i], static_cast<TermId>(i));
  }
  return v;
}

/// Count-normalized bag of words over the tokens known to `vocab`; unknown
/// tokens are skipped. Empty when no token is known.
inline NBowVector make_nbow(const std::vector<std::string>& tokens,
                            const Vocabulary& vocab) {
  std::map<TermId, std::size_t> counts;
  std::size_t total = 0;
  for (const std::string& t : tokens) {
    if (auto id = vocab.find(t)) {
      ++counts[*id];
      ++total;
    }
  }
  NBowVector out;
  out.entries.reserve(counts.size());
  for (const auto& [term, count] : counts) {
    out.entries.push_back({term, static_cast<double>(count) / static_cast<double>(total)});
  }
  return out;
}

struct CorpusOptions {
  std::size_t prune_top = 30;
};

/// Builds the vocabulary and nBOW vectors. The `prune_top` terms with the
/// highest total count are removed (ties broken lexicographically) before
/// normalization. Documents left without tokens are dropped and their ids
/// appended to `excluded` when given.
inline Corpus build_corpus(const std::vector<RawDocument>& docs,
                           const StopwordSet& stopwords,
                           const CorpusOptions& options = {},
                           std::vector<std::string>* excluded = nullptr) {
  std::unordered_set<std::string> seen_ids;
  std::vector<std::vector<std::string>> tokenized;
  tokenized.reserve(docs.size());
  std::unordered_map<std::string, std::size_t> totals;
  for (const RawDocument& d : docs) {
    if (d.id.empty() || d.id.find_first_of("\t\n\r") != std::string::npos) {
      throw Error(ErrorKind::kInvalidArgument, "invalid document id '" + d.id + "'");
    }
    if (!seen_ids.insert(d.id).second) {
      throw Error(ErrorKind::kInvalidArgument, "duplicate document id '" + d.id + "'");
    }
    tokenized.push_back(preprocess(d.text, stopwords));
    for (const std::string& t : tokenized.back()) ++totals[t];
  }

  std::vector<std::pair<std::string, std::size_t>> ranked(totals.begin(), totals.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::unordered_set<std::string> pruned;
  for (std::size_t i = 0; i < std::min(options.prune_top, ranked.size()); ++i) {
    pruned.insert(ranked[i].first);
  }

  std::vector<std::size_t> kept_docs;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    auto& toks = tokenized[i];
    std::erase_if(toks, [&](const std::string& t) { return pruned.contains(t); });
    if (toks.empty()) {
      if (excluded) excluded->push_back(docs[i].id);
    } else {
      kept_docs.push_back(i);
    }
  }
  if (kept_docs.empty()) {
    throw Error(ErrorKind::kAllDocumentsEmpty,
                "no document has tokens left after preprocessing");
  }

  std::map<std::string, std::uint32_t> df;
  for (std::size_t i : kept_docs) {
    std::unordered_set<std::string> uniq(tokenized[i].begin(), tokenized[i].end());
    for (const std::string& t : uniq) ++df[t];
  }
  std::vector<std::string> terms;
  std::vector<std::uint32_t> freqs;
  terms.reserve(df.size());
  for (const auto& [t, f] : df) {
    terms.push_back(t);
    freqs.push_back(f);
  }

  Corpus corpus;
  corpus.vocabulary = make_vocabulary(std::move(terms), std::move(freqs));
  double total_tokens = 0.0;
  for (std::size_t i : kept_docs) {
    Document doc;
    doc.id = docs[i].id;
    doc.tokens = std::move(tokenized[i]);
    doc.nbow = make_nbow(doc.tokens, corpus.vocabulary);
    total_tokens += static_cast<double>(doc.tokens.size());
    corpus.documents.push_back(std::move(doc));
  }
  corpus.m_avg = total_tokens / static_cast<double>(corpus.documents.size());
  corpus.reindex();
  return corpus;
}

/// ln(pool_size / df).
inline double idf(std::size_t df, std::size_t pool_size) {
  if (df == 0 || df > pool_size) {
    throw Error(ErrorKind::kDomain, "idf needs 1 <= df <= pool size (df=" +
                                        std::to_string(df) + ", pool=" +
                                        std::to_string(pool_size) + ")");
  }
  return std::log(static_cast<double>(pool_size) / static_cast<double>(df));
}

// ---------------------------------------------------------------------------
// Index file.
//
//   SEMFLOW-INDEX v1 <n> <N> <m_avg>
//   term \t doc_freq                                   (n lines)
//   doc_id \t term_id:weight,... \t tok tok ...        (N lines)

inline void save_index(const Corpus& corpus, const std::string& path) {
  std::ofstream out = open_output(path);
  out << "SEMFLOW-INDEX v1 " << corpus.vocabulary.size() << ' ' << corpus.size()
      << ' ' << format_double(corpus.m_avg, 17) << '\n';
  for (std::size_t t = 0; t < corpus.vocabulary.size(); ++t) {
    out << corpus.vocabulary.terms[t] << '\t' << corpus.vocabulary.doc_freq[t] << '\n';
  }
  for (const Document& d : corpus.documents) {
    out << d.id << '\t';
    for (std::size_t i = 0; i < d.nbow.entries.size(); ++i) {
      if (i) out << ',';
      out << d.nbow.entries[i].term << ':' << format_double(d.nbow.entries[i].weight, 12);
    }
    out << '\t' << join(d.tokens, " ") << '\n';
  }
  if (!out) throw Error(ErrorKind::kIo, "write failed for '" + path + "'");
}

namespace detail {

inline std::uint64_t parse_count(const std::string& s, const std::string& src,
                                 std::size_t line) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw FormatError(src, line, "expected a non-negative integer, got '" + s + "'");
  }
  try {
    return std::stoull(s);
  } catch (const std::exception&) {
    throw FormatError(src, line, "integer out of range: '" + s + "'");
  }
}

inline double parse_real(const std::string& s, const std::string& src, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw FormatError(src, line, "expected a number, got '" + s + "'");
  }
  if (used != s.size() || !std::isfinite(v)) {
    throw FormatError(src, line, "expected a finite number, got '" + s + "'");
  }
  return v;
}

}  // namespace detail

/// Loads an index written by save_index. Stored weights are checked against
/// the token sequence and the exact recomputed values are kept, so a
/// save/load round trip reproduces the corpus exactly.
inline Corpus load_index(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw FormatError(path, 1, "empty index file");
  const std::vector<std::string> header = split(lines[0], ' ');
  if (header.size() != 5 || header[0] != "SEMFLOW-INDEX" || header[1] != "v1") {
    throw FormatError(path, 1, "bad header, expected 'SEMFLOW-INDEX v1 <n> <N> <m_avg>'");
  }
  const std::uint64_t n = detail::parse_count(header[2], path, 1);
  const std::uint64_t num_docs = detail::parse_count(header[3], path, 1);
  const double m_avg = detail::parse_real(header[4], path, 1);
  if (lines.size() < 1 + n + num_docs) {
    throw FormatError(path, lines.size() + 1, "truncated index: expected " +
                                                  std::to_string(1 + n + num_docs) +
                                                  " lines");
  }
  for (std::size_t i = 1 + n + num_docs; i < lines.size(); ++i) {
    if (!lines[i].empty()) throw FormatError(path, i + 1, "trailing data");
  }

  std::vector<std::string> terms;
  std::vector<std::uint32_t> freqs;
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t ln = 2 + t;
    const auto cols = split(lines[1 + t], '\t');
    if (cols.size() != 2 || cols[0].empty()) {
      throw FormatError(path, ln, "expected 'term<TAB>doc_freq'");
    }
    const std::uint64_t f = detail::parse_count(cols[1], path, ln);
    if (f == 0) throw FormatError(path, ln, "doc_freq must be >= 1");
    terms.push_back(cols[0]);
    freqs.push_back(static_cast<std::uint32_t>(f));
  }

  Corpus corpus;
  corpus.vocabulary = make_vocabulary(std::move(terms), std::move(freqs));
  if (corpus.vocabulary.term_to_id.size() != n) {
    throw FormatError(path, 0, "duplicate vocabulary terms");
  }
  double total_tokens = 0.0;
  std::unordered_set<std::string> ids;
  for (std::size_t d = 0; d < num_docs; ++d) {
    const std::size_t ln = 2 + n + d;
    const auto cols = split(lines[1 + n + d], '\t');
    if (cols.size() != 3 || cols[0].empty()) {
      throw FormatError(path, ln, "expected 'doc_id<TAB>nbow<TAB>tokens'");
    }
    if (!ids.insert(cols[0]).second) {
      throw FormatError(path, ln, "duplicate document id '" + cols[0] + "'");
    }
    Document doc;
    doc.id = cols[0];
    doc.tokens = cols[2].empty() ? std::vector<std::string>{} : split(cols[2], ' ');
    for (const std::string& t : doc.tokens) {
      if (!corpus.vocabulary.find(t)) {
        throw FormatError(path, ln, "token '" + t + "' not in vocabulary");
      }
    }
    doc.nbow = make_nbow(doc.tokens, corpus.vocabulary);
    const auto pairs = cols[1].empty() ? std::vector<std::string>{} : split(cols[1], ',');
    if (pairs.size() != doc.nbow.entries.size() || pairs.empty()) {
      throw FormatError(path, ln, "nBOW support does not match the token sequence");
    }
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto kv = split(pairs[i], ':');
      if (kv.size() != 2) throw FormatError(path, ln, "bad nBOW entry '" + pairs[i] + "'");
      const std::uint64_t term = detail::parse_count(kv[0], path, ln);
      const double w = detail::parse_real(kv[1], path, ln);
      const NBowEntry& expect = doc.nbow.entries[i];
      if (term >= n || term != expect.term || std::abs(w - expect.weight) > 1e-9) {
        throw FormatError(path, ln, "nBOW entry '" + pairs[i] +
                                        "' inconsistent with the token sequence");
      }
    }
    total_tokens += static_cast<double>(doc.tokens.size());
    corpus.documents.push_back(std::move(doc));
  }
  if (num_docs > 0) {
    corpus.m_avg = total_tokens / static_cast<double>(num_docs);
    if (std::abs(corpus.m_avg - m_avg) > 1e-9 * std::max(1.0, m_avg)) {
      throw FormatError(path, 1, "m_avg does not match the documents");
    }
  }
  corpus.reindex();
  return corpus;
}

/// Reads `doc_id<TAB>text` lines; blank lines are skipped.
inline std::vector<RawDocument> load_raw_corpus(const std::string& path) {
  std::vector<RawDocument> docs;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const std::size_t tab = lines[i].find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw FormatError(path, i + 1, "expected 'doc_id<TAB>text'");
    }
    docs.push_back({lines[i].substr(0, tab), lines[i].substr(tab + 1)});
  }
  return docs;
}

}  // namespace semflow
