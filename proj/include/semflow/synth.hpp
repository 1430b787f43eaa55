#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "semflow/error.hpp"
#include "semflow/rng.hpp"
#include "semflow/text.hpp"

namespace semflow {

/// Planted-structure corpus. Each base document draws a fraction `alpha` of
/// its content tokens from its dominant topic (half from the topic's
/// exclusive catchwords, half from shared background words with per-topic
/// weights) and the rest uniformly from the background. Frequent filler
/// words and stopwords are mixed in so the index's pruning has something to
/// remove. The first `clusters` documents each get one paraphrased copy whose
/// content tokens are swapped, with probability `noise`, for a nearby
/// variant word.
struct SynthSpec {
  std::size_t topics = 5;
  std::size_t docs = 500;         // base documents, copies excluded
  std::size_t vocab = 150;        // catchwords + background words
  std::size_t clusters = 100;     // duplicate pairs
  double noise = 0.3;
  double alpha = 0.9;
  std::size_t catchwords = 10;    // per topic
  std::size_t dim = 16;
  std::size_t min_length = 60;    // content tokens per document
  std::size_t max_length = 80;
  std::size_t fillers = 30;
  std::size_t variants = 3;       // substitutes per content word

  std::size_t background() const { return vocab - topics * catchwords; }

  void validate() const {
    auto bad = [](const std::string& m) { throw Error(ErrorKind::kInvalidArgument, "synth: " + m); };
    if (topics < 1) bad("topics must be >= 1");
    if (docs < topics) bad("docs must be >= topics");
    if (catchwords < 1) bad("catchwords must be >= 1");
    if (vocab <= topics * catchwords) bad("vocab must exceed topics * catchwords");
    if (clusters > docs) bad("clusters must be <= docs");
    if (!(noise >= 0.0 && noise <= 1.0)) bad("noise must be in [0,1]");
    if (!(alpha > 0.0 && alpha <= 1.0)) bad("alpha must be in (0,1]");
    if (dim < 1) bad("dim must be >= 1");
    if (min_length < 1 || max_length < min_length) bad("need 1 <= min_length <= max_length");
    if (noise > 0.0 && variants < 1) bad("variants must be >= 1 when noise > 0");
  }
};

struct SynthDoc {
  std::string id;
  std::size_t topic;
  std::vector<std::string> tokens;
};

struct SynthCorpus {
  std::vector<SynthDoc> docs;                         // base documents, then copies
  std::vector<std::pair<std::string, std::string>> qrels;  // copy -> original
  std::vector<std::vector<std::string>> catchwords;   // per topic
  std::vector<std::string> stopwords;
  std::vector<std::pair<std::string, std::vector<double>>> embeddings;
};

namespace detail {

inline const std::vector<std::string>& synth_stopwords() {
  static const std::vector<std::string> words{"the", "a", "of", "and", "to", "is", "in", "it"};
  return words;
}

inline std::size_t draw_weighted(Rng& rng, const std::vector<double>& cumulative) {
  const double u = rng.uniform() * cumulative.back();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

inline std::string pad(std::size_t i, std::size_t width) {
  std::string s = std::to_string(i);
  return std::string(width > s.size() ? width - s.size() : 0, '0') + s;
}

}  // namespace detail

inline SynthCorpus generate_synth(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  const std::size_t nb = spec.background();
  SynthCorpus out;

  std::vector<std::string> background(nb), fillers(spec.fillers);
  out.catchwords.resize(spec.topics);
  for (std::size_t l = 0; l < spec.topics; ++l) {
    for (std::size_t i = 0; i < spec.catchwords; ++i) {
      out.catchwords[l].push_back("t" + std::to_string(l) + "c" + std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < nb; ++i) background[i] = "bg" + std::to_string(i);
  for (std::size_t i = 0; i < spec.fillers; ++i) fillers[i] = "fl" + std::to_string(i);
  out.stopwords = detail::synth_stopwords();

  // Embeddings: catchwords cluster around their topic centre, everything else
  // is isotropic; variants sit close to their base word.
  auto gaussian = [&](double scale) {
    std::vector<double> v(spec.dim);
    for (double& x : v) x = scale * rng.normal();
    return v;
  };
  std::vector<std::vector<double>> centers;
  for (std::size_t l = 0; l < spec.topics; ++l) centers.push_back(gaussian(1.0));
  std::vector<std::pair<std::string, std::vector<double>>> base_vectors;
  for (std::size_t l = 0; l < spec.topics; ++l) {
    for (const std::string& w : out.catchwords[l]) {
      auto v = gaussian(0.3);
      for (std::size_t d = 0; d < spec.dim; ++d) v[d] += centers[l][d];
      base_vectors.emplace_back(w, std::move(v));
    }
  }
  for (const std::string& w : background) base_vectors.emplace_back(w, gaussian(1.0));
  std::map<std::string, std::vector<std::string>> variants_of;
  for (const auto& [w, v] : base_vectors) {
    out.embeddings.emplace_back(w, v);
    for (std::size_t n = 1; n <= spec.variants; ++n) {
      auto u = gaussian(0.1);
      for (std::size_t d = 0; d < spec.dim; ++d) u[d] += v[d];
      const std::string name = w + "v" + std::to_string(n);
      variants_of[w].push_back(name);
      out.embeddings.emplace_back(name, std::move(u));
    }
  }
  for (const std::string& w : fillers) out.embeddings.emplace_back(w, gaussian(1.0));

  // Topic distributions over the background share.
  std::vector<std::vector<double>> topic_bg(spec.topics, std::vector<double>(nb));
  for (auto& cum : topic_bg) {
    double acc = 0.0;
    for (double& x : cum) x = acc += 0.5 + rng.uniform();
  }

  const std::size_t width = std::to_string(spec.docs).size() + 1;
  for (std::size_t j = 0; j < spec.docs; ++j) {
    SynthDoc doc{"d" + detail::pad(j, width), j % spec.topics, {}};
    const std::size_t len = spec.min_length + rng.below(spec.max_length - spec.min_length + 1);
    for (std::size_t t = 0; t < len; ++t) {
      if (rng.bernoulli(spec.alpha)) {
        if (rng.bernoulli(0.5)) {
          doc.tokens.push_back(out.catchwords[doc.topic][rng.below(spec.catchwords)]);
        } else {
          doc.tokens.push_back(background[detail::draw_weighted(rng, topic_bg[doc.topic])]);
        }
      } else {
        doc.tokens.push_back(background[rng.below(nb)]);
      }
      // Fillers add about half as many tokens again; stopwords a tenth.
      if (spec.fillers > 0 && rng.bernoulli(0.5)) doc.tokens.push_back(fillers[rng.below(spec.fillers)]);
      if (rng.bernoulli(0.1)) doc.tokens.push_back(out.stopwords[rng.below(out.stopwords.size())]);
    }
    out.docs.push_back(std::move(doc));
  }

  for (std::size_t j = 0; j < spec.clusters; ++j) {
    SynthDoc copy = out.docs[j];
    copy.id += "x1";
    for (std::string& t : copy.tokens) {
      const auto it = variants_of.find(t);
      if (it == variants_of.end() || !rng.bernoulli(spec.noise)) continue;
      t = it->second[rng.below(it->second.size())];
    }
    out.qrels.emplace_back(copy.id, out.docs[j].id);
    out.docs.push_back(std::move(copy));
  }
  return out;
}

/// Writes corpus.tsv, embeddings.txt, qrels.tsv, stopwords.txt, labels.tsv
/// (planted dominant topic per document) and catchwords.tsv into `dir`.
inline void write_synth(const SynthCorpus& s, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create " + dir + ": " + ec.message());
  const std::filesystem::path root(dir);
  auto file = [&](const char* name) { return open_output((root / name).string()); };

  auto corpus = file("corpus.tsv");
  auto labels = file("labels.tsv");
  for (const SynthDoc& d : s.docs) {
    corpus << d.id << '\t' << join(d.tokens, " ") << '\n';
    labels << d.id << '\t' << d.topic << '\n';
  }
  auto qrels = file("qrels.tsv");
  for (const auto& [q, r] : s.qrels) qrels << q << '\t' << r << '\n';
  auto stop = file("stopwords.txt");
  for (const auto& w : s.stopwords) stop << w << '\n';
  auto cw = file("catchwords.tsv");
  for (std::size_t l = 0; l < s.catchwords.size(); ++l) cw << l << '\t' << join(s.catchwords[l], ",") << '\n';
  auto emb = file("embeddings.txt");
  emb << s.embeddings.size() << ' ' << (s.embeddings.empty() ? 0 : s.embeddings[0].second.size()) << '\n';
  char buf[32];
  for (const auto& [w, v] : s.embeddings) {
    emb << w;
    for (double x : v) {
      std::snprintf(buf, sizeof buf, " %.6f", x);
      emb << buf;
    }
    emb << '\n';
  }
  for (auto* f : {&corpus, &labels, &qrels, &stop, &cw, &emb}) {
    f->flush();
    if (!*f) throw Error(ErrorKind::kIo, "failed writing into " + dir);
  }
}

}  // namespace semflow
