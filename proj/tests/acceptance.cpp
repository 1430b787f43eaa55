// Acceptance gate: one PASS/FAIL line per criterion; exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "oracles.hpp"
#include "semflow/commands.hpp"
#include "test_util.hpp"

namespace semflow {
namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Records the first few failures of a check and keeps a count.
struct Check {
  bool ok = true;
  std::size_t failures = 0;
  std::string first;

  void expect(bool cond, const std::string& what) {
    if (cond) return;
    ok = false;
    if (failures++ == 0) first = what;
  }
  std::string summary() const {
    return ok ? "" : " (" + std::to_string(failures) + " failures; first: " + first + ")";
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string scratch(const std::string& name) {
  const std::string dir = testing::tmp_path("acceptance/" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

double oracle_wmd(const NBowVector& a, const NBowVector& b, const EmbeddingMatrix& x) {
  std::vector<double> s, d, c;
  for (const auto& e : a.entries) s.push_back(e.weight);
  for (const auto& e : b.entries) d.push_back(e.weight);
  for (const auto& ea : a.entries) {
    for (const auto& eb : b.entries) {
      const auto va = x.vector(ea.term), vb = x.vector(eb.term);
      double sq = 0.0;
      for (std::size_t k = 0; k < x.dim; ++k) sq += (va[k] - vb[k]) * (va[k] - vb[k]);
      c.push_back(std::sqrt(sq));
    }
  }
  return oracle::transport_by_vertex_enumeration(s, d, c);
}

double max_marginal_residual(const NBowVector& a, const NBowVector& b, const TransportPlan& plan) {
  double worst = 0.0;
  for (const auto& e : a.entries) {
    double row = 0.0;
    for (const auto& f : plan.flows) row += f.source == e.term ? f.mass : 0.0;
    worst = std::max(worst, std::abs(row - e.weight));
  }
  for (const auto& e : b.entries) {
    double col = 0.0;
    for (const auto& f : plan.flows) col += f.target == e.term ? f.mass : 0.0;
    worst = std::max(worst, std::abs(col - e.weight));
  }
  return worst;
}

// 200 random pairs over a 10-word, 4-dimensional vocabulary, plus a third
// document per pair for the triangle inequality.
struct TransportCase {
  EmbeddingMatrix x;
  std::vector<std::array<NBowVector, 3>> triples;
};

TransportCase transport_case() {
  Rng rng(2024);
  TransportCase t;
  t.x = testing::random_embeddings(rng, 10, 4);
  for (int i = 0; i < 200; ++i) {
    t.triples.push_back({testing::random_nbow(rng, 10, 6), testing::random_nbow(rng, 10, 6),
                         testing::random_nbow(rng, 10, 6)});
  }
  return t;
}

Outcome criterion1(const TransportCase& t) {
  Check c;
  std::size_t oracle_checked = 0;
  for (std::size_t i = 0; i < t.triples.size(); ++i) {
    const auto& [a, b, z] = t.triples[i];
    const std::string tag = "pair " + std::to_string(i);
    const WmdResult ab = wmd(a, b, t.x), ba = wmd(b, a, t.x);
    const double az = wmd(a, z, t.x).distance, bz = wmd(b, z, t.x).distance;
    c.expect(std::abs(ab.distance - ba.distance) <= 1e-9, tag + " symmetry");
    c.expect(az <= ab.distance + bz + 1e-9, tag + " triangle");
    c.expect(max_marginal_residual(a, b, ab.plan) < 1e-7, tag + " marginals");
    if (a.support() <= 4 && b.support() <= 4) {
      ++oracle_checked;
      c.expect(std::abs(ab.distance - oracle_wmd(a, b, t.x)) <= 1e-8, tag + " oracle");
    }
  }
  c.expect(oracle_checked >= 50, "too few pairs with supports <= 4");
  return {c.ok, "200 pairs, " + std::to_string(oracle_checked) + " against vertex enumeration" + c.summary()};
}

Outcome criterion2(const TransportCase& t) {
  Check c;
  double slack = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < t.triples.size(); ++i) {
    const auto& [a, b, z] = t.triples[i];
    const double lb = wcd(a, b, t.x), d = wmd(a, b, t.x).distance;
    slack = std::min(slack, d - lb);
    c.expect(lb <= d + 1e-9, "pair " + std::to_string(i));
  }
  return {c.ok, "min wmd-wcd " + fmt(slack) + c.summary()};
}

// Indexes a generated corpus through the real build path.
struct Built {
  Corpus corpus;
  EmbeddingMatrix x;
  SynthCorpus synth;
  std::string dir;
};

Built build(const SynthSpec& spec, std::uint64_t seed, const std::string& name, const Config& c = {}) {
  Built b;
  b.dir = scratch(name);
  b.synth = cmd_synth(spec, b.dir, seed);
  Config cc = c;
  cc.stopwords_path = b.dir + "/stopwords.txt";
  std::ostringstream log;
  cmd_index(b.dir + "/corpus.tsv", b.dir + "/embeddings.txt", b.dir + "/index", cc, log);
  b.corpus = load_index(b.dir + "/index");
  b.x = load_embeddings(b.dir + "/embeddings.txt", b.corpus.vocabulary, MissingPolicy::kError);
  return b;
}

SynthSpec two_hundred_docs() {
  SynthSpec s;
  s.docs = 200;
  s.clusters = 0;
  s.min_length = 20;
  s.max_length = 30;
  return s;
}

Outcome criterion3(const Built& b) {
  Check c;
  const std::size_t k = 5;
  const SearchIndex index(b.corpus, b.x);
  Config cfg;
  cfg.retrieval.k = k;
  cfg.prefetch = b.corpus.size() - 1;
  cfg.k_out = k;
  std::size_t queries = 0;
  for (std::size_t qd = 0; qd < b.corpus.size(); qd += 10, ++queries) {
    const std::string tag = "query " + b.corpus.documents[qd].id;
    std::vector<std::pair<double, std::string>> brute;
    for (std::size_t d = 0; d < b.corpus.size(); ++d) {
      if (d == qd) continue;
      brute.emplace_back(wmd(b.corpus.documents[qd].nbow, b.corpus.documents[d].nbow, b.x).distance,
                         b.corpus.documents[d].id);
    }
    std::sort(brute.begin(), brute.end());
    const Query q = query_from_document(b.corpus, qd);
    CostCache costs(b.x);
    const QueryGraph g = build_query_subgraph(q, index, cfg.resolved_retrieval(), costs);
    const auto baseline = wmd_baseline(q, index, cfg);
    c.expect(baseline.size() == k, tag + " baseline size");
    for (std::size_t i = 0; i < k && i < baseline.size(); ++i) {
      c.expect(g.real_nodes[i + 1].hop == 1 && g.real_nodes[i + 1].id == brute[i].second, tag + " graph rank " + std::to_string(i));
      c.expect(baseline[i].doc_id == brute[i].second && baseline[i].wmd == brute[i].first,
               tag + " baseline rank " + std::to_string(i));
    }
  }
  return {c.ok, std::to_string(queries) + " queries on " + std::to_string(b.corpus.size()) + " docs" + c.summary()};
}

Outcome criterion4(const Built& b) {
  Check c;
  Rng rng(4);
  const SearchIndex index(b.corpus, b.x);
  Config cfg;
  cfg.retrieval.k = 5;
  const RetrievalParams rp = cfg.resolved_retrieval();
  std::size_t largest = 0, features = 0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t qd = rng.below(b.corpus.size());
    const std::string tag = "query " + b.corpus.documents[qd].id;
    CostCache costs(b.x);
    QueryGraph g = build_query_subgraph(query_from_document(b.corpus, qd), index, rp, costs);
    augment_feature_nodes(g, b.corpus, g.candidate_pool, rp.features);
    const std::size_t r = g.real_nodes.size();
    largest = std::max(largest, r);
    features += g.feature_nodes.size();
    c.expect(r <= 31, tag + " has " + std::to_string(r) + " real nodes");
    std::vector<std::size_t> degree(g.feature_nodes.size(), 0);
    for (const FeatureEdge& e : g.feature_edges) {
      c.expect(e.real < r && e.feature < g.feature_nodes.size(), tag + " edge endpoints");
      if (e.feature < degree.size()) ++degree[e.feature];
    }
    for (std::size_t d : degree) c.expect(d >= 2, tag + " feature degree " + std::to_string(d));
  }
  return {c.ok, "max |V_R| " + std::to_string(largest) + ", " + std::to_string(features) + " feature nodes" + c.summary()};
}

// Fraction of documents whose recovered topic matches the planted one under
// the best relabelling, and the best permutation itself.
std::pair<double, std::vector<std::size_t>> best_permutation(const std::vector<std::size_t>& found,
                                                             const std::vector<std::size_t>& planted,
                                                             std::size_t k) {
  std::vector<std::vector<std::size_t>> counts(k, std::vector<std::size_t>(k, 0));
  for (std::size_t j = 0; j < found.size(); ++j) ++counts[found[j]][planted[j]];
  std::vector<std::size_t> perm(k), best;
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best_agree = 0;
  do {
    std::size_t agree = 0;
    for (std::size_t l = 0; l < k; ++l) agree += counts[l][perm[l]];
    if (best.empty() || agree > best_agree) best_agree = agree, best = perm;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return {static_cast<double>(best_agree) / static_cast<double>(found.size()), best};
}

Outcome criterion5() {
  SynthSpec spec;
  spec.topics = 5;
  spec.docs = 500;
  spec.alpha = 0.9;
  spec.catchwords = 10;
  spec.clusters = 0;
  const Built b = build(spec, 42, "c5");
  Config cfg;
  cfg.topics.k_topics = 5;
  std::ostringstream log;
  const TopicFit fit = cmd_topics(b.dir + "/index", b.dir + "/topics", cfg, log);

  std::map<std::string, std::size_t> planted_topic;
  for (const SynthDoc& d : b.synth.docs) planted_topic[d.id] = d.topic;
  std::vector<std::size_t> planted;
  for (const Document& d : b.corpus.documents) planted.push_back(planted_topic.at(d.id));
  const auto [recovery, perm] = best_permutation(fit.model.dominant(), planted, 5);

  std::size_t found = 0, correct = 0;
  for (std::size_t l = 0; l < 5; ++l) {
    const auto& truth = b.synth.catchwords[perm[l]];
    for (TermId t : fit.catchwords.sets[l]) {
      ++found;
      correct += std::find(truth.begin(), truth.end(), b.corpus.vocabulary.terms[t]) != truth.end();
    }
  }
  const double precision = found ? static_cast<double>(correct) / static_cast<double>(found) : 0.0;
  return {recovery >= 0.9 && precision >= 0.8,
          "recovery " + fmt(recovery) + ", catchword precision " + fmt(precision) + " (" +
              std::to_string(correct) + "/" + std::to_string(found) + ")"};
}

Outcome criterion6() {
  Rng rng(66);
  Check c;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t rows = 2 + rng.below(5), s = 4 + rng.below(12);
    DataMatrix a;
    a.rows = rows;
    double total_len = 0;
    for (std::size_t j = 0; j < s; ++j) {
      // Small integer counts make A_ij = ζ/m ties occur.
      const std::size_t len = 1 + rng.below(5);
      std::map<TermId, double> counts;
      for (std::size_t t = 0; t < len; ++t) counts[static_cast<TermId>(rng.below(rows))] += 1.0 / len;
      NBowVector v;
      for (const auto& [t, w] : counts) v.entries.push_back({t, w});
      a.columns.push_back(v);
      total_len += len;
    }
    a.m = std::max(1.0, trial % 2 ? std::round(total_len / s) : total_len / s);
    TsvdParams p;
    p.k_topics = 1 + rng.below(4);
    p.eps = 0.05 + 0.3 * rng.uniform();
    const auto z = compute_thresholds(a, p);
    for (std::size_t i = 0; i < rows; ++i) {
      std::vector<double> row(s, 0.0);
      for (std::size_t j = 0; j < s; ++j) {
        for (const auto& e : a.columns[j].entries) {
          if (e.term == i) row[j] = e.weight;
        }
      }
      c.expect(z[i] == oracle::threshold_by_enumeration(row, a.m, p.effective_w0(), p.eps),
               "trial " + std::to_string(trial) + " word " + std::to_string(i));
    }
  }
  return {c.ok, "20 matrices" + c.summary()};
}

Outcome criterion7() {
  Rng rng(77);
  Check c;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::string tag = "trial " + std::to_string(trial);
    const std::size_t n = 2 + rng.below(9);
    PropagationGraph g(n);
    std::vector<oracle::WeightedEdge> edges;
    for (std::size_t i = 1; i < n; ++i) {
      const std::size_t j = rng.below(i);
      const double w = 0.1 + 2.0 * rng.uniform();
      g.add_similarity_edge(i, j, w);
      edges.push_back({i, j, w});
    }
    SeedSet seeds;
    std::vector<double> anchor(n, -1.0);
    for (std::size_t i = 1; i < n; ++i) {
      const double u = rng.uniform();
      if (u < 0.25) {
        seeds.one_seeds.push_back({i, anchor[i] = 0.5 + 0.5 * rng.uniform()});
      } else if (u < 0.5) {
        seeds.zero_seeds.push_back({i, anchor[i] = 0.49 * rng.uniform()});
      }
    }
    PropagationParams p;
    p.mu_pp = trial % 4 == 0 ? 0.0 : 0.01 + rng.uniform();
    p.mu_np = 0.2 + rng.uniform();
    p.dropout_p = 0.0;
    p.tol = 1e-13;
    p.max_iters = 100000;
    const LabelState s = propagate(g, seeds, p);
    const auto want = oracle::propagation_fixpoint(n, edges, anchor, 0, p.mu_pp, p.mu_np);
    for (std::size_t i = 0; i < n; ++i) {
      worst = std::max(worst, std::abs(s.labels[i] - want[i]));
      c.expect(std::abs(s.labels[i] - want[i]) <= 1e-6, tag + " node " + std::to_string(i));
    }

    // Distance edges, defaults otherwise: labels stay in [0,1] and disabling
    // dropout is the same as p = 0.
    for (std::size_t i = 1; i < n; ++i) g.add_distance_edge(0, i, rng.uniform());
    PropagationParams zero;
    zero.dropout_p = 0.0;
    zero.rng_seed = static_cast<std::uint64_t>(trial);
    PropagationParams off = zero;
    off.dropout = false;
    off.rng_seed = 999;
    const LabelState a = propagate(g, seeds, zero), b = propagate(g, seeds, off);
    c.expect(a.labels == b.labels && a.iteration == b.iteration, tag + " dropout off differs from p=0");
    PropagationParams heavy;
    heavy.rng_seed = static_cast<std::uint64_t>(trial);
    for (const LabelState* st : {&a, &b}) {
      for (double v : st->labels) c.expect(v >= 0.0 && v <= 1.0, tag + " label outside [0,1]");
    }
    for (double v : propagate(g, seeds, heavy).labels) c.expect(v >= 0.0 && v <= 1.0, tag + " label outside [0,1]");
  }
  return {c.ok, "100 graphs, max |c - dense| " + fmt(worst) + c.summary()};
}

struct EndToEnd {
  Outcome retrieval;
  std::string dir;
  Config config;
};

// Settings tuned for the planted-duplicate corpus: a stronger uniform prior
// keeps the repulsive distance term from saturating far nodes at 1.
Config retrieval_config() {
  Config c;
  c.topics.k_topics = 5;
  c.retrieval.k = 5;
  c.propagate.mu_pp = 10.0;
  c.seed = 1;
  c.threads = std::max(1u, std::thread::hardware_concurrency());
  return c;
}

EndToEnd criterion8() {
  SynthSpec spec;
  spec.clusters = 100;
  spec.noise = 0.3;
  EndToEnd e;
  e.config = retrieval_config();
  const Built b = build(spec, 7, "c8", e.config);
  e.dir = b.dir;
  e.config.stopwords_path = b.dir + "/stopwords.txt";
  std::ostringstream log;
  cmd_topics(b.dir + "/index", b.dir + "/topics", e.config, log);
  const auto eval = [&](RankingMethod m) {
    Config c = e.config;
    c.method = m;
    return cmd_eval(b.dir + "/index", b.dir + "/topics", b.dir + "/embeddings.txt", b.dir + "/qrels.tsv", c);
  };
  const EvalReport ssg = eval(RankingMethod::kSsg), base = eval(RankingMethod::kWmd);
  const double h = ssg.hit_rate.at(10), hb = base.hit_rate.at(10);
  e.retrieval = {ssg.queries.size() == 100 && h >= 0.8 && h >= hb,
                 std::to_string(ssg.queries.size()) + " queries, SSG-D hit@10 " + fmt(h) + " vs WMD " + fmt(hb) +
                     " (P@1 " + fmt(ssg.precision.at(1)) + " vs " + fmt(base.precision.at(1)) + ")"};
  return e;
}

Outcome criterion9(const EndToEnd& e) {
  // The first 30 duplicate queries of the end-to-end corpus.
  std::istringstream all(testing::read_file(e.dir + "/qrels.tsv"));
  std::string line, subset;
  for (int i = 0; i < 30 && std::getline(all, line); ++i) subset += line + "\n";
  testing::write_file(e.dir + "/qrels30.tsv", subset);
  Config c = e.config;
  c.propagate.dropout_p = 0.5;
  const auto run = [&](std::size_t threads) {
    c.threads = threads;
    return cmd_eval(e.dir + "/index", e.dir + "/topics", e.dir + "/embeddings.txt", e.dir + "/qrels30.tsv", c)
        .to_json()
        .dump(2);
  };
  const std::string a = run(1), b = run(1), d = run(3);
  return {a == b && a == d && !a.empty(), "dropout_p 0.5, " + std::to_string(a.size()) + "-byte report, 1 and 3 threads"};
}

}  // namespace
}  // namespace semflow

int main() {
  using namespace semflow;
  using Clock = std::chrono::steady_clock;
  bool all = true;
  auto report = [&](int n, const std::string& name, double limit_s, const std::function<Outcome()>& f) {
    const auto start = Clock::now();
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& ex) {
      o = {false, std::string("threw: ") + ex.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    if (limit_s > 0 && secs > limit_s) {
      o.pass = false;
      o.detail += "; over the " + fmt(limit_s) + " s budget";
    }
    all = all && o.pass;
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", n, name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
  };

  const TransportCase t = transport_case();
  report(1, "transport correctness", 30, [&] { return criterion1(t); });
  report(2, "WCD lower bound", 0, [&] { return criterion2(t); });
  const Built small = build(two_hundred_docs(), 3, "c34");
  report(3, "prefetch exactness", 0, [&] { return criterion3(small); });
  report(4, "graph bound", 0, [&] { return criterion4(small); });
  report(5, "TSVD recovery", 60, [&] { return criterion5(); });
  report(6, "thresholding oracle", 0, [&] { return criterion6(); });
  report(7, "propagation oracle", 0, [&] { return criterion7(); });
  EndToEnd e;
  report(8, "end-to-end retrieval", 300, [&] {
    e = criterion8();
    return e.retrieval;
  });
  report(9, "determinism", 0, [&] { return criterion9(e); });
  return all ? 0 : 1;
}
