#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <exception>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "semflow/config.hpp"
#include "semflow/graph.hpp"
#include "semflow/propagate.hpp"
#include "semflow/rng.hpp"
#include "semflow/seeding.hpp"
#include "semflow/topics.hpp"
#include "semflow/transport.hpp"

namespace semflow {

/// Everything a query needs. The topic model must have been fitted on
/// `corpus`, and `embeddings` must cover its whole vocabulary.
struct Artifacts {
  Corpus corpus;
  EmbeddingMatrix embeddings;
  TopicModel model;
};

inline Artifacts load_artifacts(const std::string& index_path, const std::string& topics_path,
                                const std::string& embeddings_path) {
  Artifacts a;
  a.corpus = load_index(index_path);
  // Index terms were restricted to embedded words at build time; a gap here
  // means the files do not belong together.
  a.embeddings = load_embeddings(embeddings_path, a.corpus.vocabulary, MissingPolicy::kError);
  a.model = load_topic_model(topics_path, a.corpus.vocabulary);
  const auto& ids = a.model.doc_ids();
  bool match = ids.size() == a.corpus.size();
  for (std::size_t i = 0; match && i < ids.size(); ++i) match = ids[i] == a.corpus.documents[i].id;
  if (!match) throw FormatError(topics_path, 0, "topic model was fitted on a different index");
  return a;
}

/// Per-query propagation seed: independent of evaluation order and threads.
inline std::uint64_t query_seed(std::uint64_t seed, std::string_view query_id) {
  return mix_seed(seed ^ hash_string(query_id));
}

struct QueryResult {
  QueryGraph graph;
  SeedSet seeds;
  LabelState state;
  std::vector<RankedDoc> ranking;
};

inline QueryResult run_query(const Query& q, const SearchIndex& index, const TopicModel& model,
                             const Config& c, const TraceSink& trace = {}) {
  const RetrievalParams rp = c.resolved_retrieval();
  CostCache costs(index.embeddings());
  QueryResult r;
  r.graph = build_query_subgraph(q, index, rp, costs);
  augment_feature_nodes(r.graph, index.corpus(), r.graph.candidate_pool, rp.features);
  r.seeds = assign_seeds(r.graph, model, c.k_prime);
  PropagationParams pp = c.propagate;
  pp.rng_seed = query_seed(c.seed, q.id);
  r.state = propagate(make_propagation_graph(r.graph), r.seeds, pp, trace);
  r.ranking = rank_nodes(r.state, r.graph, c.k_out);
  return r;
}

/// Plain WMD k-NN over the same WCD prefetch pool; labels are reported as 0.
inline std::vector<RankedDoc> wmd_baseline(const Query& q, const SearchIndex& index, const Config& c) {
  const RetrievalParams rp = c.resolved_retrieval();
  std::vector<std::size_t> exclude;
  if (q.doc) exclude.push_back(*q.doc);
  const auto pool = prefetch_wcd(q.nbow, index, std::max(rp.prefetch, c.k_out), exclude);
  std::vector<std::size_t> ids;
  for (const Neighbor& nb : pool) ids.push_back(nb.doc);
  CostCache costs(index.embeddings());
  std::vector<RankedDoc> out;
  for (const Neighbor& nb : knn_wmd(q.nbow, ids, index.corpus(), costs, std::min(c.k_out, ids.size()))) {
    out.push_back({index.corpus().documents[nb.doc].id, 0.0, nb.distance});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation.

/// Query id → relevant doc ids. Both sides must be indexed documents.
using Qrels = std::map<std::string, std::set<std::string>>;

/// `query<TAB>relevant` pairs; a line holding only a query id registers it
/// with no relevant documents.
inline Qrels load_qrels(const std::string& path, const Corpus& corpus) {
  Qrels q;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = split(lines[i], '\t');
    if (f.size() > 2 || f[0].empty()) throw FormatError(path, i + 1, "expected 'query<TAB>relevant'");
    if (!corpus.find(f[0])) throw FormatError(path, i + 1, "unknown query document '" + f[0] + "'");
    auto& rel = q[f[0]];
    if (f.size() == 2 && !f[1].empty()) {
      if (!corpus.find(f[1])) throw FormatError(path, i + 1, "unknown relevant document '" + f[1] + "'");
      rel.insert(f[1]);
    }
  }
  return q;
}

inline constexpr std::array<std::size_t, 3> kCutoffs{1, 5, 10};

struct QueryOutcome {
  std::string query_id;
  std::vector<std::string> retrieved;
  std::vector<std::size_t> hit_ranks;  // 1-based ranks of relevant results
  std::size_t relevant = 0;
  bool no_dominant_topic = false;
  bool converged = true;
  std::size_t iterations = 0;
};

struct EvalReport {
  std::string method;
  std::vector<QueryOutcome> queries;  // sorted by query id
  std::map<std::size_t, double> hit_rate;
  std::map<std::size_t, double> precision;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["method"] = method;
    j["queries"] = queries.size();
    for (std::size_t k : kCutoffs) {
      j["hit_rate"]["@" + std::to_string(k)] = hit_rate.at(k);
      j["precision"]["@" + std::to_string(k)] = precision.at(k);
    }
    j["per_query"] = nlohmann::ordered_json::array();
    for (const QueryOutcome& q : queries) {
      nlohmann::ordered_json e;
      e["query"] = q.query_id;
      e["relevant"] = q.relevant;
      e["retrieved"] = q.retrieved;
      e["hit_ranks"] = q.hit_ranks;
      if (method == "ssg") {
        e["converged"] = q.converged;
        e["iterations"] = q.iterations;
        e["no_dominant_topic"] = q.no_dominant_topic;
      }
      j["per_query"].push_back(std::move(e));
    }
    return j;
  }
};

/// Hit-rate@k (any relevant result in the top k) and strict precision@k
/// (relevant results in the top k, divided by k), averaged over queries.
inline void score_report(EvalReport& r) {
  const double n = static_cast<double>(r.queries.size());
  for (std::size_t k : kCutoffs) {
    std::size_t hit_queries = 0, hits = 0;
    for (const QueryOutcome& q : r.queries) {
      const auto in_top = static_cast<std::size_t>(
          std::count_if(q.hit_ranks.begin(), q.hit_ranks.end(), [&](std::size_t rank) { return rank <= k; }));
      hit_queries += in_top > 0;
      hits += in_top;
    }
    r.hit_rate[k] = r.queries.empty() ? 0.0 : static_cast<double>(hit_queries) / n;
    r.precision[k] = r.queries.empty() ? 0.0 : static_cast<double>(hits) / (n * static_cast<double>(k));
  }
}

inline QueryOutcome outcome_of(const std::string& id, const std::vector<RankedDoc>& ranking,
                               const std::set<std::string>& relevant) {
  QueryOutcome o;
  o.query_id = id;
  o.relevant = relevant.size();
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    o.retrieved.push_back(ranking[i].doc_id);
    if (relevant.count(ranking[i].doc_id)) o.hit_ranks.push_back(i + 1);
  }
  return o;
}

/// Runs every qrels query (an indexed document) with `c.method`. Queries fan
/// out over `c.threads` workers; the report does not depend on scheduling.
inline EvalReport evaluate(const Artifacts& a, const Qrels& qrels, const Config& c) {
  c.validate();
  const SearchIndex index(a.corpus, a.embeddings);
  std::vector<const Qrels::value_type*> todo;
  for (const auto& entry : qrels) todo.push_back(&entry);

  EvalReport report;
  report.method = c.method == RankingMethod::kSsg ? "ssg" : "wmd";
  report.queries.resize(todo.size());
  std::vector<std::exception_ptr> errors(todo.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < todo.size(); i = next++) {
      try {
        const auto& [id, relevant] = *todo[i];
        const Query q = query_from_document(a.corpus, *a.corpus.find(id));
        if (c.method == RankingMethod::kWmd) {
          report.queries[i] = outcome_of(id, wmd_baseline(q, index, c), relevant);
        } else {
          const QueryResult r = run_query(q, index, a.model, c);
          QueryOutcome o = outcome_of(id, r.ranking, relevant);
          o.no_dominant_topic = r.seeds.no_dominant_topic;
          o.converged = r.state.converged;
          o.iterations = r.state.iteration;
          report.queries[i] = std::move(o);
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::min(c.threads, std::max<std::size_t>(todo.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  score_report(report);
  return report;
}

}  // namespace semflow
