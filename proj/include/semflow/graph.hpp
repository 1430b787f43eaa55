#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "semflow/corpus.hpp"
#include "semflow/embeddings.hpp"
#include "semflow/error.hpp"
#include "semflow/transport.hpp"

namespace semflow {

// Lexical feature families attached to the graph as feature nodes.
enum FeatureKind : unsigned {
  kUnigrams = 1u << 0,
  kBigrams = 1u << 1,
  kTrigrams = 1u << 2,
  kSkipBigrams = 1u << 3,
  kSkipTrigrams = 1u << 4,
  kAllFeatures = (1u << 5) - 1,
};

inline constexpr std::string_view kFeatureJoiner = "\xE2\x90\x9F";  // U+241F
inline constexpr std::string_view kFeatureGap = "\xE2\x8B\x84";     // U+22C4

struct RetrievalParams {
  std::size_t k = 50;
  std::size_t prefetch = 500;
  std::optional<double> edge_threshold;
  unsigned features = kAllFeatures;

  void validate() const {
    if (k < 1) throw Error(ErrorKind::kInvalidArgument, "retrieval.k must be >= 1");
    if (prefetch < k) {
      throw Error(ErrorKind::kInvalidArgument, "retrieval.prefetch must be >= retrieval.k");
    }
    if (edge_threshold && !(*edge_threshold >= 0.0)) {
      throw Error(ErrorKind::kInvalidArgument, "retrieval.edge_threshold must be >= 0");
    }
  }
};

/// A query against the corpus. `doc` is set when the query is itself an
/// indexed document; it is then excluded from its own candidate pools.
struct Query {
  std::string id;
  NBowVector nbow;
  std::vector<std::string> tokens;
  std::optional<std::size_t> doc;
};

inline Query query_from_document(const Corpus& corpus, std::size_t doc) {
  const Document& d = corpus.documents.at(doc);
  return {d.id, d.nbow, d.tokens, doc};
}

/// Tokenizes free text against the corpus vocabulary. Tokens unknown to the
/// vocabulary are dropped; nothing left is an EmptyQuery error.
inline Query query_from_text(std::string id, std::string_view text,
                             const StopwordSet& stopwords, const Corpus& corpus) {
  Query q;
  q.id = std::move(id);
  for (std::string& t : preprocess(text, stopwords)) {
    if (corpus.vocabulary.find(t)) q.tokens.push_back(std::move(t));
  }
  q.nbow = make_nbow(q.tokens, corpus.vocabulary);
  if (q.nbow.empty()) {
    throw Error(ErrorKind::kEmptyQuery, "query has no term in the indexed vocabulary");
  }
  return q;
}

// Precomputed document centroids for WCD prefetching. Immutable; share it
// across query workers.
class SearchIndex {
 public:
  SearchIndex(const Corpus& corpus, const EmbeddingMatrix& x) : corpus_(&corpus), x_(&x) {
    if (x.size() != corpus.vocabulary.size()) {
      throw Error(ErrorKind::kInvalidArgument,
                  "embedding matrix does not match the corpus vocabulary");
    }
    centroids_.reserve(corpus.size() * x.dim);
    for (const Document& d : corpus.documents) {
      const auto c = centroid(d.nbow, x);
      centroids_.insert(centroids_.end(), c.begin(), c.end());
    }
  }

  const Corpus& corpus() const { return *corpus_; }
  const EmbeddingMatrix& embeddings() const { return *x_; }

  std::span<const double> centroid_of(std::size_t doc) const {
    return {centroids_.data() + doc * x_->dim, x_->dim};
  }

 private:
  const Corpus* corpus_;
  const EmbeddingMatrix* x_;
  std::vector<double> centroids_;
};

struct Neighbor {
  std::size_t doc;
  double distance;
  bool operator==(const Neighbor&) const = default;
};

namespace detail {

inline void sort_neighbors(std::vector<Neighbor>& v, const Corpus& corpus) {
  std::sort(v.begin(), v.end(), [&](const Neighbor& a, const Neighbor& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return corpus.documents[a.doc].id < corpus.documents[b.doc].id;
  });
}

}  // namespace detail

/// The `prefetch` documents closest to `query` by WCD, ascending, ties by
/// document id. Documents listed in `exclude` are skipped; the pool is
/// clamped to what remains.
inline std::vector<Neighbor> prefetch_wcd(const NBowVector& query, const SearchIndex& index,
                                          std::size_t prefetch,
                                          const std::vector<std::size_t>& exclude = {}) {
  const Corpus& corpus = index.corpus();
  const auto qc = centroid(query, index.embeddings());
  std::vector<Neighbor> all;
  all.reserve(corpus.size());
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    if (std::find(exclude.begin(), exclude.end(), d) != exclude.end()) continue;
    all.push_back({d, euclidean(qc, index.centroid_of(d))});
  }
  const std::size_t keep = std::min(prefetch, all.size());
  auto cmp = [&](const Neighbor& a, const Neighbor& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return corpus.documents[a.doc].id < corpus.documents[b.doc].id;
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), cmp);
  all.resize(keep);
  return all;
}

/// Exact k nearest candidates by WMD, ascending, ties by document id.
inline std::vector<Neighbor> knn_wmd(const NBowVector& query,
                                     const std::vector<std::size_t>& candidates,
                                     const Corpus& corpus, CostCache& costs, std::size_t k) {
  if (candidates.size() < k) {
    throw Error(ErrorKind::kInvalidArgument, "knn_wmd: fewer candidates than k");
  }
  std::vector<Neighbor> scored;
  scored.reserve(candidates.size());
  for (std::size_t d : candidates) {
    scored.push_back({d, wmd(query, corpus.documents[d].nbow, costs).distance});
  }
  detail::sort_neighbors(scored, corpus);
  scored.resize(k);
  return scored;
}

// ---------------------------------------------------------------------------
// Query graph.

struct RealNode {
  std::string id;
  std::optional<std::size_t> doc;  // unset for an external query
  int hop = 0;                     // 0 query, 1 or 2
  NBowVector nbow;
  std::vector<std::string> tokens;
};

struct RealEdge {
  std::size_t a;
  std::size_t b;
  double weight;  // WMD distance
};

struct FeatureNode {
  std::string feature;
  double idf;
};

struct FeatureEdge {
  std::size_t feature;
  std::size_t real;
  double weight;  // IDF of the feature
};

/// Real node 0 is the query. `distances` holds the full WMD matrix over the
/// real nodes; `real_edges` is the retained subset.
struct QueryGraph {
  std::vector<RealNode> real_nodes;
  std::vector<RealEdge> real_edges;
  std::vector<FeatureNode> feature_nodes;
  std::vector<FeatureEdge> feature_edges;
  DistanceMatrix distances;
  std::vector<std::size_t> candidate_pool;  // the query's WCD prefetch pool

  static constexpr std::size_t kQueryNode = 0;

  double query_distance(std::size_t real) const { return distances(kQueryNode, real); }
};

/// Builds the query-induced subgraph: the query, its k WMD-nearest neighbours
/// (1-hop) and, for each of those, their k nearest (2-hop, never the query,
/// already-present nodes skipped). Both hops prefetch by WCD first. Edges are
/// the complete WMD graph, optionally thresholded; when thresholding cuts any
/// node off from the query, every query edge is restored.
inline QueryGraph build_query_subgraph(const Query& query, const SearchIndex& index,
                                       const RetrievalParams& params, CostCache& costs) {
  params.validate();
  const Corpus& corpus = index.corpus();
  const std::size_t available = corpus.size() - (query.doc ? 1 : 0);
  if (corpus.size() < params.k + 1 || available < params.k) {
    throw Error(ErrorKind::kCorpusTooSmall,
                "corpus needs at least k+1 = " + std::to_string(params.k + 1) + " documents");
  }

  QueryGraph g;
  g.real_nodes.push_back({query.id, query.doc, 0, query.nbow, query.tokens});

  std::vector<std::size_t> exclude_query;
  if (query.doc) exclude_query.push_back(*query.doc);
  const auto pool = prefetch_wcd(query.nbow, index, params.prefetch, exclude_query);
  std::vector<std::size_t> pool_ids;
  for (const Neighbor& nb : pool) pool_ids.push_back(nb.doc);
  g.candidate_pool = pool_ids;

  std::unordered_set<std::size_t> present;
  if (query.doc) present.insert(*query.doc);
  const auto first = knn_wmd(query.nbow, pool_ids, corpus, costs, params.k);
  for (const Neighbor& nb : first) {
    present.insert(nb.doc);
    const Document& d = corpus.documents[nb.doc];
    g.real_nodes.push_back({d.id, nb.doc, 1, d.nbow, d.tokens});
  }

  std::set<std::size_t> second;
  for (const Neighbor& hop1 : first) {
    std::vector<std::size_t> exclude{hop1.doc};
    if (query.doc) exclude.push_back(*query.doc);
    const auto sub_pool = prefetch_wcd(corpus.documents[hop1.doc].nbow, index,
                                       params.prefetch, exclude);
    std::vector<std::size_t> ids;
    for (const Neighbor& nb : sub_pool) ids.push_back(nb.doc);
    const std::size_t k2 = std::min(params.k, ids.size());
    for (const Neighbor& nb : knn_wmd(corpus.documents[hop1.doc].nbow, ids, corpus, costs, k2)) {
      if (!present.contains(nb.doc)) second.insert(nb.doc);
    }
  }
  std::vector<std::size_t> second_sorted(second.begin(), second.end());
  std::sort(second_sorted.begin(), second_sorted.end(), [&](std::size_t a, std::size_t b) {
    return corpus.documents[a].id < corpus.documents[b].id;
  });
  for (std::size_t doc : second_sorted) {
    const Document& d = corpus.documents[doc];
    g.real_nodes.push_back({d.id, doc, 2, d.nbow, d.tokens});
  }

  std::vector<const NBowVector*> nbows;
  for (const RealNode& n : g.real_nodes) nbows.push_back(&n.nbow);
  g.distances = nbows.size() >= 2 ? wmd_matrix(nbows, costs) : DistanceMatrix(1);

  const std::size_t r = g.real_nodes.size();
  std::vector<bool> dropped_query_edge(r, false);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = i + 1; j < r; ++j) {
      const double w = g.distances(i, j);
      if (params.edge_threshold && w > *params.edge_threshold) {
        if (i == QueryGraph::kQueryNode) dropped_query_edge[j] = true;
        continue;
      }
      g.real_edges.push_back({i, j, w});
    }
  }
  if (params.edge_threshold) {
    std::vector<std::vector<std::size_t>> adj(r);
    for (const RealEdge& e : g.real_edges) {
      adj[e.a].push_back(e.b);
      adj[e.b].push_back(e.a);
    }
    std::vector<bool> seen(r, false);
    std::vector<std::size_t> stack{QueryGraph::kQueryNode};
    seen[QueryGraph::kQueryNode] = true;
    std::size_t reached = 1;
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      for (std::size_t w : adj[v]) {
        if (!seen[w]) {
          seen[w] = true;
          ++reached;
          stack.push_back(w);
        }
      }
    }
    if (reached < r) {
      for (std::size_t j = 1; j < r; ++j) {
        if (dropped_query_edge[j]) {
          g.real_edges.push_back({QueryGraph::kQueryNode, j, g.distances(0, j)});
        }
      }
      std::sort(g.real_edges.begin(), g.real_edges.end(), [](const RealEdge& x, const RealEdge& y) {
        return x.a != y.a ? x.a < y.a : x.b < y.b;
      });
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Feature nodes.

/// Word-overlap (unigram), n-gram (n = 2, 3) and one-gap skip-gram features
/// of a token sequence, serialized with U+241F between parts and U+22C4 for
/// the gap.
inline std::set<std::string> extract_features(const std::vector<std::string>& tokens,
                                              unsigned kinds = kAllFeatures) {
  std::set<std::string> out;
  const std::string j(kFeatureJoiner);
  const std::string gap = j + std::string(kFeatureGap) + j;
  const std::size_t n = tokens.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (kinds & kUnigrams) out.insert(tokens[i]);
    if ((kinds & kBigrams) && i + 1 < n) out.insert(tokens[i] + j + tokens[i + 1]);
    if ((kinds & kTrigrams) && i + 2 < n) {
      out.insert(tokens[i] + j + tokens[i + 1] + j + tokens[i + 2]);
    }
    if ((kinds & kSkipBigrams) && i + 2 < n) out.insert(tokens[i] + gap + tokens[i + 2]);
    if ((kinds & kSkipTrigrams) && i + 3 < n) {
      out.insert(tokens[i] + gap + tokens[i + 2] + j + tokens[i + 3]);
      out.insert(tokens[i] + j + tokens[i + 1] + gap + tokens[i + 3]);
    }
  }
  return out;
}

/// Adds one feature node per feature shared by at least two real nodes,
/// linked to exactly those nodes with weight idf(df, |pool|). Document
/// frequency is counted over `pool` together with the graph's own real
/// nodes, so every linked feature has df >= 2; features present in every
/// pool member have IDF 0 and are skipped.
inline void augment_feature_nodes(QueryGraph& g, const Corpus& corpus,
                                  const std::vector<std::size_t>& pool,
                                  unsigned kinds = kAllFeatures) {
  g.feature_nodes.clear();
  g.feature_edges.clear();

  std::vector<std::set<std::string>> node_features;
  node_features.reserve(g.real_nodes.size());
  for (const RealNode& n : g.real_nodes) node_features.push_back(extract_features(n.tokens, kinds));

  std::map<std::string, std::vector<std::size_t>> holders;
  for (std::size_t i = 0; i < node_features.size(); ++i) {
    for (const std::string& f : node_features[i]) holders[f].push_back(i);
  }
  std::erase_if(holders, [](const auto& kv) { return kv.second.size() < 2; });
  if (holders.empty()) return;

  // Pool members: graph nodes first (by index), then remaining pool docs.
  std::unordered_set<std::size_t> graph_docs;
  std::size_t pool_size = g.real_nodes.size();
  for (const RealNode& n : g.real_nodes) {
    if (n.doc) graph_docs.insert(*n.doc);
  }
  std::unordered_map<std::string, std::size_t> df;
  for (const auto& [f, nodes] : holders) df.emplace(f, nodes.size());
  std::unordered_set<std::size_t> counted;
  for (std::size_t doc : pool) {
    if (graph_docs.contains(doc) || !counted.insert(doc).second) continue;
    ++pool_size;
    for (const std::string& f : extract_features(corpus.documents[doc].tokens, kinds)) {
      auto it = df.find(f);
      if (it != df.end()) ++it->second;
    }
  }

  for (const auto& [f, nodes] : holders) {
    const std::size_t count = df.at(f);
    if (count >= pool_size) continue;
    const double w = idf(count, pool_size);
    const std::size_t fid = g.feature_nodes.size();
    g.feature_nodes.push_back({f, w});
    for (std::size_t r : nodes) g.feature_edges.push_back({fid, r, w});
  }
}

/// Debug dump: `src<TAB>dst<TAB>weight<TAB>kind` with kind R (WMD edge) or
/// F (feature edge). Feature nodes are written as `feature:<string>`.
inline void write_graph(const QueryGraph& g, std::ostream& out) {
  for (const RealEdge& e : g.real_edges) {
    out << g.real_nodes[e.a].id << '\t' << g.real_nodes[e.b].id << '\t'
        << format_double(e.weight) << "\tR\n";
  }
  for (const FeatureEdge& e : g.feature_edges) {
    out << "feature:" << g.feature_nodes[e.feature].feature << '\t' << g.real_nodes[e.real].id
        << '\t' << format_double(e.weight) << "\tF\n";
  }
}

}  // namespace semflow
