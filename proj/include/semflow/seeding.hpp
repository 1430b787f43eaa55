#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "semflow/graph.hpp"
#include "semflow/topics.hpp"

namespace semflow {

struct Seed {
  std::size_t node;  // real-node index in the query graph
  double label;
  bool operator==(const Seed&) const = default;
};

/// The query (real node 0) is the single hard seed with label 1.
struct SeedSet {
  std::size_t hard_seed = QueryGraph::kQueryNode;
  std::vector<Seed> one_seeds;
  std::vector<Seed> zero_seeds;
  std::size_t k_prime = 0;
  std::optional<std::size_t> query_topic;
  std::optional<std::size_t> contrast_topic;
  bool no_dominant_topic = false;
  bool no_contrast_topic = false;

  bool operator==(const SeedSet&) const = default;
};

/// max(3, ⌈0.05·|V_R|⌉), capped at ⌊|V_R|/4⌋.
inline std::size_t default_k_prime(std::size_t real_nodes) {
  const auto share = static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(real_nodes) - 1e-9));
  return std::min(std::max<std::size_t>(3, share), real_nodes / 4);
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

/// CW_l(doc) / (Σ CW(doc) + 1e-9).
inline double topic_differential(const std::vector<double>& cw, std::size_t l) {
  double total = 0.0;
  for (double v : cw) total += v;
  return cw.at(l) / (total + 1e-9);
}

namespace detail {

inline std::optional<std::size_t> argmax_positive(const std::vector<double>& v) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] > 0.0 && (!best || v[i] > v[*best])) best = i;
  }
  return best;
}

inline std::optional<std::size_t> node_topic(const RealNode& n, const TopicModel& model) {
  if (n.doc) return model.dominant_of(n.id);
  return std::nullopt;
}

}  // namespace detail

/// Topic of the query: its stored cluster when it is an indexed document,
/// otherwise the heaviest entry of its catchword vector.
inline std::optional<std::size_t> query_topic(const RealNode& query, const TopicModel& model) {
  if (auto stored = detail::node_topic(query, model)) return stored;
  return detail::argmax_positive(model.catchword_weights(query.nbow));
}

/// Graph nodes in the query's cluster, ranked by catchword-vector cosine to
/// the query (ties by id); the top k′ with positive similarity, labelled by
/// it.
inline std::vector<Seed> assign_one_seeds(const QueryGraph& g, const TopicModel& model,
                                          std::size_t topic, std::size_t k_prime) {
  const auto q = model.catchword_weights(g.real_nodes[QueryGraph::kQueryNode].nbow);
  std::vector<Seed> cands;
  for (std::size_t i = 1; i < g.real_nodes.size(); ++i) {
    if (detail::node_topic(g.real_nodes[i], model) != topic) continue;
    const double sim = cosine(q, model.catchword_weights(g.real_nodes[i].nbow));
    if (sim > 0.0) cands.push_back({i, std::min(sim, 1.0)});
  }
  std::sort(cands.begin(), cands.end(), [&](const Seed& a, const Seed& b) {
    if (a.label != b.label) return a.label > b.label;
    return g.real_nodes[a.node].id < g.real_nodes[b.node].id;
  });
  if (cands.size() > k_prime) cands.resize(k_prime);
  return cands;
}

/// The topic whose M_hat column lies farthest from topic l's (ties to the
/// lowest index), among the other topics with a non-empty column.
inline std::optional<std::size_t> contrast_topic(const TopicModel& model, std::size_t l) {
  std::optional<std::size_t> best;
  double best_d = -1.0;
  for (std::size_t o = 0; o < model.k(); ++o) {
    if (o == l || model.m_hat()[o].empty()) continue;
    const double d = model.topic_distance(l, o);
    if (d > best_d) {
      best_d = d;
      best = o;
    }
  }
  return best;
}

/// Graph nodes in cluster `contrast`, lowest topic differential w.r.t.
/// `topic` first (ties by id); labels clamped into [0, 0.5).
inline std::vector<Seed> assign_zero_seeds(const QueryGraph& g, const TopicModel& model,
                                           std::size_t topic, std::size_t contrast,
                                           std::size_t k_prime) {
  const double cap = std::nextafter(0.5, 0.0);
  std::vector<Seed> cands;
  for (std::size_t i = 1; i < g.real_nodes.size(); ++i) {
    if (detail::node_topic(g.real_nodes[i], model) != contrast) continue;
    const double td = topic_differential(model.catchword_weights(g.real_nodes[i].nbow), topic);
    cands.push_back({i, std::clamp(td, 0.0, cap)});
  }
  std::sort(cands.begin(), cands.end(), [&](const Seed& a, const Seed& b) {
    if (a.label != b.label) return a.label < b.label;
    return g.real_nodes[a.node].id < g.real_nodes[b.node].id;
  });
  if (cands.size() > k_prime) cands.resize(k_prime);
  return cands;
}

/// Both seed classes for a query graph. A query without catchwords gets no
/// soft seeds (flagged); a missing contrast cluster only drops the 0-seeds.
inline SeedSet assign_seeds(const QueryGraph& g, const TopicModel& model,
                            std::optional<std::size_t> k_prime = std::nullopt) {
  SeedSet seeds;
  seeds.k_prime = k_prime ? *k_prime : default_k_prime(g.real_nodes.size());
  const RealNode& q = g.real_nodes[QueryGraph::kQueryNode];
  const auto cw = model.catchword_weights(q.nbow);
  if (std::all_of(cw.begin(), cw.end(), [](double v) { return v == 0.0; })) {
    seeds.no_dominant_topic = true;
    return seeds;
  }
  seeds.query_topic = query_topic(q, model);
  if (!seeds.query_topic) {
    seeds.no_dominant_topic = true;
    return seeds;
  }
  const std::size_t l = *seeds.query_topic;
  seeds.one_seeds = assign_one_seeds(g, model, l, seeds.k_prime);
  seeds.contrast_topic = contrast_topic(model, l);
  if (seeds.contrast_topic) {
    seeds.zero_seeds = assign_zero_seeds(g, model, l, *seeds.contrast_topic, seeds.k_prime);
  }
  seeds.no_contrast_topic = seeds.zero_seeds.empty();
  return seeds;
}

/// Debug dump: `node_id<TAB>H|1|0<TAB>label`.
inline void write_seeds(const SeedSet& seeds, const QueryGraph& g, std::ostream& out) {
  out << g.real_nodes[seeds.hard_seed].id << "\tH\t1\n";
  for (const Seed& s : seeds.one_seeds) out << g.real_nodes[s.node].id << "\t1\t" << format_double(s.label) << '\n';
  for (const Seed& s : seeds.zero_seeds) out << g.real_nodes[s.node].id << "\t0\t" << format_double(s.label) << '\n';
}

}  // namespace semflow
