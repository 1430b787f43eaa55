#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "semflow/error.hpp"
#include "semflow/graph.hpp"
#include "semflow/rng.hpp"
#include "semflow/seeding.hpp"

namespace semflow {

struct PropagationParams {
  double mu_pp = 0.01;
  double mu_np = 1.0;
  double dropout_p = 0.5;
  bool dropout = true;  // false: SSG-WD, no mask is ever drawn
  std::size_t max_iters = 200;
  double tol = 1e-4;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (!(mu_pp >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "propagate.mu_pp must be >= 0");
    if (!(mu_np > 0.0)) throw Error(ErrorKind::kInvalidArgument, "propagate.mu_np must be > 0");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
      throw Error(ErrorKind::kInvalidArgument, "propagate.dropout_p must be in [0,1)");
    }
    if (!(tol > 0.0)) throw Error(ErrorKind::kInvalidArgument, "propagate.tol must be > 0");
    if (max_iters < 1) throw Error(ErrorKind::kInvalidArgument, "propagate.max_iters must be >= 1");
  }
};

inline constexpr double kUniformPrior = 0.5;

/// Undirected graph for propagation. Similarity arcs (feature edges) pull
/// labels together; distance arcs (WMD between real nodes) push them apart.
class PropagationGraph {
 public:
  struct Arc {
    std::size_t to;
    double weight;
    bool distance;
  };

  explicit PropagationGraph(std::size_t n = 0) : adj_(n) {}

  std::size_t size() const { return adj_.size(); }
  const std::vector<Arc>& arcs(std::size_t i) const { return adj_[i]; }

  void add_similarity_edge(std::size_t a, std::size_t b, double w) { add(a, b, w, false); }
  void add_distance_edge(std::size_t a, std::size_t b, double w) { add(a, b, w, true); }

 private:
  void add(std::size_t a, std::size_t b, double w, bool distance) {
    if (a == b || a >= size() || b >= size() || !(w >= 0.0)) {
      throw Error(ErrorKind::kInvalidArgument, "PropagationGraph: bad edge");
    }
    adj_[a].push_back({b, w, distance});
    adj_[b].push_back({a, w, distance});
  }
  std::vector<std::vector<Arc>> adj_;
};

/// Real nodes keep their indices; feature node f becomes r + f. WMD weights
/// are divided by the largest one in the subgraph.
inline PropagationGraph make_propagation_graph(const QueryGraph& g) {
  const std::size_t r = g.real_nodes.size();
  PropagationGraph p(r + g.feature_nodes.size());
  double max_w = 0.0;
  for (const RealEdge& e : g.real_edges) max_w = std::max(max_w, e.weight);
  for (const RealEdge& e : g.real_edges) {
    p.add_distance_edge(e.a, e.b, max_w > 0.0 ? e.weight / max_w : 0.0);
  }
  for (const FeatureEdge& e : g.feature_edges) p.add_similarity_edge(r + e.feature, e.real, e.weight);
  return p;
}

struct LabelState {
  std::vector<double> labels;
  std::vector<double> seed_value;     // C_i; 0 for non-seeds
  std::vector<double> seed_strength;  // s_i = max(C_i, 1 − C_i); 0 for non-seeds
  std::vector<bool> soft_seed;
  std::vector<bool> mask;             // soft seeds dropped this iteration
  std::size_t hard_seed = 0;
  std::size_t iteration = 0;
  bool converged = false;

  bool is_seed(std::size_t i) const { return seed_strength[i] > 0.0; }
  bool masked(std::size_t i) const { return mask[i]; }
};

/// Non-seeds start at U = 0.5, seeds at their labels; the hard seed is fixed
/// at 1.
inline LabelState initial_state(std::size_t n, const SeedSet& seeds) {
  LabelState s;
  s.labels.assign(n, kUniformPrior);
  s.seed_value.assign(n, 0.0);
  s.seed_strength.assign(n, 0.0);
  s.soft_seed.assign(n, false);
  s.mask.assign(n, false);
  s.hard_seed = seeds.hard_seed;
  auto place = [&](std::size_t i, double c, bool soft) {
    if (i >= n || s.seed_strength[i] > 0.0) {
      throw Error(ErrorKind::kInvalidArgument, "seed sets overlap or reference unknown nodes");
    }
    s.labels[i] = c;
    s.seed_value[i] = c;
    s.seed_strength[i] = std::max(c, 1.0 - c);
    s.soft_seed[i] = soft;
  };
  place(seeds.hard_seed, 1.0, false);
  for (const Seed& x : seeds.one_seeds) place(x.node, x.label, true);
  for (const Seed& x : seeds.zero_seeds) place(x.node, x.label, true);
  return s;
}

namespace detail {

// Arcs that count for node i under the current mask: distance arcs touching
// a masked soft seed are dropped.
inline bool arc_active(std::size_t i, const PropagationGraph::Arc& a, const LabelState& s) {
  return !a.distance || (!s.masked(i) && !s.masked(a.to));
}

}  // namespace detail

/// s_i(Ĉ−C)² + μ_pp(Ĉ−U)² + μ_np Σ_F w(Ĉ−Ĉ_j)² − μ_np Σ_R w(Ĉ−Ĉ_k)² at
/// Ĉ_i = `value` (default: the current label), under the current mask.
inline double node_objective(std::size_t i, const LabelState& s, const PropagationGraph& g,
                             const PropagationParams& p, std::optional<double> value = std::nullopt) {
  const double c = value ? *value : s.labels[i];
  double obj = p.mu_pp * (c - kUniformPrior) * (c - kUniformPrior);
  if (s.is_seed(i) && !s.masked(i)) obj += s.seed_strength[i] * (c - s.seed_value[i]) * (c - s.seed_value[i]);
  for (const auto& a : g.arcs(i)) {
    if (!detail::arc_active(i, a, s)) continue;
    const double d = c - s.labels[a.to];
    obj += (a.distance ? -1.0 : 1.0) * p.mu_np * a.weight * d * d;
  }
  return obj;
}

/// Minimizer of node_objective over [0,1] with neighbours held fixed: the
/// clamped stationary point when the local problem is convex, otherwise the
/// better endpoint (current value on an exact tie).
inline double jacobi_update(std::size_t i, const LabelState& s, const PropagationGraph& g,
                            const PropagationParams& p) {
  double num = p.mu_pp * kUniformPrior;
  double den = p.mu_pp;
  if (s.is_seed(i) && !s.masked(i)) {
    num += s.seed_strength[i] * s.seed_value[i];
    den += s.seed_strength[i];
  }
  for (const auto& a : g.arcs(i)) {
    if (!detail::arc_active(i, a, s)) continue;
    const double w = (a.distance ? -1.0 : 1.0) * p.mu_np * a.weight;
    num += w * s.labels[a.to];
    den += w;
  }
  if (den > 0.0) return std::clamp(num / den, 0.0, 1.0);
  const double at0 = node_objective(i, s, g, p, 0.0);
  const double at1 = node_objective(i, s, g, p, 1.0);
  if (at0 < at1) return 0.0;
  if (at1 < at0) return 1.0;
  return s.labels[i];
}

/// Whole-graph objective with the mask off: anchor and prior terms per node,
/// each edge counted once.
inline double total_objective(const LabelState& s, const PropagationGraph& g, const PropagationParams& p) {
  double obj = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double c = s.labels[i];
    obj += p.mu_pp * (c - kUniformPrior) * (c - kUniformPrior);
    if (s.is_seed(i)) obj += s.seed_strength[i] * (c - s.seed_value[i]) * (c - s.seed_value[i]);
    for (const auto& a : g.arcs(i)) {
      if (a.to < i) continue;
      const double d = c - s.labels[a.to];
      obj += (a.distance ? -1.0 : 1.0) * p.mu_np * a.weight * d * d;
    }
  }
  return obj;
}

using TraceSink = std::function<void(std::size_t iter, double max_delta, double objective)>;

/// Jacobi sweeps until the largest change of an unmasked sweep drops below
/// tol, or max_iters. Each iteration first redraws the dropout mask; masked
/// soft seeds keep their label. When a mask was active the convergence test
/// runs a separate unmasked probe sweep (not applied).
inline LabelState propagate(const PropagationGraph& g, const SeedSet& seeds, const PropagationParams& p,
                            const TraceSink& trace = {}) {
  p.validate();
  LabelState s = initial_state(g.size(), seeds);
  Rng rng(p.rng_seed);
  std::vector<double> next(g.size());

  auto sweep = [&](std::vector<double>& out) {
    double max_delta = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      out[i] = (i == s.hard_seed || s.masked(i)) ? s.labels[i] : jacobi_update(i, s, g, p);
      max_delta = std::max(max_delta, std::fabs(out[i] - s.labels[i]));
    }
    return max_delta;
  };

  for (s.iteration = 1; s.iteration <= p.max_iters; ++s.iteration) {
    bool any_masked = false;
    if (p.dropout) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        s.mask[i] = s.soft_seed[i] && rng.bernoulli(p.dropout_p);
        any_masked = any_masked || s.mask[i];
      }
    }
    double delta = sweep(next);
    s.labels.swap(next);
    if (any_masked) {
      std::fill(s.mask.begin(), s.mask.end(), false);
      delta = sweep(next);
    }
    if (trace) trace(s.iteration, delta, total_objective(s, g, p));
    if (delta < p.tol) {
      s.converged = true;
      break;
    }
  }
  if (!s.converged) s.iteration = p.max_iters;
  std::fill(s.mask.begin(), s.mask.end(), false);
  return s;
}

struct RankedDoc {
  std::string doc_id;
  double label;
  double wmd;
  bool operator==(const RankedDoc&) const = default;
};

/// Real nodes other than the query by label (desc), then WMD to the query,
/// then id; at most k_out.
inline std::vector<RankedDoc> rank_nodes(const LabelState& s, const QueryGraph& g, std::size_t k_out) {
  std::vector<RankedDoc> out;
  for (std::size_t i = 1; i < g.real_nodes.size(); ++i) {
    out.push_back({g.real_nodes[i].id, s.labels[i], g.query_distance(i)});
  }
  std::sort(out.begin(), out.end(), [](const RankedDoc& a, const RankedDoc& b) {
    if (a.label != b.label) return a.label > b.label;
    if (a.wmd != b.wmd) return a.wmd < b.wmd;
    return a.doc_id < b.doc_id;
  });
  if (out.size() > k_out) out.resize(k_out);
  return out;
}

/// `rank<TAB>doc_id<TAB>label<TAB>wmd`, ranks from 1.
inline void write_ranking(const std::vector<RankedDoc>& ranking, std::ostream& out) {
  for (std::size_t r = 0; r < ranking.size(); ++r) {
    out << r + 1 << '\t' << ranking[r].doc_id << '\t' << format_double(ranking[r].label) << '\t'
        << format_double(ranking[r].wmd) << '\n';
  }
}

}  // namespace semflow
