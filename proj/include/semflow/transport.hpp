#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <unordered_map>
#include <vector>

#include "semflow/corpus.hpp"
#include "semflow/embeddings.hpp"
#include "semflow/error.hpp"

namespace semflow {

/// Euclidean distance between the embeddings of two terms.
inline double cost(TermId i, TermId j, const EmbeddingMatrix& x) {
  if (i == j) return 0.0;
  const auto a = x.vector(i);
  const auto b = x.vector(j);
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return std::sqrt(s);
}

// Ground-cost memo keyed by the unordered term pair. One cache per query
// subgraph; not synchronized.
class CostCache {
 public:
  explicit CostCache(const EmbeddingMatrix& x) : x_(&x) {}

  double operator()(TermId i, TermId j) {
    if (i == j) return 0.0;
    if (i > j) std::swap(i, j);
    const std::uint64_t key = (static_cast<std::uint64_t>(i) << 32) | j;
    auto [it, inserted] = memo_.try_emplace(key, 0.0);
    if (inserted) it->second = cost(i, j, *x_);
    return it->second;
  }

  std::size_t size() const { return memo_.size(); }
  const EmbeddingMatrix& embeddings() const { return *x_; }

 private:
  const EmbeddingMatrix* x_;
  std::unordered_map<std::uint64_t, double> memo_;
};

/// Embedding-weighted centroid X·d.
inline std::vector<double> centroid(const NBowVector& d, const EmbeddingMatrix& x) {
  std::vector<double> c(x.dim, 0.0);
  for (const NBowEntry& e : d.entries) {
    const auto v = x.vector(e.term);
    for (std::size_t k = 0; k < x.dim; ++k) c[k] += e.weight * v[k];
  }
  return c;
}

inline double euclidean(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return std::sqrt(s);
}

/// Word Centroid Distance ‖Xd − Xd'‖₂, a lower bound on wmd.
inline double wcd(const NBowVector& a, const NBowVector& b, const EmbeddingMatrix& x) {
  return euclidean(centroid(a, x), centroid(b, x));
}

// ---------------------------------------------------------------------------
// Transportation simplex.

struct TransportCell {
  std::size_t row;
  std::size_t col;
  double mass;
};

struct TransportSolution {
  std::vector<TransportCell> cells;  // strictly positive flows only
  double cost = 0.0;
  std::size_t pivots = 0;
};

/// Solves min Σ c_ij x_ij subject to Σ_j x_ij = supply_i, Σ_i x_ij = demand_j,
/// x ≥ 0 exactly. `costs` is row-major (rows = supply). Supply and demand must
/// be non-negative with equal totals (up to rounding).
///
/// Primal simplex on the spanning-tree basis of the bipartite row/column
/// graph: a matrix-minimum start, MODI potentials for pricing (Dantzig rule),
/// and Bland's rule while a run of degenerate pivots is in progress, which
/// rules out cycling.
class TransportSolver {
 public:
  TransportSolution solve(std::span<const double> supply, std::span<const double> demand,
                          std::span<const double> costs) {
    m_ = supply.size();
    n_ = demand.size();
    if (m_ == 0 || n_ == 0 || costs.size() != m_ * n_) {
      throw Error(ErrorKind::kInvalidArgument, "transport problem has an empty side");
    }
    costs_ = costs;
    double cmax = 0.0;
    for (double c : costs) cmax = std::max(cmax, std::abs(c));
    const double eps = 1e-12 * (1.0 + cmax);

    initial_basis(supply, demand);

    TransportSolution sol;
    const std::size_t nodes = m_ + n_;
    const std::size_t max_pivots = 50 * nodes * nodes + 1000;
    std::size_t degenerate_run = 0;
    while (true) {
      build_tree();
      compute_potentials();
      const bool bland = degenerate_run > nodes;
      std::size_t enter = kNone;
      double best = -eps;
      for (std::size_t cell = 0; cell < m_ * n_; ++cell) {
        if (slot_[cell] != kNone) continue;
        const double r = costs_[cell] - u_[cell / n_] - v_[cell % n_];
        if (r < best) {
          best = r;
          enter = cell;
          if (bland) break;
        }
      }
      if (enter == kNone) break;
      if (++sol.pivots > max_pivots) {
        throw Error(ErrorKind::kSolverFailure, "transport simplex exceeded pivot budget");
      }
      const double theta = pivot(enter);
      degenerate_run = theta > 0.0 ? 0 : degenerate_run + 1;
    }

    for (const Basic& b : basis_) {
      if (b.mass > 0.0) {
        sol.cells.push_back({b.cell / n_, b.cell % n_, b.mass});
        sol.cost += b.mass * costs_[b.cell];
      }
    }
    std::sort(sol.cells.begin(), sol.cells.end(), [](const auto& a, const auto& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    return sol;
  }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  struct Basic {
    std::size_t cell;
    double mass;
  };

  // Matrix-minimum rule. Every allocation closes exactly one line (the final
  // one closes the last row and column together), which yields m+n-1 basic
  // cells forming a spanning tree, zero-mass cells included.
  void initial_basis(std::span<const double> supply, std::span<const double> demand) {
    basis_.clear();
    slot_.assign(m_ * n_, kNone);
    std::vector<double> ra(supply.begin(), supply.end());
    std::vector<double> rb(demand.begin(), demand.end());
    std::vector<bool> row_open(m_, true), col_open(n_, true);
    std::size_t open_rows = m_, open_cols = n_;

    std::vector<std::size_t> order(m_ * n_);
    for (std::size_t c = 0; c < order.size(); ++c) order[c] = c;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return costs_[a] < costs_[b]; });

    for (std::size_t cell : order) {
      const std::size_t i = cell / n_, j = cell % n_;
      if (!row_open[i] || !col_open[j]) continue;
      const double x = std::max(0.0, std::min(ra[i], rb[j]));
      slot_[cell] = basis_.size();
      basis_.push_back({cell, x});
      bool close_row;
      if (open_rows == 1 && open_cols == 1) {
        row_open[i] = col_open[j] = false;
        open_rows = open_cols = 0;
        break;
      } else if (open_rows == 1) {
        close_row = false;
      } else if (open_cols == 1) {
        close_row = true;
      } else {
        close_row = ra[i] <= rb[j];
      }
      if (close_row) {
        rb[j] -= x;
        ra[i] = 0.0;
        row_open[i] = false;
        --open_rows;
      } else {
        ra[i] -= x;
        rb[j] = 0.0;
        col_open[j] = false;
        --open_cols;
      }
    }
    if (basis_.size() != m_ + n_ - 1) {
      throw Error(ErrorKind::kSolverFailure, "initial transport basis is incomplete");
    }
  }

  // Nodes 0..m-1 are rows, m..m+n-1 columns; edges are basis slots.
  void build_tree() {
    adj_.assign(m_ + n_, {});
    for (std::size_t s = 0; s < basis_.size(); ++s) {
      const std::size_t i = basis_[s].cell / n_, j = basis_[s].cell % n_;
      adj_[i].push_back(s);
      adj_[m_ + j].push_back(s);
    }
  }

  std::size_t other_end(std::size_t node, std::size_t slot) const {
    const std::size_t i = basis_[slot].cell / n_, j = basis_[slot].cell % n_;
    return node < m_ ? m_ + j : i;
  }

  void compute_potentials() {
    u_.assign(m_, 0.0);
    v_.assign(n_, 0.0);
    std::vector<bool> seen(m_ + n_, false);
    std::vector<std::size_t> stack{0};
    seen[0] = true;
    std::size_t visited = 1;
    while (!stack.empty()) {
      const std::size_t node = stack.back();
      stack.pop_back();
      for (std::size_t s : adj_[node]) {
        const std::size_t next = other_end(node, s);
        if (seen[next]) continue;
        seen[next] = true;
        ++visited;
        const double c = costs_[basis_[s].cell];
        if (next >= m_) {
          v_[next - m_] = c - u_[node];
        } else {
          u_[next] = c - v_[node - m_];
        }
        stack.push_back(next);
      }
    }
    if (visited != m_ + n_) {
      throw Error(ErrorKind::kSolverFailure, "transport basis is not a spanning tree");
    }
  }

  // Pushes flow around the cycle closed by `enter`; returns the step size.
  double pivot(std::size_t enter) {
    const std::size_t ei = enter / n_, ej = enter % n_;
    // Tree path from row ei to column ej.
    std::vector<std::size_t> parent_slot(m_ + n_, kNone);
    std::vector<bool> seen(m_ + n_, false);
    std::vector<std::size_t> stack{ei};
    seen[ei] = true;
    const std::size_t target = m_ + ej;
    while (!stack.empty() && !seen[target]) {
      const std::size_t node = stack.back();
      stack.pop_back();
      for (std::size_t s : adj_[node]) {
        const std::size_t next = other_end(node, s);
        if (seen[next]) continue;
        seen[next] = true;
        parent_slot[next] = s;
        stack.push_back(next);
      }
    }
    if (!seen[target]) {
      throw Error(ErrorKind::kSolverFailure, "no cycle for entering transport cell");
    }
    // Walking back from column ej the signs alternate -, +, -, ...; the slot
    // touching row ei is a minus slot.
    std::vector<std::size_t> path;
    for (std::size_t node = target; node != ei;) {
      const std::size_t s = parent_slot[node];
      path.push_back(s);
      node = other_end(node, s);
    }
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leave = kNone;
    for (std::size_t k = 0; k < path.size(); k += 2) {
      const Basic& b = basis_[path[k]];
      if (b.mass < theta || (b.mass == theta && b.cell < basis_[leave].cell)) {
        theta = b.mass;
        leave = path[k];
      }
    }
    for (std::size_t k = 0; k < path.size(); ++k) {
      Basic& b = basis_[path[k]];
      if (k % 2 == 0) {
        b.mass = path[k] == leave ? 0.0 : b.mass - theta;
      } else {
        b.mass += theta;
      }
    }
    slot_[basis_[leave].cell] = kNone;
    basis_[leave] = {enter, theta};
    slot_[enter] = leave;
    return theta;
  }

  std::size_t m_ = 0, n_ = 0;
  std::span<const double> costs_;
  std::vector<Basic> basis_;
  std::vector<std::size_t> slot_;
  std::vector<std::vector<std::size_t>> adj_;
  std::vector<double> u_, v_;
};

// ---------------------------------------------------------------------------
// Word Mover's Distance.

struct TransportFlow {
  TermId source;
  TermId target;
  double mass;
};

struct TransportPlan {
  std::vector<TransportFlow> flows;
  double cost = 0.0;
};

struct WmdResult {
  double distance = 0.0;
  TransportPlan plan;
};

/// Exact WMD between two nBOW vectors. The LP is posed on the support of
/// `a` × the support of `b`; rows/columns outside the supports carry no
/// mass, so the optimum equals that of the full n×n program.
inline WmdResult wmd(const NBowVector& a, const NBowVector& b, CostCache& costs) {
  if (a.empty() || b.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "wmd needs two non-empty nBOW vectors");
  }
  const std::size_t m = a.support(), n = b.support();
  std::vector<double> supply(m), demand(n), c(m * n);
  for (std::size_t i = 0; i < m; ++i) supply[i] = a.entries[i].weight;
  for (std::size_t j = 0; j < n; ++j) demand[j] = b.entries[j].weight;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      c[i * n + j] = costs(a.entries[i].term, b.entries[j].term);
    }
  }
  TransportSolver solver;
  const TransportSolution sol = solver.solve(supply, demand, c);
  WmdResult out;
  out.distance = sol.cost;
  out.plan.cost = sol.cost;
  out.plan.flows.reserve(sol.cells.size());
  for (const TransportCell& cell : sol.cells) {
    out.plan.flows.push_back({a.entries[cell.row].term, b.entries[cell.col].term, cell.mass});
  }
  return out;
}

inline WmdResult wmd(const NBowVector& a, const NBowVector& b, const EmbeddingMatrix& x) {
  CostCache costs(x);
  return wmd(a, b, costs);
}

// Dense symmetric matrix with a zero diagonal.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
  void set(std::size_t i, std::size_t j, double v) {
    data_[i * n_ + j] = v;
    data_[j * n_ + i] = v;
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

/// Pairwise WMD over `docs`; each unordered pair is solved once.
inline DistanceMatrix wmd_matrix(std::span<const NBowVector* const> docs, CostCache& costs) {
  if (docs.size() < 2) {
    throw Error(ErrorKind::kInvalidArgument, "wmd_matrix needs at least two documents");
  }
  DistanceMatrix out(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    for (std::size_t j = i + 1; j < docs.size(); ++j) {
      out.set(i, j, wmd(*docs[i], *docs[j], costs).distance);
    }
  }
  return out;
}

inline DistanceMatrix wmd_matrix(const std::vector<NBowVector>& docs, const EmbeddingMatrix& x) {
  std::vector<const NBowVector*> ptrs;
  for (const auto& d : docs) ptrs.push_back(&d);
  CostCache costs(x);
  return wmd_matrix(ptrs, costs);
}

}  // namespace semflow
