#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "semflow/corpus.hpp"
#include "semflow/error.hpp"
#include "semflow/rng.hpp"
#include "semflow/text.hpp"

namespace semflow {

struct TsvdParams {
  std::size_t k_topics = 200;
  std::optional<double> w0;  // unset: 1 / k_topics
  double eps = 0.1;
  double eps0 = 1.0 / 6.0;  // carried for completeness; no computation uses it
  double alpha = 0.4;
  double beta = 0.2;
  double rho = 0.1;
  double delta = 0.05;
  double p0 = 0.1;
  std::uint64_t kmeans_seed = 42;
  std::size_t kmeans_max_iter = 100;
  std::size_t kmeans_restarts = 10;  // k-means++ starts on B^(k); lowest objective wins

  double effective_w0() const { return w0 ? *w0 : 1.0 / static_cast<double>(k_topics); }

  void validate() const {
    auto unit = [](double v, const char* name) {
      if (!(v > 0.0 && v <= 1.0)) {
        throw Error(ErrorKind::kInvalidArgument, std::string("topics.") + name + " must be in (0,1]");
      }
    };
    if (k_topics < 1) throw Error(ErrorKind::kInvalidArgument, "topics.k must be >= 1");
    unit(effective_w0(), "w0");
    unit(eps, "eps");
    unit(eps0, "eps0");
    unit(alpha, "alpha");
    unit(beta, "beta");
    unit(rho, "rho");
    unit(delta, "delta");
    unit(p0, "p0");
    constexpr double slack = 1e-12;
    if (beta + rho > (1.0 - delta) * alpha + slack) {
      throw Error(ErrorKind::kInvalidArgument, "topics: beta + rho must be <= (1 - delta) * alpha");
    }
    if (alpha + 2.0 * delta > 0.5 + slack) {
      throw Error(ErrorKind::kInvalidArgument, "topics: alpha + 2 * delta must be <= 0.5");
    }
    if (delta > 0.08) throw Error(ErrorKind::kInvalidArgument, "topics.delta must be <= 0.08");
    if (kmeans_max_iter < 1) {
      throw Error(ErrorKind::kInvalidArgument, "topics.kmeans_max_iter must be >= 1");
    }
    if (kmeans_restarts < 1) {
      throw Error(ErrorKind::kInvalidArgument, "topics.kmeans_restarts must be >= 1");
    }
  }
};

/// Word-by-document frequency matrix, stored by column. Column j is the nBOW
/// of document j, so A_ij = count(i, j) / len(j).
struct DataMatrix {
  std::size_t rows = 0;
  std::vector<NBowVector> columns;
  double m = 0.0;

  std::size_t s() const { return columns.size(); }
};

inline DataMatrix build_data_matrix(const Corpus& corpus) {
  if (corpus.size() == 0) throw Error(ErrorKind::kInvalidArgument, "topics: empty corpus");
  DataMatrix a;
  a.rows = corpus.vocabulary.size();
  a.m = corpus.m_avg;
  a.columns.reserve(corpus.size());
  for (const Document& d : corpus.documents) a.columns.push_back(d.nbow);
  return a;
}

// Comparisons against ζ/m: values within this distance count as equal and
// therefore not as exceeding it.
inline constexpr double kThresholdTol = 1e-12;

/// ζ_i: the largest ζ in {1..⌊m⌋} with |{j : A_ij > ζ/m}| ≥ w0·s/2 and
/// |{j : A_ij = ζ/m}| ≤ 3·ε·w0·s; 0 when none qualifies.
inline std::vector<int> compute_thresholds(const DataMatrix& a, const TsvdParams& params) {
  if (!(a.m >= 1.0)) throw Error(ErrorKind::kDomain, "topics: average document length below 1");
  std::vector<std::vector<double>> rows(a.rows);
  for (const NBowVector& col : a.columns) {
    for (const NBowEntry& e : col.entries) rows[e.term].push_back(e.weight);
  }
  const double w0 = params.effective_w0();
  const double s = static_cast<double>(a.s());
  const double need_above = w0 * s / 2.0;
  const double max_equal = 3.0 * params.eps * w0 * s;
  const int zeta_max = static_cast<int>(std::floor(a.m));

  std::vector<int> zeta(a.rows, 0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    auto& v = rows[i];
    if (v.empty()) continue;
    std::sort(v.begin(), v.end());
    for (int z = zeta_max; z >= 1; --z) {
      const double t = z / a.m;
      const auto lo = std::lower_bound(v.begin(), v.end(), t - kThresholdTol);
      const auto hi = std::upper_bound(v.begin(), v.end(), t + kThresholdTol);
      const auto above = static_cast<double>(v.end() - hi);
      const auto equal = static_cast<double>(hi - lo);
      if (above >= need_above && equal <= max_equal) {
        zeta[i] = z;
        break;
      }
    }
  }
  return zeta;
}

struct SparseMatrix {
  std::size_t rows = 0;
  std::vector<std::vector<NBowEntry>> columns;
};

/// B_ij = √ζ_i where A_ij > ζ_i/m, else 0 (zero entries are not stored).
inline SparseMatrix threshold_matrix(const DataMatrix& a, const std::vector<int>& zeta) {
  SparseMatrix b;
  b.rows = a.rows;
  b.columns.resize(a.s());
  for (std::size_t j = 0; j < a.s(); ++j) {
    for (const NBowEntry& e : a.columns[j].entries) {
      const int z = zeta[e.term];
      if (z > 0 && e.weight > z / a.m + kThresholdTol) {
        b.columns[j].push_back({e.term, std::sqrt(static_cast<double>(z))});
      }
    }
  }
  return b;
}

// ---------------------------------------------------------------------------
// Clustering.

struct KMeansResult {
  std::vector<std::size_t> assignment;
  Eigen::MatrixXd centers;         // one column per cluster
  std::vector<double> objective;   // after each center update
  std::size_t iterations = 0;
  std::size_t reseeded = 0;        // empty clusters re-seeded
  bool converged = false;
};

namespace detail {

// Squared distances from every point (column) to every center: k × s.
inline Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& points,
                                         const Eigen::MatrixXd& centers) {
  Eigen::MatrixXd d = -2.0 * (centers.transpose() * points);
  d.colwise() += centers.colwise().squaredNorm().transpose();
  d.rowwise() += points.colwise().squaredNorm();
  return d.cwiseMax(0.0);
}

}  // namespace detail

/// k-means++ seeding: first center uniform, then D² sampling. When every
/// remaining point coincides with a chosen center, the lowest-index point not
/// yet chosen is taken.
inline Eigen::MatrixXd kmeans_pp_init(const Eigen::MatrixXd& points, std::size_t k, Rng& rng) {
  const auto s = static_cast<std::size_t>(points.cols());
  if (k < 1 || k > s) throw Error(ErrorKind::kInvalidArgument, "k-means: need 1 <= k <= points");
  Eigen::MatrixXd centers(points.rows(), static_cast<Eigen::Index>(k));
  std::vector<bool> chosen(s, false);
  std::size_t first = rng.below(s);
  centers.col(0) = points.col(static_cast<Eigen::Index>(first));
  chosen[first] = true;
  std::vector<double> d2(s);
  for (std::size_t j = 0; j < s; ++j) {
    d2[j] = (points.col(static_cast<Eigen::Index>(j)) - centers.col(0)).squaredNorm();
  }
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t j = 0; j < s; ++j) total += d2[j];
    std::size_t pick = s;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t j = 0; j < s; ++j) {
        if (d2[j] <= 0.0) continue;
        acc += d2[j];
        pick = j;
        if (acc > target) break;
      }
    } else {
      for (std::size_t j = 0; j < s && pick == s; ++j) {
        if (!chosen[j]) pick = j;
      }
    }
    chosen[pick] = true;
    centers.col(static_cast<Eigen::Index>(c)) = points.col(static_cast<Eigen::Index>(pick));
    for (std::size_t j = 0; j < s; ++j) {
      d2[j] = std::min(
          d2[j], (points.col(static_cast<Eigen::Index>(j)) - centers.col(static_cast<Eigen::Index>(c)))
                     .squaredNorm());
    }
  }
  return centers;
}

/// Lloyd's iterations from the given centers until the assignment stops
/// changing or `max_iter` updates. Assignment ties go to the lowest cluster
/// index. A cluster that empties is re-seeded to the point farthest from its
/// current center (lowest index on ties), provided that distance is positive.
inline KMeansResult lloyd(const Eigen::MatrixXd& points, Eigen::MatrixXd centers,
                          std::size_t max_iter) {
  const auto s = static_cast<std::size_t>(points.cols());
  const auto k = static_cast<std::size_t>(centers.cols());
  KMeansResult r;
  r.assignment.assign(s, 0);
  std::vector<std::size_t> previous;
  for (std::size_t iter = 0;; ++iter) {
    const Eigen::MatrixXd d = detail::squared_distances(points, centers);
    for (std::size_t j = 0; j < s; ++j) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < k; ++c) {
        if (d(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) <
            d(static_cast<Eigen::Index>(best), static_cast<Eigen::Index>(j))) {
          best = c;
        }
      }
      r.assignment[j] = best;
    }
    if (r.assignment == previous) {
      r.converged = true;
      break;
    }
    if (iter == max_iter) break;
    previous = r.assignment;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(points.rows(), static_cast<Eigen::Index>(k));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t j = 0; j < s; ++j) {
      sums.col(static_cast<Eigen::Index>(r.assignment[j])) += points.col(static_cast<Eigen::Index>(j));
      ++counts[r.assignment[j]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centers.col(static_cast<Eigen::Index>(c)) = sums.col(static_cast<Eigen::Index>(c)) / counts[c];
      }
    }
    double objective = 0.0;
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t j = 0; j < s; ++j) {
      const double dj =
          (points.col(static_cast<Eigen::Index>(j)) - centers.col(static_cast<Eigen::Index>(r.assignment[j])))
              .squaredNorm();
      objective += dj;
      if (dj > far_d) {
        far_d = dj;
        far = j;
      }
    }
    r.objective.push_back(objective);
    ++r.iterations;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0 && far_d > 0.0) {
        centers.col(static_cast<Eigen::Index>(c)) = points.col(static_cast<Eigen::Index>(far));
        ++r.reseeded;
        break;  // one per iteration; the next assignment step moves `far`
      }
    }
  }
  r.centers = std::move(centers);
  return r;
}

struct TruncatedSvd {
  Eigen::MatrixXd u;      // rows × r
  Eigen::VectorXd sigma;  // r
  Eigen::MatrixXd v;      // cols × r
};

/// Best rank-min(k, rank) approximation factors (Eckart–Young), via BDCSVD.
inline TruncatedSvd truncated_svd(const Eigen::MatrixXd& m, std::size_t k) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::Index r = std::min<Eigen::Index>(static_cast<Eigen::Index>(k), svd.singularValues().size());
  return {svd.matrixU().leftCols(r), svd.singularValues().head(r), svd.matrixV().leftCols(r)};
}

struct Clustering {
  std::vector<std::size_t> assignment;  // per document
  std::size_t k = 0;
  std::vector<TermId> rows;             // vocabulary ids of B's nonzero rows
  KMeansResult svd_stage;               // k-means on columns of B^(k)
  KMeansResult b_stage;                 // Lloyd's on columns of B
  std::vector<std::string> diagnostics;
};

/// Rank-k SVD of B, k-means++/Lloyd's on the columns of B^(k) (best of
/// kmeans_restarts starts from one seeded stream), then Lloyd's
/// on the columns of B from those centers. Only B's nonzero rows take part;
/// columns of B^(k) are clustered through their coordinates Σ Vᵀ, which
/// preserves their pairwise distances.
inline Clustering cluster_documents(const SparseMatrix& b, const TsvdParams& params) {
  params.validate();
  const std::size_t s = b.columns.size();
  const std::size_t k = params.k_topics;
  if (k > s) {
    throw Error(ErrorKind::kInvalidArgument, "topics.k (" + std::to_string(k) +
                                                 ") exceeds the document count (" +
                                                 std::to_string(s) + ")");
  }
  Clustering out;
  out.k = k;
  std::vector<std::int64_t> compact(b.rows, -1);
  for (const auto& col : b.columns) {
    for (const NBowEntry& e : col) compact[e.term] = 0;
  }
  for (std::size_t i = 0; i < b.rows; ++i) {
    if (compact[i] == 0) {
      compact[i] = static_cast<std::int64_t>(out.rows.size());
      out.rows.push_back(static_cast<TermId>(i));
    }
  }
  if (out.rows.empty()) out.diagnostics.push_back("thresholded matrix B is all zero");

  const Eigen::Index q = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(out.rows.size()));
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(q, static_cast<Eigen::Index>(s));
  for (std::size_t j = 0; j < s; ++j) {
    for (const NBowEntry& e : b.columns[j]) {
      dense(compact[e.term], static_cast<Eigen::Index>(j)) = e.weight;
    }
  }

  const TruncatedSvd svd = truncated_svd(dense, k);
  const Eigen::MatrixXd coords = svd.sigma.asDiagonal() * svd.v.transpose();
  Rng rng(params.kmeans_seed);
  auto cost = [&](const KMeansResult& run) {
    double c = 0.0;
    for (std::size_t j = 0; j < s; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      c += (coords.col(jj) - run.centers.col(static_cast<Eigen::Index>(run.assignment[j]))).squaredNorm();
    }
    return c;
  };
  double best = 0.0;
  for (std::size_t r = 0; r < params.kmeans_restarts; ++r) {
    KMeansResult run = lloyd(coords, kmeans_pp_init(coords, k, rng), params.kmeans_max_iter);
    const double c = cost(run);
    if (r == 0 || c < best) {
      best = c;
      out.svd_stage = std::move(run);
    }
  }
  out.b_stage = lloyd(dense, svd.u * out.svd_stage.centers, params.kmeans_max_iter);
  out.assignment = out.b_stage.assignment;

  for (const KMeansResult* stage : {&out.svd_stage, &out.b_stage}) {
    const auto& obj = stage->objective;
    for (std::size_t t = 1; t < obj.size(); ++t) {
      if (obj[t] > obj[t - 1] * (1.0 + 1e-12) + 1e-12) {
        out.diagnostics.push_back("k-means objective increased at iteration " + std::to_string(t));
      }
    }
    if (stage->reseeded > 0) {
      out.diagnostics.push_back(std::to_string(stage->reseeded) + " empty cluster(s) re-seeded");
    }
    if (!stage->converged) {
      out.diagnostics.push_back("k-means stopped at kmeans_max_iter before a fixpoint");
    }
  }
  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t c : out.assignment) ++sizes[c];
  for (std::size_t c = 0; c < k; ++c) {
    if (sizes[c] == 0) out.diagnostics.push_back("cluster " + std::to_string(c) + " is empty");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Catchwords.

struct Catchwords {
  std::vector<std::vector<TermId>> sets;          // J_l, sorted
  std::vector<std::vector<NBowEntry>> m_hat;      // column l, sorted by term
  std::vector<std::string> diagnostics;
};

/// M_hat column l is the mean of A's columns in cluster l, renormalized
/// (an empty cluster keeps a zero column). Word i joins J_l when
/// g(i,l) > 0 and g(i,l′) ≤ ρ·g(i,l) for every other l′, with g(i,l) the
/// ⌈δ·|R_l|⌉-th largest A_ij over j in R_l. Sets whose M_hat mass falls
/// below p0 are emptied.
inline Catchwords identify_catchwords(const DataMatrix& a, const std::vector<std::size_t>& assignment,
                                      std::size_t k, const TsvdParams& params) {
  if (assignment.size() != a.s()) {
    throw Error(ErrorKind::kInvalidArgument, "identify_catchwords: assignment size mismatch");
  }
  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t c : assignment) ++sizes.at(c);

  Catchwords out;
  out.sets.resize(k);
  out.m_hat.resize(k);
  // Per cluster: word -> nonzero values.
  std::vector<std::unordered_map<TermId, std::vector<double>>> values(k);
  std::vector<std::unordered_map<TermId, double>> sums(k);
  for (std::size_t j = 0; j < a.s(); ++j) {
    const std::size_t l = assignment[j];
    for (const NBowEntry& e : a.columns[j].entries) {
      values[l][e.term].push_back(e.weight);
      sums[l][e.term] += e.weight;
    }
  }
  for (std::size_t l = 0; l < k; ++l) {
    double total = 0.0;
    for (const auto& [t, v] : sums[l]) total += v;
    auto& col = out.m_hat[l];
    if (total > 0.0) {
      for (const auto& [t, v] : sums[l]) col.push_back({t, v / total});
    }
    std::sort(col.begin(), col.end(), [](const NBowEntry& x, const NBowEntry& y) { return x.term < y.term; });
  }

  // g(i,l), kept sparse: only words present in cluster l can be nonzero.
  std::vector<std::unordered_map<TermId, double>> g(k);
  for (std::size_t l = 0; l < k; ++l) {
    if (sizes[l] == 0) continue;
    const auto rank = static_cast<std::size_t>(
        std::max(1.0, std::ceil(params.delta * static_cast<double>(sizes[l]) - 1e-9)));
    for (auto& [t, v] : values[l]) {
      if (v.size() < rank) continue;
      std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(rank - 1), v.end(),
                       std::greater<>());
      g[l][t] = v[rank - 1];
    }
  }
  for (std::size_t l = 0; l < k; ++l) {
    for (const auto& [t, gl] : g[l]) {
      bool dominant = true;
      for (std::size_t o = 0; o < k && dominant; ++o) {
        if (o == l) continue;
        auto it = g[o].find(t);
        if (it != g[o].end() && it->second > params.rho * gl) dominant = false;
      }
      if (dominant) out.sets[l].push_back(t);
    }
    std::sort(out.sets[l].begin(), out.sets[l].end());
  }
  for (std::size_t l = 0; l < k; ++l) {
    if (out.sets[l].empty()) continue;
    double mass = 0.0;
    const auto& col = out.m_hat[l];
    for (TermId t : out.sets[l]) {
      auto it = std::lower_bound(col.begin(), col.end(), t,
                                 [](const NBowEntry& e, TermId x) { return e.term < x; });
      if (it != col.end() && it->term == t) mass += it->weight;
    }
    if (mass < params.p0) {
      out.diagnostics.push_back("topic " + std::to_string(l) + ": catchword mass " +
                                format_double(mass, 4) + " below p0; set dropped");
      out.sets[l].clear();
    }
  }
  return out;
}

/// Entry l = Σ_{i∈J_l} A_ij for the document column `doc`.
inline std::vector<double> catchword_weights(const NBowVector& doc,
                                             const std::vector<std::vector<TermId>>& sets) {
  std::vector<double> w(sets.size(), 0.0);
  for (std::size_t l = 0; l < sets.size(); ++l) {
    for (const NBowEntry& e : doc.entries) {
      if (std::binary_search(sets[l].begin(), sets[l].end(), e.term)) w[l] += e.weight;
    }
  }
  return w;
}

// ---------------------------------------------------------------------------
// Fitted model.

/// Query-time view of a fitted topic model: immutable after construction.
class TopicModel {
 public:
  TopicModel() = default;
  TopicModel(std::vector<std::string> doc_ids, std::vector<std::size_t> dominant,
             std::vector<std::vector<TermId>> catchwords, std::vector<std::vector<NBowEntry>> m_hat)
      : doc_ids_(std::move(doc_ids)),
        dominant_(std::move(dominant)),
        catchwords_(std::move(catchwords)),
        m_hat_(std::move(m_hat)) {
    if (doc_ids_.size() != dominant_.size() || catchwords_.size() != m_hat_.size()) {
      throw Error(ErrorKind::kInvalidArgument, "TopicModel: inconsistent sizes");
    }
    for (std::size_t j = 0; j < doc_ids_.size(); ++j) {
      if (dominant_[j] >= k()) throw Error(ErrorKind::kInvalidArgument, "TopicModel: topic out of range");
      doc_index_.emplace(doc_ids_[j], j);
    }
    for (std::size_t l = 0; l < catchwords_.size(); ++l) {
      for (TermId t : catchwords_[l]) term_topic_.emplace(t, l);
    }
  }

  std::size_t k() const { return catchwords_.size(); }
  const std::vector<std::string>& doc_ids() const { return doc_ids_; }
  const std::vector<std::size_t>& dominant() const { return dominant_; }
  const std::vector<std::vector<TermId>>& catchwords() const { return catchwords_; }
  const std::vector<std::vector<NBowEntry>>& m_hat() const { return m_hat_; }

  std::optional<std::size_t> dominant_of(const std::string& doc_id) const {
    auto it = doc_index_.find(doc_id);
    if (it == doc_index_.end()) return std::nullopt;
    return dominant_[it->second];
  }

  std::vector<double> catchword_weights(const NBowVector& doc) const {
    std::vector<double> w(k(), 0.0);
    for (const NBowEntry& e : doc.entries) {
      auto it = term_topic_.find(e.term);
      if (it != term_topic_.end()) w[it->second] += e.weight;
    }
    return w;
  }

  /// ‖M_hat_{·,a} − M_hat_{·,b}‖₂
  double topic_distance(std::size_t a, std::size_t b) const {
    const auto& x = m_hat_.at(a);
    const auto& y = m_hat_.at(b);
    double sq = 0.0;
    std::size_t i = 0, j = 0;
    while (i < x.size() || j < y.size()) {
      if (j == y.size() || (i < x.size() && x[i].term < y[j].term)) {
        sq += x[i].weight * x[i].weight;
        ++i;
      } else if (i == x.size() || y[j].term < x[i].term) {
        sq += y[j].weight * y[j].weight;
        ++j;
      } else {
        const double d = x[i].weight - y[j].weight;
        sq += d * d;
        ++i;
        ++j;
      }
    }
    return std::sqrt(sq);
  }

  bool operator==(const TopicModel& o) const {
    return doc_ids_ == o.doc_ids_ && dominant_ == o.dominant_ && catchwords_ == o.catchwords_ &&
           m_hat_ == o.m_hat_;
  }

 private:
  std::vector<std::string> doc_ids_;
  std::vector<std::size_t> dominant_;
  std::vector<std::vector<TermId>> catchwords_;
  std::vector<std::vector<NBowEntry>> m_hat_;
  std::unordered_map<std::string, std::size_t> doc_index_;
  std::unordered_map<TermId, std::size_t> term_topic_;
};

struct TopicFit {
  DataMatrix a;
  std::vector<int> zeta;
  SparseMatrix b;
  Clustering clustering;
  Catchwords catchwords;
  TopicModel model;
  std::vector<std::string> diagnostics;
};

inline TopicFit fit_topics(const Corpus& corpus, const TsvdParams& params) {
  params.validate();
  TopicFit fit;
  fit.a = build_data_matrix(corpus);
  fit.zeta = compute_thresholds(fit.a, params);
  fit.b = threshold_matrix(fit.a, fit.zeta);
  fit.clustering = cluster_documents(fit.b, params);
  fit.catchwords = identify_catchwords(fit.a, fit.clustering.assignment, params.k_topics, params);
  std::vector<std::string> ids;
  ids.reserve(corpus.size());
  for (const Document& d : corpus.documents) ids.push_back(d.id);
  fit.model = TopicModel(std::move(ids), fit.clustering.assignment, fit.catchwords.sets,
                         fit.catchwords.m_hat);
  fit.diagnostics = fit.clustering.diagnostics;
  fit.diagnostics.insert(fit.diagnostics.end(), fit.catchwords.diagnostics.begin(),
                         fit.catchwords.diagnostics.end());
  return fit;
}

// ---------------------------------------------------------------------------
// Model file.

inline constexpr std::size_t kStoredTopicWeights = 200;

/// Writes the header, one `doc_id<TAB>topic` line per document, k catchword
/// lines `topic<TAB>word,word,...` and k `topic<TAB>term_id:weight,...` lines
/// carrying the 200 heaviest M_hat entries (by weight, ties by term id).
inline void save_topic_model(const TopicModel& model, const Vocabulary& vocab, const std::string& path) {
  std::ofstream out = open_output(path);
  out << "SEMFLOW-TSVD v1 " << model.k() << '\n';
  for (std::size_t j = 0; j < model.doc_ids().size(); ++j) {
    out << model.doc_ids()[j] << '\t' << model.dominant()[j] << '\n';
  }
  for (std::size_t l = 0; l < model.k(); ++l) {
    out << l << '\t';
    bool first = true;
    for (TermId t : model.catchwords()[l]) {
      out << (first ? "" : ",") << vocab.terms.at(t);
      first = false;
    }
    out << '\n';
  }
  for (std::size_t l = 0; l < model.k(); ++l) {
    auto col = model.m_hat()[l];
    std::stable_sort(col.begin(), col.end(),
                     [](const NBowEntry& x, const NBowEntry& y) { return x.weight > y.weight; });
    if (col.size() > kStoredTopicWeights) col.resize(kStoredTopicWeights);
    out << l << '\t';
    for (std::size_t i = 0; i < col.size(); ++i) {
      out << (i ? "," : "") << col[i].term << ':' << format_double(col[i].weight);
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::kIo, "failed writing " + path);
}

/// Inverse of save_topic_model. Catchword strings are resolved against
/// `vocab`; the last 2k lines are the topic lines, the rest documents.
inline TopicModel load_topic_model(const std::string& path, const Vocabulary& vocab) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw FormatError(path, 1, "empty topic model file");
  const auto head = split(lines[0], ' ');
  if (head.size() != 3 || head[0] != "SEMFLOW-TSVD" || head[1] != "v1") {
    throw FormatError(path, 1, "expected header 'SEMFLOW-TSVD v1 <k>'");
  }
  const auto k = static_cast<std::size_t>(detail::parse_count(head[2], path, 1));
  if (k < 1 || lines.size() < 1 + 2 * k) throw FormatError(path, lines.size(), "truncated topic model");
  const std::size_t n_docs = lines.size() - 1 - 2 * k;

  auto parse_topic = [&](const std::string& field, std::size_t line) {
    const auto t = static_cast<std::size_t>(detail::parse_count(field, path, line));
    if (t >= k) throw FormatError(path, line, "topic id out of range");
    return t;
  };

  std::vector<std::string> ids;
  std::vector<std::size_t> dominant;
  for (std::size_t j = 0; j < n_docs; ++j) {
    const std::size_t ln = j + 2;
    const auto f = split(lines[j + 1], '\t');
    if (f.size() != 2 || f[0].empty()) throw FormatError(path, ln, "expected 'doc_id<TAB>topic'");
    ids.push_back(f[0]);
    dominant.push_back(parse_topic(f[1], ln));
  }
  std::vector<std::vector<TermId>> sets(k);
  std::vector<std::vector<NBowEntry>> m_hat(k);
  for (std::size_t l = 0; l < k; ++l) {
    const std::size_t idx = 1 + n_docs + l, ln = idx + 1;
    const auto f = split(lines[idx], '\t');
    if (f.size() != 2 || parse_topic(f[0], ln) != l) throw FormatError(path, ln, "bad catchword line");
    if (f[1].empty()) continue;
    for (const std::string& w : split(f[1], ',')) {
      auto id = vocab.find(w);
      if (!id) throw FormatError(path, ln, "catchword '" + w + "' not in vocabulary");
      sets[l].push_back(*id);
    }
    std::sort(sets[l].begin(), sets[l].end());
  }
  for (std::size_t l = 0; l < k; ++l) {
    const std::size_t idx = 1 + n_docs + k + l, ln = idx + 1;
    const auto f = split(lines[idx], '\t');
    if (f.size() != 2 || parse_topic(f[0], ln) != l) throw FormatError(path, ln, "bad topic weight line");
    if (f[1].empty()) continue;
    for (const std::string& item : split(f[1], ',')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) throw FormatError(path, ln, "expected term_id:weight");
      const auto term = detail::parse_count(item.substr(0, colon), path, ln);
      if (term >= vocab.size()) throw FormatError(path, ln, "term id out of range");
      m_hat[l].push_back({static_cast<TermId>(term), detail::parse_real(item.substr(colon + 1), path, ln)});
    }
    std::sort(m_hat[l].begin(), m_hat[l].end(),
              [](const NBowEntry& x, const NBowEntry& y) { return x.term < y.term; });
  }
  return TopicModel(std::move(ids), std::move(dominant), std::move(sets), std::move(m_hat));
}

}  // namespace semflow
