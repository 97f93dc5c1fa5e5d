#pragma once

// Domain types shared by every solver: cost matrices, dual potentials,
// sparse symmetric plans, support patterns and solver settings.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qrot {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Dense symmetric nonnegative matrix of pairwise costs with zero diagonal.
///
/// Entries are squared Euclidean distances, optionally carrying a 1/2
/// prefactor (recorded in `half_factor`). Storage is O(n^2).
class CostMatrix {
 public:
  CostMatrix() = default;

  /// Validates symmetry (relative 1e-12), a zero diagonal and nonnegativity.
  /// Entries within tolerance are snapped to exact symmetry.
  explicit CostMatrix(Matrix entries, bool half_factor = false)
      : entries_(std::move(entries)), half_factor_(half_factor) {
    if (entries_.rows() != entries_.cols()) {
      throw std::invalid_argument("cost matrix must be square");
    }
    const Index n = entries_.rows();
    for (Index j = 0; j < n; ++j) {
      if (!std::isfinite(entries_(j, j)) || std::abs(entries_(j, j)) > 1e-12) {
        throw std::invalid_argument("cost matrix diagonal must be zero (row " +
                                    std::to_string(j) + ")");
      }
      entries_(j, j) = 0.0;
      for (Index i = j + 1; i < n; ++i) {
        const double a = entries_(i, j);
        const double b = entries_(j, i);
        if (!std::isfinite(a) || !std::isfinite(b)) {
          throw std::invalid_argument("cost matrix has non-finite entries");
        }
        if (std::abs(a - b) > 1e-12 * (1.0 + std::max(std::abs(a), std::abs(b)))) {
          throw std::invalid_argument("cost matrix is not symmetric at (" + std::to_string(i) +
                                      ", " + std::to_string(j) + ")");
        }
        const double s = 0.5 * (a + b);
        if (s < 0.0) {
          throw std::invalid_argument("cost matrix has a negative entry at (" +
                                      std::to_string(i) + ", " + std::to_string(j) + ")");
        }
        entries_(i, j) = s;
        entries_(j, i) = s;
      }
    }
  }

  Index n() const { return entries_.rows(); }
  const Matrix& entries() const { return entries_; }
  bool half_factor() const { return half_factor_; }
  double operator()(Index i, Index j) const { return entries_(i, j); }
  double max_entry() const { return n() == 0 ? 0.0 : entries_.maxCoeff(); }

 private:
  Matrix entries_;
  bool half_factor_ = false;
};

/// Lagrange multipliers for the row-sum constraints, one per point.
struct DualPotential {
  Vector values;

  Index size() const { return values.size(); }
  double operator[](Index i) const { return values[i]; }
};

/// One stored upper-triangular entry (i < j) of a symmetric hollow matrix.
struct PlanEntry {
  Index i = 0;
  Index j = 0;
  double value = 0.0;

  friend bool operator==(const PlanEntry&, const PlanEntry&) = default;
};

/// Sparse symmetric hollow nonnegative matrix stored as strictly positive
/// upper-triangular triplets sorted by (i, j).
class SparsePlan {
 public:
  SparsePlan() = default;

  SparsePlan(Index n, std::vector<PlanEntry> entries) : n_(n), entries_(std::move(entries)) {
    for (std::size_t k = 0; k < entries_.size(); ++k) {
      const auto& e = entries_[k];
      if (e.i < 0 || e.j >= n_ || e.i >= e.j) {
        throw std::invalid_argument("plan entries must satisfy 0 <= i < j < n");
      }
      if (!(e.value > 0.0) || !std::isfinite(e.value)) {
        throw std::invalid_argument("plan entries must be finite and strictly positive");
      }
      if (k > 0) {
        const auto& p = entries_[k - 1];
        if (std::pair(p.i, p.j) >= std::pair(e.i, e.j)) {
          throw std::invalid_argument("plan entries must be sorted by (i, j) without duplicates");
        }
      }
    }
  }

  Index n() const { return n_; }
  const std::vector<PlanEntry>& entries() const { return entries_; }
  std::size_t support_size() const { return entries_.size(); }

  /// Set only by `mark_feasible` once row sums were checked.
  bool feasible() const { return feasible_; }

  /// Flags the plan as feasible when every row sum lies within `tol` of one.
  bool mark_feasible(double tol) {
    feasible_ = max_row_violation() <= tol;
    return feasible_;
  }

  Vector row_sums() const {
    Vector r = Vector::Zero(n_);
    for (const auto& e : entries_) {
      r[e.i] += e.value;
      r[e.j] += e.value;
    }
    return r;
  }

  double max_row_violation() const {
    if (n_ == 0) return 0.0;
    return (row_sums().array() - 1.0).abs().maxCoeff();
  }

  /// Full symmetric sparse matrix (both triangles).
  SparseMatrix to_sparse() const {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(2 * entries_.size());
    for (const auto& e : entries_) {
      t.emplace_back(e.i, e.j, e.value);
      t.emplace_back(e.j, e.i, e.value);
    }
    SparseMatrix m(n_, n_);
    m.setFromTriplets(t.begin(), t.end());
    return m;
  }

  Matrix to_dense() const {
    Matrix m = Matrix::Zero(n_, n_);
    for (const auto& e : entries_) {
      m(e.i, e.j) = e.value;
      m(e.j, e.i) = e.value;
    }
    return m;
  }

 private:
  Index n_ = 0;
  std::vector<PlanEntry> entries_;
  bool feasible_ = false;
};

/// Symmetric hollow 0/1 pattern, kept as sorted neighbour lists per row.
class SupportMask {
 public:
  SupportMask() = default;
  explicit SupportMask(Index n) : rows_(static_cast<std::size_t>(n)) {}

  /// Builds from unordered pairs; duplicates and either orientation accepted.
  SupportMask(Index n, const std::vector<std::pair<Index, Index>>& pairs)
      : rows_(static_cast<std::size_t>(n)) {
    for (const auto& [i, j] : pairs) {
      if (i < 0 || j < 0 || i >= n || j >= n) {
        throw std::invalid_argument("support pair out of range");
      }
      if (i == j) throw std::invalid_argument("support must be hollow");
      rows_[static_cast<std::size_t>(i)].push_back(j);
      rows_[static_cast<std::size_t>(j)].push_back(i);
    }
    normalise();
  }

  Index n() const { return static_cast<Index>(rows_.size()); }
  const std::vector<Index>& row(Index i) const { return rows_[static_cast<std::size_t>(i)]; }

  bool contains(Index i, Index j) const {
    const auto& r = row(i);
    return std::binary_search(r.begin(), r.end(), j);
  }

  /// Number of unordered pairs {i, j} in the pattern.
  std::size_t size() const {
    std::size_t total = 0;
    for (const auto& r : rows_) total += r.size();
    return total / 2;
  }

  bool rows_nonempty() const {
    return std::all_of(rows_.begin(), rows_.end(), [](const auto& r) { return !r.empty(); });
  }

  /// Upper-triangular pairs (i < j) sorted by (i, j).
  std::vector<std::pair<Index, Index>> edges() const {
    std::vector<std::pair<Index, Index>> out;
    out.reserve(size());
    for (Index i = 0; i < n(); ++i) {
      for (Index j : row(i)) {
        if (j > i) out.emplace_back(i, j);
      }
    }
    return out;
  }

  SupportMask unite(const SupportMask& other) const {
    if (other.n() != n()) throw std::invalid_argument("support sizes differ");
    SupportMask out(n());
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      auto& dst = out.rows_[i];
      std::set_union(rows_[i].begin(), rows_[i].end(), other.rows_[i].begin(),
                     other.rows_[i].end(), std::back_inserter(dst));
    }
    return out;
  }

  void insert(Index i, Index j) {
    if (i == j) throw std::invalid_argument("support must be hollow");
    insert_sorted(rows_[static_cast<std::size_t>(i)], j);
    insert_sorted(rows_[static_cast<std::size_t>(j)], i);
  }

  friend bool operator==(const SupportMask&, const SupportMask&) = default;

 private:
  static void insert_sorted(std::vector<Index>& r, Index v) {
    auto it = std::lower_bound(r.begin(), r.end(), v);
    if (it == r.end() || *it != v) r.insert(it, v);
  }

  void normalise() {
    for (auto& r : rows_) {
      std::sort(r.begin(), r.end());
      r.erase(std::unique(r.begin(), r.end()), r.end());
    }
  }

  std::vector<std::vector<Index>> rows_;
};

/// Settings for the semi-smooth Newton solvers.
struct SolverConfig {
  double epsilon = 1.0;
  double theta = 0.1;   // Armijo sufficient-decrease fraction
  double kappa = 0.5;   // backtracking factor
  double delta = 1e-5;  // diagonal regulariser of the Newton system
  double newton_tol = 1e-8;  // max row-sum violation
  int max_newton_iters = 100;
  double cg_tol = 1e-10;  // relative residual
  int cg_max_iters = 0;   // 0 selects 10 * n
  int max_outer_iters = 50;  // active-set only

  void validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
      throw std::invalid_argument("epsilon must be positive and finite");
    }
    if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("theta must lie in (0, 1)");
    if (!(kappa > 0.0 && kappa < 1.0)) throw std::invalid_argument("kappa must lie in (0, 1)");
    if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
    if (!(newton_tol > 0.0)) throw std::invalid_argument("newton_tol must be positive");
    if (max_newton_iters < 1) throw std::invalid_argument("max_newton_iters must be >= 1");
    if (!(cg_tol > 0.0)) throw std::invalid_argument("cg_tol must be positive");
    if (cg_max_iters < 0) throw std::invalid_argument("cg_max_iters must be >= 0");
    if (max_outer_iters < 1) throw std::invalid_argument("max_outer_iters must be >= 1");
  }

  int cg_iteration_cap(Index n) const {
    return cg_max_iters > 0 ? cg_max_iters : static_cast<int>(std::max<Index>(10 * n, 10));
  }
};

/// Pairwise squared Euclidean costs between the rows of `points`.
inline CostMatrix pairwise_cost(const Matrix& points, bool half_factor = false) {
  const Index n = points.rows();
  if (n < 1) throw std::invalid_argument("pairwise_cost needs at least one point");
  const Matrix xt = points.transpose();  // columns are points
  const double scale = half_factor ? 0.5 : 1.0;
  Matrix c = Matrix::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = j + 1; i < n; ++i) {
      const double d = scale * (xt.col(i) - xt.col(j)).squaredNorm();
      c(i, j) = d;
      c(j, i) = d;
    }
  }
  return CostMatrix(std::move(c), half_factor);
}

inline CostMatrix pairwise_cost(const std::vector<std::vector<double>>& points,
                                bool half_factor = false) {
  if (points.empty()) throw std::invalid_argument("pairwise_cost needs at least one point");
  const std::size_t p = points.front().size();
  Matrix m(static_cast<Index>(points.size()), static_cast<Index>(p));
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != p) {
      throw std::invalid_argument("point " + std::to_string(i) + " has dimension " +
                                  std::to_string(points[i].size()) + ", expected " +
                                  std::to_string(p));
    }
    for (std::size_t k = 0; k < p; ++k) m(static_cast<Index>(i), static_cast<Index>(k)) = points[i][k];
  }
  return pairwise_cost(m, half_factor);
}

/// N^-2 sum_ij C_ij, diagonal zeros included.
inline double mean_offdiag(const CostMatrix& c) {
  const Index n = c.n();
  if (n < 1) throw std::invalid_argument("mean_offdiag needs n >= 1");
  return c.entries().sum() / static_cast<double>(n * n);
}

/// Rescales C to unit mean; returns the divisor that was applied.
inline std::pair<CostMatrix, double> normalize_mean(const CostMatrix& c) {
  const double scale = mean_offdiag(c);
  if (!(scale > 0.0)) throw std::invalid_argument("cannot normalise an all-zero cost matrix");
  return {CostMatrix(c.entries() / scale, c.half_factor()), scale};
}

/// C_ij + eta_i + eta_j off the diagonal; the diagonal stays zero.
inline CostMatrix rank_one_shift(const CostMatrix& c, const Vector& eta) {
  const Index n = c.n();
  if (eta.size() != n) throw std::invalid_argument("eta length must match the cost matrix");
  Matrix out = c.entries();
  for (Index j = 0; j < n; ++j) {
    for (Index i = j + 1; i < n; ++i) {
      const double v = out(i, j) + eta[i] + eta[j];
      if (v < 0.0) {
        throw std::invalid_argument("rank-one shift makes entry (" + std::to_string(i) + ", " +
                                    std::to_string(j) + ") negative");
      }
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return CostMatrix(std::move(out), c.half_factor());
}

}  // namespace qrot
