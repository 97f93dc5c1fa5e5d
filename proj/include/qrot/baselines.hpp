#pragma once

// Reference affinity constructions: symmetric hollow Sinkhorn, alternating
// projections, and the classical Gaussian / Epanechnikov / kNN kernels.

#include "qrot/core.hpp"

#include <sstream>

namespace qrot {

/// Dense symmetric nonnegative affinity. `hollow` records a zero diagonal.
class DenseAffinity {
 public:
  DenseAffinity() = default;
  DenseAffinity(Matrix entries, bool hollow) : entries_(std::move(entries)), hollow_(hollow) {
    if (entries_.rows() != entries_.cols()) throw std::invalid_argument("affinity must be square");
    if (!entries_.allFinite()) throw std::invalid_argument("affinity has non-finite entries");
    if ((entries_.array() < 0.0).any()) throw std::invalid_argument("affinity must be nonnegative");
    const double tol = 1e-12 * (1.0 + entries_.cwiseAbs().maxCoeff());
    if (((entries_ - entries_.transpose()).cwiseAbs().array() > tol).any()) {
      throw std::invalid_argument("affinity must be symmetric");
    }
    if (hollow_ && (entries_.diagonal().array() != 0.0).any()) {
      throw std::invalid_argument("hollow affinity needs a zero diagonal");
    }
  }

  Index n() const { return entries_.rows(); }
  const Matrix& entries() const { return entries_; }
  bool hollow() const { return hollow_; }

 private:
  Matrix entries_;
  bool hollow_ = false;
};

/// Raised by iterative baselines that stop short of their tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double last_violation)
      : std::runtime_error(what), last_violation_(last_violation) {}
  double last_violation() const { return last_violation_; }

 private:
  double last_violation_;
};

struct SinkhornResult {
  DualPotential potential;
  DenseAffinity plan;
  int iterations = 0;
  double row_violation = 0.0;
};

namespace detail {

// log sum_{j != i} exp((v_i + v_j - C_ij) / eps) for every i.
inline Vector log_row_sums(const Matrix& c, const Vector& v, double eps) {
  const Index n = c.rows();
  Vector out(n);
  Vector z(n);
  for (Index i = 0; i < n; ++i) {
    const double* col = c.col(i).data();
    double m = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < n; ++j) {
      z[j] = (j == i) ? -std::numeric_limits<double>::infinity() : (v[i] + v[j] - col[j]) / eps;
      m = std::max(m, z[j]);
    }
    double s = 0.0;
    for (Index j = 0; j < n; ++j) s += std::exp(z[j] - m);
    out[i] = m + std::log(s);
  }
  return out;
}

}  // namespace detail

namespace detail {

// Psi(v) = -sum v + (eps/2) sum_{i != j} exp((v_i + v_j - C_ij) / eps); +inf on overflow.
inline double entropic_dual(const Matrix& c, const Vector& v, double eps) {
  const Index n = c.rows();
  double s = 0.0;
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) {
      if (i != j) s += std::exp((v[i] + v[j] - c(i, j)) / eps);
    }
  }
  return std::isfinite(s) ? -v.sum() + 0.5 * eps * s : std::numeric_limits<double>::infinity();
}

inline Matrix entropic_plan(const Matrix& c, const Vector& v, double eps) {
  const Index n = c.rows();
  Matrix w(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) w(i, j) = (i == j) ? 0.0 : std::exp((v[i] + v[j] - c(i, j)) / eps);
  }
  return w;
}

}  // namespace detail

/// Symmetric hollow Sinkhorn in the log domain:
/// v_i <- v_i - (eps/2) log sum_{j != i} exp((v_i + v_j - C_ij)/eps),
/// switching to half steps if the violation keeps growing. After
/// `fixed_point_iters` sweeps the same dual is finished by damped Newton
/// (Hessian (P + diag(P 1)) / eps, Armijo backtracking), which keeps small
/// eps tractable. Iterations count sweeps plus Newton steps.
inline SinkhornResult sinkhorn_symmetric_hollow(const CostMatrix& c, double epsilon, double tol,
                                                int max_iters, int fixed_point_iters = 100) {
  const Index n = c.n();
  if (n < 2) throw std::invalid_argument("no feasible hollow bistochastic plan for n < 2");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  const Matrix& cm = c.entries();
  Vector v = Vector::Zero(n);
  double damping = 1.0;
  double previous = std::numeric_limits<double>::infinity();
  int growth = 0;
  double violation = std::numeric_limits<double>::infinity();
  int it = 0;
  auto give_up = [&] {
    std::ostringstream msg;
    msg << "Sinkhorn did not converge in " << max_iters << " iterations (violation " << violation << ")";
    throw ConvergenceError(msg.str(), violation);
  };
  for (;; ++it) {
    const Vector logr = detail::log_row_sums(cm, v, epsilon);
    violation = (logr.array().exp() - 1.0).abs().maxCoeff();
    if (violation <= tol || it >= fixed_point_iters) break;
    if (it >= max_iters) give_up();
    growth = violation > previous ? growth + 1 : 0;
    if (growth >= 3) damping = 0.5;
    previous = violation;
    v -= damping * 0.5 * epsilon * logr;
  }
  Matrix w = detail::entropic_plan(cm, v, epsilon);
  while (violation > tol) {
    if (it >= max_iters) give_up();
    ++it;
    const Vector r = w.rowwise().sum();
    const Vector g = r - Vector::Ones(n);
    Matrix h = w / epsilon;
    h.diagonal() = r / epsilon;
    const Vector step = h.ldlt().solve(-g);
    const double slope = g.dot(step);
    const double f0 = detail::entropic_dual(cm, v, epsilon);
    double t = 1.0;
    Vector trial = v + step;
    for (int b = 0; b < 60; ++b) {
      const double f = detail::entropic_dual(cm, trial, epsilon);
      if (f <= f0 + 1e-4 * t * slope || std::abs(t * slope) <= 1e-14 * (1.0 + std::abs(f0))) break;
      t *= 0.5;
      trial = v + t * step;
    }
    v = trial;
    w = detail::entropic_plan(cm, v, epsilon);
    violation = (w.rowwise().sum().array() - 1.0).abs().maxCoeff();
  }
  w = 0.5 * (w + w.transpose()).eval();
  return {DualPotential{v}, DenseAffinity(std::move(w), true), it, violation};
}

/// exp(-C/eps); the diagonal is 1 unless `hollow`.
inline DenseAffinity gaussian_kernel(const CostMatrix& c, double epsilon, bool hollow) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  Matrix w = (-c.entries().array() / epsilon).exp().matrix();
  if (hollow) w.diagonal().setZero();
  return DenseAffinity(std::move(w), hollow);
}

/// [1 - C/h^2]_+ with C the plain squared distance; always hollow.
inline DenseAffinity epanechnikov_kernel(const CostMatrix& c, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("bandwidth must be positive");
  if (c.half_factor()) {
    throw std::invalid_argument("Epanechnikov kernel expects plain squared distances (half_factor = false)");
  }
  Matrix w = (1.0 - c.entries().array() / (h * h)).max(0.0).matrix();
  w.diagonal().setZero();
  return DenseAffinity(std::move(w), true);
}

/// Unit-weight kNN graph symmetrised by union. Ties go to the smaller index.
inline DenseAffinity knn_affinity(const CostMatrix& c, Index k) {
  const Index n = c.n();
  if (k < 1 || k > n - 1) throw std::invalid_argument("k must lie in [1, n-1]");
  Matrix w = Matrix::Zero(n, n);
  std::vector<Index> idx;
  for (Index i = 0; i < n; ++i) {
    idx.clear();
    for (Index j = 0; j < n; ++j) {
      if (j != i) idx.push_back(j);
    }
    const double* col = c.entries().col(i).data();
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [col](Index a, Index b) {
      return col[a] < col[b] || (col[a] == col[b] && a < b);
    });
    for (Index r = 0; r < k; ++r) {
      const Index j = idx[static_cast<std::size_t>(r)];
      w(i, j) = 1.0;
      w(j, i) = 1.0;
    }
  }
  return DenseAffinity(std::move(w), true);
}

/// Orthogonal projection onto {A symmetric : A 1 = 1} (A assumed symmetric).
inline Matrix affine_rowsum_projection(const Matrix& a) {
  const Index n = a.rows();
  const double nn = static_cast<double>(n);
  const Vector r = Vector::Ones(n) - a.rowwise().sum();
  const double total = r.sum();
  Matrix out = a;
  out.colwise() += r / nn;
  out.rowwise() += (r / nn).transpose();
  out.array() -= total / (nn * nn);
  return out;
}

struct AlternatingProjectionResult {
  DenseAffinity plan;
  std::vector<double> history;  // ||A 1 - 1||_2 after each iteration
  bool converged = false;
};

/// A <- max(P_aff(A), 0) from A = M until ||A 1 - 1||_2 <= tol. Not hollow.
inline AlternatingProjectionResult alternating_projection_bistochastic(const Matrix& m, double tol,
                                                                       int max_iters) {
  if (m.rows() != m.cols()) throw std::invalid_argument("matrix must be square");
  if (m.rows() < 1) throw std::invalid_argument("matrix must be nonempty");
  const double stol = 1e-12 * (1.0 + m.cwiseAbs().maxCoeff());
  if (((m - m.transpose()).cwiseAbs().array() > stol).any()) {
    throw std::invalid_argument("matrix must be symmetric");
  }
  AlternatingProjectionResult out;
  Matrix a = m;
  for (int it = 0; it < max_iters; ++it) {
    a = affine_rowsum_projection(a).cwiseMax(0.0);
    a = 0.5 * (a + a.transpose()).eval();
    const double v = (a.rowwise().sum().array() - 1.0).matrix().norm();
    out.history.push_back(v);
    if (v <= tol) {
      out.converged = true;
      break;
    }
  }
  out.plan = DenseAffinity(std::move(a), false);
  return out;
}

}  // namespace qrot
