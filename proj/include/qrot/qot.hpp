#pragma once

// Hollow quadratically regularised optimal transport.
//
// The plan is pi_ij = [u_i + u_j - C_ij]_+ / eps for i != j, where the dual
// potential u minimises
//
//   Phi(u) = -sum_i u_i + 1/(4 eps) sum_{i != j} [u_i + u_j - C_ij]_+^2 .
//
// grad Phi = pi 1 - 1, and a generalised Hessian is (sigma + diag(sigma 1)) / eps
// with sigma the indicator of u_i + u_j - C_ij >= 0. The diagonal is excluded
// from every sum, which is what makes the plan hollow.

#include "qrot/core.hpp"

#include <chrono>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

namespace qrot {

struct SolveDiagnostics {
  int newton_iters = 0;
  double final_row_violation = 0.0;  // max_i |sum_j pi_ij - 1|
  double dual_objective = 0.0;
  std::vector<int> line_search_backtracks;
  std::size_t support_size = 0;
  int outer_iters = 0;  // active set only
  bool converged = false;

  // Per-iteration traces: ||pi 1 - 1||_2, Phi at accepted iterates, CG steps.
  std::vector<double> residual_history;
  std::vector<double> objective_history;
  std::vector<int> cg_iterations;
  int cg_failures = 0;
};

struct SolveResult {
  DualPotential potential;
  SparsePlan plan;
  SolveDiagnostics diagnostics;
};

/// Raised when a solve stops short of its tolerance. Carries the best iterate.
class SolveError : public std::runtime_error {
 public:
  SolveError(const std::string& what, SolveResult best)
      : std::runtime_error(what), best_(std::move(best)) {}
  const SolveResult& best() const { return best_; }

 private:
  SolveResult best_;
};

struct CgResult {
  Vector x;
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

namespace detail {

struct Edge {
  Index i;
  Index j;
};

struct CostedEdge {
  Index i;
  Index j;
  double cost;
};

// All off-diagonal pairs of a dense symmetric matrix, visited column-wise
// over the strict lower triangle and reported as (j, i) with j < i.
class DensePairs {
 public:
  explicit DensePairs(const Matrix& c) : c_(c) {}
  Index n() const { return c_.rows(); }
  template <class F>
  void for_each(F&& f) const {
    const Index n = c_.rows();
    for (Index j = 0; j < n; ++j) {
      const double* col = c_.col(j).data();
      for (Index i = j + 1; i < n; ++i) f(j, i, col[i]);
    }
  }

 private:
  const Matrix& c_;
};

// A restricted pair set; pairs outside behave as infinite cost.
class ListedPairs {
 public:
  ListedPairs(Index n, std::vector<CostedEdge> pairs) : n_(n), pairs_(std::move(pairs)) {}
  Index n() const { return n_; }
  template <class F>
  void for_each(F&& f) const {
    for (const auto& p : pairs_) f(p.i, p.j, p.cost);
  }

 private:
  Index n_;
  std::vector<CostedEdge> pairs_;
};

// Jacobi-preconditioned CG on (sigma + diag(sigma 1) + delta I) x = b with
// sigma given as an undirected edge list.
inline CgResult pattern_cg(const std::vector<Edge>& edges, const Vector& degree, const Vector& b,
                           double delta, double tol, int max_iters) {
  const Index n = b.size();
  CgResult out;
  out.x = Vector::Zero(n);
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    out.converged = true;
    return out;
  }
  const Vector diag = degree.array() + delta;
  auto apply = [&](const Vector& x, Vector& y) {
    y = diag.cwiseProduct(x);
    for (const auto& e : edges) {
      y[e.i] += x[e.j];
      y[e.j] += x[e.i];
    }
  };
  Vector r = b;
  Vector z = r.cwiseQuotient(diag);
  Vector p = z;
  Vector ap(n);
  double rz = r.dot(z);
  double rnorm = bnorm;
  int k = 0;
  while (k < max_iters && rnorm > tol * bnorm) {
    apply(p, ap);
    const double pap = p.dot(ap);
    if (!(pap > 0.0)) break;
    const double alpha = rz / pap;
    out.x += alpha * p;
    r -= alpha * ap;
    rnorm = r.norm();
    ++k;
    if (rnorm <= tol * bnorm) break;
    z = r.cwiseQuotient(diag);
    const double rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  out.iterations = k;
  out.relative_residual = rnorm / bnorm;
  out.converged = rnorm <= tol * bnorm;
  return out;
}

template <class Pairs>
double objective(const Pairs& pairs, const Vector& u, double eps) {
  double sq = 0.0;
  pairs.for_each([&](Index i, Index j, double c) {
    const double p = u[i] + u[j] - c;
    if (p > 0.0) sq += p * p;
  });
  // Each unordered pair appears twice in the ordered sum.
  return -u.sum() + sq / (2.0 * eps);
}

struct NewtonState {
  std::vector<Edge> active;
  Vector degree;
  Vector grad;  // pi 1 - 1
};

template <class Pairs>
void evaluate(const Pairs& pairs, const Vector& u, double eps, NewtonState& s) {
  const Index n = u.size();
  s.active.clear();
  s.degree.setZero(n);
  s.grad.setConstant(n, -1.0);
  pairs.for_each([&](Index i, Index j, double c) {
    const double p = u[i] + u[j] - c;
    if (p >= 0.0) {
      s.active.push_back({i, j});
      s.degree[i] += 1.0;
      s.degree[j] += 1.0;
      const double v = p / eps;
      s.grad[i] += v;
      s.grad[j] += v;
    }
  });
}

// Symmetric semi-smooth Newton with Armijo backtracking. `u_cap` bounds
// ||u||_inf; exceeding it signals an unbounded (infeasible) restricted dual.
template <class Pairs>
SolveDiagnostics newton_solve(const Pairs& pairs, Vector& u, const SolverConfig& cfg,
                              double u_cap = std::numeric_limits<double>::infinity()) {
  const Index n = pairs.n();
  const double eps = cfg.epsilon;
  const int cg_cap = cfg.cg_iteration_cap(n);
  SolveDiagnostics diag;
  NewtonState s;
  s.active.reserve(static_cast<std::size_t>(4 * n));
  double phi = objective(pairs, u, eps);
  diag.objective_history.push_back(phi);

  for (int it = 0;; ++it) {
    evaluate(pairs, u, eps, s);
    const double viol = s.grad.size() ? s.grad.cwiseAbs().maxCoeff() : 0.0;
    diag.residual_history.push_back(s.grad.norm());
    diag.final_row_violation = viol;
    diag.dual_objective = phi;
    diag.newton_iters = it;
    if (viol <= cfg.newton_tol) {
      diag.converged = true;
      return diag;
    }
    if (it >= cfg.max_newton_iters) return diag;

    const Vector rhs = -eps * s.grad;
    CgResult cg = pattern_cg(s.active, s.degree, rhs, cfg.delta, cfg.cg_tol, cg_cap);
    diag.cg_iterations.push_back(cg.iterations);
    if (!cg.converged) ++diag.cg_failures;
    Vector du = std::move(cg.x);

    // Directional derivative of Phi along du.
    double slope = s.grad.dot(du);
    if (!(slope < 0.0)) {
      // Inexact solve produced no descent; fall back to a scaled gradient step.
      du = -eps * s.grad.cwiseQuotient((s.degree.array() + cfg.delta).matrix());
      slope = s.grad.dot(du);
    }

    double t = 1.0;
    int backtracks = 0;
    Vector trial = u + du;
    double phi_trial = objective(pairs, trial, eps);
    // Below this scale Phi differences are rounding noise and the Armijo test
    // cannot discriminate; the full Newton step is taken.
    const double noise = 1e-13 * (1.0 + std::abs(phi) + std::abs(u.sum()));
    if (std::abs(cfg.theta * slope) > noise) {
      while (phi_trial >= phi + t * cfg.theta * slope && backtracks < 60) {
        t *= cfg.kappa;
        ++backtracks;
        trial = u + t * du;
        phi_trial = objective(pairs, trial, eps);
      }
      if (backtracks >= 60) {
        t = 1.0;
        trial = u + du;
        phi_trial = objective(pairs, trial, eps);
      }
    }
    diag.line_search_backtracks.push_back(backtracks);
    u = std::move(trial);
    phi = phi_trial;
    diag.objective_history.push_back(phi);
    if (!u.allFinite() || u.cwiseAbs().maxCoeff() > u_cap) {
      diag.newton_iters = it + 1;
      diag.final_row_violation = std::numeric_limits<double>::infinity();
      diag.dual_objective = phi;
      diag.converged = false;
      return diag;
    }
  }
}

inline SparsePlan plan_from_matrix(const Vector& u, const Matrix& c, double eps) {
  const Index n = c.rows();
  std::vector<PlanEntry> entries;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double p = u[i] + u[j] - c(j, i);
      if (p > 0.0) entries.push_back({i, j, p / eps});
    }
  }
  return SparsePlan(n, std::move(entries));
}

inline void check_potential(const Vector& u, Index n) {
  if (u.size() != n) throw std::invalid_argument("potential length must match the cost matrix");
  if (!u.allFinite()) throw std::invalid_argument("potential has non-finite entries");
}

inline SolveResult solve_dense_matrix(const Matrix& c, const SolverConfig& cfg,
                                      const std::optional<DualPotential>& u0) {
  cfg.validate();
  const Index n = c.rows();
  if (n < 2) throw std::invalid_argument("no feasible hollow bistochastic plan for n < 2");
  Vector u = u0 ? u0->values : Vector::Ones(n);
  check_potential(u, n);
  DensePairs pairs(c);
  SolveDiagnostics diag = newton_solve(pairs, u, cfg);
  SolveResult res{DualPotential{u}, plan_from_matrix(u, c, cfg.epsilon), std::move(diag)};
  res.diagnostics.support_size = res.plan.support_size();
  res.plan.mark_feasible(cfg.newton_tol);
  if (!res.diagnostics.converged) {
    std::ostringstream msg;
    msg << "Newton solver stopped after " << res.diagnostics.newton_iters
        << " iterations with row violation " << res.diagnostics.final_row_violation;
    throw SolveError(msg.str(), std::move(res));
  }
  return res;
}

}  // namespace detail

/// Phi(u) with the diagonal excluded.
inline double dual_objective(const DualPotential& u, const CostMatrix& c, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  detail::check_potential(u.values, c.n());
  return detail::objective(detail::DensePairs(c.entries()), u.values, epsilon);
}

/// pi_ij = [u_i + u_j - C_ij]_+ / eps off the diagonal. The returned plan is
/// flagged feasible only if `feasibility_tol` is given and met.
inline SparsePlan plan_from_potential(const DualPotential& u, const CostMatrix& c, double epsilon,
                                      std::optional<double> feasibility_tol = std::nullopt) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  detail::check_potential(u.values, c.n());
  SparsePlan plan = detail::plan_from_matrix(u.values, c.entries(), epsilon);
  if (feasibility_tol) plan.mark_feasible(*feasibility_tol);
  return plan;
}

/// Solves (sigma + diag(sigma 1) + delta I) x = rhs by preconditioned CG.
/// A result with `converged == false` holds the best iterate reached.
inline CgResult newton_system_solve(const SupportMask& sigma, const Vector& rhs, double delta,
                                    double cg_tol, int cg_max_iters) {
  const Index n = sigma.n();
  if (rhs.size() != n) throw std::invalid_argument("rhs length must match the pattern");
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  std::vector<detail::Edge> edges;
  Vector degree(n);
  for (Index i = 0; i < n; ++i) {
    degree[i] = static_cast<double>(sigma.row(i).size());
    for (Index j : sigma.row(i)) {
      if (j > i) edges.push_back({i, j});
    }
  }
  return detail::pattern_cg(edges, degree, rhs, delta, cg_tol, cg_max_iters);
}

/// Dense symmetric semi-smooth Newton solve, started from u0 (all ones by
/// default). Throws SolveError carrying the last iterate when the iteration
/// cap is hit.
inline SolveResult solve_dense(const CostMatrix& c, const SolverConfig& cfg,
                               const std::optional<DualPotential>& u0 = std::nullopt) {
  return detail::solve_dense_matrix(c.entries(), cfg, u0);
}

/// Frobenius projection of a symmetric matrix onto the hollow bistochastic
/// matrices, i.e. the dense solve with C = -M and eps = 1.
inline SolveResult frobenius_project(const Matrix& m, SolverConfig cfg = {}) {
  if (m.rows() != m.cols()) throw std::invalid_argument("matrix must be square");
  if (!m.allFinite()) throw std::invalid_argument("matrix has non-finite entries");
  const double tol = 1e-12 * (1.0 + m.cwiseAbs().maxCoeff());
  if (((m - m.transpose()).cwiseAbs().array() > tol).any()) {
    throw std::invalid_argument("matrix must be symmetric");
  }
  cfg.epsilon = 1.0;
  const Matrix c = -0.5 * (m + m.transpose());
  return detail::solve_dense_matrix(c, cfg, std::nullopt);
}

/// k-nearest-neighbour pattern, symmetrised by union. Ties go to the smaller index.
inline SupportMask knn_support(const CostMatrix& c, Index k) {
  const Index n = c.n();
  if (k < 1 || k > n - 1) throw std::invalid_argument("k must lie in [1, n-1]");
  std::vector<std::pair<Index, Index>> pairs;
  pairs.reserve(static_cast<std::size_t>(n * k));
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
    for (Index r = 0; r < k; ++r) pairs.emplace_back(i, idx[static_cast<std::size_t>(r)]);
  }
  return SupportMask(n, pairs);
}

/// Adds `count` symmetrised random derangements to S. Deterministic in `seed`.
inline SupportMask add_random_permutations(const SupportMask& s, int count, std::uint64_t seed) {
  if (count < 0) throw std::invalid_argument("count must be >= 0");
  const Index n = s.n();
  if (count > 0 && n < 2) throw std::invalid_argument("derangements need n >= 2");
  SupportMask out = s;
  std::mt19937_64 rng(seed);
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::vector<std::pair<Index, Index>> pairs;
  for (int c = 0; c < count; ++c) {
    bool fixed_point = true;
    while (fixed_point) {
      std::iota(perm.begin(), perm.end(), Index{0});
      std::shuffle(perm.begin(), perm.end(), rng);
      fixed_point = false;
      for (Index i = 0; i < n; ++i) {
        if (perm[static_cast<std::size_t>(i)] == i) {
          fixed_point = true;
          break;
        }
      }
    }
    for (Index i = 0; i < n; ++i) pairs.emplace_back(i, perm[static_cast<std::size_t>(i)]);
  }
  return out.unite(SupportMask(n, pairs));
}

/// Active-set solve: Newton on the dual restricted to S, then S grows by
/// every pair where the unrestricted plan is positive, until the
/// unrestricted plan is bistochastic. The support never shrinks.
inline SolveResult solve_active_set(const CostMatrix& c, const SolverConfig& cfg,
                                    const SupportMask& s0,
                                    const std::optional<DualPotential>& u0 = std::nullopt) {
  cfg.validate();
  const Index n = c.n();
  if (n < 2) throw std::invalid_argument("no feasible hollow bistochastic plan for n < 2");
  if (s0.n() != n) throw std::invalid_argument("support size must match the cost matrix");
  if (!s0.rows_nonempty()) throw std::invalid_argument("every row of the initial support needs an entry");
  const Matrix& cm = c.entries();
  const double eps = cfg.epsilon;
  const double u_cap = 1e8 * (1.0 + c.max_entry());

  Vector u = u0 ? u0->values : Vector::Ones(n);
  detail::check_potential(u, n);
  SupportMask support = s0;
  SolveDiagnostics total;
  Vector rows(n);
  std::vector<std::pair<Index, Index>> fresh;

  for (int outer = 1; outer <= cfg.max_outer_iters; ++outer) {
    std::vector<detail::CostedEdge> listed;
    listed.reserve(support.size());
    for (const auto& [i, j] : support.edges()) listed.push_back({i, j, cm(j, i)});
    detail::ListedPairs pairs(n, std::move(listed));
    SolveDiagnostics inner = detail::newton_solve(pairs, u, cfg, u_cap);

    total.newton_iters += inner.newton_iters;
    total.outer_iters = outer;
    total.cg_failures += inner.cg_failures;
    for (auto v : inner.line_search_backtracks) total.line_search_backtracks.push_back(v);
    for (auto v : inner.residual_history) total.residual_history.push_back(v);
    for (auto v : inner.objective_history) total.objective_history.push_back(v);
    for (auto v : inner.cg_iterations) total.cg_iterations.push_back(v);

    auto fail = [&](const std::string& why) {
      SolveResult best{DualPotential{u}, SparsePlan(n, {}), total};
      if (u.allFinite()) {
        best.plan = detail::plan_from_matrix(u, cm, eps);
        best.diagnostics.final_row_violation = best.plan.max_row_violation();
        best.diagnostics.support_size = best.plan.support_size();
      }
      best.diagnostics.converged = false;
      throw SolveError(why, std::move(best));
    };
    const bool unbounded = !u.allFinite() || u.cwiseAbs().maxCoeff() > u_cap;

    // Unrestricted check over all pairs, merging against the sorted rows of S.
    rows.setZero();
    fresh.clear();
    if (u.allFinite()) {
      for (Index j = 0; j < n; ++j) {
        const auto& nb = support.row(j);
        auto it = std::upper_bound(nb.begin(), nb.end(), j);
        const double* col = cm.col(j).data();
        for (Index i = j + 1; i < n; ++i) {
          const double p = u[i] + u[j] - col[i];
          while (it != nb.end() && *it < i) ++it;
          if (p > 0.0) {
            rows[i] += p / eps;
            rows[j] += p / eps;
            if (it == nb.end() || *it != i) fresh.emplace_back(j, i);
          }
        }
      }
    }
    if (!inner.converged) {
      // A support with no feasible completion drives u apart; the pairs it
      // pushes positive are the ones the support is missing. Grow and restart.
      if (fresh.empty()) {
        fail(unbounded ? "restricted dual is unbounded: the support admits no hollow bistochastic matrix; "
                         "use a larger or denser initial support"
                       : "restricted Newton solve did not converge");
      }
      support = support.unite(SupportMask(n, fresh));
      u = u0 ? u0->values : Vector::Ones(n);
      continue;
    }
    const double viol = (rows.array() - 1.0).abs().maxCoeff();
    if (viol <= cfg.newton_tol) {
      SolveResult res{DualPotential{u}, detail::plan_from_matrix(u, cm, eps), total};
      res.plan.mark_feasible(cfg.newton_tol);
      res.diagnostics.final_row_violation = res.plan.max_row_violation();
      res.diagnostics.dual_objective = detail::objective(detail::DensePairs(cm), u, eps);
      res.diagnostics.support_size = res.plan.support_size();
      res.diagnostics.converged = true;
      return res;
    }
    if (fresh.empty()) fail("active set stalled without reaching a bistochastic plan");
    support = support.unite(SupportMask(n, fresh));
  }
  SolveResult best{DualPotential{u}, detail::plan_from_matrix(u, cm, eps), total};
  best.diagnostics.final_row_violation = best.plan.max_row_violation();
  best.diagnostics.support_size = best.plan.support_size();
  throw SolveError("active set reached the outer iteration cap", std::move(best));
}

}  // namespace qrot
