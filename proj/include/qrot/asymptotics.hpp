#pragma once

// First-order behaviour of the optimal potential on uniformly sampled
// manifolds, the resulting approximate plan, the Laplace-type estimator
// built from it, and log-log slope fitting.

#include "qrot/core.hpp"

#include <functional>
#include <numbers>

namespace qrot {

/// Intrinsic dimension, Riemannian volume and |S^{d-1}|.
struct ManifoldSpec {
  int d = 1;
  double volume = 1.0;
  double sphere_area = 2.0;

  static double unit_sphere_area(int d) {
    // |S^{d-1}| = 2 pi^{d/2} / Gamma(d/2)
    return 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d);
  }

  static ManifoldSpec make(int d, double volume) {
    if (d < 1) throw std::invalid_argument("intrinsic dimension must be >= 1");
    if (!(volume > 0.0)) throw std::invalid_argument("volume must be positive");
    return {d, volume, unit_sphere_area(d)};
  }

  /// Unit sphere S^d in R^{d+1}.
  static ManifoldSpec sphere(int d) {
    return make(d, unit_sphere_area(d + 1));
  }

  /// Torus of revolution with radii R > r > 0 (area 4 pi^2 R r).
  static ManifoldSpec torus(double major, double minor) {
    if (!(minor > 0.0 && minor < major)) throw std::invalid_argument("torus needs 0 < r < R");
    return make(2, 4.0 * std::numbers::pi * std::numbers::pi * major * minor);
  }
};

/// C_d = (vol / |S^{d-1}| * d (d+2) / 2)^{2/(d+2)}.
inline double c_d(const ManifoldSpec& spec) {
  const double d = spec.d;
  return std::pow(spec.volume / spec.sphere_area * d * (d + 2.0) / 2.0, 2.0 / (d + 2.0));
}

/// K = C_d eps^{2/(d+2)} N^{-4/(d+2)}.
inline double k_eps_n(const ManifoldSpec& spec, double epsilon, double n) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (!(n >= 1.0)) throw std::invalid_argument("N must be >= 1");
  const double d = spec.d;
  return c_d(spec) * std::pow(epsilon, 2.0 / (d + 2.0)) * std::pow(n, -4.0 / (d + 2.0));
}

/// [(2K if doubled else K) - C_ij]_+ / eps off the diagonal. Not flagged feasible.
inline SparsePlan approx_plan(const CostMatrix& c, double k, double epsilon, bool doubled = false) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (c.half_factor()) throw std::invalid_argument("approx_plan expects plain squared distances");
  const double level = doubled ? 2.0 * k : k;
  const Index n = c.n();
  std::vector<PlanEntry> entries;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double v = level - c(j, i);
      if (v > 0.0) entries.push_back({i, j, v / epsilon});
    }
  }
  return SparsePlan(n, std::move(entries));
}

enum class LaplacianScaling {
  theorem,   // -2 (N+1) K^{-1} Delta
  appendix,  // K^{-1} Delta
};

struct LaplacianEstimate {
  double value = 0.0;
  double k = 0.0;
  double raw = 0.0;  // Delta^OT f(x0) before scaling
  std::size_t neighbours = 0;
  bool empty_neighbourhood = false;
};

/// Laplace-type estimate at points.row(x0) from row x0 of the approximate
/// plan: Delta = sum_j W_{x0 j} (f(x0) - f(x_j)), with N = rows - 1.
inline LaplacianEstimate ot_laplacian_estimate(const Matrix& points, Index x0,
                                               const std::function<double(const Vector&)>& f,
                                               const ManifoldSpec& spec, double epsilon,
                                               LaplacianScaling scaling, bool doubled = false) {
  const Index rows = points.rows();
  if (x0 < 0 || x0 >= rows) throw std::invalid_argument("x0 index out of range");
  if (rows < 2) throw std::invalid_argument("need at least one point besides x0");
  const double n = static_cast<double>(rows - 1);
  LaplacianEstimate out;
  out.k = k_eps_n(spec, epsilon, n);
  const double level = doubled ? 2.0 * out.k : out.k;
  const Vector origin = points.row(x0).transpose();
  const double f0 = f(origin);
  double delta = 0.0;
  for (Index j = 0; j < rows; ++j) {
    if (j == x0) continue;
    const Vector xj = points.row(j).transpose();
    const double w = level - (xj - origin).squaredNorm();
    if (w > 0.0) {
      delta += (w / epsilon) * (f0 - f(xj));
      ++out.neighbours;
    }
  }
  out.raw = delta;
  out.empty_neighbourhood = out.neighbours == 0;
  if (out.empty_neighbourhood) return out;
  out.value = scaling == LaplacianScaling::theorem ? -2.0 * (n + 1.0) * delta / out.k : delta / out.k;
  return out;
}

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Least squares of log y on log x over indices [begin, end).
inline LogLogFit fit_loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys,
                                  std::size_t begin, std::size_t end) {
  if (xs.size() != ys.size()) throw std::invalid_argument("xs and ys differ in length");
  if (end > xs.size() || begin >= end || end - begin < 2) {
    throw std::invalid_argument("window must hold at least two points");
  }
  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t i = begin; i < end; ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) throw std::invalid_argument("log-log fit needs positive values");
    lx.push_back(std::log(xs[i]));
    ly.push_back(std::log(ys[i]));
  }
  const double m = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("window has no spread in x");
  LogLogFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

inline LogLogFit fit_loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  return fit_loglog_slope(xs, ys, 0, xs.size());
}

}  // namespace qrot
