#pragma once

// Drivers for the spiral, Gaussian-mixture, sphere-scaling and torus
// experiments and the two solver benchmarks. Each driver returns plain data;
// table and record construction lives alongside for the CLI.

#include "qrot/asymptotics.hpp"
#include "qrot/baselines.hpp"
#include "qrot/core.hpp"
#include "qrot/datasets.hpp"
#include "qrot/io.hpp"
#include "qrot/qot.hpp"
#include "qrot/spectral.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

namespace qrot::experiments {

// ---------------------------------------------------------------- plumbing

/// QROT_WORKERS if set and positive, else the hardware concurrency.
inline unsigned worker_count() {
  if (const char* env = std::getenv("QROT_WORKERS")) {
    const auto v = io_detail::parse_int(env);
    if (v && *v > 0) return static_cast<unsigned>(*v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, count) on a small pool. The first exception
/// thrown by any cell is rethrown after all workers stop.
template <class Body>
void parallel_for(std::size_t count, Body&& body, unsigned workers = worker_count()) {
  workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, workers), std::max<std::size_t>(count, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      {
        std::lock_guard lock(error_mutex);
        if (error) return;
      }
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// splitmix64 of base ^ golden * (key + 1).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t key) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (key + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// 10^{log lo + i / per_decade}, endpoints included.
inline std::vector<double> log_grid(double lo, double hi, int per_decade) {
  if (!(lo > 0.0 && hi >= lo)) throw std::invalid_argument("grid needs 0 < lo <= hi");
  if (per_decade < 1) throw std::invalid_argument("points per decade must be >= 1");
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  const int steps = static_cast<int>(std::llround((b - a) * per_decade));
  std::vector<double> g;
  for (int i = 0; i <= steps; ++i) g.push_back(std::pow(10.0, a + static_cast<double>(i) / per_decade));
  if (steps == 0) g.assign(1, lo);
  return g;
}

inline std::vector<Index> default_k_grid() {
  std::vector<Index> ks;
  for (Index k = 5; k <= 125; k += 5) ks.push_back(k);
  return ks;
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

/// Longest run of consecutive grid points, containing the minimiser, whose
/// values stay within factor * min. Returned as log10(last / first).
inline double window_decades(const std::vector<double>& grid, const std::vector<double>& values,
                             double factor = 2.0) {
  std::size_t best = values.size();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::isfinite(values[i]) && (best == values.size() || values[i] < values[best])) best = i;
  }
  if (best == values.size()) return 0.0;
  const double bound = factor * values[best];
  auto ok = [&](std::size_t i) { return std::isfinite(values[i]) && values[i] <= bound; };
  std::size_t lo = best, hi = best;
  while (lo > 0 && ok(lo - 1)) --lo;
  while (hi + 1 < values.size() && ok(hi + 1)) ++hi;
  return std::log10(grid[hi] / grid[lo]);
}

// ---------------------------------------------------------------- spiral

inline const std::vector<std::string>& spiral_methods() {
  static const std::vector<std::string> m{"qot", "eot", "knn", "gaussian", "epanechnikov", "gaussian-l2"};
  return m;
}

struct SpiralConfig {
  Index n = 500;
  Index d = 100;
  std::uint64_t seed = 0;
  double eps_lo = 1e-2;
  double eps_hi = 1e2;
  int per_decade = 20;
  std::vector<Index> k_grid = default_k_grid();
  Index angle_dims = 10;
  Index reference_k = 3;
  std::vector<std::string> methods = spiral_methods();
  double sinkhorn_tol = 1e-6;
  int sinkhorn_max_iters = 5000;
};

struct SpiralRow {
  std::string method;
  double parameter = 0.0;  // eps, or k for knn
  double angle = std::numeric_limits<double>::quiet_NaN();
  std::string status = "ok";
};

struct SpiralSummary {
  std::string method;
  double min_angle = std::numeric_limits<double>::quiet_NaN();
  double argmin = std::numeric_limits<double>::quiet_NaN();
  double window_decades = 0.0;  // run within 2x of the minimum
};

struct SpiralResult {
  std::vector<SpiralRow> rows;
  std::vector<SpiralSummary> summaries;

  const SpiralSummary& summary(const std::string& method) const {
    for (const auto& s : summaries) {
      if (s.method == method) return s;
    }
    throw std::out_of_range("no summary for method " + method);
  }
};

/// Leading eigenvectors (trivial one included) of the normalised Laplacian.
template <class Affinity>
Matrix leading_eigenvectors(const Affinity& w, Index count) {
  return laplacian_eigenpairs(w, count).eigenvectors;
}

inline SpiralResult run_spiral(const SpiralConfig& cfg) {
  if (cfg.n < cfg.angle_dims + 1) throw std::invalid_argument("spiral needs n > angle dimensions");
  for (const auto& m : cfg.methods) {
    if (std::find(spiral_methods().begin(), spiral_methods().end(), m) == spiral_methods().end()) {
      throw std::invalid_argument("unknown spiral method " + m);
    }
  }
  const LabeledCloud clean = spiral(cfg.n);
  const LabeledCloud noisy = embed_with_noise(clean, cfg.d, cfg.seed);
  const CostMatrix c = normalize_mean(pairwise_cost(noisy.points)).first;
  const Matrix reference = leading_eigenvectors(knn_affinity(pairwise_cost(clean.points), cfg.reference_k), cfg.angle_dims);
  const std::vector<double> eps_grid = log_grid(cfg.eps_lo, cfg.eps_hi, cfg.per_decade);

  std::vector<SpiralRow> rows;
  for (const auto& m : cfg.methods) {
    if (m == "knn") {
      for (Index k : cfg.k_grid) {
        if (k < c.n()) rows.push_back({m, static_cast<double>(k)});
      }
    } else {
      for (double e : eps_grid) rows.push_back({m, e});
    }
  }

  parallel_for(rows.size(), [&](std::size_t r) {
    SpiralRow& row = rows[r];
    const double p = row.parameter;
    auto angle_of = [&](const auto& w) { row.angle = mean_principal_angle(reference, leading_eigenvectors(w, cfg.angle_dims)); };
    try {
      if (row.method == "qot") {
        SolverConfig sc;
        sc.epsilon = p;
        angle_of(solve_dense(c, sc).plan);
      } else if (row.method == "eot") {
        angle_of(sinkhorn_symmetric_hollow(c, p, cfg.sinkhorn_tol, cfg.sinkhorn_max_iters).plan);
      } else if (row.method == "knn") {
        angle_of(knn_affinity(c, static_cast<Index>(p)));
      } else if (row.method == "gaussian") {
        angle_of(gaussian_kernel(c, p, false));
      } else if (row.method == "epanechnikov") {
        angle_of(epanechnikov_kernel(c, std::pow(p, 2.0 / 3.0)));
      } else if (row.method == "gaussian-l2") {
        angle_of(frobenius_project(gaussian_kernel(c, p, false).entries()).plan);
      }
    } catch (const SolveError&) {
      row.status = "not-converged";
    } catch (const ConvergenceError&) {
      row.status = "not-converged";
    } catch (const std::invalid_argument&) {
      row.status = "isolated";  // zero-degree row in the affinity
    }
  });

  SpiralResult out;
  out.rows = rows;
  for (const auto& m : cfg.methods) {
    std::vector<double> grid, vals;
    for (const auto& row : rows) {
      if (row.method != m) continue;
      grid.push_back(row.parameter);
      vals.push_back(row.status == "ok" ? row.angle : std::numeric_limits<double>::quiet_NaN());
    }
    SpiralSummary s;
    s.method = m;
    for (std::size_t i = 0; i < vals.size(); ++i) {
      if (std::isfinite(vals[i]) && !(vals[i] >= s.min_angle)) {
        s.min_angle = vals[i];
        s.argmin = grid[i];
      }
    }
    s.window_decades = window_decades(grid, vals);
    out.summaries.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------- gmm

struct GmmConfig {
  Index per_cluster = 200;
  std::vector<Index> dims = {10, 50};
  std::uint64_t seed = 0;
  double eps_scale = 1.0;
  std::vector<Index> k_grid = default_k_grid();
  Index template_dims = 6;
  bool with_eot = true;
};

struct GmmRow {
  Index d = 0;
  std::string method;
  double parameter = 0.0;
  double nmi = std::numeric_limits<double>::quiet_NaN();
  double template_angle = std::numeric_limits<double>::quiet_NaN();
  double perplexity = std::numeric_limits<double>::quiet_NaN();
  std::string status = "ok";
};

struct GmmSummary {
  Index d = 0;
  double qot_nmi = 0.0;
  double eot_nmi = std::numeric_limits<double>::quiet_NaN();
  double best_knn_nmi = 0.0;
  Index best_knn_k = 0;
};

struct GmmResult {
  std::vector<GmmRow> rows;
  std::vector<GmmSummary> summaries;

  const GmmSummary& summary(Index d) const {
    for (const auto& s : summaries) {
      if (s.d == d) return s;
    }
    throw std::out_of_range("no summary for d = " + std::to_string(d));
  }
};

template <class Affinity>
void score_clustering(GmmRow& row, const Affinity& w, const Labels& truth, Index template_dims, std::uint64_t seed) {
  const EigenSystem es = laplacian_eigenpairs(w, std::max<Index>(template_dims, 4));
  const auto km = kmeans(es.eigenvectors.leftCols(3), 3, seed);
  row.nmi = nmi(truth, km.labels);
  row.template_angle = mean_principal_angle(es.eigenvectors.leftCols(template_dims), template_subspace(truth, 3));
  row.perplexity = mean_perplexity(w);
}

inline GmmResult run_gmm(const GmmConfig& cfg) {
  GmmResult out;
  for (Index d : cfg.dims) {
    const std::uint64_t cell_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(d));
    const LabeledCloud cloud = gmm_sample(cfg.per_cluster, d, cell_seed);
    const Labels& truth = *cloud.labels;
    const CostMatrix c = pairwise_cost(cloud.points);
    const double cbar = mean_offdiag(c);

    GmmRow qot{d, "qot", cfg.eps_scale * cbar};
    SolverConfig sc;
    sc.epsilon = qot.parameter;
    score_clustering(qot, solve_dense(c, sc).plan, truth, cfg.template_dims, cell_seed);

    std::vector<GmmRow> rows;
    if (cfg.with_eot) rows.push_back({d, "eot", 0.0});
    for (Index k : cfg.k_grid) {
      if (k < c.n()) rows.push_back({d, "knn", static_cast<double>(k)});
    }
    parallel_for(rows.size(), [&](std::size_t r) {
      GmmRow& row = rows[r];
      try {
        if (row.method == "eot") {
          PerplexitySearch search;
          search.lower = 1e-3 * cbar;
          search.upper = 20.0 * cbar;
          const auto tuned = tune_epsilon_to_perplexity(c, qot.perplexity, search);
          row.parameter = tuned.epsilon;
          score_clustering(row, sinkhorn_symmetric_hollow(c, tuned.epsilon, search.sinkhorn_tol,
                                                          search.sinkhorn_max_iters).plan,
                           truth, cfg.template_dims, cell_seed);
        } else {
          score_clustering(row, knn_affinity(c, static_cast<Index>(row.parameter)), truth, cfg.template_dims,
                           cell_seed);
        }
      } catch (const std::exception&) {
        row.status = "failed";
      }
    });

    GmmSummary s;
    s.d = d;
    s.qot_nmi = qot.nmi;
    out.rows.push_back(qot);
    for (const auto& row : rows) {
      out.rows.push_back(row);
      if (row.status != "ok") continue;
      if (row.method == "eot") s.eot_nmi = row.nmi;
      if (row.method == "knn" && (s.best_knn_k == 0 || row.nmi > s.best_knn_nmi)) {
        s.best_knn_nmi = row.nmi;
        s.best_knn_k = static_cast<Index>(row.parameter);
      }
    }
    out.summaries.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------- sphere scaling

struct SphereConfig {
  Index n = 1000;
  std::vector<int> dims = {1, 2, 3};
  std::uint64_t seed = 0;
  double eps_lo = 1e2;
  double eps_hi = 1e6;
  int per_decade = 4;
};

struct SphereRow {
  int d = 0;
  double epsilon = 0.0;         // marginals 1/N convention
  double solver_epsilon = 0.0;  // epsilon / N, unit row sums
  double mean_u = 0.0;
  int newton_iters = 0;
  std::size_t support = 0;
};

struct SphereFit {
  int d = 0;
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double expected = 0.0;  // 2 / (2 + d)
  double window_lo = 0.0;
  double window_hi = 0.0;
};

struct SphereResult {
  std::vector<SphereRow> rows;
  std::vector<SphereFit> fits;
};

/// Mean optimal potential on S^d over an eps grid; slope fitted on the upper
/// half of the grid. eps is quoted for uniform 1/N marginals, so the
/// unit-row-sum solver runs at eps / N (u is the same in both conventions).
inline SphereResult run_sphere_scaling(const SphereConfig& cfg) {
  const std::vector<double> grid = log_grid(cfg.eps_lo, cfg.eps_hi, cfg.per_decade);
  if (grid.size() < 3) throw std::invalid_argument("sphere grid needs at least three points");
  std::vector<std::vector<SphereRow>> per_dim(cfg.dims.size());
  std::vector<SphereFit> fits(cfg.dims.size());
  parallel_for(cfg.dims.size(), [&](std::size_t di) {
    const int d = cfg.dims[di];
    const LabeledCloud cloud = sphere_sample(cfg.n, d, derive_seed(cfg.seed, static_cast<std::uint64_t>(d)));
    const CostMatrix c = pairwise_cost(cloud.points);
    std::optional<DualPotential> warm;
    std::vector<double> xs, ys;
    for (double e : grid) {
      SolverConfig sc;
      sc.epsilon = e / static_cast<double>(cfg.n);
      const SolveResult res = solve_dense(c, sc, warm);
      warm = res.potential;
      SphereRow row{d, e, sc.epsilon, res.potential.values.mean(), res.diagnostics.newton_iters,
                    res.diagnostics.support_size};
      per_dim[di].push_back(row);
      xs.push_back(e);
      ys.push_back(row.mean_u);
    }
    const std::size_t begin = (grid.size() - 1) / 2;
    const LogLogFit fit = fit_loglog_slope(xs, ys, begin, grid.size());
    fits[di] = {d, fit.slope, fit.intercept, fit.r2, 2.0 / (2.0 + d), grid[begin], grid.back()};
  });
  SphereResult out;
  for (auto& rows : per_dim) out.rows.insert(out.rows.end(), rows.begin(), rows.end());
  out.fits = fits;
  return out;
}

// ---------------------------------------------------------------- torus

struct TorusConfig {
  Index n = 2500;
  std::vector<double> alphas = {1.25, 1.5, 1.75, 2.0};
  int repeats = 10;
  std::uint64_t seed = 0;
  double c = 1.0;  // eps = c N^alpha
  bool doubled = false;
  LaplacianScaling scaling = LaplacianScaling::appendix;
};

struct TorusRow {
  Index n = 0;
  double alpha = 0.0;
  double epsilon = 0.0;
  double k = 0.0;
  double estimate = 0.0;
  std::uint64_t seed = 0;
  bool empty_neighbourhood = false;
};

struct TorusSummary {
  double alpha = 0.0;
  double mean = 0.0;
  double standard_error = 0.0;
  int count = 0;
};

struct TorusResult {
  std::vector<TorusRow> rows;
  std::vector<TorusSummary> summaries;

  const TorusSummary& summary(double alpha) const {
    for (const auto& s : summaries) {
      if (std::abs(s.alpha - alpha) < 1e-12) return s;
    }
    throw std::out_of_range("no summary for alpha");
  }
};

/// 1/2 (3 x^2 + 5 y^2 + 7 z^2)
inline double torus_test_function(const Vector& x) {
  return 0.5 * (3.0 * x[0] * x[0] + 5.0 * x[1] * x[1] + 7.0 * x[2] * x[2]);
}

inline Vector torus_base_point() {
  Vector x(3);
  x << 0.0, 1.0, 0.5;
  return x;
}

/// |m_a - m_b| / sqrt(se_a^2 + se_b^2)
inline double pooled_z(const TorusSummary& a, const TorusSummary& b) {
  const double se = std::hypot(a.standard_error, b.standard_error);
  const double diff = std::abs(a.mean - b.mean);
  if (se == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return diff / se;
}

/// Estimates at x0 = (0, 1, 1/2) with x0 prepended to N area-uniform samples.
inline TorusResult run_torus(const TorusConfig& cfg) {
  if (cfg.repeats < 2) throw std::invalid_argument("torus needs at least two repeats");
  if (cfg.n < 1) throw std::invalid_argument("torus needs N >= 1");
  const ManifoldSpec spec = ManifoldSpec::torus(1.0, 0.5);
  const Vector x0 = torus_base_point();
  std::vector<TorusRow> rows(cfg.alphas.size() * static_cast<std::size_t>(cfg.repeats));
  parallel_for(static_cast<std::size_t>(cfg.repeats), [&](std::size_t r) {
    const std::uint64_t s = derive_seed(cfg.seed, r);
    const LabeledCloud cloud = torus_sample(cfg.n, 1.0, 0.5, s);
    Matrix pts(cfg.n + 1, 3);
    pts.row(0) = x0.transpose();
    pts.bottomRows(cfg.n) = cloud.points;
    for (std::size_t a = 0; a < cfg.alphas.size(); ++a) {
      const double eps = cfg.c * std::pow(static_cast<double>(cfg.n), cfg.alphas[a]);
      const auto est = ot_laplacian_estimate(pts, 0, torus_test_function, spec, eps, cfg.scaling, cfg.doubled);
      rows[a * static_cast<std::size_t>(cfg.repeats) + r] = {cfg.n, cfg.alphas[a], eps, est.k, est.value, s,
                                                              est.empty_neighbourhood};
    }
  });
  TorusResult out;
  out.rows = rows;
  for (std::size_t a = 0; a < cfg.alphas.size(); ++a) {
    TorusSummary s;
    s.alpha = cfg.alphas[a];
    double sum = 0.0, sq = 0.0;
    for (int r = 0; r < cfg.repeats; ++r) sum += rows[a * static_cast<std::size_t>(cfg.repeats) + static_cast<std::size_t>(r)].estimate;
    s.count = cfg.repeats;
    s.mean = sum / cfg.repeats;
    for (int r = 0; r < cfg.repeats; ++r) {
      const double dv = rows[a * static_cast<std::size_t>(cfg.repeats) + static_cast<std::size_t>(r)].estimate - s.mean;
      sq += dv * dv;
    }
    s.standard_error = std::sqrt(sq / (cfg.repeats - 1)) / std::sqrt(static_cast<double>(cfg.repeats));
    out.summaries.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------- benchmarks

struct NewtonBenchConfig {
  Index n = 250;
  std::uint64_t seed = 0;
  double newton_tol = 1e-8;
  double ap_tol = 1e-6;
  int ap_max_iters = 200000;
};

struct NewtonBenchResult {
  int newton_iters = 0;
  double newton_violation = 0.0;
  double newton_ms = 0.0;
  std::vector<double> newton_history;  // ||pi 1 - 1||_2
  int ap_iters = 0;
  bool ap_converged = false;
  double ap_ms = 0.0;
  std::vector<double> ap_history;
};

/// Symmetrised standard Gaussian matrix, (G + G^T) / 2.
inline Matrix symmetrised_gaussian(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) g(i, j) = normal(rng);
  }
  return 0.5 * (g + g.transpose());
}

inline NewtonBenchResult run_bench_newton(const NewtonBenchConfig& cfg) {
  const Matrix m = symmetrised_gaussian(cfg.n, cfg.seed);
  NewtonBenchResult out;
  SolverConfig sc;
  sc.newton_tol = cfg.newton_tol;
  Stopwatch t1;
  const SolveResult res = frobenius_project(m, sc);
  out.newton_ms = t1.ms();
  out.newton_iters = res.diagnostics.newton_iters;
  out.newton_violation = res.diagnostics.final_row_violation;
  out.newton_history = res.diagnostics.residual_history;
  Stopwatch t2;
  const auto ap = alternating_projection_bistochastic(m, cfg.ap_tol, cfg.ap_max_iters);
  out.ap_ms = t2.ms();
  out.ap_iters = static_cast<int>(ap.history.size());
  out.ap_converged = ap.converged;
  out.ap_history = ap.history;
  return out;
}

struct ActiveSetBenchConfig {
  Index n = 2000;
  Index d = 50;
  std::uint64_t seed = 0;
  double eps_scale = 1.0;  // eps = scale * mean off-diagonal cost
  Index knn_k = 50;
  int permutations = 2;
  int repeats = 1;
};

struct ActiveSetBenchResult {
  double epsilon = 0.0;
  double dense_ms = 0.0;   // mean over repeats
  double active_ms = 0.0;
  double plan_difference = 0.0;  // Frobenius, last repeat
  int dense_newton_iters = 0;
  int active_newton_iters = 0;
  int active_outer_iters = 0;
  std::size_t support = 0;
};

inline ActiveSetBenchResult run_bench_activeset(const ActiveSetBenchConfig& cfg) {
  if (cfg.repeats < 1) throw std::invalid_argument("repeats must be >= 1");
  ActiveSetBenchResult out;
  for (int r = 0; r < cfg.repeats; ++r) {
    const std::uint64_t s = derive_seed(cfg.seed, static_cast<std::uint64_t>(r));
    std::mt19937_64 rng(s);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix x(cfg.n, cfg.d);
    for (Index j = 0; j < cfg.d; ++j) {
      for (Index i = 0; i < cfg.n; ++i) x(i, j) = normal(rng);
    }
    const CostMatrix c = pairwise_cost(x);
    SolverConfig sc;
    sc.epsilon = cfg.eps_scale * mean_offdiag(c);
    out.epsilon = sc.epsilon;

    Stopwatch td;
    const SolveResult dense = solve_dense(c, sc);
    out.dense_ms += td.ms() / cfg.repeats;

    Stopwatch ta;
    const SupportMask s0 = add_random_permutations(knn_support(c, cfg.knn_k), cfg.permutations, derive_seed(s, 1));
    const SolveResult active = solve_active_set(c, sc, s0);
    out.active_ms += ta.ms() / cfg.repeats;

    out.plan_difference = (dense.plan.to_sparse() - active.plan.to_sparse()).norm();
    out.dense_newton_iters = dense.diagnostics.newton_iters;
    out.active_newton_iters = active.diagnostics.newton_iters;
    out.active_outer_iters = active.diagnostics.outer_iters;
    out.support = active.plan.support_size();
  }
  return out;
}

}  // namespace qrot::experiments
