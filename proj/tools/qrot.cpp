// qrot command-line tool: solve, embed, cluster, experiment.
//
// Exit codes: 0 success, 2 tolerance not met, 64 usage or input error,
// 1 anything else (I/O failures).

#include "qrot/asymptotics.hpp"
#include "qrot/baselines.hpp"
#include "qrot/datasets.hpp"
#include "qrot/experiments.hpp"
#include "qrot/io.hpp"
#include "qrot/qot.hpp"
#include "qrot/spectral.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace {

using namespace qrot;
namespace ex = qrot::experiments;
namespace fs = std::filesystem;

constexpr int kOk = 0;
constexpr int kTolerance = 2;
constexpr int kUsage = 64;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(double x) { return io_detail::format_double(x); }

// ---------------------------------------------------------------- solve

struct SolveOptions {
  std::string points, cost;
  std::optional<double> eps, eps_mean_scale;
  std::string method = "qot-dense";
  Index knn_init = 10;
  int perm_init = 2;
  std::uint64_t seed = 0;
  double tol = 1e-8;
  std::string out_plan, out_potential, out_diag;
};

CostMatrix load_cost(const std::string& points, const std::string& cost) {
  if (!points.empty()) return pairwise_cost(read_points_csv(points).points);
  return CostMatrix(read_matrix_csv(cost));
}

int run_solve(const SolveOptions& o) {
  const CostMatrix c = load_cost(o.points, o.cost);
  if (c.n() < 2) throw UsageError("need at least two points");
  const double eps = o.eps ? *o.eps : *o.eps_mean_scale * mean_offdiag(c);
  if (!(eps > 0.0)) throw UsageError("epsilon must be positive");

  if (o.method == "eot") {
    int code = kOk;
    nlohmann::json diag;
    try {
      const auto res = sinkhorn_symmetric_hollow(c, eps, o.tol, 100000);
      if (!o.out_plan.empty()) write_affinity_coo(o.out_plan, res.plan, eps);
      if (!o.out_potential.empty()) write_potential_csv(o.out_potential, res.potential);
      diag = {{"method", "eot"}, {"epsilon", eps}, {"iterations", res.iterations},
              {"final_row_violation", res.row_violation}, {"converged", true}};
    } catch (const ConvergenceError& e) {
      diag = {{"method", "eot"}, {"epsilon", eps}, {"final_row_violation", e.last_violation()},
              {"converged", false}, {"error", e.what()}};
      std::cerr << e.what() << '\n';
      code = kTolerance;
    }
    if (!o.out_diag.empty()) write_json(o.out_diag, diag);
    std::cout << diag.dump() << '\n';
    return code;
  }

  SolverConfig cfg;
  cfg.epsilon = eps;
  cfg.newton_tol = o.tol;
  SolveResult res;
  int code = kOk;
  try {
    if (o.method == "qot-dense") {
      res = solve_dense(c, cfg);
    } else {
      const Index k = std::min<Index>(o.knn_init, c.n() - 1);
      res = solve_active_set(c, cfg, add_random_permutations(knn_support(c, k), o.perm_init, o.seed));
    }
  } catch (const SolveError& e) {
    std::cerr << e.what() << '\n';
    res = e.best();
    code = kTolerance;
  }
  if (code == kOk && !res.plan.mark_feasible(10.0 * o.tol)) code = kTolerance;
  nlohmann::json diag = to_json(res.diagnostics);
  diag["method"] = o.method;
  diag["epsilon"] = eps;
  if (!o.out_diag.empty()) write_json(o.out_diag, diag);
  if (code == kOk) {
    if (!o.out_plan.empty()) write_plan_coo(o.out_plan, res.plan, eps);
    if (!o.out_potential.empty()) write_potential_csv(o.out_potential, res.potential);
  }
  std::cout << "method=" << o.method << " eps=" << fmt(eps) << " newton_iters=" << res.diagnostics.newton_iters
            << " violation=" << fmt(res.diagnostics.final_row_violation)
            << " support=" << res.diagnostics.support_size << '\n';
  return code;
}

// ---------------------------------------------------------------- embed / cluster

struct GraphOptions {
  std::string plan, affinity;
};

DenseAffinity load_affinity(const GraphOptions& g) {
  if (!g.plan.empty()) {
    const auto pf = read_plan_coo(g.plan);
    return DenseAffinity(pf.plan.to_dense(), true);
  }
  return read_affinity_coo(g.affinity);
}

int run_embed(const GraphOptions& g, Index dims, const std::string& out, const std::string& out_eigenvalues) {
  const DenseAffinity w = load_affinity(g);
  if (dims < 1 || dims >= w.n()) {
    throw UsageError("--dims must lie in [1, n-1] (n = " + std::to_string(w.n()) + ")");
  }
  const EigenSystem es = laplacian_eigenpairs(w, dims + 1);
  const Matrix x = eigenmap_embed(es, dims);
  if (out.empty()) {
    write_points_csv(std::cout, x);
  } else {
    write_points_csv(out, x);
  }
  if (!out_eigenvalues.empty()) write_points_csv(out_eigenvalues, Matrix(es.eigenvalues));
  return kOk;
}

int run_cluster(const GraphOptions& g, int k, std::uint64_t seed, const std::string& labels_out,
                const std::string& truth) {
  const DenseAffinity w = load_affinity(g);
  if (k < 1 || k >= w.n()) throw UsageError("--k must lie in [1, n-1]");
  const auto res = spectral_clustering(w, k, seed);
  if (!labels_out.empty()) write_labels_csv(labels_out, res.labels);
  std::cout << "k=" << k << " inertia=" << fmt(res.inertia);
  if (!truth.empty()) {
    const Labels t = read_labels_csv(truth);
    std::cout << " nmi=" << fmt(nmi(t, res.labels));
  }
  std::cout << '\n';
  return kOk;
}

// ---------------------------------------------------------------- experiments

struct ExperimentOptions {
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  bool timing = false;
  std::optional<Index> n, d;
  std::vector<Index> dims;
  std::optional<int> repeats, per_decade;
  std::optional<double> eps_lo, eps_hi, c;
  std::vector<double> alphas;
  bool doubled = false;
  std::string scaling = "appendix";
  std::vector<std::string> methods;
};

fs::path prepare(const ExperimentOptions& o) {
  fs::create_directories(o.out_dir);
  return fs::path(o.out_dir);
}

void finish(ExperimentRecord rec, const fs::path& dir, const std::string& stem, double ms, bool timing) {
  rec.runtime_ms = timing ? ms : 0.0;
  write_record_json((dir / (stem + ".json")).string(), rec);
}

void put_metric(ExperimentRecord& rec, const std::string& key, double v) {
  if (std::isfinite(v)) rec.metrics[key] = v;
}

int experiment_spiral(const ExperimentOptions& o) {
  ex::SpiralConfig cfg;
  cfg.seed = o.seed;
  if (o.n) cfg.n = *o.n;
  if (o.d) cfg.d = *o.d;
  if (o.per_decade) cfg.per_decade = *o.per_decade;
  if (o.eps_lo) cfg.eps_lo = *o.eps_lo;
  if (o.eps_hi) cfg.eps_hi = *o.eps_hi;
  if (!o.methods.empty()) cfg.methods = o.methods;
  if (cfg.n < 20 || cfg.d < 3) throw UsageError("spiral needs --n >= 20 and --d >= 3");
  const auto dir = prepare(o);
  ex::Stopwatch sw;
  const auto res = ex::run_spiral(cfg);
  CsvTable t({"method", "parameter", "mean_principal_angle", "status"});
  for (const auto& r : res.rows) t.row().cell(r.method).cell(r.parameter).cell(r.angle).cell(r.status);
  t.write((dir / "spiral_angles.csv").string());
  CsvTable s({"method", "min_mean_principal_angle", "argmin", "window_decades_2x"});
  for (const auto& r : res.summaries) s.row().cell(r.method).cell(r.min_angle).cell(r.argmin).cell(r.window_decades);
  s.write((dir / "spiral_summary.csv").string());
  ExperimentRecord rec;
  rec.experiment = "spiral";
  rec.seed = o.seed;
  rec.params = {{"n", cfg.n}, {"d", cfg.d}, {"eps_lo", cfg.eps_lo}, {"eps_hi", cfg.eps_hi},
                {"per_decade", cfg.per_decade}, {"angle_dims", cfg.angle_dims}, {"reference_k", cfg.reference_k},
                {"angle_summary", "mean"}};
  for (const auto& r : res.summaries) {
    put_metric(rec, r.method + ".min_angle", r.min_angle);
    put_metric(rec, r.method + ".argmin", r.argmin);
    put_metric(rec, r.method + ".window_decades", r.window_decades);
    std::cout << r.method << " min_angle=" << fmt(r.min_angle) << " argmin=" << fmt(r.argmin)
              << " window_decades=" << fmt(r.window_decades) << '\n';
  }
  rec.artifact_paths = {"spiral_angles.csv", "spiral_summary.csv"};
  finish(rec, dir, "spiral", sw.ms(), o.timing);
  return kOk;
}

int experiment_gmm(const ExperimentOptions& o) {
  ex::GmmConfig cfg;
  cfg.seed = o.seed;
  if (o.n) cfg.per_cluster = *o.n;
  if (!o.dims.empty()) cfg.dims = o.dims;
  if (o.d) cfg.dims = {*o.d};
  if (cfg.per_cluster < 5) throw UsageError("gmm needs --n (per cluster) >= 5");
  for (Index d : cfg.dims) {
    if (d < 2) throw UsageError("gmm needs d >= 2");
  }
  const auto dir = prepare(o);
  ex::Stopwatch sw;
  const auto res = ex::run_gmm(cfg);
  CsvTable t({"d", "method", "parameter", "nmi", "template_angle", "mean_perplexity", "status"});
  for (const auto& r : res.rows) {
    t.row().cell(static_cast<long long>(r.d)).cell(r.method).cell(r.parameter).cell(r.nmi).cell(r.template_angle)
        .cell(r.perplexity).cell(r.status);
  }
  t.write((dir / "gmm.csv").string());
  ExperimentRecord rec;
  rec.experiment = "gmm";
  rec.seed = o.seed;
  rec.params = {{"per_cluster", cfg.per_cluster}, {"dims", cfg.dims}, {"eps_scale", cfg.eps_scale},
                {"template_dims", cfg.template_dims}};
  for (const auto& s : res.summaries) {
    const std::string p = "d" + std::to_string(s.d) + ".";
    put_metric(rec, p + "qot_nmi", s.qot_nmi);
    put_metric(rec, p + "eot_nmi", s.eot_nmi);
    put_metric(rec, p + "best_knn_nmi", s.best_knn_nmi);
    put_metric(rec, p + "best_knn_k", static_cast<double>(s.best_knn_k));
    std::cout << "d=" << s.d << " qot_nmi=" << fmt(s.qot_nmi) << " eot_nmi=" << fmt(s.eot_nmi)
              << " best_knn_nmi=" << fmt(s.best_knn_nmi) << " (k=" << s.best_knn_k << ")\n";
  }
  rec.artifact_paths = {"gmm.csv"};
  finish(rec, dir, "gmm", sw.ms(), o.timing);
  return kOk;
}

int experiment_sphere(const ExperimentOptions& o) {
  ex::SphereConfig cfg;
  cfg.seed = o.seed;
  if (o.n) cfg.n = *o.n;
  if (o.d) cfg.dims = {static_cast<int>(*o.d)};
  if (!o.dims.empty()) cfg.dims.assign(o.dims.begin(), o.dims.end());
  if (o.per_decade) cfg.per_decade = *o.per_decade;
  if (o.eps_lo) cfg.eps_lo = *o.eps_lo;
  if (o.eps_hi) cfg.eps_hi = *o.eps_hi;
  if (cfg.n < 10) throw UsageError("sphere-scaling needs --n >= 10");
  for (int d : cfg.dims) {
    if (d < 1) throw UsageError("sphere dimension must be >= 1");
  }
  const auto dir = prepare(o);
  ex::Stopwatch sw;
  const auto res = ex::run_sphere_scaling(cfg);
  CsvTable t({"d", "epsilon", "solver_epsilon", "mean_u", "newton_iters", "support"});
  for (const auto& r : res.rows) {
    t.row().cell(r.d).cell(r.epsilon).cell(r.solver_epsilon).cell(r.mean_u).cell(r.newton_iters)
        .cell(static_cast<std::uint64_t>(r.support));
  }
  t.write((dir / "sphere_scaling.csv").string());
  CsvTable f({"d", "slope", "expected", "intercept", "r2", "window_lo", "window_hi"});
  ExperimentRecord rec;
  rec.experiment = "sphere-scaling";
  rec.seed = o.seed;
  rec.params = {{"n", cfg.n}, {"dims", cfg.dims}, {"eps_lo", cfg.eps_lo}, {"eps_hi", cfg.eps_hi},
                {"per_decade", cfg.per_decade}};
  for (const auto& r : res.fits) {
    f.row().cell(r.d).cell(r.slope).cell(r.expected).cell(r.intercept).cell(r.r2).cell(r.window_lo).cell(r.window_hi);
    put_metric(rec, "d" + std::to_string(r.d) + ".slope", r.slope);
    put_metric(rec, "d" + std::to_string(r.d) + ".r2", r.r2);
    std::cout << "d=" << r.d << " slope=" << fmt(r.slope) << " expected=" << fmt(r.expected)
              << " r2=" << fmt(r.r2) << '\n';
  }
  f.write((dir / "sphere_fits.csv").string());
  rec.artifact_paths = {"sphere_scaling.csv", "sphere_fits.csv"};
  finish(rec, dir, "sphere_scaling", sw.ms(), o.timing);
  return kOk;
}

int experiment_torus(const ExperimentOptions& o) {
  ex::TorusConfig cfg;
  cfg.seed = o.seed;
  if (o.n) cfg.n = *o.n;
  if (o.repeats) cfg.repeats = *o.repeats;
  if (!o.alphas.empty()) cfg.alphas = o.alphas;
  if (o.c) cfg.c = *o.c;
  cfg.doubled = o.doubled;
  cfg.scaling = o.scaling == "theorem" ? LaplacianScaling::theorem : LaplacianScaling::appendix;
  if (cfg.n < 1 || cfg.repeats < 2) throw UsageError("torus needs --n >= 1 and --repeats >= 2");
  if (!(cfg.c > 0.0)) throw UsageError("--c must be positive");
  const auto dir = prepare(o);
  ex::Stopwatch sw;
  const auto res = ex::run_torus(cfg);
  CsvTable t({"N", "alpha", "epsilon", "K", "estimate", "seed"});
  for (const auto& r : res.rows) {
    t.row().cell(static_cast<long long>(r.n)).cell(r.alpha).cell(r.epsilon).cell(r.k).cell(r.estimate).cell(r.seed);
  }
  t.write((dir / "torus.csv").string());
  CsvTable s({"alpha", "mean", "standard_error", "count"});
  ExperimentRecord rec;
  rec.experiment = "torus";
  rec.seed = o.seed;
  rec.params = {{"n", cfg.n}, {"repeats", cfg.repeats}, {"alphas", cfg.alphas}, {"c", cfg.c},
                {"doubled", cfg.doubled}, {"scaling", o.scaling}};
  for (const auto& r : res.summaries) {
    s.row().cell(r.alpha).cell(r.mean).cell(r.standard_error).cell(r.count);
    put_metric(rec, "alpha" + fmt(r.alpha) + ".mean", r.mean);
    put_metric(rec, "alpha" + fmt(r.alpha) + ".se", r.standard_error);
    std::cout << "alpha=" << fmt(r.alpha) << " mean=" << fmt(r.mean) << " se=" << fmt(r.standard_error) << '\n';
  }
  s.write((dir / "torus_summary.csv").string());
  rec.artifact_paths = {"torus.csv", "torus_summary.csv"};
  finish(rec, dir, "torus", sw.ms(), o.timing);
  return kOk;
}

int experiment_bench_newton(const ExperimentOptions& o) {
  ex::NewtonBenchConfig cfg;
  cfg.seed = o.seed;
  if (o.n) cfg.n = *o.n;
  if (cfg.n < 3) throw UsageError("bench-newton needs --n >= 3");
  const auto dir = prepare(o);
  const auto res = ex::run_bench_newton(cfg);
  CsvTable t({"method", "iteration", "violation_l2"});
  for (std::size_t i = 0; i < res.newton_history.size(); ++i) {
    t.row().cell("newton").cell(static_cast<std::uint64_t>(i)).cell(res.newton_history[i]);
  }
  for (std::size_t i = 0; i < res.ap_history.size(); ++i) {
    t.row().cell("alternating-projection").cell(static_cast<std::uint64_t>(i + 1)).cell(res.ap_history[i]);
  }
  t.write((dir / "bench_newton.csv").string());
  ExperimentRecord rec;
  rec.experiment = "bench-newton";
  rec.seed = o.seed;
  rec.params = {{"n", cfg.n}, {"newton_tol", cfg.newton_tol}, {"ap_tol", cfg.ap_tol}, {"ap_max_iters", cfg.ap_max_iters}};
  rec.metrics = {{"newton_iters", res.newton_iters},
                 {"newton_violation", res.newton_violation},
                 {"newton_ms", res.newton_ms},
                 {"ap_iters", res.ap_iters},
                 {"ap_converged", res.ap_converged ? 1.0 : 0.0},
                 {"ap_ms", res.ap_ms}};
  rec.runtime_ms = res.newton_ms + res.ap_ms;
  rec.artifact_paths = {"bench_newton.csv"};
  write_record_json((dir / "bench_newton.json").string(), rec);
  std::cout << "newton_iters=" << res.newton_iters << " ap_iters=" << res.ap_iters
            << (res.ap_converged ? "" : " (cap reached)") << " ratio="
            << fmt(static_cast<double>(res.ap_iters) / std::max(1, res.newton_iters)) << '\n';
  return kOk;
}

int experiment_bench_activeset(const ExperimentOptions& o) {
  ex::ActiveSetBenchConfig cfg;
  cfg.seed = o.seed;
  if (o.n) cfg.n = *o.n;
  if (o.d) cfg.d = *o.d;
  if (o.repeats) cfg.repeats = *o.repeats;
  if (cfg.n < 3 || cfg.d < 1 || cfg.repeats < 1) throw UsageError("bench-activeset needs --n >= 3, --d >= 1");
  cfg.knn_k = std::min<Index>(cfg.knn_k, cfg.n - 1);
  const auto dir = prepare(o);
  const auto res = ex::run_bench_activeset(cfg);
  ExperimentRecord rec;
  rec.experiment = "bench-activeset";
  rec.seed = o.seed;
  rec.params = {{"n", cfg.n}, {"d", cfg.d}, {"knn_k", cfg.knn_k}, {"permutations", cfg.permutations},
                {"repeats", cfg.repeats}};
  rec.metrics = {{"epsilon", res.epsilon},
                 {"dense_ms", res.dense_ms},
                 {"active_ms", res.active_ms},
                 {"plan_difference", res.plan_difference},
                 {"dense_newton_iters", res.dense_newton_iters},
                 {"active_newton_iters", res.active_newton_iters},
                 {"active_outer_iters", res.active_outer_iters},
                 {"support", static_cast<double>(res.support)}};
  rec.runtime_ms = res.dense_ms + res.active_ms;
  write_record_json((dir / "bench_activeset.json").string(), rec);
  std::cout << "dense_ms=" << fmt(res.dense_ms) << " active_ms=" << fmt(res.active_ms)
            << " plan_difference=" << fmt(res.plan_difference) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse bistochastic affinities by quadratically regularised optimal transport"};
  app.require_subcommand(1);

  SolveOptions so;
  auto* solve = app.add_subcommand("solve", "Solve the hollow QOT (or EOT) problem for a point cloud or cost matrix");
  auto* pts = solve->add_option("--points", so.points, "Points CSV, one row per point")->check(CLI::ExistingFile);
  auto* cst = solve->add_option("--cost", so.cost, "Square cost matrix CSV")->check(CLI::ExistingFile);
  pts->excludes(cst);
  auto* eps = solve->add_option("--eps", so.eps, "Regularisation epsilon");
  auto* scale = solve->add_option("--eps-mean-scale", so.eps_mean_scale, "Set epsilon = scale * mean off-diagonal cost");
  eps->excludes(scale);
  solve->add_option("--method", so.method, "Solver")
      ->check(CLI::IsMember({"qot-dense", "qot-active", "eot"}))
      ->capture_default_str();
  solve->add_option("--knn-init", so.knn_init, "Initial kNN support size for qot-active")->capture_default_str();
  solve->add_option("--perm-init", so.perm_init, "Random permutations added to the initial support")->capture_default_str();
  solve->add_option("--seed", so.seed, "Seed for the random permutations")->capture_default_str();
  solve->add_option("--tol", so.tol, "Row-sum tolerance")->capture_default_str();
  solve->add_option("--out-plan", so.out_plan, "Plan COO output");
  solve->add_option("--out-potential", so.out_potential, "Potential CSV output");
  solve->add_option("--out-diag", so.out_diag, "Diagnostics JSON output");

  GraphOptions eg;
  Index dims = 2;
  std::string embed_out, embed_eigs;
  auto* embed = app.add_subcommand("embed", "Eigenmap embedding from a plan or affinity");
  auto* ep = embed->add_option("--plan", eg.plan, "Hollow plan COO")->check(CLI::ExistingFile);
  auto* ea = embed->add_option("--affinity", eg.affinity, "Affinity COO")->check(CLI::ExistingFile);
  ep->excludes(ea);
  embed->add_option("--dims", dims, "Embedding dimension L")->capture_default_str();
  embed->add_option("--out", embed_out, "Coordinates CSV (stdout if omitted)");
  embed->add_option("--out-eigenvalues", embed_eigs, "Eigenvalues CSV");

  GraphOptions cg;
  int k = 2;
  std::uint64_t cseed = 0;
  std::string labels_out, truth;
  auto* cluster = app.add_subcommand("cluster", "Spectral clustering of a plan or affinity");
  auto* cp = cluster->add_option("--plan", cg.plan, "Hollow plan COO")->check(CLI::ExistingFile);
  auto* ca = cluster->add_option("--affinity", cg.affinity, "Affinity COO")->check(CLI::ExistingFile);
  cp->excludes(ca);
  cluster->add_option("--k", k, "Number of clusters")->capture_default_str();
  cluster->add_option("--seed", cseed, "k-means seed")->capture_default_str();
  cluster->add_option("--labels-out", labels_out, "Labels CSV output");
  cluster->add_option("--truth", truth, "True labels CSV; prints NMI")->check(CLI::ExistingFile);

  ExperimentOptions eo;
  auto* experiment = app.add_subcommand("experiment", "Run a desk-scale experiment");
  experiment->require_subcommand(1);
  auto common = [&](CLI::App* sub) {
    sub->add_option("--seed", eo.seed, "Base seed")->capture_default_str();
    sub->add_option("--out-dir", eo.out_dir, "Output directory")->capture_default_str();
    sub->add_flag("--timing", eo.timing, "Record wall time in the JSON record (makes output nondeterministic)");
  };
  auto* sp = experiment->add_subcommand("spiral", "Eigenspace angles on the noisy spiral (defaults N=500, d=100)");
  common(sp);
  sp->add_option("--n", eo.n, "Number of points");
  sp->add_option("--d", eo.d, "Ambient dimension");
  sp->add_option("--per-decade", eo.per_decade, "Grid points per decade (default 20)");
  sp->add_option("--eps-lo", eo.eps_lo, "Lower end of the eps grid (default 1e-2)");
  sp->add_option("--eps-hi", eo.eps_hi, "Upper end of the eps grid (default 1e2)");
  sp->add_option("--methods", eo.methods, "Subset of qot,eot,knn,gaussian,epanechnikov,gaussian-l2")->delimiter(',');
  auto* gm = experiment->add_subcommand("gmm", "Spectral clustering of a 3-component mixture");
  common(gm);
  gm->add_option("--n", eo.n, "Points per cluster (default 200)");
  gm->add_option("--d", eo.d, "Single ambient dimension");
  gm->add_option("--dims", eo.dims, "Ambient dimensions (default 10,50)")->delimiter(',');
  auto* sph = experiment->add_subcommand("sphere-scaling", "Mean potential vs eps on S^d (default N=1000, d=1,2,3)");
  common(sph);
  sph->add_option("--n", eo.n, "Number of points");
  sph->add_option("--d", eo.d, "Single sphere dimension");
  sph->add_option("--dims", eo.dims, "Sphere dimensions")->delimiter(',');
  sph->add_option("--per-decade", eo.per_decade, "Grid points per decade (default 4)");
  sph->add_option("--eps-lo", eo.eps_lo, "Lower end of the eps grid (default 1e2)");
  sph->add_option("--eps-hi", eo.eps_hi, "Upper end of the eps grid (default 1e6)");
  auto* tor = experiment->add_subcommand("torus", "Laplacian estimate at (0, 1, 1/2) on the torus");
  common(tor);
  tor->add_option("--n", eo.n, "Number of samples (default 2500)");
  tor->add_option("--repeats", eo.repeats, "Independent samples per alpha (default 10)");
  tor->add_option("--alphas", eo.alphas, "Exponents alpha in eps = c N^alpha")->delimiter(',');
  tor->add_option("--c", eo.c, "Constant c in eps = c N^alpha (default 1)");
  tor->add_flag("--doubled", eo.doubled, "Use 2K in the approximate plan");
  tor->add_option("--scaling", eo.scaling, "appendix or theorem")
      ->check(CLI::IsMember({"appendix", "theorem"}))
      ->capture_default_str();
  auto* bn = experiment->add_subcommand("bench-newton", "Newton vs alternating projections (default N=250)");
  common(bn);
  bn->add_option("--n", eo.n, "Matrix size");
  auto* ba = experiment->add_subcommand("bench-activeset", "Dense vs active-set wall time (default N=2000, d=50)");
  common(ba);
  ba->add_option("--n", eo.n, "Number of points");
  ba->add_option("--d", eo.d, "Dimension");
  ba->add_option("--repeats", eo.repeats, "Repeats to average");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (solve->parsed()) {
      if (so.points.empty() == so.cost.empty()) throw UsageError("give exactly one of --points, --cost");
      if (!so.eps == !so.eps_mean_scale) throw UsageError("give exactly one of --eps, --eps-mean-scale");
      return run_solve(so);
    }
    if (embed->parsed()) {
      if (eg.plan.empty() == eg.affinity.empty()) throw UsageError("give exactly one of --plan, --affinity");
      return run_embed(eg, dims, embed_out, embed_eigs);
    }
    if (cluster->parsed()) {
      if (cg.plan.empty() == cg.affinity.empty()) throw UsageError("give exactly one of --plan, --affinity");
      return run_cluster(cg, k, cseed, labels_out, truth);
    }
    if (sp->parsed()) return experiment_spiral(eo);
    if (gm->parsed()) return experiment_gmm(eo);
    if (sph->parsed()) return experiment_sphere(eo);
    if (tor->parsed()) return experiment_torus(eo);
    if (bn->parsed()) return experiment_bench_newton(eo);
    if (ba->parsed()) return experiment_bench_activeset(eo);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kUsage;
}
