#include "qrot/qot.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace qrot;
using testutil::case_seed;
using testutil::kPropertyCases;

namespace {

Matrix const_offdiag(Index n, double v) {
  Matrix m = Matrix::Constant(n, n, v);
  m.diagonal().setZero();
  return m;
}

SolverConfig config(double eps) {
  SolverConfig cfg;
  cfg.epsilon = eps;
  return cfg;
}

double frob(const Matrix& a, const Matrix& b) { return (a - b).norm(); }

CostMatrix five_point_cost() {
  return pairwise_cost(testutil::gaussian_points(5, 2, testutil::case_seed(100, 0)));
}

void expect_valid_plan(const SparsePlan& p, double tol) {
  ASSERT_TRUE(p.feasible());
  EXPECT_LE(p.max_row_violation(), tol);
  for (const auto& e : p.entries()) {
    EXPECT_LT(e.i, e.j);
    EXPECT_GT(e.value, 0.0);
  }
}

}  // namespace

TEST(DualObjective, Examples) {
  const Vector ones = Vector::Ones(2);
  EXPECT_DOUBLE_EQ(dual_objective(DualPotential{ones}, CostMatrix(const_offdiag(2, 2)), 1.0), -2.0);
  EXPECT_DOUBLE_EQ(dual_objective(DualPotential{ones}, CostMatrix(const_offdiag(2, 0)), 1.0), 0.0);
  std::mt19937_64 rng(7);
  EXPECT_EQ(dual_objective(DualPotential{Vector::Zero(6)}, testutil::random_cost(6, rng), 0.3), 0.0);
}

TEST(DualObjective, Errors) {
  const CostMatrix c(const_offdiag(2, 1));
  EXPECT_THROW(dual_objective(DualPotential{Vector::Ones(3)}, c, 1.0), std::invalid_argument);
  EXPECT_THROW(dual_objective(DualPotential{Vector::Ones(2)}, c, 0.0), std::invalid_argument);
  Vector bad = Vector::Ones(2);
  bad[0] = std::nan("");
  EXPECT_THROW(dual_objective(DualPotential{bad}, c, 1.0), std::invalid_argument);
}

TEST(PlanFromPotential, Examples) {
  SparsePlan p = plan_from_potential(DualPotential{Vector::Ones(2)}, CostMatrix(const_offdiag(2, 1)), 1.0, 1e-8);
  ASSERT_EQ(p.entries().size(), 1u);
  EXPECT_DOUBLE_EQ(p.entries()[0].value, 1.0);
  EXPECT_TRUE(p.feasible());

  SparsePlan q = plan_from_potential(DualPotential{Vector::Ones(2)}, CostMatrix(const_offdiag(2, 5)), 1.0, 1e-8);
  EXPECT_TRUE(q.entries().empty());
  EXPECT_FALSE(q.feasible());

  const double c = 2.0, eps = 0.7;
  SparsePlan r = plan_from_potential(DualPotential{Vector::Constant(3, (c + eps / 2) / 2)},
                                     CostMatrix(const_offdiag(3, c)), eps, 1e-12);
  ASSERT_EQ(r.entries().size(), 3u);
  for (const auto& e : r.entries()) EXPECT_NEAR(e.value, 0.5, 1e-15);
  EXPECT_TRUE(r.feasible());
}

TEST(PlanFromPotential, FlagUnsetWithoutTolerance) {
  SparsePlan p = plan_from_potential(DualPotential{Vector::Ones(2)}, CostMatrix(const_offdiag(2, 1)), 1.0);
  EXPECT_FALSE(p.feasible());
}

TEST(NewtonSystem, TwoByTwo) {
  const double delta = 1e-3;
  const SupportMask s(2, {{0, 1}});
  const CgResult r = newton_system_solve(s, Vector::Ones(2), delta, 1e-14, 100);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.x[0], 1.0 / (2.0 + delta), 1e-12);
  EXPECT_NEAR(r.x[1], 1.0 / (2.0 + delta), 1e-12);
}

TEST(NewtonSystem, EmptyPatternIsScaledIdentity) {
  Vector rhs(3);
  rhs << 1, -2, 3;
  const CgResult r = newton_system_solve(SupportMask(3), rhs, 0.5, 1e-14, 10);
  EXPECT_LE((r.x - rhs / 0.5).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(NewtonSystem, MatchesDenseFactorisation) {
  for (int k = 0; k < 20; ++k) {
    std::mt19937_64 rng(case_seed(10, k));
    const Index n = 4 + k % 5;
    std::bernoulli_distribution coin(0.5);
    std::vector<std::pair<Index, Index>> pairs;
    for (Index i = 0; i < n; ++i) {
      for (Index j = i + 1; j < n; ++j) {
        if (coin(rng)) pairs.emplace_back(i, j);
      }
    }
    const SupportMask s(n, pairs);
    const Vector rhs = testutil::gaussian_points(n, 1, rng).col(0);
    const double delta = 1e-5;
    Matrix a = Matrix::Zero(n, n);
    for (const auto& [i, j] : pairs) a(i, j) = a(j, i) = 1.0;
    a.diagonal() = a.rowwise().sum().array() + delta;
    const Vector direct = a.ldlt().solve(rhs);
    const CgResult r = newton_system_solve(s, rhs, delta, 1e-14, 1000);
    EXPECT_LE((r.x - direct).cwiseAbs().maxCoeff(), 1e-10 * (1 + direct.cwiseAbs().maxCoeff())) << "case " << k;
    EXPECT_LE((a * r.x - rhs).norm(), 1e-10 * rhs.norm());
  }
}

TEST(NewtonSystem, ReportsIterationCap) {
  const SupportMask s(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}});
  Vector rhs(6);
  rhs << 1, 0, 0, 0, 0, -1;
  const CgResult r = newton_system_solve(s, rhs, 1e-5, 1e-14, 1);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 1);
}

TEST(NewtonSystem, Errors) {
  EXPECT_THROW(newton_system_solve(SupportMask(2), Vector::Ones(3), 1e-5, 1e-10, 10), std::invalid_argument);
  EXPECT_THROW(newton_system_solve(SupportMask(2), Vector::Ones(2), 0.0, 1e-10, 10), std::invalid_argument);
}

TEST(SolveDense, TwoPointsSwap) {
  const auto r = solve_dense(CostMatrix(const_offdiag(2, 3.7)), config(0.2));
  expect_valid_plan(r.plan, 1e-8);
  EXPECT_LE(frob(r.plan.to_dense(), const_offdiag(2, 1.0)), 1e-10);
}

TEST(SolveDense, ThreePointsHalf) {
  std::mt19937_64 rng(5);
  const auto r = solve_dense(testutil::random_cost(3, rng, 10.0), config(0.05));
  expect_valid_plan(r.plan, 1e-8);
  EXPECT_LE(frob(r.plan.to_dense(), const_offdiag(3, 0.5)), 1e-8);
}

TEST(SolveDense, FivePointOracle) {
  const CostMatrix c = five_point_cost();
  const auto r = solve_dense(c, config(1.0));
  expect_valid_plan(r.plan, 1e-8);
  EXPECT_LE(frob(r.plan.to_dense(), oracle::qot_plan(c.entries(), 1.0)), 1e-6);
}

TEST(SolveDense, OracleInstances) {
  for (int k = 0; k < 20; ++k) {
    std::mt19937_64 rng(case_seed(11, k));
    const Index n = 4 + k % 5;
    const CostMatrix c = pairwise_cost(testutil::gaussian_points(n, 3, rng));
    const double eps = std::array{0.1, 1.0, 10.0}[static_cast<std::size_t>(k % 3)] * mean_offdiag(c);
    const auto r = solve_dense(c, config(eps));
    EXPECT_LE(frob(r.plan.to_dense(), oracle::qot_plan(c.entries(), eps)), 1e-6) << "case " << k;
  }
}

TEST(SolveDense, StartsFromOnesAndHonoursWarmStart) {
  const CostMatrix c = five_point_cost();
  const auto cold = solve_dense(c, config(1.0));
  EXPECT_DOUBLE_EQ(cold.diagnostics.objective_history.front(),
                   dual_objective(DualPotential{Vector::Ones(5)}, c, 1.0));
  const auto warm = solve_dense(c, config(1.0), cold.potential);
  EXPECT_LE(warm.diagnostics.newton_iters, 1);
  EXPECT_LE(frob(warm.plan.to_dense(), cold.plan.to_dense()), 1e-9);
}

TEST(SolveDense, Errors) {
  EXPECT_THROW(solve_dense(CostMatrix(Matrix::Zero(1, 1)), config(1.0)), std::invalid_argument);
  EXPECT_THROW(solve_dense(five_point_cost(), config(-1.0)), std::invalid_argument);
  EXPECT_THROW(solve_dense(five_point_cost(), config(1.0), DualPotential{Vector::Ones(4)}), std::invalid_argument);
}

TEST(SolveDense, IterationCapCarriesBestIterate) {
  SolverConfig cfg = config(1e-3);
  cfg.max_newton_iters = 1;
  const CostMatrix c = pairwise_cost(testutil::gaussian_points(30, 3, 3));
  try {
    solve_dense(c, cfg);
    FAIL() << "expected SolveError";
  } catch (const SolveError& e) {
    EXPECT_FALSE(e.best().diagnostics.converged);
    EXPECT_EQ(e.best().potential.size(), 30);
    EXPECT_FALSE(e.best().plan.feasible());
  }
}

TEST(FrobeniusProject, FixedPoint) {
  const Matrix m = const_offdiag(3, 0.5);
  EXPECT_LE(frob(frobenius_project(m).plan.to_dense(), m), 1e-10);
}

TEST(FrobeniusProject, TwoByTwo) {
  Matrix m(2, 2);
  m << 4, -3, -3, 1;
  EXPECT_LE(frob(frobenius_project(m).plan.to_dense(), const_offdiag(2, 1.0)), 1e-10);
}

TEST(FrobeniusProject, GaussianKernelOracle) {
  const CostMatrix c = five_point_cost();
  const Matrix m = (-c.entries()).array().exp().matrix();
  const auto r = frobenius_project(m);
  expect_valid_plan(r.plan, 1e-8);
  EXPECT_LE(frob(r.plan.to_dense(), oracle::dykstra_projection(m)), 1e-6);
}

TEST(FrobeniusProject, Errors) {
  Matrix m(2, 2);
  m << 0, 1, 2, 0;
  EXPECT_THROW(frobenius_project(m), std::invalid_argument);
  EXPECT_THROW(frobenius_project(Matrix::Zero(2, 3)), std::invalid_argument);
}

TEST(KnnSupport, Examples) {
  const CostMatrix line = pairwise_cost(std::vector<std::vector<double>>{{0}, {1}, {2}});
  const SupportMask s = knn_support(line, 1);
  EXPECT_EQ(s, SupportMask(3, {{0, 1}, {1, 2}}));
  const CostMatrix c = five_point_cost();
  EXPECT_EQ(knn_support(c, 4).size(), 10u);
  EXPECT_THROW(knn_support(c, 0), std::invalid_argument);
  EXPECT_THROW(knn_support(c, 5), std::invalid_argument);
}

TEST(KnnSupport, TieGoesToSmallerIndex) {
  // 1 is equidistant from 0 and 2; its single neighbour must be 0, and 2
  // keeps the edge to 1 only through its own list, so 1-2 survives.
  const CostMatrix line = pairwise_cost(std::vector<std::vector<double>>{{0}, {1}, {2}, {10}});
  const SupportMask s = knn_support(line, 1);
  EXPECT_TRUE(s.contains(0, 1));
  EXPECT_TRUE(s.contains(1, 2));
  EXPECT_TRUE(s.contains(2, 3));
  EXPECT_EQ(s.size(), 3u);
}

TEST(RandomPermutations, Examples) {
  const SupportMask s(6, {{0, 1}});
  EXPECT_EQ(add_random_permutations(s, 0, 1), s);
  const SupportMask p = add_random_permutations(s, 1, 42);
  EXPECT_TRUE(p.rows_nonempty());
  EXPECT_TRUE(p.contains(0, 1));
  EXPECT_EQ(p, add_random_permutations(s, 1, 42));
  EXPECT_THROW(add_random_permutations(s, -1, 1), std::invalid_argument);
}

TEST(SolveActiveSet, FullSupportReducesToDense) {
  const CostMatrix c = five_point_cost();
  const auto dense = solve_dense(c, config(1.0));
  const auto active = solve_active_set(c, config(1.0), knn_support(c, 4));
  EXPECT_EQ(active.diagnostics.outer_iters, 1);
  EXPECT_LE(frob(active.plan.to_dense(), dense.plan.to_dense()), 1e-12);
}

TEST(SolveActiveSet, FiftyPointKnnInit) {
  const CostMatrix c = pairwise_cost(testutil::gaussian_points(50, 10, case_seed(12, 0)));
  const SupportMask s0 = add_random_permutations(knn_support(c, 10), 2, 1);
  const auto dense = solve_dense(c, config(1.0));
  const auto active = solve_active_set(c, config(1.0), s0);
  expect_valid_plan(active.plan, 1e-8);
  EXPECT_LE(frob(active.plan.to_dense(), dense.plan.to_dense()), 1e-6);
}

TEST(SolveActiveSet, PathGrowsToTriangle) {
  const CostMatrix line = pairwise_cost(std::vector<std::vector<double>>{{0}, {1}, {2}});
  const auto r = solve_active_set(line, config(0.1), knn_support(line, 1));
  EXPECT_GE(r.diagnostics.outer_iters, 2);
  EXPECT_LE(frob(r.plan.to_dense(), const_offdiag(3, 0.5)), 1e-8);
}

TEST(SolveActiveSet, Errors) {
  const CostMatrix c = five_point_cost();
  EXPECT_THROW(solve_active_set(c, config(1.0), SupportMask(5, {{0, 1}})), std::invalid_argument);
  EXPECT_THROW(solve_active_set(c, config(1.0), SupportMask(4, {{0, 1}, {2, 3}})), std::invalid_argument);
}

TEST(SolveActiveSet, InfeasibleSupportGrows) {
  // A star has no hollow bistochastic completion, so the first restricted
  // solve fails and the support must grow before a plan exists.
  const CostMatrix c = five_point_cost();
  const SupportMask star(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
  const auto r = solve_active_set(c, config(1.0), star);
  EXPECT_GE(r.diagnostics.outer_iters, 2);
  EXPECT_LE(frob(r.plan.to_dense(), solve_dense(c, config(1.0)).plan.to_dense()), 1e-6);

  SolverConfig capped = config(1.0);
  capped.max_outer_iters = 1;
  try {
    solve_active_set(c, capped, star);
    FAIL() << "expected SolveError";
  } catch (const SolveError& e) {
    EXPECT_FALSE(e.best().diagnostics.converged);
    EXPECT_EQ(e.best().diagnostics.outer_iters, 1);
  }
}

// ---------------------------------------------------------------- properties

namespace {

struct Instance {
  CostMatrix c;
  double eps;
};

Instance random_instance(std::uint64_t suite, int k, Index lo = 4, Index hi = 40) {
  std::mt19937_64 rng(case_seed(suite, k));
  const Index n = std::uniform_int_distribution<Index>(lo, hi)(rng);
  const Index d = std::uniform_int_distribution<Index>(1, 5)(rng);
  const CostMatrix c = pairwise_cost(testutil::gaussian_points(n, d, rng));
  const double scale = std::pow(10.0, std::uniform_real_distribution<double>(-1.0, 1.0)(rng));
  return {c, scale * mean_offdiag(c)};
}

}  // namespace

TEST(QotProperties, FeasibleFlagImpliesInvariants) {
  for (int k = 0; k < kPropertyCases; ++k) {
    const auto [c, eps] = random_instance(20, k);
    const auto r = solve_dense(c, config(eps));
    ASSERT_TRUE(r.plan.feasible()) << "case " << k;
    ASSERT_LE(r.plan.max_row_violation(), 1e-8);
    ASSERT_LE(r.diagnostics.support_size, static_cast<std::size_t>(c.n() * (c.n() - 1) / 2));
    const Matrix p = r.plan.to_dense();
    ASSERT_EQ(p, p.transpose());
    ASSERT_EQ(p.diagonal().cwiseAbs().sum(), 0.0);
  }
}

TEST(QotProperties, RankOneInvariance) {
  for (int k = 0; k < kPropertyCases; ++k) {
    const auto [c, eps] = random_instance(21, k);
    std::mt19937_64 rng(case_seed(121, k));
    std::uniform_real_distribution<double> u(0.0, 2.0 * mean_offdiag(c));
    Vector eta(c.n());
    for (Index i = 0; i < c.n(); ++i) eta[i] = u(rng);
    const auto a = solve_dense(c, config(eps));
    const auto b = solve_dense(rank_one_shift(c, eta), config(eps));
    ASSERT_LE(frob(a.plan.to_dense(), b.plan.to_dense()), 10 * 1e-8) << "case " << k;
    // Potentials are unique only when every component of the support graph
    // is non-bipartite; otherwise u' - eta must still be dual optimal for C.
    const double slack = 10 * 1e-8 * (1.0 + eps);
    const Vector shifted = b.potential.values - eta;
    if ((shifted - a.potential.values).cwiseAbs().maxCoeff() > slack) {
      const double phi = dual_objective(a.potential, c, eps);
      ASSERT_NEAR(dual_objective(DualPotential{shifted}, c, eps), phi, slack * (1.0 + std::abs(phi))) << "case " << k;
      ASSERT_LE(frob(plan_from_potential(DualPotential{shifted}, c, eps).to_dense(), a.plan.to_dense()), 10 * 1e-8);
    }
  }
}

TEST(QotProperties, Contraction) {
  for (int k = 0; k < kPropertyCases; ++k) {
    const auto [c, eps] = random_instance(22, k);
    std::mt19937_64 rng(case_seed(122, k));
    const Index n = c.n();
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double size = std::pow(10.0, std::uniform_real_distribution<double>(-3.0, 0.0)(rng)) * mean_offdiag(c);
    Matrix e = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = i + 1; j < n; ++j) e(i, j) = e(j, i) = std::max(size * u(rng), -c(i, j));
    }
    const auto a = solve_dense(c, config(eps));
    const auto b = solve_dense(CostMatrix(c.entries() + e), config(eps));
    ASSERT_LE(frob(a.plan.to_dense(), b.plan.to_dense()), e.norm() / eps + 10 * 1e-8) << "case " << k;
  }
}

TEST(QotProperties, MonotoneDual) {
  for (int k = 0; k < kPropertyCases; ++k) {
    const auto [c, eps] = random_instance(23, k);
    const auto r = solve_dense(c, config(eps));
    const auto& h = r.diagnostics.objective_history;
    for (std::size_t t = 1; t < h.size(); ++t) {
      ASSERT_LE(h[t], h[t - 1] + 1e-12 * (1.0 + std::abs(h[t - 1]))) << "case " << k << " step " << t;
    }
  }
}

TEST(QotProperties, ComplementarySlackness) {
  for (int k = 0; k < kPropertyCases; ++k) {
    const auto [c, eps] = random_instance(24, k);
    const auto r = solve_dense(c, config(eps));
    const Vector& u = r.potential.values;
    const Matrix p = r.plan.to_dense();
    for (Index i = 0; i < c.n(); ++i) {
      for (Index j = 0; j < c.n(); ++j) {
        if (i == j) continue;
        const double s = u[i] + u[j] - c(i, j);
        if (p(i, j) > 0.0) {
          ASSERT_GT(s, 0.0);
        } else {
          ASSERT_LE(s, 1e-8 * eps);
        }
      }
    }
  }
}

TEST(QotProperties, OracleEquivalence) {
  for (int k = 0; k < 20; ++k) {
    const auto [c, eps] = random_instance(25, k, 2, 8);
    const auto r = solve_dense(c, config(eps));
    const Matrix expected = c.n() >= 4 ? oracle::qot_plan(c.entries(), eps)
                                       : const_offdiag(c.n(), 1.0 / static_cast<double>(c.n() - 1));
    ASSERT_LE(frob(r.plan.to_dense(), expected), 1e-6) << "case " << k;
  }
}

TEST(QotProperties, ActiveSetMatchesDense) {
  for (int k = 0; k < kPropertyCases; ++k) {
    const auto [c, eps] = random_instance(26, k, 4, k < 5 ? 500 : 80);
    std::mt19937_64 rng(case_seed(126, k));
    const Index kk = std::uniform_int_distribution<Index>(1, std::min<Index>(10, c.n() - 1))(rng);
    const SupportMask s0 = add_random_permutations(knn_support(c, kk), 2, rng());
    const auto dense = solve_dense(c, config(eps));
    const auto active = solve_active_set(c, config(eps), s0);
    ASSERT_TRUE(active.plan.feasible());
    ASSERT_LE(frob(active.plan.to_dense(), dense.plan.to_dense()), 1e-6) << "case " << k;
  }
}

TEST(QotProperties, PermutationsCoverEveryRow) {
  for (int k = 0; k < kPropertyCases; ++k) {
    std::mt19937_64 rng(case_seed(27, k));
    const Index n = std::uniform_int_distribution<Index>(2, 60)(rng);
    const SupportMask s = add_random_permutations(SupportMask(n), 1, rng());
    ASSERT_TRUE(s.rows_nonempty());
    for (Index i = 0; i < n; ++i) ASSERT_FALSE(s.contains(i, i));
  }
}
