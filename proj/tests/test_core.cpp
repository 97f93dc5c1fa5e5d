#include "qrot/core.hpp"
#include "test_util.hpp"

using namespace qrot;
using testutil::case_seed;
using testutil::kPropertyCases;

namespace {

Matrix m2(double a) {
  Matrix m(2, 2);
  m << 0, a, a, 0;
  return m;
}

}  // namespace

TEST(PairwiseCost, PlainSquaredDistance) {
  const auto c = pairwise_cost(std::vector<std::vector<double>>{{0, 0}, {0, 2}}, false);
  EXPECT_EQ(c.entries(), m2(4));
  EXPECT_FALSE(c.half_factor());
}

TEST(PairwiseCost, HalfFactor) {
  const auto c = pairwise_cost(std::vector<std::vector<double>>{{0, 0}, {0, 2}}, true);
  EXPECT_EQ(c.entries(), m2(2));
  EXPECT_TRUE(c.half_factor());
}

TEST(PairwiseCost, SinglePoint) {
  const auto c = pairwise_cost(std::vector<std::vector<double>>{{7}}, false);
  ASSERT_EQ(c.n(), 1);
  EXPECT_EQ(c(0, 0), 0.0);
}

TEST(PairwiseCost, DimensionMismatchThrows) {
  EXPECT_THROW(pairwise_cost(std::vector<std::vector<double>>{{0, 0}, {1}}, false), std::invalid_argument);
}

TEST(PairwiseCost, NoPointsThrows) {
  EXPECT_THROW(pairwise_cost(std::vector<std::vector<double>>{}, false), std::invalid_argument);
}

TEST(CostMatrix, RejectsAsymmetric) {
  Matrix m(2, 2);
  m << 0, 1, 2, 0;
  EXPECT_THROW(CostMatrix{m}, std::invalid_argument);
}

TEST(CostMatrix, RejectsNonzeroDiagonal) {
  Matrix m(2, 2);
  m << 1, 1, 1, 0;
  EXPECT_THROW(CostMatrix{m}, std::invalid_argument);
}

TEST(CostMatrix, RejectsNegative) { EXPECT_THROW(CostMatrix{m2(-1)}, std::invalid_argument); }

TEST(CostMatrix, RejectsNonSquare) { EXPECT_THROW(CostMatrix{Matrix::Zero(2, 3)}, std::invalid_argument); }

TEST(MeanOffdiag, Examples) {
  EXPECT_DOUBLE_EQ(mean_offdiag(CostMatrix(m2(4))), 2.0);
  EXPECT_DOUBLE_EQ(mean_offdiag(CostMatrix(Matrix::Zero(1, 1))), 0.0);
  Matrix m = Matrix::Constant(3, 3, 3.0);
  m.diagonal().setZero();
  EXPECT_DOUBLE_EQ(mean_offdiag(CostMatrix(m)), 2.0);
}

TEST(NormalizeMean, Examples) {
  const auto [c, scale] = normalize_mean(CostMatrix(m2(4)));
  EXPECT_EQ(c.entries(), m2(2));
  EXPECT_DOUBLE_EQ(scale, 2.0);
  const auto [c2, scale2] = normalize_mean(CostMatrix(m2(2)));
  EXPECT_EQ(c2.entries(), m2(2));
  EXPECT_DOUBLE_EQ(scale2, 1.0);
}

TEST(NormalizeMean, AllZeroThrows) {
  EXPECT_THROW(normalize_mean(CostMatrix(Matrix::Zero(1, 1))), std::invalid_argument);
}

TEST(RankOneShift, Examples) {
  Vector eta(2);
  eta << 1, 2;
  EXPECT_EQ(rank_one_shift(CostMatrix(m2(1)), eta).entries(), m2(4));
  EXPECT_EQ(rank_one_shift(CostMatrix(m2(1)), Vector::Zero(2)).entries(), m2(1));
  eta << -1, 0;
  EXPECT_EQ(rank_one_shift(CostMatrix(m2(1)), eta).entries(), m2(0));
}

TEST(RankOneShift, NegativeResultThrows) {
  Vector eta(2);
  eta << -1, -1;
  EXPECT_THROW(rank_one_shift(CostMatrix(m2(1)), eta), std::invalid_argument);
}

TEST(RankOneShift, LengthMismatchThrows) {
  EXPECT_THROW(rank_one_shift(CostMatrix(m2(1)), Vector::Zero(3)), std::invalid_argument);
}

TEST(SolverConfig, Validation) {
  SolverConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.epsilon = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.theta = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.kappa = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.delta = -1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  EXPECT_EQ(cfg.cg_iteration_cap(7), 70);
}

TEST(SparsePlan, RejectsBadEntries) {
  EXPECT_THROW(SparsePlan(3, {{1, 0, 1.0}}), std::invalid_argument);
  EXPECT_THROW(SparsePlan(3, {{0, 0, 1.0}}), std::invalid_argument);
  EXPECT_THROW(SparsePlan(3, {{0, 1, 0.0}}), std::invalid_argument);
  EXPECT_THROW(SparsePlan(3, {{0, 2, 1.0}, {0, 1, 1.0}}), std::invalid_argument);
  EXPECT_THROW(SparsePlan(3, {{0, 3, 1.0}}), std::invalid_argument);
}

TEST(SparsePlan, FeasibleFlagOnlyAfterCheck) {
  SparsePlan p(2, {{0, 1, 1.0}});
  EXPECT_FALSE(p.feasible());
  EXPECT_TRUE(p.mark_feasible(1e-12));
  EXPECT_TRUE(p.feasible());
  SparsePlan q(3, {{0, 1, 1.0}});
  EXPECT_FALSE(q.mark_feasible(1e-3));
  const Matrix d = p.to_dense();
  EXPECT_EQ(d, m2(1));
}

TEST(SupportMask, SymmetricHollowUnion) {
  EXPECT_THROW(SupportMask(4, {{3, 3}}), std::invalid_argument);
  EXPECT_THROW(SupportMask(4, {{0, 4}}), std::invalid_argument);
  SupportMask s(4, {{0, 1}, {2, 1}, {1, 0}});
  EXPECT_TRUE(s.contains(1, 0));
  EXPECT_TRUE(s.contains(1, 2));
  EXPECT_FALSE(s.contains(3, 3));
  EXPECT_EQ(s.size(), 2u);
  EXPECT_FALSE(s.rows_nonempty());
  const SupportMask t = s.unite(SupportMask(4, {{3, 0}}));
  EXPECT_TRUE(t.rows_nonempty());
  EXPECT_EQ(t.size(), 3u);
}

// ---------------------------------------------------------------- properties

TEST(CoreProperties, PairwiseCostSatisfiesInvariants) {
  for (int k = 0; k < kPropertyCases; ++k) {
    std::mt19937_64 rng(case_seed(1, k));
    const Index n = std::uniform_int_distribution<Index>(1, 30)(rng);
    const Index d = std::uniform_int_distribution<Index>(1, 6)(rng);
    const bool half = k % 2 == 0;
    const Matrix x = testutil::gaussian_points(n, d, rng) * 10.0;
    const CostMatrix c = pairwise_cost(x, half);
    for (Index i = 0; i < n; ++i) {
      ASSERT_EQ(c(i, i), 0.0);
      for (Index j = 0; j < n; ++j) {
        ASSERT_EQ(c(i, j), c(j, i));
        ASSERT_GE(c(i, j), 0.0);
        ASSERT_NEAR(c(i, j), (half ? 0.5 : 1.0) * (x.row(i) - x.row(j)).squaredNorm(), 1e-10 * (1 + c(i, j)));
      }
    }
  }
}

TEST(CoreProperties, NormalizeMeanIdempotent) {
  for (int k = 0; k < kPropertyCases; ++k) {
    std::mt19937_64 rng(case_seed(2, k));
    const Index n = std::uniform_int_distribution<Index>(2, 25)(rng);
    const CostMatrix c = testutil::random_cost(n, rng, 100.0);
    const auto once = normalize_mean(c).first;
    const auto [twice, scale] = normalize_mean(once);
    ASSERT_LE(testutil::max_abs_diff(once.entries(), twice.entries()), 1e-12);
    ASSERT_NEAR(scale, 1.0, 1e-12);
    ASSERT_NEAR(once.entries().sum() / static_cast<double>(n * n), 1.0, 1e-12);
  }
}

TEST(CoreProperties, RankOneShiftAdditive) {
  for (int k = 0; k < kPropertyCases; ++k) {
    std::mt19937_64 rng(case_seed(3, k));
    const Index n = std::uniform_int_distribution<Index>(2, 25)(rng);
    const CostMatrix c = testutil::random_cost(n, rng);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    Vector a(n), b(n);
    for (Index i = 0; i < n; ++i) {
      a[i] = u(rng);
      b[i] = u(rng);
    }
    const CostMatrix ab = rank_one_shift(rank_one_shift(c, a), b);
    const CostMatrix sum = rank_one_shift(c, a + b);
    ASSERT_LE(testutil::max_abs_diff(ab.entries(), sum.entries()), 1e-12);
  }
}
