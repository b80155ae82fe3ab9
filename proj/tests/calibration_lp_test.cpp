#include "excalibr/bvn_policy.hpp"
#include "excalibr/calibration_lp.hpp"
#include "excalibr/metrics.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

namespace excalibr {
namespace {

using testing::exhaustive_best;
using testing::random_problem;

RankingProblem three_items(double lambda) {
  RankingProblem p;
  p.scores = Vector(3);
  p.scores << 3.0, 2.0, 1.0;
  p.position_weights = Vector(3);
  p.position_weights << 0.5, 0.3, 0.2;
  p.categories = Matrix(3, 2);
  p.categories << 1.0, 0.0, 0.0, 1.0, 0.5, 0.5;
  Vector q(2);
  q << 0.6, 0.4;
  p.target = CategoryDistribution(q);
  p.lambda = lambda;
  return p;
}

TEST(SolveFull, PureRelevanceSortsByScore) {
  const auto sol = solve_full(three_items(0.0));
  EXPECT_NEAR(sol.objective, 2.3, 1e-9);
  EXPECT_NEAR((sol.matrix.values() - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 0.0, 1e-9);
  EXPECT_NEAR(sol.solver_objective, sol.objective, 1e-9);
}

TEST(SolveFull, AchievableTargetHasZeroDeviation) {
  RankingProblem p = three_items(1.0);
  // Order (2, 0, 1) induces 0.5*[.5,.5] + 0.3*[1,0] + 0.2*[0,1] = [0.55, 0.45].
  Vector q(2);
  q << 0.55, 0.45;
  p.target = CategoryDistribution(q);
  const auto sol = solve_full(p);
  EXPECT_NEAR(sol.objective, 0.0, 1e-9);
  EXPECT_NEAR(sol.epsilon.sum(), 0.0, 1e-9);
}

TEST(SolveFull, DominatesEveryPermutation) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const RankingProblem p = random_problem(rng, 5, 5, 3, 0.5);
    const auto sol = solve_full(p);
    EXPECT_GE(sol.objective, exhaustive_best(p) - 1e-6) << "trial " << trial;
  }
}

TEST(SolveReduced, PureRelevanceTakesTopK) {
  RankingProblem p;
  p.scores = Vector(4);
  p.scores << 4.0, 3.0, 2.0, 1.0;
  p.position_weights = make_position_weights(PositionWeightKind::log, 2);
  p.categories = Matrix::Constant(4, 1, 1.0);
  p.target = CategoryDistribution::uniform(1);
  const auto sol = solve_reduced(p);
  const Matrix& v = sol.matrix.values();
  EXPECT_NEAR(v(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(v(1, 1), 1.0, 1e-12);
  EXPECT_NEAR(v.bottomRows(2).cwiseAbs().maxCoeff(), 0.0, 1e-12);
}

TEST(SolveReduced, AgreesWithFullForm) {
  Rng rng(17);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = 2 + rng.below(12);
    const std::size_t k = 1 + rng.below(n);
    const std::size_t r = 1 + rng.below(5);
    const double lambda = static_cast<double>(rng.below(5)) / 4.0;
    const RankingProblem p = random_problem(rng, n, k, r, lambda);
    const auto red = solve_reduced(p);
    const auto full = solve_full(p);
    EXPECT_NEAR(red.objective, full.objective, 1e-6) << "n=" << n << " k=" << k << " lambda=" << lambda;
  }
}

TEST(SolveReduced, RelaxationBoundsEveryOrderedSelection) {
  Rng rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + rng.below(5);
    const std::size_t k = 1 + rng.below(std::min<std::size_t>(n, 4));
    const double lambda = static_cast<double>(rng.below(5)) / 4.0;
    const RankingProblem p = random_problem(rng, n, k, 1 + rng.below(3), lambda);
    const auto sol = solve_reduced(p);
    const double best = exhaustive_best(p);
    EXPECT_GE(sol.objective, best - 1e-6);
    if (lambda == 0.0) EXPECT_NEAR(sol.objective, best, 1e-6);
  }
}

TEST(SolveReduced, ReportedObjectiveMatchesSolver) {
  Rng rng(29);
  for (int trial = 0; trial < 10; ++trial) {
    const RankingProblem p = random_problem(rng, 12, 6, 4, 0.3);
    const auto sol = solve_reduced(p);
    EXPECT_NEAR(sol.objective, sol.solver_objective, 1e-6);
    const auto induced = induced_distribution(p.categories, sol.matrix, p.position_weights);
    EXPECT_NEAR((induced.probs() - p.target.probs()).cwiseAbs().sum(), sol.epsilon.sum(), 1e-9);
  }
}

TEST(SolveReduced, PureRelevanceUsesOnlyTopKRowsAtScale) {
  Rng rng(31);
  const RankingProblem p = random_problem(rng, 150, 100, 20, 0.0);
  const auto sol = solve_reduced(p);
  EXPECT_EQ(drop_zero_rows(sol.matrix).rows(), 100u);
}

TEST(SolveReduced, RejectsInvalidProblem) {
  RankingProblem p = three_items(0.5);
  p.lambda = -0.1;
  EXPECT_THROW(solve_reduced(p), InvalidArgument);
}

TEST(LpDimensions, CountsVariablesAndConstraints) {
  EXPECT_EQ(full_lp_dimensions(150, 20).variables, 150u * 150u + 20u);
  EXPECT_EQ(reduced_lp_dimensions(150, 100, 20).variables, 150u * 100u + 20u);
  EXPECT_EQ(reduced_lp_dimensions(150, 100, 20).constraints, 2u * 20u + 150u * 100u + 150u + 100u);
  EXPECT_EQ(full_lp_dimensions(150, 20).constraints, 2u * 20u + 150u * 150u + 2u * 150u);
}

TEST(Sanitize, IdentityOnExactInput) {
  Matrix m(3, 2);
  m << 0.5, 0.25, 0.5, 0.25, 0.0, 0.5;
  EXPECT_EQ(sanitize(m, 1e-8).values(), m);
}

TEST(Sanitize, ClampsTinyNegativesAndRenormalizes) {
  Matrix m(3, 1);
  m << -1e-10, 0.6, 0.4 + 1e-10;
  const auto s = sanitize(m, 1e-8);
  EXPECT_EQ(s.values()(0, 0), 0.0);
  EXPECT_NEAR(s.values().col(0).sum(), 1.0, 1e-15);
}

TEST(Sanitize, RejectsLargeViolations) {
  Matrix m(2, 1);
  m << -1e-3, 1.0 + 1e-3;
  EXPECT_THROW(sanitize(m, 1e-8), CorruptSolution);
  Matrix c(2, 1);
  c << 0.5, 0.4;
  EXPECT_THROW(sanitize(c, 1e-8), CorruptSolution);
}

}  // namespace
}  // namespace excalibr
