#include "excalibr/harness.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <sstream>

namespace excalibr {
namespace {

std::string fixture(const char* name) { return std::string(EXCALIBR_TEST_DATA) + "/" + name; }

TEST(RunPipeline, PureRelevanceSampleIsTopK) {
  Rng rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    const RankingProblem p = testing::random_problem(rng, 15, 6, 3, 0.0);
    const auto res = run_pipeline(p, Method::excalibr_reduced, 77);
    const auto sorted = score_sort(p);
    for (std::size_t j = 0; j < p.k(); ++j) EXPECT_EQ(res.sample.at(j), sorted.at(j));
    ASSERT_TRUE(res.lp_objective.has_value());
    EXPECT_GE(res.timings.total_ms, res.timings.lp_ms + res.timings.bvn_ms);
  }
}

TEST(RunPipeline, DeterministicMethodsGiveOneComponent) {
  Rng rng(22);
  const RankingProblem p = testing::random_problem(rng, 10, 4, 3, 0.5);
  for (Method m : {Method::greedy_weighted, Method::greedy_simple, Method::score_sort}) {
    const auto res = run_pipeline(p, m, 1);
    EXPECT_EQ(res.policy.size(), 1u);
    EXPECT_FALSE(res.lp_objective.has_value());
    EXPECT_EQ(res.sample, res.policy.components()[0].permutation);
  }
}

TEST(RunPipeline, PolicyExpectationMatchesLpObjective) {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const double lambda = static_cast<double>(rng.below(5)) / 4.0;
    const RankingProblem p = testing::random_problem(rng, 7, 1 + rng.below(7), 3, lambda);
    for (Method m : {Method::excalibr_reduced, Method::excalibr_full}) {
      const auto res = run_pipeline(p, m, 5);
      const PolicyMetrics pm = evaluate_policy(res.policy, p, {}, 0.01);
      EXPECT_NEAR((1.0 - lambda) * pm.relevance - lambda * pm.l1, *res.lp_objective, 1e-6);
    }
  }
}

TEST(RunPipeline, SameSeedSameSample) {
  Rng rng(24);
  const RankingProblem p = testing::random_problem(rng, 12, 6, 4, 0.6);
  EXPECT_EQ(run_pipeline(p, Method::excalibr_reduced, 9).sample, run_pipeline(p, Method::excalibr_reduced, 9).sample);
}

SweepConfig small_config() {
  SweepConfig c;
  c.methods = {Method::excalibr_reduced, Method::excalibr_full, Method::greedy_simple, Method::greedy_weighted,
               Method::score_sort};
  c.users = 6;
  c.n = 12;
  c.k = 6;
  c.r = 4;
  c.seed = 3;
  return c;
}

TEST(RunSweep, ZeroLambdaAllMethodsCoincide) {
  SweepConfig c = small_config();
  c.lambda_grid = {0.0};
  const auto points = run_sweep(c);
  ASSERT_EQ(points.size(), 5u);
  for (const auto& p : points) {
    EXPECT_NEAR(p.relevance.mean, points[0].relevance.mean, 1e-9) << to_string(p.method);
    EXPECT_NEAR(p.ndcg.mean, points[0].ndcg.mean, 1e-9) << to_string(p.method);
    EXPECT_NEAR(p.kl.mean, points[0].kl.mean, 1e-9) << to_string(p.method);
  }
}

TEST(RunSweep, CsvMatchesObjectiveAndIsMonotone) {
  SweepConfig c = small_config();
  c.methods = {Method::excalibr_reduced};
  const auto points = run_sweep(c);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    EXPECT_NEAR((1.0 - p.lambda) * p.relevance.mean - p.lambda * p.l1.mean, *p.lp_objective, 1e-6);
    EXPECT_GE(p.relevance.stderr_, 0.0);
    if (i > 0) {
      EXPECT_LE(p.l1.mean, points[i - 1].l1.mean + 1e-6);
      EXPECT_LE(p.relevance.mean, points[i - 1].relevance.mean + 1e-6);
    }
  }
}

TEST(RunSweep, CsvIsReproducibleAcrossThreadCounts) {
  SweepConfig c = small_config();
  c.lambda_grid = {0.0, 0.3, 0.9};
  std::ostringstream a, b;
  c.threads = 1;
  write_sweep_csv(a, run_sweep(c));
  c.threads = 4;
  write_sweep_csv(b, run_sweep(c));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')),
            "method,lambda,users,mean_relevance,se_relevance,mean_ndcg,se_ndcg,mean_mrr,se_mrr,"
            "mean_kl,se_kl,mean_l1,se_l1,mean_lp_objective");
}

TEST(RunSweep, InteractionDataPath) {
  SweepConfig c;
  c.category_source = CategorySource::genre;
  c.interactions = fixture("interactions.csv");
  c.catalog = fixture("movies.csv");
  c.scores = fixture("scores_all.csv");
  c.min_interactions = 1;
  c.test_users = 2;
  c.n = 4;
  c.k = 2;
  c.methods = {Method::excalibr_reduced, Method::greedy_weighted};
  c.lambda_grid = {0.0, 1.0};
  std::ostringstream warn;
  const auto pop = build_population(c, &warn);
  ASSERT_EQ(pop.size(), 2u);  // user 3 has a single positive
  for (const auto& u : pop) {
    EXPECT_TRUE(validate_problem(u.problem).empty());
    // Three positives: two go to history, the held-out one stays a candidate.
    EXPECT_EQ(u.problem.scores.size(), 4);
    EXPECT_EQ(u.relevant.size(), 1u) << "user " << u.user;
  }
  EXPECT_EQ(run_sweep(c, pop).size(), 4u);
}

TEST(Config, KeyValuesAndOverrides) {
  std::istringstream in("# comment\nmethod = greedy_weighted, excalibr\nlambda_grid = 0, 0.5 ,1\nn = 30\nk=10\n");
  SweepConfig c = apply_settings({}, read_key_values(in));
  EXPECT_EQ(c.methods, (std::vector<Method>{Method::greedy_weighted, Method::excalibr_reduced}));
  EXPECT_EQ(c.lambda_grid, (std::vector<double>{0.0, 0.5, 1.0}));
  EXPECT_EQ(c.n, 30u);
  c = apply_settings(c, {{"k", "12"}});
  EXPECT_EQ(c.k, 12u);
  EXPECT_THROW(apply_settings(c, {{"bogus", "1"}}), InvalidArgument);
  EXPECT_THROW(apply_settings(c, {{"n", "ten"}}), InvalidArgument);
  c.lambda_grid = {0.5, 0.2};
  EXPECT_FALSE(validate_config(c).empty());
  EXPECT_EQ(default_lambda_grid().size(), 21u);
}

TEST(Benchmark, ReportsPositiveTimesAndRatio) {
  SweepConfig c = small_config();
  c.users = 2;
  c.lambda_grid = {0.5};
  c.methods = {Method::excalibr_reduced, Method::excalibr_full, Method::greedy_weighted};
  const auto rep = benchmark(c);
  ASSERT_EQ(rep.methods.size(), 3u);
  for (const auto& m : rep.methods) EXPECT_GT(m.total_s.mean, 0.0);
  EXPECT_TRUE(rep.reduced_vs_full_drop.has_value());
  std::ostringstream out;
  write_benchmark(out, rep);
  EXPECT_NE(out.str().find("lambda in {0.5}"), std::string::npos);
}

}  // namespace
}  // namespace excalibr
