// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include "excalibr/excalibr.hpp"
#include "test_support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace excalibr;
using excalibr::testing::exhaustive_best;
using excalibr::testing::random_doubly_stochastic;
using excalibr::testing::random_partial;
using excalibr::testing::random_problem;

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Worst Lemma-3 violations seen anywhere in criteria 2-5.
struct InducedTracker {
  double worst_sum_error = 0.0;
  double min_entry = 0.0;
  std::size_t checked = 0;

  void add(const CategoryDistribution& p) {
    worst_sum_error = std::max(worst_sum_error, std::abs(p.probs().sum() - 1.0));
    min_entry = std::min(min_entry, p.probs().minCoeff());
    ++checked;
  }
};

InducedTracker induced;

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

Outcome criterion_1() {
  struct Row {
    PositionWeightKind kind;
    double top5, top10;
  };
  const Row rows[] = {{PositionWeightKind::log, 0.14, 0.216},
                      {PositionWeightKind::sqrt, 0.17, 0.27},
                      {PositionWeightKind::reciprocal, 0.44, 0.56}};
  Outcome o;
  for (const auto& r : rows) {
    const Vector w = make_position_weights(r.kind, 100);
    const double t5 = w.head(5).sum();
    const double t10 = w.head(10).sum();
    o.pass &= std::abs(t5 - r.top5) <= 0.01 && std::abs(t10 - r.top10) <= 0.01;
    o.detail += std::string(to_string(r.kind)) + " " + fmt("%.4f", t5) + "/" + fmt("%.4f", t10) + " ";
  }
  return o;
}

Outcome criterion_2() {
  Rng rng(mix_seed(2024, 2));
  const double lambdas[] = {0.0, 0.25, 0.5, 0.75, 1.0};
  double worst_gap = 0.0;       // max(oracle - lp), must stay <= 1e-6
  double worst_zero_gap = 0.0;  // |lp - oracle| at lambda = 0
  std::size_t solves = 0;
  for (int inst = 0; inst < 200; ++inst) {
    const std::size_t n = 1 + rng.below(7);
    const std::size_t k = 1 + rng.below(std::min<std::size_t>(n, 5));
    const std::size_t r = 1 + rng.below(4);
    RankingProblem p = random_problem(rng, n, k, r, 0.0);
    for (double lambda : lambdas) {
      p.lambda = lambda;
      const LpSolution sol = solve_reduced(p);
      ++solves;
      induced.add(induced_distribution(p.categories, sol.matrix, p.position_weights));
      const double best = exhaustive_best(p);
      worst_gap = std::max(worst_gap, best - sol.objective);
      if (lambda == 0.0) worst_zero_gap = std::max(worst_zero_gap, std::abs(sol.objective - best));
    }
  }
  Outcome o;
  o.pass = worst_gap <= 1e-6 && worst_zero_gap <= 1e-6;
  o.detail = std::to_string(solves) + " solves, max(oracle - lp) " + fmt("%.3g", worst_gap) +
             ", max |lp - oracle| at lambda 0 " + fmt("%.3g", worst_zero_gap);
  return o;
}

Outcome criterion_3() {
  Rng rng(mix_seed(2024, 3));
  double worst = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t n = 1 + rng.below(30);
    const std::size_t k = 1 + rng.below(std::min<std::size_t>(n, 10));
    const std::size_t r = 1 + rng.below(6);
    const double lambda = rng.uniform();
    const RankingProblem p = random_problem(rng, n, k, r, lambda);
    const LpSolution red = solve_reduced(p);
    const FullLpSolution full = solve_full(p);
    induced.add(induced_distribution(p.categories, red.matrix, p.position_weights));
    induced.add(induced_distribution(p.categories, full.matrix, p.position_weights));
    worst = std::max(worst, std::abs(red.objective - full.objective));
  }
  Outcome o;
  o.pass = worst <= 1e-6;
  o.detail = "100 instances, max |reduced - full| " + fmt("%.3g", worst);
  return o;
}

// Random category matrix and weights for exercising Lemma 3 on matrices
// that did not come from a problem.
void track_induced_for(Rng& rng, const DoublyStochasticMatrix& ds, const RankingPolicy* policy) {
  const auto m = static_cast<Eigen::Index>(ds.size());
  RankingProblem p = random_problem(rng, static_cast<std::size_t>(m), static_cast<std::size_t>(m), 3, 0.0);
  induced.add(induced_distribution(p.categories, ds, p.position_weights));
  if (policy != nullptr) {
    for (const auto& c : policy->components()) {
      induced.add(induced_distribution(p.categories, c.permutation, p.position_weights));
    }
  }
}

Outcome criterion_4() {
  Rng rng(mix_seed(2024, 4));
  double worst_recon = 0.0, worst_theta = 0.0;
  bool bound_ok = true;
  std::size_t max_components = 0;
  for (int inst = 0; inst < 500; ++inst) {
    const int m = 1 + static_cast<int>(rng.below(25));
    const int terms = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * m + 1)));
    const DoublyStochasticMatrix ds(random_doubly_stochastic(rng, m, terms), detail::iota_ids(m));
    const RankingPolicy policy = bvn_decompose(ds);
    worst_recon = std::max(worst_recon, (expected_matrix(policy).values() - ds.values()).cwiseAbs().maxCoeff());
    double theta = 0.0;
    for (const auto& c : policy.components()) theta += c.theta;
    worst_theta = std::max(worst_theta, std::abs(theta - 1.0));
    const std::size_t mu = static_cast<std::size_t>(m);
    bound_ok &= policy.size() <= (mu - 1) * (mu - 1) + 1;
    max_components = std::max(max_components, policy.size());
    track_induced_for(rng, ds, &policy);
  }
  Outcome o;
  o.pass = worst_recon <= 1e-6 && worst_theta <= 1e-9 && bound_ok;
  o.detail = "500 matrices, max reconstruction error " + fmt("%.3g", worst_recon) + ", max |sum theta - 1| " +
             fmt("%.3g", worst_theta) + ", largest policy " + std::to_string(max_components) + " components";
  return o;
}

Outcome criterion_5() {
  Rng rng(mix_seed(2024, 5));
  double worst = 0.0;
  double min_entry = 0.0;
  bool prefix_exact = true;
  for (int inst = 0; inst < 1000; ++inst) {
    const int m = 1 + static_cast<int>(rng.below(20));
    const int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(m)));
    const Matrix part = random_partial(rng, m, k, 1 + static_cast<int>(rng.below(8)));
    const DoublyStochasticMatrix ds = augment_and_get_ds(PartialStochasticMatrix(part, detail::iota_ids(m)));
    worst = std::max(worst, ds.stochasticity_error());
    min_entry = std::min(min_entry, ds.values().minCoeff());
    prefix_exact &= ds.values().leftCols(k) == part;
    track_induced_for(rng, ds, nullptr);
  }
  Outcome o;
  o.pass = worst <= 1e-9 && min_entry >= 0.0 && prefix_exact;
  o.detail = "1000 matrices, max row/column error " + fmt("%.3g", worst) + ", min entry " + fmt("%.3g", min_entry) +
             (prefix_exact ? ", first k columns bit-identical" : ", first k columns CHANGED");
  return o;
}

Outcome criterion_6() {
  Outcome o;
  o.pass = induced.checked > 0 && induced.worst_sum_error <= 1e-9 && induced.min_entry >= 0.0;
  o.detail = std::to_string(induced.checked) + " distributions, max |sum - 1| " +
             fmt("%.3g", induced.worst_sum_error) + ", min entry " + fmt("%.3g", induced.min_entry);
  return o;
}

Outcome criterion_7() {
  Rng rng(mix_seed(2024, 7));
  double worst = -1.0;  // max of KL(mean) - expected KL
  int checked = 0;
  while (checked < 100) {
    const int m = 2 + static_cast<int>(rng.below(10));
    RankingProblem p = random_problem(rng, static_cast<std::size_t>(m), static_cast<std::size_t>(m), 4, 0.0);
    // Strictly positive rows make every per-component distribution positive.
    p.categories = (p.categories.array() + 0.05).matrix();
    for (Eigen::Index i = 0; i < p.categories.rows(); ++i) p.categories.row(i) /= p.categories.row(i).sum();
    const RankingPolicy policy =
        bvn_decompose(DoublyStochasticMatrix(random_doubly_stochastic(rng, m, 1 + m), detail::iota_ids(m)));
    bool positive = true;
    for (const auto& c : policy.components()) {
      positive &= induced_distribution(p.categories, c.permutation, p.position_weights).probs().minCoeff() > 0.0;
    }
    if (!positive) continue;
    const double expected = expected_kl_of_policy(policy, p.categories, p.position_weights, p.target, 0.0);
    const double at_mean = kl_divergence(
        p.target, induced_distribution(p.categories, expected_matrix(policy), p.position_weights), 0.0);
    worst = std::max(worst, at_mean - expected);
    ++checked;
  }
  Outcome o;
  o.pass = worst <= 1e-9;
  o.detail = "100 policies, max KL(mean) - E[KL] " + fmt("%.3g", worst);
  return o;
}

Outcome criterion_8() {
  const RankingPolicy policy({0, 1, 2}, {{0.2, PermutationRanking({0, 1, 2})},
                                         {0.3, PermutationRanking({1, 2, 0})},
                                         {0.5, PermutationRanking({2, 0, 1})}});
  const int draws = 100000;
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < draws; ++i) ++counts[sample(policy, mix_seed(2024, static_cast<std::uint64_t>(i))).at(0)];
  Outcome o;
  const double theta[3] = {0.2, 0.3, 0.5};
  for (int c = 0; c < 3; ++c) {
    const double f = counts[c] / static_cast<double>(draws);
    const double sigma = std::sqrt(theta[c] * (1.0 - theta[c]) / draws);
    const double z = (f - theta[c]) / sigma;
    o.pass &= std::abs(z) <= 3.0;
    o.detail += fmt("%.4f", f) + " (z " + fmt("%+.2f", z) + ") ";
  }
  return o;
}

// Shared by criteria 9, 10 and 12.
struct DeskSweep {
  SweepConfig config;
  std::vector<TradeoffPoint> points;
  std::vector<UserPointResult> per_user;
  std::size_t users = 0;
};

DeskSweep& desk_sweep() {
  static DeskSweep s = [] {
    DeskSweep d;
    d.config.category_source = CategorySource::synthetic;
    d.config.users = 50;
    d.config.n = 60;
    d.config.k = 40;
    d.config.r = 8;
    d.config.seed = 2024;
    d.config.methods = {Method::excalibr_reduced, Method::greedy_weighted};
    const auto pop = build_population(d.config);
    d.users = pop.size();
    d.points = run_sweep(d.config, pop, &d.per_user);
    return d;
  }();
  return s;
}

Outcome criterion_9() {
  const DeskSweep& d = desk_sweep();
  std::vector<const TradeoffPoint*> ex, greedy;
  for (const auto& p : d.points) (p.method == Method::greedy_weighted ? greedy : ex).push_back(&p);
  Outcome o;
  std::size_t dominated = 0;
  for (const auto* g : greedy) {
    bool found = false;
    for (const auto* e : ex) {
      if (e->relevance.mean >= g->relevance.mean - 1e-6 && e->l1.mean <= g->l1.mean + 1e-6) {
        found = true;
        break;
      }
    }
    if (found) {
      ++dominated;
    } else {
      o.pass = false;
      o.detail += "undominated greedy point lambda " + fmt("%g", g->lambda) + " (rel " +
                  fmt("%.6f", g->relevance.mean) + ", L1 " + fmt("%.6f", g->l1.mean) + "); ";
    }
  }
  o.detail += std::to_string(dominated) + "/" + std::to_string(greedy.size()) +
              " greedy points dominated, 50 users, 21 lambdas";
  return o;
}

Outcome criterion_10() {
  const DeskSweep& d = desk_sweep();
  const std::size_t L = d.config.lambda_grid.size();
  const std::size_t U = d.users;
  double worst_user = -1.0, worst_mean = -1.0;  // largest increase along lambda
  for (std::size_t li = 1; li < L; ++li) {
    for (std::size_t u = 0; u < U; ++u) {
      const auto& prev = d.per_user[(li - 1) * U + u].metrics;
      const auto& cur = d.per_user[li * U + u].metrics;
      worst_user = std::max({worst_user, cur.l1 - prev.l1, cur.relevance - prev.relevance});
    }
    const auto& prev = d.points[li - 1];
    const auto& cur = d.points[li];
    worst_mean = std::max({worst_mean, cur.l1.mean - prev.l1.mean, cur.relevance.mean - prev.relevance.mean});
  }
  Outcome o;
  o.pass = worst_user <= 1e-6 && worst_mean <= 1e-6;
  o.detail = "max increase along lambda: per user " + fmt("%.3g", worst_user) + ", means " + fmt("%.3g", worst_mean);
  return o;
}

Outcome criterion_11() {
  SweepConfig c;
  c.category_source = CategorySource::synthetic;
  c.users = 3;
  c.n = 150;
  c.k = 100;
  c.r = 20;
  c.seed = 2024;
  c.lambda_grid = {0.25, 0.5, 0.75};
  c.methods = {Method::excalibr_reduced, Method::excalibr_full, Method::greedy_weighted};
  const BenchmarkReport rep = benchmark(c);
  std::ostringstream table;
  write_benchmark(table, rep);
  std::cout << table.str();
  const MethodTiming* red = nullptr;
  const MethodTiming* full = nullptr;
  for (const auto& m : rep.methods) {
    if (m.method == Method::excalibr_reduced) red = &m;
    if (m.method == Method::excalibr_full) full = &m;
  }
  Outcome o;
  o.pass = red->lp_s.mean > red->bvn_s.mean && full->lp_s.mean > full->bvn_s.mean &&
           red->total_s.mean < full->total_s.mean;
  o.detail = "reduced LP " + fmt("%.3fs", red->lp_s.mean) + " vs BVN " + fmt("%.4fs", red->bvn_s.mean) +
             "; total reduced " + fmt("%.3fs", red->total_s.mean) + " vs full " + fmt("%.3fs", full->total_s.mean) +
             " (" + fmt("%.1f%% drop", 100.0 * rep.reduced_vs_full_drop.value_or(0.0)) + ")";
  return o;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome criterion_12() {
  Outcome o;
  // Library path: the desk sweep again, with a different thread count.
  DeskSweep& d = desk_sweep();
  std::ostringstream first, second;
  write_sweep_csv(first, d.points);
  SweepConfig again = d.config;
  again.threads = 1;
  write_sweep_csv(second, run_sweep(again));
  const bool lib_same = first.str() == second.str();
  o.pass &= lib_same;
  o.detail = std::string("in-process CSV ") + (lib_same ? "identical" : "DIFFERS");

  // CLI path: two invocations with the same config and seed.
  const std::string cli = EXCALIBR_CLI_PATH;
  const std::string cfg = std::string(EXCALIBR_SAMPLES_DIR) + "/synthetic_sweep.conf";
  const std::string out_a = "acceptance_sweep_a.csv";
  const std::string out_b = "acceptance_sweep_b.csv";
  const int ra = std::system((cli + " sweep " + cfg + " --seed 11 --output " + out_a).c_str());
  const int rb = std::system((cli + " sweep " + cfg + " --seed 11 --output " + out_b).c_str());
  const std::string a = slurp(out_a);
  const bool cli_same = ra == 0 && rb == 0 && !a.empty() && a == slurp(out_b);
  o.pass &= cli_same;
  o.detail += std::string(", CLI CSV ") + (cli_same ? "identical" : "DIFFERS or failed") + " (" +
              std::to_string(a.size()) + " bytes)";
  return o;
}

}  // namespace

int main() {
  struct Entry {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Entry> entries = {
      {1, "position-weight mass", criterion_1},
      {2, "LP relaxation dominance oracle", criterion_2},
      {3, "full/reduced equivalence", criterion_3},
      {4, "BVN round trip", criterion_4},
      {5, "augmentation correctness", criterion_5},
      {6, "induced distribution is a distribution", criterion_6},
      {7, "Jensen bound", criterion_7},
      {8, "sampling soundness", criterion_8},
      {9, "trade-off dominance at desk scale", criterion_9},
      {10, "scalarization monotonicity", criterion_10},
      {11, "runtime structure", criterion_11},
      {12, "determinism", criterion_12},
  };
  int failures = 0;
  for (const auto& e : entries) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = e.run();
    } catch (const std::exception& ex) {
      o.pass = false;
      o.detail = std::string("exception: ") + ex.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::printf("[%s] criterion %2d: %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", e.id, e.name, o.detail.c_str(),
                secs);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(entries.size()) - failures, entries.size());
  return failures == 0 ? 0 : 1;
}
