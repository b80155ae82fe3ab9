// Command-line front end: sweep, calibrate, decompose, bench, validate.

#include "excalibr/excalibr.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace excalibr;

std::ostream& open_output(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw InvalidArgument("cannot write '" + path + "'");
  return file;
}

// Options shared by sweep and bench: a config file plus one flag per key.
struct ConfigOptions {
  std::string config_path;
  std::map<std::string, std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("config", config_path, "key = value configuration file");
    for (const auto& key : sweep_config_keys()) cmd->add_option("--" + key, overrides[key], "overrides '" + key + "'");
  }

  SweepConfig resolve(std::optional<std::uint64_t> seed) const {
    SweepConfig cfg;
    if (!config_path.empty()) cfg = apply_settings(cfg, read_key_values(config_path));
    std::map<std::string, std::string> set;
    for (const auto& [k, v] : overrides) {
      if (!v.empty()) set[k] = v;
    }
    cfg = apply_settings(cfg, set);
    if (seed) cfg.seed = *seed;
    return cfg;
  }
};

int cmd_sweep(const ConfigOptions& opts, std::optional<std::uint64_t> seed) {
  const SweepConfig cfg = opts.resolve(seed);
  const auto points = run_sweep(cfg, &std::cerr);
  std::ofstream file;
  write_sweep_csv(open_output(cfg.output, file), points, cfg.timings);
  return 0;
}

int cmd_bench(const ConfigOptions& opts, std::optional<std::uint64_t> seed) {
  const SweepConfig cfg = opts.resolve(seed);
  const auto report = benchmark(cfg, &std::cerr);
  std::ofstream file;
  write_benchmark(open_output(cfg.output, file), report);
  return 0;
}

struct CalibrateOptions {
  std::string problem;
  std::optional<double> lambda;
  std::string method = "excalibr_reduced";
  std::string policy_out;
  double alpha = kDefaultKlSmoothing;
};

int cmd_calibrate(const CalibrateOptions& o, std::uint64_t seed) {
  ProblemFile pf = load_problem_file(o.problem);
  if (o.lambda) pf.problem.lambda = *o.lambda;
  require_valid(pf.problem);
  const Method method = parse_method(o.method);
  const PipelineResult res = run_pipeline(pf.problem, method, seed, o.alpha);
  const PolicyMetrics m = evaluate_policy(res.policy, pf.problem, pf.relevant, o.alpha);

  std::cout.precision(10);
  std::cout << "method " << to_string(method) << "\nlambda " << pf.problem.lambda << '\n';
  if (res.lp_objective) std::cout << "lp_objective " << *res.lp_objective << '\n';
  std::cout << "components " << res.policy.size() << '\n';
  std::cout << "expected_relevance " << m.relevance << "\nl1_deviation " << m.l1 << "\nexpected_kl " << m.kl << '\n';
  if (!pf.relevant.empty()) std::cout << "expected_ndcg " << m.ndcg << "\nexpected_mrr " << m.mrr << '\n';
  std::cout << "sample";
  for (std::size_t pos = 0; pos < pf.problem.k(); ++pos) std::cout << ' ' << res.sample.at(pos);
  std::cout << '\n';
  if (!o.policy_out.empty()) {
    std::ofstream file;
    write_policy(open_output(o.policy_out, file), res.policy);
  }
  return 0;
}

struct DecomposeOptions {
  std::string matrix;
  std::string out;
  double residual_tol = kDefaultResidualTolerance;
};

int cmd_decompose(const DecomposeOptions& o) {
  const Matrix raw = load_matrix(o.matrix);
  DoublyStochasticMatrix ds = raw.rows() == raw.cols()
                                  ? DoublyStochasticMatrix(raw, detail::iota_ids(raw.rows()))
                                  : augment_and_get_ds(drop_zero_rows(
                                        PartialStochasticMatrix(raw, detail::iota_ids(raw.rows()))));
  const RankingPolicy policy = bvn_decompose(ds, o.residual_tol);
  std::ofstream file;
  write_policy(open_output(o.out, file), policy);
  std::cerr << policy.size() << " components\n";
  return 0;
}

struct ValidateOptions {
  std::string interactions;
  std::string catalog;
  std::string scores;
  std::string categories;
  std::string problem;
  std::string config;
  double positive_threshold = 3.5;
  std::size_t min_interactions = 5;
};

int cmd_validate(const ValidateOptions& o) {
  std::vector<std::string> issues;
  auto guard = [&](const std::string& what, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      issues.push_back(what + ": " + e.what());
    }
  };
  std::optional<Catalog> catalog;
  std::optional<InteractionDataset> ds;
  if (!o.catalog.empty()) guard("catalog", [&] { catalog = load_catalog(o.catalog); });
  if (!o.interactions.empty()) {
    guard("interactions", [&] {
      ds = load_interactions(o.interactions, o.positive_threshold, o.min_interactions, catalog ? &*catalog : nullptr);
      for (const auto& v : validate_dataset(*ds)) issues.push_back("interactions: " + v);
    });
  }
  if (!o.scores.empty()) {
    const Catalog* known = catalog ? &*catalog : (ds ? &ds->items : nullptr);
    guard("scores", [&] { load_scores(o.scores, known); });
  }
  if (!o.categories.empty()) guard("categories", [&] { load_category_matrix(o.categories); });
  if (!o.problem.empty()) {
    guard("problem", [&] {
      for (const auto& v : validate_problem(load_problem_file(o.problem).problem)) issues.push_back("problem: " + v);
    });
  }
  if (!o.config.empty()) {
    guard("config", [&] {
      for (const auto& v : validate_config(apply_settings({}, read_key_values(o.config)))) {
        issues.push_back("config: " + v);
      }
    });
  }
  for (const auto& s : issues) std::cout << s << '\n';
  if (issues.empty()) std::cout << "ok\n";
  return issues.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Calibrated stochastic top-k ranking"};
  app.require_subcommand(1);
  app.fallthrough();
  std::optional<std::uint64_t> seed;
  app.add_option("--seed", seed, "seed for every random choice")->expected(1);

  ConfigOptions sweep_opts;
  auto* sweep = app.add_subcommand("sweep", "lambda sweep over a user population, CSV output");
  sweep_opts.attach(sweep);

  ConfigOptions bench_opts;
  auto* bench = app.add_subcommand("bench", "per-method runtime table");
  bench_opts.attach(bench);

  CalibrateOptions cal;
  auto* calibrate = app.add_subcommand("calibrate", "solve one problem file, print a sampled ranking");
  calibrate->add_option("problem", cal.problem, "JSON problem file")->required();
  calibrate->add_option("--lambda", cal.lambda, "trade-off weight in [0,1]");
  calibrate->add_option("--method", cal.method, "excalibr_reduced|excalibr_full|greedy_simple|greedy_weighted|score_sort");
  calibrate->add_option("--policy-out", cal.policy_out, "write the policy here ('-' for stdout)");
  calibrate->add_option("--alpha", cal.alpha, "KL smoothing");

  DecomposeOptions dec;
  auto* decompose = app.add_subcommand("decompose", "matrix file to policy file");
  decompose->add_option("matrix", dec.matrix, "whitespace-separated stochastic matrix")->required();
  decompose->add_option("-o,--out", dec.out, "policy output path (default stdout)");
  decompose->add_option("--residual-tol", dec.residual_tol, "stop once this much mass remains");

  ValidateOptions val;
  auto* validate = app.add_subcommand("validate", "check data files and report violations");
  validate->add_option("--interactions", val.interactions);
  validate->add_option("--catalog", val.catalog);
  validate->add_option("--scores", val.scores);
  validate->add_option("--categories", val.categories);
  validate->add_option("--problem", val.problem);
  validate->add_option("--config", val.config);
  validate->add_option("--positive_threshold", val.positive_threshold);
  validate->add_option("--min_interactions", val.min_interactions);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sweep) return cmd_sweep(sweep_opts, seed);
    if (*bench) return cmd_bench(bench_opts, seed);
    if (*calibrate) return cmd_calibrate(cal, seed.value_or(0));
    if (*decompose) return cmd_decompose(dec);
    if (*validate) return cmd_validate(val);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
