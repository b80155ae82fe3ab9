#pragma once

// Experiment orchestration: the end-to-end pipeline for one problem, lambda
// sweeps over a user population, and runtime benchmarks.

#include "excalibr/baselines.hpp"
#include "excalibr/bvn_policy.hpp"
#include "excalibr/calibration_lp.hpp"
#include "excalibr/core_model.hpp"
#include "excalibr/data_io.hpp"
#include "excalibr/metrics.hpp"
#include "excalibr/rng.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace excalibr {

// ---------------------------------------------------------------------------
// Methods

enum class Method { excalibr_full, excalibr_reduced, greedy_simple, greedy_weighted, score_sort };

inline Method parse_method(const std::string& s) {
  if (s == "excalibr_full") return Method::excalibr_full;
  if (s == "excalibr_reduced" || s == "excalibr") return Method::excalibr_reduced;
  if (s == "greedy_simple") return Method::greedy_simple;
  if (s == "greedy_weighted") return Method::greedy_weighted;
  if (s == "score_sort") return Method::score_sort;
  throw InvalidArgument("unknown method '" + s + "'");
}

inline const char* to_string(Method m) {
  switch (m) {
    case Method::excalibr_full:
      return "excalibr_full";
    case Method::excalibr_reduced:
      return "excalibr_reduced";
    case Method::greedy_simple:
      return "greedy_simple";
    case Method::greedy_weighted:
      return "greedy_weighted";
    case Method::score_sort:
      return "score_sort";
  }
  return "?";
}

inline bool is_lp_method(Method m) { return m == Method::excalibr_full || m == Method::excalibr_reduced; }

// ---------------------------------------------------------------------------
// Single-problem pipeline

struct PipelineTimings {
  double lp_ms = 0.0;
  double bvn_ms = 0.0;  // drop_zero_rows + augmentation + decomposition
  double total_ms = 0.0;
};

struct PipelineResult {
  PermutationRanking sample;
  RankingPolicy policy;
  std::optional<double> lp_objective;
  PipelineTimings timings;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

template <class Fn>
auto in_phase(const char* phase, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(std::string(phase) + ": " + e.what());
  }
}

}  // namespace detail

/// Runs one method on one problem. LP methods go through the solve, row
/// drop, completion, decomposition and sampling steps; the others produce a
/// single deterministic ranking. The sample depends only on `seed`.
inline PipelineResult run_pipeline(const RankingProblem& problem, Method method, std::uint64_t seed,
                                   double alpha = kDefaultKlSmoothing, const lp::SolverOptions& options = {}) {
  const auto start = detail::Clock::now();
  std::optional<RankingPolicy> policy;
  std::optional<double> objective;
  PipelineTimings t;

  if (method == Method::excalibr_reduced) {
    auto t0 = detail::Clock::now();
    const LpSolution lp = detail::in_phase("solve_reduced", [&] { return solve_reduced(problem, options); });
    t.lp_ms = detail::elapsed_ms(t0);
    objective = lp.objective;
    t0 = detail::Clock::now();
    policy = detail::in_phase("decomposition", [&] {
      return bvn_decompose(augment_and_get_ds(drop_zero_rows(lp.matrix)));
    });
    t.bvn_ms = detail::elapsed_ms(t0);
  } else if (method == Method::excalibr_full) {
    auto t0 = detail::Clock::now();
    const FullLpSolution lp = detail::in_phase("solve_full", [&] { return solve_full(problem, options); });
    t.lp_ms = detail::elapsed_ms(t0);
    objective = lp.objective;
    t0 = detail::Clock::now();
    policy = detail::in_phase("decomposition", [&] { return bvn_decompose(lp.matrix); });
    t.bvn_ms = detail::elapsed_ms(t0);
  } else {
    const PermutationRanking ranking = detail::in_phase(to_string(method), [&] {
      switch (method) {
        case Method::greedy_simple:
          return greedy_simple(problem, alpha);
        case Method::greedy_weighted:
          return greedy_weighted(problem, alpha);
        default:
          return score_sort(problem);
      }
    });
    policy = RankingPolicy::deterministic(ranking);
  }
  PermutationRanking drawn = sample(*policy, seed);
  t.total_ms = detail::elapsed_ms(start);
  return {std::move(drawn), std::move(*policy), objective, t};
}

// ---------------------------------------------------------------------------
// Per-problem evaluation

/// Exact expectations of the evaluation metrics under a policy.
struct PolicyMetrics {
  double relevance = 0.0;  // expected s'Qe
  double ndcg = 0.0;
  double mrr = 0.0;
  double kl = 0.0;         // theta-weighted smoothed KL of each permutation
  double l1 = 0.0;         // L1 deviation of the expected distribution
};

inline PolicyMetrics evaluate_policy(const RankingPolicy& policy, const RankingProblem& problem,
                                     const RelevantSet& relevant, double alpha) {
  const Vector& w = problem.position_weights;
  const std::size_t k = problem.k();
  PolicyMetrics m;
  Vector mean_p = Vector::Zero(static_cast<Eigen::Index>(problem.r()));
  for (const auto& c : policy.components()) {
    const CategoryDistribution p = induced_distribution(problem.categories, c.permutation, w);
    m.relevance += c.theta * expected_relevance(problem.scores, c.permutation, w);
    m.ndcg += c.theta * ndcg_at_k(c.permutation, relevant, k);
    m.mrr += c.theta * mrr(c.permutation, relevant, k);
    m.kl += c.theta * kl_divergence(problem.target, p, alpha);
    mean_p += c.theta * p.probs();
  }
  m.l1 = l1_deviation(problem.target, CategoryDistribution(mean_p));
  return m;
}

// ---------------------------------------------------------------------------
// Sweep configuration

enum class CategorySource { genre, year, popularity, file, synthetic };

inline CategorySource parse_category_source(const std::string& s) {
  if (s == "genre") return CategorySource::genre;
  if (s == "year") return CategorySource::year;
  if (s == "popularity") return CategorySource::popularity;
  if (s == "file") return CategorySource::file;
  if (s == "synthetic") return CategorySource::synthetic;
  throw InvalidArgument("unknown category_source '" + s + "'");
}

/// 21 evenly spaced values 0, 0.05, ..., 1.
inline std::vector<double> default_lambda_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 20; ++i) g.push_back(i / 20.0);
  return g;
}

struct SweepConfig {
  std::vector<Method> methods{Method::excalibr_reduced};
  std::vector<double> lambda_grid = default_lambda_grid();
  PositionWeightKind position_weights = PositionWeightKind::log;
  std::size_t n = 60;
  std::size_t k = 40;
  CategorySource category_source = CategorySource::synthetic;

  // MovieLens-style inputs.
  std::string interactions;
  std::string catalog;
  std::string scores;
  std::string categories;  // category_source = file
  double positive_threshold = 3.5;
  std::size_t min_interactions = 5;
  double history_frac = 0.8;
  double popular_frac = 0.05;
  double train_frac = 0.9;
  std::size_t val_users = 0;
  std::size_t test_users = 0;

  // Synthetic corpus.
  std::size_t users = 50;
  std::size_t r = 8;
  ScoreDistribution score_distribution = ScoreDistribution::normal;
  double category_sparsity = 0.75;

  std::uint64_t seed = 0;
  double alpha = kDefaultKlSmoothing;
  std::string output;
  std::size_t threads = 0;  // 0 = hardware concurrency
  bool timings = false;     // add wall-clock columns to the CSV
};

inline const std::vector<std::string>& sweep_config_keys() {
  static const std::vector<std::string> keys = {
      "method",          "lambda_grid",       "position_weights", "n",
      "k",               "category_source",   "interactions",     "catalog",
      "scores",          "categories",        "positive_threshold", "min_interactions",
      "history_frac",    "popular_frac",      "train_frac",       "val_users",
      "test_users",      "users",             "r",                "score_distribution",
      "category_sparsity", "seed",            "alpha",            "output",
      "threads",         "timings"};
  return keys;
}

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(s);
  while (std::getline(ss, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size() || !std::isfinite(x)) throw InvalidArgument("bad number for " + key + ": '" + v + "'");
  return x;
}

inline std::int64_t to_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long x = 0;
  try {
    x = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw InvalidArgument("bad integer for " + key + ": '" + v + "'");
  return x;
}

inline std::size_t to_size(const std::string& key, const std::string& v) {
  const std::int64_t x = to_int(key, v);
  if (x < 0) throw InvalidArgument(key + " must be non-negative");
  return static_cast<std::size_t>(x);
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw InvalidArgument("bad boolean for " + key + ": '" + v + "'");
}

}  // namespace detail

/// Reads flat `key = value` lines; '#' starts a comment.
inline std::map<std::string, std::string> read_key_values(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (detail::trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("config: expected key = value", line_no);
    kv[detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
  }
  return kv;
}

inline std::map<std::string, std::string> read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  return read_key_values(in);
}

/// Applies key/value settings on top of `base`. Unknown keys are rejected.
inline SweepConfig apply_settings(SweepConfig cfg, const std::map<std::string, std::string>& kv) {
  for (const auto& [key, v] : kv) {
    try {
      if (key == "method") {
        cfg.methods.clear();
        for (const auto& m : detail::split_list(v)) cfg.methods.push_back(parse_method(m));
        if (cfg.methods.empty()) throw InvalidArgument("empty method list");
      } else if (key == "lambda_grid") {
        if (v == "default") {
          cfg.lambda_grid = default_lambda_grid();
        } else {
          cfg.lambda_grid.clear();
          for (const auto& x : detail::split_list(v)) cfg.lambda_grid.push_back(detail::to_double(key, x));
        }
      } else if (key == "position_weights") {
        cfg.position_weights = parse_position_weight_kind(v);
      } else if (key == "n") {
        cfg.n = detail::to_size(key, v);
      } else if (key == "k") {
        cfg.k = detail::to_size(key, v);
      } else if (key == "category_source") {
        cfg.category_source = parse_category_source(v);
      } else if (key == "interactions") {
        cfg.interactions = v;
      } else if (key == "catalog") {
        cfg.catalog = v;
      } else if (key == "scores") {
        cfg.scores = v;
      } else if (key == "categories") {
        cfg.categories = v;
      } else if (key == "positive_threshold") {
        cfg.positive_threshold = detail::to_double(key, v);
      } else if (key == "min_interactions") {
        cfg.min_interactions = detail::to_size(key, v);
      } else if (key == "history_frac") {
        cfg.history_frac = detail::to_double(key, v);
      } else if (key == "popular_frac") {
        cfg.popular_frac = detail::to_double(key, v);
      } else if (key == "train_frac") {
        cfg.train_frac = detail::to_double(key, v);
      } else if (key == "val_users") {
        cfg.val_users = detail::to_size(key, v);
      } else if (key == "test_users") {
        cfg.test_users = detail::to_size(key, v);
      } else if (key == "users") {
        cfg.users = detail::to_size(key, v);
      } else if (key == "r") {
        cfg.r = detail::to_size(key, v);
      } else if (key == "score_distribution") {
        cfg.score_distribution = parse_score_distribution(v);
      } else if (key == "category_sparsity") {
        cfg.category_sparsity = detail::to_double(key, v);
      } else if (key == "seed") {
        cfg.seed = static_cast<std::uint64_t>(detail::to_int(key, v));
      } else if (key == "alpha") {
        cfg.alpha = detail::to_double(key, v);
      } else if (key == "output") {
        cfg.output = v;
      } else if (key == "threads") {
        cfg.threads = detail::to_size(key, v);
      } else if (key == "timings") {
        cfg.timings = detail::to_bool(key, v);
      } else {
        throw InvalidArgument("unknown key");
      }
    } catch (const Error& e) {
      throw InvalidArgument("config key '" + key + "': " + e.what());
    }
  }
  return cfg;
}

/// Problems with the configuration itself; empty when usable.
inline std::vector<std::string> validate_config(const SweepConfig& c) {
  std::vector<std::string> out;
  if (c.methods.empty()) out.emplace_back("no methods");
  if (c.lambda_grid.empty()) out.emplace_back("empty lambda grid");
  for (std::size_t i = 0; i < c.lambda_grid.size(); ++i) {
    const double l = c.lambda_grid[i];
    if (!(l >= 0.0 && l <= 1.0)) out.push_back("lambda " + detail::fmt_num(l) + " outside [0,1]");
    if (i > 0 && !(l > c.lambda_grid[i - 1])) out.emplace_back("lambda grid not strictly ascending");
  }
  if (c.k == 0 || c.n == 0 || c.k > c.n) out.emplace_back("need 1 <= k <= n");
  if (!(c.alpha >= 0.0 && c.alpha < 1.0)) out.emplace_back("alpha outside [0,1)");
  if (c.category_source == CategorySource::synthetic) {
    if (c.users == 0) out.emplace_back("users must be positive");
    if (c.r == 0) out.emplace_back("r must be positive");
  } else {
    if (c.interactions.empty()) out.emplace_back("interactions path required");
    if (c.scores.empty()) out.emplace_back("scores path required");
    if (c.category_source == CategorySource::file && c.categories.empty()) out.emplace_back("categories path required");
    if ((c.category_source == CategorySource::genre || c.category_source == CategorySource::year) &&
        c.catalog.empty()) {
      out.emplace_back("catalog path required");
    }
    if (!(c.history_frac > 0.0 && c.history_frac < 1.0)) out.emplace_back("history_frac outside (0,1)");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation population

struct EvalUser {
  std::int64_t user = 0;
  RankingProblem problem;  // lambda filled per sweep point
  RelevantSet relevant;    // local candidate indices
};

/// Builds the per-user problems the sweep evaluates: a synthetic corpus, or
/// test users of an interaction dataset with candidates from a score file.
inline std::vector<EvalUser> build_population(const SweepConfig& c, std::ostream* warn = nullptr) {
  if (const auto errs = validate_config(c); !errs.empty()) throw InvalidArgument("config: " + errs.front());
  std::vector<EvalUser> out;
  if (c.category_source == CategorySource::synthetic) {
    for (auto& su : synthetic_corpus(c.seed, c.users, c.n, c.k, c.r, c.score_distribution, c.category_sparsity,
                                     c.position_weights)) {
      out.push_back({su.user, std::move(su.problem), std::move(su.relevant)});
    }
    return out;
  }

  std::optional<Catalog> catalog;
  if (!c.catalog.empty()) catalog = load_catalog(c.catalog);
  InteractionDataset full =
      load_interactions(c.interactions, c.positive_threshold, c.min_interactions, catalog ? &*catalog : nullptr);
  // Only users with a history and a holdout can be evaluated.
  InteractionDataset ds;
  ds.items = full.items;
  for (auto& u : full.users) {
    if (u.positives().size() >= 2) ds.users.push_back(std::move(u));
  }
  if (ds.users.empty()) throw EmptyDataset("no user has two or more positives");
  const UserSplit split = split_users(ds, c.train_frac, c.val_users, c.test_users, mix_seed(c.seed, 1));

  CategoryMatrix a;
  switch (c.category_source) {
    case CategorySource::genre:
      a = build_genre_matrix(ds.items);
      break;
    case CategorySource::year:
      a = build_year_matrix(ds.items);
      break;
    case CategorySource::popularity:
      a = build_popularity_matrix(ds, c.popular_frac, split.train);
      break;
    default:
      a = load_category_matrix(c.categories);
      break;
  }
  const ScoreTable table = load_scores(c.scores, &ds.items);

  for (std::int64_t uid : split.test) {
    const UserRecord* u = ds.find_user(uid);
    auto [history, holdout] = split_history_holdout(u->positives(), c.history_frac,
                                                    mix_seed(c.seed, static_cast<std::uint64_t>(uid)));
    const auto it = table.find(uid);
    if (it == table.end()) throw InvalidArgument("user " + std::to_string(uid) + ": no scores");
    Candidates cand = assemble_candidates(it->second, history, c.n, warn);
    if (cand.items.empty()) throw InvalidArgument("user " + std::to_string(uid) + ": no candidates");

    EvalUser eu;
    eu.user = uid;
    const std::size_t k = std::min(c.k, cand.items.size());
    eu.problem.scores = cand.scores;
    eu.problem.position_weights = make_position_weights(c.position_weights, k);
    eu.problem.categories = a.rows_for(cand.items);
    eu.problem.target = build_target_distribution(history, a);
    const std::unordered_set<ItemId> held(holdout.begin(), holdout.end());
    for (std::size_t i = 0; i < cand.items.size(); ++i) {
      if (held.count(cand.items[i])) eu.relevant.insert(static_cast<ItemId>(i));
    }
    out.push_back(std::move(eu));
  }
  if (out.empty()) throw EmptyDataset("no test users");
  return out;
}

// ---------------------------------------------------------------------------
// Sweep

struct MeanStat {
  double mean = 0.0;
  double stderr_ = 0.0;
};

struct TradeoffPoint {
  Method method = Method::excalibr_reduced;
  double lambda = 0.0;
  std::size_t users = 0;
  MeanStat relevance, ndcg, mrr, kl, l1;
  std::optional<double> lp_objective;  // mean, LP methods only
  double lp_time_ms = 0.0;             // means per user
  double bvn_time_ms = 0.0;
  double total_time_ms = 0.0;
};

namespace detail {

inline MeanStat mean_stat(const std::vector<double>& xs) {
  MeanStat s;
  if (xs.empty()) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.stderr_ = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
  }
  return s;
}

/// Calls fn(i) for i in [0, count) on up to `threads` workers. The first
/// exception (lowest index) is rethrown after all workers finish.
template <class Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(count, 1));
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace detail

/// One user's outcome at one (method, lambda) point.
struct UserPointResult {
  PolicyMetrics metrics;
  std::optional<double> objective;
  PipelineTimings timings;
};

/// Evaluates every (method, lambda) pair over the population. Users run in
/// parallel; aggregation walks users in input order, so the numbers do not
/// depend on scheduling.
/// With `per_user`, the unaggregated results are kept there, indexed
/// [(method * lambdas + lambda) * users + user].
inline std::vector<TradeoffPoint> run_sweep(const SweepConfig& config, const std::vector<EvalUser>& population,
                                            std::vector<UserPointResult>* per_user = nullptr) {
  if (const auto errs = validate_config(config); !errs.empty()) throw InvalidArgument("config: " + errs.front());
  const std::size_t L = config.lambda_grid.size();
  const std::size_t M = config.methods.size();
  const std::size_t U = population.size();
  std::vector<UserPointResult> results(M * L * U);

  detail::parallel_for(U, config.threads, [&](std::size_t u) {
    const EvalUser& eu = population[u];
    for (std::size_t mi = 0; mi < M; ++mi) {
      for (std::size_t li = 0; li < L; ++li) {
        const double lambda = config.lambda_grid[li];
        try {
          RankingProblem prob = eu.problem;
          prob.lambda = lambda;
          const std::uint64_t seed = mix_seed(config.seed, (u * M + mi) * L + li);
          PipelineResult pr = run_pipeline(prob, config.methods[mi], seed, config.alpha);
          auto& slot = results[(mi * L + li) * U + u];
          slot.metrics = evaluate_policy(pr.policy, prob, eu.relevant, config.alpha);
          slot.objective = pr.lp_objective;
          slot.timings = pr.timings;
        } catch (const std::exception& e) {
          throw Error("user " + std::to_string(eu.user) + ", lambda " + detail::fmt_num(lambda) + ", " +
                      to_string(config.methods[mi]) + ": " + e.what());
        }
      }
    }
  });

  std::vector<TradeoffPoint> points;
  for (std::size_t mi = 0; mi < M; ++mi) {
    for (std::size_t li = 0; li < L; ++li) {
      TradeoffPoint tp;
      tp.method = config.methods[mi];
      tp.lambda = config.lambda_grid[li];
      tp.users = U;
      std::vector<double> rel, ndcg, mrr_v, kl, l1;
      double obj = 0.0;
      for (std::size_t u = 0; u < U; ++u) {
        const auto& r = results[(mi * L + li) * U + u];
        rel.push_back(r.metrics.relevance);
        ndcg.push_back(r.metrics.ndcg);
        mrr_v.push_back(r.metrics.mrr);
        kl.push_back(r.metrics.kl);
        l1.push_back(r.metrics.l1);
        if (r.objective) obj += *r.objective;
        tp.lp_time_ms += r.timings.lp_ms;
        tp.bvn_time_ms += r.timings.bvn_ms;
        tp.total_time_ms += r.timings.total_ms;
      }
      tp.relevance = detail::mean_stat(rel);
      tp.ndcg = detail::mean_stat(ndcg);
      tp.mrr = detail::mean_stat(mrr_v);
      tp.kl = detail::mean_stat(kl);
      tp.l1 = detail::mean_stat(l1);
      if (is_lp_method(tp.method)) tp.lp_objective = obj / static_cast<double>(U);
      const double du = static_cast<double>(std::max<std::size_t>(U, 1));
      tp.lp_time_ms /= du;
      tp.bvn_time_ms /= du;
      tp.total_time_ms /= du;
      points.push_back(tp);
    }
  }
  if (per_user != nullptr) *per_user = std::move(results);
  return points;
}

inline std::vector<TradeoffPoint> run_sweep(const SweepConfig& config, std::ostream* warn = nullptr) {
  return run_sweep(config, build_population(config, warn));
}

/// CSV with a fixed header; numbers use 17 significant digits. Timing
/// columns are appended only when requested, since they vary run to run.
inline void write_sweep_csv(std::ostream& os, const std::vector<TradeoffPoint>& points, bool timings = false) {
  os << "method,lambda,users,mean_relevance,se_relevance,mean_ndcg,se_ndcg,mean_mrr,se_mrr,"
        "mean_kl,se_kl,mean_l1,se_l1,mean_lp_objective";
  if (timings) os << ",lp_time_ms,bvn_time_ms,total_time_ms";
  os << '\n';
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const auto& p : points) {
    os << to_string(p.method) << ',' << num(p.lambda) << ',' << p.users;
    for (const MeanStat* s : {&p.relevance, &p.ndcg, &p.mrr, &p.kl, &p.l1}) {
      os << ',' << num(s->mean) << ',' << num(s->stderr_);
    }
    os << ',' << (p.lp_objective ? num(*p.lp_objective) : std::string());
    if (timings) os << ',' << num(p.lp_time_ms) << ',' << num(p.bvn_time_ms) << ',' << num(p.total_time_ms);
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// Benchmark

struct MethodTiming {
  Method method = Method::excalibr_reduced;
  std::size_t runs = 0;  // user x lambda solves
  MeanStat total_s;
  MeanStat lp_s;
  MeanStat bvn_s;
};

struct BenchmarkReport {
  std::vector<double> lambda_grid;
  std::size_t users = 0;
  std::vector<MethodTiming> methods;
  /// 1 - reduced/full mean total time when both LP forms were timed.
  std::optional<double> reduced_vs_full_drop;
};

/// Times each method over every user and lambda, sequentially so runs do
/// not compete for cores. Seconds per user are averaged over the grid.
inline BenchmarkReport benchmark(const SweepConfig& config, const std::vector<EvalUser>& population) {
  if (const auto errs = validate_config(config); !errs.empty()) throw InvalidArgument("config: " + errs.front());
  BenchmarkReport rep;
  rep.lambda_grid = config.lambda_grid;
  rep.users = population.size();
  for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
    const Method method = config.methods[mi];
    std::vector<double> total, lp, bvn;
    for (std::size_t u = 0; u < population.size(); ++u) {
      double t_total = 0.0, t_lp = 0.0, t_bvn = 0.0;
      for (std::size_t li = 0; li < config.lambda_grid.size(); ++li) {
        RankingProblem prob = population[u].problem;
        prob.lambda = config.lambda_grid[li];
        const auto pr = run_pipeline(prob, method, mix_seed(config.seed, u * 1000 + li), config.alpha);
        t_total += pr.timings.total_ms;
        t_lp += pr.timings.lp_ms;
        t_bvn += pr.timings.bvn_ms;
      }
      const double grid = static_cast<double>(config.lambda_grid.size());
      total.push_back(t_total / grid / 1000.0);
      lp.push_back(t_lp / grid / 1000.0);
      bvn.push_back(t_bvn / grid / 1000.0);
    }
    MethodTiming mt;
    mt.method = method;
    mt.runs = population.size() * config.lambda_grid.size();
    mt.total_s = detail::mean_stat(total);
    mt.lp_s = detail::mean_stat(lp);
    mt.bvn_s = detail::mean_stat(bvn);
    rep.methods.push_back(mt);
  }
  const MethodTiming* full = nullptr;
  const MethodTiming* reduced = nullptr;
  for (const auto& m : rep.methods) {
    if (m.method == Method::excalibr_full) full = &m;
    if (m.method == Method::excalibr_reduced) reduced = &m;
  }
  if (full != nullptr && reduced != nullptr && full->total_s.mean > 0.0) {
    rep.reduced_vs_full_drop = 1.0 - reduced->total_s.mean / full->total_s.mean;
  }
  return rep;
}

inline BenchmarkReport benchmark(const SweepConfig& config, std::ostream* warn = nullptr) {
  return benchmark(config, build_population(config, warn));
}

inline void write_benchmark(std::ostream& os, const BenchmarkReport& rep) {
  os << "# seconds per user, averaged over lambda in {";
  for (std::size_t i = 0; i < rep.lambda_grid.size(); ++i) os << (i ? ", " : "") << rep.lambda_grid[i];
  os << "}, " << rep.users << " users\n";
  os << "method,runs,mean_total_s,se_total_s,mean_lp_s,se_lp_s,mean_bvn_s,se_bvn_s\n";
  char buf[256];
  for (const auto& m : rep.methods) {
    std::snprintf(buf, sizeof(buf), "%s,%zu,%.6g,%.3g,%.6g,%.3g,%.6g,%.3g\n", to_string(m.method), m.runs,
                  m.total_s.mean, m.total_s.stderr_, m.lp_s.mean, m.lp_s.stderr_, m.bvn_s.mean, m.bvn_s.stderr_);
    os << buf;
  }
  if (rep.reduced_vs_full_drop) {
    std::snprintf(buf, sizeof(buf), "# reduced vs full: %.1f%% drop in total time\n",
                  100.0 * *rep.reduced_vs_full_drop);
    os << buf;
  }
}

}  // namespace excalibr
