#pragma once

// The calibration linear programs. Both maximize
//
//   (1 - lambda) * s'P e  -  lambda * sum(eps)
//   s.t.  |A'P e - q| <= eps  (element-wise, split into two inequalities)
//
// over P doubly stochastic (full form, n x n) or over P with unit column
// sums and row sums <= 1 (reduced form, n x k, exposed slots only).

#include "excalibr/core_model.hpp"
#include "excalibr/simplex.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace excalibr {

template <class MatrixT>
struct BasicLpSolution {
  MatrixT matrix;
  Vector epsilon;           // per-category deviation slack, |A'Pe - q|
  double objective = 0.0;   // (1-lambda) relevance - lambda * sum(epsilon)
  double relevance = 0.0;   // s'Pe
  double solver_objective = 0.0;  // optimum reported by the simplex, same sign
  double solve_time_ms = 0.0;
  long iterations = 0;
};

using LpSolution = BasicLpSolution<PartialStochasticMatrix>;
using FullLpSolution = BasicLpSolution<DoublyStochasticMatrix>;

struct LpDimensions {
  std::size_t variables = 0;
  std::size_t constraints = 0;  // includes non-negativity of the matrix entries
};

/// Size of the full form as it is usually counted: n^2 + r variables and
/// 2r + n^2 + 2n constraints.
inline LpDimensions full_lp_dimensions(std::size_t n, std::size_t r) {
  return {n * n + r, 2 * r + n * n + 2 * n};
}

/// Size of the reduced form: n*k + r variables, 2r + n*k + n + k constraints.
inline LpDimensions reduced_lp_dimensions(std::size_t n, std::size_t k, std::size_t r) {
  return {n * k + r, 2 * r + n * k + n + k};
}

// ---------------------------------------------------------------------------
// Sanitization

/// Cleans a raw solver matrix into a partial stochastic matrix: clamps small
/// negatives, rescales columns to one and shrinks rows that exceed one.
/// Deviations beyond `tolerance` indicate a solver defect and throw.
inline PartialStochasticMatrix sanitize(const Matrix& raw, double tolerance,
                                        std::vector<ItemId> row_items = {}) {
  if (row_items.empty()) row_items = detail::iota_ids(raw.rows());
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    for (Eigen::Index j = 0; j < raw.cols(); ++j) {
      if (!(raw(i, j) >= -tolerance)) {
        throw CorruptSolution("sanitize: entry (" + std::to_string(i) + "," + std::to_string(j) +
                              ") = " + detail::fmt_num(raw(i, j)));
      }
    }
    const double rs = raw.row(i).sum();
    if (rs > 1.0 + tolerance) {
      throw CorruptSolution("sanitize: row " + std::to_string(i) + " sums to " + detail::fmt_num(rs));
    }
  }
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    const double cs = raw.col(j).sum();
    if (std::abs(cs - 1.0) > tolerance) {
      throw CorruptSolution("sanitize: column " + std::to_string(j) + " sums to " + detail::fmt_num(cs));
    }
  }

  Matrix m = raw.cwiseMax(0.0);
  for (int round = 0; round < 100; ++round) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double cs = m.col(j).sum();
      if (cs != 1.0) m.col(j) /= cs;
    }
    bool rows_ok = true;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double rs = m.row(i).sum();
      if (rs > 1.0 + 1e-12) {
        m.row(i) /= rs;
        rows_ok = false;
      }
    }
    if (rows_ok) break;
  }
  return PartialStochasticMatrix(std::move(m), std::move(row_items), kArithmeticTolerance);
}

/// As sanitize, but for square solutions whose rows must also sum to one.
inline DoublyStochasticMatrix sanitize_doubly_stochastic(const Matrix& raw, double tolerance,
                                                         std::vector<ItemId> item_map = {}) {
  if (item_map.empty()) item_map = detail::iota_ids(raw.rows());
  const PartialStochasticMatrix partial = sanitize(raw, tolerance, item_map);
  Matrix m = partial.values();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (std::abs(m.row(i).sum() - 1.0) > tolerance) {
      throw CorruptSolution("sanitize: row " + std::to_string(i) + " sums to " +
                            detail::fmt_num(m.row(i).sum()));
    }
  }
  for (int round = 0; round < 100; ++round) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m.row(i) /= m.row(i).sum();
    for (Eigen::Index j = 0; j < m.cols(); ++j) m.col(j) /= m.col(j).sum();
    const double err = (m.rowwise().sum().array() - 1.0).abs().maxCoeff();
    if (err < 1e-13) break;
  }
  return DoublyStochasticMatrix(std::move(m), std::move(item_map), kArithmeticTolerance);
}

// ---------------------------------------------------------------------------
// LP construction

namespace detail {

/// Items by descending score, ties by lower index.
inline std::vector<int> score_order(const Vector& scores) {
  std::vector<int> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });
  return order;
}

struct CalibrationLp {
  lp::Model model;
  std::vector<lp::BasisRef> crash_basis;
  int slots = 0;
  int eps_offset = 0;
};

inline CalibrationLp build_lp(const RankingProblem& p, bool full) {
  const int n = static_cast<int>(p.n());
  const int r = static_cast<int>(p.r());
  const int slots = full ? n : static_cast<int>(p.k());
  const Vector e = full ? p.full_position_weights() : p.position_weights;
  const double lambda = p.lambda;
  const Vector& q = p.target.probs();

  CalibrationLp out;
  out.slots = slots;
  lp::Model& model = out.model;

  // Column-sum equalities; the full form drops the last one, which the
  // remaining row and column equalities imply.
  const int col_rows = full ? slots - 1 : slots;
  std::vector<int> col_row(static_cast<std::size_t>(slots), -1);
  for (int j = 0; j < col_rows; ++j) col_row[static_cast<std::size_t>(j)] = model.add_row(lp::RowSense::equal, 1.0);
  std::vector<int> item_row(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    item_row[static_cast<std::size_t>(i)] =
        model.add_row(full ? lp::RowSense::equal : lp::RowSense::less_equal, 1.0);
  }
  std::vector<int> upper_row(static_cast<std::size_t>(r));
  std::vector<int> lower_row(static_cast<std::size_t>(r));
  for (int c = 0; c < r; ++c) {
    upper_row[static_cast<std::size_t>(c)] = model.add_row(lp::RowSense::less_equal, q[c]);
    lower_row[static_cast<std::size_t>(c)] = model.add_row(lp::RowSense::less_equal, -q[c]);
  }

  std::vector<int> rows;
  std::vector<double> vals;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < slots; ++j) {
      rows.clear();
      vals.clear();
      if (col_row[static_cast<std::size_t>(j)] >= 0) {
        rows.push_back(col_row[static_cast<std::size_t>(j)]);
        vals.push_back(1.0);
      }
      rows.push_back(item_row[static_cast<std::size_t>(i)]);
      vals.push_back(1.0);
      if (e[j] != 0.0) {
        for (int c = 0; c < r; ++c) {
          const double a = p.categories(i, c) * e[j];
          if (a == 0.0) continue;
          rows.push_back(upper_row[static_cast<std::size_t>(c)]);
          vals.push_back(a);
          rows.push_back(lower_row[static_cast<std::size_t>(c)]);
          vals.push_back(-a);
        }
      }
      model.add_column(-(1.0 - lambda) * p.scores[i] * e[j], rows, vals);
    }
  }
  out.eps_offset = model.num_columns();
  for (int c = 0; c < r; ++c) {
    model.add_column(lambda, {upper_row[static_cast<std::size_t>(c)], lower_row[static_cast<std::size_t>(c)]},
                     {-1.0, -1.0});
  }

  // Crash basis from the score-sorted assignment, which is always feasible.
  const std::vector<int> order = score_order(p.scores);
  auto var = [&](int item, int slot) { return item * slots + slot; };
  std::vector<lp::BasisRef> basis(static_cast<std::size_t>(model.num_rows()));
  Vector induced = Vector::Zero(r);
  for (int j = 0; j < slots; ++j) {
    const int item = order[static_cast<std::size_t>(j)];
    induced += e[j] * p.categories.row(item).transpose();
  }
  if (full) {
    // Spanning tree of the bipartite item/slot graph: the assignment edges
    // plus a staircase of zero-valued edges linking consecutive slots.
    std::vector<lp::BasisRef> tree;
    for (int j = 0; j < slots; ++j) tree.push_back(lp::BasisRef::column(var(order[static_cast<std::size_t>(j)], j)));
    for (int j = 0; j + 1 < slots; ++j) {
      tree.push_back(lp::BasisRef::column(var(order[static_cast<std::size_t>(j + 1)], j)));
    }
    for (std::size_t t = 0; t < tree.size(); ++t) basis[t] = tree[t];
  } else {
    // Same chain for the exposed slots, rooted at the slack of the first
    // unexposed item (or of the last item when every item is exposed);
    // all other unexposed items hang off their own slacks.
    std::vector<lp::BasisRef> tree;
    for (int j = 0; j < slots; ++j) tree.push_back(lp::BasisRef::column(var(order[static_cast<std::size_t>(j)], j)));
    for (int j = 0; j < slots && j + 1 < n; ++j) {
      tree.push_back(lp::BasisRef::column(var(order[static_cast<std::size_t>(j + 1)], j)));
    }
    for (int t = std::min(slots, n - 1); t < n; ++t) {
      tree.push_back(lp::BasisRef::slack(item_row[static_cast<std::size_t>(order[static_cast<std::size_t>(t)])]));
    }
    for (std::size_t t = 0; t < tree.size(); ++t) basis[t] = tree[t];
  }
  for (int c = 0; c < r; ++c) {
    const double d = induced[c] - q[c];
    basis[static_cast<std::size_t>(upper_row[static_cast<std::size_t>(c)])] =
        lp::BasisRef::column(out.eps_offset + c);
    basis[static_cast<std::size_t>(lower_row[static_cast<std::size_t>(c)])] =
        d >= 0.0 ? lp::BasisRef::slack(lower_row[static_cast<std::size_t>(c)])
                 : lp::BasisRef::slack(upper_row[static_cast<std::size_t>(c)]);
  }
  out.crash_basis = std::move(basis);
  return out;
}

struct RawSolve {
  Matrix values;
  double solver_objective = 0.0;
  double time_ms = 0.0;
  long iterations = 0;
};

inline RawSolve run_lp(const RankingProblem& p, bool full, const lp::SolverOptions& options) {
  require_valid(p);
  const auto start = std::chrono::steady_clock::now();
  const CalibrationLp built = build_lp(p, full);
  const lp::Result res = lp::solve(built.model, options, &built.crash_basis);
  if (res.status != lp::Status::optimal) {
    throw SolverFailure(std::string("calibration LP: ") + lp::to_string(res.status), res.iterations);
  }
  const auto n = static_cast<Eigen::Index>(p.n());
  RawSolve out;
  out.values.resize(n, built.slots);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < built.slots; ++j) {
      out.values(i, j) = res.x[static_cast<std::size_t>(i * built.slots + j)];
    }
  }
  out.solver_objective = -res.objective;
  out.iterations = res.iterations;
  out.time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

template <class Solution>
void fill_objective(const RankingProblem& p, const Matrix& values, const Vector& e, Solution& sol) {
  const Vector exposure = values * e;
  const Vector induced = p.categories.transpose() * exposure;
  sol.epsilon = (induced - p.target.probs()).cwiseAbs();
  sol.relevance = p.scores.dot(exposure);
  sol.objective = (1.0 - p.lambda) * sol.relevance - p.lambda * sol.epsilon.sum();
}

/// Tolerance used to accept raw simplex output before cleaning.
inline constexpr double kSolverOutputTolerance = 1e-7;

}  // namespace detail

/// Solves the full n x n form (zero exposure beyond slot k).
inline FullLpSolution solve_full(const RankingProblem& p, const lp::SolverOptions& options = {}) {
  const detail::RawSolve raw = detail::run_lp(p, /*full=*/true, options);
  FullLpSolution sol{sanitize_doubly_stochastic(raw.values, detail::kSolverOutputTolerance),
                     Vector(), 0.0, 0.0, raw.solver_objective, raw.time_ms, raw.iterations};
  detail::fill_objective(p, sol.matrix.values(), p.full_position_weights(), sol);
  return sol;
}

/// Solves the reduced n x k form over the exposed slots only.
inline LpSolution solve_reduced(const RankingProblem& p, const lp::SolverOptions& options = {}) {
  const detail::RawSolve raw = detail::run_lp(p, /*full=*/false, options);
  LpSolution sol{sanitize(raw.values, detail::kSolverOutputTolerance),
                 Vector(), 0.0, 0.0, raw.solver_objective, raw.time_ms, raw.iterations};
  detail::fill_objective(p, sol.matrix.values(), p.position_weights, sol);
  return sol;
}

}  // namespace excalibr
