#pragma once

// Revised primal simplex for small dense-basis linear programs:
//
//   minimize  c'x   subject to  a_i'x {<=,=,>=} b_i,   x >= 0.
//
// The constraint matrix is stored column-sparse; the basis inverse is kept
// dense and updated in product form, with periodic refactorization. Pricing
// is Dantzig's rule with a Harris two-pass ratio test; a run of degenerate
// pivots switches to Bland's rule until progress resumes.

#include "excalibr/core_model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace excalibr::lp {

enum class RowSense { less_equal, equal, greater_equal };

/// Column-wise model builder.
class Model {
 public:
  int add_row(RowSense sense, double rhs) {
    senses_.push_back(sense);
    rhs_.push_back(rhs);
    return static_cast<int>(rhs_.size()) - 1;
  }

  /// Entries must reference rows already added; duplicate rows are summed.
  int add_column(double cost, const std::vector<int>& rows, const std::vector<double>& values) {
    if (rows.size() != values.size()) throw InvalidArgument("lp::Model: entry size mismatch");
    costs_.push_back(cost);
    for (std::size_t e = 0; e < rows.size(); ++e) {
      if (rows[e] < 0 || rows[e] >= num_rows()) throw InvalidArgument("lp::Model: row out of range");
      if (values[e] == 0.0) continue;
      row_index_.push_back(rows[e]);
      value_.push_back(values[e]);
    }
    col_start_.push_back(static_cast<int>(row_index_.size()));
    return num_columns() - 1;
  }

  int num_rows() const { return static_cast<int>(rhs_.size()); }
  int num_columns() const { return static_cast<int>(costs_.size()); }
  std::size_t num_nonzeros() const { return value_.size(); }

  RowSense sense(int row) const { return senses_[static_cast<std::size_t>(row)]; }
  double rhs(int row) const { return rhs_[static_cast<std::size_t>(row)]; }
  double cost(int col) const { return costs_[static_cast<std::size_t>(col)]; }
  int col_begin(int col) const { return col_start_[static_cast<std::size_t>(col)]; }
  int col_end(int col) const { return col_start_[static_cast<std::size_t>(col) + 1]; }
  int entry_row(int e) const { return row_index_[static_cast<std::size_t>(e)]; }
  double entry_value(int e) const { return value_[static_cast<std::size_t>(e)]; }

 private:
  std::vector<RowSense> senses_;
  std::vector<double> rhs_;
  std::vector<double> costs_;
  std::vector<int> col_start_{0};
  std::vector<int> row_index_;
  std::vector<double> value_;
};

/// A basis member: either a structural column or the slack/surplus of a row.
struct BasisRef {
  enum class Kind { structural, logical } kind = Kind::structural;
  int index = 0;

  static BasisRef column(int j) { return {Kind::structural, j}; }
  static BasisRef slack(int row) { return {Kind::logical, row}; }
};

struct SolverOptions {
  double optimality_tolerance = 1e-9;
  double feasibility_tolerance = 1e-9;
  double pivot_tolerance = 1e-9;
  int refactor_interval = 64;
  long max_iterations = 0;  // 0 selects a size-based limit
  int degenerate_run_before_bland = 64;
};

enum class Status { optimal, infeasible, unbounded, iteration_limit };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::optimal:
      return "optimal";
    case Status::infeasible:
      return "infeasible";
    case Status::unbounded:
      return "unbounded";
    case Status::iteration_limit:
      return "iteration limit";
  }
  return "?";
}

struct Result {
  Status status = Status::iteration_limit;
  std::vector<double> x;  // structural values
  double objective = 0.0;
  long iterations = 0;
  long phase_one_iterations = 0;
  bool used_start_basis = false;
};

namespace detail {

class RevisedSimplex {
 public:
  RevisedSimplex(const Model& model, const SolverOptions& options)
      : model_(model), opt_(options), m_(model.num_rows()), ns_(model.num_columns()) {
    build_standard_form();
    max_iterations_ = opt_.max_iterations > 0
                          ? opt_.max_iterations
                          : 50L * (static_cast<long>(m_) + static_cast<long>(total_cols())) + 1000;
  }

  Result solve(const std::vector<BasisRef>* start) {
    Result res;
    bool have_basis = false;
    if (start != nullptr) have_basis = try_start_basis(*start);
    res.used_start_basis = have_basis;

    if (!have_basis) {
      artificial_basis();
      std::vector<double> phase1(static_cast<std::size_t>(total_cols()), 0.0);
      for (int j = first_artificial_; j < total_cols(); ++j) phase1[static_cast<std::size_t>(j)] = 1.0;
      const Status s1 = iterate(phase1, /*allow_artificial=*/true);
      res.phase_one_iterations = iterations_;
      if (s1 == Status::iteration_limit) return finish(res, s1);
      double infeasibility = 0.0;
      for (int i = 0; i < m_; ++i) {
        if (is_artificial(head_[static_cast<std::size_t>(i)])) infeasibility += std::max(0.0, xb_[i]);
      }
      if (infeasibility > std::max(1e-7, 1e-9 * rhs_scale_)) return finish(res, Status::infeasible);
      drive_out_artificials();
    }

    std::vector<double> phase2(static_cast<std::size_t>(total_cols()), 0.0);
    double cmax = 0.0;
    for (int j = 0; j < ns_; ++j) cmax = std::max(cmax, std::abs(model_.cost(j)));
    const double scale = cmax > 0.0 ? 1.0 / cmax : 1.0;
    for (int j = 0; j < ns_; ++j) phase2[static_cast<std::size_t>(j)] = model_.cost(j) * scale;
    const Status s2 = iterate(phase2, /*allow_artificial=*/false);
    return finish(res, s2);
  }

 private:
  int total_cols() const { return static_cast<int>(cost_cols_.size()) - 1; }
  bool is_artificial(int j) const { return j >= first_artificial_; }

  // Standard form: every row is scaled so that b >= 0. Columns are structural
  // (0..ns-1), one logical per inequality row, then artificials.
  void build_standard_form() {
    sign_.assign(static_cast<std::size_t>(m_), 1.0);
    b_.resize(m_);
    rhs_scale_ = 1.0;
    for (int i = 0; i < m_; ++i) {
      const double rhs = model_.rhs(i);
      if (rhs < 0.0) sign_[static_cast<std::size_t>(i)] = -1.0;
      b_[i] = rhs * sign_[static_cast<std::size_t>(i)];
      rhs_scale_ = std::max(rhs_scale_, std::abs(rhs));
    }

    cost_cols_.assign(1, 0);
    for (int j = 0; j < ns_; ++j) {
      for (int e = model_.col_begin(j); e < model_.col_end(j); ++e) {
        const int row = model_.entry_row(e);
        rows_.push_back(row);
        vals_.push_back(model_.entry_value(e) * sign_[static_cast<std::size_t>(row)]);
      }
      cost_cols_.push_back(static_cast<int>(rows_.size()));
    }
    logical_of_row_.assign(static_cast<std::size_t>(m_), -1);
    for (int i = 0; i < m_; ++i) {
      const RowSense sense = model_.sense(i);
      if (sense == RowSense::equal) continue;
      const double coef = (sense == RowSense::less_equal ? 1.0 : -1.0) * sign_[static_cast<std::size_t>(i)];
      logical_of_row_[static_cast<std::size_t>(i)] = total_cols();
      rows_.push_back(i);
      vals_.push_back(coef);
      cost_cols_.push_back(static_cast<int>(rows_.size()));
    }
    first_artificial_ = total_cols();
  }

  void add_artificial(int row) {
    rows_.push_back(row);
    vals_.push_back(1.0);
    cost_cols_.push_back(static_cast<int>(rows_.size()));
  }

  void reset_basis_tracking() {
    pos_.assign(static_cast<std::size_t>(total_cols()), -1);
    for (int i = 0; i < m_; ++i) pos_[static_cast<std::size_t>(head_[static_cast<std::size_t>(i)])] = i;
  }

  bool try_start_basis(const std::vector<BasisRef>& start) {
    if (static_cast<int>(start.size()) != m_) return false;
    head_.assign(static_cast<std::size_t>(m_), -1);
    std::vector<char> used(static_cast<std::size_t>(total_cols()), 0);
    for (int i = 0; i < m_; ++i) {
      const BasisRef& ref = start[static_cast<std::size_t>(i)];
      int col = -1;
      if (ref.kind == BasisRef::Kind::structural) {
        if (ref.index < 0 || ref.index >= ns_) return false;
        col = ref.index;
      } else {
        if (ref.index < 0 || ref.index >= m_) return false;
        col = logical_of_row_[static_cast<std::size_t>(ref.index)];
        if (col < 0) return false;
      }
      if (used[static_cast<std::size_t>(col)]) return false;
      used[static_cast<std::size_t>(col)] = 1;
      head_[static_cast<std::size_t>(i)] = col;
    }
    reset_basis_tracking();
    if (!refactor()) return false;
    for (int i = 0; i < m_; ++i) {
      if (xb_[i] < -opt_.feasibility_tolerance * std::max(1.0, rhs_scale_)) return false;
    }
    xb_ = xb_.cwiseMax(0.0);
    return true;
  }

  void artificial_basis() {
    // Drop artificials from an earlier attempt.
    cost_cols_.resize(static_cast<std::size_t>(first_artificial_) + 1);
    rows_.resize(static_cast<std::size_t>(cost_cols_.back()));
    vals_.resize(static_cast<std::size_t>(cost_cols_.back()));
    head_.assign(static_cast<std::size_t>(m_), -1);
    for (int i = 0; i < m_; ++i) {
      const int logical = logical_of_row_[static_cast<std::size_t>(i)];
      if (logical >= 0 && vals_[static_cast<std::size_t>(cost_cols_[static_cast<std::size_t>(logical)])] > 0.0) {
        head_[static_cast<std::size_t>(i)] = logical;
      } else {
        head_[static_cast<std::size_t>(i)] = total_cols();
        add_artificial(i);
      }
    }
    reset_basis_tracking();
    if (!refactor()) throw SolverFailure("simplex: singular slack basis", iterations_);
  }

  Eigen::VectorXd column(int j) const {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(m_);
    for (int e = cost_cols_[static_cast<std::size_t>(j)]; e < cost_cols_[static_cast<std::size_t>(j) + 1]; ++e) {
      a[rows_[static_cast<std::size_t>(e)]] += vals_[static_cast<std::size_t>(e)];
    }
    return a;
  }

  bool refactor() {
    Eigen::MatrixXd basis(m_, m_);
    for (int i = 0; i < m_; ++i) basis.col(i) = column(head_[static_cast<std::size_t>(i)]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(basis);
    const auto& lu_mat = lu.matrixLU();
    double dmax = 0.0;
    double dmin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m_; ++i) {
      dmax = std::max(dmax, std::abs(lu_mat(i, i)));
      dmin = std::min(dmin, std::abs(lu_mat(i, i)));
    }
    if (m_ > 0 && !(dmin > 1e-11 * std::max(1.0, dmax))) return false;
    binv_ = lu.inverse();
    xb_ = binv_ * b_;
    updates_since_refactor_ = 0;
    return true;
  }

  void pivot(int leave_row, int enter_col, const Eigen::VectorXd& alpha, double theta) {
    xb_ -= theta * alpha;
    xb_[leave_row] = theta;
    for (int i = 0; i < m_; ++i) {
      if (xb_[i] < 0.0) xb_[i] = 0.0;
    }

    const double piv = alpha[leave_row];
    binv_.row(leave_row) /= piv;
    Eigen::VectorXd a = alpha;
    a[leave_row] = 0.0;
    binv_.noalias() -= a * binv_.row(leave_row);

    pos_[static_cast<std::size_t>(head_[static_cast<std::size_t>(leave_row)])] = -1;
    head_[static_cast<std::size_t>(leave_row)] = enter_col;
    pos_[static_cast<std::size_t>(enter_col)] = leave_row;
    ++updates_since_refactor_;
    ++iterations_;
  }

  Status iterate(const std::vector<double>& cost, bool allow_artificial) {
    const int ncols = total_cols();
    const int enter_limit = allow_artificial ? ncols : first_artificial_;
    int degenerate_run = 0;
    bool bland = false;
    bool verified = false;

    while (true) {
      if (iterations_ >= max_iterations_) return Status::iteration_limit;
      if (updates_since_refactor_ >= opt_.refactor_interval) {
        if (!refactor()) throw SolverFailure("simplex: basis became singular", iterations_);
        xb_ = xb_.cwiseMax(0.0);
      }

      Eigen::VectorXd cb(m_);
      for (int i = 0; i < m_; ++i) cb[i] = cost[static_cast<std::size_t>(head_[static_cast<std::size_t>(i)])];
      const Eigen::VectorXd y = binv_.transpose() * cb;

      int enter = -1;
      double best = -opt_.optimality_tolerance;
      for (int j = 0; j < enter_limit; ++j) {
        if (pos_[static_cast<std::size_t>(j)] >= 0) continue;
        double d = cost[static_cast<std::size_t>(j)];
        for (int e = cost_cols_[static_cast<std::size_t>(j)]; e < cost_cols_[static_cast<std::size_t>(j) + 1]; ++e) {
          d -= y[rows_[static_cast<std::size_t>(e)]] * vals_[static_cast<std::size_t>(e)];
        }
        if (bland) {
          if (d < -opt_.optimality_tolerance) {
            best = d;
            enter = j;
            break;
          }
        } else if (d < best) {
          best = d;
          enter = j;
        }
      }

      if (enter < 0) {
        // Confirm optimality against a fresh factorization before stopping.
        if (!verified && updates_since_refactor_ > 0) {
          if (!refactor()) throw SolverFailure("simplex: basis became singular", iterations_);
          xb_ = xb_.cwiseMax(0.0);
          verified = true;
          continue;
        }
        return Status::optimal;
      }
      verified = false;

      const Eigen::VectorXd a = column(enter);
      const Eigen::VectorXd alpha = binv_ * a;

      int leave = -1;
      // A basic artificial in phase two must stay at zero: it leaves first.
      if (!allow_artificial) {
        for (int i = 0; i < m_; ++i) {
          if (is_artificial(head_[static_cast<std::size_t>(i)]) && std::abs(alpha[i]) > opt_.pivot_tolerance) {
            leave = i;
            break;
          }
        }
      }
      double theta = 0.0;
      if (leave < 0) {
        if (bland) {
          double min_ratio = std::numeric_limits<double>::infinity();
          for (int i = 0; i < m_; ++i) {
            if (alpha[i] <= opt_.pivot_tolerance) continue;
            const double ratio = std::max(0.0, xb_[i]) / alpha[i];
            if (ratio < min_ratio - 1e-12 ||
                (ratio <= min_ratio + 1e-12 && leave >= 0 &&
                 head_[static_cast<std::size_t>(i)] < head_[static_cast<std::size_t>(leave)])) {
              min_ratio = std::min(min_ratio, ratio);
              leave = i;
            }
          }
          if (leave >= 0) theta = std::max(0.0, xb_[leave]) / alpha[leave];
        } else {
          const double tol = opt_.feasibility_tolerance;
          double bound = std::numeric_limits<double>::infinity();
          for (int i = 0; i < m_; ++i) {
            if (alpha[i] > opt_.pivot_tolerance) bound = std::min(bound, (xb_[i] + tol) / alpha[i]);
          }
          double best_alpha = 0.0;
          for (int i = 0; i < m_; ++i) {
            if (alpha[i] > opt_.pivot_tolerance && xb_[i] / alpha[i] <= bound && alpha[i] > best_alpha) {
              best_alpha = alpha[i];
              leave = i;
            }
          }
          if (leave >= 0) theta = std::max(0.0, xb_[leave] / alpha[leave]);
        }
        if (leave < 0) return Status::unbounded;
      }

      const double progress = theta * std::abs(best);
      if (theta <= 1e-12 || progress <= 1e-15) {
        if (++degenerate_run >= opt_.degenerate_run_before_bland) bland = true;
      } else {
        degenerate_run = 0;
        bland = false;
      }
      pivot(leave, enter, alpha, theta);
    }
  }

  void drive_out_artificials() {
    for (int r = 0; r < m_; ++r) {
      if (!is_artificial(head_[static_cast<std::size_t>(r)])) continue;
      const Eigen::VectorXd rho = binv_.row(r).transpose();
      int enter = -1;
      double best = opt_.pivot_tolerance * 100.0;
      for (int j = 0; j < first_artificial_; ++j) {
        if (pos_[static_cast<std::size_t>(j)] >= 0) continue;
        double v = 0.0;
        for (int e = cost_cols_[static_cast<std::size_t>(j)]; e < cost_cols_[static_cast<std::size_t>(j) + 1]; ++e) {
          v += rho[rows_[static_cast<std::size_t>(e)]] * vals_[static_cast<std::size_t>(e)];
        }
        if (std::abs(v) > best) {
          best = std::abs(v);
          enter = j;
        }
      }
      if (enter < 0) continue;  // redundant row; its artificial stays at zero
      const Eigen::VectorXd alpha = binv_ * column(enter);
      pivot(r, enter, alpha, 0.0);
    }
    if (!refactor()) throw SolverFailure("simplex: singular basis after phase one", iterations_);
    xb_ = xb_.cwiseMax(0.0);
  }

  Result& finish(Result& res, Status status) {
    res.status = status;
    res.iterations = iterations_;
    res.x.assign(static_cast<std::size_t>(ns_), 0.0);
    for (int i = 0; i < m_; ++i) {
      const int j = head_[static_cast<std::size_t>(i)];
      if (j < ns_) res.x[static_cast<std::size_t>(j)] = std::max(0.0, xb_[i]);
    }
    double obj = 0.0;
    for (int j = 0; j < ns_; ++j) obj += model_.cost(j) * res.x[static_cast<std::size_t>(j)];
    res.objective = obj;
    return res;
  }

  const Model& model_;
  SolverOptions opt_;
  int m_;
  int ns_;
  long max_iterations_ = 0;
  long iterations_ = 0;
  int updates_since_refactor_ = 0;
  double rhs_scale_ = 1.0;

  std::vector<double> sign_;
  Eigen::VectorXd b_;
  std::vector<int> cost_cols_;  // column start offsets into rows_/vals_
  std::vector<int> rows_;
  std::vector<double> vals_;
  std::vector<int> logical_of_row_;
  int first_artificial_ = 0;

  std::vector<int> head_;  // basic column per row
  std::vector<int> pos_;   // basis row per column, -1 if nonbasic
  Eigen::MatrixXd binv_;
  Eigen::VectorXd xb_;
};

}  // namespace detail

/// Minimizes the model. `start`, when given, is tried as an initial basis
/// (one member per row); a singular or infeasible start falls back to a
/// two-phase solve from an artificial basis.
inline Result solve(const Model& model, const SolverOptions& options = {},
                    const std::vector<BasisRef>* start = nullptr) {
  detail::RevisedSimplex simplex(model, options);
  return simplex.solve(start);
}

}  // namespace excalibr::lp
