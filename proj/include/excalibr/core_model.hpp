#pragma once

// Domain types shared by the re-ranking engine: problems, stochastic
// matrices, permutations, policies, and the position-weight generators.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace excalibr {

/// Construction-time tolerance: inputs further than this from a stochasticity
/// invariant are rejected.
inline constexpr double kHardTolerance = 1e-6;
/// Arithmetic target: values produced inside the engine are renormalized to
/// this accuracy.
inline constexpr double kArithmeticTolerance = 1e-9;

/// Opaque item identifier. Within one RankingProblem, identifiers are the
/// row indices 0..n-1 of the score vector and category matrix.
using ItemId = std::int64_t;

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class SolverFailure : public Error {
 public:
  SolverFailure(const std::string& what, long iterations)
      : Error(what + " (after " + std::to_string(iterations) + " iterations)"),
        iterations_(iterations) {}
  long iterations() const { return iterations_; }

 private:
  long iterations_;
};

class CorruptSolution : public Error {
 public:
  using Error::Error;
};

class InconsistentInput : public Error {
 public:
  using Error::Error;
};

class DecompositionFailure : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class EmptyDataset : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline std::string fmt_num(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Position weights

enum class PositionWeightKind { log, sqrt, reciprocal };

inline PositionWeightKind parse_position_weight_kind(const std::string& name) {
  if (name == "log") return PositionWeightKind::log;
  if (name == "sqrt") return PositionWeightKind::sqrt;
  if (name == "reciprocal" || name == "inverse") return PositionWeightKind::reciprocal;
  throw InvalidArgument("unknown position weight kind '" + name + "'");
}

inline const char* to_string(PositionWeightKind kind) {
  switch (kind) {
    case PositionWeightKind::log:
      return "log";
    case PositionWeightKind::sqrt:
      return "sqrt";
    case PositionWeightKind::reciprocal:
      return "reciprocal";
  }
  return "?";
}

/// Normalized exposure weights for k slots: proportional to 1/log(j+1),
/// 1/sqrt(j) or 1/j for slot j = 1..k. The logarithm base cancels under
/// normalization; the natural log is used.
inline Vector make_position_weights(PositionWeightKind kind, std::size_t k) {
  if (k == 0) throw InvalidArgument("make_position_weights: k must be >= 1");
  Vector w(static_cast<Eigen::Index>(k));
  for (std::size_t j = 1; j <= k; ++j) {
    const double x = static_cast<double>(j);
    double v = 0.0;
    switch (kind) {
      case PositionWeightKind::log:
        v = 1.0 / std::log(x + 1.0);
        break;
      case PositionWeightKind::sqrt:
        v = 1.0 / std::sqrt(x);
        break;
      case PositionWeightKind::reciprocal:
        v = 1.0 / x;
        break;
    }
    w[static_cast<Eigen::Index>(j - 1)] = v;
  }
  return w / w.sum();
}

// ---------------------------------------------------------------------------
// CategoryDistribution

class CategoryDistribution {
 public:
  CategoryDistribution() = default;

  explicit CategoryDistribution(Vector probs) : probs_(std::move(probs)) {
    if (probs_.size() == 0) throw InvalidArgument("CategoryDistribution: empty");
    for (Eigen::Index i = 0; i < probs_.size(); ++i) {
      if (!std::isfinite(probs_[i]) || probs_[i] < -kHardTolerance) {
        throw InvalidArgument("CategoryDistribution: entry " + std::to_string(i) +
                              " is negative (" + detail::fmt_num(probs_[i]) + ")");
      }
    }
    const double s = probs_.sum();
    if (std::abs(s - 1.0) > kHardTolerance) {
      throw InvalidArgument("CategoryDistribution: sums to " + detail::fmt_num(s));
    }
    probs_ = probs_.cwiseMax(0.0);
  }

  static CategoryDistribution uniform(std::size_t r) {
    if (r == 0) throw InvalidArgument("CategoryDistribution::uniform: r must be >= 1");
    return CategoryDistribution(Vector::Constant(static_cast<Eigen::Index>(r), 1.0 / r));
  }

  const Vector& probs() const { return probs_; }
  std::size_t size() const { return static_cast<std::size_t>(probs_.size()); }
  double operator[](std::size_t i) const { return probs_[static_cast<Eigen::Index>(i)]; }

 private:
  Vector probs_;
};

// ---------------------------------------------------------------------------
// RankingProblem

/// One user's calibration instance. Only the nonzero prefix of the position
/// weights is stored; slots beyond k carry zero exposure.
struct RankingProblem {
  Vector scores;            // n
  Vector position_weights;  // k, positive, decreasing, sum 1
  Matrix categories;        // n x r, rows are distributions
  CategoryDistribution target;
  double lambda = 0.0;

  std::size_t n() const { return static_cast<std::size_t>(scores.size()); }
  std::size_t k() const { return static_cast<std::size_t>(position_weights.size()); }
  std::size_t r() const { return static_cast<std::size_t>(categories.cols()); }

  /// Position weights padded with zeros to length n.
  Vector full_position_weights() const {
    Vector e = Vector::Zero(scores.size());
    e.head(position_weights.size()) = position_weights;
    return e;
  }
};

/// Reports every violated problem invariant; an empty result means valid.
inline std::vector<std::string> validate_problem(const RankingProblem& p) {
  std::vector<std::string> out;
  const auto n = p.scores.size();
  const auto k = p.position_weights.size();
  if (n == 0) out.emplace_back("n must be positive");
  if (k == 0) out.emplace_back("k must be positive");
  if (k > n) out.push_back("k (" + std::to_string(k) + ") exceeds n (" + std::to_string(n) + ")");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(p.scores[i])) out.push_back("score " + std::to_string(i) + " is not finite");
  }

  double wsum = 0.0;
  for (Eigen::Index j = 0; j < k; ++j) {
    const double w = p.position_weights[j];
    wsum += w;
    if (!(w > 0.0)) out.push_back("position weight " + std::to_string(j) + " is not positive");
    if (j > 0 && !(w < p.position_weights[j - 1])) {
      out.push_back("position weight " + std::to_string(j) + " is not strictly decreasing");
    }
  }
  if (k > 0 && std::abs(wsum - 1.0) > kArithmeticTolerance) {
    out.push_back("position weights sum to " + detail::fmt_num(wsum));
  }

  if (p.categories.rows() != n) {
    out.push_back("A has " + std::to_string(p.categories.rows()) + " rows, expected " +
                  std::to_string(n));
  }
  if (p.categories.cols() == 0) out.emplace_back("A has no category columns");
  for (Eigen::Index i = 0; i < p.categories.rows(); ++i) {
    bool negative = false;
    for (Eigen::Index c = 0; c < p.categories.cols(); ++c) {
      const double a = p.categories(i, c);
      if (!(a >= 0.0) || a > 1.0 + kArithmeticTolerance) negative = true;
    }
    if (negative) out.push_back("row " + std::to_string(i) + " of A has entries outside [0,1]");
    const double s = p.categories.row(i).sum();
    if (std::abs(s - 1.0) > kArithmeticTolerance) {
      out.push_back("row " + std::to_string(i) + " of A sums to " + detail::fmt_num(s));
    }
  }

  const Vector& q = p.target.probs();
  if (static_cast<Eigen::Index>(q.size()) != p.categories.cols()) {
    out.push_back("target has length " + std::to_string(q.size()) + ", expected " +
                  std::to_string(p.categories.cols()));
  }
  for (Eigen::Index c = 0; c < q.size(); ++c) {
    if (!(q[c] >= 0.0)) out.push_back("target entry " + std::to_string(c) + " is negative");
  }
  if (q.size() > 0 && std::abs(q.sum() - 1.0) > kArithmeticTolerance) {
    out.push_back("target sums to " + detail::fmt_num(q.sum()));
  }

  if (!(p.lambda >= 0.0 && p.lambda <= 1.0)) out.emplace_back("lambda outside [0,1]");
  return out;
}

inline void require_valid(const RankingProblem& p) {
  const auto violations = validate_problem(p);
  if (violations.empty()) return;
  std::string msg = "invalid ranking problem:";
  for (const auto& v : violations) msg += " " + v + ";";
  throw InvalidArgument(msg);
}

// ---------------------------------------------------------------------------
// Stochastic matrices

namespace detail {

inline void check_item_ids(const std::vector<ItemId>& ids, Eigen::Index expected, const char* what) {
  if (static_cast<Eigen::Index>(ids.size()) != expected) {
    throw InvalidArgument(std::string(what) + ": item map has " + std::to_string(ids.size()) +
                          " entries, expected " + std::to_string(expected));
  }
  std::unordered_set<ItemId> seen(ids.begin(), ids.end());
  if (seen.size() != ids.size()) throw InvalidArgument(std::string(what) + ": duplicate item id");
}

inline std::vector<ItemId> iota_ids(Eigen::Index m) {
  std::vector<ItemId> ids(static_cast<std::size_t>(m));
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<ItemId>(i);
  return ids;
}

}  // namespace detail

/// Item-by-slot placement probabilities for the k exposed slots: columns sum
/// to one, rows sum to at most one.
class PartialStochasticMatrix {
 public:
  PartialStochasticMatrix(Matrix values, std::vector<ItemId> row_items,
                          double tolerance = kHardTolerance)
      : values_(std::move(values)), row_items_(std::move(row_items)) {
    detail::check_item_ids(row_items_, values_.rows(), "PartialStochasticMatrix");
    if (values_.cols() == 0) throw InvalidArgument("PartialStochasticMatrix: no columns");
    if (values_.cols() > values_.rows()) {
      throw InvalidArgument("PartialStochasticMatrix: more columns than rows");
    }
    for (Eigen::Index i = 0; i < values_.rows(); ++i) {
      for (Eigen::Index j = 0; j < values_.cols(); ++j) {
        if (!(values_(i, j) >= -tolerance)) {
          throw InvalidArgument("PartialStochasticMatrix: negative entry at (" +
                                std::to_string(i) + "," + std::to_string(j) + ")");
        }
      }
      const double rs = values_.row(i).sum();
      if (rs > 1.0 + tolerance) {
        throw InvalidArgument("PartialStochasticMatrix: row " + std::to_string(i) + " sums to " +
                              detail::fmt_num(rs));
      }
    }
    for (Eigen::Index j = 0; j < values_.cols(); ++j) {
      const double cs = values_.col(j).sum();
      if (std::abs(cs - 1.0) > tolerance) {
        throw InvalidArgument("PartialStochasticMatrix: column " + std::to_string(j) +
                              " sums to " + detail::fmt_num(cs));
      }
    }
  }

  explicit PartialStochasticMatrix(Matrix values)
      : PartialStochasticMatrix(values, detail::iota_ids(values.rows())) {}

  const Matrix& values() const { return values_; }
  const std::vector<ItemId>& row_items() const { return row_items_; }
  std::size_t rows() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values_.cols()); }

 private:
  Matrix values_;
  std::vector<ItemId> row_items_;
};

/// Square item-by-position matrix with unit row and column sums.
class DoublyStochasticMatrix {
 public:
  DoublyStochasticMatrix(Matrix values, std::vector<ItemId> item_map,
                         double tolerance = kHardTolerance)
      : values_(std::move(values)), item_map_(std::move(item_map)) {
    if (values_.rows() != values_.cols() || values_.rows() == 0) {
      throw InvalidArgument("DoublyStochasticMatrix: must be square and non-empty");
    }
    detail::check_item_ids(item_map_, values_.rows(), "DoublyStochasticMatrix");
    if (!(values_.minCoeff() >= -tolerance)) {
      throw InvalidArgument("DoublyStochasticMatrix: negative entry " +
                            detail::fmt_num(values_.minCoeff()));
    }
    const double row_err = (values_.rowwise().sum().array() - 1.0).abs().maxCoeff();
    const double col_err = (values_.colwise().sum().array() - 1.0).abs().maxCoeff();
    if (row_err > tolerance || col_err > tolerance) {
      throw InvalidArgument("DoublyStochasticMatrix: row/column sums deviate by " +
                            detail::fmt_num(std::max(row_err, col_err)));
    }
  }

  explicit DoublyStochasticMatrix(Matrix values)
      : DoublyStochasticMatrix(values, detail::iota_ids(values.rows())) {}

  const Matrix& values() const { return values_; }
  const std::vector<ItemId>& item_map() const { return item_map_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.rows()); }

  /// Largest deviation of any row or column sum from one.
  double stochasticity_error() const {
    const double row_err = (values_.rowwise().sum().array() - 1.0).abs().maxCoeff();
    const double col_err = (values_.colwise().sum().array() - 1.0).abs().maxCoeff();
    return std::max(row_err, col_err);
  }

 private:
  Matrix values_;
  std::vector<ItemId> item_map_;
};

// ---------------------------------------------------------------------------
// PermutationRanking

/// A deterministic ranking: position p (0-based) holds item order()[p].
class PermutationRanking {
 public:
  PermutationRanking() = default;

  explicit PermutationRanking(std::vector<ItemId> order) : order_(std::move(order)) {
    std::unordered_set<ItemId> seen(order_.begin(), order_.end());
    if (seen.size() != order_.size()) {
      throw InvalidArgument("PermutationRanking: an item appears more than once");
    }
  }

  const std::vector<ItemId>& order() const { return order_; }
  std::size_t size() const { return order_.size(); }
  ItemId at(std::size_t position) const { return order_.at(position); }

  /// 0/1 matrix with rows indexed by `rows` (item ids) and columns by position.
  Matrix to_matrix(const std::vector<ItemId>& rows) const {
    if (rows.size() != order_.size()) {
      throw InvalidArgument("PermutationRanking::to_matrix: row map size mismatch");
    }
    const auto m = static_cast<Eigen::Index>(order_.size());
    Matrix q = Matrix::Zero(m, m);
    for (std::size_t pos = 0; pos < order_.size(); ++pos) {
      const auto it = std::find(rows.begin(), rows.end(), order_[pos]);
      if (it == rows.end()) {
        throw InvalidArgument("PermutationRanking::to_matrix: item " +
                              std::to_string(order_[pos]) + " not in row map");
      }
      q(static_cast<Eigen::Index>(it - rows.begin()), static_cast<Eigen::Index>(pos)) = 1.0;
    }
    return q;
  }

  DoublyStochasticMatrix to_doubly_stochastic(const std::vector<ItemId>& rows) const {
    return DoublyStochasticMatrix(to_matrix(rows), rows);
  }

  friend bool operator==(const PermutationRanking& a, const PermutationRanking& b) {
    return a.order_ == b.order_;
  }

 private:
  std::vector<ItemId> order_;
};

// ---------------------------------------------------------------------------
// RankingPolicy

struct PolicyComponent {
  double theta = 0.0;
  PermutationRanking permutation;
};

/// Convex combination of permutations over a common item set. A deterministic
/// ranking is the single-component case.
class RankingPolicy {
 public:
  RankingPolicy(std::vector<ItemId> items, std::vector<PolicyComponent> components)
      : items_(std::move(items)), components_(std::move(components)) {
    detail::check_item_ids(items_, static_cast<Eigen::Index>(items_.size()), "RankingPolicy");
    if (components_.empty()) throw InvalidArgument("RankingPolicy: no components");
    const std::size_t m = items_.size();
    const std::size_t bound = m == 0 ? 1 : (m - 1) * (m - 1) + 1;
    if (components_.size() > bound) {
      throw InvalidArgument("RankingPolicy: " + std::to_string(components_.size()) +
                            " components exceeds (m-1)^2+1 = " + std::to_string(bound));
    }
    std::unordered_set<ItemId> item_set(items_.begin(), items_.end());
    double total = 0.0;
    for (const auto& c : components_) {
      if (!(c.theta > 0.0)) throw InvalidArgument("RankingPolicy: non-positive theta");
      total += c.theta;
      if (c.permutation.size() != m) {
        throw InvalidArgument("RankingPolicy: component covers " +
                              std::to_string(c.permutation.size()) + " items, expected " +
                              std::to_string(m));
      }
      for (ItemId id : c.permutation.order()) {
        if (!item_set.count(id)) {
          throw InvalidArgument("RankingPolicy: component ranks unknown item " + std::to_string(id));
        }
      }
    }
    if (std::abs(total - 1.0) > kHardTolerance) {
      throw InvalidArgument("RankingPolicy: thetas sum to " + detail::fmt_num(total));
    }
  }

  static RankingPolicy deterministic(const PermutationRanking& ranking) {
    return RankingPolicy(ranking.order(), {PolicyComponent{1.0, ranking}});
  }

  const std::vector<ItemId>& items() const { return items_; }
  const std::vector<PolicyComponent>& components() const { return components_; }
  std::size_t size() const { return components_.size(); }

 private:
  std::vector<ItemId> items_;
  std::vector<PolicyComponent> components_;
};

}  // namespace excalibr
