#pragma once

// Evaluation quantities: induced category exposure, divergences, expected
// relevance and the ranking metrics used on held-out items.

#include "excalibr/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace excalibr {

inline constexpr double kDefaultKlSmoothing = 0.01;

using RelevantSet = std::unordered_set<ItemId>;

namespace detail {

inline void check_weights_fit(Eigen::Index positions, const Vector& weights, const char* what) {
  if (weights.size() > positions) {
    throw InvalidArgument(std::string(what) + ": " + std::to_string(weights.size()) +
                          " position weights for " + std::to_string(positions) + " positions");
  }
}

inline Eigen::Index category_row(const Matrix& categories, ItemId id, const char* what) {
  if (id < 0 || id >= categories.rows()) {
    throw InvalidArgument(std::string(what) + ": item " + std::to_string(id) + " outside category matrix");
  }
  return static_cast<Eigen::Index>(id);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Induced category distribution A' P e

/// Exposure-weighted category mix of a stochastic placement. `placement`
/// rows follow `row_items` (ids index rows of `categories`); its first
/// weights.size() columns are the exposed slots.
inline CategoryDistribution induced_distribution(const Matrix& categories, const Matrix& placement,
                                                 const std::vector<ItemId>& row_items,
                                                 const Vector& weights) {
  if (static_cast<Eigen::Index>(row_items.size()) != placement.rows()) {
    throw InvalidArgument("induced_distribution: row map does not match matrix");
  }
  detail::check_weights_fit(placement.cols(), weights, "induced_distribution");
  const Vector exposure = placement.leftCols(weights.size()) * weights;
  Vector p = Vector::Zero(categories.cols());
  for (std::size_t i = 0; i < row_items.size(); ++i) {
    const auto row = detail::category_row(categories, row_items[i], "induced_distribution");
    p += exposure[static_cast<Eigen::Index>(i)] * categories.row(row).transpose();
  }
  return CategoryDistribution(std::move(p));
}

inline CategoryDistribution induced_distribution(const Matrix& categories, const PartialStochasticMatrix& p,
                                                 const Vector& weights) {
  return induced_distribution(categories, p.values(), p.row_items(), weights);
}

inline CategoryDistribution induced_distribution(const Matrix& categories, const DoublyStochasticMatrix& p,
                                                 const Vector& weights) {
  return induced_distribution(categories, p.values(), p.item_map(), weights);
}

inline CategoryDistribution induced_distribution(const Matrix& categories, const PermutationRanking& ranking,
                                                 const Vector& weights) {
  if (weights.size() > static_cast<Eigen::Index>(ranking.size())) {
    throw InvalidArgument("induced_distribution: ranking shorter than position weights");
  }
  Vector p = Vector::Zero(categories.cols());
  for (Eigen::Index pos = 0; pos < weights.size(); ++pos) {
    const auto row = detail::category_row(categories, ranking.at(static_cast<std::size_t>(pos)),
                                          "induced_distribution");
    p += weights[pos] * categories.row(row).transpose();
  }
  return CategoryDistribution(std::move(p));
}

// ---------------------------------------------------------------------------
// Divergences

/// KL(q || p~) with p~ = (1 - alpha) p + alpha q. Terms with q_i = 0 vanish;
/// with alpha = 0 a zero p_i under positive q_i gives +infinity.
inline double kl_divergence(const CategoryDistribution& q, const CategoryDistribution& p,
                            double alpha = kDefaultKlSmoothing) {
  if (q.size() != p.size()) throw InvalidArgument("kl_divergence: length mismatch");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw InvalidArgument("kl_divergence: alpha outside [0,1)");
  double kl = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double qi = q[i];
    if (qi <= 0.0) continue;
    const double pi = (1.0 - alpha) * p[i] + alpha * qi;
    if (pi <= 0.0) return std::numeric_limits<double>::infinity();
    kl += qi * (std::log(qi) - std::log(pi));
  }
  return std::max(kl, 0.0);
}

inline double l1_deviation(const CategoryDistribution& q, const CategoryDistribution& p) {
  if (q.size() != p.size()) throw InvalidArgument("l1_deviation: length mismatch");
  return (q.probs() - p.probs()).cwiseAbs().sum();
}

// ---------------------------------------------------------------------------
// Relevance

inline double expected_relevance(const Vector& scores, const Matrix& placement,
                                 const std::vector<ItemId>& row_items, const Vector& weights) {
  if (static_cast<Eigen::Index>(row_items.size()) != placement.rows()) {
    throw InvalidArgument("expected_relevance: row map does not match matrix");
  }
  detail::check_weights_fit(placement.cols(), weights, "expected_relevance");
  const Vector exposure = placement.leftCols(weights.size()) * weights;
  double total = 0.0;
  for (std::size_t i = 0; i < row_items.size(); ++i) {
    const ItemId id = row_items[i];
    if (id < 0 || id >= scores.size()) throw InvalidArgument("expected_relevance: item outside score vector");
    total += scores[static_cast<Eigen::Index>(id)] * exposure[static_cast<Eigen::Index>(i)];
  }
  return total;
}

inline double expected_relevance(const Vector& scores, const PartialStochasticMatrix& p, const Vector& weights) {
  return expected_relevance(scores, p.values(), p.row_items(), weights);
}

inline double expected_relevance(const Vector& scores, const DoublyStochasticMatrix& p, const Vector& weights) {
  return expected_relevance(scores, p.values(), p.item_map(), weights);
}

inline double expected_relevance(const Vector& scores, const PermutationRanking& ranking, const Vector& weights) {
  if (weights.size() > static_cast<Eigen::Index>(ranking.size())) {
    throw InvalidArgument("expected_relevance: ranking shorter than position weights");
  }
  double total = 0.0;
  for (Eigen::Index pos = 0; pos < weights.size(); ++pos) {
    const ItemId id = ranking.at(static_cast<std::size_t>(pos));
    if (id < 0 || id >= scores.size()) throw InvalidArgument("expected_relevance: item outside score vector");
    total += scores[static_cast<Eigen::Index>(id)] * weights[pos];
  }
  return total;
}

// ---------------------------------------------------------------------------
// Ranking metrics on held-out items

/// NDCG@k with binary gains and 1/log2(position + 1) discounts, normalized by
/// the ideal DCG of min(k, |relevant|) relevant items.
inline double ndcg_at_k(const PermutationRanking& ranking, const RelevantSet& relevant, std::size_t k) {
  if (k == 0) throw InvalidArgument("ndcg_at_k: k must be >= 1");
  const std::size_t ideal_hits = std::min(k, relevant.size());
  if (ideal_hits == 0) return 0.0;
  double dcg = 0.0;
  const std::size_t depth = std::min(k, ranking.size());
  for (std::size_t pos = 0; pos < depth; ++pos) {
    if (relevant.count(ranking.at(pos))) dcg += 1.0 / std::log2(static_cast<double>(pos) + 2.0);
  }
  double ideal = 0.0;
  for (std::size_t pos = 0; pos < ideal_hits; ++pos) ideal += 1.0 / std::log2(static_cast<double>(pos) + 2.0);
  return dcg / ideal;
}

inline double mrr(const PermutationRanking& ranking, const RelevantSet& relevant, std::size_t k) {
  if (k == 0) throw InvalidArgument("mrr: k must be >= 1");
  const std::size_t depth = std::min(k, ranking.size());
  for (std::size_t pos = 0; pos < depth; ++pos) {
    if (relevant.count(ranking.at(pos))) return 1.0 / static_cast<double>(pos + 1);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Policy-level expectations

/// Theta-weighted KL of the per-permutation induced distributions. By
/// convexity this is never below the KL of the policy's mean distribution.
inline double expected_kl_of_policy(const RankingPolicy& policy, const Matrix& categories, const Vector& weights,
                                    const CategoryDistribution& q, double alpha = kDefaultKlSmoothing) {
  double total = 0.0;
  for (const auto& c : policy.components()) {
    total += c.theta * kl_divergence(q, induced_distribution(categories, c.permutation, weights), alpha);
  }
  return total;
}

/// Theta-weighted average of any per-permutation quantity.
template <class Fn>
double policy_expectation(const RankingPolicy& policy, Fn&& per_permutation) {
  double total = 0.0;
  for (const auto& c : policy.components()) total += c.theta * per_permutation(c.permutation);
  return total;
}

}  // namespace excalibr
