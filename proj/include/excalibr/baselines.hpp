#pragma once

// Greedy calibration baselines and plain score sorting. Each returns a full
// permutation of the n candidates: the greedy prefix fills the k exposed
// slots and the remaining items follow in score order.

#include "excalibr/core_model.hpp"
#include "excalibr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace excalibr {

namespace detail {

// KL(q || (1-alpha) p + alpha q) on raw vectors; p need not be normalized
// exactly.
inline double smoothed_kl(const Vector& q, const Vector& p, double alpha) {
  double kl = 0.0;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    const double qi = q[i];
    if (qi <= 0.0) continue;
    const double pi = (1.0 - alpha) * p[i] + alpha * qi;
    if (pi <= 0.0) return std::numeric_limits<double>::infinity();
    kl += qi * (std::log(qi) - std::log(pi));
  }
  return std::max(kl, 0.0);
}

inline std::vector<ItemId> complete_by_score(const RankingProblem& p, std::vector<ItemId> prefix) {
  std::vector<char> used(p.n(), 0);
  for (ItemId id : prefix) used[static_cast<std::size_t>(id)] = 1;
  std::vector<ItemId> rest;
  for (std::size_t i = 0; i < p.n(); ++i) {
    if (!used[i]) rest.push_back(static_cast<ItemId>(i));
  }
  std::stable_sort(rest.begin(), rest.end(),
                   [&](ItemId a, ItemId b) { return p.scores[a] > p.scores[b]; });
  prefix.insert(prefix.end(), rest.begin(), rest.end());
  return prefix;
}

}  // namespace detail

/// Items by descending score; equal scores keep index order.
inline PermutationRanking score_sort(const RankingProblem& p) {
  return PermutationRanking(detail::complete_by_score(p, {}));
}

/// Set-selection greedy: grows a set of k items, each step adding the item
/// that maximizes (1-lambda) * sum of scores - lambda * KL(q || mean of the
/// set's category rows). Selection order is the ranking order.
inline PermutationRanking greedy_simple(const RankingProblem& p, double alpha = kDefaultKlSmoothing) {
  require_valid(p);
  const std::size_t n = p.n();
  const std::size_t k = p.k();
  const Vector& q = p.target.probs();
  const double lambda = p.lambda;

  std::vector<char> used(n, 0);
  std::vector<ItemId> chosen;
  Vector row_sum = Vector::Zero(static_cast<Eigen::Index>(p.r()));
  double score_sum = 0.0;
  for (std::size_t step = 0; step < k; ++step) {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_item = n;
    const double count = static_cast<double>(step + 1);
    for (std::size_t i = 0; i < n; ++i) {
      if (used[i]) continue;
      const auto ii = static_cast<Eigen::Index>(i);
      double obj = (1.0 - lambda) * (score_sum + p.scores[ii]);
      if (lambda > 0.0) {
        const Vector mix = (row_sum + p.categories.row(ii).transpose()) / count;
        obj -= lambda * detail::smoothed_kl(q, mix, alpha);
      }
      if (obj > best || best_item == n) {
        best = obj;
        best_item = i;
      }
    }
    used[best_item] = 1;
    chosen.push_back(static_cast<ItemId>(best_item));
    row_sum += p.categories.row(static_cast<Eigen::Index>(best_item)).transpose();
    score_sum += p.scores[static_cast<Eigen::Index>(best_item)];
  }
  return PermutationRanking(detail::complete_by_score(p, std::move(chosen)));
}

/// Position-weighted greedy: fills slots 1..k in order, each time choosing
/// the unused item maximizing (1-lambda) * sum_i s_{j_i} e_i - lambda *
/// KL(q || p(prefix)), where p(prefix) is the exposure-weighted category
/// mix of the prefix normalized by its total weight. Ties go to the lower
/// item index.
inline PermutationRanking greedy_weighted(const RankingProblem& p, double alpha = kDefaultKlSmoothing) {
  require_valid(p);
  const std::size_t n = p.n();
  const std::size_t k = p.k();
  const Vector& q = p.target.probs();
  const Vector& w = p.position_weights;
  const double lambda = p.lambda;

  std::vector<char> used(n, 0);
  std::vector<ItemId> chosen;
  Vector mix_sum = Vector::Zero(static_cast<Eigen::Index>(p.r()));
  double weight_sum = 0.0;
  double relevance = 0.0;
  for (std::size_t slot = 0; slot < k; ++slot) {
    const double ws = w[static_cast<Eigen::Index>(slot)];
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_item = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (used[i]) continue;
      const auto ii = static_cast<Eigen::Index>(i);
      double obj = (1.0 - lambda) * (relevance + p.scores[ii] * ws);
      if (lambda > 0.0) {
        const Vector mix = (mix_sum + ws * p.categories.row(ii).transpose()) / (weight_sum + ws);
        obj -= lambda * detail::smoothed_kl(q, mix, alpha);
      }
      if (obj > best || best_item == n) {
        best = obj;
        best_item = i;
      }
    }
    used[best_item] = 1;
    chosen.push_back(static_cast<ItemId>(best_item));
    const auto bi = static_cast<Eigen::Index>(best_item);
    mix_sum += ws * p.categories.row(bi).transpose();
    weight_sum += ws;
    relevance += p.scores[bi] * ws;
  }
  return PermutationRanking(detail::complete_by_score(p, std::move(chosen)));
}

}  // namespace excalibr
