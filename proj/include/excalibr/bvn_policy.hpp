#pragma once

// From a solved placement matrix to an executable stochastic ranking policy:
// drop items that are never shown, complete the partial matrix to a doubly
// stochastic one, decompose it into a convex combination of permutations,
// and sample from the result.

#include "excalibr/core_model.hpp"
#include "excalibr/matching.hpp"
#include "excalibr/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace excalibr {

inline constexpr double kDefaultZeroRowThreshold = 1e-9;
inline constexpr double kDefaultResidualTolerance = 1e-9;

/// Removes rows whose total placement probability is below `threshold` and
/// renormalizes the columns. Item identifiers follow their rows.
inline PartialStochasticMatrix drop_zero_rows(const PartialStochasticMatrix& m,
                                              double threshold = kDefaultZeroRowThreshold) {
  const Matrix& v = m.values();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    if (v.row(i).sum() >= threshold) keep.push_back(i);
  }
  if (static_cast<Eigen::Index>(keep.size()) == v.rows()) return m;

  Matrix out(static_cast<Eigen::Index>(keep.size()), v.cols());
  std::vector<ItemId> items;
  items.reserve(keep.size());
  for (std::size_t r = 0; r < keep.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = v.row(keep[r]);
    items.push_back(m.row_items()[static_cast<std::size_t>(keep[r])]);
  }
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const double cs = out.col(j).sum();
    if (cs != 1.0) out.col(j) /= cs;
  }
  return PartialStochasticMatrix(std::move(out), std::move(items));
}

/// Completes an m x k partial stochastic matrix to an m x m doubly stochastic
/// one. The first k columns are copied unchanged; each appended column is
/// packed greedily from the largest remaining row deficit (lowest row index
/// on ties) until it sums to one.
inline DoublyStochasticMatrix augment_and_get_ds(const PartialStochasticMatrix& partial) {
  const Matrix& v = partial.values();
  const Eigen::Index m = v.rows();
  const Eigen::Index k = v.cols();
  if (k == m) return DoublyStochasticMatrix(v, partial.row_items());

  Vector deficit = (Vector::Ones(m) - v.rowwise().sum()).cwiseMax(0.0);
  const double expected = static_cast<double>(m - k);
  if (std::abs(deficit.sum() - expected) > kArithmeticTolerance * std::max<double>(1.0, static_cast<double>(m))) {
    throw InconsistentInput("augment_and_get_ds: row deficits total " + detail::fmt_num(deficit.sum()) +
                            ", expected " + detail::fmt_num(expected));
  }

  Matrix out = Matrix::Zero(m, m);
  out.leftCols(k) = v;
  for (Eigen::Index col = k; col < m; ++col) {
    double filled = 0.0;
    while (filled < 1.0) {
      Eigen::Index best = 0;
      const double largest = deficit.maxCoeff(&best);  // first maximum
      if (!(largest > 0.0)) break;
      if (largest + filled < 1.0) {
        out(best, col) += largest;
        filled += largest;
        deficit[best] = 0.0;
      } else {
        const double amount = 1.0 - filled;
        out(best, col) += amount;
        deficit[best] -= amount;
        filled = 1.0;
      }
    }
  }
  // Rounding leftovers belong to the last column.
  for (Eigen::Index i = 0; i < m; ++i) {
    if (deficit[i] > 0.0) out(i, m - 1) += deficit[i];
  }
  return DoublyStochasticMatrix(std::move(out), partial.row_items(), kArithmeticTolerance);
}

/// Birkhoff-von Neumann decomposition by repeated perfect matching on the
/// support of the residual. Each extracted permutation receives the smallest
/// residual entry on its support as its weight. Extraction stops once the
/// residual mass falls below `residual_tolerance`; weights are then
/// renormalized to sum to one.
inline RankingPolicy bvn_decompose(const DoublyStochasticMatrix& p,
                                   double residual_tolerance = kDefaultResidualTolerance) {
  constexpr double kZero = 1e-13;
  Matrix residual = p.values();
  const auto m = static_cast<Eigen::Index>(p.size());
  const auto mu = static_cast<std::size_t>(m);
  const std::size_t max_components = (mu - 1) * (mu - 1) + 1;
  // Mass that may be left unmatched purely from rounding of the input.
  const double slack = residual_tolerance + 4.0 * static_cast<double>(m) *
                                                (p.stochasticity_error() + static_cast<double>(m) * kZero);

  HopcroftKarp matcher(mu, mu);
  std::vector<PolicyComponent> components;
  std::vector<ItemId> order(mu);
  while (true) {
    const double mass = residual.sum();
    if (mass < residual_tolerance) break;

    matcher.clear_edges();
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) {
        if (residual(i, j) > kZero) matcher.add_edge(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      }
    }
    matcher.prune_matching();
    if (matcher.run() != mu) {
      if (mass <= slack) break;
      throw DecompositionFailure("bvn_decompose: no perfect matching on residual support with mass " +
                                 detail::fmt_num(mass));
    }
    if (components.size() == max_components) {
      throw DecompositionFailure("bvn_decompose: exceeded (m-1)^2+1 components");
    }

    double theta = std::numeric_limits<double>::infinity();
    Eigen::Index arg = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double val = residual(i, matcher.match_of_left(static_cast<std::size_t>(i)));
      if (val < theta) {
        theta = val;
        arg = i;
      }
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      const int j = matcher.match_of_left(static_cast<std::size_t>(i));
      double& cell = residual(i, j);
      cell -= theta;
      if (cell <= kZero || i == arg) cell = 0.0;
      order[static_cast<std::size_t>(j)] = p.item_map()[static_cast<std::size_t>(i)];
    }
    components.push_back({theta, PermutationRanking(order)});
  }
  if (components.empty()) throw DecompositionFailure("bvn_decompose: empty input mass");

  double total = 0.0;
  for (const auto& c : components) total += c.theta;
  for (auto& c : components) c.theta /= total;
  return RankingPolicy(p.item_map(), std::move(components));
}

/// Draws component i with probability theta_i. Deterministic in the seed.
inline const PermutationRanking& sample(const RankingPolicy& policy, std::uint64_t seed) {
  Rng rng(seed);
  const double u = rng.uniform();
  double acc = 0.0;
  const auto& comps = policy.components();
  for (const auto& c : comps) {
    acc += c.theta;
    if (u < acc) return c.permutation;
  }
  return comps.back().permutation;
}

/// Sum of theta_i Q^i with rows in the policy's item order.
inline DoublyStochasticMatrix expected_matrix(const RankingPolicy& policy) {
  const auto m = static_cast<Eigen::Index>(policy.items().size());
  Matrix out = Matrix::Zero(m, m);
  std::vector<Eigen::Index> row_of;
  ItemId max_id = 0;
  for (ItemId id : policy.items()) max_id = std::max(max_id, id);
  // Dense lookup when ids are small, which is the common case.
  const bool dense = max_id < 4 * m + 1024;
  if (dense) {
    row_of.assign(static_cast<std::size_t>(max_id) + 1, -1);
    for (Eigen::Index i = 0; i < m; ++i) row_of[static_cast<std::size_t>(policy.items()[static_cast<std::size_t>(i)])] = i;
  }
  for (const auto& c : policy.components()) {
    const auto& order = c.permutation.order();
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      Eigen::Index row = 0;
      if (dense) {
        row = row_of[static_cast<std::size_t>(order[pos])];
      } else {
        row = std::find(policy.items().begin(), policy.items().end(), order[pos]) - policy.items().begin();
      }
      out(row, static_cast<Eigen::Index>(pos)) += c.theta;
    }
  }
  return DoublyStochasticMatrix(std::move(out), policy.items());
}

// ---------------------------------------------------------------------------
// Policy text format
//
//   # excalibr policy v1
//   items <m> <id_1> ... <id_m>
//   components <l>
//   <theta_1> <item at position 1> ... <item at position m>
//   ...
//
// Weights are written with 17 significant digits so a round trip is exact.

inline void write_policy(std::ostream& os, const RankingPolicy& policy) {
  os << "# excalibr policy v1\n";
  os << "items " << policy.items().size();
  for (ItemId id : policy.items()) os << ' ' << id;
  os << "\ncomponents " << policy.size() << '\n';
  const auto old_precision = os.precision(17);
  for (const auto& c : policy.components()) {
    os << c.theta;
    for (ItemId id : c.permutation.order()) os << ' ' << id;
    os << '\n';
  }
  os.precision(old_precision);
}

inline RankingPolicy read_policy(std::istream& is) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(is, line)) {
      ++line_no;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      return true;
    }
    return false;
  };

  if (!next_line()) throw ParseError("policy: missing items line", line_no);
  std::istringstream items_in(line);
  std::string tag;
  std::size_t m = 0;
  if (!(items_in >> tag >> m) || tag != "items") throw ParseError("policy: expected 'items <m> ...'", line_no);
  std::vector<ItemId> items(m);
  for (auto& id : items) {
    if (!(items_in >> id)) throw ParseError("policy: too few item ids", line_no);
  }

  if (!next_line()) throw ParseError("policy: missing components line", line_no);
  std::istringstream comp_in(line);
  std::size_t l = 0;
  if (!(comp_in >> tag >> l) || tag != "components") {
    throw ParseError("policy: expected 'components <l>'", line_no);
  }
  std::vector<PolicyComponent> comps;
  comps.reserve(l);
  for (std::size_t c = 0; c < l; ++c) {
    if (!next_line()) throw ParseError("policy: missing component line", line_no);
    std::istringstream in(line);
    double theta = 0.0;
    if (!(in >> theta)) throw ParseError("policy: bad theta", line_no);
    std::vector<ItemId> order(m);
    for (auto& id : order) {
      if (!(in >> id)) throw ParseError("policy: too few positions", line_no);
    }
    try {
      comps.push_back({theta, PermutationRanking(std::move(order))});
    } catch (const InvalidArgument& e) {
      throw ParseError(std::string("policy: ") + e.what(), line_no);
    }
  }
  return RankingPolicy(std::move(items), std::move(comps));
}

}  // namespace excalibr
