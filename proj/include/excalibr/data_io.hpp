#pragma once

// Dataset ingestion and experiment preparation: interaction and catalog
// files, user and history/holdout splits, category matrices, target
// distributions, candidate assembly from precomputed scores, single-problem
// files and synthetic instances.
//
// File formats (delimiter ',' unless stated; first line is a header):
//
//   interactions   user,item,rating[,timestamp]
//   catalog        item,title,genres        genres '|'-separated; the
//                                            release year is the trailing
//                                            "(YYYY)" of the title
//   scores         user,item,score
//   categories     item,<name_1>,...,<name_r>   one weight row per item
//
// Quoted fields ("...", with "" as an escaped quote) are accepted anywhere.

#include "excalibr/core_model.hpp"
#include "excalibr/metrics.hpp"
#include "excalibr/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace excalibr {

// ---------------------------------------------------------------------------
// Records

struct ItemMeta {
  std::string title;
  std::vector<std::string> genres;
  std::optional<int> year;
};

using Catalog = std::map<ItemId, ItemMeta>;

struct Interaction {
  ItemId item = 0;
  double rating = 0.0;
  bool positive = false;
};

struct UserRecord {
  std::int64_t user = 0;
  std::vector<Interaction> interactions;

  std::vector<ItemId> positives() const {
    std::vector<ItemId> out;
    for (const auto& it : interactions) {
      if (it.positive) out.push_back(it.item);
    }
    std::sort(out.begin(), out.end());
    return out;
  }
};

struct InteractionDataset {
  std::vector<UserRecord> users;  // ascending user id
  Catalog items;

  const UserRecord* find_user(std::int64_t id) const {
    const auto it = std::lower_bound(users.begin(), users.end(), id,
                                     [](const UserRecord& u, std::int64_t v) { return u.user < v; });
    return it != users.end() && it->user == id ? &*it : nullptr;
  }

  /// Positive interactions per item, counted over `users_subset` (all users
  /// when empty).
  std::map<ItemId, std::size_t> positive_counts(const std::vector<std::int64_t>& users_subset = {}) const {
    std::map<ItemId, std::size_t> counts;
    for (const auto& [id, meta] : items) counts[id] = 0;
    auto tally = [&](const UserRecord& u) {
      for (const auto& it : u.interactions) {
        if (it.positive) ++counts[it.item];
      }
    };
    if (users_subset.empty()) {
      for (const auto& u : users) tally(u);
    } else {
      for (auto id : users_subset) {
        if (const auto* u = find_user(id)) tally(*u);
      }
    }
    return counts;
  }
};

// ---------------------------------------------------------------------------
// Delimited text

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == delim) {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline std::int64_t parse_int(const std::string& field, std::size_t line, const char* what) {
  const std::string t = trim(field);
  std::size_t used = 0;
  std::int64_t v = 0;
  try {
    v = std::stoll(t, &used);
  } catch (const std::exception&) {
    throw ParseError(std::string("bad ") + what + " '" + field + "'", line);
  }
  if (used != t.size()) throw ParseError(std::string("bad ") + what + " '" + field + "'", line);
  return v;
}

inline double parse_double(const std::string& field, std::size_t line, const char* what) {
  const std::string t = trim(field);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw ParseError(std::string("bad ") + what + " '" + field + "'", line);
  }
  if (used != t.size() || !std::isfinite(v)) throw ParseError(std::string("bad ") + what + " '" + field + "'", line);
  return v;
}

/// Calls fn(fields, line_number) for every non-empty data line after the header.
template <class Fn>
void for_each_record(const std::string& path, char delim, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    fn(split_fields(line, delim), line_no);
  }
}

inline std::optional<int> year_from_title(const std::string& title) {
  const std::string t = trim(title);
  if (t.size() < 6 || t.back() != ')') return std::nullopt;
  const std::string digits = t.substr(t.size() - 5, 4);
  if (t[t.size() - 6] != '(') return std::nullopt;
  for (char c : digits) {
    if (c < '0' || c > '9') return std::nullopt;
  }
  return std::stoi(digits);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Loading

inline Catalog load_catalog(const std::string& path, char delim = ',') {
  Catalog catalog;
  detail::for_each_record(path, delim, [&](const std::vector<std::string>& f, std::size_t line) {
    if (f.size() < 3) throw ParseError("catalog row needs item,title,genres", line);
    const ItemId id = detail::parse_int(f[0], line, "item id");
    ItemMeta meta;
    meta.title = f[1];
    meta.year = detail::year_from_title(f[1]);
    std::stringstream gs(f[2]);
    std::string g;
    while (std::getline(gs, g, '|')) {
      g = detail::trim(g);
      if (!g.empty() && g != "(no genres listed)") meta.genres.push_back(g);
    }
    if (!catalog.emplace(id, std::move(meta)).second) throw ParseError("duplicate catalog item", line);
  });
  return catalog;
}

/// Reads user,item,rating rows. Ratings strictly above `positive_threshold`
/// are positive; users with fewer than `min_interactions` rows are dropped.
/// With a catalog, every item must appear in it; without one the catalog is
/// the set of items seen.
inline InteractionDataset load_interactions(const std::string& path, double positive_threshold = 3.5,
                                            std::size_t min_interactions = 5,
                                            const Catalog* catalog = nullptr, char delim = ',') {
  std::map<std::int64_t, UserRecord> users;
  std::set<std::pair<std::int64_t, ItemId>> seen;
  Catalog items;
  if (catalog != nullptr) items = *catalog;
  detail::for_each_record(path, delim, [&](const std::vector<std::string>& f, std::size_t line) {
    if (f.size() < 3) throw ParseError("interaction row needs user,item,rating", line);
    const std::int64_t user = detail::parse_int(f[0], line, "user id");
    const ItemId item = detail::parse_int(f[1], line, "item id");
    const double rating = detail::parse_double(f[2], line, "rating");
    if (!seen.emplace(user, item).second) {
      throw ParseError("duplicate (user, item) pair " + std::to_string(user) + "," + std::to_string(item), line);
    }
    if (catalog != nullptr) {
      if (!catalog->count(item)) throw ParseError("item " + std::to_string(item) + " not in catalog", line);
    } else {
      items.emplace(item, ItemMeta{});
    }
    auto& rec = users[user];
    rec.user = user;
    rec.interactions.push_back({item, rating, rating > positive_threshold});
  });

  InteractionDataset ds;
  ds.items = std::move(items);
  for (auto& [id, rec] : users) {
    if (rec.interactions.size() >= min_interactions) ds.users.push_back(std::move(rec));
  }
  if (ds.users.empty()) throw EmptyDataset("no users left in '" + path + "' after filtering");
  return ds;
}

/// Violations of the dataset invariants (duplicate pairs, unknown items).
inline std::vector<std::string> validate_dataset(const InteractionDataset& d) {
  std::vector<std::string> out;
  for (const auto& u : d.users) {
    std::set<ItemId> items;
    for (const auto& it : u.interactions) {
      if (!items.insert(it.item).second) {
        out.push_back("user " + std::to_string(u.user) + " has item " + std::to_string(it.item) + " twice");
      }
      if (!d.items.count(it.item)) {
        out.push_back("user " + std::to_string(u.user) + " references unknown item " + std::to_string(it.item));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splits

struct UserSplit {
  std::vector<std::int64_t> train;
  std::vector<std::int64_t> validation;
  std::vector<std::int64_t> test;
};

/// Random disjoint partition of all users. With explicit validation/test
/// counts the remainder is training; when both counts are zero, train_frac of
/// the users train and the rest is halved between validation and test.
inline UserSplit split_users(const InteractionDataset& d, double train_frac, std::size_t val_count,
                             std::size_t test_count, std::uint64_t seed) {
  std::vector<std::int64_t> ids;
  ids.reserve(d.users.size());
  for (const auto& u : d.users) ids.push_back(u.user);
  const std::size_t total = ids.size();
  if (val_count == 0 && test_count == 0) {
    if (!(train_frac >= 0.0 && train_frac <= 1.0)) throw InvalidArgument("split_users: train_frac outside [0,1]");
    const auto train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(total)));
    val_count = (total - train) / 2;
    test_count = total - train - val_count;
  }
  if (val_count + test_count > total) {
    throw InvalidArgument("split_users: " + std::to_string(val_count + test_count) +
                          " held-out users requested from " + std::to_string(total));
  }
  Rng rng(seed);
  rng.shuffle(ids);
  UserSplit s;
  s.validation.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(val_count));
  s.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(val_count),
                ids.begin() + static_cast<std::ptrdiff_t>(val_count + test_count));
  s.train.assign(ids.begin() + static_cast<std::ptrdiff_t>(val_count + test_count), ids.end());
  for (auto* v : {&s.train, &s.validation, &s.test}) std::sort(v->begin(), v->end());
  return s;
}

/// Random history/holdout split of a user's positives; the history gets
/// round(history_frac * |positives|) items, at least one and leaving at
/// least one for the holdout. Both halves are returned sorted.
inline std::pair<std::vector<ItemId>, std::vector<ItemId>> split_history_holdout(std::vector<ItemId> positives,
                                                                                 double history_frac,
                                                                                 std::uint64_t seed) {
  if (positives.size() < 2) throw InvalidArgument("split_history_holdout: need at least 2 positives");
  std::sort(positives.begin(), positives.end());
  Rng rng(seed);
  rng.shuffle(positives);
  const std::size_t n = positives.size();
  auto h = static_cast<std::size_t>(std::llround(history_frac * static_cast<double>(n)));
  h = std::clamp<std::size_t>(h, 1, n - 1);
  std::vector<ItemId> history(positives.begin(), positives.begin() + static_cast<std::ptrdiff_t>(h));
  std::vector<ItemId> holdout(positives.begin() + static_cast<std::ptrdiff_t>(h), positives.end());
  std::sort(history.begin(), history.end());
  std::sort(holdout.begin(), holdout.end());
  return {std::move(history), std::move(holdout)};
}

// ---------------------------------------------------------------------------
// Category matrices

/// Per-item category weights keyed by catalog item id.
struct CategoryMatrix {
  std::vector<std::string> names;
  std::vector<ItemId> items;
  Matrix values;  // items.size() x names.size()

  std::size_t r() const { return names.size(); }

  Eigen::Index row_of(ItemId id) const {
    if (index_.size() != items.size()) {
      index_.clear();
      for (std::size_t i = 0; i < items.size(); ++i) index_[items[i]] = static_cast<Eigen::Index>(i);
    }
    const auto it = index_.find(id);
    if (it == index_.end()) throw InvalidArgument("category matrix has no row for item " + std::to_string(id));
    return it->second;
  }

  /// Rows for the given items, in order.
  Matrix rows_for(const std::vector<ItemId>& ids) const {
    Matrix out(static_cast<Eigen::Index>(ids.size()), values.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = values.row(row_of(ids[i]));
    return out;
  }

 private:
  mutable std::unordered_map<ItemId, Eigen::Index> index_;
};

inline constexpr const char* kUnknownCategory = "unknown";

/// Equal weight over each item's listed genres; items without genres go to a
/// dedicated "unknown" column (added only when needed).
inline CategoryMatrix build_genre_matrix(const Catalog& catalog) {
  std::set<std::string> genre_set;
  bool any_unknown = false;
  for (const auto& [id, meta] : catalog) {
    for (const auto& g : meta.genres) genre_set.insert(g);
    if (meta.genres.empty()) any_unknown = true;
  }
  CategoryMatrix m;
  m.names.assign(genre_set.begin(), genre_set.end());
  if (any_unknown) m.names.emplace_back(kUnknownCategory);
  std::map<std::string, Eigen::Index> col;
  for (std::size_t c = 0; c < m.names.size(); ++c) col[m.names[c]] = static_cast<Eigen::Index>(c);

  m.values = Matrix::Zero(static_cast<Eigen::Index>(catalog.size()), static_cast<Eigen::Index>(m.names.size()));
  Eigen::Index row = 0;
  for (const auto& [id, meta] : catalog) {
    m.items.push_back(id);
    const std::set<std::string> unique(meta.genres.begin(), meta.genres.end());
    if (unique.empty()) {
      m.values(row, col[kUnknownCategory]) = 1.0;
    } else {
      const double w = 1.0 / static_cast<double>(unique.size());
      for (const auto& g : unique) m.values(row, col[g]) = w;
    }
    ++row;
  }
  return m;
}

/// One-hot release decade, 1920s through 2010s. Earlier years fall into the
/// 1920s bucket and later ones into the 2010s; items without a year go to an
/// "unknown" column added only when needed.
inline CategoryMatrix build_year_matrix(const Catalog& catalog) {
  constexpr int kFirstDecade = 1920;
  constexpr int kBuckets = 10;
  bool any_unknown = false;
  for (const auto& [id, meta] : catalog) any_unknown |= !meta.year.has_value();
  CategoryMatrix m;
  for (int b = 0; b < kBuckets; ++b) m.names.push_back(std::to_string(kFirstDecade + 10 * b) + "s");
  if (any_unknown) m.names.emplace_back(kUnknownCategory);
  m.values = Matrix::Zero(static_cast<Eigen::Index>(catalog.size()), static_cast<Eigen::Index>(m.names.size()));
  Eigen::Index row = 0;
  for (const auto& [id, meta] : catalog) {
    m.items.push_back(id);
    if (meta.year) {
      const int bucket = std::clamp((*meta.year - kFirstDecade) / 10, 0, kBuckets - 1);
      m.values(row, bucket) = 1.0;
    } else {
      m.values(row, kBuckets) = 1.0;
    }
    ++row;
  }
  return m;
}

/// One-hot {popular, less-popular}: the ceil(top_frac * catalog size) items
/// with the most positives among `count_users` (all users when empty) are
/// popular; ties at the boundary favour the lower item id.
inline CategoryMatrix build_popularity_matrix(const InteractionDataset& d, double top_frac,
                                              const std::vector<std::int64_t>& count_users = {}) {
  if (!(top_frac >= 0.0 && top_frac <= 1.0)) throw InvalidArgument("build_popularity_matrix: top_frac outside [0,1]");
  const auto counts = d.positive_counts(count_users);
  std::vector<std::pair<ItemId, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  const auto popular_count =
      static_cast<std::size_t>(std::ceil(top_frac * static_cast<double>(ranked.size()) - 1e-9));
  std::unordered_set<ItemId> popular;
  for (std::size_t i = 0; i < popular_count && i < ranked.size(); ++i) popular.insert(ranked[i].first);

  CategoryMatrix m;
  m.names = {"popular", "less-popular"};
  m.values = Matrix::Zero(static_cast<Eigen::Index>(counts.size()), 2);
  Eigen::Index row = 0;
  for (const auto& [id, c] : counts) {
    m.items.push_back(id);
    m.values(row, popular.count(id) ? 0 : 1) = 1.0;
    ++row;
  }
  return m;
}

/// Reads item,<name_1>,...,<name_r> rows; each row must be a distribution.
inline CategoryMatrix load_category_matrix(const std::string& path, char delim = ',') {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  CategoryMatrix m;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty() || line[0] == '#') continue;
    const auto f = detail::split_fields(line, delim);
    if (m.names.empty()) {
      if (f.size() < 2) throw ParseError("category header needs item and at least one category", line_no);
      for (std::size_t c = 1; c < f.size(); ++c) m.names.push_back(detail::trim(f[c]));
      continue;
    }
    if (f.size() != m.names.size() + 1) throw ParseError("category row has wrong field count", line_no);
    m.items.push_back(detail::parse_int(f[0], line_no, "item id"));
    std::vector<double> row;
    double sum = 0.0;
    for (std::size_t c = 1; c < f.size(); ++c) {
      const double v = detail::parse_double(f[c], line_no, "category weight");
      if (v < 0.0) throw ParseError("negative category weight", line_no);
      row.push_back(v);
      sum += v;
    }
    if (std::abs(sum - 1.0) > kHardTolerance) throw ParseError("category row sums to " + detail::fmt_num(sum), line_no);
    for (auto& v : row) v /= sum;
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw EmptyDataset("no category rows in '" + path + "'");
  m.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(m.names.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < rows[i].size(); ++c) {
      m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Targets

/// Mean category row over the history (optionally weighted per item, e.g.
/// by recency); uniform when the history is empty.
inline CategoryDistribution build_target_distribution(const std::vector<ItemId>& history, const CategoryMatrix& a,
                                                      const std::vector<double>& weights = {}) {
  if (history.empty()) return CategoryDistribution::uniform(a.r());
  if (!weights.empty() && weights.size() != history.size()) {
    throw InvalidArgument("build_target_distribution: weight count does not match history");
  }
  Vector q = Vector::Zero(static_cast<Eigen::Index>(a.r()));
  double total = 0.0;
  for (std::size_t i = 0; i < history.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    if (!(w >= 0.0)) throw InvalidArgument("build_target_distribution: negative weight");
    q += w * a.values.row(a.row_of(history[i])).transpose();
    total += w;
  }
  if (!(total > 0.0)) return CategoryDistribution::uniform(a.r());
  return CategoryDistribution(q / total);
}

// ---------------------------------------------------------------------------
// Scores and candidates

struct ScoredItem {
  ItemId item = 0;
  double score = 0.0;
};

/// Per-user scored items, in file order.
using ScoreTable = std::map<std::int64_t, std::vector<ScoredItem>>;

/// Reads user,item,score rows. With a catalog, items outside it are
/// collected and reported together.
inline ScoreTable load_scores(const std::string& path, const Catalog* catalog = nullptr, char delim = ',') {
  ScoreTable table;
  std::set<ItemId> unknown;
  detail::for_each_record(path, delim, [&](const std::vector<std::string>& f, std::size_t line) {
    if (f.size() < 3) throw ParseError("score row needs user,item,score", line);
    const std::int64_t user = detail::parse_int(f[0], line, "user id");
    const ItemId item = detail::parse_int(f[1], line, "item id");
    const double score = detail::parse_double(f[2], line, "score");
    if (catalog != nullptr && !catalog->count(item)) unknown.insert(item);
    table[user].push_back({item, score});
  });
  if (!unknown.empty()) {
    std::string msg = "scores reference unknown items:";
    for (ItemId id : unknown) msg += " " + std::to_string(id);
    throw InvalidArgument(msg);
  }
  return table;
}

struct Candidates {
  std::vector<ItemId> items;  // catalog ids, descending score
  Vector scores;
  bool truncated = false;     // fewer than the requested n were available
};

/// Top-n scored items outside the user's history, by descending score with
/// ties broken by item id.
inline Candidates assemble_candidates(const std::vector<ScoredItem>& scored, const std::vector<ItemId>& history,
                                      std::size_t n, std::ostream* warn = nullptr) {
  const std::unordered_set<ItemId> hist(history.begin(), history.end());
  std::vector<ScoredItem> pool;
  for (const auto& s : scored) {
    if (!hist.count(s.item)) pool.push_back(s);
  }
  std::sort(pool.begin(), pool.end(), [](const ScoredItem& a, const ScoredItem& b) {
    return a.score != b.score ? a.score > b.score : a.item < b.item;
  });
  Candidates c;
  c.truncated = pool.size() < n;
  if (c.truncated && warn != nullptr) {
    *warn << "warning: only " << pool.size() << " candidates available, " << n << " requested\n";
  }
  const std::size_t take = std::min(n, pool.size());
  c.scores.resize(static_cast<Eigen::Index>(take));
  for (std::size_t i = 0; i < take; ++i) {
    c.items.push_back(pool[i].item);
    c.scores[static_cast<Eigen::Index>(i)] = pool[i].score;
  }
  return c;
}

/// One evaluation user: history builds the target, holdout is scored.
struct UserEvalInstance {
  std::int64_t user = 0;
  std::vector<ItemId> history;
  std::vector<ItemId> holdout;
  Candidates candidates;
};

// ---------------------------------------------------------------------------
// Single-problem JSON files
//
//   {
//     "scores": [s_1, ..., s_n],
//     "categories": [[a_11, ..., a_1r], ...],       n rows
//     "target": [q_1, ..., q_r],
//     "k": 5,                                       optional, default n
//     "position_weights": "log" | "sqrt" | "reciprocal" | [w_1, ..., w_k],
//     "lambda": 0.5,                                optional, default 0
//     "relevant": [item indices]                    optional
//   }

struct ProblemFile {
  RankingProblem problem;
  RelevantSet relevant;
};

/// Parses a problem file without validating it (see validate_problem).
inline ProblemFile problem_from_json(const nlohmann::json& j) {
  ProblemFile out;
  RankingProblem& p = out.problem;
  try {
    const auto scores = j.at("scores").get<std::vector<double>>();
    p.scores = Eigen::Map<const Vector>(scores.data(), static_cast<Eigen::Index>(scores.size()));
    const auto cats = j.at("categories").get<std::vector<std::vector<double>>>();
    const std::size_t r = cats.empty() ? 0 : cats.front().size();
    p.categories.resize(static_cast<Eigen::Index>(cats.size()), static_cast<Eigen::Index>(r));
    for (std::size_t i = 0; i < cats.size(); ++i) {
      if (cats[i].size() != r) throw InvalidArgument("problem file: ragged category matrix");
      for (std::size_t c = 0; c < r; ++c) {
        p.categories(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = cats[i][c];
      }
    }
    const auto target = j.at("target").get<std::vector<double>>();
    p.target = CategoryDistribution(Eigen::Map<const Vector>(target.data(), static_cast<Eigen::Index>(target.size())));
    const std::size_t k = j.value("k", scores.size());
    if (j.contains("position_weights") && j.at("position_weights").is_array()) {
      const auto w = j.at("position_weights").get<std::vector<double>>();
      p.position_weights = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
    } else {
      const std::string kind = j.value("position_weights", std::string("log"));
      p.position_weights = make_position_weights(parse_position_weight_kind(kind), k);
    }
    p.lambda = j.value("lambda", 0.0);
    if (j.contains("relevant")) {
      for (auto id : j.at("relevant").get<std::vector<ItemId>>()) out.relevant.insert(id);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("problem file: ") + e.what());
  }
  return out;
}

inline ProblemFile load_problem_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("problem file '" + path + "': " + e.what());
  }
  return problem_from_json(j);
}

inline nlohmann::json problem_to_json(const RankingProblem& p, const RelevantSet& relevant = {}) {
  nlohmann::json j;
  j["scores"] = std::vector<double>(p.scores.data(), p.scores.data() + p.scores.size());
  std::vector<std::vector<double>> cats(p.n());
  for (std::size_t i = 0; i < p.n(); ++i) {
    for (std::size_t c = 0; c < p.r(); ++c) {
      cats[i].push_back(p.categories(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)));
    }
  }
  j["categories"] = cats;
  j["target"] = std::vector<double>(p.target.probs().data(), p.target.probs().data() + p.target.size());
  j["k"] = p.k();
  j["position_weights"] =
      std::vector<double>(p.position_weights.data(), p.position_weights.data() + p.position_weights.size());
  j["lambda"] = p.lambda;
  if (!relevant.empty()) {
    std::vector<ItemId> rel(relevant.begin(), relevant.end());
    std::sort(rel.begin(), rel.end());
    j["relevant"] = rel;
  }
  return j;
}

/// Whitespace-separated matrix, one row per line; '#' starts a comment line.
inline Matrix load_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty() || detail::trim(line)[0] == '#') continue;
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) row.push_back(detail::parse_double(tok, line_no, "matrix entry"));
    if (!rows.empty() && row.size() != rows.front().size()) throw ParseError("ragged matrix row", line_no);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw EmptyDataset("no matrix rows in '" + path + "'");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Synthetic instances

enum class ScoreDistribution { normal, uniform, exponential };

inline ScoreDistribution parse_score_distribution(const std::string& s) {
  if (s == "normal") return ScoreDistribution::normal;
  if (s == "uniform") return ScoreDistribution::uniform;
  if (s == "exponential") return ScoreDistribution::exponential;
  throw InvalidArgument("unknown score distribution '" + s + "'");
}

/// Seeded random problem with lambda = 0. Each item belongs to
/// max(1, r - round(category_sparsity * r)) categories with random weights;
/// the target is a random mixture of item rows, so it is close to
/// achievable.
inline RankingProblem synthetic_instance(std::uint64_t seed, std::size_t n, std::size_t k, std::size_t r,
                                         ScoreDistribution scores = ScoreDistribution::normal,
                                         double category_sparsity = 0.75,
                                         PositionWeightKind weights = PositionWeightKind::log) {
  if (n == 0 || k == 0 || r == 0 || k > n) throw InvalidArgument("synthetic_instance: need n, k, r >= 1 and k <= n");
  if (!(category_sparsity >= 0.0 && category_sparsity <= 1.0)) {
    throw InvalidArgument("synthetic_instance: category_sparsity outside [0,1]");
  }
  Rng rng(seed);
  RankingProblem p;
  p.scores.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    switch (scores) {
      case ScoreDistribution::normal:
        s = rng.normal();
        break;
      case ScoreDistribution::uniform:
        s = rng.uniform();
        break;
      case ScoreDistribution::exponential:
        s = rng.exponential();
        break;
    }
    p.scores[static_cast<Eigen::Index>(i)] = s;
  }
  p.position_weights = make_position_weights(weights, k);

  const auto zeros = static_cast<std::size_t>(std::llround(category_sparsity * static_cast<double>(r)));
  const std::size_t members = std::max<std::size_t>(1, r - std::min(zeros, r));
  p.categories = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(r));
  std::vector<std::size_t> cols(r);
  for (std::size_t c = 0; c < r; ++c) cols[c] = c;
  for (std::size_t i = 0; i < n; ++i) {
    rng.shuffle(cols);
    double sum = 0.0;
    for (std::size_t t = 0; t < members; ++t) {
      const double w = 0.5 + rng.uniform();
      p.categories(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(cols[t])) = w;
      sum += w;
    }
    p.categories.row(static_cast<Eigen::Index>(i)) /= sum;
  }

  const std::size_t mix = std::max<std::size_t>(1, std::min(n, 2 * k));
  Vector q = Vector::Zero(static_cast<Eigen::Index>(r));
  double total = 0.0;
  for (std::size_t t = 0; t < mix; ++t) {
    const auto i = static_cast<Eigen::Index>(rng.below(n));
    const double w = rng.uniform();
    q += w * p.categories.row(i).transpose();
    total += w;
  }
  if (!(total > 0.0)) q = Vector::Constant(static_cast<Eigen::Index>(r), 1.0 / static_cast<double>(r));
  else q /= total;
  p.target = CategoryDistribution(q);
  p.lambda = 0.0;
  return p;
}

struct SyntheticUser {
  std::int64_t user = 0;
  RankingProblem problem;
  RelevantSet relevant;
};

/// A desk-scale corpus of synthetic users. Held-out relevance is drawn per
/// item with probability rising in both its score and its affinity to the
/// user's target mix; every user gets at least one relevant item.
inline std::vector<SyntheticUser> synthetic_corpus(std::uint64_t seed, std::size_t users, std::size_t n,
                                                   std::size_t k, std::size_t r,
                                                   ScoreDistribution scores = ScoreDistribution::normal,
                                                   double category_sparsity = 0.75,
                                                   PositionWeightKind weights = PositionWeightKind::log) {
  std::vector<SyntheticUser> out;
  out.reserve(users);
  for (std::size_t u = 0; u < users; ++u) {
    SyntheticUser su;
    su.user = static_cast<std::int64_t>(u);
    su.problem = synthetic_instance(mix_seed(seed, 2 * u), n, k, r, scores, category_sparsity, weights);
    Rng rng(mix_seed(seed, 2 * u + 1));
    const Vector& q = su.problem.target.probs();
    std::size_t best = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double affinity = su.problem.categories.row(ii).dot(q) * static_cast<double>(r);
      const double logit = 1.2 * su.problem.scores[ii] + 0.8 * (affinity - 1.0) - 2.5;
      if (rng.uniform() < 1.0 / (1.0 + std::exp(-logit))) su.relevant.insert(static_cast<ItemId>(i));
      if (su.problem.scores[ii] > su.problem.scores[static_cast<Eigen::Index>(best)]) best = i;
    }
    if (su.relevant.empty()) su.relevant.insert(static_cast<ItemId>(best));
    out.push_back(std::move(su));
  }
  return out;
}

}  // namespace excalibr
