#pragma once

// Maximum cardinality bipartite matching (Hopcroft-Karp).

#include <cstddef>
#include <limits>
#include <queue>
#include <vector>

namespace excalibr {

/// Bipartite graph with `left` and `right` vertex sets; adjacency lists are
/// scanned in stored order, which makes matchings reproducible.
class HopcroftKarp {
 public:
  HopcroftKarp(std::size_t left, std::size_t right)
      : adj_(left), match_left_(left, kFree), match_right_(right, kFree), dist_(left) {}

  void clear_edges() {
    for (auto& a : adj_) a.clear();
  }
  void add_edge(std::size_t u, std::size_t v) { adj_[u].push_back(static_cast<int>(v)); }
  const std::vector<int>& neighbors(std::size_t u) const { return adj_[u]; }

  /// Drops matched pairs whose edge is no longer present, keeping the rest
  /// as a warm start.
  void prune_matching() {
    for (std::size_t u = 0; u < adj_.size(); ++u) {
      const int v = match_left_[u];
      if (v == kFree) continue;
      bool present = false;
      for (int w : adj_[u]) {
        if (w == v) {
          present = true;
          break;
        }
      }
      if (!present) {
        match_left_[u] = kFree;
        match_right_[static_cast<std::size_t>(v)] = kFree;
      }
    }
  }

  /// Grows the current matching to maximum cardinality; returns its size.
  std::size_t run() {
    std::size_t size = 0;
    for (int v : match_left_) size += v != kFree;
    while (bfs()) {
      for (std::size_t u = 0; u < adj_.size(); ++u) {
        if (match_left_[u] == kFree && dfs(static_cast<int>(u))) ++size;
      }
    }
    return size;
  }

  /// Right vertex matched to left vertex u, or -1.
  int match_of_left(std::size_t u) const { return match_left_[u]; }
  int match_of_right(std::size_t v) const { return match_right_[v]; }

  static constexpr int kFree = -1;

 private:
  bool bfs() {
    std::queue<int> queue;
    bool found = false;
    for (std::size_t u = 0; u < adj_.size(); ++u) {
      if (match_left_[u] == kFree) {
        dist_[u] = 0;
        queue.push(static_cast<int>(u));
      } else {
        dist_[u] = kInf;
      }
    }
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop();
      for (int v : adj_[static_cast<std::size_t>(u)]) {
        const int w = match_right_[static_cast<std::size_t>(v)];
        if (w == kFree) {
          found = true;
        } else if (dist_[static_cast<std::size_t>(w)] == kInf) {
          dist_[static_cast<std::size_t>(w)] = dist_[static_cast<std::size_t>(u)] + 1;
          queue.push(w);
        }
      }
    }
    return found;
  }

  // Augmenting-path search restricted to the BFS layering.
  bool dfs(int u) {
    for (int v : adj_[static_cast<std::size_t>(u)]) {
      const int w = match_right_[static_cast<std::size_t>(v)];
      if (w == kFree || (dist_[static_cast<std::size_t>(w)] == dist_[static_cast<std::size_t>(u)] + 1 && dfs(w))) {
        match_left_[static_cast<std::size_t>(u)] = v;
        match_right_[static_cast<std::size_t>(v)] = u;
        return true;
      }
    }
    dist_[static_cast<std::size_t>(u)] = kInf;
    return false;
  }

  static constexpr int kInf = std::numeric_limits<int>::max();

  std::vector<std::vector<int>> adj_;
  std::vector<int> match_left_;
  std::vector<int> match_right_;
  std::vector<int> dist_;
};

}  // namespace excalibr
