#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <vector>

namespace progsim::graph {

using Adjacency = std::vector<std::vector<std::uint32_t>>;

inline constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

// Iterative Tarjan. Components are numbered in reverse topological order of
// the condensation (sinks first).
inline std::vector<std::uint32_t> strongly_connected_components(const Adjacency& adj) {
  const auto n = static_cast<std::uint32_t>(adj.size());
  std::vector<std::uint32_t> index(n, kNone), low(n, 0), comp(n, kNone);
  std::vector<bool> on_stack(n, false);
  std::vector<std::uint32_t> stack;
  std::uint32_t next_index = 0, next_comp = 0;
  struct Frame {
    std::uint32_t v;
    std::size_t edge;
  };
  std::vector<Frame> call;
  for (std::uint32_t root = 0; root < n; ++root) {
    if (index[root] != kNone) continue;
    call.push_back({root, 0});
    index[root] = low[root] = next_index++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!call.empty()) {
      auto& f = call.back();
      if (f.edge < adj[f.v].size()) {
        std::uint32_t w = adj[f.v][f.edge++];
        if (index[w] == kNone) {
          index[w] = low[w] = next_index++;
          stack.push_back(w);
          on_stack[w] = true;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.v] = std::min(low[f.v], index[w]);
        }
        continue;
      }
      std::uint32_t v = f.v;
      if (low[v] == index[v]) {
        std::uint32_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp[w] = next_comp;
        } while (w != v);
        ++next_comp;
      }
      call.pop_back();
      if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
    }
  }
  return comp;
}

/// Nodes lying on some cycle (non-trivial SCC or self-loop).
inline std::vector<bool> nodes_on_cycles(const Adjacency& adj) {
  auto comp = strongly_connected_components(adj);
  std::vector<std::uint32_t> size(adj.size(), 0);
  for (auto c : comp) ++size[c];
  std::vector<bool> out(adj.size(), false);
  for (std::uint32_t v = 0; v < adj.size(); ++v) {
    if (size[comp[v]] > 1) out[v] = true;
    for (auto w : adj[v])
      if (w == v) out[v] = true;
  }
  return out;
}

/// Shortest cycle through `start` as a node sequence start, v1, ..., vk (the
/// closing edge vk -> start is implied). Empty if none.
inline std::vector<std::uint32_t> shortest_cycle_through(const Adjacency& adj, std::uint32_t start) {
  std::vector<std::uint32_t> parent(adj.size(), kNone);
  std::deque<std::uint32_t> queue{start};
  std::vector<bool> seen(adj.size(), false);
  seen[start] = true;
  while (!queue.empty()) {
    auto v = queue.front();
    queue.pop_front();
    for (auto w : adj[v]) {
      if (w == start) {
        std::vector<std::uint32_t> path;
        for (auto x = v; x != kNone; x = (x == start ? kNone : parent[x])) path.push_back(x);
        std::reverse(path.begin(), path.end());
        return path;
      }
      if (!seen[w]) {
        seen[w] = true;
        parent[w] = v;
        queue.push_back(w);
      }
    }
  }
  return {};
}

/// Longest-path rank on a DAG: rank(v) = 1 + max rank of successors, sinks 0.
/// Returns nullopt if the graph has a cycle.
inline std::optional<std::vector<std::uint32_t>> longest_path_ranks(const Adjacency& adj) {
  const auto n = adj.size();
  std::vector<std::uint32_t> outdeg(n, 0), rank(n, 0);
  Adjacency rev(n);
  for (std::uint32_t v = 0; v < n; ++v)
    for (auto w : adj[v]) {
      rev[w].push_back(v);
      ++outdeg[v];
    }
  std::vector<std::uint32_t> work;
  for (std::uint32_t v = 0; v < n; ++v)
    if (outdeg[v] == 0) work.push_back(v);
  std::size_t done = 0;
  while (!work.empty()) {
    auto w = work.back();
    work.pop_back();
    ++done;
    for (auto v : rev[w]) {
      rank[v] = std::max(rank[v], rank[w] + 1);
      if (--outdeg[v] == 0) work.push_back(v);
    }
  }
  if (done != n) return std::nullopt;
  return rank;
}

}  // namespace progsim::graph
