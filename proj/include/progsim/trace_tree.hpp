#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "progsim/lts.hpp"

namespace progsim {

/// Default node budget for bounded enumerations; PROGSIM_NODE_BUDGET overrides.
inline std::size_t default_node_budget() {
  if (const char* env = std::getenv("PROGSIM_NODE_BUDGET")) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && v > 0) return static_cast<std::size_t>(v);
  }
  return 2'000'000;
}

/// Bounded, prefix-closed set of traces of one LTS, stored as a tree whose
/// edges carry action ids of that LTS. Children are kept sorted by action.
class TracePrefixTree {
 public:
  using NodeId = std::uint32_t;
  static constexpr NodeId npos = std::numeric_limits<NodeId>::max();

  struct Node {
    NodeId parent = npos;
    ActionId action = 0;
    StateId state = 0;
    std::uint32_t depth = 0;
    std::vector<NodeId> children;
    // Children were computed. Unexpanded nodes form the frontier.
    bool expanded = false;
    std::uint64_t annotation = 0;
  };

  TracePrefixTree() = default;
  TracePrefixTree(std::vector<Action> alphabet, StateId root_state, std::size_t depth_bound)
      : alphabet_(std::move(alphabet)), depth_bound_(depth_bound) {
    nodes_.push_back(Node{npos, 0, root_state, 0, {}, false, 0});
  }

  static TracePrefixTree for_lts(const Lts& lts, std::size_t depth_bound) {
    return TracePrefixTree({lts.alphabet().begin(), lts.alphabet().end()}, lts.initial(), depth_bound);
  }

  NodeId root() const { return 0; }
  std::size_t size() const { return nodes_.size(); }
  std::size_t depth_bound() const { return depth_bound_; }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  Node& node(NodeId id) { return nodes_.at(id); }
  const Action& action_of(NodeId id) const { return alphabet_.at(nodes_.at(id).action); }
  std::span<const Action> alphabet() const { return alphabet_; }

  NodeId add_child(NodeId parent, ActionId action, StateId state) {
    auto id = static_cast<NodeId>(nodes_.size());
    nodes_.push_back(Node{parent, action, state, nodes_[parent].depth + 1, {}, false, 0});
    auto& kids = nodes_[parent].children;
    auto pos = std::lower_bound(kids.begin(), kids.end(), action,
                                [&](NodeId c, ActionId a) { return nodes_[c].action < a; });
    if (pos != kids.end() && nodes_[*pos].action == action)
      throw StructuralError("duplicate child key '" + alphabet_.at(action).token() + "' in trace tree");
    kids.insert(pos, id);
    return id;
  }

  NodeId child(NodeId parent, ActionId action) const {
    for (auto c : nodes_.at(parent).children)
      if (nodes_[c].action == action) return c;
    return npos;
  }

  /// Follows `trace` from the root; npos if it leaves the tree.
  NodeId find(std::span<const Action> trace) const {
    NodeId cur = root();
    for (const auto& a : trace) {
      auto it = std::lower_bound(alphabet_.begin(), alphabet_.end(), a);
      if (it == alphabet_.end() || *it != a) return npos;
      cur = child(cur, static_cast<ActionId>(it - alphabet_.begin()));
      if (cur == npos) return npos;
    }
    return cur;
  }

  Trace trace(NodeId id) const {
    Trace out;
    for (NodeId cur = id; cur != root(); cur = nodes_[cur].parent) out.push_back(alphabet_[nodes_[cur].action]);
    std::reverse(out.begin(), out.end());
    return out;
  }

  std::vector<ActionId> action_ids(NodeId id) const {
    std::vector<ActionId> out;
    for (NodeId cur = id; cur != root(); cur = nodes_[cur].parent) out.push_back(nodes_[cur].action);
    std::reverse(out.begin(), out.end());
    return out;
  }

  bool is_ancestor_or_self(NodeId anc, NodeId desc) const {
    if (nodes_.at(anc).depth > nodes_.at(desc).depth) return false;
    while (nodes_[desc].depth > nodes_[anc].depth) desc = nodes_[desc].parent;
    return anc == desc;
  }

  NodeId lca(NodeId a, NodeId b) const {
    while (nodes_[a].depth > nodes_[b].depth) a = nodes_[a].parent;
    while (nodes_[b].depth > nodes_[a].depth) b = nodes_[b].parent;
    while (a != b) {
      a = nodes_[a].parent;
      b = nodes_[b].parent;
    }
    return a;
  }

  std::vector<Trace> all_traces() const {
    std::vector<Trace> out;
    for (NodeId i = 0; i < nodes_.size(); ++i) out.push_back(trace(i));
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::vector<Action> alphabet_;
  std::vector<Node> nodes_;
  std::size_t depth_bound_ = 0;
};

}  // namespace progsim
