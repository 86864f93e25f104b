#pragma once

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "progsim/graph.hpp"
#include "progsim/lts.hpp"
#include "progsim/scheduler.hpp"
#include "progsim/trace_tree.hpp"

namespace progsim {

/// τ[n] ∈ S(τ|n) for every proper prefix. ε is always consistent.
inline bool is_consistent(std::span<const Action> trace, const Scheduler& s) {
  for (std::size_t n = 0; n < trace.size(); ++n)
    if (!s.schedule(trace.subspan(0, n)).contains(trace[n])) return false;
  return true;
}

/// Result of a check over all consistent traces up to a depth. `exact` means
/// the whole (state, memory) space was covered and the verdict holds for
/// traces of any length.
struct BoundedVerdict {
  struct Violation {
    Trace trace;
    std::string condition;
    ActionSet scheduled;
  };

  bool holds = true;
  bool exact = false;
  std::size_t depth = 0;
  std::optional<Violation> violation;
  std::string note;
};

namespace detail {

using TraceCheck = std::function<std::optional<std::string>(StateId, const ActionSet&)>;

inline const FiniteMemoryScheduler* bound_to(const Scheduler& s, const Lts& a) {
  auto fm = dynamic_cast<const FiniteMemoryScheduler*>(&s);
  return fm && &fm->lts() == &a ? fm : nullptr;
}

// Explores (state, memory) configurations breadth first. Every configuration
// is checked; children are the scheduled actions that are enabled.
inline BoundedVerdict check_configs(const FiniteMemoryScheduler& s, std::size_t budget, const TraceCheck& check) {
  const Lts& a = s.lts();
  struct Config {
    StateId state;
    FiniteMemoryScheduler::Memory memory;
    std::uint32_t parent;
    ActionId via;
  };
  std::vector<Config> configs;
  std::map<std::pair<StateId, FiniteMemoryScheduler::Memory>, std::uint32_t> index;
  auto trace_of = [&](std::uint32_t c) {
    Trace t;
    for (; configs[c].parent != graph::kNone; c = configs[c].parent) t.push_back(a.action(configs[c].via));
    std::reverse(t.begin(), t.end());
    return t;
  };
  configs.push_back({a.initial(), s.initial_memory(), graph::kNone, 0});
  index.emplace(std::make_pair(a.initial(), configs[0].memory), 0);
  BoundedVerdict v;
  v.exact = true;
  for (std::uint32_t c = 0; c < configs.size(); ++c) {
    auto ids = s.choose(configs[c].state, configs[c].memory);
    ActionSet set = s.to_set(ids);
    if (auto bad = check(configs[c].state, set)) {
      v.holds = false;
      v.violation = BoundedVerdict::Violation{trace_of(c), *bad, set};
      v.depth = v.violation->trace.size();
      return v;
    }
    for (auto id : ids) {
      auto next = a.successor(configs[c].state, id);
      if (!next) continue;
      auto mem = s.update(configs[c].memory, configs[c].state, id, *next);
      auto key = std::make_pair(*next, mem);
      if (index.count(key)) continue;
      if (configs.size() >= budget) throw ResourceError(budget);
      index.emplace(std::move(key), static_cast<std::uint32_t>(configs.size()));
      configs.push_back({*next, std::move(mem), c, id});
    }
  }
  return v;
}

// Depth-first over the consistent-trace tree of an arbitrary scheduler.
inline BoundedVerdict check_traces(const Scheduler& s, const Lts& a, std::size_t depth, const TraceCheck& check) {
  BoundedVerdict v;
  v.depth = depth;
  Trace trace;
  std::function<bool(StateId)> visit = [&](StateId st) -> bool {
    ActionSet set;
    try {
      set = s.schedule(trace);
    } catch (const DepthExhausted& e) {
      v.depth = std::min(v.depth, trace.empty() ? 0 : trace.size() - 1);
      v.note = "scheduler defined only up to depth " + std::to_string(e.depth());
      return true;
    }
    if (auto bad = check(st, set)) {
      v.holds = false;
      v.violation = BoundedVerdict::Violation{trace, *bad, set};
      return false;
    }
    if (trace.size() >= depth) return true;
    for (const auto& act : set) {
      auto next = a.successor(st, act);
      if (!next) continue;
      trace.push_back(act);
      bool ok = visit(*next);
      trace.pop_back();
      if (!ok) return false;
    }
    return true;
  };
  visit(a.initial());
  return v;
}

inline BoundedVerdict check_all(const Scheduler& s, const Lts& a, std::size_t depth, const TraceCheck& check) {
  if (auto fm = bound_to(s, a)) {
    try {
      return check_configs(*fm, default_node_budget(), check);
    } catch (const ResourceError&) {
      // fall through to the bounded traversal
    }
  }
  return check_traces(s, a, depth, check);
}

}  // namespace detail

/// Admissibility: on every consistent trace S(σ) is non-empty (i) and every
/// scheduled action is enabled in state(σ) (ii). Schedulers bound to `a`
/// with finite memory get an exact verdict.
inline BoundedVerdict check_admitted(const Scheduler& s, const Lts& a, std::size_t depth) {
  return detail::check_all(s, a, depth, [&](StateId st, const ActionSet& set) -> std::optional<std::string> {
    if (set.empty()) return "(i) empty";
    for (const auto& act : set)
      if (!a.successor(st, act)) return "(ii) not enabled: " + act.token();
    return std::nullopt;
  });
}

/// Every scheduled set is a subset of the program actions or a singleton.
inline BoundedVerdict check_deterministic_scheduler(const Scheduler& s, const Lts& prod, std::size_t depth) {
  const auto& sigma_p = prod.partition().program();
  return detail::check_all(s, prod, depth, [&](StateId, const ActionSet& set) -> std::optional<std::string> {
    if (set.size() <= 1 || set.is_subset_of(sigma_p)) return std::nullopt;
    return std::string("neither program-only nor singleton");
  });
}

struct EnumerateOptions {
  std::size_t node_budget = default_node_budget();
  // Leave nodes where the scheduler runs out of table unexpanded instead of
  // propagating DepthExhausted.
  bool stop_on_exhausted = false;
};

/// T(A, S) restricted to traces of length ≤ depth. Children are the scheduled
/// actions enabled in the node's state, in canonical order. Nodes at the depth
/// bound stay unexpanded.
inline TracePrefixTree enumerate_traces(const Lts& a, const Scheduler& s, std::size_t depth,
                                        EnumerateOptions opts = {}) {
  using NodeId = TracePrefixTree::NodeId;
  auto tree = TracePrefixTree::for_lts(a, depth);
  auto fm = detail::bound_to(s, a);
  std::vector<FiniteMemoryScheduler::Memory> memory;
  if (fm) memory.push_back(fm->initial_memory());
  std::vector<NodeId> stack{tree.root()};
  while (!stack.empty()) {
    NodeId n = stack.back();
    stack.pop_back();
    if (tree.node(n).depth >= depth) continue;
    StateId st = tree.node(n).state;
    std::vector<ActionId> ids;
    if (fm) {
      ids = fm->choose(st, memory[n]);
    } else {
      ActionSet set;
      try {
        set = s.schedule(tree.trace(n));
      } catch (const DepthExhausted&) {
        if (opts.stop_on_exhausted) continue;
        throw;
      }
      for (const auto& act : set)
        if (auto id = a.find_action(act)) ids.push_back(*id);
    }
    tree.node(n).expanded = true;
    for (auto id : ids) {
      auto next = a.successor(st, id);
      if (!next) continue;
      if (tree.size() >= opts.node_budget) throw ResourceError(opts.node_budget);
      tree.add_child(n, id, *next);
      if (fm) memory.push_back(fm->update(memory[n], st, id, *next));
    }
    const auto& kids = tree.node(n).children;
    for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
  }
  return tree;
}

/// Replays stem then `unrollings` copies of the cycle and checks both the
/// lasso shape and consistency with s along the way.
inline bool verify_lasso(const Lts& a, const Scheduler& s, const Lasso& l, std::size_t unrollings = 2) {
  if (!is_valid_lasso(a, l)) return false;
  Trace t = l.stem;
  for (std::size_t i = 0; i < unrollings; ++i) t.insert(t.end(), l.cycle.begin(), l.cycle.end());
  return is_consistent(t, s);
}

struct DivergenceResult {
  std::optional<Lasso> lasso;
  bool exact = false;
  std::string note;
};

/// Looks for a consistent lasso whose cycle has no action of gamma_p and no
/// idle. The stem is at most `depth` long.
inline DivergenceResult find_divergence(const Lts& prod, const Scheduler& s, const ActionSet& gamma_p,
                                        std::size_t depth) {
  auto silent = [&](ActionId id) { return id != prod.idle_id() && !gamma_p.contains(prod.action(id)); };
  DivergenceResult out;

  if (auto fm = detail::bound_to(s, prod)) {
    struct Config {
      StateId state;
      FiniteMemoryScheduler::Memory memory;
      std::uint32_t parent;
      ActionId via;
      std::size_t dist;
    };
    std::vector<Config> configs;
    std::map<std::pair<StateId, FiniteMemoryScheduler::Memory>, std::uint32_t> index;
    graph::Adjacency silent_adj;
    std::vector<std::map<std::uint32_t, ActionId>> edge_action;
    configs.push_back({prod.initial(), fm->initial_memory(), graph::kNone, 0, 0});
    index.emplace(std::make_pair(prod.initial(), configs[0].memory), 0);
    const std::size_t budget = default_node_budget();
    bool complete = true;
    for (std::uint32_t c = 0; c < configs.size(); ++c) {
      silent_adj.emplace_back();
      edge_action.emplace_back();
      for (auto id : fm->choose(configs[c].state, configs[c].memory)) {
        auto next = prod.successor(configs[c].state, id);
        if (!next) continue;
        auto mem = fm->update(configs[c].memory, configs[c].state, id, *next);
        auto key = std::make_pair(*next, mem);
        auto it = index.find(key);
        std::uint32_t target;
        if (it != index.end()) {
          target = it->second;
        } else {
          if (configs.size() >= budget) {
            complete = false;
            continue;
          }
          target = static_cast<std::uint32_t>(configs.size());
          index.emplace(std::move(key), target);
          configs.push_back({*next, std::move(mem), c, id, configs[c].dist + 1});
        }
        if (silent(id) && !edge_action[c].count(target)) {
          silent_adj[c].push_back(target);
          edge_action[c][target] = id;
        }
      }
    }
    silent_adj.resize(configs.size());
    auto on_cycle = graph::nodes_on_cycles(silent_adj);
    for (std::uint32_t c = 0; c < configs.size(); ++c) {
      if (!on_cycle[c] || configs[c].dist > depth) continue;
      Lasso l;
      for (auto x = c; configs[x].parent != graph::kNone; x = configs[x].parent)
        l.stem.push_back(prod.action(configs[x].via));
      std::reverse(l.stem.begin(), l.stem.end());
      auto cyc = graph::shortest_cycle_through(silent_adj, c);
      for (std::size_t i = 0; i < cyc.size(); ++i) {
        auto to = i + 1 < cyc.size() ? cyc[i + 1] : c;
        l.cycle.push_back(prod.action(edge_action[cyc[i]].at(to)));
      }
      out.lasso = std::move(l);
      out.exact = true;
      return out;
    }
    out.exact = complete;
    if (!complete) out.note = "configuration budget " + std::to_string(budget) + " exhausted";
    return out;
  }

  // Generic schedulers: depth-first search for a state repeated inside a
  // silent segment of the current path.
  const std::size_t limit = depth + prod.num_states();
  Trace trace;
  std::vector<StateId> states{prod.initial()};
  std::size_t segment_start = 0;  // first path index of the current silent segment
  std::function<bool()> visit = [&]() -> bool {
    StateId st = states.back();
    for (std::size_t i = segment_start; i + 1 < states.size(); ++i) {
      if (states[i] != st || i > depth) continue;
      Lasso l{Trace(trace.begin(), trace.begin() + static_cast<long>(i)),
              Trace(trace.begin() + static_cast<long>(i), trace.end())};
      if (verify_lasso(prod, s, l)) {
        out.lasso = std::move(l);
        return true;
      }
    }
    if (trace.size() >= limit) return false;
    ActionSet set;
    try {
      set = s.schedule(trace);
    } catch (const DepthExhausted&) {
      out.note = "scheduler table exhausted";
      return false;
    }
    for (const auto& act : set) {
      auto next = prod.successor(st, act);
      if (!next) continue;
      auto id = *prod.find_action(act);
      auto saved = segment_start;
      if (!silent(id)) segment_start = states.size();
      if (!silent(id) && trace.size() >= depth) {
        segment_start = saved;
        continue;
      }
      trace.push_back(act);
      states.push_back(*next);
      bool found = visit();
      trace.pop_back();
      states.pop_back();
      segment_start = saved;
      if (found) return true;
    }
    return false;
  };
  visit();
  if (out.note.empty()) out.note = "bounded search: stem ≤ " + std::to_string(depth);
  return out;
}

struct AcyclicityReport {
  bool acyclic = true;
  // A reachable cycle of non-idle transitions, when there is one.
  std::optional<Lasso> cycle;
};

/// Whether the reachable non-idle transition graph is a DAG.
inline AcyclicityReport check_acyclic_non_idle(const Lts& a) {
  graph::Adjacency adj(a.num_states());
  auto reach = reachable_states(a);
  std::vector<std::map<std::uint32_t, ActionId>> label(a.num_states());
  for (StateId s = 0; s < a.num_states(); ++s) {
    if (!reach[s]) continue;
    for (const auto& e : a.edges(s))
      if (e.action != a.idle_id() && !label[s].count(e.target)) {
        adj[s].push_back(e.target);
        label[s][e.target] = e.action;
      }
  }
  auto on_cycle = graph::nodes_on_cycles(adj);
  AcyclicityReport r;
  for (StateId s = 0; s < a.num_states(); ++s) {
    if (!reach[s] || !on_cycle[s]) continue;
    r.acyclic = false;
    // stem: BFS path from the initial state
    std::vector<std::uint32_t> parent(a.num_states(), graph::kNone);
    std::vector<bool> seen(a.num_states(), false);
    std::deque<StateId> q{a.initial()};
    seen[a.initial()] = true;
    while (!q.empty() && !seen[s]) {
      auto v = q.front();
      q.pop_front();
      for (const auto& e : a.edges(v))
        if (!seen[e.target]) {
          seen[e.target] = true;
          parent[e.target] = v;
          q.push_back(e.target);
        }
    }
    Lasso l;
    for (StateId x = s; x != a.initial(); x = parent[x]) {
      auto p = parent[x];
      for (const auto& e : a.edges(p))
        if (e.target == x) {
          l.stem.push_back(a.action(e.action));
          break;
        }
    }
    std::reverse(l.stem.begin(), l.stem.end());
    auto cyc = graph::shortest_cycle_through(adj, s);
    for (std::size_t i = 0; i < cyc.size(); ++i)
      l.cycle.push_back(a.action(label[cyc[i]].at(i + 1 < cyc.size() ? cyc[i + 1] : s)));
    r.cycle = std::move(l);
    return r;
  }
  return r;
}

/// Actions that occur on every maximal non-idle path from the initial state,
/// compared after applying `key` (e.g. to forget payloads). Only meaningful
/// when the non-idle graph is acyclic; throws ContractViolation otherwise.
/// Together with admissibility this is what every admitted scheduler is
/// forced to produce.
inline ActionSet inevitable_actions(const Lts& a,
                                    const std::function<Action(const Action&)>& key = [](const Action& x) { return x; }) {
  if (!check_acyclic_non_idle(a).acyclic) throw ContractViolation("inevitable_actions needs an acyclic LTS");
  std::vector<std::optional<ActionSet>> memo(a.num_states());
  std::function<const ActionSet&(StateId)> must = [&](StateId s) -> const ActionSet& {
    if (memo[s]) return *memo[s];
    std::optional<ActionSet> acc;
    for (const auto& e : a.edges(s)) {
      if (e.action == a.idle_id()) continue;
      ActionSet here = must(e.target);
      here.insert(key(a.action(e.action)));
      acc = acc ? set_intersection(*acc, here) : here;
    }
    memo[s] = acc.value_or(ActionSet{});
    return *memo[s];
  };
  return must(a.initial());
}

}  // namespace progsim
