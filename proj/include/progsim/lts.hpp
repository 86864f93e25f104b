#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "progsim/action.hpp"
#include "progsim/errors.hpp"

namespace progsim {

using StateId = std::uint32_t;
using ActionId = std::uint32_t;

/// The five disjoint parts of an LTS alphabet. Disjointness is by action
/// token: two actions that print the same are not allowed in one alphabet.
class AlphabetPartition {
 public:
  AlphabetPartition() = default;

  /// Throws ConfigError naming the action if two parts share a token or if
  /// the number of idle actions is not exactly one.
  explicit AlphabetPartition(const std::vector<Action>& actions) {
    std::map<std::string, ActionKind> seen;
    std::vector<Action> idles;
    for (const auto& a : actions) {
      auto [it, inserted] = seen.emplace(a.token(), a.kind);
      if (!inserted) {
        if (it->second != a.kind)
          throw ConfigError("action '" + a.token() + "' declared in both the " +
                            std::string(to_string(it->second)) + " and the " + std::string(to_string(a.kind)) +
                            " alphabets");
        continue;
      }
      switch (a.kind) {
        case ActionKind::Program: program_.insert(a); break;
        case ActionKind::Call: calls_.insert(a); break;
        case ActionKind::Return: returns_.insert(a); break;
        case ActionKind::Internal: internal_.insert(a); break;
        case ActionKind::Idle: idles.push_back(a); break;
      }
    }
    if (idles.size() != 1)
      throw ConfigError("alphabet must declare exactly one idle action, found " + std::to_string(idles.size()));
    idle_ = idles.front();
  }

  const ActionSet& program() const { return program_; }
  const ActionSet& calls() const { return calls_; }
  const ActionSet& returns() const { return returns_; }
  const ActionSet& internal() const { return internal_; }
  const Action& idle() const { return idle_; }

  /// Program actions plus calls and returns.
  ActionSet gamma_p() const { return set_union(program_, set_union(calls_, returns_)); }
  ActionSet calls_and_returns() const { return set_union(calls_, returns_); }
  ActionSet all() const {
    ActionSet s = set_union(gamma_p(), internal_);
    s.insert(idle_);
    return s;
  }

 private:
  ActionSet program_, calls_, returns_, internal_;
  Action idle_ = idle_action();
};

struct Edge {
  ActionId action;
  StateId target;
};

struct RawTransition {
  StateId from;
  Action action;
  StateId to;
};

struct DeterminismReport {
  bool deterministic = true;
  std::optional<std::pair<StateId, Action>> witness;
};

class LtsBuilder;

/// Finite deterministic labelled transition system. Immutable once built;
/// the transition function is stored per state, sorted by action id, and
/// action ids index the canonically sorted alphabet.
class Lts {
 public:
  Lts() = default;

  std::size_t num_states() const { return edges_.size(); }
  StateId initial() const { return initial_; }
  const AlphabetPartition& partition() const { return partition_; }
  std::span<const Action> alphabet() const { return alphabet_; }
  const Action& action(ActionId id) const { return alphabet_.at(id); }
  ActionId idle_id() const { return idle_id_; }

  std::optional<ActionId> find_action(const Action& a) const {
    auto it = std::lower_bound(alphabet_.begin(), alphabet_.end(), a);
    if (it == alphabet_.end() || *it != a) return std::nullopt;
    return static_cast<ActionId>(it - alphabet_.begin());
  }

  std::optional<ActionId> find_token(const std::string& token) const {
    auto it = token_index_.find(token);
    if (it == token_index_.end()) return std::nullopt;
    return it->second;
  }

  std::span<const Edge> edges(StateId s) const {
    check_state(s);
    return edges_[s];
  }

  std::optional<StateId> successor(StateId s, ActionId a) const {
    const auto& row = edges_.at(s);
    auto it = std::lower_bound(row.begin(), row.end(), a, [](const Edge& e, ActionId id) { return e.action < id; });
    if (it == row.end() || it->action != a) return std::nullopt;
    return it->target;
  }

  std::optional<StateId> successor(StateId s, const Action& a) const {
    check_state(s);
    auto id = find_action(a);
    if (!id) return std::nullopt;
    return successor(s, *id);
  }

  const std::string& label(StateId s) const {
    check_state(s);
    return labels_[s];
  }

  std::size_t num_transitions() const {
    std::size_t n = 0;
    for (const auto& row : edges_) n += row.size();
    return n;
  }

  /// Idle invariant: idle is enabled exactly where nothing else is, and idle
  /// transitions are self-loops.
  bool is_idle_complete() const {
    for (StateId s = 0; s < num_states(); ++s) {
      bool has_other = false, has_idle = false;
      for (const auto& e : edges_[s]) {
        if (e.action == idle_id_) {
          has_idle = true;
          if (e.target != s) return false;
        } else {
          has_other = true;
        }
      }
      if (has_other == has_idle) return false;
    }
    return true;
  }

  std::vector<RawTransition> transitions() const {
    std::vector<RawTransition> out;
    for (StateId s = 0; s < num_states(); ++s)
      for (const auto& e : edges_[s]) out.push_back({s, alphabet_[e.action], e.target});
    return out;
  }

  void check_state(StateId s) const {
    if (s >= edges_.size())
      throw StructuralError("state index " + std::to_string(s) + " out of range (" + std::to_string(edges_.size()) +
                            " states)");
  }

 private:
  friend class LtsBuilder;

  StateId initial_ = 0;
  AlphabetPartition partition_;
  std::vector<Action> alphabet_;
  std::unordered_map<std::string, ActionId> token_index_;
  ActionId idle_id_ = 0;
  std::vector<std::vector<Edge>> edges_;
  std::vector<std::string> labels_;
};

/// Collects raw rows, then validates and freezes them into an Lts.
class LtsBuilder {
 public:
  void declare(const Action& a) {
    if (std::find(actions_.begin(), actions_.end(), a) == actions_.end()) actions_.push_back(a);
  }
  void declare(const ActionSet& s) {
    for (const auto& a : s) declare(a);
  }

  StateId add_state(std::string label = {}) {
    labels_.push_back(std::move(label));
    return static_cast<StateId>(labels_.size() - 1);
  }

  void set_num_states(std::size_t n) { labels_.resize(n); }
  std::size_t num_states() const { return labels_.size(); }
  void set_label(StateId s, std::string label) { labels_.at(s) = std::move(label); }
  void set_initial(StateId s) { initial_ = s; }

  void add_transition(StateId from, const Action& a, StateId to) {
    declare(a);
    rows_.push_back({from, a, to});
  }

  const std::vector<RawTransition>& rows() const { return rows_; }
  const std::vector<Action>& declared() const { return actions_; }

  DeterminismReport check_deterministic() const;

  /// Throws StructuralError on dangling indices or a (state, action) with two
  /// successors, ConfigError on alphabet problems.
  Lts build() const {
    AlphabetPartition partition(actions_);
    Lts lts;
    lts.partition_ = partition;
    lts.alphabet_ = partition.all().items();
    for (ActionId i = 0; i < lts.alphabet_.size(); ++i) lts.token_index_.emplace(lts.alphabet_[i].token(), i);
    lts.idle_id_ = *lts.find_action(partition.idle());
    if (labels_.empty()) throw StructuralError("LTS has no states");
    if (initial_ >= labels_.size()) throw StructuralError("initial state " + std::to_string(initial_) + " out of range");
    lts.initial_ = initial_;
    lts.labels_ = labels_;
    lts.edges_.assign(labels_.size(), {});
    for (const auto& r : rows_) {
      if (r.from >= labels_.size() || r.to >= labels_.size())
        throw StructuralError("transition " + std::to_string(r.from) + " -- " + r.action.token() + " -> " +
                              std::to_string(r.to) + " references a missing state");
      auto id = lts.find_action(r.action);
      if (!id) throw ConfigError("action '" + r.action.token() + "' is not declared in the alphabet");
      lts.edges_[r.from].push_back({*id, r.to});
    }
    for (StateId s = 0; s < lts.edges_.size(); ++s) {
      auto& row = lts.edges_[s];
      std::sort(row.begin(), row.end(), [](const Edge& a, const Edge& b) {
        return a.action != b.action ? a.action < b.action : a.target < b.target;
      });
      for (std::size_t i = 1; i < row.size(); ++i) {
        if (row[i].action != row[i - 1].action) continue;
        if (row[i].target == row[i - 1].target) continue;
        throw StructuralError("state " + std::to_string(s) + " has two successors on '" +
                              lts.alphabet_[row[i].action].token() + "'");
      }
      row.erase(std::unique(row.begin(), row.end(),
                            [](const Edge& a, const Edge& b) { return a.action == b.action && a.target == b.target; }),
                row.end());
    }
    return lts;
  }

 private:
  std::vector<Action> actions_;
  std::vector<std::string> labels_;
  std::vector<RawTransition> rows_;
  StateId initial_ = 0;
};

/// Single-valuedness of a raw transition table. The witness is the first
/// (state, action) in canonical order that has two distinct successors.
inline DeterminismReport check_deterministic(std::span<const RawTransition> rows) {
  std::map<std::pair<StateId, Action>, StateId> seen;
  std::optional<std::pair<StateId, Action>> witness;
  for (const auto& r : rows) {
    auto key = std::make_pair(r.from, r.action);
    auto [it, inserted] = seen.emplace(key, r.to);
    if (!inserted && it->second != r.to && (!witness || key < *witness)) witness = key;
  }
  return {!witness.has_value(), witness};
}

inline DeterminismReport LtsBuilder::check_deterministic() const { return progsim::check_deterministic(rows_); }

inline DeterminismReport check_deterministic(const Lts& lts) {
  auto rows = lts.transitions();
  return check_deterministic(std::span<const RawTransition>(rows));
}

inline std::vector<Action> enabled(const Lts& lts, StateId s) {
  std::vector<Action> out;
  for (const auto& e : lts.edges(s)) out.push_back(lts.action(e.action));
  return out;
}

/// state(σ). Throws ReplayError carrying the position and action of the
/// first step that is not enabled.
inline StateId run(const Lts& lts, std::span<const Action> trace, std::optional<StateId> from = std::nullopt) {
  StateId s = from.value_or(lts.initial());
  lts.check_state(s);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    auto next = lts.successor(s, trace[i]);
    if (!next)
      throw ReplayError(i, trace[i],
                        "step " + std::to_string(i) + " ('" + trace[i].token() + "') is not enabled in state " +
                            std::to_string(s));
    s = *next;
  }
  return s;
}

/// Order-preserving filter of a trace to the members of gamma.
inline Trace project(std::span<const Action> trace, const ActionSet& gamma) {
  Trace out;
  for (const auto& a : trace)
    if (gamma.contains(a)) out.push_back(a);
  return out;
}

/// Infinite trace stem·cycle^ω of a finite LTS.
struct Lasso {
  Trace stem;
  Trace cycle;

  bool operator==(const Lasso&) const = default;
};

/// Projection of a lasso; an empty projected cycle means the projected trace
/// is finite (the stem projection).
inline Lasso project(const Lasso& l, const ActionSet& gamma) { return {project(l.stem, gamma), project(l.cycle, gamma)}; }

/// Replays stem then cycle; valid iff every step is enabled, the cycle is
/// non-empty and it returns to the state it started from.
inline bool is_valid_lasso(const Lts& lts, const Lasso& l) {
  if (l.cycle.empty()) return false;
  try {
    StateId entry = run(lts, l.stem);
    return run(lts, l.cycle, entry) == entry;
  } catch (const ReplayError&) {
    return false;
  }
}

/// Adds the idle self-loop to exactly the states with no other enabled action.
/// Existing idle transitions elsewhere are dropped so the result satisfies the
/// idle invariant.
inline Lts idle_complete(const Lts& lts) {
  LtsBuilder b;
  for (const auto& a : lts.alphabet()) b.declare(a);
  b.set_num_states(lts.num_states());
  for (StateId s = 0; s < lts.num_states(); ++s) b.set_label(s, lts.label(s));
  b.set_initial(lts.initial());
  for (StateId s = 0; s < lts.num_states(); ++s) {
    bool other = false;
    for (const auto& e : lts.edges(s)) {
      if (e.action == lts.idle_id()) continue;
      other = true;
      b.add_transition(s, lts.action(e.action), e.target);
    }
    if (!other) b.add_transition(s, lts.partition().idle(), s);
  }
  return b.build();
}

/// States reachable from the initial state.
inline std::vector<bool> reachable_states(const Lts& lts) {
  std::vector<bool> seen(lts.num_states(), false);
  std::vector<StateId> stack{lts.initial()};
  seen[lts.initial()] = true;
  while (!stack.empty()) {
    StateId s = stack.back();
    stack.pop_back();
    for (const auto& e : lts.edges(s))
      if (!seen[e.target]) {
        seen[e.target] = true;
        stack.push_back(e.target);
      }
  }
  return seen;
}

/// States from which some transition on an action in `targets` is reachable.
inline std::vector<bool> can_reach_action(const Lts& lts, const ActionSet& targets) {
  std::vector<std::vector<StateId>> preds(lts.num_states());
  std::vector<bool> good(lts.num_states(), false);
  std::vector<StateId> work;
  for (StateId s = 0; s < lts.num_states(); ++s)
    for (const auto& e : lts.edges(s)) {
      preds[e.target].push_back(s);
      if (!good[s] && targets.contains(lts.action(e.action))) {
        good[s] = true;
        work.push_back(s);
      }
    }
  while (!work.empty()) {
    StateId s = work.back();
    work.pop_back();
    for (StateId p : preds[s])
      if (!good[p]) {
        good[p] = true;
        work.push_back(p);
      }
  }
  return good;
}

}  // namespace progsim
