#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "progsim/lts.hpp"
#include "progsim/lts_io.hpp"

namespace progsim {

/// S : Σ* → 2^Σ. Implementations must be pure: the same trace always yields
/// the same set.
class Scheduler {
 public:
  virtual ~Scheduler() = default;
  virtual std::string describe() const = 0;
  virtual ActionSet schedule(std::span<const Action> trace) const = 0;
};

using SchedulerPtr = std::shared_ptr<const Scheduler>;

/// A scheduler driven by the current state of one LTS plus a finite memory
/// updated on every step. Exploring (state, memory) pairs instead of traces
/// makes the bounded checks exact once the pair graph is exhausted.
class FiniteMemoryScheduler : public Scheduler {
 public:
  using Memory = std::vector<std::uint32_t>;

  explicit FiniteMemoryScheduler(std::shared_ptr<const Lts> lts) : lts_(std::move(lts)) {}

  const Lts& lts() const { return *lts_; }
  const std::shared_ptr<const Lts>& lts_ptr() const { return lts_; }

  virtual Memory initial_memory() const { return {}; }
  /// Sorted action ids of the scheduled set.
  virtual std::vector<ActionId> choose(StateId s, const Memory& m) const = 0;
  virtual Memory update(const Memory& m, StateId /*from*/, ActionId /*a*/, StateId /*to*/) const { return m; }

  /// Traces that leave the LTS get the empty set.
  ActionSet schedule(std::span<const Action> trace) const final {
    StateId s = lts_->initial();
    Memory m = initial_memory();
    for (const auto& a : trace) {
      auto id = lts_->find_action(a);
      if (!id) return {};
      auto next = lts_->successor(s, *id);
      if (!next) return {};
      m = update(m, s, *id, *next);
      s = *next;
    }
    return to_set(choose(s, m));
  }

  ActionSet to_set(const std::vector<ActionId>& ids) const {
    std::vector<Action> out;
    for (auto id : ids) out.push_back(lts_->action(id));
    return ActionSet(std::move(out));
  }

 protected:
  std::vector<ActionId> enabled_ids(StateId s) const {
    std::vector<ActionId> out;
    for (const auto& e : lts_->edges(s)) out.push_back(e.action);
    return out;
  }

 private:
  std::shared_ptr<const Lts> lts_;
};

/// Every enabled action.
class MaximalScheduler final : public FiniteMemoryScheduler {
 public:
  using FiniteMemoryScheduler::FiniteMemoryScheduler;
  std::string describe() const override { return "strategy=maximal"; }
  std::vector<ActionId> choose(StateId s, const Memory&) const override { return enabled_ids(s); }
};

/// The canonically smallest enabled action.
class FirstEnabledScheduler final : public FiniteMemoryScheduler {
 public:
  using FiniteMemoryScheduler::FiniteMemoryScheduler;
  std::string describe() const override { return "strategy=first"; }
  std::vector<ActionId> choose(StateId s, const Memory&) const override {
    auto e = enabled_ids(s);
    if (e.empty()) return {};
    return {e.front()};
  }
};

/// Lowest-numbered thread first; untagged actions only when no thread can move.
class ThreadPriorityScheduler final : public FiniteMemoryScheduler {
 public:
  using FiniteMemoryScheduler::FiniteMemoryScheduler;
  std::string describe() const override { return "strategy=thread-priority"; }
  std::vector<ActionId> choose(StateId s, const Memory&) const override {
    std::optional<ActionId> best;
    auto key = [&](ActionId id) {
      const auto& t = lts().action(id).thread;
      return t ? *t : std::numeric_limits<int>::max();
    };
    for (auto id : enabled_ids(s))
      if (!best || key(id) < key(*best)) best = id;
    if (!best) return {};
    return {*best};
  }
};

/// Cycles through thread tags; memory holds the thread served last.
class RoundRobinScheduler final : public FiniteMemoryScheduler {
 public:
  using FiniteMemoryScheduler::FiniteMemoryScheduler;
  std::string describe() const override { return "strategy=round-robin"; }
  Memory initial_memory() const override { return {0}; }
  std::vector<ActionId> choose(StateId s, const Memory& m) const override {
    auto ids = enabled_ids(s);
    if (ids.empty()) return {};
    std::map<int, ActionId> first_of_thread;
    for (auto id : ids) {
      const auto& t = lts().action(id).thread;
      if (t) first_of_thread.emplace(*t, id);
    }
    if (first_of_thread.empty()) return {ids.front()};
    int last = static_cast<int>(m.at(0));
    auto it = first_of_thread.upper_bound(last);
    if (it == first_of_thread.end()) it = first_of_thread.begin();
    return {it->second};
  }
  Memory update(const Memory& m, StateId, ActionId a, StateId) const override {
    const auto& t = lts().action(a).thread;
    return t ? Memory{static_cast<std::uint32_t>(*t)} : m;
  }
};

/// Serves the action that has been continuously enabled the longest. Memory
/// is the enabled set ordered by age.
class FifoScheduler final : public FiniteMemoryScheduler {
 public:
  using FiniteMemoryScheduler::FiniteMemoryScheduler;
  std::string describe() const override { return "strategy=fifo"; }
  Memory initial_memory() const override {
    auto ids = enabled_ids(lts().initial());
    return {ids.begin(), ids.end()};
  }
  std::vector<ActionId> choose(StateId, const Memory& m) const override {
    if (m.empty()) return {};
    return {m.front()};
  }
  Memory update(const Memory& m, StateId, ActionId a, StateId to) const override {
    auto now = enabled_ids(to);
    auto enabled_now = [&](std::uint32_t id) { return std::binary_search(now.begin(), now.end(), id); };
    Memory out;
    for (auto id : m)
      if (id != a && enabled_now(id)) out.push_back(id);
    for (auto id : now)
      if (std::find(out.begin(), out.end(), id) == out.end() && id != a) out.push_back(id);
    if (enabled_now(a)) out.push_back(a);
    return out;
  }
};

/// All enabled program actions when there are any, otherwise the smallest
/// enabled action. Deterministic on products by construction.
class ProgramSetScheduler final : public FiniteMemoryScheduler {
 public:
  using FiniteMemoryScheduler::FiniteMemoryScheduler;
  std::string describe() const override { return "strategy=program-set"; }
  std::vector<ActionId> choose(StateId s, const Memory&) const override {
    auto ids = enabled_ids(s);
    std::vector<ActionId> prog;
    for (auto id : ids)
      if (lts().action(id).kind == ActionKind::Program) prog.push_back(id);
    if (!prog.empty()) return prog;
    if (ids.empty()) return {};
    return {ids.front()};
  }
};

/// Adversary for LL/SC objects whose LL invalidates other threads' links.
/// Priorities, first match wins:
///   1. a pending call;
///   2. LL of thread j while another thread holds a link it could still
///      commit (its SC_ok is enabled), breaking that link;
///   3. a failing SC;
///   4. any LL;
///   5. the smallest enabled action.
/// On the fetch-and-add case study this drives both threads around the
/// LL/SC retry loop forever.
class LlAlternatorScheduler final : public FiniteMemoryScheduler {
 public:
  using FiniteMemoryScheduler::FiniteMemoryScheduler;
  std::string describe() const override { return "strategy=ll-alternator"; }
  std::vector<ActionId> choose(StateId s, const Memory&) const override {
    auto ids = enabled_ids(s);
    if (ids.empty()) return {};
    auto named = [&](const char* n) {
      std::vector<ActionId> out;
      for (auto id : ids)
        if (lts().action(id).name == n) out.push_back(id);
      return out;
    };
    if (auto calls = named("call"); !calls.empty()) return {calls.front()};
    auto lls = named("LL");
    for (auto ok : named("SC_ok")) {
      auto holder = lts().action(ok).thread;
      for (auto ll : lls)
        if (lts().action(ll).thread != holder) return {ll};
    }
    if (auto fails = named("SC_fail"); !fails.empty()) return {fails.front()};
    if (!lls.empty()) return {lls.front()};
    return {ids.front()};
  }
};

/// Memoryless scheduler given as an explicit per-state table.
class StateTableScheduler final : public FiniteMemoryScheduler {
 public:
  StateTableScheduler(std::shared_ptr<const Lts> lts, std::vector<std::vector<ActionId>> table, std::string name)
      : FiniteMemoryScheduler(std::move(lts)), table_(std::move(table)), name_(std::move(name)) {
    for (auto& row : table_) std::sort(row.begin(), row.end());
  }
  std::string describe() const override { return name_; }
  std::vector<ActionId> choose(StateId s, const Memory&) const override { return table_.at(s); }

 private:
  std::vector<std::vector<ActionId>> table_;
  std::string name_;
};

/// Trace-indexed table up to a declared depth. Traces within the depth that
/// have no entry get `fallback`; longer traces throw DepthExhausted.
class TableScheduler final : public Scheduler {
 public:
  TableScheduler(std::map<Trace, ActionSet> table, std::size_t depth, ActionSet fallback = {})
      : table_(std::move(table)), depth_(depth), fallback_(std::move(fallback)) {}

  std::string describe() const override { return "table(depth=" + std::to_string(depth_) + ")"; }
  ActionSet schedule(std::span<const Action> trace) const override {
    if (trace.size() > depth_) throw DepthExhausted(depth_);
    auto it = table_.find(Trace(trace.begin(), trace.end()));
    return it == table_.end() ? fallback_ : it->second;
  }

  const std::map<Trace, ActionSet>& table() const { return table_; }
  std::size_t depth() const { return depth_; }
  const ActionSet& fallback() const { return fallback_; }

 private:
  std::map<Trace, ActionSet> table_;
  std::size_t depth_;
  ActionSet fallback_;
};

// Table JSON: {"schema_version":1,"depth":d,"default":[..],"table":{"<trace>":[..]}}
// where <trace> is space-separated action tokens and "" is the empty trace.

inline nlohmann::json table_to_json(const std::map<Trace, ActionSet>& table, std::size_t depth,
                                    const ActionSet& fallback) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["depth"] = depth;
  auto tokens = [](const ActionSet& s) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& a : s) arr.push_back(a.token());
    return arr;
  };
  j["default"] = tokens(fallback);
  nlohmann::json t = nlohmann::json::object();
  for (const auto& [trace, set] : table) {
    std::string key;
    for (std::size_t i = 0; i < trace.size(); ++i) key += (i ? " " : "") + trace[i].token();
    t[key] = tokens(set);
  }
  j["table"] = t;
  return j;
}

/// Resolves tokens against `lts`; unknown tokens are a ConfigError.
inline std::shared_ptr<TableScheduler> table_from_json(const nlohmann::json& j, const Lts& lts) {
  auto resolve = [&](const std::string& tok) {
    auto id = lts.find_token(tok);
    if (!id) throw ConfigError("scheduler table mentions unknown action '" + tok + "'");
    return lts.action(*id);
  };
  auto set_of = [&](const nlohmann::json& arr) {
    std::vector<Action> out;
    for (const auto& t : arr) out.push_back(resolve(t.get<std::string>()));
    return ActionSet(std::move(out));
  };
  try {
    std::map<Trace, ActionSet> table;
    for (const auto& [key, val] : j.at("table").items()) {
      Trace t;
      std::istringstream ss(key);
      std::string tok;
      while (ss >> tok) t.push_back(resolve(tok));
      table.emplace(std::move(t), set_of(val));
    }
    ActionSet fallback = j.contains("default") ? set_of(j.at("default")) : ActionSet{};
    return std::make_shared<TableScheduler>(std::move(table), j.at("depth").get<std::size_t>(), std::move(fallback));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed scheduler table: ") + e.what());
  }
}

/// Strategy names accepted by make_scheduler.
inline const std::vector<std::string>& strategy_names() {
  static const std::vector<std::string> names{"maximal",     "first",       "thread-priority", "round-robin",
                                              "fifo",        "program-set", "ll-alternator"};
  return names;
}

/// Parses `strategy=<name>`, a bare strategy name, or `table=<file.json>`.
inline SchedulerPtr make_scheduler(const std::string& spec, std::shared_ptr<const Lts> lts) {
  std::string key = "strategy", value = spec;
  if (auto eq = spec.find('='); eq != std::string::npos) {
    key = spec.substr(0, eq);
    value = spec.substr(eq + 1);
  }
  if (key == "table") return table_from_json(nlohmann::json::parse(read_file(value)), *lts);
  if (key != "strategy") throw ConfigError("unknown scheduler spec '" + spec + "'");
  if (value == "maximal") return std::make_shared<MaximalScheduler>(lts);
  if (value == "first") return std::make_shared<FirstEnabledScheduler>(lts);
  if (value == "thread-priority") return std::make_shared<ThreadPriorityScheduler>(lts);
  if (value == "round-robin") return std::make_shared<RoundRobinScheduler>(lts);
  if (value == "fifo") return std::make_shared<FifoScheduler>(lts);
  if (value == "program-set") return std::make_shared<ProgramSetScheduler>(lts);
  if (value == "ll-alternator") return std::make_shared<LlAlternatorScheduler>(lts);
  throw ConfigError("unknown strategy '" + value + "'");
}

}  // namespace progsim
