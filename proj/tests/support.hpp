#pragma once

// Generators and independent oracles shared by the test suites. The oracles
// avoid the library's algorithms: matches are computed by closure over state
// sets, simulations by enumerating relations, progress by enumerating ranks.

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <set>
#include <vector>

#include "progsim/progsim.hpp"

namespace progsim::testing {

using Rng = std::mt19937_64;

inline Action act(const std::string& name, ActionKind k, std::optional<int> thread = std::nullopt) {
  return make_action(name, k, thread);
}

/// run() that answers "not enabled" with nullopt instead of throwing.
inline std::optional<StateId> try_run(const Lts& l, std::span<const Action> t,
                                      std::optional<StateId> from = std::nullopt) {
  try {
    return run(l, t, from);
  } catch (const ReplayError&) {
    return std::nullopt;
  }
}

/// Deterministic LTS over `letters` (plus idle) where each (state, letter)
/// gets an edge with probability `density`, then idle-completed.
inline Lts random_lts(Rng& rng, std::size_t n, const std::vector<Action>& letters, double density) {
  std::uniform_real_distribution<double> coin(0, 1);
  std::uniform_int_distribution<StateId> target(0, static_cast<StateId>(n - 1));
  LtsBuilder b;
  for (const auto& a : letters) b.declare(a);
  b.declare(idle_action());
  b.set_num_states(n);
  for (StateId s = 0; s < n; ++s)
    for (const auto& a : letters)
      if (coin(rng) < density) b.add_transition(s, a, target(rng));
  return idle_complete(b.build());
}

/// Calls `fn` on every idle-completed LTS with `n` states over `letters`:
/// each (state, letter) is either absent or points to one of the n states.
inline void for_each_lts(std::size_t n, const std::vector<Action>& letters, const std::function<void(const Lts&)>& fn) {
  const std::size_t slots = n * letters.size();
  std::vector<std::size_t> choice(slots, 0);
  for (;;) {
    LtsBuilder b;
    for (const auto& a : letters) b.declare(a);
    b.declare(idle_action());
    b.set_num_states(n);
    for (std::size_t i = 0; i < slots; ++i)
      if (choice[i] > 0) b.add_transition(static_cast<StateId>(i / letters.size()), letters[i % letters.size()],
                                          static_cast<StateId>(choice[i] - 1));
    fn(idle_complete(b.build()));
    std::size_t k = 0;
    while (k < slots && ++choice[k] == n + 1) choice[k++] = 0;
    if (k == slots) break;
  }
}

/// All traces of `a` of length at most `depth`, by plain DFS.
inline std::vector<Trace> all_traces(const Lts& a, std::size_t depth) {
  std::vector<Trace> out;
  std::function<void(StateId, Trace&)> go = [&](StateId s, Trace& t) {
    out.push_back(t);
    if (t.size() == depth) return;
    for (const auto& e : a.edges(s)) {
      t.push_back(a.action(e.action));
      go(e.target, t);
      t.pop_back();
    }
  };
  Trace t;
  go(a.initial(), t);
  std::sort(out.begin(), out.end());
  return out;
}

/// Definitional consistency, written without the library helper.
inline bool consistent_by_definition(const Trace& t, const Scheduler& s) {
  Trace prefix;
  for (const auto& a : t) {
    auto set = s.schedule(prefix);
    if (std::find(set.begin(), set.end(), a) == set.end()) return false;
    prefix.push_back(a);
  }
  return true;
}

/// Random table scheduler over the traces of `a` up to `depth`: each entry
/// is a random subset of the enabled actions (possibly empty when
/// `allow_empty`), sometimes with a disabled action mixed in.
inline std::shared_ptr<TableScheduler> random_table(Rng& rng, const Lts& a, std::size_t depth, bool allow_empty,
                                                    double disabled_rate = 0.0) {
  std::uniform_real_distribution<double> coin(0, 1);
  std::map<Trace, ActionSet> table;
  for (const auto& t : all_traces(a, depth)) {
    StateId s = run(a, t);
    std::vector<Action> pick;
    for (const auto& e : a.edges(s))
      if (coin(rng) < 0.6) pick.push_back(a.action(e.action));
    if (pick.empty() && !allow_empty && !a.edges(s).empty()) pick.push_back(a.action(a.edges(s).front().action));
    if (coin(rng) < disabled_rate) {
      for (const auto& x : a.alphabet())
        if (!a.successor(s, x)) {
          pick.push_back(x);
          break;
        }
    }
    table.emplace(t, ActionSet(pick));
  }
  return std::make_shared<TableScheduler>(table, depth + 1, ActionSet{});
}

// ---------------------------------------------------------------------------
// Match oracle: which abstract states can answer a concrete action.

struct MatchOracle {
  // reach[a1 action][s2] = targets of some α with α|Γ = a|Γ; plus[s2] = targets
  // of a non-empty silent α.
  std::vector<std::vector<std::set<StateId>>> reach;
  std::vector<std::set<StateId>> silent_plus;
};

inline MatchOracle match_oracle(const Lts& a1, const Lts& a2, const ActionSet& gamma) {
  const std::size_t n = a2.num_states();
  // Transitive closure of silent edges by repeated squaring-free relaxation.
  std::vector<std::vector<bool>> plus(n, std::vector<bool>(n, false));
  for (StateId s = 0; s < n; ++s)
    for (const auto& e : a2.edges(s))
      if (!gamma.contains(a2.action(e.action))) plus[s][e.target] = true;
  for (StateId k = 0; k < n; ++k)
    for (StateId i = 0; i < n; ++i)
      if (plus[i][k])
        for (StateId j = 0; j < n; ++j)
          if (plus[k][j]) plus[i][j] = true;
  auto star = [&](StateId s) {
    std::set<StateId> out{s};
    for (StateId t = 0; t < n; ++t)
      if (plus[s][t]) out.insert(t);
    return out;
  };
  MatchOracle m;
  m.silent_plus.resize(n);
  for (StateId s = 0; s < n; ++s)
    for (StateId t = 0; t < n; ++t)
      if (plus[s][t]) m.silent_plus[s].insert(t);
  m.reach.resize(a1.alphabet().size(), std::vector<std::set<StateId>>(n));
  for (ActionId a = 0; a < a1.alphabet().size(); ++a) {
    const Action& x = a1.action(a);
    for (StateId s = 0; s < n; ++s) {
      if (!gamma.contains(x)) {
        m.reach[a][s] = star(s);
        continue;
      }
      for (StateId y : star(s)) {
        auto z = a2.successor(y, x);
        if (!z) continue;
        for (StateId t : star(*z)) m.reach[a][s].insert(t);
      }
    }
  }
  return m;
}

// `allowed(s1, a, s1next, s2, t, silent_nonempty)`: whether moving to t is a
// legal answer. Relations are bitmasks over Q1 × Q2.
using Relation = std::vector<bool>;

inline bool closed(const Lts& a1, const Lts& a2, const Relation& r,
                   const std::function<bool(StateId, ActionId, StateId, StateId, StateId)>& allowed) {
  const std::size_t n2 = a2.num_states();
  for (StateId s1 = 0; s1 < a1.num_states(); ++s1)
    for (StateId s2 = 0; s2 < n2; ++s2) {
      if (!r[s1 * n2 + s2]) continue;
      for (const auto& e : a1.edges(s1)) {
        bool ok = false;
        for (StateId t = 0; t < n2 && !ok; ++t)
          ok = r[e.target * n2 + t] && allowed(s1, e.action, e.target, s2, t);
        if (!ok) return false;
      }
    }
  return true;
}

struct BruteForceResult {
  Relation union_all;        // union of every closed relation
  Relation union_with_init;  // union of the closed relations containing the initial pair
  bool any_with_init = false;
};

/// Enumerates every relation over Q1 × Q2 (|Q1|·|Q2| ≤ 20).
inline BruteForceResult brute_force_simulations(const Lts& a1, const Lts& a2, const ActionSet& gamma) {
  auto m = match_oracle(a1, a2, gamma);
  const std::size_t n2 = a2.num_states(), pairs = a1.num_states() * n2;
  if (pairs > 20) throw std::logic_error("brute force limited to 20 pairs");
  BruteForceResult out;
  out.union_all.assign(pairs, false);
  out.union_with_init.assign(pairs, false);
  auto allowed = [&](StateId, ActionId a, StateId, StateId s2, StateId t) { return m.reach[a][s2].count(t) > 0; };
  const std::size_t init = a1.initial() * n2 + a2.initial();
  Relation r(pairs);
  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << pairs); ++mask) {
    for (std::size_t i = 0; i < pairs; ++i) r[i] = (mask >> i) & 1;
    if (!closed(a1, a2, r, allowed)) continue;
    for (std::size_t i = 0; i < pairs; ++i)
      if (r[i]) out.union_all[i] = true;
    if (r[init]) {
      out.any_with_init = true;
      for (std::size_t i = 0; i < pairs; ++i)
        if (r[i]) out.union_with_init[i] = true;
    }
  }
  return out;
}

/// Existence of a progressive simulation: try every rank ρ : Q1 → {0..|Q1|-1}
/// and take the greatest relation closed under moves where an empty match
/// needs ρ to drop.
inline bool progressive_by_ranks(const Lts& a1, const Lts& a2, const ActionSet& gamma) {
  auto m = match_oracle(a1, a2, gamma);
  const std::size_t n1 = a1.num_states(), n2 = a2.num_states();
  std::vector<std::size_t> rank(n1, 0);
  for (;;) {
    auto allowed = [&](StateId s1, ActionId a, StateId s1n, StateId s2, StateId t) {
      if (gamma.contains(a1.action(a))) return m.reach[a][s2].count(t) > 0;
      if (m.silent_plus[s2].count(t)) return true;  // a non-empty silent α
      return t == s2 && rank[s1n] < rank[s1];
    };
    Relation r(n1 * n2, true);
    for (bool changed = true; changed;) {
      changed = false;
      for (StateId s1 = 0; s1 < n1; ++s1)
        for (StateId s2 = 0; s2 < n2; ++s2) {
          if (!r[s1 * n2 + s2]) continue;
          for (const auto& e : a1.edges(s1)) {
            bool ok = false;
            for (StateId t = 0; t < n2 && !ok; ++t) ok = r[e.target * n2 + t] && allowed(s1, e.action, e.target, s2, t);
            if (!ok) {
              r[s1 * n2 + s2] = false;
              changed = true;
              break;
            }
          }
        }
    }
    if (r[a1.initial() * n2 + a2.initial()]) return true;
    std::size_t k = 0;
    while (k < n1 && ++rank[k] == n1) rank[k++] = 0;
    if (k == n1) return false;
  }
}

/// Second, independent reading of the certificate clauses: every related
/// pair and concrete step has a choice whose sequence replays, agrees with
/// the step on gamma, and lands in the relation; empty choices lower the rank.
inline bool certificate_holds(const SimulationCertificate& c, const ProgressWitness* w, const Lts& a1, const Lts& a2) {
  std::set<std::pair<StateId, StateId>> rel(c.relation.begin(), c.relation.end());
  if (!rel.count({a1.initial(), a2.initial()})) return false;
  for (auto [s1, s2] : rel) {
    for (const auto& x : enabled(a1, s1)) {
      auto it = c.choice.find({s1, x, s2});
      if (it == c.choice.end()) return false;
      const Trace& alpha = it->second.alpha;
      if (alpha.size() > c.alpha_bound) return false;
      Trace lhs, rhs;
      if (c.gamma.contains(x)) lhs.push_back(x);
      for (const auto& y : alpha)
        if (c.gamma.contains(y)) rhs.push_back(y);
      if (lhs != rhs) return false;
      StateId cur = s2;
      for (const auto& y : alpha) {
        auto nx = a2.successor(cur, y);
        if (!nx) return false;
        cur = *nx;
      }
      StateId s1n = *a1.successor(s1, x);
      if (cur != it->second.target || !rel.count({s1n, cur})) return false;
      if (w && alpha.empty() && !(w->rank.at(s1n) < w->rank.at(s1))) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Program/object instances for the construction.

struct Instance {
  Lts program, o1, o2;
  std::shared_ptr<const Product> p1, p2;
  SchedulerPtr s1;
};

inline std::vector<Action> interface_actions() {
  return {act("call", ActionKind::Call, 1), act("call", ActionKind::Call, 2), act("ret", ActionKind::Return, 1),
          act("ret", ActionKind::Return, 2)};
}

/// Random abstract object: calls, returns and one internal `lin`.
inline Lts random_spec_object(Rng& rng, std::size_t n) {
  auto letters = interface_actions();
  letters.push_back(act("lin", ActionKind::Internal));
  return random_lts(rng, n, letters, 0.45);
}

/// O1 from O2: some transitions get an internal `tau` step in front
/// (through a fresh state), and some states get a `tau` detour that rejoins
/// the state it left from a fresh state.
inline Lts perturb(Rng& rng, const Lts& o2) {
  std::uniform_real_distribution<double> coin(0, 1);
  const Action tau = act("tau", ActionKind::Internal);
  LtsBuilder b;
  for (const auto& a : o2.alphabet()) b.declare(a);
  b.declare(tau);
  b.set_num_states(o2.num_states());
  b.set_initial(o2.initial());
  for (StateId s = 0; s < o2.num_states(); ++s) {
    bool tau_used = false;
    for (const auto& e : o2.edges(s)) {
      const Action& a = o2.action(e.action);
      if (a.is_idle()) continue;
      if (!tau_used && coin(rng) < 0.3) {
        StateId mid = b.add_state();
        b.add_transition(s, tau, mid);
        b.add_transition(mid, a, e.target);
        tau_used = true;
      } else {
        b.add_transition(s, a, e.target);
      }
    }
    if (!tau_used && coin(rng) < 0.15) {
      // tau then every action of s, i.e. an internal step with no effect
      StateId mid = b.add_state();
      b.add_transition(s, tau, mid);
      for (const auto& e : o2.edges(s))
        if (!o2.action(e.action).is_idle()) b.add_transition(mid, o2.action(e.action), e.target);
    }
  }
  return idle_complete(b.build());
}

inline Lts random_program(Rng& rng, std::size_t n) {
  auto letters = interface_actions();
  letters.push_back(act("p", ActionKind::Program, 1));
  letters.push_back(act("p", ActionKind::Program, 2));
  return random_lts(rng, n, letters, 0.4);
}

/// Random deterministic memoryless scheduler: in each state either a
/// non-empty set of enabled program actions or a single enabled action.
inline SchedulerPtr random_deterministic_scheduler(Rng& rng, std::shared_ptr<const Lts> lts) {
  std::uniform_real_distribution<double> coin(0, 1);
  std::vector<std::vector<ActionId>> table(lts->num_states());
  for (StateId s = 0; s < lts->num_states(); ++s) {
    std::vector<ActionId> prog, all;
    for (const auto& e : lts->edges(s)) {
      all.push_back(e.action);
      if (lts->action(e.action).kind == ActionKind::Program) prog.push_back(e.action);
    }
    if (!prog.empty() && coin(rng) < 0.5) {
      for (auto id : prog)
        if (coin(rng) < 0.6) table[s].push_back(id);
      if (table[s].empty()) table[s].push_back(prog.front());
    } else {
      table[s].push_back(all[std::uniform_int_distribution<std::size_t>(0, all.size() - 1)(rng)]);
    }
  }
  return std::make_shared<StateTableScheduler>(lts, table, "random-memoryless");
}

inline Instance random_instance(Rng& rng) {
  std::uniform_int_distribution<std::size_t> size(2, 4);
  Instance in;
  in.o2 = random_spec_object(rng, size(rng));
  in.o1 = perturb(rng, in.o2);
  in.program = random_program(rng, size(rng));
  in.p1 = std::make_shared<const Product>(product(in.program, in.o1));
  in.p2 = std::make_shared<const Product>(product(in.program, in.o2));
  in.s1 = random_deterministic_scheduler(rng, std::shared_ptr<const Lts>(in.p1, &in.p1->lts));
  return in;
}

}  // namespace progsim::testing
