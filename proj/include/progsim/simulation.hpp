#pragma once

#include <algorithm>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "progsim/graph.hpp"
#include "progsim/lts.hpp"

namespace progsim {

enum class Verdict { Yes, No, Unknown };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Yes: return "yes";
    case Verdict::No: return "no";
    case Verdict::Unknown: return "unknown";
  }
  return "?";
}

/// One abstract match for a concrete step: s2 --alpha--> target.
struct Choice {
  Trace alpha;
  StateId target = 0;

  bool operator==(const Choice&) const = default;
};

using ChoiceKey = std::tuple<StateId, Action, StateId>;

struct SimulationCertificate {
  std::vector<std::pair<StateId, StateId>> relation;  // sorted
  std::map<ChoiceKey, Choice> choice;
  ActionSet gamma;
  std::size_t alpha_bound = 0;

  bool contains(StateId s1, StateId s2) const {
    return std::binary_search(relation.begin(), relation.end(), std::make_pair(s1, s2));
  }
  const Choice* find(StateId s1, const Action& a, StateId s2) const {
    auto it = choice.find({s1, a, s2});
    return it == choice.end() ? nullptr : &it->second;
  }
};

/// Natural-number ranking of the concrete states; a stuttering match must
/// strictly decrease it.
struct ProgressWitness {
  std::vector<std::uint32_t> rank;
};

/// Abstract moves available for one concrete action from one abstract state,
/// in preference order: non-empty sequences by length then action order, the
/// empty sequence last. One move per target.
struct Move {
  std::vector<ActionId> alpha;  // ids of the abstract LTS
  StateId target = 0;
};

class MoveTable {
 public:
  MoveTable(const Lts& a1, const Lts& a2, ActionSet gamma, std::size_t alpha_bound)
      : a1_(a1), a2_(a2), gamma_(std::move(gamma)), bound_(alpha_bound) {
    in_gamma_.resize(a2.alphabet().size());
    for (ActionId i = 0; i < a2.alphabet().size(); ++i) in_gamma_[i] = gamma_.contains(a2.action(i));
    const auto n1 = a1.alphabet().size(), n2 = a2.num_states();
    bounded_.resize(n1 * n2);
    unbounded_.resize(n1 * n2);
    for (ActionId a = 0; a < n1; ++a)
      for (StateId s = 0; s < n2; ++s) {
        auto& b = bounded_[a * n2 + s];
        b = search(a1.action(a), s, bound_);
        auto all = search(a1.action(a), s, std::nullopt);
        auto& u = unbounded_[a * n2 + s];
        for (const auto& m : all) u.push_back(m.target);
        std::sort(u.begin(), u.end());
        // ε and a non-empty move may share a target; compare non-empty ones
        std::vector<StateId> ne, ue;
        for (const auto& m : b)
          if (!m.alpha.empty()) ne.push_back(m.target);
        for (const auto& m : all)
          if (!m.alpha.empty()) ue.push_back(m.target);
        std::sort(ne.begin(), ne.end());
        std::sort(ue.begin(), ue.end());
        if (ne != ue) complete_ = false;
      }
  }

  const std::vector<Move>& moves(ActionId a1_action, StateId s2) const {
    return bounded_[a1_action * a2_.num_states() + s2];
  }
  /// Targets of all matches of any length (sorted, may repeat for ε).
  const std::vector<StateId>& unbounded_targets(ActionId a1_action, StateId s2) const {
    return unbounded_[a1_action * a2_.num_states() + s2];
  }
  /// Whether the length bound hides no target anywhere.
  bool complete() const { return complete_; }

  const Lts& a1() const { return a1_; }
  const Lts& a2() const { return a2_; }
  const ActionSet& gamma() const { return gamma_; }
  std::size_t alpha_bound() const { return bound_; }

  Trace to_trace(const std::vector<ActionId>& ids) const {
    Trace t;
    for (auto id : ids) t.push_back(a2_.action(id));
    return t;
  }

 private:
  // BFS over (abstract state, consumed-the-visible-action) pairs.
  std::vector<Move> search(const Action& a, StateId s2, std::optional<std::size_t> bound) const {
    const bool visible = gamma_.contains(a);
    const auto a2id = a2_.find_action(a);
    const auto n = a2_.num_states();
    constexpr auto kNone = graph::kNone;
    std::vector<std::uint32_t> dist(2 * n, kNone), parent(2 * n, kNone);
    std::vector<ActionId> via(2 * n, 0);
    std::vector<std::uint32_t> order;
    std::deque<std::uint32_t> queue;
    auto expand = [&](std::uint32_t from, StateId x, bool flag, std::uint32_t d) {
      for (const auto& e : a2_.edges(x)) {
        bool next_flag = flag;
        if (in_gamma_[e.action]) {
          if (flag || !visible || !a2id || e.action != *a2id) continue;
          next_flag = true;
        }
        auto cfg = static_cast<std::uint32_t>(e.target * 2 + (next_flag ? 1 : 0));
        if (dist[cfg] != kNone) continue;
        dist[cfg] = d + 1;
        parent[cfg] = from;
        via[cfg] = e.action;
        order.push_back(cfg);
        queue.push_back(cfg);
      }
    };
    if (!bound || *bound > 0) expand(kNone, s2, false, 0);
    while (!queue.empty()) {
      auto c = queue.front();
      queue.pop_front();
      if (bound && dist[c] >= *bound) continue;
      expand(c, c / 2, c % 2 == 1, dist[c]);
    }
    std::vector<Move> out;
    for (auto c : order) {
      if ((c % 2 == 1) != visible) continue;
      Move m;
      m.target = c / 2;
      for (auto x = c; x != kNone; x = parent[x]) m.alpha.push_back(via[x]);
      std::reverse(m.alpha.begin(), m.alpha.end());
      out.push_back(std::move(m));
    }
    if (!visible) out.push_back(Move{{}, s2});
    return out;
  }

  const Lts& a1_;
  const Lts& a2_;
  ActionSet gamma_;
  std::size_t bound_;
  std::vector<bool> in_gamma_;
  std::vector<std::vector<Move>> bounded_;
  std::vector<std::vector<StateId>> unbounded_;
  bool complete_ = true;
};

/// A pair dropped by the fixpoint because the concrete step on `action` had
/// no match into the relation of that round.
struct Deletion {
  StateId s1;
  StateId s2;
  Action action;
  std::size_t round;
};

struct Fixpoint {
  std::vector<char> in;  // indexed s1 * |Q2| + s2
  std::vector<Deletion> deletions;
  std::size_t rounds = 0;
};

/// Greatest relation closed under the matching clause (the initial pair is
/// not required). Jacobi rounds: every round reads the previous relation, so
/// the result and the deletion log do not depend on `jobs`.
inline Fixpoint greatest_fixpoint(const MoveTable& mt, bool unbounded, std::size_t jobs = 1) {
  const Lts& a1 = mt.a1();
  const auto n2 = mt.a2().num_states();
  const auto total = a1.num_states() * n2;
  Fixpoint fp;
  fp.in.assign(total, 1);
  auto failing_edge = [&](std::size_t p) -> std::optional<ActionId> {
    StateId s1 = static_cast<StateId>(p / n2), s2 = static_cast<StateId>(p % n2);
    for (const auto& e : a1.edges(s1)) {
      bool ok = false;
      if (unbounded) {
        for (auto t : mt.unbounded_targets(e.action, s2))
          if (fp.in[e.target * n2 + t]) {
            ok = true;
            break;
          }
      } else {
        for (const auto& m : mt.moves(e.action, s2))
          if (fp.in[e.target * n2 + m.target]) {
            ok = true;
            break;
          }
      }
      if (!ok) return e.action;
    }
    return std::nullopt;
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, total == 0 ? 1 : total));
  for (;;) {
    std::vector<std::vector<std::pair<std::size_t, ActionId>>> found(jobs);
    auto work = [&](std::size_t j) {
      for (std::size_t p = j * total / jobs; p < (j + 1) * total / jobs; ++p)
        if (fp.in[p])
          if (auto a = failing_edge(p)) found[j].push_back({p, *a});
    };
    if (jobs == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(work, j);
      for (auto& t : pool) t.join();
    }
    bool any = false;
    for (const auto& chunk : found)
      for (const auto& [p, a] : chunk) {
        any = true;
        fp.in[p] = 0;
        fp.deletions.push_back(
            {static_cast<StateId>(p / n2), static_cast<StateId>(p % n2), a1.action(a), fp.rounds});
      }
    ++fp.rounds;
    if (!any) break;
  }
  return fp;
}

struct ForwardOptions {
  std::size_t jobs = 1;
};

struct ForwardResult {
  Verdict verdict = Verdict::No;
  std::optional<SimulationCertificate> certificate;
  // Greatest closed relation under the length bound, sorted.
  std::vector<std::pair<StateId, StateId>> relation;
  std::vector<Deletion> deletions;
  std::size_t rounds = 0;
  std::string note;
};

namespace detail {

inline std::vector<std::pair<StateId, StateId>> pairs_of(const std::vector<char>& in, std::size_t n2) {
  std::vector<std::pair<StateId, StateId>> out;
  for (std::size_t p = 0; p < in.size(); ++p)
    if (in[p]) out.push_back({static_cast<StateId>(p / n2), static_cast<StateId>(p % n2)});
  return out;
}

}  // namespace detail

/// Γ-forward simulation from a1 to a2 with matches of length ≤ alpha_bound.
/// The certificate relation is the greatest one; each triple gets the first
/// move in preference order that lands back in it.
inline ForwardResult check_forward(const Lts& a1, const Lts& a2, const ActionSet& gamma, std::size_t alpha_bound,
                                   ForwardOptions opts = {}) {
  if (alpha_bound < 1) throw ConfigError("alpha bound must be at least 1");
  MoveTable mt(a1, a2, gamma, alpha_bound);
  const auto n2 = a2.num_states();
  auto fp = greatest_fixpoint(mt, false, opts.jobs);
  ForwardResult r;
  r.relation = detail::pairs_of(fp.in, n2);
  r.deletions = fp.deletions;
  r.rounds = fp.rounds;
  const auto init = a1.initial() * n2 + a2.initial();
  if (fp.in[init]) {
    SimulationCertificate cert;
    cert.relation = r.relation;
    cert.gamma = gamma;
    cert.alpha_bound = alpha_bound;
    for (const auto& [s1, s2] : r.relation)
      for (const auto& e : a1.edges(s1))
        for (const auto& m : mt.moves(e.action, s2))
          if (fp.in[e.target * n2 + m.target]) {
            cert.choice.emplace(ChoiceKey{s1, a1.action(e.action), s2}, Choice{mt.to_trace(m.alpha), m.target});
            break;
          }
    r.certificate = std::move(cert);
    r.verdict = Verdict::Yes;
    if (!mt.complete()) r.note = "relation may be smaller than without the alpha bound";
    return r;
  }
  if (mt.complete() || !greatest_fixpoint(mt, true).in[init]) {
    r.verdict = Verdict::No;
    return r;
  }
  r.verdict = Verdict::Unknown;
  r.note = "incomplete at bound " + std::to_string(alpha_bound) + ": a longer match exists";
  return r;
}

/// A concrete step s1 --action--> s1_next matched by s2 --alpha--> s2_next.
struct PairStep {
  StateId s1;
  Action action;
  StateId s2;
  StateId s1_next;
  StateId s2_next;
  Trace alpha;
  // Relative to `relation` of the enclosing witness, no non-empty match exists.
  bool forced = false;
};

/// Evidence that no progressive simulation exists: from the initial pair the
/// stem leads into a cycle of stuttering steps. Within `relation` every cycle
/// step can only be matched by the empty sequence.
struct StutterCycle {
  std::vector<PairStep> stem;
  std::vector<PairStep> cycle;
  std::size_t round = 0;
  std::vector<std::pair<StateId, StateId>> relation;
};

struct ProgressiveOptions {
  std::size_t backtrack_budget = 1'000'000;
  std::size_t jobs = 1;
};

struct ProgressiveResult {
  Verdict verdict = Verdict::No;
  std::optional<SimulationCertificate> certificate;
  std::optional<ProgressWitness> witness;
  std::optional<StutterCycle> cycle;
  std::size_t pruning_rounds = 0;
  std::size_t backtracks = 0;
  std::string note;
};

namespace detail {

class ProgressSearch {
 public:
  ProgressSearch(const MoveTable& mt, std::vector<char> allowed, std::size_t budget)
      : mt_(mt), a1_(mt.a1()), n2_(mt.a2().num_states()), allowed_(std::move(allowed)), budget_(budget) {
    included_.assign(allowed_.size(), 0);
    stutter_.resize(a1_.num_states());
  }

  struct BudgetExceeded {};

  bool run(StateId s1, StateId s2) {
    include(s1 * n2_ + s2);
    return assign(0);
  }

  std::size_t backtracks() const { return backtracks_; }
  const std::vector<PairStep>& best_cycle() const { return best_cycle_; }

  SimulationCertificate certificate() const {
    SimulationCertificate cert;
    for (std::size_t p = 0; p < included_.size(); ++p)
      if (included_[p]) cert.relation.push_back({static_cast<StateId>(p / n2_), static_cast<StateId>(p % n2_)});
    cert.gamma = mt_.gamma();
    cert.alpha_bound = mt_.alpha_bound();
    for (std::size_t k = 0; k < agenda_.size(); ++k) {
      const auto& item = agenda_[k];
      const auto& m = mt_.moves(item.action, item.s2)[chosen_[k]];
      cert.choice.emplace(ChoiceKey{item.s1, a1_.action(item.action), item.s2}, Choice{mt_.to_trace(m.alpha), m.target});
    }
    return cert;
  }

  ProgressWitness witness() const {
    graph::Adjacency adj(a1_.num_states());
    for (StateId u = 0; u < a1_.num_states(); ++u)
      for (const auto& [v, step] : stutter_[u]) adj[u].push_back(v);
    auto ranks = graph::longest_path_ranks(adj);
    return ProgressWitness{*ranks};
  }

 private:
  struct Item {
    StateId s1;
    ActionId action;
    StateId target1;
    StateId s2;
  };

  void include(std::size_t p) {
    included_[p] = 1;
    StateId s1 = static_cast<StateId>(p / n2_), s2 = static_cast<StateId>(p % n2_);
    for (const auto& e : a1_.edges(s1)) agenda_.push_back({s1, e.action, e.target, s2});
    chosen_.resize(agenda_.size());
  }

  // Path of stutter steps from `from` to `to`, empty if unreachable.
  std::optional<std::vector<PairStep>> stutter_path(StateId from, StateId to) const {
    if (from == to) return std::vector<PairStep>{};
    std::vector<std::uint32_t> parent(a1_.num_states(), graph::kNone);
    std::vector<const PairStep*> via(a1_.num_states(), nullptr);
    std::deque<StateId> q{from};
    parent[from] = from;
    while (!q.empty()) {
      auto u = q.front();
      q.pop_front();
      for (const auto& [v, step] : stutter_[u]) {
        if (parent[v] != graph::kNone) continue;
        parent[v] = u;
        via[v] = &step;
        if (v == to) {
          std::vector<PairStep> path;
          for (auto x = to; x != from; x = parent[x]) path.push_back(*via[x]);
          std::reverse(path.begin(), path.end());
          return path;
        }
        q.push_back(v);
      }
    }
    return std::nullopt;
  }

  bool assign(std::size_t k) {
    if (k == agenda_.size()) return true;
    const Item item = agenda_[k];
    const auto& moves = mt_.moves(item.action, item.s2);
    for (std::size_t i = 0; i < moves.size(); ++i) {
      const auto& m = moves[i];
      std::size_t q = item.target1 * n2_ + m.target;
      if (!allowed_[q]) continue;
      bool stutter = m.alpha.empty();
      if (stutter) {
        PairStep step{item.s1, a1_.action(item.action), item.s2, item.target1, m.target, {}, false};
        if (auto back = stutter_path(item.target1, item.s1)) {
          back->insert(back->begin(), step);
          best_cycle_ = std::move(*back);
          if (++backtracks_ > budget_) throw BudgetExceeded{};
          continue;
        }
        stutter_[item.s1].push_back({item.target1, step});
      }
      auto mark = agenda_.size();
      bool fresh = !included_[q];
      if (fresh) include(q);
      chosen_[k] = i;
      if (assign(k + 1)) return true;
      if (fresh) {
        included_[q] = 0;
        agenda_.resize(mark);
        chosen_.resize(mark);
      }
      if (stutter) stutter_[item.s1].pop_back();
      if (++backtracks_ > budget_) throw BudgetExceeded{};
    }
    return false;
  }

  const MoveTable& mt_;
  const Lts& a1_;
  std::size_t n2_;
  std::vector<char> allowed_;
  std::size_t budget_;
  std::vector<char> included_;
  std::vector<Item> agenda_;
  std::vector<std::size_t> chosen_;
  std::vector<std::vector<std::pair<StateId, PairStep>>> stutter_;
  std::vector<PairStep> best_cycle_;
  std::size_t backtracks_ = 0;
};

// Pair graph whose edges are steps matchable only by the empty sequence
// within `x`; also reports pairs with a step that has no match at all.
struct ForcedGraph {
  graph::Adjacency adj;
  std::vector<std::vector<ActionId>> edge_action;  // parallel to adj
  std::vector<std::optional<ActionId>> dead;
};

inline ForcedGraph forced_graph(const MoveTable& mt, const std::vector<char>& x) {
  const Lts& a1 = mt.a1();
  const auto n2 = mt.a2().num_states();
  ForcedGraph g;
  g.adj.resize(x.size());
  g.edge_action.resize(x.size());
  g.dead.resize(x.size());
  for (std::size_t p = 0; p < x.size(); ++p) {
    if (!x[p]) continue;
    StateId s1 = static_cast<StateId>(p / n2), s2 = static_cast<StateId>(p % n2);
    for (const auto& e : a1.edges(s1)) {
      bool any = false, non_empty = false;
      for (const auto& m : mt.moves(e.action, s2))
        if (x[e.target * n2 + m.target]) {
          any = true;
          if (!m.alpha.empty()) non_empty = true;
        }
      if (!any) {
        if (!g.dead[p]) g.dead[p] = e.action;
      } else if (!non_empty) {
        g.adj[p].push_back(static_cast<std::uint32_t>(e.target * n2 + s2));
        g.edge_action[p].push_back(e.action);
      }
    }
  }
  return g;
}

}  // namespace detail

/// Progressive Γ-forward simulation: a forward simulation plus a ranking of
/// the concrete states that decreases on every stuttering match.
///
/// Pairs that can only be kept by stuttering around a cycle are pruned from
/// the greatest relation until stable; a pruned initial pair yields a
/// StutterCycle. Otherwise choices are searched depth first, non-empty
/// matches first, rejecting any choice that closes a stutter cycle over the
/// concrete states.
inline ProgressiveResult check_progressive(const Lts& a1, const Lts& a2, const ActionSet& gamma,
                                           std::size_t alpha_bound, ProgressiveOptions opts = {}) {
  if (alpha_bound < 1) throw ConfigError("alpha bound must be at least 1");
  MoveTable mt(a1, a2, gamma, alpha_bound);
  const auto n2 = a2.num_states();
  const auto init = a1.initial() * n2 + a2.initial();
  auto fp = greatest_fixpoint(mt, false, opts.jobs);
  ProgressiveResult r;
  auto inconclusive_no = [&]() {
    if (mt.complete()) return Verdict::No;
    r.note = "incomplete at bound " + std::to_string(alpha_bound);
    return Verdict::Unknown;
  };
  if (!fp.in[init]) {
    r.verdict = inconclusive_no();
    if (r.note.empty()) r.note = "no forward simulation";
    return r;
  }

  // Pruning.
  constexpr std::size_t kKept = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> removed_at(fp.in.size(), kKept);
  std::vector<std::optional<ActionId>> closure_edge(fp.in.size());
  std::vector<char> x = fp.in;
  for (std::size_t round = 0;; ++round) {
    auto g = detail::forced_graph(mt, x);
    auto on_cycle = graph::nodes_on_cycles(g.adj);
    bool any = false;
    for (std::size_t p = 0; p < x.size(); ++p) {
      if (!x[p] || (!g.dead[p] && !on_cycle[p])) continue;
      removed_at[p] = round;
      closure_edge[p] = on_cycle[p] ? std::nullopt : g.dead[p];
      any = true;
    }
    for (std::size_t p = 0; p < x.size(); ++p)
      if (removed_at[p] == round) x[p] = 0;
    r.pruning_rounds = round + 1;
    if (!any) break;
  }

  if (!x[init]) {
    StutterCycle w;
    auto relation_at = [&](std::size_t round) {
      std::vector<char> xr(fp.in.size(), 0);
      for (std::size_t p = 0; p < xr.size(); ++p) xr[p] = fp.in[p] && removed_at[p] >= round;
      return xr;
    };
    std::size_t p = init;
    while (closure_edge[p]) {
      StateId s1 = static_cast<StateId>(p / n2), s2 = static_cast<StateId>(p % n2);
      ActionId a = *closure_edge[p];
      StateId t1 = *a1.successor(s1, a);
      const Move* pick = nullptr;
      for (const auto& m : mt.moves(a, s2))
        if (fp.in[t1 * n2 + m.target] && (!pick || removed_at[t1 * n2 + m.target] > removed_at[t1 * n2 + pick->target]))
          pick = &m;
      w.stem.push_back({s1, a1.action(a), s2, t1, pick->target, mt.to_trace(pick->alpha), false});
      p = t1 * n2 + pick->target;
    }
    w.round = removed_at[p];
    auto xr = relation_at(w.round);
    auto g = detail::forced_graph(mt, xr);
    auto cyc = graph::shortest_cycle_through(g.adj, static_cast<std::uint32_t>(p));
    for (std::size_t i = 0; i < cyc.size(); ++i) {
      auto from = cyc[i];
      auto to = i + 1 < cyc.size() ? cyc[i + 1] : static_cast<std::uint32_t>(p);
      const auto& succ = g.adj[from];
      auto at = std::find(succ.begin(), succ.end(), to) - succ.begin();
      ActionId a = g.edge_action[from][at];
      w.cycle.push_back({static_cast<StateId>(from / n2), a1.action(a), static_cast<StateId>(from % n2),
                         static_cast<StateId>(to / n2), static_cast<StateId>(to % n2), {}, true});
    }
    w.relation = detail::pairs_of(xr, n2);
    r.cycle = std::move(w);
    r.verdict = inconclusive_no();
    return r;
  }

  detail::ProgressSearch search(mt, x, opts.backtrack_budget);
  try {
    bool ok = search.run(a1.initial(), a2.initial());
    r.backtracks = search.backtracks();
    if (ok) {
      r.certificate = search.certificate();
      r.witness = search.witness();
      r.verdict = Verdict::Yes;
      return r;
    }
    r.verdict = inconclusive_no();
    if (r.note.empty()) r.note = "every choice assignment closes a stutter cycle";
  } catch (const detail::ProgressSearch::BudgetExceeded&) {
    r.backtracks = search.backtracks();
    r.verdict = Verdict::Unknown;
    r.note = "backtracking budget " + std::to_string(opts.backtrack_budget) + " exceeded";
  }
  if (!search.best_cycle().empty()) {
    StutterCycle w;
    w.cycle = search.best_cycle();
    r.cycle = std::move(w);
  }
  return r;
}

struct CertificateViolation {
  std::string clause;
  StateId s1 = 0;
  std::optional<Action> action;
  StateId s2 = 0;
  std::string detail;
};

struct ValidationReport {
  bool ok = true;
  std::vector<CertificateViolation> violations;
};

/// Replays every clause of the certificate against the two LTSs. Clauses:
/// structure, initial, choice-missing, alpha-bound, projection, replay,
/// closure, and (with a witness) rank-size and progress.
inline ValidationReport validate_certificate(const SimulationCertificate& cert, const ProgressWitness* witness,
                                             const Lts& a1, const Lts& a2) {
  ValidationReport rep;
  auto fail = [&](std::string clause, StateId s1, std::optional<Action> a, StateId s2, std::string detail) {
    rep.ok = false;
    rep.violations.push_back({std::move(clause), s1, std::move(a), s2, std::move(detail)});
  };
  if (witness && witness->rank.size() != a1.num_states())
    fail("rank-size", 0, std::nullopt, 0,
         "rank has " + std::to_string(witness->rank.size()) + " entries for " + std::to_string(a1.num_states()) +
             " states");
  if (!cert.contains(a1.initial(), a2.initial())) fail("initial", a1.initial(), std::nullopt, a2.initial(), "");
  for (const auto& [s1, s2] : cert.relation) {
    if (s1 >= a1.num_states() || s2 >= a2.num_states()) {
      fail("structure", s1, std::nullopt, s2, "pair references a missing state");
      continue;
    }
    for (const auto& e : a1.edges(s1)) {
      const Action& a = a1.action(e.action);
      const Choice* c = cert.find(s1, a, s2);
      if (!c) {
        fail("choice-missing", s1, a, s2, "");
        continue;
      }
      if (c->alpha.size() > cert.alpha_bound)
        fail("alpha-bound", s1, a, s2, "length " + std::to_string(c->alpha.size()));
      Trace single{a};
      if (project(single, cert.gamma) != project(c->alpha, cert.gamma))
        fail("projection", s1, a, s2, "alpha " + format_trace(c->alpha));
      std::optional<StateId> reached;
      try {
        reached = run(a2, c->alpha, s2);
      } catch (const ReplayError& err) {
        fail("replay", s1, a, s2, err.what());
      }
      if (reached && *reached != c->target)
        fail("replay", s1, a, s2, "alpha ends in " + std::to_string(*reached) + ", not " + std::to_string(c->target));
      if (!cert.contains(e.target, c->target))
        fail("closure", s1, a, s2,
             "(" + std::to_string(e.target) + "," + std::to_string(c->target) + ") is not in the relation");
      if (witness && c->alpha.empty() && witness->rank.size() == a1.num_states() &&
          !(witness->rank[e.target] < witness->rank[s1]))
        fail("progress", s1, a, s2,
             "rank " + std::to_string(witness->rank[e.target]) + " of " + std::to_string(e.target) +
                 " is not below rank " + std::to_string(witness->rank[s1]) + " of " + std::to_string(s1));
    }
  }
  return rep;
}

// JSON. Actions are written as tokens and resolved against the LTS they
// belong to when read back.

inline nlohmann::json tokens_json(std::span<const Action> t) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& a : t) arr.push_back(a.token());
  return arr;
}

inline nlohmann::json certificate_to_json(const SimulationCertificate& cert, const ProgressWitness* witness = nullptr) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["gamma"] = tokens_json(cert.gamma.items());
  j["alpha_bound"] = cert.alpha_bound;
  nlohmann::json rel = nlohmann::json::array();
  for (const auto& [s1, s2] : cert.relation) rel.push_back({s1, s2});
  j["relation"] = rel;
  nlohmann::json choices = nlohmann::json::array();
  for (const auto& [key, c] : cert.choice) {
    const auto& [s1, a, s2] = key;
    choices.push_back({{"s1", s1}, {"action", a.token()}, {"s2", s2}, {"alpha", tokens_json(c.alpha)}, {"target", c.target}});
  }
  j["choices"] = choices;
  if (witness) j["rank"] = witness->rank;
  return j;
}

namespace detail {

inline Action resolve_token(const Lts& lts, const std::string& tok, const char* which) {
  auto id = lts.find_token(tok);
  if (!id) throw ConfigError(std::string("certificate mentions action '") + tok + "' unknown to the " + which + " LTS");
  return lts.action(*id);
}

}  // namespace detail

/// Reads a certificate; `witness` receives the rank if present.
inline SimulationCertificate certificate_from_json(const nlohmann::json& j, const Lts& a1, const Lts& a2,
                                                   std::optional<ProgressWitness>* witness = nullptr) {
  try {
    SimulationCertificate cert;
    std::vector<Action> g;
    for (const auto& t : j.at("gamma")) {
      auto tok = t.get<std::string>();
      auto id1 = a1.find_token(tok);
      g.push_back(id1 ? a1.action(*id1) : detail::resolve_token(a2, tok, "abstract"));
    }
    cert.gamma = ActionSet(std::move(g));
    cert.alpha_bound = j.at("alpha_bound").get<std::size_t>();
    for (const auto& p : j.at("relation")) cert.relation.push_back({p.at(0).get<StateId>(), p.at(1).get<StateId>()});
    std::sort(cert.relation.begin(), cert.relation.end());
    for (const auto& c : j.at("choices")) {
      Choice ch;
      for (const auto& t : c.at("alpha")) ch.alpha.push_back(detail::resolve_token(a2, t.get<std::string>(), "abstract"));
      ch.target = c.at("target").get<StateId>();
      auto a = detail::resolve_token(a1, c.at("action").get<std::string>(), "concrete");
      cert.choice.emplace(ChoiceKey{c.at("s1").get<StateId>(), a, c.at("s2").get<StateId>()}, std::move(ch));
    }
    if (witness) {
      if (j.contains("rank"))
        *witness = ProgressWitness{j.at("rank").get<std::vector<std::uint32_t>>()};
      else
        witness->reset();
    }
    return cert;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed certificate: ") + e.what());
  }
}

inline nlohmann::json pair_step_json(const PairStep& s) {
  return {{"s1", s.s1},           {"action", s.action.token()}, {"s2", s.s2},    {"s1_next", s.s1_next},
          {"s2_next", s.s2_next}, {"alpha", tokens_json(s.alpha)}, {"forced", s.forced}};
}

inline nlohmann::json stutter_cycle_to_json(const StutterCycle& w) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["stem"] = nlohmann::json::array();
  for (const auto& s : w.stem) j["stem"].push_back(pair_step_json(s));
  j["cycle"] = nlohmann::json::array();
  for (const auto& s : w.cycle) j["cycle"].push_back(pair_step_json(s));
  j["round"] = w.round;
  nlohmann::json rel = nlohmann::json::array();
  for (const auto& [s1, s2] : w.relation) rel.push_back({s1, s2});
  j["relation"] = rel;
  return j;
}

}  // namespace progsim
