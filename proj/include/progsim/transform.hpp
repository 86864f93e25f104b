#pragma once

#include <algorithm>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "progsim/product.hpp"
#include "progsim/scheduler.hpp"
#include "progsim/scheduler_checks.hpp"
#include "progsim/simulation.hpp"
#include "progsim/trace_tree.hpp"

namespace progsim {

/// m(cs, a, as): program actions map to themselves, object actions to the
/// certificate's fixed match.
inline Trace mapping_m(StateId cs, const Action& a, StateId as, const SimulationCertificate& cert) {
  if (a.kind == ActionKind::Program) return {a};
  if (!cert.contains(cs, as))
    throw ContractViolation("(" + std::to_string(cs) + "," + std::to_string(as) + ") is not in the relation");
  const Choice* c = cert.find(cs, a, as);
  if (!c)
    throw ContractViolation("no match for '" + a.token() + "' from (" + std::to_string(cs) + "," + std::to_string(as) +
                            ")");
  return c->alpha;
}

/// One concrete product step mapped to abstract product actions. Object and
/// program actions go through mapping_m. The product idle maps to the
/// abstract idle, preceded by the shortest run of abstract internal actions
/// (at most `alpha_bound`) reaching a quiescent state still related to the
/// concrete object state. Throws ContractViolation when there is none.
inline Trace map_step(const Product& p1, const Product& p2, const SimulationCertificate& cert, StateId c,
                      const Action& a, StateId v, std::size_t alpha_bound) {
  const StateId cs = p1.obj(c);
  if (a.kind != ActionKind::Idle) return mapping_m(cs, a, p2.obj(v), cert);
  const Lts& l2 = p2.lts;
  std::vector<std::uint32_t> parent(l2.num_states(), graph::kNone);
  std::vector<ActionId> via(l2.num_states(), 0);
  std::vector<std::uint32_t> dist(l2.num_states(), graph::kNone);
  std::deque<StateId> q{v};
  dist[v] = 0;
  while (!q.empty()) {
    StateId x = q.front();
    q.pop_front();
    if (l2.successor(x, l2.idle_id()) && cert.contains(cs, p2.obj(x))) {
      Trace out;
      for (StateId y = x; y != v; y = parent[y]) out.push_back(l2.action(via[y]));
      std::reverse(out.begin(), out.end());
      out.push_back(l2.action(l2.idle_id()));
      return out;
    }
    if (dist[x] >= alpha_bound) continue;
    for (const auto& e : l2.edges(x)) {
      if (l2.action(e.action).kind != ActionKind::Internal || dist[e.target] != graph::kNone) continue;
      dist[e.target] = dist[x] + 1;
      parent[e.target] = x;
      via[e.target] = e.action;
      q.push_back(e.target);
    }
  }
  throw ContractViolation("quiescent concrete state " + std::to_string(c) + " has no related quiescent abstract state within " +
                          std::to_string(alpha_bound) + " internal steps of " + std::to_string(v));
}

struct TransformOptions {
  std::size_t alpha_bound = 4;
  std::size_t node_budget = default_node_budget();
};

/// Bounded realisation of the trace map f: the tree of S1-consistent concrete
/// traces, the tree of their images, and the link between them. Image nodes
/// remember which concrete nodes map exactly onto them and which concrete
/// steps pass through them in the middle of a match.
class MappedTraces {
 public:
  using NodeId = TracePrefixTree::NodeId;
  static constexpr NodeId npos = TracePrefixTree::npos;

  struct MidOrigin {
    NodeId parent;  // concrete node before the step
    NodeId child;   // concrete node after the step
    std::uint32_t index;  // position in the child's alpha of the next action
  };
  struct ConcreteInfo {
    ActionSet scheduled;  // S1 at this node, once expanded
    Trace alpha;          // image of the step into this node
    NodeId link = npos;
    FiniteMemoryScheduler::Memory memory;
  };
  struct ImageInfo {
    std::vector<NodeId> exact;
    std::vector<MidOrigin> mid;
  };

  MappedTraces(std::shared_ptr<const Product> prod1, SchedulerPtr s1, std::shared_ptr<const Product> prod2,
               std::shared_ptr<const SimulationCertificate> cert, TransformOptions opts = {})
      : prod1_(std::move(prod1)),
        prod2_(std::move(prod2)),
        s1_(std::move(s1)),
        cert_(std::move(cert)),
        opts_(opts),
        gamma_p_(prod2_->lts.partition().gamma_p()),
        concrete(TracePrefixTree::for_lts(prod1_->lts, 0)),
        image(TracePrefixTree::for_lts(prod2_->lts, 0)) {
    fm_ = dynamic_cast<const FiniteMemoryScheduler*>(s1_.get());
    if (fm_ && &fm_->lts() != &prod1_->lts) fm_ = nullptr;
    cinfo.push_back({});
    cinfo[0].link = image.root();
    if (fm_) cinfo[0].memory = fm_->initial_memory();
    iinfo.push_back({});
    iinfo[0].exact.push_back(concrete.root());
  }

  /// Expands every concrete node shallower than `depth`.
  void extend(std::size_t depth) {
    for (NodeId c = 0; c < concrete.size(); ++c)
      if (!concrete.node(c).expanded && concrete.node(c).depth < depth) expand(c);
    depth_ = std::max(depth_, depth);
  }

  std::size_t depth() const { return depth_; }
  const Product& prod1() const { return *prod1_; }
  const Product& prod2() const { return *prod2_; }
  const SimulationCertificate& cert() const { return *cert_; }
  const Scheduler& s1() const { return *s1_; }
  const SchedulerPtr& s1_ptr() const { return s1_; }
  const ActionSet& gamma_p() const { return gamma_p_; }
  const TransformOptions& options() const { return opts_; }

  /// An image node's continuations are all known once every concrete node
  /// mapping exactly onto it has been expanded.
  bool complete(NodeId v) const {
    for (auto c : iinfo[v].exact)
      if (!concrete.node(c).expanded) return false;
    return true;
  }

  /// Smallest depth of an incomplete image node. The image tree restricted
  /// to shorter traces is final.
  std::size_t complete_depth() const {
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (NodeId v = 0; v < image.size(); ++v)
      if (!complete(v)) best = std::min<std::size_t>(best, image.node(v).depth);
    return best;
  }

  /// Every value the S2 definition assigns to image node v, one per concrete
  /// trace through it. Well-definedness means they all agree.
  std::vector<ActionSet> definitions(NodeId v) const {
    std::vector<ActionSet> out;
    auto def = [&](NodeId parent, const Action& next) {
      out.push_back(gamma_p_.contains(next) ? cinfo[parent].scheduled : ActionSet{next});
    };
    for (const auto& m : iinfo[v].mid) def(m.parent, cinfo[m.child].alpha[m.index]);
    for (auto c : iinfo[v].exact) {
      if (!concrete.node(c).expanded) continue;
      for (auto child : concrete.node(c).children)
        if (!cinfo[child].alpha.empty()) def(c, cinfo[child].alpha[0]);
    }
    return out;
  }

  /// Whether no continuation of concrete node c under S1 has a sigma_p
  /// action. Holds when two nodes on the sigma_p-free, single-child suffix of
  /// its branch share state and S1 memory: the branch then repeats forever.
  /// Needs a finite-memory S1; false otherwise.
  bool concrete_silent_forever(NodeId c, const ActionSet& sigma_p) const {
    if (!fm_) return false;
    std::set<std::pair<StateId, FiniteMemoryScheduler::Memory>> seen;
    for (NodeId x = c;;) {
      if (x != c && concrete.node(x).children.size() != 1) return false;
      if (!seen.insert({concrete.node(x).state, cinfo[x].memory}).second) return true;
      if (x == concrete.root() || sigma_p.contains(concrete.action_of(x))) return false;
      x = concrete.node(x).parent;
    }
  }

  /// The same for image node v under S2. What S2 does below an image node
  /// is fixed by the construction keys of the concrete steps through it, so
  /// two complete nodes with equal keys on a single-child, sigma_p-free
  /// stretch of the branch above v make that stretch repeat forever.
  bool image_silent_forever(NodeId v, const ActionSet& sigma_p) const {
    if (!fm_) return false;
    std::vector<NodeId> path;
    for (NodeId x = v;; x = image.node(x).parent) {
      path.push_back(x);
      if (x == image.root() || sigma_p.contains(image.action_of(x))) break;
    }
    std::reverse(path.begin(), path.end());
    const auto complete_below = complete_depth();
    std::set<std::vector<ImageKey>> seen;
    for (auto x : path) {
      if (image.node(x).depth >= complete_below) break;
      if (!seen.insert(image_key(x)).second) return true;
      if (image.node(x).children.size() != 1) seen.clear();
    }
    return false;
  }

 private:
  // (concrete state, S1 memory, abstract state, action into the child, offset in its alpha)
  using ImageKey = std::tuple<StateId, FiniteMemoryScheduler::Memory, StateId, ActionId, std::uint32_t>;

  std::vector<ImageKey> image_key(NodeId v) const {
    std::vector<ImageKey> key;
    constexpr auto none = std::numeric_limits<ActionId>::max();
    for (auto c : iinfo[v].exact) key.emplace_back(concrete.node(c).state, cinfo[c].memory, image.node(v).state, none, 0);
    for (const auto& m : iinfo[v].mid)
      key.emplace_back(concrete.node(m.parent).state, cinfo[m.parent].memory, image.node(cinfo[m.parent].link).state,
                       concrete.node(m.child).action, m.index);
    std::sort(key.begin(), key.end());
    key.erase(std::unique(key.begin(), key.end()), key.end());
    return key;
  }

  void expand(NodeId c) {
    const Lts& l1 = prod1_->lts;
    const Lts& l2 = prod2_->lts;
    const StateId st = concrete.node(c).state;
    std::vector<ActionId> ids;
    if (fm_) {
      ids = fm_->choose(st, cinfo[c].memory);
      cinfo[c].scheduled = fm_->to_set(ids);
    } else {
      cinfo[c].scheduled = s1_->schedule(concrete.trace(c));
      for (const auto& a : cinfo[c].scheduled)
        if (auto id = l1.find_action(a)) ids.push_back(*id);
    }
    concrete.node(c).expanded = true;
    for (auto id : ids) {
      auto next = l1.successor(st, id);
      if (!next) continue;
      if (concrete.size() + image.size() >= opts_.node_budget) throw ResourceError(opts_.node_budget);
      const Action& a = l1.action(id);
      Trace alpha = map_step(*prod1_, *prod2_, *cert_, st, a, image.node(cinfo[c].link).state, opts_.alpha_bound);
      NodeId child = concrete.add_child(c, id, *next);
      cinfo.push_back({});
      if (fm_) cinfo[child].memory = fm_->update(cinfo[c].memory, st, id, *next);
      NodeId u = cinfo[c].link;
      for (std::size_t k = 0; k < alpha.size(); ++k) {
        auto bid = l2.find_action(alpha[k]);
        if (!bid) throw ContractViolation("mapped action '" + alpha[k].token() + "' is not in the abstract product");
        NodeId w = image.child(u, *bid);
        if (w == npos) {
          auto ns = l2.successor(image.node(u).state, *bid);
          if (!ns)
            throw ContractViolation("image of '" + format_trace(concrete.trace(child)) + "' does not replay at '" +
                                    alpha[k].token() + "'");
          w = image.add_child(u, *bid, *ns);
          iinfo.push_back({});
        }
        if (k + 1 < alpha.size()) iinfo[w].mid.push_back({c, child, static_cast<std::uint32_t>(k + 1)});
        u = w;
      }
      cinfo[child].alpha = std::move(alpha);
      cinfo[child].link = u;
      iinfo[u].exact.push_back(child);
    }
  }

  std::shared_ptr<const Product> prod1_, prod2_;
  SchedulerPtr s1_;
  const FiniteMemoryScheduler* fm_ = nullptr;
  std::shared_ptr<const SimulationCertificate> cert_;
  TransformOptions opts_;
  ActionSet gamma_p_;
  std::size_t depth_ = 0;

 public:
  // Public so that tests can corrupt them.
  TracePrefixTree concrete;
  TracePrefixTree image;
  std::vector<ConcreteInfo> cinfo;
  std::vector<ImageInfo> iinfo;
};

/// f_0 ⊆ ... ⊆ f_depth over T(P×O1, S1).
inline std::shared_ptr<MappedTraces> build_f(std::shared_ptr<const Product> prod1, SchedulerPtr s1,
                                             std::shared_ptr<const Product> prod2,
                                             std::shared_ptr<const SimulationCertificate> cert, std::size_t depth,
                                             TransformOptions opts = {}) {
  auto mt = std::make_shared<MappedTraces>(std::move(prod1), std::move(s1), std::move(prod2), std::move(cert), opts);
  mt->extend(depth);
  return mt;
}

/// The abstract scheduler S2 read off the image tree. Traces off the image
/// get {idle}. A query at an incomplete node deepens the construction up to
/// `max_depth`, then throws DepthExhausted.
class ConstructedScheduler final : public Scheduler {
 public:
  explicit ConstructedScheduler(std::shared_ptr<MappedTraces> mt, std::size_t max_depth = 0)
      : mt_(std::move(mt)), max_depth_(max_depth) {}

  std::string describe() const override { return "constructed(depth=" + std::to_string(mt_->depth()) + ")"; }

  ActionSet schedule(std::span<const Action> trace) const override {
    for (;;) {
      auto r = lookup(trace);
      if (r) return *r;
      if (mt_->depth() >= max_depth_) throw DepthExhausted(mt_->depth());
      mt_->extend(std::min(max_depth_, mt_->depth() + 4));
    }
  }

  const MappedTraces& traces() const { return *mt_; }

 private:
  // nullopt when the answer depends on unexpanded concrete nodes
  std::optional<ActionSet> lookup(std::span<const Action> trace) const {
    const auto& image = mt_->image;
    const Lts& l2 = mt_->prod2().lts;
    auto u = image.root();
    for (const auto& a : trace) {
      auto id = l2.find_action(a);
      auto w = id ? image.child(u, *id) : MappedTraces::npos;
      if (w == MappedTraces::npos) {
        if (!mt_->complete(u)) return std::nullopt;
        return ActionSet{l2.partition().idle()};
      }
      u = w;
    }
    if (!mt_->complete(u)) return std::nullopt;
    auto defs = mt_->definitions(u);
    if (defs.empty()) return ActionSet{};
    return defs.front();
  }

  std::shared_ptr<MappedTraces> mt_;
  std::size_t max_depth_;
};

struct CheckResult {
  std::string name;
  bool holds = true;
  std::size_t checked = 0;
  std::string counterexample = {};
};

namespace detail {

inline void fail_once(CheckResult& r, const std::string& what) {
  if (r.holds) r.counterexample = what;
  r.holds = false;
}

}  // namespace detail

/// L1: a concrete trace and its image agree on Γ_P.
inline CheckResult check_lemma1(const MappedTraces& mt) {
  CheckResult r{.name = "L1"};
  for (MappedTraces::NodeId c = 0; c < mt.concrete.size(); ++c) {
    auto link = mt.cinfo[c].link;
    if (link == MappedTraces::npos) continue;
    ++r.checked;
    auto t1 = mt.concrete.trace(c);
    auto t2 = mt.image.trace(link);
    if (project(t1, mt.gamma_p()) != project(t2, mt.gamma_p()))
      detail::fail_once(r, format_trace(t1) + " maps to " + format_trace(t2));
  }
  return r;
}

/// L2: concrete traces whose images agree on Γ_P lie on one path and differ
/// only by actions outside Γ_P.
inline CheckResult check_lemma2(const MappedTraces& mt) {
  CheckResult r{.name = "L2"};
  std::map<Trace, std::vector<MappedTraces::NodeId>> groups;
  for (MappedTraces::NodeId c = 0; c < mt.concrete.size(); ++c)
    if (mt.cinfo[c].link != MappedTraces::npos)
      groups[project(mt.image.trace(mt.cinfo[c].link), mt.gamma_p())].push_back(c);
  for (const auto& [key, nodes] : groups) {
    auto deepest = *std::max_element(nodes.begin(), nodes.end(), [&](auto x, auto y) {
      return mt.concrete.node(x).depth < mt.concrete.node(y).depth;
    });
    for (auto c : nodes) {
      ++r.checked;
      if (!mt.concrete.is_ancestor_or_self(c, deepest)) {
        detail::fail_once(r, format_trace(mt.concrete.trace(c)) + " and " + format_trace(mt.concrete.trace(deepest)) +
                                 " have images agreeing on Γ_P but neither extends the other");
        continue;
      }
      for (auto x = deepest; x != c; x = mt.concrete.node(x).parent)
        if (mt.gamma_p().contains(mt.concrete.action_of(x)))
          detail::fail_once(r, format_trace(mt.concrete.trace(deepest)) + " extends " +
                                   format_trace(mt.concrete.trace(c)) + " by the visible action " +
                                   mt.concrete.action_of(x).token());
    }
  }
  return r;
}

/// L3: every concrete step is a commuting diagram. The parent's image is a
/// prefix of the child's image, the segment between them is m applied to
/// the parent's states, program components agree and object components are
/// related. Hence every image prefix falls in exactly one segment.
inline CheckResult check_lemma3(const MappedTraces& mt) {
  CheckResult r{.name = "L3"};
  const auto& p1 = mt.prod1();
  const auto& p2 = mt.prod2();
  if (mt.cinfo[0].link != mt.image.root()) detail::fail_once(r, "ε does not map to ε");
  for (MappedTraces::NodeId c = 0; c < mt.concrete.size(); ++c) {
    auto w = mt.cinfo[c].link;
    if (w == MappedTraces::npos) continue;
    ++r.checked;
    StateId s1 = mt.concrete.node(c).state, s2 = mt.image.node(w).state;
    if (p1.prog(s1) != p2.prog(s2) || !mt.cert().contains(p1.obj(s1), p2.obj(s2)))
      detail::fail_once(r, format_trace(mt.concrete.trace(c)) + " and its image end in unrelated states");
    if (c == mt.concrete.root()) continue;
    auto parent = mt.concrete.node(c).parent;
    auto u = mt.cinfo[parent].link;
    if (!mt.image.is_ancestor_or_self(u, w)) {
      detail::fail_once(r, "image of " + format_trace(mt.concrete.trace(c)) + " does not extend the image of its parent");
      continue;
    }
    Trace segment;
    for (auto x = w; x != u; x = mt.image.node(x).parent) segment.push_back(mt.image.action_of(x));
    std::reverse(segment.begin(), segment.end());
    Trace expected;
    try {
      expected = map_step(p1, p2, mt.cert(), mt.concrete.node(parent).state, mt.concrete.action_of(c),
                          mt.image.node(u).state, mt.options().alpha_bound);
    } catch (const ContractViolation& e) {
      detail::fail_once(r, e.what());
      continue;
    }
    if (segment != expected)
      detail::fail_once(r, "step into " + format_trace(mt.concrete.trace(c)) + " adds " + format_trace(segment) +
                               ", m gives " + format_trace(expected));
  }
  return r;
}

/// L4: if an image trace is a prefix of the images of several concrete
/// traces, it is already a prefix of the image of their common prefix.
inline CheckResult check_lemma4(const MappedTraces& mt) {
  CheckResult r{.name = "L4"};
  using NodeId = MappedTraces::NodeId;
  constexpr NodeId npos = MappedTraces::npos;
  std::vector<NodeId> lca(mt.image.size(), npos);
  auto join = [&](NodeId a, NodeId b) { return a == npos ? b : b == npos ? a : mt.concrete.lca(a, b); };
  for (NodeId c = 0; c < mt.concrete.size(); ++c) {
    auto w = mt.cinfo[c].link;
    if (w != npos) lca[w] = join(lca[w], c);
  }
  // image children are created after their parents
  for (NodeId v = static_cast<NodeId>(mt.image.size()); v-- > 1;) {
    auto p = mt.image.node(v).parent;
    lca[p] = join(lca[p], lca[v]);
  }
  for (NodeId v = 0; v < mt.image.size(); ++v) {
    if (lca[v] == npos) continue;
    ++r.checked;
    auto img = mt.cinfo[lca[v]].link;
    if (img == npos || !mt.image.is_ancestor_or_self(v, img))
      detail::fail_once(r, format_trace(mt.image.trace(v)) + " is not a prefix of the image of the common prefix " +
                               format_trace(mt.concrete.trace(lca[v])));
  }
  return r;
}

/// L5: on image traces whose continuations are final, S2 schedules exactly
/// the actions that extend the trace within the image.
inline CheckResult check_lemma5(const MappedTraces& mt, const Scheduler& s2) {
  CheckResult r{.name = "L5"};
  for (MappedTraces::NodeId v = 0; v < mt.image.size(); ++v) {
    if (!mt.complete(v)) continue;
    std::vector<Action> kids;
    for (auto c : mt.image.node(v).children) kids.push_back(mt.image.action_of(c));
    ActionSet expected(std::move(kids));
    auto trace = mt.image.trace(v);
    ActionSet got;
    try {
      got = s2.schedule(trace);
    } catch (const DepthExhausted&) {
      continue;
    }
    ++r.checked;
    if (got != expected)
      detail::fail_once(r, "S2(" + format_trace(trace) + ") = " + format_set(got) + " but the image continues with " +
                               format_set(expected));
  }
  return r;
}

inline CheckResult check_lemma(int id, const MappedTraces& mt, const Scheduler& s2) {
  switch (id) {
    case 1: return check_lemma1(mt);
    case 2: return check_lemma2(mt);
    case 3: return check_lemma3(mt);
    case 4: return check_lemma4(mt);
    case 5: return check_lemma5(mt, s2);
  }
  throw ConfigError("no lemma " + std::to_string(id));
}

/// All concrete traces through an image node give the same S2 value.
inline CheckResult check_s2_well_defined(const MappedTraces& mt) {
  CheckResult r{.name = "S2-well-defined"};
  for (MappedTraces::NodeId v = 0; v < mt.image.size(); ++v) {
    auto defs = mt.definitions(v);
    if (defs.size() < 2) continue;
    ++r.checked;
    for (const auto& d : defs)
      if (d != defs.front())
        detail::fail_once(r, "S2(" + format_trace(mt.image.trace(v)) + ") is both " + format_set(defs.front()) +
                                 " and " + format_set(d));
  }
  return r;
}

/// Along every concrete path, runs of steps with an empty image are no longer
/// than the number of concrete product states.
inline CheckResult check_progress_realization(const MappedTraces& mt) {
  CheckResult r{.name = "progress"};
  const auto limit = mt.prod1().lts.num_states();
  std::vector<std::size_t> run(mt.concrete.size(), 0);
  for (MappedTraces::NodeId c = 1; c < mt.concrete.size(); ++c) {
    ++r.checked;
    run[c] = mt.cinfo[c].alpha.empty() ? run[mt.concrete.node(c).parent] + 1 : 0;
    if (run[c] > limit)
      detail::fail_once(r, format_trace(mt.concrete.trace(c)) + " ends in " + std::to_string(run[c]) +
                               " steps with an empty image");
  }
  return r;
}

/// T(P×O2, S2) up to the complete depth equals the image prefixes up to it.
inline CheckResult check_theorem1(const MappedTraces& mt, const Scheduler& s2) {
  CheckResult r{.name = "theorem1"};
  auto depth = mt.complete_depth();
  if (depth == std::numeric_limits<std::size_t>::max()) depth = mt.image.size();
  auto t2 = enumerate_traces(mt.prod2().lts, s2, depth, {mt.options().node_budget, true});
  std::vector<Trace> image;
  for (MappedTraces::NodeId v = 0; v < mt.image.size(); ++v)
    if (mt.image.node(v).depth <= depth) image.push_back(mt.image.trace(v));
  std::sort(image.begin(), image.end());
  auto sched = t2.all_traces();
  r.checked = sched.size();
  std::vector<Trace> diff;
  std::set_symmetric_difference(sched.begin(), sched.end(), image.begin(), image.end(), std::back_inserter(diff));
  if (!diff.empty())
    detail::fail_once(r, format_trace(diff.front()) + " is in exactly one of T(P×O2,S2) and the image (depth " +
                             std::to_string(depth) + ")");
  return r;
}

struct ProjectionCheck {
  bool holds = true;
  // Largest projected length known to be complete on each side and overall.
  // max() means every frontier node is dead.
  std::size_t depth_concrete = 0;
  std::size_t depth_abstract = 0;
  std::size_t compared_depth = 0;
  std::size_t compared = 0;
  std::optional<Trace> only_concrete;
  std::optional<Trace> only_abstract;
};

namespace detail {

// Projected traces of a bounded tree, and the length up to which they are
// complete: a frontier node from which a sigma_p action is still reachable
// caps it at its own projected length, unless `silent` proves that no
// sigma_p action follows under the scheduler.
inline std::pair<std::vector<Trace>, std::size_t> projected(const TracePrefixTree& t, const Lts& lts,
                                                            const ActionSet& sigma_p,
                                                            const std::function<bool(const Trace&)>& silent) {
  auto live = can_reach_action(lts, sigma_p);
  std::vector<Trace> out;
  std::size_t cap = std::numeric_limits<std::size_t>::max();
  for (TracePrefixTree::NodeId n = 0; n < t.size(); ++n) {
    auto trace = t.trace(n);
    auto p = project(trace, sigma_p);
    if (!t.node(n).expanded && live[t.node(n).state] && p.size() < cap && !silent(trace)) cap = p.size();
    out.push_back(std::move(p));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return {out, cap};
}

}  // namespace detail

/// T(P×O1, S1)|Σ_P against T(P×O2, S2)|Σ_P, each enumerated independently,
/// compared on projected traces no longer than the length both sides are
/// known to be complete for.
inline ProjectionCheck check_projection_equality(const MappedTraces& mt, const Scheduler& s2, const ActionSet& sigma_p,
                                                 std::size_t depth) {
  ProjectionCheck pc;
  auto t1 = enumerate_traces(mt.prod1().lts, mt.s1(), depth, {mt.options().node_budget, true});
  auto t2 = enumerate_traces(mt.prod2().lts, s2, depth * std::max<std::size_t>(1, mt.options().alpha_bound),
                             {mt.options().node_budget, true});
  auto [p1, d1] = detail::projected(t1, mt.prod1().lts, sigma_p, [&](const Trace& t) {
    auto c = mt.concrete.find(t);
    return c != MappedTraces::npos && mt.concrete_silent_forever(c, sigma_p);
  });
  auto [p2, d2] = detail::projected(t2, mt.prod2().lts, sigma_p, [&](const Trace& t) {
    auto v = mt.image.find(t);
    return v != MappedTraces::npos && mt.image_silent_forever(v, sigma_p);
  });
  pc.depth_concrete = d1;
  pc.depth_abstract = d2;
  pc.compared_depth = std::min(d1, d2);
  auto cut = [&](std::vector<Trace>& v) {
    v.erase(std::remove_if(v.begin(), v.end(), [&](const Trace& t) { return t.size() > pc.compared_depth; }), v.end());
  };
  cut(p1);
  cut(p2);
  pc.compared = p1.size();
  std::vector<Trace> left, right;
  std::set_difference(p1.begin(), p1.end(), p2.begin(), p2.end(), std::back_inserter(left));
  std::set_difference(p2.begin(), p2.end(), p1.begin(), p1.end(), std::back_inserter(right));
  if (!left.empty()) pc.only_concrete = left.front();
  if (!right.empty()) pc.only_abstract = right.front();
  pc.holds = left.empty() && right.empty();
  return pc;
}

/// Everything checked about one S1 in one run of the construction.
struct PipelineReport {
  std::string scheduler;
  std::size_t depth = 0;
  std::size_t complete_depth = 0;
  std::size_t concrete_nodes = 0;
  std::size_t image_nodes = 0;
  std::vector<CheckResult> checks;
  ProjectionCheck projection;

  bool ok() const {
    for (const auto& c : checks)
      if (!c.holds) return false;
    return projection.holds;
  }
};

inline std::string depth_string(std::size_t d) {
  return d == std::numeric_limits<std::size_t>::max() ? "unbounded" : std::to_string(d);
}

/// Builds f to `depth`, constructs S2 and runs every check: lemmas 1-5,
/// well-definedness, progress, theorem 1, S2 determinism and admissibility up
/// to the complete depth, and projection equality on Σ_P.
inline PipelineReport run_transform_pipeline(std::shared_ptr<const Product> prod1, SchedulerPtr s1,
                                             std::shared_ptr<const Product> prod2,
                                             std::shared_ptr<const SimulationCertificate> cert, std::size_t depth,
                                             TransformOptions opts = {}) {
  PipelineReport rep;
  rep.scheduler = s1->describe();
  rep.depth = depth;
  auto mt = build_f(prod1, s1, prod2, cert, depth, opts);
  ConstructedScheduler s2(mt);
  rep.complete_depth = mt->complete_depth();
  rep.concrete_nodes = mt->concrete.size();
  rep.image_nodes = mt->image.size();
  for (int id = 1; id <= 5; ++id) rep.checks.push_back(check_lemma(id, *mt, s2));
  rep.checks.push_back(check_s2_well_defined(*mt));
  rep.checks.push_back(check_progress_realization(*mt));
  rep.checks.push_back(check_theorem1(*mt, s2));
  auto bound = rep.complete_depth == std::numeric_limits<std::size_t>::max() ? depth : rep.complete_depth;
  auto det = check_deterministic_scheduler(s2, prod2->lts, bound);
  rep.checks.push_back({.name = "S2-deterministic", .holds = det.holds, .checked = bound, .counterexample =
                        det.violation ? format_trace(det.violation->trace) + ": " + det.violation->condition : ""});
  auto adm = check_admitted(s2, prod2->lts, bound);
  rep.checks.push_back({.name = "S2-admitted", .holds = adm.holds, .checked = bound, .counterexample =
                        adm.violation ? format_trace(adm.violation->trace) + ": " + adm.violation->condition : ""});
  rep.projection = check_projection_equality(*mt, s2, prod1->lts.partition().program(), depth);
  return rep;
}

/// S2 as a table over the image traces whose continuations are final.
inline nlohmann::json s2_table_json(const MappedTraces& mt, const Scheduler& s2) {
  auto complete = mt.complete_depth();
  std::size_t depth = complete == 0 ? 0 : complete - 1;
  std::map<Trace, ActionSet> table;
  for (MappedTraces::NodeId v = 0; v < mt.image.size(); ++v) {
    if (mt.image.node(v).depth > depth || !mt.complete(v)) continue;
    auto t = mt.image.trace(v);
    table.emplace(t, s2.schedule(t));
  }
  return table_to_json(table, depth, ActionSet{mt.prod2().lts.partition().idle()});
}

inline nlohmann::json check_json(const CheckResult& c) {
  nlohmann::json j{{"name", c.name}, {"holds", c.holds}, {"checked", c.checked}};
  if (!c.holds) j["counterexample"] = c.counterexample;
  return j;
}

inline nlohmann::json pipeline_json(const PipelineReport& r) {
  nlohmann::json j;
  j["scheduler"] = r.scheduler;
  j["depth"] = r.depth;
  j["complete_depth"] = depth_string(r.complete_depth);
  j["concrete_nodes"] = r.concrete_nodes;
  j["image_nodes"] = r.image_nodes;
  j["checks"] = nlohmann::json::array();
  for (const auto& c : r.checks) j["checks"].push_back(check_json(c));
  nlohmann::json p;
  p["holds"] = r.projection.holds;
  p["depth_concrete"] = depth_string(r.projection.depth_concrete);
  p["depth_abstract"] = depth_string(r.projection.depth_abstract);
  p["compared_depth"] = depth_string(r.projection.compared_depth);
  p["compared"] = r.projection.compared;
  if (r.projection.only_concrete) p["only_concrete"] = format_trace(*r.projection.only_concrete);
  if (r.projection.only_abstract) p["only_abstract"] = format_trace(*r.projection.only_abstract);
  j["projection_equality"] = p;
  j["ok"] = r.ok();
  return j;
}

}  // namespace progsim
