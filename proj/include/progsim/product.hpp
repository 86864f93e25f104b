#pragma once

#include <deque>
#include <map>
#include <string>
#include <vector>

#include "progsim/lts.hpp"

namespace progsim {

/// A state of P × O as its two component indices.
struct ProductState {
  StateId prog = 0;
  StateId obj = 0;

  auto operator<=>(const ProductState&) const = default;
};

/// P × O together with the component decomposition of every product state.
struct Product {
  Lts lts;
  std::vector<ProductState> components;

  const ProductState& at(StateId s) const { return components.at(s); }
  StateId obj(StateId s) const { return components.at(s).obj; }
  StateId prog(StateId s) const { return components.at(s).prog; }
};

namespace detail {

inline void require_same(const ActionSet& p, const ActionSet& o, const char* what) {
  for (const auto& a : p)
    if (!o.contains(a))
      throw ConfigError(std::string(what) + " action '" + a.token() + "' is in the program alphabet but not the object's");
  for (const auto& a : o)
    if (!p.contains(a))
      throw ConfigError(std::string(what) + " action '" + a.token() + "' is in the object alphabet but not the program's");
}

}  // namespace detail

/// Synchronised product of a program and an object. Calls and returns step
/// both components, program actions only the program, internal actions only
/// the object. Only reachable states are built (BFS in canonical action
/// order); component idles are dropped and the result is idle-completed with
/// its own idle action.
inline Product product(const Lts& p, const Lts& o) {
  const auto& pp = p.partition();
  const auto& op = o.partition();
  if (!pp.internal().empty())
    throw ConfigError("program alphabet contains internal action '" + pp.internal()[0].token() + "'");
  if (!op.program().empty())
    throw ConfigError("object alphabet contains program action '" + op.program()[0].token() + "'");
  detail::require_same(pp.calls(), op.calls(), "call");
  detail::require_same(pp.returns(), op.returns(), "return");

  LtsBuilder b;
  b.declare(pp.program());
  b.declare(pp.calls());
  b.declare(pp.returns());
  b.declare(op.internal());
  b.declare(idle_action());

  Product out;
  std::map<ProductState, StateId> index;
  std::deque<StateId> queue;
  auto intern = [&](ProductState ps) {
    auto [it, inserted] = index.emplace(ps, static_cast<StateId>(out.components.size()));
    if (inserted) {
      out.components.push_back(ps);
      const auto& pl = p.label(ps.prog);
      const auto& ol = o.label(ps.obj);
      b.add_state(pl.empty() || ol.empty() ? "(" + std::to_string(ps.prog) + "," + std::to_string(ps.obj) + ")"
                                           : pl + " | " + ol);
      queue.push_back(it->second);
    }
    return it->second;
  };
  intern({p.initial(), o.initial()});

  while (!queue.empty()) {
    StateId cur = queue.front();
    queue.pop_front();
    ProductState ps = out.components[cur];
    std::vector<std::pair<Action, ProductState>> succ;
    for (const auto& e : p.edges(ps.prog)) {
      const Action& a = p.action(e.action);
      if (a.kind == ActionKind::Idle) continue;
      if (a.kind == ActionKind::Program) {
        succ.push_back({a, {e.target, ps.obj}});
      } else if (auto os = o.successor(ps.obj, a)) {
        succ.push_back({a, {e.target, *os}});
      }
    }
    for (const auto& e : o.edges(ps.obj)) {
      const Action& a = o.action(e.action);
      if (a.kind == ActionKind::Internal) succ.push_back({a, {ps.prog, e.target}});
    }
    std::sort(succ.begin(), succ.end());
    for (const auto& [a, target] : succ) b.add_transition(cur, a, intern(target));
  }
  b.set_initial(0);
  out.lts = idle_complete(b.build());
  return out;
}

}  // namespace progsim
