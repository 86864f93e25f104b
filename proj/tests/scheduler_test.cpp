#include <gtest/gtest.h>

#include "progsim/progsim.hpp"
#include "support.hpp"

namespace progsim {
namespace {

using testing::act;
using testing::Rng;

std::vector<Action> letters() {
  return {act("a", ActionKind::Program), act("b", ActionKind::Call), act("c", ActionKind::Internal)};
}

class ConstScheduler final : public Scheduler {
 public:
  explicit ConstScheduler(ActionSet s) : s_(std::move(s)) {}
  std::string describe() const override { return "const"; }
  ActionSet schedule(std::span<const Action>) const override { return s_; }

 private:
  ActionSet s_;
};

std::shared_ptr<const Lts> share(Lts l) { return std::make_shared<const Lts>(std::move(l)); }

// Consistent traces up to depth by DFS over the scheduler itself; reports
// the first trace whose scheduled set is empty or contains a disabled action.
struct Walk {
  std::vector<Trace> traces;
  std::optional<Trace> not_admitted;
  std::optional<Trace> not_deterministic;
};

Walk walk(const Lts& a, const Scheduler& s, std::size_t depth) {
  Walk w;
  const auto& sigma_p = a.partition().program();
  std::function<void(StateId, Trace&)> go = [&](StateId st, Trace& t) {
    w.traces.push_back(t);
    auto set = s.schedule(t);
    bool bad = set.empty();
    for (const auto& x : set)
      if (!a.successor(st, x)) bad = true;
    if (bad && !w.not_admitted) w.not_admitted = t;
    if (set.size() > 1 && !set.is_subset_of(sigma_p) && !w.not_deterministic) w.not_deterministic = t;
    if (t.size() == depth) return;
    for (const auto& x : set) {
      auto nx = a.successor(st, x);
      if (!nx) continue;
      t.push_back(x);
      go(*nx, t);
      t.pop_back();
    }
  };
  Trace t;
  go(a.initial(), t);
  std::sort(w.traces.begin(), w.traces.end());
  return w;
}

TEST(Consistency, EmptyTraceAlwaysConsistent) {
  ConstScheduler s({});
  EXPECT_TRUE(is_consistent(Trace{}, s));
}

TEST(Consistency, UnscheduledFirstAction) {
  ConstScheduler s({act("b", ActionKind::Program)});
  EXPECT_FALSE(is_consistent(Trace{act("a", ActionKind::Program)}, s));
}

TEST(Consistency, RandomTablesMatchDefinition) {
  Rng rng(101);
  for (int rep = 0; rep < 20; ++rep) {
    auto l = testing::random_lts(rng, 4, letters(), 0.6);
    auto table = testing::random_table(rng, l, 6, true);
    for (const auto& t : testing::all_traces(l, 6))
      EXPECT_EQ(is_consistent(t, *table), testing::consistent_by_definition(t, *table));
  }
}

TEST(Admitted, MaximalHoldsExactly) {
  Rng rng(103);
  for (int rep = 0; rep < 10; ++rep) {
    auto l = share(testing::random_lts(rng, 6, letters(), 0.5));
    MaximalScheduler s(l);
    auto v = check_admitted(s, *l, 10);
    EXPECT_TRUE(v.holds);
    EXPECT_TRUE(v.exact);
  }
}

TEST(Admitted, EmptyAtRootViolatesFirstCondition) {
  Rng rng(107);
  auto l = testing::random_lts(rng, 3, letters(), 0.5);
  ConstScheduler s({});
  auto v = check_admitted(s, l, 5);
  ASSERT_FALSE(v.holds);
  EXPECT_TRUE(v.violation->trace.empty());
  EXPECT_EQ(v.violation->condition.substr(0, 3), "(i)");
}

TEST(Admitted, DisabledActionViolatesSecondCondition) {
  LtsBuilder b;
  b.declare(idle_action());
  b.declare(act("a", ActionKind::Program));
  b.add_state();
  auto l = idle_complete(b.build());
  ConstScheduler s({act("a", ActionKind::Program)});
  auto v = check_admitted(s, l, 3);
  ASSERT_FALSE(v.holds);
  EXPECT_EQ(v.violation->condition.substr(0, 4), "(ii)");
}

TEST(Admitted, AlternatorOnImplementationProduct) {
  auto cs = build_case_study({});
  auto lts = cs.impl_product_lts();
  LlAlternatorScheduler s(lts);
  auto v = check_admitted(s, *lts, 20);
  EXPECT_TRUE(v.holds);
  auto w = walk(*lts, s, 20);
  EXPECT_FALSE(w.not_admitted.has_value());
  EXPECT_EQ(w.traces.size(), 21u);  // one path, the alternator schedules singletons
}

TEST(Admitted, RandomTablesMatchDefinition) {
  Rng rng(109);
  for (int rep = 0; rep < 30; ++rep) {
    auto l = testing::random_lts(rng, 4, letters(), 0.6);
    auto table = testing::random_table(rng, l, 6, rep % 2 == 0, 0.05);
    auto v = check_admitted(*table, l, 6);
    auto w = walk(l, *table, 6);
    EXPECT_EQ(v.holds, !w.not_admitted.has_value());
    if (!v.holds) { EXPECT_EQ(v.violation->trace, *w.not_admitted); }
  }
}

TEST(SchedulerDeterminism, SingletonsHold) {
  Rng rng(113);
  auto l = share(testing::random_lts(rng, 5, letters(), 0.6));
  FirstEnabledScheduler s(l);
  EXPECT_TRUE(check_deterministic_scheduler(s, *l, 8).holds);
}

TEST(SchedulerDeterminism, MixedCallAndInternalFails) {
  LtsBuilder b;
  b.declare(idle_action());
  b.add_state();
  b.add_state();
  b.add_transition(0, act("call", ActionKind::Call, 1), 1);
  b.add_transition(0, act("step", ActionKind::Internal, 1), 1);
  auto l = idle_complete(b.build());
  ConstScheduler s({act("call", ActionKind::Call, 1), act("step", ActionKind::Internal, 1)});
  auto v = check_deterministic_scheduler(s, l, 2);
  ASSERT_FALSE(v.holds);
  EXPECT_TRUE(v.violation->trace.empty());
  EXPECT_EQ(v.violation->scheduled.size(), 2u);
}

TEST(SchedulerDeterminism, RandomTablesMatchDefinition) {
  Rng rng(127);
  for (int rep = 0; rep < 30; ++rep) {
    auto l = testing::random_lts(rng, 4, letters(), 0.6);
    auto table = testing::random_table(rng, l, 6, false);
    auto v = check_deterministic_scheduler(*table, l, 6);
    auto w = walk(l, *table, 6);
    EXPECT_EQ(v.holds, !w.not_deterministic.has_value());
  }
}

TEST(Enumerate, IdleOnlyMaximal) {
  LtsBuilder b;
  b.declare(idle_action());
  b.add_state();
  auto l = share(idle_complete(b.build()));
  MaximalScheduler s(l);
  auto t = enumerate_traces(*l, s, 3);
  Trace i{idle_action()};
  EXPECT_EQ(t.all_traces(), (std::vector<Trace>{{}, i, {idle_action(), idle_action()},
                                                {idle_action(), idle_action(), idle_action()}}));
}

TEST(Enumerate, SingletonChainIsOnePath) {
  Rng rng(131);
  auto l = share(testing::random_lts(rng, 6, letters(), 0.6));
  FirstEnabledScheduler s(l);
  auto t = enumerate_traces(*l, s, 9);
  EXPECT_EQ(t.size(), 10u);
}

TEST(Enumerate, EqualsGenerateAndFilter) {
  Rng rng(137);
  for (int rep = 0; rep < 30; ++rep) {
    auto l = share(testing::random_lts(rng, 4, letters(), 0.6));
    auto table = testing::random_table(rng, *l, 5, true);
    std::vector<Trace> expected;
    for (const auto& t : testing::all_traces(*l, 5))
      if (testing::consistent_by_definition(t, *table)) expected.push_back(t);
    EXPECT_EQ(enumerate_traces(*l, *table, 5).all_traces(), expected);
    // finite-memory path
    ThreadPriorityScheduler tp(l);
    std::vector<Trace> expected_tp;
    for (const auto& t : testing::all_traces(*l, 5))
      if (testing::consistent_by_definition(t, tp)) expected_tp.push_back(t);
    EXPECT_EQ(enumerate_traces(*l, tp, 5).all_traces(), expected_tp);
  }
}

TEST(Enumerate, BudgetExceeded) {
  Rng rng(139);
  auto l = share(testing::random_lts(rng, 4, letters(), 1.0));
  MaximalScheduler s(l);
  try {
    enumerate_traces(*l, s, 12, {100, false});
    FAIL();
  } catch (const ResourceError& e) {
    EXPECT_EQ(e.budget(), 100u);
  }
}

TEST(Enumerate, ChildrenSortedByAction) {
  auto cs = build_case_study({});
  auto lts = cs.impl_product_lts();
  MaximalScheduler s(lts);
  auto t = enumerate_traces(*lts, s, 5);
  for (TracePrefixTree::NodeId n = 0; n < t.size(); ++n) {
    const auto& kids = t.node(n).children;
    for (std::size_t i = 1; i < kids.size(); ++i) EXPECT_LT(t.node(kids[i - 1]).action, t.node(kids[i]).action);
  }
}

TEST(Divergence, AlternatorLassoOnInvalidatingImplementation) {
  auto cs = build_case_study({});
  auto lts = cs.impl_product_lts();
  LlAlternatorScheduler s(lts);
  auto d = find_divergence(*lts, s, lts->partition().gamma_p(), 24);
  ASSERT_TRUE(d.lasso.has_value());
  EXPECT_TRUE(d.exact);
  EXPECT_TRUE(is_valid_lasso(*lts, *d.lasso));
  EXPECT_TRUE(verify_lasso(*lts, s, *d.lasso, 3));
  for (const auto& a : d.lasso->cycle) EXPECT_EQ(a.kind, ActionKind::Internal);
  using namespace faa;
  EXPECT_EQ(d.lasso->stem, (Trace{call(1, 1), call(2, 2), ll(1)}));
  EXPECT_EQ(d.lasso->cycle, (Trace{ll(2), sc_fail(1), ll(1), sc_fail(2)}));
}

TEST(Divergence, NoneOnAtomicSpec) {
  auto cs = build_case_study({});
  auto lts = cs.spec_product_lts();
  for (const auto& name : strategy_names()) {
    auto s = make_scheduler(name, lts);
    auto d = find_divergence(*lts, *s, lts->partition().gamma_p(), 30);
    EXPECT_FALSE(d.lasso.has_value()) << name;
  }
}

TEST(Divergence, BoundedModeForTableScheduler) {
  // 0 -c-> 1 -c-> 0, with a visible a out of 0; a table scheduling c forever.
  LtsBuilder b;
  b.declare(idle_action());
  b.set_num_states(3);
  Action a = act("a", ActionKind::Program), c = act("c", ActionKind::Internal);
  b.add_transition(0, a, 2);
  b.add_transition(0, c, 1);
  b.add_transition(1, c, 0);
  auto l = idle_complete(b.build());
  std::map<Trace, ActionSet> table;
  Trace t;
  for (int i = 0; i <= 10; ++i) {
    table[t] = ActionSet{c};
    t.push_back(c);
  }
  TableScheduler s(table, 10, {});
  auto d = find_divergence(l, s, ActionSet{a}, 6);
  ASSERT_TRUE(d.lasso.has_value());
  EXPECT_FALSE(d.exact);
  EXPECT_TRUE(is_valid_lasso(l, *d.lasso));
}

TEST(Acyclic, SpecProductAndInevitableAssigns) {
  auto cs = build_case_study({});
  EXPECT_TRUE(check_acyclic_non_idle(cs.spec_product->lts).acyclic);
  auto impl = check_acyclic_non_idle(cs.impl_product->lts);
  ASSERT_FALSE(impl.acyclic);
  EXPECT_TRUE(is_valid_lasso(cs.impl_product->lts, *impl.cycle));
  auto must = inevitable_actions(cs.spec_product->lts, detail::strip_payload);
  EXPECT_TRUE(must.contains(detail::strip_payload(faa::assign(1, 0))));
  EXPECT_TRUE(must.contains(detail::strip_payload(faa::assign(2, 0))));
}

TEST(Table, JsonRoundTripAndDepth) {
  Rng rng(149);
  auto l = testing::random_lts(rng, 4, letters(), 0.6);
  auto table = testing::random_table(rng, l, 4, true);
  auto j = table_to_json(table->table(), table->depth(), table->fallback());
  auto back = table_from_json(j, l);
  EXPECT_EQ(back->table(), table->table());
  EXPECT_EQ(back->depth(), table->depth());
  Trace too_long(table->depth() + 1, idle_action());
  EXPECT_THROW(back->schedule(too_long), DepthExhausted);
}

TEST(Strategies, PureAndNamed) {
  auto cs = build_case_study({});
  auto lts = cs.impl_product_lts();
  for (const auto& name : strategy_names()) {
    auto s = make_scheduler("strategy=" + name, lts);
    EXPECT_EQ(s->describe(), "strategy=" + name);
    auto t = enumerate_traces(*lts, *s, 8);
    for (const auto& tr : t.all_traces()) EXPECT_EQ(s->schedule(tr), s->schedule(tr));
  }
  EXPECT_THROW(make_scheduler("strategy=none", lts), ConfigError);
  EXPECT_THROW(make_scheduler("colour=blue", lts), ConfigError);
}

TEST(Strategies, OffTraceQueryIsEmpty) {
  auto cs = build_case_study({});
  auto lts = cs.impl_product_lts();
  MaximalScheduler s(lts);
  EXPECT_TRUE(s.schedule(Trace{faa::ret(1, 0)}).empty());
}

}  // namespace
}  // namespace progsim
