#include <gtest/gtest.h>

#include "progsim/progsim.hpp"
#include "support.hpp"

namespace progsim {
namespace {

using testing::act;
using testing::Rng;

const Action kCall = act("call", ActionKind::Call);
const Action kRet = act("ret", ActionKind::Return);
const Action kTick = act("tick", ActionKind::Internal);
const Action kWork = act("work", ActionKind::Program);

Lts identity_object() { return load_lts(PROGSIM_MODELS_DIR "/id.lts"); }

// call, ret, then some program work, forever.
Lts loop_program() {
  LtsBuilder b;
  b.declare(idle_action());
  b.declare(ActionSet{kCall, kRet, kWork});
  b.set_num_states(3);
  b.add_transition(0, kCall, 1);
  b.add_transition(1, kRet, 2);
  b.add_transition(2, kWork, 0);
  return idle_complete(b.build());
}

struct Setup {
  std::shared_ptr<const Product> p1, p2;
  std::shared_ptr<const SimulationCertificate> cert;
};

Setup setup(const Lts& program, const Lts& o1, const Lts& o2) {
  Setup s;
  s.p1 = std::make_shared<const Product>(product(program, o1));
  s.p2 = std::make_shared<const Product>(product(program, o2));
  auto r = check_progressive(o1, o2, o1.partition().calls_and_returns(), 4);
  EXPECT_EQ(r.verdict, Verdict::Yes);
  s.cert = std::make_shared<const SimulationCertificate>(*r.certificate);
  return s;
}

Setup plain_setup() {
  FaaConfig cfg;
  cfg.variant = FaaVariant::LlscPlain;
  auto cs = build_case_study(cfg);
  Setup s;
  s.p1 = cs.impl_product;
  s.p2 = cs.spec_product;
  auto r = check_progressive(cs.impl, cs.spec, cs.impl.partition().calls_and_returns(), 4);
  EXPECT_EQ(r.verdict, Verdict::Yes);
  s.cert = std::make_shared<const SimulationCertificate>(*r.certificate);
  return s;
}

SchedulerPtr strategy(const std::string& name, const std::shared_ptr<const Product>& p) {
  return make_scheduler("strategy=" + name, std::shared_ptr<const Lts>(p, &p->lts));
}

TEST(Mapping, ProgramActionsMapToThemselves) {
  auto s = plain_setup();
  auto a = faa::assign(1, 2);
  EXPECT_EQ(mapping_m(0, a, 0, *s.cert), Trace{a});
  // even from an unrelated pair
  EXPECT_EQ(mapping_m(1000, a, 1000, *s.cert), Trace{a});
}

TEST(Mapping, ObjectActionsFollowCertificate) {
  auto s = plain_setup();
  std::set<std::string> seen;
  for (const auto& [k, c] : s.cert->choice) {
    const auto& [cs, a, as] = k;
    auto m = mapping_m(cs, a, as, *s.cert);
    EXPECT_EQ(m, c.alpha);
    if (a.is_object_visible()) {
      EXPECT_EQ(project(m, s.cert->gamma), Trace{a});
    } else if (a.kind == ActionKind::Internal) {
      for (const auto& x : m) EXPECT_EQ(x.name, "lin");
    }
    seen.insert(a.name);
  }
  EXPECT_TRUE(seen.count("SC_fail"));
  EXPECT_TRUE(seen.count("SC_ok"));
  EXPECT_TRUE(seen.count("LL"));
}

TEST(Mapping, UnrelatedPairIsContractViolation) {
  auto s = plain_setup();
  EXPECT_THROW(mapping_m(0, faa::call(1, 1), 1000, *s.cert), ContractViolation);
}

// O1 is quiescent after a return; O2 needs an internal step first.
Setup gap_setup() {
  LtsBuilder b1, b2;
  for (auto* b : {&b1, &b2}) {
    b->declare(idle_action());
    b->declare(ActionSet{kCall, kRet});
  }
  b1.set_num_states(2);
  b1.add_transition(0, kCall, 1);
  b1.add_transition(1, kRet, 0);
  b2.declare(kTick);
  b2.set_num_states(3);
  b2.add_transition(0, kCall, 1);
  b2.add_transition(1, kRet, 2);
  b2.add_transition(2, kTick, 0);
  LtsBuilder pb;
  pb.declare(idle_action());
  pb.declare(ActionSet{kCall, kRet});
  pb.set_num_states(3);
  pb.add_transition(0, kCall, 1);
  pb.add_transition(1, kRet, 2);
  return setup(idle_complete(pb.build()), idle_complete(b1.build()), idle_complete(b2.build()));
}

TEST(Mapping, IdleAppendsInternalPathToQuiescence) {
  auto s = gap_setup();
  const auto& l1 = s.p1->lts;
  const auto& l2 = s.p2->lts;
  auto c = run(l1, Trace{kCall, kRet});
  auto v = run(l2, Trace{kCall, kRet});
  auto m = map_step(*s.p1, *s.p2, *s.cert, c, l1.action(l1.idle_id()), v, 4);
  EXPECT_EQ(m, (Trace{kTick, l2.action(l2.idle_id())}));
  EXPECT_THROW(map_step(*s.p1, *s.p2, *s.cert, c, l1.action(l1.idle_id()), v, 0), ContractViolation);
}

TEST(MappedTraces, DepthZeroIsRoot) {
  auto s = plain_setup();
  auto mt = build_f(s.p1, strategy("round-robin", s.p1), s.p2, s.cert, 0);
  EXPECT_EQ(mt->concrete.size(), 1u);
  EXPECT_EQ(mt->image.size(), 1u);
  EXPECT_EQ(mt->cinfo[0].link, mt->image.root());
  EXPECT_EQ(mt->complete_depth(), 0u);
}

TEST(MappedTraces, IdentityObjectsGiveIdentityImage) {
  auto o = identity_object();
  auto s = setup(loop_program(), o, o);
  for (const std::string name : {"maximal", "first", "round-robin", "program-set"}) {
    auto s1 = strategy(name, s.p1);
    auto mt = build_f(s.p1, s1, s.p2, s.cert, 9);
    ConstructedScheduler s2(mt);
    ASSERT_EQ(mt->image.size(), mt->concrete.size()) << name;
    for (MappedTraces::NodeId c = 0; c < mt->concrete.size(); ++c)
      EXPECT_EQ(mt->image.trace(mt->cinfo[c].link), mt->concrete.trace(c));
    for (int id = 1; id <= 5; ++id) EXPECT_TRUE(check_lemma(id, *mt, s2).holds) << name << " L" << id;
    EXPECT_TRUE(check_s2_well_defined(*mt).holds);
    EXPECT_TRUE(check_progress_realization(*mt).holds);
    EXPECT_TRUE(check_theorem1(*mt, s2).holds);
    EXPECT_EQ(s2.schedule({}), s1->schedule({}));
  }
}

TEST(MappedTraces, MidAlphaNodesGetSingleton) {
  auto s = gap_setup();
  auto mt = build_f(s.p1, strategy("maximal", s.p1), s.p2, s.cert, 5);
  ConstructedScheduler s2(mt);
  // call ret idle maps to call ret tick idle; the node after tick is inside a segment
  auto v = mt->image.find(Trace{kCall, kRet, kTick});
  ASSERT_NE(v, MappedTraces::npos);
  ASSERT_FALSE(mt->iinfo[v].mid.empty());
  EXPECT_TRUE(mt->iinfo[v].exact.empty());
  EXPECT_EQ(s2.schedule(mt->image.trace(v)), ActionSet{s.p2->lts.partition().idle()});
  EXPECT_EQ(s2.schedule(Trace{kCall, kRet}), ActionSet{kTick});
  for (int id = 1; id <= 5; ++id) EXPECT_TRUE(check_lemma(id, *mt, s2).holds) << "L" << id;
  EXPECT_TRUE(check_theorem1(*mt, s2).holds);
}

TEST(MappedTraces, StepsAgreeWithMapping) {
  auto s = plain_setup();
  auto mt = build_f(s.p1, strategy("round-robin", s.p1), s.p2, s.cert, 16);
  for (MappedTraces::NodeId c = 1; c < mt->concrete.size(); ++c) {
    auto p = mt->concrete.node(c).parent;
    auto expected = map_step(*s.p1, *s.p2, *s.cert, mt->concrete.node(p).state, mt->concrete.action_of(c),
                             mt->image.node(mt->cinfo[p].link).state, 4);
    EXPECT_EQ(mt->cinfo[c].alpha, expected);
    auto img = mt->image.trace(mt->cinfo[p].link);
    img.insert(img.end(), expected.begin(), expected.end());
    EXPECT_EQ(mt->image.trace(mt->cinfo[c].link), img);
  }
}

TEST(MappedTraces, PlainCaseStudyPipeline) {
  auto s = plain_setup();
  for (const auto& name : {"round-robin", "fifo", "program-set", "thread-priority"}) {
    auto rep = run_transform_pipeline(s.p1, strategy(name, s.p1), s.p2, s.cert, 20);
    for (const auto& c : rep.checks) EXPECT_TRUE(c.holds) << name << " " << c.name << ": " << c.counterexample;
    EXPECT_TRUE(rep.projection.holds);
    EXPECT_GE(rep.projection.compared_depth, 8u);
    std::vector<std::string> names;
    for (const auto& c : rep.checks) names.push_back(c.name);
    EXPECT_EQ(names, (std::vector<std::string>{"L1", "L2", "L3", "L4", "L5", "S2-well-defined", "progress",
                                               "theorem1", "S2-deterministic", "S2-admitted"}));
  }
}

TEST(MappedTraces, RandomInstancesSatisfyEveryCheck) {
  Rng rng(307);
  int ran = 0, multi_def = 0;
  for (int rep = 0; rep < 200 && ran < 40; ++rep) {
    auto in = testing::random_instance(rng);
    if (in.o1.num_states() > 6) continue;
    auto r = check_progressive(in.o1, in.o2, in.o1.partition().calls_and_returns(), 4);
    if (r.verdict != Verdict::Yes) continue;
    auto cert = std::make_shared<const SimulationCertificate>(*r.certificate);
    PipelineReport pr;
    try {
      pr = run_transform_pipeline(in.p1, in.s1, in.p2, cert, 10);
    } catch (const ContractViolation&) {
      continue;
    }
    ++ran;
    for (const auto& c : pr.checks) {
      EXPECT_TRUE(c.holds) << c.name << ": " << c.counterexample;
      if (c.name == "S2-well-defined" && c.checked > 0) ++multi_def;
    }
    EXPECT_TRUE(pr.projection.holds);
  }
  EXPECT_GE(ran, 20);
  EXPECT_GT(multi_def, 0);
}

TEST(MappedTraces, BrokenLinkCaughtByLemma3Only) {
  auto s = plain_setup();
  auto mt = build_f(s.p1, strategy("round-robin", s.p1), s.p2, s.cert, 14);
  // A leaf whose step maps to a non-empty sequence outside Γ_P.
  MappedTraces::NodeId victim = MappedTraces::npos;
  for (MappedTraces::NodeId c = 1; c < mt->concrete.size(); ++c) {
    const auto& a = mt->cinfo[c].alpha;
    if (!mt->concrete.node(c).children.empty() || a.empty()) continue;
    if (std::none_of(a.begin(), a.end(), [&](const Action& x) { return mt->gamma_p().contains(x); })) {
      victim = c;
      break;
    }
  }
  ASSERT_NE(victim, MappedTraces::npos);
  mt->cinfo[victim].link = mt->cinfo[mt->concrete.node(victim).parent].link;
  ConstructedScheduler s2(mt);
  for (int id = 1; id <= 5; ++id) EXPECT_EQ(check_lemma(id, *mt, s2).holds, id != 3) << "L" << id;
  EXPECT_TRUE(check_s2_well_defined(*mt).holds);
  EXPECT_TRUE(check_progress_realization(*mt).holds);
}

TEST(ConstructedScheduler, OffImageIsIdle) {
  auto s = plain_setup();
  auto mt = build_f(s.p1, strategy("round-robin", s.p1), s.p2, s.cert, 8);
  ConstructedScheduler s2(mt);
  auto first = s2.schedule({});
  ASSERT_FALSE(first.empty());
  // a call the image never starts with
  Trace off{faa::call(2, 2), faa::call(2, 2)};
  EXPECT_EQ(s2.schedule(off), ActionSet{s.p2->lts.partition().idle()});
}

TEST(ConstructedScheduler, DeepensOnDemandThenGivesUp) {
  auto s = plain_setup();
  auto mt = build_f(s.p1, strategy("round-robin", s.p1), s.p2, s.cert, 2);
  ConstructedScheduler fixed(mt, 2);
  // follow S2 until the construction runs out
  Trace t;
  EXPECT_THROW(
      {
        for (int i = 0; i < 40; ++i) {
          auto next = fixed.schedule(t);
          if (next.empty()) break;
          t.push_back(next.items().front());
        }
      },
      DepthExhausted);
  ConstructedScheduler growing(mt, 24);
  t.clear();
  for (int i = 0; i < 10; ++i) {
    auto next = growing.schedule(t);
    ASSERT_FALSE(next.empty());
    t.push_back(next.items().front());
  }
  EXPECT_GT(mt->depth(), 2u);
}

TEST(Projection, ComparedDepthUnboundedOnTerminatingCase) {
  auto s = plain_setup();
  auto rep = run_transform_pipeline(s.p1, strategy("program-set", s.p1), s.p2, s.cert, 20);
  EXPECT_EQ(depth_string(rep.projection.compared_depth), "unbounded");
  EXPECT_GT(rep.projection.compared, 1u);
  auto j = pipeline_json(rep);
  EXPECT_EQ(j["ok"], true);
  EXPECT_EQ(j["checks"].size(), 10u);
}

TEST(Projection, DetectsDifferentScheduler) {
  // The maximal scheduler on P×O2 allows both orders of the assigns.
  auto s = plain_setup();
  auto mt = build_f(s.p1, strategy("thread-priority", s.p1), s.p2, s.cert, 20);
  auto maximal = strategy("maximal", s.p2);
  auto pc = check_projection_equality(*mt, *maximal, s.p1->lts.partition().program(), 20);
  EXPECT_FALSE(pc.holds);
  EXPECT_TRUE(pc.only_abstract.has_value());
  EXPECT_FALSE(pc.only_concrete.has_value());
}

// A call after which the object may spin internally forever before returning.
struct SpinCase {
  Setup s;
  SchedulerPtr spinner;
};

SpinCase spin_case() {
  const Action spin = act("spin", ActionKind::Internal);
  LtsBuilder ob;
  ob.declare(idle_action());
  ob.declare(ActionSet{kCall, kRet, spin});
  ob.set_num_states(2);
  ob.add_transition(0, kCall, 1);
  ob.add_transition(1, spin, 1);
  ob.add_transition(1, kRet, 0);
  auto o = idle_complete(ob.build());
  LtsBuilder pb;
  pb.declare(idle_action());
  pb.declare(ActionSet{kCall, kRet, kWork});
  pb.set_num_states(4);
  pb.add_transition(0, kCall, 1);
  pb.add_transition(1, kRet, 2);
  pb.add_transition(2, kWork, 3);
  SpinCase sc{setup(idle_complete(pb.build()), o, o), nullptr};
  const auto& l = sc.s.p1->lts;
  std::vector<std::vector<ActionId>> table(l.num_states());
  for (StateId x = 0; x < l.num_states(); ++x) {
    auto spin_id = l.find_action(spin);
    table[x] = {l.successor(x, *spin_id) ? *spin_id : l.edges(x).front().action};
  }
  sc.spinner = std::make_shared<StateTableScheduler>(std::shared_ptr<const Lts>(sc.s.p1, &l), table, "spinner");
  return sc;
}

TEST(Projection, SilentDivergenceIsComplete) {
  auto sc = spin_case();
  auto rep = run_transform_pipeline(sc.s.p1, sc.spinner, sc.s.p2, sc.s.cert, 10);
  EXPECT_TRUE(rep.ok());
  EXPECT_EQ(depth_string(rep.projection.compared_depth), "unbounded");
  auto mt = build_f(sc.s.p1, sc.spinner, sc.s.p2, sc.s.cert, 10);
  const auto sigma_p = sc.s.p1->lts.partition().program();
  auto deepest = static_cast<MappedTraces::NodeId>(mt->concrete.size() - 1);
  EXPECT_TRUE(mt->concrete_silent_forever(deepest, sigma_p));
  EXPECT_FALSE(mt->concrete_silent_forever(1, sigma_p));  // after the call, before any spin
  EXPECT_TRUE(mt->image_silent_forever(mt->cinfo[deepest].link, sigma_p));
}

TEST(Projection, NoProofWithoutFiniteMemory) {
  // The same choices as a trace table: nothing is known past the table.
  auto sc = spin_case();
  const auto& l = sc.s.p1->lts;
  std::map<Trace, ActionSet> table;
  Trace t;
  for (int i = 0; i <= 12; ++i) {
    auto set = sc.spinner->schedule(t);
    table[t] = set;
    t.push_back(set.items().front());
  }
  auto s1 = std::make_shared<TableScheduler>(table, 12);
  auto mt = build_f(sc.s.p1, s1, sc.s.p2, sc.s.cert, 10);
  auto deepest = static_cast<MappedTraces::NodeId>(mt->concrete.size() - 1);
  EXPECT_FALSE(mt->concrete_silent_forever(deepest, l.partition().program()));
  ConstructedScheduler s2(mt);
  auto pc = check_projection_equality(*mt, s2, l.partition().program(), 10);
  EXPECT_TRUE(pc.holds);
  EXPECT_EQ(pc.compared_depth, 0u);
}

}  // namespace
}  // namespace progsim
