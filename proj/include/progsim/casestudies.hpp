#pragma once

#include <deque>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "progsim/lts.hpp"
#include "progsim/product.hpp"
#include "progsim/scheduler.hpp"
#include "progsim/scheduler_checks.hpp"
#include "progsim/simulation.hpp"
#include "progsim/transform.hpp"

namespace progsim {

// Fetch-and-add objects. O1 is the LL/SC loop
//   do { n = LL(&v); } while (!SC(&v, n + k)); return n;
// with per-thread program counter Pre (before the call), F2 (before LL),
// F3 (after LL, holding n), F4 (after the successful SC), Done. O2 takes the
// addition atomically at an internal `lin` action.

enum class FaaVariant { LlscInvalidating, LlscPlain, Atomic };

inline std::string to_string(FaaVariant v) {
  switch (v) {
    case FaaVariant::LlscInvalidating: return "llsc-invalidating";
    case FaaVariant::LlscPlain: return "llsc-plain";
    case FaaVariant::Atomic: return "atomic";
  }
  return "?";
}

inline FaaVariant parse_variant(const std::string& s) {
  for (auto v : {FaaVariant::LlscInvalidating, FaaVariant::LlscPlain, FaaVariant::Atomic})
    if (to_string(v) == s) return v;
  throw ConfigError("unknown variant '" + s + "' (expected llsc-invalidating, llsc-plain or atomic)");
}

struct FaaConfig {
  std::vector<int> addends{1, 2};  // one per thread, threads are numbered from 1
  FaaVariant variant = FaaVariant::LlscInvalidating;

  int threads() const { return static_cast<int>(addends.size()); }
  int max_counter() const { return std::accumulate(addends.begin(), addends.end(), 0); }
};

namespace faa {

inline Action call(int i, int k) { return make_action("call", ActionKind::Call, i, k); }
inline Action ret(int i, long v) { return make_action("ret", ActionKind::Return, i, v); }
inline Action assign(int i, long v) { return make_action("assign", ActionKind::Program, i, v); }
inline Action ll(int i) { return make_action("LL", ActionKind::Internal, i); }
inline Action sc_ok(int i) { return make_action("SC_ok", ActionKind::Internal, i); }
inline Action sc_fail(int i) { return make_action("SC_fail", ActionKind::Internal, i); }
inline Action lin(int i) { return make_action("lin", ActionKind::Internal, i); }

// Calls and returns shared by the objects and the program, every return
// value in range declared so that alphabets agree.
inline void declare_interface(LtsBuilder& b, const FaaConfig& cfg) {
  for (int i = 1; i <= cfg.threads(); ++i) {
    b.declare(call(i, cfg.addends[i - 1]));
    for (int v = 0; v <= cfg.max_counter(); ++v) b.declare(ret(i, v));
  }
  b.declare(idle_action());
}

enum Pc : int { Pre, F2, F3, F4, Done };
inline const char* pc_name(int pc) {
  static const char* names[] = {"Pre", "F2", "F3", "F4", "Done"};
  return names[pc];
}

// Explicit-state builder: a state is a vector of ints, successors are
// computed by `step`, states are numbered in BFS order.
template <class Step, class Label>
Lts explore(LtsBuilder& b, std::vector<int> init, Step step, Label label) {
  std::map<std::vector<int>, StateId> index;
  std::vector<std::vector<int>> states;
  std::deque<StateId> queue;
  auto intern = [&](const std::vector<int>& s) {
    auto [it, inserted] = index.emplace(s, static_cast<StateId>(states.size()));
    if (inserted) {
      states.push_back(s);
      b.add_state(label(s));
      queue.push_back(it->second);
    }
    return it->second;
  };
  b.set_initial(intern(init));
  while (!queue.empty()) {
    StateId cur = queue.front();
    queue.pop_front();
    auto from = states[cur];
    for (const auto& [a, to] : step(from)) b.add_transition(cur, a, intern(to));
  }
  return idle_complete(b.build());
}

}  // namespace faa

/// O1. Layout: [counter, link owner (0 = none), pc_1, n_1, pc_2, n_2, ...].
inline Lts build_faa_impl(const FaaConfig& cfg) {
  if (cfg.variant == FaaVariant::Atomic) throw ConfigError("build_faa_impl needs an LL/SC variant");
  using namespace faa;
  const bool invalidating = cfg.variant == FaaVariant::LlscInvalidating;
  const int n = cfg.threads();
  LtsBuilder b;
  declare_interface(b, cfg);
  for (int i = 1; i <= n; ++i) {
    b.declare(ll(i));
    b.declare(sc_ok(i));
    b.declare(sc_fail(i));
  }
  std::vector<int> init(2 + 2 * n, 0);
  auto step = [&](const std::vector<int>& s) {
    std::vector<std::pair<Action, std::vector<int>>> out;
    for (int i = 1; i <= n; ++i) {
      const int pc = 2 * i, val = 2 * i + 1;
      auto t = s;
      switch (s[pc]) {
        case Pre:
          t[pc] = F2;
          out.push_back({call(i, cfg.addends[i - 1]), t});
          break;
        case F2:
          t[pc] = F3;
          t[val] = s[0];
          if (invalidating) t[1] = i;
          out.push_back({ll(i), t});
          break;
        case F3: {
          bool valid = invalidating ? s[1] == i : s[0] == s[val];
          if (valid) {
            t[pc] = F4;
            t[0] = s[0] + cfg.addends[i - 1];
            if (invalidating) t[1] = 0;
            out.push_back({sc_ok(i), t});
          } else {
            t[pc] = F2;
            t[val] = 0;
            out.push_back({sc_fail(i), t});
          }
          break;
        }
        case F4:
          t[pc] = Done;
          t[val] = 0;
          out.push_back({ret(i, s[val]), t});
          break;
      }
    }
    return out;
  };
  auto label = [&](const std::vector<int>& s) {
    std::string l = "c=" + std::to_string(s[0]);
    if (invalidating) l += " link=" + (s[1] ? std::to_string(s[1]) : std::string("-"));
    for (int i = 1; i <= n; ++i) {
      l += " t" + std::to_string(i) + "=" + pc_name(s[2 * i]);
      if (s[2 * i] == F3 || s[2 * i] == F4) l += "(" + std::to_string(s[2 * i + 1]) + ")";
    }
    return l;
  };
  return explore(b, init, step, label);
}

/// O2. Layout: [counter, pc_1, v_1, ...] with pc in {Pre, Pending, Lin, Done}.
inline Lts build_faa_spec(const FaaConfig& cfg) {
  using namespace faa;
  enum { SPre, SPending, SLin, SDone };
  const int n = cfg.threads();
  LtsBuilder b;
  declare_interface(b, cfg);
  for (int i = 1; i <= n; ++i) b.declare(lin(i));
  std::vector<int> init(1 + 2 * n, 0);
  auto step = [&](const std::vector<int>& s) {
    std::vector<std::pair<Action, std::vector<int>>> out;
    for (int i = 1; i <= n; ++i) {
      const int pc = 2 * i - 1, val = 2 * i;
      auto t = s;
      switch (s[pc]) {
        case SPre:
          t[pc] = SPending;
          out.push_back({call(i, cfg.addends[i - 1]), t});
          break;
        case SPending:
          t[pc] = SLin;
          t[val] = s[0];
          t[0] = s[0] + cfg.addends[i - 1];
          out.push_back({lin(i), t});
          break;
        case SLin:
          t[pc] = SDone;
          t[val] = 0;
          out.push_back({ret(i, s[val]), t});
          break;
      }
    }
    return out;
  };
  auto label = [&](const std::vector<int>& s) {
    static const char* names[] = {"Pre", "Pending", "Lin", "Done"};
    std::string l = "c=" + std::to_string(s[0]);
    for (int i = 1; i <= n; ++i) {
      l += " t" + std::to_string(i) + "=" + names[s[2 * i - 1]];
      if (s[2 * i - 1] == SLin) l += "(" + std::to_string(s[2 * i]) + ")";
    }
    return l;
  };
  return explore(b, init, step, label);
}

/// P: every thread calls fetch_and_add(k_i) once and assigns the result.
/// Layout: [pc_1, v_1, ...] with pc in {Pre, Wait, Got, Done}.
inline Lts build_program(const FaaConfig& cfg) {
  using namespace faa;
  enum { PPre, PWait, PGot, PDone };
  const int n = cfg.threads();
  LtsBuilder b;
  declare_interface(b, cfg);
  for (int i = 1; i <= n; ++i)
    for (int v = 0; v <= cfg.max_counter(); ++v) b.declare(assign(i, v));
  std::vector<int> init(2 * n, 0);
  auto step = [&](const std::vector<int>& s) {
    std::vector<std::pair<Action, std::vector<int>>> out;
    for (int i = 1; i <= n; ++i) {
      const int pc = 2 * i - 2, val = 2 * i - 1;
      auto t = s;
      switch (s[pc]) {
        case PPre:
          t[pc] = PWait;
          out.push_back({call(i, cfg.addends[i - 1]), t});
          break;
        case PWait:
          for (int v = 0; v <= cfg.max_counter(); ++v) {
            t[pc] = PGot;
            t[val] = v;
            out.push_back({ret(i, v), t});
          }
          break;
        case PGot:
          t[pc] = PDone;
          t[val] = 0;
          out.push_back({assign(i, s[val]), t});
          break;
      }
    }
    return out;
  };
  auto label = [&](const std::vector<int>& s) {
    static const char* names[] = {"Pre", "Wait", "Got", "Done"};
    std::string l;
    for (int i = 1; i <= n; ++i) {
      if (i > 1) l += ' ';
      l += "t" + std::to_string(i) + "=" + names[s[2 * i - 2]];
      if (s[2 * i - 2] == PGot) l += "(" + std::to_string(s[2 * i - 1]) + ")";
    }
    return l;
  };
  return explore(b, init, step, label);
}

/// The three models and both products for one configuration.
struct CaseStudy {
  FaaConfig cfg;
  Lts program;
  Lts impl;
  Lts spec;
  std::shared_ptr<const Product> impl_product;
  std::shared_ptr<const Product> spec_product;

  std::shared_ptr<const Lts> impl_product_lts() const { return {impl_product, &impl_product->lts}; }
  std::shared_ptr<const Lts> spec_product_lts() const { return {spec_product, &spec_product->lts}; }
};

inline CaseStudy build_case_study(FaaConfig cfg) {
  CaseStudy cs;
  cs.cfg = cfg;
  cs.program = build_program(cfg);
  cs.impl = build_faa_impl(cfg);
  auto spec_cfg = cfg;
  spec_cfg.variant = FaaVariant::Atomic;
  cs.spec = build_faa_spec(spec_cfg);
  cs.impl_product = std::make_shared<const Product>(product(cs.program, cs.impl));
  cs.spec_product = std::make_shared<const Product>(product(cs.program, cs.spec));
  return cs;
}

struct SuiteOptions {
  std::size_t alpha_bound = 4;
  std::size_t divergence_depth = 24;
  std::size_t admitted_depth = 20;
  std::size_t transform_depth = 20;
  std::vector<std::string> transform_strategies{"ll-alternator", "round-robin", "fifo", "program-set",
                                                "thread-priority"};
  std::size_t jobs = 1;
};

struct SuiteStep {
  std::string id;
  std::string title;
  std::string expected;
  std::string observed = {};
  bool pass = false;
  nlohmann::json detail = {};
};

struct SuiteReport {
  std::string variant;
  std::vector<SuiteStep> steps;

  bool ok() const {
    for (const auto& s : steps)
      if (!s.pass) return false;
    return !steps.empty();
  }
};

inline nlohmann::json lasso_json(const Lasso& l) {
  return {{"stem", tokens_json(l.stem)}, {"cycle", tokens_json(l.cycle)}};
}

inline std::string format_lasso(const Lasso& l) { return format_trace(l.stem) + " (" + format_trace(l.cycle) + ")^ω"; }

namespace detail {

inline bool mentions_kind(std::span<const Action> t, ActionKind k) {
  for (const auto& a : t)
    if (a.kind == k) return true;
  return false;
}

inline SuiteStep step_forward(const CaseStudy& cs, const SuiteOptions& opt) {
  SuiteStep st{.id = "a", .title = "forward simulation O1 -> O2 over C∪R", .expected = "certificate"};
  const auto gamma = cs.impl.partition().calls_and_returns();
  auto r = check_forward(cs.impl, cs.spec, gamma, opt.alpha_bound, {opt.jobs});
  st.detail["verdict"] = std::string(to_string(r.verdict));
  st.detail["relation_size"] = r.relation.size();
  st.detail["rounds"] = r.rounds;
  if (r.certificate) {
    auto v = validate_certificate(*r.certificate, nullptr, cs.impl, cs.spec);
    st.detail["validated"] = v.ok;
    st.observed = v.ok ? "certificate" : "invalid certificate";
    st.pass = v.ok;
  } else {
    st.observed = "no certificate (" + std::string(to_string(r.verdict)) + ")";
  }
  return st;
}

// A returned cycle must replay on O1 and each of its steps must have no
// non-stuttering match inside the relation it was found in.
inline bool stutter_cycle_replays(const StutterCycle& w, const Lts& a1, const Lts& a2, const ActionSet& gamma,
                                  std::size_t bound) {
  if (w.cycle.empty()) return false;
  MoveTable mt(a1, a2, gamma, bound);
  std::set<std::pair<StateId, StateId>> rel(w.relation.begin(), w.relation.end());
  for (std::size_t i = 0; i < w.cycle.size(); ++i) {
    const auto& e = w.cycle[i];
    if (a1.successor(e.s1, e.action) != e.s1_next) return false;
    if (w.cycle[(i + 1) % w.cycle.size()].s1 != e.s1_next) return false;
    auto id = a1.find_action(e.action);
    for (const auto& m : mt.moves(*id, e.s2))
      if (!m.alpha.empty() && rel.count({e.s1_next, m.target})) return false;
  }
  return true;
}

inline SuiteStep step_progressive(const CaseStudy& cs, const SuiteOptions& opt, bool expect_cycle) {
  SuiteStep st{.id = "b", .title = "progressive forward simulation O1 -> O2 over C∪R",
               .expected = expect_cycle ? "stutter cycle" : "certificate with ranking"};
  const auto gamma = cs.impl.partition().calls_and_returns();
  ProgressiveOptions po;
  po.jobs = opt.jobs;
  auto r = check_progressive(cs.impl, cs.spec, gamma, opt.alpha_bound, po);
  st.detail["verdict"] = std::string(to_string(r.verdict));
  if (r.verdict == Verdict::No && r.cycle) {
    bool replays = stutter_cycle_replays(*r.cycle, cs.impl, cs.spec, gamma, opt.alpha_bound);
    std::vector<std::string> actions;
    for (const auto& e : r.cycle->cycle) actions.push_back(e.action.token());
    st.detail["cycle_actions"] = actions;
    st.detail["cycle_replays"] = replays;
    st.observed = replays ? "stutter cycle" : "stutter cycle that does not replay";
  } else if (r.verdict == Verdict::Yes && r.certificate && r.witness) {
    auto v = validate_certificate(*r.certificate, &*r.witness, cs.impl, cs.spec);
    st.detail["validated"] = v.ok;
    st.observed = v.ok ? "certificate with ranking" : "invalid certificate";
  } else {
    st.observed = std::string(to_string(r.verdict)) + (r.note.empty() ? "" : ": " + r.note);
  }
  st.pass = st.observed == st.expected;
  return st;
}

inline SuiteStep step_divergence(const CaseStudy& cs, const SuiteOptions& opt, bool expect_lasso) {
  SuiteStep st{.id = "c", .title = "divergence of P×O1 under the LL-alternator",
               .expected = expect_lasso ? "assign-free lasso" : "no divergence"};
  auto lts = cs.impl_product_lts();
  auto s = std::make_shared<LlAlternatorScheduler>(lts);
  auto adm = check_admitted(*s, *lts, opt.admitted_depth);
  st.detail["admitted"] = adm.holds;
  st.detail["admitted_exact"] = adm.exact;
  auto det = check_deterministic_scheduler(*s, *lts, opt.admitted_depth);
  st.detail["deterministic"] = det.holds;
  auto d = find_divergence(*lts, *s, lts->partition().gamma_p(), opt.divergence_depth);
  st.detail["exact"] = d.exact;
  if (d.lasso) {
    bool consistent = verify_lasso(*lts, *s, *d.lasso);
    bool assign_free = !mentions_kind(d.lasso->cycle, ActionKind::Program);
    st.detail["lasso"] = lasso_json(*d.lasso);
    st.detail["lasso_consistent"] = consistent;
    st.detail["projected_lasso"] = lasso_json(project(*d.lasso, lts->partition().program()));
    st.observed = !consistent ? "inconsistent lasso" : assign_free ? "assign-free lasso" : "lasso with assigns";
  } else {
    st.observed = d.exact ? "no divergence" : "no divergence up to depth";
  }
  st.pass = st.observed == st.expected && adm.holds && det.holds;
  return st;
}

inline Action strip_payload(const Action& a) {
  Action b = a;
  b.payload.reset();
  return b;
}

inline SuiteStep step_atomic_dag(const CaseStudy& cs) {
  SuiteStep st{.id = "d", .title = "non-idle transitions of P×O2 are acyclic and every run assigns in both threads",
               .expected = "acyclic, assigns inevitable"};
  const Lts& a = cs.spec_product->lts;
  auto acyc = check_acyclic_non_idle(a);
  st.detail["acyclic"] = acyc.acyclic;
  if (!acyc.acyclic) {
    if (acyc.cycle) st.detail["cycle"] = lasso_json(*acyc.cycle);
    st.observed = "cyclic";
    return st;
  }
  auto must = inevitable_actions(a, strip_payload);
  std::vector<std::string> names;
  for (const auto& x : must) names.push_back(x.token());
  st.detail["inevitable"] = names;
  bool all = true;
  for (int i = 1; i <= cs.cfg.threads(); ++i)
    all = all && must.contains(strip_payload(faa::assign(i, 0)));
  st.observed = all ? "acyclic, assigns inevitable" : "acyclic, some assign avoidable";
  st.pass = all;
  return st;
}

inline SuiteStep step_transform(const SuiteOptions& opt) {
  SuiteStep st{.id = "e", .title = "terminating llsc-plain variant (extension): progressive simulation and S2 construction",
               .expected = "all checks pass"};
  FaaConfig cfg;
  cfg.variant = FaaVariant::LlscPlain;
  auto cs = build_case_study(cfg);
  const auto gamma = cs.impl.partition().calls_and_returns();
  ProgressiveOptions po;
  po.jobs = opt.jobs;
  auto r = check_progressive(cs.impl, cs.spec, gamma, opt.alpha_bound, po);
  st.detail["progressive"] = std::string(to_string(r.verdict));
  if (r.verdict != Verdict::Yes || !r.certificate) {
    st.observed = "no progressive certificate";
    return st;
  }
  auto cert = std::make_shared<const SimulationCertificate>(*r.certificate);
  bool ok = validate_certificate(*cert, r.witness ? &*r.witness : nullptr, cs.impl, cs.spec).ok;
  st.detail["certificate_valid"] = ok;
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& name : opt.transform_strategies) {
    auto s1 = make_scheduler(name, cs.impl_product_lts());
    TransformOptions to;
    to.alpha_bound = opt.alpha_bound;
    auto rep = run_transform_pipeline(cs.impl_product, s1, cs.spec_product, cert, opt.transform_depth, to);
    ok = ok && rep.ok();
    runs.push_back(pipeline_json(rep));
  }
  st.detail["pipelines"] = runs;
  st.observed = ok ? "all checks pass" : "some check failed";
  st.pass = ok;
  return st;
}

}  // namespace detail

/// Runs the five suite steps for `variant` (the O1 model). Expectations for
/// the LL/SC-specific steps depend on the variant: the invalidating object
/// stutters forever under the alternator, the plain one does not.
inline SuiteReport run_counterexample_suite(FaaVariant variant, const SuiteOptions& opt = {}) {
  if (variant == FaaVariant::Atomic) throw ConfigError("the suite needs an LL/SC variant for O1");
  FaaConfig cfg;
  cfg.variant = variant;
  auto cs = build_case_study(cfg);
  const bool inv = variant == FaaVariant::LlscInvalidating;
  SuiteReport rep;
  rep.variant = to_string(variant);
  rep.steps.push_back(detail::step_forward(cs, opt));
  rep.steps.push_back(detail::step_progressive(cs, opt, inv));
  rep.steps.push_back(detail::step_divergence(cs, opt, inv));
  rep.steps.push_back(detail::step_atomic_dag(cs));
  rep.steps.push_back(detail::step_transform(opt));
  return rep;
}

inline nlohmann::json suite_json(const SuiteReport& r) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["variant"] = r.variant;
  j["steps"] = nlohmann::json::array();
  for (const auto& s : r.steps)
    j["steps"].push_back({{"id", s.id},
                          {"title", s.title},
                          {"expected", s.expected},
                          {"observed", s.observed},
                          {"pass", s.pass},
                          {"detail", s.detail}});
  j["ok"] = r.ok();
  return j;
}

inline std::string suite_text(const SuiteReport& r) {
  std::ostringstream os;
  os << "case study: fetch-and-add, O1 = " << r.variant << ", O2 = atomic\n";
  for (const auto& s : r.steps) {
    os << "(" << s.id << ") " << s.title << "\n    expected: " << s.expected << "\n    observed: " << s.observed
       << "\n    " << (s.pass ? "PASS" : "FAIL") << '\n';
    if (s.detail.contains("lasso"))
      os << "    lasso: stem " << s.detail["lasso"]["stem"].dump() << " cycle " << s.detail["lasso"]["cycle"].dump()
         << '\n';
    if (s.detail.contains("cycle_actions")) os << "    stutter cycle: " << s.detail["cycle_actions"].dump() << '\n';
  }
  os << (r.ok() ? "suite: PASS" : "suite: FAIL") << '\n';
  return os.str();
}

}  // namespace progsim
