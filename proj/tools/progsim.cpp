// progsim: command-line front end.
//
// Exit codes: 0 property holds / success, 1 refuted (witness printed),
// 2 unknown or bound exhausted, 3 input error.

#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "progsim/progsim.hpp"

namespace {

using namespace progsim;
using nlohmann::json;

struct Common {
  std::size_t depth = 8;
  std::size_t alpha_bound = 4;
  std::size_t budget = default_node_budget();
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  bool timing = false;
  std::string output;
};

void add_common(CLI::App* cmd, Common& c, bool with_output = true) {
  cmd->add_option("--depth", c.depth, "Trace depth bound")->capture_default_str();
  cmd->add_option("--alpha-bound", c.alpha_bound, "Maximum length of a matching abstract sequence")
      ->capture_default_str();
  cmd->add_option("--budget", c.budget, "Node budget for bounded enumerations (env PROGSIM_NODE_BUDGET)")
      ->capture_default_str();
  cmd->add_option("--seed", c.seed, "Seed recorded in the report")->capture_default_str();
  cmd->add_option("--jobs", c.jobs, "Worker threads for fixpoint rounds")->capture_default_str()->check(
      CLI::Range(std::size_t{1}, std::size_t{256}));
  cmd->add_flag("--timing", c.timing, "Include wall-clock phases in the report");
  if (with_output) cmd->add_option("-o,--output", c.output, "Output file");
}

RunReport make_report(const std::string& command, const Common& c) {
  RunReport r;
  r.command = command;
  r.emit_timing = c.timing;
  r.bounds["seed"] = c.seed;
  return r;
}

int finish(const RunReport& r) {
  std::cout << r.to_json().dump(2) << '\n';
  return exit_code(r.verdict);
}

// "all": both alphabets including idle; "cr": calls and returns;
// "program": program actions with calls and returns; otherwise a
// comma-separated token list resolved against either alphabet.
ActionSet parse_gamma(const std::string& spec, const Lts& a1, const Lts& a2) {
  const auto& p1 = a1.partition();
  if (spec == "all") return set_union(p1.all(), a2.partition().all());
  if (spec == "cr") return p1.calls_and_returns();
  if (spec == "program") return p1.gamma_p();
  std::vector<Action> out;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    auto id = a1.find_token(tok);
    if (id) {
      out.push_back(a1.action(*id));
      continue;
    }
    id = a2.find_token(tok);
    if (!id) throw ConfigError("gamma action '" + tok + "' is in neither alphabet");
    out.push_back(a2.action(*id));
  }
  return ActionSet(std::move(out));
}

void write_or_print(const std::string& path, const std::string& content) {
  if (path.empty())
    std::cout << content;
  else
    write_file(path, content);
}

std::string model_text(const Lts& lts, const std::string& format) {
  if (format == "json") return lts_to_json(lts).dump(2) + "\n";
  return write_lts_text(lts);
}

// The product of two files, or a single file taken as an already composed system.
std::shared_ptr<const Lts> load_system(const std::vector<std::string>& files) {
  if (files.size() == 1) return std::make_shared<const Lts>(load_lts(files[0]));
  auto prod = std::make_shared<const Product>(product(load_lts(files[0]), load_lts(files[1])));
  return {prod, &prod->lts};
}

json bounded_json(const BoundedVerdict& v) {
  json j{{"holds", v.holds}, {"exact", v.exact}, {"depth", v.depth}};
  if (!v.note.empty()) j["note"] = v.note;
  if (v.violation) {
    j["violation"] = {{"trace", tokens_json(v.violation->trace)},
                      {"condition", v.violation->condition},
                      {"scheduled", tokens_json(v.violation->scheduled.items())}};
  }
  return j;
}

Verdict bounded_verdict(const BoundedVerdict& v) {
  if (!v.holds) return Verdict::No;
  return v.exact ? Verdict::Yes : Verdict::Unknown;
}

json deletions_json(const std::vector<Deletion>& ds, std::size_t limit = 50) {
  json arr = json::array();
  for (std::size_t i = 0; i < ds.size() && i < limit; ++i)
    arr.push_back({{"s1", ds[i].s1}, {"s2", ds[i].s2}, {"action", ds[i].action.token()}, {"round", ds[i].round}});
  return arr;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation checks and scheduler transformation for deterministic labelled transition systems"};
  app.require_subcommand(1);
  Common c;

  // check-det
  std::string det_file;
  auto* det = app.add_subcommand("check-det", "Check that a model file has at most one successor per (state, action)");
  det->add_option("model", det_file)->required();
  add_common(det, c, false);

  // idle-complete
  std::string ic_file, ic_format = "text";
  auto* ic = app.add_subcommand("idle-complete", "Add idle self-loops to states with nothing else enabled");
  ic->add_option("model", ic_file)->required();
  ic->add_option("--format", ic_format)->check(CLI::IsMember({"text", "json"}));
  add_common(ic, c);

  // product
  std::string prod_p, prod_o, prod_format = "text";
  auto* prod = app.add_subcommand("product", "Compose a program and an object");
  prod->add_option("program", prod_p)->required();
  prod->add_option("object", prod_o)->required();
  prod->add_option("--format", prod_format)->check(CLI::IsMember({"text", "json"}));
  add_common(prod, c);

  // simulate
  std::vector<std::string> sim_files;
  std::string sim_sched = "strategy=maximal";
  auto* sim = app.add_subcommand("simulate", "Enumerate the traces consistent with a scheduler");
  sim->add_option("models", sim_files, "A composed system, or a program and an object")->required()->expected(1, 2);
  sim->add_option("--scheduler", sim_sched)->capture_default_str();
  add_common(sim, c);

  // check-admitted
  std::vector<std::string> adm_files;
  std::string adm_sched = "strategy=maximal";
  bool adm_det = false;
  auto* adm = app.add_subcommand("check-admitted", "Check that a scheduler is admitted (and optionally deterministic)");
  adm->add_option("models", adm_files)->required()->expected(1, 2);
  adm->add_option("--scheduler", adm_sched)->capture_default_str();
  adm->add_flag("--deterministic", adm_det, "Also check scheduler determinism");
  add_common(adm, c, false);

  // check-fwd / check-prog-fwd
  std::string fwd_a1, fwd_a2, fwd_gamma = "cr";
  std::size_t backtrack_budget = 1'000'000;
  auto* fwd = app.add_subcommand("check-fwd", "Check for a forward simulation from the first model to the second");
  auto* pfwd = app.add_subcommand("check-prog-fwd", "Check for a progressive forward simulation");
  for (auto* cmd : {fwd, pfwd}) {
    cmd->add_option("concrete", fwd_a1)->required();
    cmd->add_option("abstract", fwd_a2)->required();
    cmd->add_option("--gamma", fwd_gamma, "all, cr, program, or a comma-separated token list")->capture_default_str();
    add_common(cmd, c);
  }
  pfwd->add_option("--backtrack-budget", backtrack_budget)->capture_default_str();

  // validate-cert
  std::string vc_cert, vc_a1, vc_a2;
  auto* vc = app.add_subcommand("validate-cert", "Replay a certificate against two models");
  vc->add_option("certificate", vc_cert)->required();
  vc->add_option("concrete", vc_a1)->required();
  vc->add_option("abstract", vc_a2)->required();
  add_common(vc, c, false);

  // transform-scheduler / check-lemmas
  std::string tr_prog, tr_o1, tr_o2, tr_cert, tr_sched = "strategy=program-set";
  auto* tr = app.add_subcommand("transform-scheduler", "Build the abstract scheduler S2 from a concrete scheduler");
  auto* lem = app.add_subcommand("check-lemmas", "Check the properties of the trace map for a concrete scheduler");
  for (auto* cmd : {tr, lem}) {
    cmd->add_option("program", tr_prog)->required();
    cmd->add_option("concrete", tr_o1)->required();
    cmd->add_option("abstract", tr_o2)->required();
    cmd->add_option("certificate", tr_cert)->required();
    cmd->add_option("--scheduler", tr_sched)->capture_default_str();
    add_common(cmd, c);
  }

  // find-divergence
  std::vector<std::string> div_files;
  std::string div_sched = "strategy=ll-alternator", div_gamma = "program";
  auto* div = app.add_subcommand("find-divergence", "Search for an infinite run with no visible action");
  div->add_option("models", div_files)->required()->expected(1, 2);
  div->add_option("--scheduler", div_sched)->capture_default_str();
  div->add_option("--gamma", div_gamma, "Visible actions: program, cr, or a token list")->capture_default_str();
  add_common(div, c, false);

  // run-casestudy
  std::string cs_variant = "llsc-invalidating", cs_report = "json", cs_export;
  auto* cs = app.add_subcommand("run-casestudy", "Run the fetch-and-add counterexample suite");
  cs->add_option("--variant", cs_variant)->check(CLI::IsMember({"llsc-invalidating", "llsc-plain"}))->capture_default_str();
  cs->add_option("--report", cs_report)->check(CLI::IsMember({"json", "text"}))->capture_default_str();
  cs->add_option("--export-dir", cs_export, "Write the models in text format to this directory");
  add_common(cs, c, false);

  // export-dot
  std::string dot_file;
  auto* dot = app.add_subcommand("export-dot", "Write a model as Graphviz DOT");
  dot->add_option("model", dot_file)->required();
  add_common(dot, c);

  // convert
  std::string conv_file, conv_format = "json";
  auto* conv = app.add_subcommand("convert", "Re-emit a model in canonical text or JSON form");
  conv->add_option("model", conv_file)->required();
  conv->add_option("--format", conv_format)->check(CLI::IsMember({"text", "json"}))->capture_default_str();
  add_common(conv, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitInputError;
  }

  try {
    if (*det) {
      auto b = parse_lts(read_file(det_file));
      auto rep = b.check_deterministic();
      RunReport r = make_report("check-det", c);
      r.verdict = rep.deterministic ? Verdict::Yes : Verdict::No;
      if (rep.witness) r.witness = {{"state", rep.witness->first}, {"action", rep.witness->second.token()}};
      return finish(r);
    }
    if (*ic) {
      write_or_print(c.output, model_text(idle_complete(parse_lts(read_file(ic_file)).build()), ic_format));
      return kExitYes;
    }
    if (*prod) {
      auto p = product(load_lts(prod_p), load_lts(prod_o));
      write_or_print(c.output, model_text(p.lts, prod_format));
      return kExitYes;
    }
    if (*sim) {
      RunReport r = make_report("simulate", c);
      PhaseTimer t(r);
      auto lts = load_system(sim_files);
      auto s = make_scheduler(sim_sched, lts);
      auto tree = enumerate_traces(*lts, *s, c.depth, {c.budget, false});
      t.lap("enumerate");
      json traces = json::array();
      for (const auto& tr : tree.all_traces()) traces.push_back(tokens_json(tr));
      r.bounds["depth"] = c.depth;
      r.witness = {{"scheduler", s->describe()}, {"traces", traces}};
      if (!c.output.empty()) write_file(c.output, r.witness.dump(2) + "\n");
      return finish(r);
    }
    if (*adm) {
      RunReport r = make_report("check-admitted", c);
      PhaseTimer t(r);
      auto lts = load_system(adm_files);
      auto s = make_scheduler(adm_sched, lts);
      auto v = check_admitted(*s, *lts, c.depth);
      r.verdict = bounded_verdict(v);
      r.witness = {{"scheduler", s->describe()}, {"admitted", bounded_json(v)}};
      if (adm_det) {
        auto d = check_deterministic_scheduler(*s, *lts, c.depth);
        r.witness["deterministic"] = bounded_json(d);
        auto dv = bounded_verdict(d);
        if (dv == Verdict::No || (dv == Verdict::Unknown && r.verdict == Verdict::Yes)) r.verdict = dv;
      }
      t.lap("check");
      r.bounds["depth"] = c.depth;
      if (r.verdict == Verdict::Unknown) r.note = "holds up to depth " + std::to_string(c.depth);
      return finish(r);
    }
    if (*fwd || *pfwd) {
      RunReport r = make_report(*fwd ? "check-fwd" : "check-prog-fwd", c);
      PhaseTimer t(r);
      Lts a1 = load_lts(fwd_a1), a2 = load_lts(fwd_a2);
      auto gamma = parse_gamma(fwd_gamma, a1, a2);
      r.bounds["alpha_bound"] = c.alpha_bound;
      r.bounds["gamma"] = tokens_json(gamma.items());
      if (*fwd) {
        auto res = check_forward(a1, a2, gamma, c.alpha_bound, {c.jobs});
        t.lap("fixpoint");
        r.verdict = res.verdict;
        r.note = res.note;
        r.bounds["rounds"] = res.rounds;
        if (res.certificate) {
          auto v = validate_certificate(*res.certificate, nullptr, a1, a2);
          if (!v.ok) throw ContractViolation("produced certificate failed validation: " + v.violations.front().clause);
          r.witness = certificate_to_json(*res.certificate);
          if (!c.output.empty()) write_file(c.output, r.witness.dump(2) + "\n");
        } else {
          r.witness = {{"deletions", deletions_json(res.deletions)}, {"relation_size", res.relation.size()}};
        }
      } else {
        ProgressiveOptions po;
        po.backtrack_budget = backtrack_budget;
        po.jobs = c.jobs;
        auto res = check_progressive(a1, a2, gamma, c.alpha_bound, po);
        t.lap("search");
        r.verdict = res.verdict;
        r.note = res.note;
        r.bounds["backtrack_budget"] = backtrack_budget;
        r.bounds["backtracks"] = res.backtracks;
        if (res.certificate && res.witness) {
          r.witness = certificate_to_json(*res.certificate, &*res.witness);
          if (!c.output.empty()) write_file(c.output, r.witness.dump(2) + "\n");
        } else if (res.cycle) {
          r.witness = stutter_cycle_to_json(*res.cycle);
        }
      }
      return finish(r);
    }
    if (*vc) {
      RunReport r = make_report("validate-cert", c);
      Lts a1 = load_lts(vc_a1), a2 = load_lts(vc_a2);
      std::optional<ProgressWitness> w;
      auto cert = certificate_from_json(json::parse(read_file(vc_cert)), a1, a2, &w);
      auto v = validate_certificate(cert, w ? &*w : nullptr, a1, a2);
      r.verdict = v.ok ? Verdict::Yes : Verdict::No;
      json arr = json::array();
      for (const auto& x : v.violations) {
        json e{{"clause", x.clause}, {"s1", x.s1}, {"s2", x.s2}, {"detail", x.detail}};
        if (x.action) e["action"] = x.action->token();
        arr.push_back(e);
      }
      if (!v.ok) r.witness = {{"violations", arr}};
      return finish(r);
    }
    if (*tr || *lem) {
      RunReport r = make_report(*tr ? "transform-scheduler" : "check-lemmas", c);
      PhaseTimer t(r);
      Lts prog_lts = load_lts(tr_prog), o1 = load_lts(tr_o1), o2 = load_lts(tr_o2);
      auto cert = std::make_shared<const SimulationCertificate>(
          certificate_from_json(json::parse(read_file(tr_cert)), o1, o2));
      auto p1 = std::make_shared<const Product>(product(prog_lts, o1));
      auto p2 = std::make_shared<const Product>(product(prog_lts, o2));
      auto s1 = make_scheduler(tr_sched, std::shared_ptr<const Lts>(p1, &p1->lts));
      TransformOptions to;
      to.alpha_bound = c.alpha_bound;
      to.node_budget = c.budget;
      auto rep = run_transform_pipeline(p1, s1, p2, cert, c.depth, to);
      t.lap("pipeline");
      r.verdict = rep.ok() ? Verdict::Yes : Verdict::No;
      r.bounds["depth"] = c.depth;
      r.witness = {{"checks", pipeline_json(rep)}};
      if (*tr) {
        auto mt = build_f(p1, s1, p2, cert, c.depth, to);
        ConstructedScheduler s2(mt);
        auto table = s2_table_json(*mt, s2);
        t.lap("table");
        if (c.output.empty())
          r.witness["s2"] = table;
        else
          write_file(c.output, table.dump(2) + "\n");
      }
      return finish(r);
    }
    if (*div) {
      RunReport r = make_report("find-divergence", c);
      PhaseTimer t(r);
      auto lts = load_system(div_files);
      auto s = make_scheduler(div_sched, lts);
      auto gamma = parse_gamma(div_gamma, *lts, *lts);
      auto res = find_divergence(*lts, *s, gamma, c.depth);
      t.lap("search");
      r.bounds["depth"] = c.depth;
      r.bounds["exact"] = res.exact;
      r.note = res.note;
      if (res.lasso) {
        // A divergence refutes "every run eventually makes visible progress".
        r.verdict = Verdict::No;
        r.witness = lasso_json(*res.lasso);
        r.witness["projected"] = lasso_json(project(*res.lasso, lts->partition().program()));
      } else {
        r.verdict = res.exact ? Verdict::Yes : Verdict::Unknown;
        if (!res.exact && r.note.empty()) r.note = "no divergence entered within depth " + std::to_string(c.depth);
      }
      return finish(r);
    }
    if (*cs) {
      auto variant = parse_variant(cs_variant);
      if (!cs_export.empty()) {
        std::filesystem::create_directories(cs_export);
        FaaConfig cfg;
        cfg.variant = variant;
        auto study = build_case_study(cfg);
        auto dir = std::filesystem::path(cs_export);
        write_file((dir / ("o1-" + cs_variant + ".lts")).string(), write_lts_text(study.impl));
        write_file((dir / "o2-atomic.lts").string(), write_lts_text(study.spec));
        write_file((dir / "program.lts").string(), write_lts_text(study.program));
      }
      SuiteOptions so;
      so.alpha_bound = c.alpha_bound;
      so.jobs = c.jobs;
      auto rep = run_counterexample_suite(variant, so);
      if (cs_report == "text")
        std::cout << suite_text(rep);
      else
        std::cout << suite_json(rep).dump(2) << '\n';
      return rep.ok() ? kExitYes : kExitNo;
    }
    if (*dot) {
      write_or_print(c.output, write_dot(load_lts(dot_file), std::filesystem::path(dot_file).stem().string()));
      return kExitYes;
    }
    if (*conv) {
      write_or_print(c.output, model_text(load_lts(conv_file), conv_format));
      return kExitYes;
    }
  } catch (const ParseError& e) {
    std::cerr << "progsim: parse error: " << e.what() << '\n';
    return kExitInputError;
  } catch (const DepthExhausted& e) {
    std::cerr << "progsim: " << e.what() << '\n';
    return kExitUnknown;
  } catch (const ResourceError& e) {
    std::cerr << "progsim: " << e.what() << '\n';
    return kExitUnknown;
  } catch (const Error& e) {
    std::cerr << "progsim: " << e.what() << '\n';
    return kExitInputError;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "progsim: malformed JSON: " << e.what() << '\n';
    return kExitInputError;
  }
  return kExitInputError;
}
