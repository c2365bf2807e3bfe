#pragma once

// `abc` command-line front end. run_cli is callable in-process so tests can
// check exit codes and output without spawning a shell.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <unistd.h>

#include <CLI11.hpp>

#include "abc/bench_gen.hpp"
#include "abc/certification.hpp"
#include "abc/ou.hpp"

namespace abc::cli {

enum Exit : int { ok = 0, failed = 1, bad_input = 2, soft = 3, hard = 4 };

inline int exit_for(Outcome o) {
  switch (o) {
    case Outcome::compliant: return ok;
    case Outcome::soft_violation: return soft;
    case Outcome::hard_violation: return hard;
  }
  return failed;
}

struct Style {
  bool color = false;
  std::string red(const std::string& s) const { return color ? "\x1b[31m" + s + "\x1b[0m" : s; }
  std::string green(const std::string& s) const { return color ? "\x1b[32m" + s + "\x1b[0m" : s; }
  std::string yellow(const std::string& s) const { return color ? "\x1b[33m" + s + "\x1b[0m" : s; }
};

// ABC_COLOR=never disables colour; auto colours only a terminal stdout.
inline Style style_for(const std::ostream& out) {
  const char* env = std::getenv("ABC_COLOR");
  const std::string mode = env ? env : "auto";
  if (mode == "never") return {false};
  return {&out == &std::cout && ::isatty(STDOUT_FILENO) == 1};
}

inline std::string fixed(double x, int prec = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << x;
  return os.str();
}

inline std::string outcome_label(Outcome o, const Style& st) {
  switch (o) {
    case Outcome::compliant: return st.green("compliant");
    case Outcome::soft_violation: return st.yellow("soft_violation");
    case Outcome::hard_violation: return st.red("hard_violation");
  }
  return "?";
}

inline Contract load_any_contract(const std::filesystem::path& p) {
  const auto text = read_text_file(p);
  if (document_kind(text) == "pipeline")
    return compose_pipeline(parse_pipeline(text, p.has_parent_path() ? p.parent_path() : std::filesystem::path(".")));
  return parse_contract(text);
}

// ---------------------------------------------------------------------------

inline int cmd_validate(const std::string& path, const std::string& format, std::ostream& out, std::ostream& err) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return bad_input;
  }
  std::vector<Diagnostic> diags;
  std::vector<StructuralIssue> warnings;
  std::string name;
  bool pipeline = false;
  try {
    pipeline = document_kind(text) == "pipeline";
  } catch (const ParseError&) {
  }
  if (pipeline) {
    try {
      auto p = parse_pipeline(text, std::filesystem::path(path).parent_path());
      name = p.name;
    } catch (const ParseError& e) {
      diags.push_back({e.kind(), e.message(), e.span(), ""});
    } catch (const Error& e) {
      diags.push_back({"SchemaError", e.what(), {}, ""});
    }
  } else {
    auto res = parse_contract_diagnostics(text);
    diags = res.diagnostics;
    warnings = res.warnings;
    if (res.contract) name = res.contract->name;
  }

  if (format == "json") {
    json issues = json::array(), warns = json::array();
    for (const auto& d : diags) issues.push_back(to_json(d));
    for (const auto& w : warnings) warns.push_back({{"element", w.element}, {"rule", w.rule}, {"message", w.message}});
    out << json{{"ok", diags.empty()}, {"file", path}, {"issues", issues}, {"warnings", warns}}.dump(2) << "\n";
  }
  for (const auto& d : diags) err << path << ":" << d.span.str() << ": " << d.kind << ": " << d.message << "\n";
  for (const auto& w : warnings) err << path << ": warning: " << w.rule << ": " << w.message << "\n";
  if (diags.empty() && format != "json") out << path << ": ok (" << name << ")\n";
  return diags.empty() ? ok : failed;
}

inline int cmd_run(const std::string& contract_path, const std::string& trace_path, const std::string& format,
                   const std::string& out_path, std::ostream& out, std::ostream& err) {
  Contract c;
  ExecutionTrace tr;
  try {
    c = load_any_contract(contract_path);
    tr = load_trace_file(trace_path);
  } catch (const ParseError& e) {
    err << contract_path << ":" << e.span().str() << ": " << e.kind() << ": " << e.message() << "\n";
    return bad_input;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return bad_input;
  }
  SessionReport rep;
  try {
    rep = run_session(c, tr);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return bad_input;
  }
  std::ofstream file;
  std::ostream* os = &out;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) {
      err << "error: cannot write '" << out_path << "'\n";
      return bad_input;
    }
    os = &file;
  }
  if (format == "json") {
    *os << json(rep).dump(2) << "\n";
  } else {
    const auto st = style_for(*os);
    const auto& m = rep.metrics;
    *os << "contract  " << rep.contract << "\n"
        << "steps     " << rep.steps.size() << (rep.terminated ? " (terminated)" : "") << "\n"
        << "outcome   " << outcome_label(rep.outcome, st) << "\n"
        << "C_hard    " << fixed(m.mean_c_hard) << "\n"
        << "C_soft    " << fixed(m.mean_c_soft) << "\n"
        << "D_bar     " << fixed(m.mean_drift) << "\n"
        << "E         " << fixed(m.recovery_effectiveness) << "\n"
        << "Theta     " << fixed(m.theta) << "\n";
    for (const auto& e : rep.events)
      if (e.kind == MonitorEventKind::violation)
        *os << "  t=" << e.step << "  " << e.payload.value("severity", "") << "  " << e.payload.value("constraint", "") << "\n";
  }
  return exit_for(rep.outcome);
}

struct DriftArgs {
  double alpha = 0.02, gamma = 0.2, sigma = 0.05, d0 = 0.0;
  double dmax = 0.25, epsilon = 0.05;
  double horizon = 100.0, dt = 0.01;
  std::uint64_t seed = 0;
  std::string sampler = "euler";
  std::string in, out;
};

inline int cmd_drift(const std::string& mode, const DriftArgs& a, const std::string& format, std::ostream& out, std::ostream& err) {
  try {
    if (mode == "design") {
      DesignSpec spec{a.dmax, a.epsilon};
      const double exact = solve_design_gamma(a.alpha, a.sigma, spec);
      const double approx = approx_design_gamma(a.alpha, a.sigma, spec);
      if (format == "json")
        out << json{{"alpha", a.alpha}, {"sigma", a.sigma}, {"d_max", a.dmax}, {"epsilon", a.epsilon},
                    {"gamma_min", exact}, {"gamma_approx", approx}}.dump(2)
            << "\n";
      else
        out << "gamma_min     " << fixed(exact, 6) << "\n" << "gamma_approx  " << fixed(approx, 6) << "\n";
      return ok;
    }
    if (mode == "simulate") {
      OUParams p{a.alpha, a.gamma, a.sigma, a.d0};
      auto tr = a.sampler == "exact" ? simulate_ou_exact(p, a.horizon, a.dt, a.seed) : simulate_ou(p, a.horizon, a.dt, a.seed);
      if (a.out.empty()) {
        write_trajectory_csv(out, tr);
        return ok;
      }
      std::ofstream f(a.out);
      if (!f) throw IoError("cannot write '" + a.out + "'");
      write_trajectory_csv(f, tr);
      const auto st = stationary_stats(p);
      if (format == "json")
        out << json{{"points", tr.size()}, {"final", tr.d.back()}, {"stationary_mean", st.mean}, {"stationary_variance", st.variance},
                    {"csv", a.out}}.dump(2)
            << "\n";
      else
        out << "wrote " << tr.size() << " points to " << a.out << "\n"
            << "final D           " << fixed(tr.d.back(), 6) << "\n"
            << "stationary mean   " << fixed(st.mean, 6) << "\n";
      return ok;
    }
    // fit
    std::ifstream f(a.in);
    if (!f) throw IoError("cannot read '" + a.in + "'");
    auto fit = fit_ou(read_trajectory_csv(f));
    if (format == "json") {
      out << json(fit).dump(2) << "\n";
    } else {
      out << "gamma_hat   " << fixed(fit.gamma_hat, 6) << "\n"
          << "d_star_hat  " << fixed(fit.d_star_hat, 6) << "\n"
          << "d0          " << fixed(fit.d0, 6) << "\n"
          << "R^2         " << fixed(fit.r_squared, 6) << (fit.degenerate ? "  (degenerate: constant trajectory)" : "") << "\n";
    }
    return ok;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return bad_input;
  }
}

struct ComposeArgs {
  std::string pipeline;
  std::string witnesses;
  std::size_t uniform = 0;
  double p = 0.95, delta = 0.02, p_h = 0.98, delta_h = 0.01;
  bool no_independence = false;
};

inline void print_bounds(const ChainBounds& b, std::ostream& out) {
  out << "p_chain      " << fixed(b.p_chain, 5) << "\n" << "delta_chain  " << fixed(b.delta_chain, 5) << "\n";
  if (b.p_frechet) out << "p_frechet    " << fixed(*b.p_frechet, 5) << "\n";
}

inline int cmd_compose(const ComposeArgs& a, const std::string& format, std::ostream& out, std::ostream& err) {
  try {
    if (a.pipeline.empty()) {
      if (a.uniform == 0) {
        err << "error: give a pipeline document or --uniform N\n";
        return bad_input;
      }
      ChainSpec spec;
      for (std::size_t i = 0; i < a.uniform; ++i) spec.agents.push_back({"agent" + std::to_string(i + 1), a.p, a.delta});
      for (std::size_t i = 0; i + 1 < a.uniform; ++i) spec.handoffs.push_back({a.p_h, a.delta_h});
      spec.conditional_independence_assumed = !a.no_independence;
      auto b = chain_bounds(spec);
      if (format == "json") out << json(b).dump(2) << "\n";
      else print_bounds(b, out);
      return ok;
    }
    auto p = load_pipeline_file(a.pipeline);
    if (a.no_independence) p.conditional_independence_assumed = false;
    if (a.witnesses.empty()) {
      auto b = chain_bounds(p.chain());
      if (format == "json") out << json(b).dump(2) << "\n";
      else print_bounds(b, out);
      return ok;
    }
    std::vector<CompositionSamples> samples;
    for (const auto& h : p.handoffs) {
      const auto file = std::filesystem::path(a.witnesses) / (h.from + "-" + h.to + ".json");
      samples.push_back(detail::samples_from(load_json_file(file)));
    }
    auto rep = check_pipeline(p, samples);
    if (format == "json") {
      out << json(rep).dump(2) << "\n";
    } else {
      const auto st = style_for(out);
      for (const auto& [name, r] : rep.handoffs) {
        out << name << "\n";
        for (int i = 1; i <= 4; ++i) {
          const auto& c = r.at(i);
          out << "  C" << i << "  " << (c.pass ? st.green("pass") : st.red("FAIL"));
          if (!c.note.empty()) out << "  (" << c.note << ")";
          out << "\n";
          for (const auto& w : c.witnesses) out << "      " << w.dump() << "\n";
        }
        out << "  C5  " << (r.c5_assumed ? "assumed" : "not assumed") << "\n";
      }
      out << "pipeline governance  " << (rep.governance.pass ? st.green("pass") : st.red("FAIL")) << "\n";
      for (const auto& w : rep.governance.witnesses) out << "      " << w.dump() << "\n";
      print_bounds(rep.bounds, out);
    }
    return rep.all_pass() ? ok : failed;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return bad_input;
  }
}

namespace detail {
inline std::optional<bool> observation(std::string s) {
  s.erase(0, s.find_first_not_of(" \t\r,"));
  s.erase(s.find_last_not_of(" \t\r,") + 1);
  if (s.empty() || s[0] == '#') return std::nullopt;
  if (s == "1" || s == "true" || s == "pass" || s == "success") return true;
  if (s == "0" || s == "false" || s == "fail" || s == "failure") return false;
  throw FormatError("unrecognised observation '" + s + "' (use 1/0, true/false or pass/fail)");
}
}  // namespace detail

struct CertifyArgs {
  std::string input;  // "-" reads stdin
  SprtConfig cfg;
  std::string mode = "reset";
  std::size_t window = 0;
};

inline int cmd_certify(const CertifyArgs& a, const std::string& format, std::istream& in, std::ostream& out, std::ostream& err) {
  try {
    SprtStream stream(a.cfg, a.mode == "window" ? SprtStream::Mode::window : SprtStream::Mode::reset, a.window);
    std::ifstream file;
    std::istream* is = &in;
    if (a.input != "-") {
      file.open(a.input);
      if (!file) throw IoError("cannot read '" + a.input + "'");
      is = &file;
    }
    const auto st = style_for(out);
    std::size_t reported = 0;
    auto report_new = [&] {
      for (; reported < stream.decisions().size(); ++reported) {
        const auto& d = stream.decisions()[reported];
        if (format != "json")
          out << "decision at observation " << d.at << ": "
              << (d.state.decision == SprtDecision::accept_h1 ? st.green("accept_h1") : st.red("accept_h0")) << "  (n=" << d.state.n
              << ", log_lambda=" << fixed(d.state.log_lambda, 6) << ")\n";
      }
    };
    if (is->peek() == '[') {
      json arr;
      try {
        *is >> arr;
      } catch (const json::exception& e) {
        throw FormatError(std::string("observations: ") + e.what());
      }
      for (const auto& x : arr) {
        if (!x.is_boolean() && !x.is_number_integer()) throw FormatError("observations must be booleans or 0/1");
        stream.push(x.is_boolean() ? x.get<bool>() : x.get<long long>() != 0);
        report_new();
      }
    } else {
      std::string line;
      while (std::getline(*is, line)) {
        if (auto x = detail::observation(line)) {
          stream.push(*x);
          report_new();
        }
      }
    }
    if (format == "json") {
      json ds = json::array();
      for (const auto& d : stream.decisions()) ds.push_back({{"at", d.at}, {"state", d.state}});
      out << json{{"observed", stream.observed()}, {"state", stream.state()}, {"decisions", ds}}.dump(2) << "\n";
    } else {
      const auto& s = stream.state();
      out << "observed " << stream.observed() << ", current n=" << s.n << ", log_lambda=" << fixed(s.log_lambda, 6) << ", bounds ["
          << fixed(s.lower, 6) << ", " << fixed(s.upper, 6) << "], " << to_string(s.decision) << "\n";
    }
    return ok;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return bad_input;
  }
}

inline int cmd_bench(const std::string& dir, unsigned jobs, bool verbose, const std::string& format, std::ostream& out,
                     std::ostream& err) {
  std::vector<ScenarioScore> scores;
  try {
    scores = score_all(load_suite(dir), jobs);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return bad_input;
  }
  if (scores.empty()) {
    err << "error: suite '" << dir << "' lists no scenarios\n";
    return bad_input;
  }
  const auto summary = aggregate(scores);
  const auto passed = static_cast<std::size_t>(std::count_if(scores.begin(), scores.end(), [](const auto& s) { return s.pass; }));
  if (format == "json") {
    out << json{{"scores", scores}, {"summary", summary}}.dump(2) << "\n";
  } else {
    const auto st = style_for(out);
    if (verbose)
      for (const auto& s : scores)
        out << (s.pass ? st.green("pass") : st.red("FAIL")) << "  " << s.id << "  detection=" << fixed(s.detection_accuracy, 2)
            << "  outcome=" << to_string(s.outcome) << "\n";
    out << format_table(summary);
    out << "detection accuracy " << fixed(summary.overall.detection_accuracy) << ", " << passed << "/" << scores.size() << " scenarios pass\n";
    for (const auto& s : scores)
      if (!s.pass)
        for (const auto& r : s.reasons) out << st.red("  " + s.id + ": " + r) << "\n";
  }
  return passed == scores.size() ? ok : failed;
}

inline int cmd_gen_bench(const std::string& dir, std::ostream& out, std::ostream& err) {
  try {
    auto entries = gen::generate_suite(dir);
    out << "wrote " << entries.size() << " scenarios to " << dir << "\n";
    return ok;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return bad_input;
  }
}

// ---------------------------------------------------------------------------

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr,
                   std::istream& in = std::cin) {
  CLI::App app{"Agent behavioral contracts: validate, enforce, analyse drift, compose and certify", "abc"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "more detail in table output");
  const std::vector<std::string> formats = {"json", "table"};

  std::string format_validate = "table";
  std::string v_path;
  auto* validate = app.add_subcommand("validate", "parse and check a contract or pipeline document");
  validate->add_option("contract", v_path, "YAML document")->required();
  validate->add_option("--format", format_validate)->check(CLI::IsMember(formats));

  std::string format_run = "json", r_contract, r_trace, r_out, r_hook = "none";
  auto* run = app.add_subcommand("run", "replay a trace through the runtime monitor");
  run->add_option("contract", r_contract, "contract or pipeline YAML")->required();
  run->add_option("trace", r_trace, "trace JSON")->required();
  run->add_option("--hook", r_hook, "recovery hook (detection only)")->check(CLI::IsMember({"none"}));
  run->add_option("-o,--out", r_out, "write the report here instead of stdout");
  run->add_option("--format", format_run)->check(CLI::IsMember(formats));

  DriftArgs da;
  std::string format_drift = "table";
  auto* drift = app.add_subcommand("drift", "drift dynamics: design, simulate, fit");
  drift->require_subcommand(1);
  auto* design = drift->add_subcommand("design", "minimum recovery rate for Pr(D > dmax) <= epsilon");
  design->add_option("--alpha", da.alpha)->required();
  design->add_option("--sigma", da.sigma)->required();
  design->add_option("--dmax", da.dmax)->required();
  design->add_option("--epsilon", da.epsilon)->required();
  auto* simulate = drift->add_subcommand("simulate", "simulate a drift trajectory as CSV");
  simulate->add_option("--alpha", da.alpha);
  simulate->add_option("--gamma", da.gamma);
  simulate->add_option("--sigma", da.sigma);
  simulate->add_option("--d0", da.d0);
  simulate->add_option("--horizon", da.horizon);
  simulate->add_option("--dt", da.dt);
  simulate->add_option("--seed", da.seed);
  simulate->add_option("--sampler", da.sampler)->check(CLI::IsMember({"euler", "exact"}));
  simulate->add_option("-o,--out", da.out, "CSV path (stdout when omitted)");
  auto* fit = drift->add_subcommand("fit", "fit recovery rate and drift level to a CSV trajectory");
  fit->add_option("--in,input", da.in)->required();
  for (auto* sub : {design, simulate, fit}) sub->add_option("--format", format_drift)->check(CLI::IsMember(formats));

  ComposeArgs ca;
  std::string format_compose = "table";
  auto* compose = app.add_subcommand("compose", "check composition conditions and chain bounds");
  compose->add_option("pipeline", ca.pipeline, "pipeline YAML");
  compose->add_option("--witnesses", ca.witnesses, "directory of <from>-<to>.json witness files");
  compose->add_option("--uniform", ca.uniform, "uniform chain of N agents instead of a pipeline");
  compose->add_option("--p", ca.p);
  compose->add_option("--delta", ca.delta);
  compose->add_option("--p-h", ca.p_h);
  compose->add_option("--delta-h", ca.delta_h);
  compose->add_flag("--no-independence", ca.no_independence, "also report the Frechet bound");
  compose->add_option("--format", format_compose)->check(CLI::IsMember(formats));

  CertifyArgs cert;
  std::string format_certify = "table";
  auto* certify = app.add_subcommand("certify", "stream pass/fail observations through the SPRT");
  certify->add_option("observations", cert.input, "file of 1/0 lines or a JSON array; - for stdin")->required();
  certify->add_option("--p0", cert.cfg.p0);
  certify->add_option("--p1", cert.cfg.p1);
  certify->add_option("--alpha", cert.cfg.alpha_err);
  certify->add_option("--beta", cert.cfg.beta_err);
  certify->add_option("--mode", cert.mode)->check(CLI::IsMember({"reset", "window"}));
  certify->add_option("--window", cert.window);
  certify->add_option("--format", format_certify)->check(CLI::IsMember(formats));

  std::string b_dir, format_bench = "table";
  unsigned jobs = 1;
  auto* bench = app.add_subcommand("bench", "score a scenario suite");
  bench->add_option("suite", b_dir, "suite directory with manifest.json")->required();
  bench->add_option("-j,--jobs", jobs)->check(CLI::Range(1u, 256u));
  bench->add_option("--format", format_bench)->check(CLI::IsMember(formats));

  std::string g_dir;
  auto* gen_bench = app.add_subcommand("gen-bench", "write the synthetic scenario suite");
  gen_bench->add_option("-o,--out", g_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return bad_input;
  }

  if (*validate) return cmd_validate(v_path, format_validate, out, err);
  if (*run) return cmd_run(r_contract, r_trace, format_run, r_out, out, err);
  if (*drift) {
    const std::string mode = *design ? "design" : *simulate ? "simulate" : "fit";
    return cmd_drift(mode, da, format_drift, out, err);
  }
  if (*compose) return cmd_compose(ca, format_compose, out, err);
  if (*certify) return cmd_certify(cert, format_certify, in, out, err);
  if (*bench) return cmd_bench(b_dir, jobs, verbose, format_bench, out, err);
  if (*gen_bench) return cmd_gen_bench(g_dir, out, err);
  return bad_input;
}

}  // namespace abc::cli
