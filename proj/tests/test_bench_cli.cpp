// Benchmark scoring/aggregation and the command-line front end.

#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "abc/cli.hpp"
#include "support/fixtures.hpp"

using namespace abc;
using fx::json;

namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  auto d = fs::temp_directory_path() / ("abc_tests_" + std::to_string(::getpid()));
  fs::create_directories(d);
  return d / name;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  f << text;
}

struct CliResult {
  int code;
  std::string out, err;
};

CliResult invoke(std::vector<std::string> args, const std::string& stdin_text = "") {
  args.insert(args.begin(), "abc");
  std::vector<const char*> argv;
  for (auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  std::istringstream in(stdin_text);
  int code = abc::cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err, in);
  return {code, out.str(), err.str()};
}

std::string data(const std::string& rel) { return (fx::data_dir() / rel).string(); }

json scenario_json() {
  return load_json_file(fx::data_dir() / "bench/scenarios/code_assistant/soft_recovered_next.json");
}

// writes a scenario next to the real one so its relative contract path resolves
fs::path write_scenario(const json& j, const std::string& name) {
  auto j2 = j;
  j2["contract"] = (fx::data_dir() / "bench/contracts/code_assistant.yaml").string();
  auto p = scratch(name);
  write(p, j2.dump());
  return p;
}

ScenarioScore score(std::string id, std::string domain, double det, double ch, double cs, double d, double th, bool pass,
                    Outcome o = Outcome::compliant) {
  ScenarioScore s;
  s.id = std::move(id);
  s.domain = std::move(domain);
  s.difficulty = "easy";
  s.detection_accuracy = det;
  s.c_hard = ch;
  s.c_soft = cs;
  s.mean_drift = d;
  s.theta = th;
  s.pass = pass;
  s.outcome = o;
  return s;
}

}  // namespace

TEST(Scenario, DanglingExpectedConstraint) {
  auto j = scenario_json();
  j["expected"]["violations"][0]["constraint"] = "no_such_rule";
  EXPECT_THROW(load_scenario(write_scenario(j, "dangling.json")), DanglingConstraintRef);
}

TEST(Scenario, EmptyTraceRejected) {
  auto j = scenario_json();
  j["trace"] = {{"states", json::array()}, {"actions", json::array()}};
  EXPECT_THROW(load_scenario(write_scenario(j, "empty.json")), FormatError);
}

TEST(Scenario, MissingFieldsRejected) {
  auto j = scenario_json();
  j.erase("difficulty");
  EXPECT_THROW(load_scenario(write_scenario(j, "nodiff.json")), FormatError);
  j = scenario_json();
  j["expected"]["c_soft_range"] = {0.9, 0.2};
  EXPECT_THROW(load_scenario(write_scenario(j, "badrange.json")), FormatError);
}

TEST(Scenario, DetectedViolationScoresOne) {
  auto s = score_scenario(load_scenario(fx::data_dir() / "bench/scenarios/code_assistant/soft_recovered_next.json"));
  EXPECT_DOUBLE_EQ(s.detection_accuracy, 1.0);
  EXPECT_TRUE(s.pass) << (s.reasons.empty() ? "" : s.reasons[0]);
  EXPECT_EQ(s.outcome, Outcome::soft_violation);
}

TEST(Scenario, HalfDetected) {
  auto j = scenario_json();
  // second expectation the trace never produces
  j["expected"]["violations"].push_back({{"step", 4}, {"constraint", "commit_message_format"}});
  auto s = score_scenario(load_scenario(write_scenario(j, "half.json")));
  EXPECT_DOUBLE_EQ(s.detection_accuracy, 0.5);
  EXPECT_FALSE(s.pass);
  ASSERT_EQ(s.missed.size(), 1u);
  EXPECT_EQ(s.missed[0].step, 4u);
}

TEST(Scenario, WrongOutcomeExpectationFails) {
  auto j = scenario_json();
  j["expected"]["outcome"] = "compliant";
  auto s = score_scenario(load_scenario(write_scenario(j, "tampered.json")));
  EXPECT_DOUBLE_EQ(s.detection_accuracy, 1.0);
  EXPECT_FALSE(s.pass);
  ASSERT_FALSE(s.reasons.empty());
  EXPECT_NE(s.reasons[0].find("outcome"), std::string::npos);
}

TEST(Scenario, SpuriousFlagsCounted) {
  auto j = scenario_json();
  j["expected"]["violations"] = json::array();
  auto s = score_scenario(load_scenario(write_scenario(j, "spurious.json")));
  EXPECT_DOUBLE_EQ(s.detection_accuracy, 1.0);
  EXPECT_EQ(s.false_flags, 1u);
}

TEST(Aggregate, SingleScenario) {
  std::vector<ScenarioScore> v{score("x/a", "x", 1.0, 0.9, 0.8, 0.1, 0.85, true)};
  auto a = aggregate(v);
  ASSERT_EQ(a.rows.size(), 1u);
  EXPECT_EQ(a.rows[0].n, 1u);
  EXPECT_DOUBLE_EQ(a.rows[0].c_hard, 0.9);
  EXPECT_DOUBLE_EQ(a.overall.theta, 0.85);
  EXPECT_EQ(a.overall.passed, 1u);
}

TEST(Aggregate, TwoDomainsAreMeans) {
  std::vector<ScenarioScore> v{score("a/1", "a", 1.0, 1.0, 1.0, 0.0, 1.0, true),
                               score("a/2", "a", 0.5, 0.5, 0.9, 0.2, 0.6, false, Outcome::hard_violation),
                               score("b/1", "b", 1.0, 0.8, 0.7, 0.4, 0.7, true, Outcome::soft_violation)};
  auto a = aggregate(v);
  ASSERT_EQ(a.rows.size(), 2u);
  EXPECT_EQ(a.rows[0].domain, "a");
  EXPECT_DOUBLE_EQ(a.rows[0].c_hard, 0.75);
  EXPECT_DOUBLE_EQ(a.rows[0].detection_accuracy, 0.75);
  EXPECT_EQ(a.rows[0].outcomes.at("hard_violation"), 1u);
  EXPECT_NEAR(a.overall.c_soft, (1.0 + 0.9 + 0.7) / 3, 1e-15);
  EXPECT_EQ(a.overall.passed, 2u);
  EXPECT_THROW(aggregate(std::vector<ScenarioScore>{}), EmptyInput);
}

TEST(Aggregate, OrderIndependent) {
  std::vector<ScenarioScore> v;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 30; ++i)
    v.push_back(score("d" + std::to_string(i % 4) + "/" + std::to_string(i), "d" + std::to_string(i % 4), u(rng), u(rng), u(rng),
                      u(rng), u(rng), u(rng) < 0.5));
  auto ref = aggregate(v);
  for (int k = 0; k < 5; ++k) {
    std::shuffle(v.begin(), v.end(), rng);
    EXPECT_EQ(aggregate(v), ref);
  }
  auto table = format_table(ref);
  EXPECT_NE(table.find("d3"), std::string::npos);
  EXPECT_NE(table.find("overall"), std::string::npos);
}

TEST(Aggregate, JsonRoundTrip) {
  std::vector<ScenarioScore> v{score("a/1", "a", 1.0, 1.0, 1.0, 0.0, 1.0, true)};
  v[0].missed.push_back({2, "x"});
  v[0].failed_conditions = std::vector<std::string>{"C1"};
  auto back = json(v[0]).get<ScenarioScore>();
  EXPECT_EQ(json(back), json(v[0]));
  auto a = aggregate(v);
  EXPECT_EQ(json(a).get<DomainSummary>(), a);
}

TEST(BundledSuite, EveryScenarioDetectedAndPasses) {
  auto scores = score_all(load_suite(fx::data_dir() / "bench"));
  EXPECT_GE(scores.size(), 50u);
  for (const auto& s : scores) {
    EXPECT_DOUBLE_EQ(s.detection_accuracy, 1.0) << s.id;
    EXPECT_TRUE(s.pass) << s.id << ": " << (s.reasons.empty() ? "" : s.reasons[0]);
  }
  EXPECT_DOUBLE_EQ(aggregate(scores).overall.detection_accuracy, 1.0);
}

// ---------------------------------------------------------------------------

TEST(Cli, ValidateExitCodes) {
  ::setenv("ABC_COLOR", "never", 1);
  auto good = invoke({"validate", data("contracts/financial_advisor.yaml")});
  EXPECT_EQ(good.code, 0) << good.err;
  EXPECT_NE(good.out.find("ok (financial_advisor)"), std::string::npos);

  auto bad = scratch("bad_p.yaml");
  write(bad, "contractspec: \"1.0\"\nkind: agent\nname: x\nsatisfaction:\n  p: 1.3\n");
  auto r = invoke({"validate", bad.string(), "--format", "json"});
  EXPECT_EQ(r.code, 1);
  auto j = json::parse(r.out);
  EXPECT_FALSE(j["ok"].get<bool>());
  EXPECT_FALSE(j["issues"].empty());

  EXPECT_EQ(invoke({"validate", "/nonexistent/x.yaml"}).code, 2);
  EXPECT_EQ(invoke({"validate"}).code, 2);
  EXPECT_EQ(invoke({"frobnicate"}).code, 2);
  EXPECT_EQ(invoke({"validate", data("bench/pipelines/loan_pipeline.yaml")}).code, 0);
}

TEST(Cli, RunExitCodesAndReport) {
  const auto contract = data("contracts/financial_advisor.yaml");
  auto clean = invoke({"run", contract, data("traces/financial_clean.json")});
  EXPECT_EQ(clean.code, 0) << clean.err;
  auto rep = json::parse(clean.out);
  EXPECT_EQ(rep["outcome"], "compliant");
  auto back = rep.get<SessionReport>();
  EXPECT_EQ(json(back), rep);

  auto hard = invoke({"run", contract, data("traces/financial_hard_breach.json")});
  EXPECT_EQ(hard.code, 4);
  EXPECT_EQ(json::parse(hard.out)["outcome"], "hard_violation");

  auto table = invoke({"run", contract, data("traces/financial_soft_recovered.json"), "--format", "table"});
  EXPECT_EQ(table.code, 3);
  EXPECT_NE(table.out.find("soft_violation"), std::string::npos);

  auto bad = scratch("bad_trace.json");
  write(bad, "{\"states\": [1, 2");
  EXPECT_EQ(invoke({"run", contract, bad.string()}).code, 2);

  auto out = scratch("report.json");
  EXPECT_EQ(invoke({"run", contract, data("traces/financial_clean.json"), "-o", out.string()}).code, 0);
  EXPECT_EQ(load_json_file(out)["outcome"], "compliant");
}

TEST(Cli, DriftSubcommands) {
  auto d = invoke({"drift", "design", "--alpha", "0.05", "--sigma", "0.1", "--dmax", "0.25", "--epsilon", "0.05", "--format", "json"});
  ASSERT_EQ(d.code, 0) << d.err;
  EXPECT_NEAR(json::parse(d.out)["gamma_min"].get<double>(), 0.8312, 5e-4);

  auto csv = scratch("traj.csv");
  auto s = invoke({"drift", "simulate", "--alpha", "0.1", "--gamma", "0.5", "--sigma", "0", "--d0", "1", "--horizon", "10", "--dt", "0.01",
                "--sampler", "exact", "-o", csv.string(), "--format", "json"});
  ASSERT_EQ(s.code, 0) << s.err;
  auto sj = json::parse(s.out);
  EXPECT_EQ(sj["points"].get<std::size_t>(), 1001u);
  // exact sampler with no noise: D* + (d0 - D*) e^{-gamma t}
  EXPECT_NEAR(sj["final"].get<double>(), 0.2 + 0.8 * std::exp(-5.0), 1e-9);

  auto f = invoke({"drift", "fit", "--in", csv.string(), "--format", "json"});
  ASSERT_EQ(f.code, 0) << f.err;
  auto fj = json::parse(f.out);
  EXPECT_NEAR(fj["r_squared"].get<double>(), 1.0, 1e-9);
  EXPECT_NEAR(fj["gamma_hat"].get<double>(), 0.5, 1e-6);

  auto stdout_csv = invoke({"drift", "simulate", "--horizon", "1", "--dt", "0.5"});
  EXPECT_EQ(stdout_csv.code, 0);
  EXPECT_EQ(std::count(stdout_csv.out.begin(), stdout_csv.out.end(), '\n'), 4);  // header + 3 rows

  EXPECT_EQ(invoke({"drift", "fit", "--in", "/nonexistent.csv"}).code, 2);
  EXPECT_EQ(invoke({"drift", "simulate", "--dt", "0"}).code, 2);
}

TEST(Cli, ComposeUniformAndPipeline) {
  auto u = invoke({"compose", "--uniform", "5", "--p", "0.95", "--delta", "0.02", "--p-h", "0.98", "--delta-h", "0.01", "--format", "json"});
  ASSERT_EQ(u.code, 0) << u.err;
  auto j = json::parse(u.out);
  EXPECT_NEAR(j["p_chain"].get<double>(), 0.71371, 1e-5);
  EXPECT_NEAR(j["delta_chain"].get<double>(), 0.14, 1e-12);

  auto t = invoke({"compose", "--uniform", "5"});
  EXPECT_NE(t.out.find("0.71371"), std::string::npos);

  auto p = invoke({"compose", data("bench/pipelines/loan_pipeline.yaml"), "--witnesses", data("witnesses/loan_clean")});
  EXPECT_EQ(p.code, 0) << p.out << p.err;
  auto c3 = invoke({"compose", data("bench/pipelines/loan_pipeline_c3.yaml"), "--witnesses", data("witnesses/loan_clean")});
  EXPECT_EQ(c3.code, 1) << c3.err;
  EXPECT_NE(c3.out.find("FAIL"), std::string::npos);

  EXPECT_EQ(invoke({"compose"}).code, 2);
}

TEST(Cli, CertifyDecidesAt55) {
  auto r = invoke({"certify", data("observations/all_success.txt"), "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = json::parse(r.out);
  ASSERT_FALSE(j["decisions"].empty());
  EXPECT_EQ(j["decisions"][0]["at"].get<std::size_t>(), 55u);
  EXPECT_EQ(j["decisions"][0]["state"]["decision"], "accept_h1");
  auto st = j["decisions"][0]["state"].get<SprtState>();
  EXPECT_EQ(st.n, 55u);

  auto piped = invoke({"certify", "-"}, "[true, true, false]");
  EXPECT_EQ(piped.code, 0);
  EXPECT_NE(piped.out.find("observed 3"), std::string::npos);
  EXPECT_EQ(invoke({"certify", "-"}, "1\nmaybe\n").code, 2);
  EXPECT_EQ(invoke({"certify", "-", "--p0", "0.95", "--p1", "0.9"}, "1\n").code, 2);
}

TEST(Cli, BenchSuite) {
  auto r = invoke({"bench", data("bench"), "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = json::parse(r.out);
  EXPECT_DOUBLE_EQ(j["summary"]["overall"]["detection_accuracy"].get<double>(), 1.0);
  auto scores = j["scores"].get<std::vector<ScenarioScore>>();
  EXPECT_EQ(scores.size(), load_manifest(fx::data_dir() / "bench").size());
  EXPECT_EQ(invoke({"bench", "/nonexistent"}).code, 2);
}

TEST(Cli, GenBenchMatchesBundledSuite) {
  auto dir = scratch("gen");
  fs::remove_all(dir);
  auto r = invoke({"gen-bench", "-o", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  auto a = score_all(load_suite(dir));
  for (const auto& s : a) EXPECT_TRUE(s.pass) << s.id;
  EXPECT_EQ(load_manifest(dir).size(), load_manifest(fx::data_dir() / "bench").size());
}
