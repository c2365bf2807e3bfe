#pragma once

// Scenario loading, scoring and per-domain aggregation for the bundled
// benchmark suite.

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "abc/json_io.hpp"
#include "abc/parser.hpp"

namespace abc {

struct ExpectedViolation {
  std::size_t step = 0;
  std::string constraint;

  auto operator<=>(const ExpectedViolation&) const = default;
};

struct ScenarioExpectation {
  std::vector<ExpectedViolation> violations;
  Outcome outcome = Outcome::compliant;
  std::pair<double, double> c_hard_range{0.0, 1.0};
  std::pair<double, double> c_soft_range{0.0, 1.0};
  std::optional<std::vector<std::string>> failed_conditions;  // composition scenarios
};

struct Scenario {
  std::string id;
  std::string domain;
  std::string difficulty;
  std::string description;
  std::filesystem::path path;
  std::string contract_ref;
  Contract contract;                      // composed contract for pipeline scenarios
  std::optional<PipelineSpec> pipeline;
  ExecutionTrace trace;
  ScenarioExpectation expected;
  std::vector<CompositionSamples> witnesses;  // one per handoff
  std::string category;                       // composition category, if any
};

namespace detail {

inline std::pair<double, double> range_from(const json& j, const char* key) {
  if (!j.contains(key)) return {0.0, 1.0};
  const auto& r = j.at(key);
  if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number())
    throw FormatError(std::string("'") + key + "' must be [lo, hi]");
  const double lo = r[0].get<double>(), hi = r[1].get<double>();
  if (!(lo >= 0.0 && hi <= 1.0 && lo <= hi)) throw FormatError(std::string("'") + key + "' must be a sub-interval of [0, 1]");
  return {lo, hi};
}

inline ActionSample action_sample_from(const json& j) {
  ActionSample s;
  s.action = j.get<ActionRecord>();
  if (j.is_object() && j.contains("state")) s.state = j.at("state");
  return s;
}

inline CompositionSamples samples_from(const json& j) {
  CompositionSamples s;
  for (const auto& x : j.value("terminal_states", json::array())) s.terminal_states.push_back(x);
  for (const auto& x : j.value("actions", json::array())) s.actions.push_back(action_sample_from(x));
  for (const auto& x : j.value("recovered_states", json::array())) s.recovered_states.push_back(x);
  return s;
}

inline std::string require_string(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string()) throw FormatError(std::string("scenario needs a string '") + key + "'");
  return j.at(key).get<std::string>();
}

}  // namespace detail

/// Reads a scenario and cross-checks it against its contract.
inline Scenario load_scenario(const std::filesystem::path& path) {
  const json j = load_json_file(path);
  Scenario s;
  s.path = path;
  try {
    if (!j.is_object()) throw FormatError("scenario must be a JSON object");
    s.id = detail::require_string(j, "id");
    s.domain = detail::require_string(j, "domain");
    s.difficulty = detail::require_string(j, "difficulty");
    if (s.difficulty != "easy" && s.difficulty != "medium" && s.difficulty != "hard")
      throw FormatError("difficulty must be easy, medium or hard");
    s.description = j.value("description", std::string());
    s.contract_ref = detail::require_string(j, "contract");
    if (!j.contains("trace")) throw FormatError("scenario needs a 'trace'");
    s.trace = trace_from_json(j.at("trace"));
    if (s.trace.length() == 0) throw FormatError("scenarios require at least one step");

    if (!j.contains("expected") || !j.at("expected").is_object()) throw FormatError("scenario needs an 'expected' object");
    const auto& e = j.at("expected");
    for (const auto& v : e.value("violations", json::array())) {
      if (!v.is_object() || !v.contains("step") || !v.contains("constraint"))
        throw FormatError("expected violations are {step, constraint} objects");
      s.expected.violations.push_back({v.at("step").get<std::size_t>(), v.at("constraint").get<std::string>()});
    }
    s.expected.outcome = detail::enum_get<Outcome>(e, "outcome", outcome_from_string);
    s.expected.c_hard_range = detail::range_from(e, "c_hard_range");
    s.expected.c_soft_range = detail::range_from(e, "c_soft_range");
    if (e.contains("failed_conditions")) s.expected.failed_conditions = e.at("failed_conditions").get<std::vector<std::string>>();
  } catch (const json::exception& ex) {
    throw FormatError(path.string() + ": " + ex.what());
  }

  auto ref = std::filesystem::path(s.contract_ref);
  if (ref.is_relative()) ref = path.parent_path() / ref;
  const auto text = read_text_file(ref);
  if (document_kind(text) == "pipeline") {
    s.pipeline = parse_pipeline(text, ref.parent_path());
    s.contract = compose_pipeline(*s.pipeline);
    if (j.contains("composition")) {
      const auto& c = j.at("composition");
      s.category = c.value("category", std::string());
      for (const auto& w : c.value("witnesses", json::array())) s.witnesses.push_back(detail::samples_from(w));
    }
  } else {
    s.contract = parse_contract(text);
  }

  for (const auto& v : s.expected.violations) {
    if (!s.contract.find_constraint(v.constraint))
      throw DanglingConstraintRef(path.string() + ": expected violation names unknown constraint '" + v.constraint + "'");
    if (v.step > s.trace.length())
      throw FormatError(path.string() + ": expected violation at step " + std::to_string(v.step) + " is past the trace end");
  }
  return s;
}

struct ScenarioScore {
  std::string id;
  std::string domain;
  std::string difficulty;
  double detection_accuracy = 1.0;
  std::size_t false_flags = 0;
  std::vector<ExpectedViolation> missed;
  std::vector<ExpectedViolation> spurious;
  double c_hard = 1.0;
  double c_soft = 1.0;
  double mean_drift = 0.0;
  double theta = 1.0;
  Outcome outcome = Outcome::compliant;
  Outcome expected_outcome = Outcome::compliant;
  std::optional<std::vector<std::string>> failed_conditions;
  bool pass = false;
  std::vector<std::string> reasons;  // why pass is false
};

/// Replays the trace in detection-only mode (no recovery hook) and scores
/// detection, compliance, drift, reliability and outcome.
inline ScenarioScore score_scenario(const Scenario& s) {
  ScenarioScore sc;
  sc.id = s.id;
  sc.domain = s.domain;
  sc.difficulty = s.difficulty;
  auto rep = run_session(s.contract, s.trace);

  std::set<ExpectedViolation> detected;
  for (const auto& e : rep.events)
    if (e.kind == MonitorEventKind::violation) detected.insert({e.step, e.payload.at("constraint").get<std::string>()});
  const std::set<ExpectedViolation> expected(s.expected.violations.begin(), s.expected.violations.end());
  std::size_t hit = 0;
  for (const auto& v : expected) {
    if (detected.count(v)) ++hit;
    else sc.missed.push_back(v);
  }
  for (const auto& v : detected)
    if (!expected.count(v)) sc.spurious.push_back(v);
  sc.false_flags = sc.spurious.size();
  sc.detection_accuracy = expected.empty() ? 1.0 : static_cast<double>(hit) / static_cast<double>(expected.size());

  sc.c_hard = rep.metrics.mean_c_hard;
  sc.c_soft = rep.metrics.mean_c_soft;
  sc.mean_drift = rep.metrics.mean_drift;
  sc.theta = rep.metrics.theta;
  sc.outcome = rep.outcome;
  sc.expected_outcome = s.expected.outcome;

  if (sc.detection_accuracy < 1.0) sc.reasons.push_back("missed " + std::to_string(sc.missed.size()) + " expected violation(s)");
  if (sc.outcome != sc.expected_outcome)
    sc.reasons.push_back(std::string("outcome ") + to_string(sc.outcome) + ", expected " + to_string(sc.expected_outcome));
  auto inside = [](double x, const std::pair<double, double>& r) { return x >= r.first - 1e-12 && x <= r.second + 1e-12; };
  if (!inside(sc.c_hard, s.expected.c_hard_range)) sc.reasons.push_back("C_hard outside expected range");
  if (!inside(sc.c_soft, s.expected.c_soft_range)) sc.reasons.push_back("C_soft outside expected range");

  if (s.pipeline && !s.witnesses.empty()) {
    auto cond = check_pipeline(*s.pipeline, s.witnesses);
    std::set<std::string> failed;
    for (const auto& [name, r] : cond.handoffs)
      for (const auto& f : r.failed()) failed.insert(f);
    if (!cond.governance.pass) failed.insert("C3");
    sc.failed_conditions = std::vector<std::string>(failed.begin(), failed.end());
    if (s.expected.failed_conditions) {
      auto want = *s.expected.failed_conditions;
      std::sort(want.begin(), want.end());
      if (want != *sc.failed_conditions) sc.reasons.push_back("composition conditions differ from expectation");
    }
  }
  sc.pass = sc.reasons.empty();
  return sc;
}

inline void to_json(json& j, const ExpectedViolation& v) { j = {{"step", v.step}, {"constraint", v.constraint}}; }
inline void from_json(const json& j, ExpectedViolation& v) {
  v.step = j.at("step").get<std::size_t>();
  v.constraint = j.at("constraint").get<std::string>();
}

inline void to_json(json& j, const ScenarioScore& s) {
  j = {{"id", s.id},
       {"domain", s.domain},
       {"difficulty", s.difficulty},
       {"detection_accuracy", s.detection_accuracy},
       {"false_flags", s.false_flags},
       {"missed", s.missed},
       {"spurious", s.spurious},
       {"c_hard", s.c_hard},
       {"c_soft", s.c_soft},
       {"mean_drift", s.mean_drift},
       {"theta", s.theta},
       {"outcome", to_string(s.outcome)},
       {"expected_outcome", to_string(s.expected_outcome)},
       {"failed_conditions", s.failed_conditions ? json(*s.failed_conditions) : json(nullptr)},
       {"pass", s.pass},
       {"reasons", s.reasons}};
}

inline void from_json(const json& j, ScenarioScore& s) {
  s.id = j.at("id").get<std::string>();
  s.domain = j.at("domain").get<std::string>();
  s.difficulty = j.at("difficulty").get<std::string>();
  s.detection_accuracy = j.at("detection_accuracy").get<double>();
  s.false_flags = j.at("false_flags").get<std::size_t>();
  s.missed = j.at("missed").get<std::vector<ExpectedViolation>>();
  s.spurious = j.at("spurious").get<std::vector<ExpectedViolation>>();
  s.c_hard = j.at("c_hard").get<double>();
  s.c_soft = j.at("c_soft").get<double>();
  s.mean_drift = j.at("mean_drift").get<double>();
  s.theta = j.at("theta").get<double>();
  s.outcome = detail::enum_get<Outcome>(j, "outcome", outcome_from_string);
  s.expected_outcome = detail::enum_get<Outcome>(j, "expected_outcome", outcome_from_string);
  s.failed_conditions = detail::opt_get<std::vector<std::string>>(j, "failed_conditions");
  s.pass = j.at("pass").get<bool>();
  s.reasons = j.at("reasons").get<std::vector<std::string>>();
}

// ---------------------------------------------------------------------------
// Aggregation

struct DomainRow {
  std::string domain;
  std::size_t n = 0;
  double c_hard = 0.0;
  double c_soft = 0.0;
  double mean_drift = 0.0;
  double theta = 0.0;
  double detection_accuracy = 0.0;
  std::size_t passed = 0;
  std::size_t false_flags = 0;
  std::map<std::string, std::size_t> outcomes;  // compliant / hard_violation / soft_violation

  bool operator==(const DomainRow&) const = default;
};

struct DomainSummary {
  std::vector<DomainRow> rows;  // sorted by domain
  DomainRow overall;

  bool operator==(const DomainSummary&) const = default;
};

namespace detail {
inline DomainRow summarize(const std::string& name, const std::vector<const ScenarioScore*>& xs) {
  DomainRow r;
  r.domain = name;
  r.n = xs.size();
  r.outcomes = {{"compliant", 0}, {"hard_violation", 0}, {"soft_violation", 0}};
  for (const auto* s : xs) {
    r.c_hard += s->c_hard;
    r.c_soft += s->c_soft;
    r.mean_drift += s->mean_drift;
    r.theta += s->theta;
    r.detection_accuracy += s->detection_accuracy;
    r.false_flags += s->false_flags;
    if (s->pass) ++r.passed;
    ++r.outcomes[to_string(s->outcome)];
  }
  const double n = static_cast<double>(xs.size());
  r.c_hard /= n;
  r.c_soft /= n;
  r.mean_drift /= n;
  r.theta /= n;
  r.detection_accuracy /= n;
  return r;
}
}  // namespace detail

/// Arithmetic means per domain plus an overall row. Independent of the
/// order of `scores`.
inline DomainSummary aggregate(std::span<const ScenarioScore> scores) {
  if (scores.empty()) throw EmptyInput("nothing to aggregate");
  std::vector<const ScenarioScore*> sorted;
  for (const auto& s : scores) sorted.push_back(&s);
  std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) { return std::tie(a->domain, a->id) < std::tie(b->domain, b->id); });
  std::map<std::string, std::vector<const ScenarioScore*>> by;
  for (const auto* s : sorted) by[s->domain].push_back(s);
  DomainSummary out;
  for (const auto& [d, xs] : by) out.rows.push_back(detail::summarize(d, xs));
  out.overall = detail::summarize("overall", sorted);
  return out;
}

inline void to_json(json& j, const DomainRow& r) {
  j = {{"domain", r.domain},         {"n", r.n},           {"C_hard", r.c_hard},
       {"C_soft", r.c_soft},         {"D_bar", r.mean_drift}, {"Theta", r.theta},
       {"detection_accuracy", r.detection_accuracy}, {"passed", r.passed}, {"false_flags", r.false_flags},
       {"outcomes", r.outcomes}};
}

inline void from_json(const json& j, DomainRow& r) {
  r.domain = j.at("domain").get<std::string>();
  r.n = j.at("n").get<std::size_t>();
  r.c_hard = j.at("C_hard").get<double>();
  r.c_soft = j.at("C_soft").get<double>();
  r.mean_drift = j.at("D_bar").get<double>();
  r.theta = j.at("Theta").get<double>();
  r.detection_accuracy = j.at("detection_accuracy").get<double>();
  r.passed = j.at("passed").get<std::size_t>();
  r.false_flags = j.at("false_flags").get<std::size_t>();
  r.outcomes = j.at("outcomes").get<std::map<std::string, std::size_t>>();
}

inline void to_json(json& j, const DomainSummary& s) { j = {{"domains", s.rows}, {"overall", s.overall}}; }
inline void from_json(const json& j, DomainSummary& s) {
  s.rows = j.at("domains").get<std::vector<DomainRow>>();
  s.overall = j.at("overall").get<DomainRow>();
}

namespace detail {
// Terminal columns taken by a UTF-8 string; combining marks take none.
inline std::size_t display_width(std::string_view s) {
  std::size_t w = 0;
  for (std::size_t i = 0; i < s.size();) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : 4;
    unsigned cp = c;
    if (len == 2 && i + 1 < s.size()) cp = ((c & 0x1F) << 6) | (static_cast<unsigned char>(s[i + 1]) & 0x3F);
    if (!(cp >= 0x300 && cp <= 0x36F)) ++w;
    i += len;
  }
  return w;
}

inline std::string pad(const std::string& s, std::size_t width, bool right) {
  const auto w = display_width(s);
  const std::string fill(width > w ? width - w : 0, ' ');
  return right ? fill + s : s + fill;
}
}  // namespace detail

/// Aligned text table with columns Domain, N, C_hard, C_soft, D-bar, Theta.
inline std::string format_table(const DomainSummary& s) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"Domain", "N", "C_hard", "C_soft", "D̄", "Θ"});
  auto fmt = [](double x) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << x;
    return os.str();
  };
  for (const auto* r : [&] {
         std::vector<const DomainRow*> v;
         for (const auto& x : s.rows) v.push_back(&x);
         v.push_back(&s.overall);
         return v;
       }())
    rows.push_back({r->domain, std::to_string(r->n), fmt(r->c_hard), fmt(r->c_soft), fmt(r->mean_drift), fmt(r->theta)});
  std::vector<std::size_t> widths(6, 0);
  for (const auto& r : rows)
    for (std::size_t i = 0; i < 6; ++i) widths[i] = std::max(widths[i], detail::display_width(r[i]));
  std::ostringstream os;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (k == rows.size() - 1) {
      std::size_t total = 0;
      for (auto w : widths) total += w + 2;
      os << std::string(total - 2, '-') << "\n";
    }
    for (std::size_t i = 0; i < 6; ++i) {
      os << detail::pad(rows[k][i], widths[i], i > 0);
      os << (i + 1 < 6 ? "  " : "\n");
    }
    if (k == 0) {
      std::size_t total = 0;
      for (auto w : widths) total += w + 2;
      os << std::string(total - 2, '-') << "\n";
    }
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Suites

struct SuiteEntry {
  std::string id;
  std::string domain;
  std::string difficulty;
  std::string path;
};

inline std::vector<SuiteEntry> load_manifest(const std::filesystem::path& dir) {
  const auto j = load_json_file(dir / "manifest.json");
  std::vector<SuiteEntry> out;
  try {
    for (const auto& e : j.at("scenarios"))
      out.push_back({e.at("id").get<std::string>(), e.at("domain").get<std::string>(), e.at("difficulty").get<std::string>(),
                     e.at("path").get<std::string>()});
  } catch (const json::exception& ex) {
    throw FormatError("manifest: " + std::string(ex.what()));
  }
  return out;
}

inline std::vector<Scenario> load_suite(const std::filesystem::path& dir) {
  std::vector<Scenario> out;
  for (const auto& e : load_manifest(dir)) out.push_back(load_scenario(dir / e.path));
  return out;
}

/// Scores scenarios on `jobs` worker threads; results keep input order.
inline std::vector<ScenarioScore> score_all(const std::vector<Scenario>& scenarios, unsigned jobs = 1) {
  std::vector<ScenarioScore> out(scenarios.size());
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(1, scenarios.size()))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < scenarios.size(); ++i) out[i] = score_scenario(scenarios[i]);
    return out;
  }
  std::vector<std::exception_ptr> errors(jobs);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < jobs; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < scenarios.size(); i += jobs) out[i] = score_scenario(scenarios[i]);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace abc
