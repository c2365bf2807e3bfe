#pragma once

// JSON forms of traces, evaluations and reports. Every report type reads
// back into an equal value.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "abc/certification.hpp"
#include "abc/composition.hpp"
#include "abc/monitor.hpp"
#include "abc/ou.hpp"

namespace abc {

using nlohmann::json;

namespace detail {

template <class T>
std::optional<T> opt_get(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

template <class E, class F>
E enum_get(const json& j, const char* key, F parse) {
  const auto s = j.at(key).get<std::string>();
  auto v = parse(s);
  if (!v) throw FormatError(std::string("unknown value '") + s + "' for '" + key + "'");
  return *v;
}

inline std::optional<Section> section_from(std::string_view s) {
  if (s == "precondition") return Section::precondition;
  if (s == "invariant") return Section::invariant;
  if (s == "governance") return Section::governance;
  return std::nullopt;
}

inline std::optional<Severity> severity_from(std::string_view s) {
  if (s == "hard") return Severity::hard;
  if (s == "soft") return Severity::soft;
  return std::nullopt;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Traces

inline void to_json(json& j, const ActionRecord& a) { j = {{"label", a.label}, {"payload", a.payload}}; }

inline void from_json(const json& j, ActionRecord& a) {
  if (j.is_string()) {
    a.label = j.get<std::string>();
    a.payload = json::object();
    return;
  }
  if (!j.is_object() || !j.contains("label") || !j.at("label").is_string())
    throw FormatError("an action is a label string or an object with a string 'label'");
  a.label = j.at("label").get<std::string>();
  a.payload = j.value("payload", json::object());
}

inline void to_json(json& j, const ExecutionTrace& t) {
  j = {{"states", t.states}, {"actions", t.actions}};
  if (!t.stage_ends.empty()) j["stage_ends"] = t.stage_ends;
}

inline ExecutionTrace trace_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("trace must be a JSON object");
  if (!j.contains("states") || !j.at("states").is_array()) throw FormatError("trace needs a 'states' array");
  ExecutionTrace t;
  for (const auto& s : j.at("states")) t.states.push_back(s);
  if (j.contains("actions")) {
    if (!j.at("actions").is_array()) throw FormatError("'actions' must be an array");
    for (const auto& a : j.at("actions")) t.actions.push_back(a.get<ActionRecord>());
  }
  if (j.contains("stage_ends")) {
    if (!j.at("stage_ends").is_array()) throw FormatError("'stage_ends' must be an array");
    for (const auto& e : j.at("stage_ends")) {
      if (!e.is_number_unsigned() && !(e.is_number_integer() && e.get<long long>() >= 0))
        throw FormatError("stage_ends entries must be non-negative integers");
      t.stage_ends.push_back(e.get<std::size_t>());
    }
  }
  t.validate();
  return t;
}

inline void from_json(const json& j, ExecutionTrace& t) { t = trace_from_json(j); }

inline json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(what + ": " + e.what());
  }
}

inline json load_json_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str(), p.string());
}

inline ExecutionTrace load_trace_file(const std::filesystem::path& p) {
  try {
    return trace_from_json(load_json_file(p));
  } catch (const json::exception& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Evaluations

inline void to_json(json& j, const ConstraintResult& r) {
  j = {{"name", r.name},         {"section", to_string(r.section)}, {"severity", to_string(r.severity)},
       {"weight", r.weight},     {"satisfied", r.satisfied},        {"skipped", r.skipped},
       {"detail", r.detail ? json(*r.detail) : json(nullptr)}};
}

inline void from_json(const json& j, ConstraintResult& r) {
  r.name = j.at("name").get<std::string>();
  r.section = detail::enum_get<Section>(j, "section", detail::section_from);
  r.severity = detail::enum_get<Severity>(j, "severity", detail::severity_from);
  r.weight = j.at("weight").get<double>();
  r.satisfied = j.at("satisfied").get<bool>();
  r.skipped = j.at("skipped").get<bool>();
  r.detail = detail::opt_get<std::string>(j, "detail");
}

inline void to_json(json& j, const StepEvaluation& e) {
  j = {{"step", e.step},
       {"has_action", e.has_action},
       {"c_hard", e.c_hard},
       {"c_soft", e.c_soft},
       {"results", e.results},
       {"preconditions", e.preconditions}};
}

inline void from_json(const json& j, StepEvaluation& e) {
  e.step = j.at("step").get<std::size_t>();
  e.has_action = j.at("has_action").get<bool>();
  e.c_hard = j.at("c_hard").get<double>();
  e.c_soft = j.at("c_soft").get<double>();
  e.results = j.at("results").get<std::vector<ConstraintResult>>();
  e.preconditions = j.at("preconditions").get<std::vector<ConstraintResult>>();
}

inline void to_json(json& j, const DriftSample& d) {
  j = {{"t", d.t},
       {"d_compliance", d.d_compliance},
       {"d_distributional", d.d_distributional},
       {"d_total", d.d_total},
       {"decomposition",
        {{"D_P", d.decomposition.preconditions},
         {"D_I", d.decomposition.invariants},
         {"D_G", d.decomposition.governance},
         {"D_dist", d.decomposition.distributional}}}};
}

inline void from_json(const json& j, DriftSample& d) {
  d.t = j.at("t").get<std::size_t>();
  d.d_compliance = j.at("d_compliance").get<double>();
  d.d_distributional = j.at("d_distributional").get<double>();
  d.d_total = j.at("d_total").get<double>();
  const auto& v = j.at("decomposition");
  d.decomposition = {v.at("D_P").get<double>(), v.at("D_I").get<double>(), v.at("D_G").get<double>(),
                     v.at("D_dist").get<double>()};
}

inline void to_json(json& j, const MonitorEvent& e) { j = {{"kind", to_string(e.kind)}, {"step", e.step}, {"payload", e.payload}}; }

inline void from_json(const json& j, MonitorEvent& e) {
  e.kind = detail::enum_get<MonitorEventKind>(j, "kind", monitor_event_kind_from_string);
  e.step = j.at("step").get<std::size_t>();
  e.payload = j.at("payload");
}

inline void to_json(json& j, const ViolationEvent& v) {
  j = {{"step", v.step},
       {"constraint", v.constraint},
       {"severity", to_string(v.severity)},
       {"severity_magnitude", v.severity_magnitude},
       {"recovered_at", v.recovered_at ? json(*v.recovered_at) : json(nullptr)},
       {"delta_t_recovery", v.delta_t_recovery ? json(*v.delta_t_recovery) : json(nullptr)},
       {"censored", v.censored}};
}

inline void from_json(const json& j, ViolationEvent& v) {
  v.step = j.at("step").get<std::size_t>();
  v.constraint = j.at("constraint").get<std::string>();
  v.severity = detail::enum_get<Severity>(j, "severity", detail::severity_from);
  v.severity_magnitude = j.at("severity_magnitude").get<double>();
  v.recovered_at = detail::opt_get<std::size_t>(j, "recovered_at");
  v.delta_t_recovery = detail::opt_get<std::size_t>(j, "delta_t_recovery");
  v.censored = j.at("censored").get<bool>();
}

inline void to_json(json& j, const SessionMetrics& m) {
  j = {{"C_hard", m.mean_c_hard},
       {"C_soft", m.mean_c_soft},
       {"C_bar", m.mean_compliance},
       {"D_bar", m.mean_drift},
       {"E", m.recovery_effectiveness},
       {"S", m.stress_resilience ? json(*m.stress_resilience) : json(nullptr)},
       {"Theta", m.theta}};
}

inline void from_json(const json& j, SessionMetrics& m) {
  m.mean_c_hard = j.at("C_hard").get<double>();
  m.mean_c_soft = j.at("C_soft").get<double>();
  m.mean_compliance = j.at("C_bar").get<double>();
  m.mean_drift = j.at("D_bar").get<double>();
  m.recovery_effectiveness = j.at("E").get<double>();
  m.stress_resilience = detail::opt_get<double>(j, "S");
  m.theta = j.at("Theta").get<double>();
}

inline void to_json(json& j, const VerdictWitness& w) { j = {{"step", w.step}, {"constraint", w.constraint}, {"reason", w.reason}}; }

inline void from_json(const json& j, VerdictWitness& w) {
  w.step = j.at("step").get<std::size_t>();
  w.constraint = j.at("constraint").get<std::string>();
  w.reason = j.at("reason").get<std::string>();
}

inline void to_json(json& j, const SatisfactionVerdict& v) {
  j = {{"preconditions_ok", v.preconditions_ok},
       {"invariants_ok", v.invariants_ok},
       {"governance_ok", v.governance_ok},
       {"recoverability_ok", v.recoverability_ok},
       {"satisfied", v.overall},
       {"witnesses", v.witnesses}};
}

inline void from_json(const json& j, SatisfactionVerdict& v) {
  v.preconditions_ok = j.at("preconditions_ok").get<bool>();
  v.invariants_ok = j.at("invariants_ok").get<bool>();
  v.governance_ok = j.at("governance_ok").get<bool>();
  v.recoverability_ok = j.at("recoverability_ok").get<bool>();
  v.overall = j.at("satisfied").get<bool>();
  v.witnesses = j.at("witnesses").get<std::vector<VerdictWitness>>();
}

inline void to_json(json& j, const StepReport& s) {
  j = {{"pre", s.pre}, {"post", s.post ? json(*s.post) : json(nullptr)}, {"drift", s.drift}, {"events", s.events}};
}

inline void from_json(const json& j, StepReport& s) {
  s.pre = j.at("pre").get<StepEvaluation>();
  s.post = detail::opt_get<StepEvaluation>(j, "post");
  s.drift = j.at("drift").get<DriftSample>();
  s.events = j.at("events").get<std::vector<MonitorEvent>>();
}

inline void to_json(json& j, const SessionReport& r) {
  j = {{"contract", r.contract},
       {"outcome", to_string(r.outcome)},
       {"terminated", r.terminated},
       {"metrics", r.metrics},
       {"verdicts", r.verdict},
       {"violations", r.violations},
       {"events", r.events},
       {"steps", r.steps}};
}

inline void from_json(const json& j, SessionReport& r) {
  r.contract = j.at("contract").get<std::string>();
  r.outcome = detail::enum_get<Outcome>(j, "outcome", outcome_from_string);
  r.terminated = j.at("terminated").get<bool>();
  r.metrics = j.at("metrics").get<SessionMetrics>();
  r.verdict = j.at("verdicts").get<SatisfactionVerdict>();
  r.violations = j.at("violations").get<std::vector<ViolationEvent>>();
  r.events = j.at("events").get<std::vector<MonitorEvent>>();
  r.steps = j.at("steps").get<std::vector<StepReport>>();
}

inline void to_json(json& j, const PdkVerdict& v) {
  j = {{"sessions", v.sessions},
       {"excluded", v.excluded},
       {"hard_frequency", v.hard_frequency},
       {"soft_frequency", v.soft_frequency},
       {"hard_ok", v.hard_ok},
       {"soft_ok", v.soft_ok},
       {"holds", v.holds},
       {"hard_counterexamples", v.hard_counterexamples},
       {"soft_counterexamples", v.soft_counterexamples}};
}

// ---------------------------------------------------------------------------
// Composition and dynamics

inline void to_json(json& j, const ConditionResult& c) {
  j = {{"pass", c.pass}, {"witnesses", c.witnesses}};
  if (!c.note.empty()) j["note"] = c.note;
}

inline void from_json(const json& j, ConditionResult& c) {
  c.pass = j.at("pass").get<bool>();
  c.witnesses = j.at("witnesses").get<std::vector<json>>();
  c.note = j.value("note", std::string());
}

inline void to_json(json& j, const ConditionReport& r) {
  j = {{"C1", r.c1}, {"C2", r.c2}, {"C3", r.c3}, {"C4", r.c4}, {"C5_assumed", r.c5_assumed}};
}

inline void from_json(const json& j, ConditionReport& r) {
  r.c1 = j.at("C1").get<ConditionResult>();
  r.c2 = j.at("C2").get<ConditionResult>();
  r.c3 = j.at("C3").get<ConditionResult>();
  r.c4 = j.at("C4").get<ConditionResult>();
  r.c5_assumed = j.at("C5_assumed").get<bool>();
}

inline void to_json(json& j, const ChainBounds& b) {
  j = {{"p_chain", b.p_chain}, {"delta_chain", b.delta_chain}, {"p_frechet", b.p_frechet ? json(*b.p_frechet) : json(nullptr)}};
}

inline void from_json(const json& j, ChainBounds& b) {
  b.p_chain = j.at("p_chain").get<double>();
  b.delta_chain = j.at("delta_chain").get<double>();
  b.p_frechet = detail::opt_get<double>(j, "p_frechet");
}

inline void to_json(json& j, const PipelineConditionReport& r) {
  j = json::object();
  j["handoffs"] = json::array();
  for (const auto& [name, rep] : r.handoffs) {
    json h = rep;
    h["handoff"] = name;
    j["handoffs"].push_back(h);
  }
  j["pipeline_governance"] = r.governance;
  j["bounds"] = r.bounds;
  j["all_pass"] = r.all_pass();
}

inline void from_json(const json& j, PipelineConditionReport& r) {
  r.handoffs.clear();
  for (const auto& h : j.at("handoffs")) r.handoffs.emplace_back(h.at("handoff").get<std::string>(), h.get<ConditionReport>());
  r.governance = j.at("pipeline_governance").get<ConditionResult>();
  r.bounds = j.at("bounds").get<ChainBounds>();
}

inline void to_json(json& j, const OUFit& f) {
  j = {{"gamma_hat", f.gamma_hat}, {"d_star_hat", f.d_star_hat}, {"d0", f.d0}, {"r_squared", f.r_squared}, {"degenerate", f.degenerate}};
}

inline void from_json(const json& j, OUFit& f) {
  f.gamma_hat = j.at("gamma_hat").get<double>();
  f.d_star_hat = j.at("d_star_hat").get<double>();
  f.d0 = j.at("d0").get<double>();
  f.r_squared = j.at("r_squared").get<double>();
  f.degenerate = j.at("degenerate").get<bool>();
}

inline void to_json(json& j, const SprtState& s) { j = abc::to_json(s); }
inline void from_json(const json& j, SprtState& s) { s = sprt_state_from_json(j); }

}  // namespace abc
