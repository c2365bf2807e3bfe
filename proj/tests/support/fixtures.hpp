#pragma once

// Small builders shared by the test binaries.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "abc/abc.hpp"

namespace fx {

using abc::Constraint;
using abc::Contract;
using abc::ExecutionTrace;
using abc::Operator;
using abc::Predicate;
using abc::Section;
using abc::Severity;
using nlohmann::json;

inline std::filesystem::path data_dir() { return ABC_DATA_DIR; }

inline Constraint make(std::string name, Section sec, Severity sev, Predicate check,
                       std::optional<std::string> recovery = std::nullopt, double weight = 1.0) {
  Constraint c;
  c.name = std::move(name);
  c.section = sec;
  c.severity = sev;
  c.check = std::move(check);
  c.recovery = std::move(recovery);
  c.weight = weight;
  return c;
}

// invariant `field >= v`
inline Constraint inv(std::string name, Severity sev, std::string field, double v,
                      std::optional<std::string> recovery = std::nullopt) {
  return make(std::move(name), Section::invariant, sev, Predicate::field(std::move(field), Operator::ge, v), std::move(recovery));
}

// governance: action label not in the list
inline Constraint forbid(std::string name, Severity sev, std::vector<std::string> labels) {
  return make(std::move(name), Section::governance, sev, Predicate::field("action.label", Operator::not_in, labels));
}

inline ExecutionTrace trace_of(std::vector<json> states, std::vector<std::string> labels = {}) {
  ExecutionTrace t;
  t.states = std::move(states);
  if (labels.empty()) labels.assign(t.states.empty() ? 0 : t.states.size() - 1, "noop");
  for (auto& l : labels) t.actions.push_back({l, json::object()});
  return t;
}

// states {x: xs[t]}
inline ExecutionTrace scalar_trace(const std::vector<double>& xs, const std::string& key = "x") {
  std::vector<json> s;
  for (double x : xs) s.push_back({{key, x}});
  return trace_of(std::move(s));
}

inline Contract agent(std::string name = "t") {
  Contract c;
  c.name = std::move(name);
  return c;
}

}  // namespace fx
