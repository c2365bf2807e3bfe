#pragma once

// Domain model for behavioral contracts: the contract tuple (preconditions,
// hard/soft invariants, hard/soft governance, recovery strategies) plus the
// satisfaction, drift and reliability configuration that travels with it.

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "abc/error.hpp"
#include "abc/expr.hpp"
#include "abc/value.hpp"

namespace abc {

enum class ContractKind { agent, pipeline };
enum class Severity { hard, soft };
enum class Section { precondition, invariant, governance };
enum class OnMissing { violate, satisfy, skip };
enum class Operator { eq, ne, lt, le, gt, ge, in, not_in, matches, range, exists };
enum class StrategyType { emit_event, prompt_adjust, re_prompt, reduce_autonomy, escalate_human, terminate_session };

inline constexpr std::string_view kOtherLabel = "__other__";

/// Governance categories suggested in documentation; any string is accepted.
inline const std::vector<std::string>& suggested_categories() {
  static const std::vector<std::string> cats = {"resource_management", "data_protection", "action_boundaries",
                                                "escalation", "regulatory_compliance"};
  return cats;
}

// ---------------------------------------------------------------------------
// enum <-> string

inline const char* to_string(ContractKind k) { return k == ContractKind::agent ? "agent" : "pipeline"; }
inline const char* to_string(Severity s) { return s == Severity::hard ? "hard" : "soft"; }

inline const char* to_string(Section s) {
  switch (s) {
    case Section::precondition: return "precondition";
    case Section::invariant: return "invariant";
    case Section::governance: return "governance";
  }
  return "?";
}

inline const char* to_string(OnMissing m) {
  switch (m) {
    case OnMissing::violate: return "violate";
    case OnMissing::satisfy: return "satisfy";
    case OnMissing::skip: return "skip";
  }
  return "?";
}

inline const char* to_string(Operator op) {
  switch (op) {
    case Operator::eq: return "eq";
    case Operator::ne: return "ne";
    case Operator::lt: return "lt";
    case Operator::le: return "le";
    case Operator::gt: return "gt";
    case Operator::ge: return "ge";
    case Operator::in: return "in";
    case Operator::not_in: return "not_in";
    case Operator::matches: return "matches";
    case Operator::range: return "range";
    case Operator::exists: return "exists";
  }
  return "?";
}

inline const char* to_string(StrategyType t) {
  switch (t) {
    case StrategyType::emit_event: return "emit_event";
    case StrategyType::prompt_adjust: return "prompt_adjust";
    case StrategyType::re_prompt: return "re_prompt";
    case StrategyType::reduce_autonomy: return "reduce_autonomy";
    case StrategyType::escalate_human: return "escalate_human";
    case StrategyType::terminate_session: return "terminate_session";
  }
  return "?";
}

inline std::optional<Operator> operator_from_string(std::string_view s) {
  static const std::pair<std::string_view, Operator> table[] = {
      {"eq", Operator::eq},         {"ne", Operator::ne},          {"lt", Operator::lt},
      {"le", Operator::le},         {"gt", Operator::gt},          {"ge", Operator::ge},
      {"in", Operator::in},         {"not_in", Operator::not_in},  {"matches", Operator::matches},
      {"range", Operator::range},   {"exists", Operator::exists}};
  for (const auto& [name, op] : table)
    if (name == s) return op;
  return std::nullopt;
}

inline std::optional<StrategyType> strategy_type_from_string(std::string_view s) {
  static const std::pair<std::string_view, StrategyType> table[] = {
      {"emit_event", StrategyType::emit_event},           {"prompt_adjust", StrategyType::prompt_adjust},
      {"re_prompt", StrategyType::re_prompt},             {"reduce_autonomy", StrategyType::reduce_autonomy},
      {"escalate_human", StrategyType::escalate_human},   {"terminate_session", StrategyType::terminate_session}};
  for (const auto& [name, t] : table)
    if (name == s) return t;
  return std::nullopt;
}

inline std::optional<OnMissing> on_missing_from_string(std::string_view s) {
  if (s == "violate") return OnMissing::violate;
  if (s == "satisfy") return OnMissing::satisfy;
  if (s == "skip") return OnMissing::skip;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Predicates

struct FieldCheck {
  std::string field;
  Operator op = Operator::eq;
  nlohmann::json operand;
  std::shared_ptr<const std::regex> pattern;  // compiled operand of `matches`

  bool operator==(const FieldCheck& o) const { return field == o.field && op == o.op && operand == o.operand; }
};

struct ExprCheck {
  std::string source;
  ExprAst ast;

  bool operator==(const ExprCheck& o) const { return source == o.source; }
};

struct Predicate {
  std::variant<FieldCheck, ExprCheck> form;

  /// Builds a structured check; compiles `matches` patterns eagerly.
  static Predicate field(std::string path, Operator op, nlohmann::json operand = nullptr) {
    FieldCheck fc{std::move(path), op, std::move(operand), nullptr};
    if (op == Operator::exists && fc.operand.is_null()) fc.operand = true;
    if (op == Operator::matches) {
      if (!fc.operand.is_string()) throw InvalidArgument("'matches' needs a string pattern");
      fc.pattern = std::make_shared<const std::regex>(fc.operand.get<std::string>(), std::regex::ECMAScript);
    }
    return Predicate{std::move(fc)};
  }

  static Predicate expression(std::string src) {
    auto ast = compile_expression(src);
    return Predicate{ExprCheck{std::move(src), std::move(ast)}};
  }

  bool is_expression() const { return std::holds_alternative<ExprCheck>(form); }
  const FieldCheck* as_field() const { return std::get_if<FieldCheck>(&form); }
  const ExprCheck* as_expression() const { return std::get_if<ExprCheck>(&form); }

  std::vector<std::string> fields() const {
    if (const auto* fc = as_field()) return {fc->field};
    return referenced_fields(as_expression()->ast);
  }

  bool operator==(const Predicate&) const = default;
};

// ---------------------------------------------------------------------------
// Contract tuple

struct Constraint {
  std::string name;
  std::string category;
  Section section = Section::invariant;
  Severity severity = Severity::hard;
  double weight = 1.0;
  Predicate check;
  std::optional<std::string> recovery;
  OnMissing on_missing = OnMissing::violate;
  std::string description;
  // Composition tag: owning stage name, "handoff:<i>", "pipeline", or empty.
  std::string origin;

  bool operator==(const Constraint&) const = default;
};

struct RecoveryStrategy {
  std::string name;
  StrategyType type = StrategyType::emit_event;
  nlohmann::json action;  // opaque descriptor passed to the recovery hook
  int max_attempts = 3;
  std::optional<std::string> fallback;

  bool operator==(const RecoveryStrategy&) const = default;
};

struct SatisfactionParams {
  double p = 0.95;
  double delta = 0.1;
  std::size_t k = 3;
  std::optional<std::size_t> horizon;  // session length T, when fixed

  bool operator==(const SatisfactionParams&) const = default;
};

struct DriftConfig {
  double w_c = 0.7;
  double w_d = 0.3;
  std::size_t window = 10;
  std::vector<std::string> vocabulary;
  std::map<std::string, double> reference;  // empty: uniform over vocabulary
  double theta1 = 0.05;
  double theta2 = 0.30;

  /// Vocabulary plus the pooled out-of-vocabulary bucket, in index order.
  std::vector<std::string> support() const {
    auto s = vocabulary;
    if (std::find(s.begin(), s.end(), kOtherLabel) == s.end()) s.emplace_back(kOtherLabel);
    return s;
  }

  /// Reference distribution laid out over support(); unsmoothed.
  std::vector<double> reference_vector() const {
    auto sup = support();
    std::vector<double> out(sup.size(), 0.0);
    if (reference.empty()) {
      if (vocabulary.empty()) {
        out.back() = 1.0;
      } else {
        for (std::size_t i = 0; i < vocabulary.size(); ++i) out[i] = 1.0 / static_cast<double>(vocabulary.size());
      }
      return out;
    }
    for (std::size_t i = 0; i < sup.size(); ++i) {
      auto it = reference.find(sup[i]);
      if (it != reference.end()) out[i] = it->second;
    }
    return out;
  }

  bool operator==(const DriftConfig&) const = default;
};

struct ReliabilityWeights {
  double a1 = 0.4;
  double a2 = 0.3;
  double a3 = 0.2;
  double a4 = 0.1;

  bool operator==(const ReliabilityWeights&) const = default;
};

struct Contract {
  std::string version = "1.0";
  ContractKind kind = ContractKind::agent;
  std::string name;
  std::string description;
  std::vector<Constraint> preconditions;
  std::vector<Constraint> invariants_hard;
  std::vector<Constraint> invariants_soft;
  std::vector<Constraint> governance_hard;
  std::vector<Constraint> governance_soft;
  std::vector<RecoveryStrategy> recovery_strategies;
  SatisfactionParams satisfaction;
  DriftConfig drift;
  ReliabilityWeights reliability;
  // Stage order of a composed pipeline contract; empty for single agents.
  std::vector<std::string> stages;

  bool operator==(const Contract&) const = default;

  /// Invariants then governance, hard before soft. This is the order every
  /// step evaluation reports results in.
  std::vector<const Constraint*> step_constraints() const {
    std::vector<const Constraint*> out;
    for (const auto* group : {&invariants_hard, &invariants_soft, &governance_hard, &governance_soft})
      for (const auto& c : *group) out.push_back(&c);
    return out;
  }

  std::vector<const Constraint*> all_constraints() const {
    std::vector<const Constraint*> out;
    for (const auto& c : preconditions) out.push_back(&c);
    auto rest = step_constraints();
    out.insert(out.end(), rest.begin(), rest.end());
    return out;
  }

  const Constraint* find_constraint(std::string_view n) const {
    for (const auto* c : all_constraints())
      if (c->name == n) return c;
    return nullptr;
  }

  const RecoveryStrategy* find_strategy(std::string_view n) const {
    for (const auto& s : recovery_strategies)
      if (s.name == n) return &s;
    return nullptr;
  }

  /// Strategies visited starting from `first`, following fallbacks. Stops at
  /// a dangling reference or the first repeated strategy.
  std::vector<const RecoveryStrategy*> recovery_chain(std::string_view first) const {
    std::vector<const RecoveryStrategy*> chain;
    std::set<std::string, std::less<>> seen;
    const RecoveryStrategy* s = find_strategy(first);
    while (s && !seen.count(s->name)) {
      seen.insert(s->name);
      chain.push_back(s);
      s = s->fallback ? find_strategy(*s->fallback) : nullptr;
    }
    return chain;
  }

  /// k_max for a strategy: total attempts available along its chain.
  int chain_budget(std::string_view first) const {
    int total = 0;
    for (const auto* s : recovery_chain(first)) total += s->max_attempts;
    return total;
  }
};

// ---------------------------------------------------------------------------
// Structural validation

struct StructuralIssue {
  std::string element;
  std::string rule;
  std::string message;

  bool operator==(const StructuralIssue&) const = default;
  bool operator<(const StructuralIssue& o) const {
    return std::tie(element, rule, message) < std::tie(o.element, o.rule, o.message);
  }
};

namespace detail {

inline void check_predicate(const Constraint& c, std::vector<StructuralIssue>& out) {
  const auto* fc = c.check.as_field();
  if (!fc) {
    if (!c.check.as_expression()->ast) out.push_back({c.name, "uncompiled expression", "expression has no AST"});
    return;
  }
  if (fc->field.empty()) out.push_back({c.name, "empty field path", "check.field must name a state path"});
  switch (fc->op) {
    case Operator::range: {
      const auto& r = fc->operand;
      if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number())
        out.push_back({c.name, "invalid range operand", "range operand must be [lo, hi]"});
      else if (r[0].get<double>() > r[1].get<double>())
        out.push_back({c.name, "invalid range operand", "range lower bound exceeds upper bound"});
      break;
    }
    case Operator::matches:
      if (!fc->operand.is_string() || !fc->pattern)
        out.push_back({c.name, "invalid regex", "matches operand must be a compiled regular expression"});
      break;
    case Operator::in:
    case Operator::not_in:
      if (!fc->operand.is_array()) out.push_back({c.name, "invalid set operand", "in/not_in operand must be a list"});
      break;
    case Operator::lt:
    case Operator::le:
    case Operator::gt:
    case Operator::ge:
      if (!fc->operand.is_number())
        out.push_back({c.name, "invalid comparison operand", "ordering operators compare against numbers"});
      break;
    case Operator::exists:
      if (!fc->operand.is_boolean()) out.push_back({c.name, "invalid exists operand", "exists takes true or false"});
      break;
    default: break;
  }
}

inline bool near_one(double x, double tol) { return std::fabs(x - 1.0) <= tol; }

}  // namespace detail

/// Checks every structural invariant of the contract model. Returns issues
/// sorted by element name; an empty list means the contract is well formed.
inline std::vector<StructuralIssue> validate_contract(const Contract& c) {
  std::vector<StructuralIssue> out;

  std::map<std::string, int> name_count;
  for (const auto* k : c.all_constraints()) ++name_count[k->name];
  for (const auto& [n, count] : name_count)
    if (count > 1) out.push_back({n, "duplicate constraint name", "constraint name appears " + std::to_string(count) + " times"});

  for (const auto* k : c.all_constraints()) {
    if (k->name.empty()) out.push_back({"<unnamed>", "missing name", "every constraint needs a name"});
    if (!(k->weight > 0.0) || !std::isfinite(k->weight))
      out.push_back({k->name, "non-positive weight", "weight must be a positive finite number"});
    if (k->recovery) {
      if (k->severity == Severity::hard || k->section == Section::precondition)
        out.push_back({k->name, "hard constraint carries recovery", "only soft constraints may name a recovery strategy"});
      else if (!c.find_strategy(*k->recovery))
        out.push_back({k->name, "unresolved recovery reference", "recovery strategy '" + *k->recovery + "' is not defined"});
    }
    detail::check_predicate(*k, out);
  }

  std::map<std::string, int> strategy_count;
  for (const auto& s : c.recovery_strategies) ++strategy_count[s.name];
  for (const auto& [n, count] : strategy_count)
    if (count > 1) out.push_back({n, "duplicate strategy name", "strategy name appears " + std::to_string(count) + " times"});

  std::set<std::set<std::string>> cycles;
  for (const auto& s : c.recovery_strategies) {
    if (s.max_attempts < 1) out.push_back({s.name, "max_attempts below 1", "max_attempts must be at least 1"});
    if (s.fallback && !c.find_strategy(*s.fallback))
      out.push_back({s.name, "unresolved fallback reference", "fallback strategy '" + *s.fallback + "' is not defined"});
    std::vector<std::string> path;
    const RecoveryStrategy* cur = &s;
    while (cur) {
      auto hit = std::find(path.begin(), path.end(), cur->name);
      if (hit != path.end()) {
        cycles.insert(std::set<std::string>(hit, path.end()));
        break;
      }
      path.push_back(cur->name);
      cur = cur->fallback ? c.find_strategy(*cur->fallback) : nullptr;
    }
  }
  for (const auto& cyc : cycles) {
    std::string chain;
    for (const auto& n : cyc) chain += (chain.empty() ? "" : ", ") + n;
    out.push_back({*cyc.begin(), "cyclic fallback chain", "fallback chain cycles through {" + chain + "}"});
  }

  const auto& sp = c.satisfaction;
  if (!(sp.p >= 0.0 && sp.p <= 1.0)) out.push_back({"satisfaction.p", "out of range", "p must lie in [0,1]"});
  if (!(sp.delta >= 0.0 && sp.delta <= 1.0))
    out.push_back({"satisfaction.delta", "out of range", "delta must lie in [0,1]"});

  const auto& d = c.drift;
  if (d.w_c < 0.0 || d.w_d < 0.0) out.push_back({"drift.w_c", "negative weight", "drift weights must be non-negative"});
  if (!detail::near_one(d.w_c + d.w_d, 1e-12)) out.push_back({"drift.w_c", "weights do not sum to 1", "w_c + w_d must equal 1"});
  if (d.window < 1) out.push_back({"drift.window", "out of range", "window must be at least 1"});
  if (!(d.theta1 >= 0.0 && d.theta1 <= 1.0 && d.theta2 >= 0.0 && d.theta2 <= 1.0))
    out.push_back({"drift.theta1", "out of range", "thresholds must lie in [0,1]"});
  else if (!(d.theta1 < d.theta2))
    out.push_back({"drift.theta1", "threshold order", "theta1 must be below theta2"});
  std::set<std::string> vocab;
  for (const auto& v : d.vocabulary) {
    if (v.empty()) out.push_back({"drift.vocabulary", "empty label", "vocabulary labels must be non-empty"});
    if (!vocab.insert(v).second) out.push_back({"drift.vocabulary", "duplicate label", "label '" + v + "' repeats"});
  }
  if (!d.reference.empty()) {
    double sum = 0.0;
    for (const auto& [label, mass] : d.reference) {
      if (!vocab.count(label))
        out.push_back({"drift.reference", "label outside vocabulary", "reference label '" + label + "' is not in the vocabulary"});
      if (!(mass >= 0.0)) out.push_back({"drift.reference", "negative mass", "reference probabilities must be non-negative"});
      sum += mass;
    }
    if (!detail::near_one(sum, 1e-9)) out.push_back({"drift.reference", "not normalized", "reference distribution must sum to 1"});
  }

  const auto& r = c.reliability;
  if (r.a1 < 0 || r.a2 < 0 || r.a3 < 0 || r.a4 < 0)
    out.push_back({"reliability", "negative weight", "reliability weights must be non-negative"});
  if (!detail::near_one(r.a1 + r.a2 + r.a3 + r.a4, 1e-12))
    out.push_back({"reliability", "weights do not sum to 1", "a1 + a2 + a3 + a4 must equal 1"});

  std::sort(out.begin(), out.end());
  return out;
}

/// Non-fatal findings: unreferenced strategies and categories outside the
/// suggested taxonomy.
inline std::vector<StructuralIssue> contract_warnings(const Contract& c) {
  std::vector<StructuralIssue> out;
  std::set<std::string> reachable;
  for (const auto* k : c.all_constraints())
    if (k->recovery)
      for (const auto* s : c.recovery_chain(*k->recovery)) reachable.insert(s->name);
  for (const auto& s : c.recovery_strategies)
    if (!reachable.count(s.name))
      out.push_back({s.name, "unreferenced strategy", "no soft constraint reaches this strategy"});
  const auto& cats = suggested_categories();
  for (const auto* k : c.all_constraints())
    if (!k->category.empty() && std::find(cats.begin(), cats.end(), k->category) == cats.end())
      out.push_back({k->name, "unknown category", "category '" + k->category + "' is outside the suggested taxonomy"});
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace abc
