#pragma once

// Step evaluation, hard/soft compliance scores and deterministic contract
// satisfaction over a whole trace.

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "abc/core.hpp"

namespace abc {

struct ConstraintResult {
  std::string name;
  Section section = Section::invariant;
  Severity severity = Severity::hard;
  double weight = 1.0;
  bool satisfied = true;
  bool skipped = false;  // not counted at this step (on_missing: skip, inactive phase, no action)
  std::optional<std::string> detail;

  bool violated() const { return !skipped && !satisfied; }
  bool operator==(const ConstraintResult&) const = default;
};

struct StepEvaluation {
  std::size_t step = 0;
  bool has_action = false;
  std::vector<ConstraintResult> results;        // invariants + governance, contract order
  std::vector<ConstraintResult> preconditions;  // only populated at step 0
  double c_hard = 1.0;
  double c_soft = 1.0;

  const ConstraintResult* find(std::string_view name) const {
    for (const auto& r : results)
      if (r.name == name) return &r;
    for (const auto& r : preconditions)
      if (r.name == name) return &r;
    return nullptr;
  }

  bool operator==(const StepEvaluation&) const = default;
};

/// Phase scoping for composed contracts: which stage is active at which
/// step. `ends[i]` is the handoff step closing stage i; the last stage runs
/// to the end of the trace.
class StageSchedule {
 public:
  StageSchedule() = default;
  StageSchedule(std::vector<std::string> stages, std::vector<std::size_t> ends)
      : stages_(std::move(stages)), ends_(std::move(ends)) {
    if (stages_.empty()) return;
    if (ends_.size() + 1 != stages_.size())
      throw BadBoundaries("expected " + std::to_string(stages_.size() - 1) + " stage boundaries, got " +
                          std::to_string(ends_.size()));
    for (std::size_t i = 1; i < ends_.size(); ++i)
      if (ends_[i] <= ends_[i - 1]) throw BadBoundaries("stage boundaries must be strictly increasing");
  }

  bool empty() const { return stages_.empty(); }
  const std::vector<std::size_t>& ends() const { return ends_; }

  /// Checks boundaries against a trace of length T.
  void check_against(std::size_t T) const {
    for (auto e : ends_)
      if (e > T) throw BadBoundaries("stage boundary " + std::to_string(e) + " lies beyond trace end " + std::to_string(T));
  }

  /// Whether `c` is enforced at step t. Governance and untagged constraints
  /// are enforced throughout; stage invariants during their own phase
  /// (inclusive of both boundary states); handoff invariants only at the
  /// boundary step.
  bool active(const Constraint& c, std::size_t t) const {
    if (stages_.empty() || c.origin.empty() || c.section != Section::invariant) return true;
    if (c.origin.rfind("handoff:", 0) == 0) {
      auto idx = std::stoul(c.origin.substr(8));
      return idx < ends_.size() && ends_[idx] == t;
    }
    auto it = std::find(stages_.begin(), stages_.end(), c.origin);
    if (it == stages_.end()) return true;
    auto i = static_cast<std::size_t>(it - stages_.begin());
    std::size_t begin = i == 0 ? 0 : ends_[i - 1];
    if (t < begin) return false;
    if (i < ends_.size() && t > ends_[i]) return false;
    return true;
  }

 private:
  std::vector<std::string> stages_;
  std::vector<std::size_t> ends_;
};

namespace detail {

inline bool check_field(const FieldCheck& fc, const EvalView& view) {
  const auto* v = view.resolve(fc.field);
  if (fc.op == Operator::exists) return (v != nullptr) == fc.operand.get<bool>();
  if (!v) throw FieldResolutionError(fc.field);
  if (v->is_object()) throw TypeMismatch("field '" + fc.field + "' resolves to a map, not a scalar or list");

  auto number = [&](const nlohmann::json& x) {
    if (!x.is_number())
      throw TypeMismatch("operator " + std::string(to_string(fc.op)) + " needs a number at '" + fc.field + "', got " +
                         x.type_name());
    return x.get<double>();
  };
  auto member = [&](const nlohmann::json& x) {
    return std::find(fc.operand.begin(), fc.operand.end(), x) != fc.operand.end();
  };

  switch (fc.op) {
    case Operator::eq: return *v == fc.operand;
    case Operator::ne: return *v != fc.operand;
    case Operator::lt: return number(*v) < fc.operand.get<double>();
    case Operator::le: return number(*v) <= fc.operand.get<double>();
    case Operator::gt: return number(*v) > fc.operand.get<double>();
    case Operator::ge: return number(*v) >= fc.operand.get<double>();
    case Operator::in:
      if (v->is_array()) return std::all_of(v->begin(), v->end(), member);
      return member(*v);
    case Operator::not_in:
      if (v->is_array()) return std::none_of(v->begin(), v->end(), member);
      return !member(*v);
    case Operator::matches:
      if (!v->is_string()) throw TypeMismatch("matches needs a string at '" + fc.field + "', got " + v->type_name());
      return std::regex_search(v->get_ref<const std::string&>(), *fc.pattern);
    case Operator::range: {
      double x = number(*v);
      return x >= fc.operand[0].get<double>() && x <= fc.operand[1].get<double>();
    }
    case Operator::exists: break;
  }
  return false;
}

}  // namespace detail

/// Evaluates a single predicate. Throws the EvalError family.
inline bool evaluate_predicate(const Predicate& p, const EvalView& view) {
  if (const auto* fc = p.as_field()) return detail::check_field(*fc, view);
  return eval_expression(p.as_expression()->ast, view);
}

/// Evaluates a constraint fail-closed: resolution failures follow the
/// constraint's on_missing policy, every other error is a violation.
inline ConstraintResult evaluate_constraint(const Constraint& c, const EvalView& view) {
  ConstraintResult r{c.name, c.section, c.severity, c.weight, true, false, std::nullopt};
  try {
    r.satisfied = evaluate_predicate(c.check, view);
  } catch (const FieldResolutionError& e) {
    r.detail = std::string("missing field: ") + e.path();
    switch (c.on_missing) {
      case OnMissing::violate: r.satisfied = false; break;
      case OnMissing::satisfy: r.satisfied = true; break;
      case OnMissing::skip: r.skipped = true; break;
    }
  } catch (const EvalError& e) {
    r.satisfied = false;
    r.detail = e.what();
  }
  return r;
}

/// Fraction of counted results satisfied; 1 for an empty set.
inline double compliance_ratio(std::span<const ConstraintResult> results, Severity sev) {
  std::size_t total = 0, ok = 0;
  for (const auto& r : results) {
    if (r.severity != sev || r.skipped) continue;
    ++total;
    if (r.satisfied) ++ok;
  }
  return total == 0 ? 1.0 : static_cast<double>(ok) / static_cast<double>(total);
}

inline void score(StepEvaluation& ev) {
  ev.c_hard = compliance_ratio(ev.results, Severity::hard);
  ev.c_soft = compliance_ratio(ev.results, Severity::soft);
}

/// Evaluates every invariant on the state and every governance constraint
/// on the action at step t. Governance is skipped when there is no action
/// (the terminal state). Preconditions are evaluated only at t = 0.
inline StepEvaluation evaluate_step(const Contract& c, const StateDict& state, const ActionRecord* action,
                                    std::size_t t, const StageSchedule* schedule = nullptr) {
  StepEvaluation ev;
  ev.step = t;
  ev.has_action = action != nullptr;
  EvalView view(state, action);
  for (const auto* k : c.step_constraints()) {
    if (schedule && !schedule->active(*k, t)) {
      ev.results.push_back({k->name, k->section, k->severity, k->weight, true, true, std::string("inactive phase")});
      continue;
    }
    if (k->section == Section::governance && !action) {
      ev.results.push_back({k->name, k->section, k->severity, k->weight, true, true, std::string("no action at this step")});
      continue;
    }
    ev.results.push_back(evaluate_constraint(*k, view));
  }
  if (t == 0) {
    EvalView initial(state, nullptr);
    for (const auto& p : c.preconditions) ev.preconditions.push_back(evaluate_constraint(p, initial));
  }
  score(ev);
  return ev;
}

inline StepEvaluation evaluate_step(const Contract& c, const StateDict& state, const std::optional<ActionRecord>& action,
                                    std::size_t t, const StageSchedule* schedule = nullptr) {
  return evaluate_step(c, state, action ? &*action : nullptr, t, schedule);
}

/// Evaluates s_0..s_T of a trace (a_t paired with s_t for t < T).
inline std::vector<StepEvaluation> evaluate_trace(const Contract& c, const ExecutionTrace& trace,
                                                  const StageSchedule* schedule = nullptr) {
  trace.validate();
  std::vector<StepEvaluation> out;
  out.reserve(trace.states.size());
  for (std::size_t t = 0; t < trace.states.size(); ++t)
    out.push_back(evaluate_step(c, trace.states[t], t < trace.actions.size() ? &trace.actions[t] : nullptr, t, schedule));
  return out;
}

// ---------------------------------------------------------------------------
// Deterministic satisfaction

struct VerdictWitness {
  std::size_t step = 0;
  std::string constraint;
  std::string reason;

  bool operator==(const VerdictWitness&) const = default;
};

struct SatisfactionVerdict {
  bool preconditions_ok = true;
  bool invariants_ok = true;
  bool governance_ok = true;
  bool recoverability_ok = true;
  bool overall = true;
  std::vector<VerdictWitness> witnesses;

  bool operator==(const SatisfactionVerdict&) const = default;
};

/// Applies the four satisfaction conditions to per-step evaluations.
/// Invariant and governance compliance quantify over hard constraints (a
/// single breach is a contract breach); soft constraints are judged by
/// recoverability: each soft violation at t must be followed by the same
/// constraint holding at some t' in [t, min(t+k, T)].
inline SatisfactionVerdict verdict_from_evaluations(const Contract& c, std::span<const StepEvaluation> evals) {
  SatisfactionVerdict v;
  if (evals.empty()) return v;
  const std::size_t T = evals.size() - 1;
  const std::size_t k = c.satisfaction.k;

  for (const auto& p : evals.front().preconditions) {
    if (p.violated()) {
      v.preconditions_ok = false;
      v.witnesses.push_back({0, p.name, "precondition violated"});
    }
  }
  for (const auto& ev : evals) {
    for (std::size_t i = 0; i < ev.results.size(); ++i) {
      const auto& r = ev.results[i];
      if (!r.violated()) continue;
      if (r.severity == Severity::hard) {
        (r.section == Section::invariant ? v.invariants_ok : v.governance_ok) = false;
        v.witnesses.push_back({ev.step, r.name, "hard constraint violated"});
        continue;
      }
      bool recovered = false;
      for (std::size_t u = ev.step; u <= std::min(ev.step + k, T) && !recovered; ++u) {
        const auto& later = evals[u].results[i];
        recovered = !later.skipped && later.satisfied;
      }
      if (!recovered) {
        v.recoverability_ok = false;
        v.witnesses.push_back({ev.step, r.name, "soft violation not recovered within k"});
      }
    }
  }
  v.overall = v.preconditions_ok && v.invariants_ok && v.governance_ok && v.recoverability_ok;
  return v;
}

inline SatisfactionVerdict check_deterministic(const Contract& c, const ExecutionTrace& trace,
                                               const StageSchedule* schedule = nullptr) {
  auto evals = evaluate_trace(c, trace, schedule);
  return verdict_from_evaluations(c, evals);
}

enum class Outcome { compliant, hard_violation, soft_violation };

inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::compliant: return "compliant";
    case Outcome::hard_violation: return "hard_violation";
    case Outcome::soft_violation: return "soft_violation";
  }
  return "?";
}

inline std::optional<Outcome> outcome_from_string(std::string_view s) {
  if (s == "compliant") return Outcome::compliant;
  if (s == "hard_violation") return Outcome::hard_violation;
  if (s == "soft_violation") return Outcome::soft_violation;
  return std::nullopt;
}

/// Anything that breaks the contract (precondition, hard constraint, or an
/// unrecovered soft violation) is a hard violation; recovered soft
/// violations are soft violations.
inline Outcome outcome_from(const SatisfactionVerdict& v, std::span<const StepEvaluation> evals) {
  if (!v.overall) return Outcome::hard_violation;
  for (const auto& ev : evals)
    for (const auto& r : ev.results)
      if (r.violated()) return Outcome::soft_violation;
  return Outcome::compliant;
}

inline Outcome classify_outcome(const Contract& c, const ExecutionTrace& trace, const StageSchedule* schedule = nullptr) {
  auto evals = evaluate_trace(c, trace, schedule);
  return outcome_from(verdict_from_evaluations(c, evals), evals);
}

}  // namespace abc
