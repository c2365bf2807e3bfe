#pragma once

// Serial composition of agent contracts, composition conditions C1-C4 over
// witness corpora, chain bounds and phase-scoped chain verification.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "abc/eval.hpp"
#include "abc/monitor.hpp"

namespace abc {

// ---------------------------------------------------------------------------
// Handoffs

/// Scalar kinds used by the type map: number, integer, string, boolean,
/// list, object, any.
inline std::string value_kind(const nlohmann::json& v) {
  if (v.is_boolean()) return "boolean";
  if (v.is_number_integer() || v.is_number_unsigned()) return "integer";
  if (v.is_number()) return "number";
  if (v.is_string()) return "string";
  if (v.is_array()) return "list";
  if (v.is_object()) return "object";
  return "null";
}

inline bool kind_compatible(std::string_view produced, std::string_view required) {
  if (required == "any" || produced == required) return true;
  return produced == "integer" && required == "number";
}

inline bool known_kind(std::string_view k) {
  for (auto x : {"number", "integer", "string", "boolean", "list", "object", "any"})
    if (k == x) return true;
  return false;
}

struct FieldMapping {
  std::string upstream;    // field produced by the upstream agent
  std::string downstream;  // field the downstream agent reads
  std::string kind = "any";

  bool operator==(const FieldMapping&) const = default;
};

struct HandoffSpec {
  std::vector<Constraint> invariants;      // I_handoff
  std::vector<FieldMapping> type_map;
  std::map<std::string, std::string> produces;  // upstream output field -> kind
  double p_h = 1.0;
  double delta_h = 0.0;

  void validate() const {
    if (!(p_h >= 0.0 && p_h <= 1.0)) throw InvalidArgument("handoff p must lie in [0, 1]");
    if (!(delta_h >= 0.0 && delta_h <= 1.0)) throw InvalidArgument("handoff delta must lie in [0, 1]");
  }
  bool operator==(const HandoffSpec&) const = default;
};

namespace detail {
inline std::string strip_state(std::string_view f) {
  if (f.rfind("state.", 0) == 0) f.remove_prefix(6);
  return std::string(f);
}
}  // namespace detail

/// Downstream view of an upstream terminal state: the state itself with
/// every mapped field copied to its downstream path.
inline StateDict handoff_state(const StateDict& s, const HandoffSpec& h) {
  StateDict out = s;
  for (const auto& m : h.type_map) {
    const auto* v = walk(s, split_path(detail::strip_state(m.upstream)));
    if (v) assign_path(out, detail::strip_state(m.downstream), *v);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Composed contract

namespace detail {

inline std::string shifted_origin(const std::string& origin, std::size_t offset) {
  if (origin.rfind("handoff:", 0) != 0) return origin;
  return "handoff:" + std::to_string(std::stoul(origin.substr(8)) + offset);
}

inline std::vector<std::string> stage_names(const Contract& c, const std::string& id) {
  return c.stages.empty() ? std::vector<std::string>{id} : c.stages;
}

inline std::set<std::string> constraint_names(const Contract& c) {
  std::set<std::string> out;
  for (const auto* k : c.all_constraints()) out.insert(k->name);
  return out;
}

// Renames colliding constraints and strategies of one side, keeping its
// recovery references consistent.
inline void rename_side(Contract& c, const std::set<std::string>& clash_constraints,
                        const std::set<std::string>& clash_strategies, const std::string& id) {
  auto prefix_for = [&](const Constraint& k) { return (k.origin.empty() || k.origin.rfind("handoff:", 0) == 0 ? id : k.origin) + "/"; };
  for (auto* group : {&c.preconditions, &c.invariants_hard, &c.invariants_soft, &c.governance_hard, &c.governance_soft}) {
    for (auto& k : *group) {
      if (clash_constraints.count(k.name)) k.name = prefix_for(k) + k.name;
      if (k.recovery && clash_strategies.count(*k.recovery)) k.recovery = id + "/" + *k.recovery;
    }
  }
  for (auto& s : c.recovery_strategies) {
    if (clash_strategies.count(s.name)) s.name = id + "/" + s.name;
    if (s.fallback && clash_strategies.count(*s.fallback)) s.fallback = id + "/" + *s.fallback;
  }
}

inline DriftConfig merge_drift(const DriftConfig& a, const DriftConfig& b) {
  DriftConfig out = a;
  for (const auto& l : b.vocabulary)
    if (std::find(out.vocabulary.begin(), out.vocabulary.end(), l) == out.vocabulary.end()) out.vocabulary.push_back(l);
  if (a.reference.empty() && b.reference.empty()) return out;
  // Equal-weight mixture of the two references over the merged vocabulary.
  out.reference.clear();
  for (const auto* side : {&a, &b}) {
    const auto sup = side->support();
    const auto vec = side->reference_vector();
    for (std::size_t i = 0; i < sup.size(); ++i)
      if (vec[i] > 0.0) out.reference[sup[i]] += 0.5 * vec[i];
  }
  return out;
}

}  // namespace detail

/// A then B. P = P_A; invariants are the union tagged with their owning
/// stage; handoff invariants are tagged "handoff:<i>" for the boundary they
/// guard; governance is the union; k = max(k_A, k_B); p and delta combine
/// as p_A p_B p_h and min(1, delta_A + delta_B + delta_h).
inline Contract compose_contracts(const Contract& a_in, const Contract& b_in, const HandoffSpec& h, std::string id_a = {},
                                  std::string id_b = {}) {
  if (id_a.empty()) id_a = a_in.name;
  if (id_b.empty()) id_b = b_in.name;
  Contract a = a_in, b = b_in;

  const auto stages_a = detail::stage_names(a, id_a);
  const auto stages_b = detail::stage_names(b, id_b);
  for (auto* group : {&a.invariants_hard, &a.invariants_soft, &a.governance_hard, &a.governance_soft, &a.preconditions})
    for (auto& k : *group)
      if (k.origin.empty()) k.origin = id_a;
  for (auto* group : {&b.invariants_hard, &b.invariants_soft, &b.governance_hard, &b.governance_soft, &b.preconditions})
    for (auto& k : *group) k.origin = k.origin.empty() ? id_b : detail::shifted_origin(k.origin, stages_a.size());

  b.preconditions.clear();  // P = P_A
  std::set<std::string> clash, clash_s;
  {
    const auto na = detail::constraint_names(a), nb = detail::constraint_names(b);
    std::set_intersection(na.begin(), na.end(), nb.begin(), nb.end(), std::inserter(clash, clash.end()));
    std::set<std::string> sa, sb;
    for (const auto& s : a.recovery_strategies) sa.insert(s.name);
    for (const auto& s : b.recovery_strategies) sb.insert(s.name);
    std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::inserter(clash_s, clash_s.end()));
  }
  detail::rename_side(a, clash, clash_s, id_a);
  detail::rename_side(b, clash, clash_s, id_b);

  Contract c;
  c.version = a.version;
  c.kind = ContractKind::pipeline;
  c.name = a.name + "+" + b.name;
  c.description = a.description;
  c.preconditions = a.preconditions;
  c.invariants_hard = a.invariants_hard;
  c.invariants_soft = a.invariants_soft;
  c.invariants_hard.insert(c.invariants_hard.end(), b.invariants_hard.begin(), b.invariants_hard.end());
  c.invariants_soft.insert(c.invariants_soft.end(), b.invariants_soft.begin(), b.invariants_soft.end());

  auto taken = detail::constraint_names(a);
  for (const auto& n : detail::constraint_names(b)) taken.insert(n);
  const std::string boundary = "handoff:" + std::to_string(stages_a.size() - 1);
  for (auto k : h.invariants) {
    if (taken.count(k.name)) k.name = "handoff" + std::to_string(stages_a.size() - 1) + "/" + k.name;
    k.section = Section::invariant;
    k.origin = boundary;
    (k.severity == Severity::hard ? c.invariants_hard : c.invariants_soft).push_back(std::move(k));
  }

  c.governance_hard = a.governance_hard;
  c.governance_hard.insert(c.governance_hard.end(), b.governance_hard.begin(), b.governance_hard.end());
  c.governance_soft = a.governance_soft;
  c.governance_soft.insert(c.governance_soft.end(), b.governance_soft.begin(), b.governance_soft.end());
  c.recovery_strategies = a.recovery_strategies;
  c.recovery_strategies.insert(c.recovery_strategies.end(), b.recovery_strategies.begin(), b.recovery_strategies.end());

  c.satisfaction.p = a.satisfaction.p * b.satisfaction.p * h.p_h;
  c.satisfaction.delta = std::min(1.0, a.satisfaction.delta + b.satisfaction.delta + h.delta_h);
  c.satisfaction.k = std::max(a.satisfaction.k, b.satisfaction.k);
  c.drift = detail::merge_drift(a.drift, b.drift);
  c.reliability = a.reliability;
  c.stages = stages_a;
  c.stages.insert(c.stages.end(), stages_b.begin(), stages_b.end());
  return c;
}

// ---------------------------------------------------------------------------
// Composition conditions

struct ActionSample {
  StateDict state = StateDict::object();
  ActionRecord action;
};

struct CompositionSamples {
  std::vector<StateDict> terminal_states;   // A's reachable terminal states
  std::vector<ActionSample> actions;        // action corpus for C3
  std::vector<StateDict> recovered_states;  // A's states after recovery
};

struct ConditionResult {
  bool pass = true;
  std::vector<nlohmann::json> witnesses;
  std::string note;
};

struct ConditionReport {
  ConditionResult c1, c2, c3, c4;
  bool c5_assumed = false;

  bool all_pass() const { return c1.pass && c2.pass && c3.pass && c4.pass; }
  const ConditionResult& at(int i) const {
    switch (i) {
      case 1: return c1;
      case 2: return c2;
      case 3: return c3;
      default: return c4;
    }
  }
  std::vector<std::string> failed() const {
    std::vector<std::string> out;
    for (int i = 1; i <= 4; ++i)
      if (!at(i).pass) out.push_back("C" + std::to_string(i));
    return out;
  }
};

namespace detail {

inline bool holds_all(const std::vector<Constraint>& cs, const StateDict& s, const ActionRecord* a = nullptr,
                      std::optional<Severity> only = std::nullopt, std::string* failing = nullptr) {
  EvalView view(s, a);
  for (const auto& c : cs) {
    if (only && c.severity != *only) continue;
    auto r = evaluate_constraint(c, view);
    if (r.violated()) {
      if (failing) *failing = c.name;
      return false;
    }
  }
  return true;
}

inline std::vector<Constraint> governance_of(const Contract& c) {
  auto g = c.governance_hard;
  g.insert(g.end(), c.governance_soft.begin(), c.governance_soft.end());
  return g;
}

// Allowed by `allow` (every governance constraint holds) but prohibited by
// `deny` (some hard governance constraint fails).
inline std::optional<std::string> conflict(const std::vector<Constraint>& allow, const std::vector<Constraint>& deny,
                                           const ActionSample& s) {
  if (!holds_all(allow, s.state, &s.action)) return std::nullopt;
  std::string failing;
  if (holds_all(deny, s.state, &s.action, Severity::hard, &failing)) return std::nullopt;
  return failing;
}

// Values a structured eq/in/range check admits, as candidate witnesses.
inline std::vector<nlohmann::json> admitted_values(const FieldCheck& f) {
  switch (f.op) {
    case Operator::eq: return {f.operand};
    case Operator::in:
      if (f.operand.is_array()) return std::vector<nlohmann::json>(f.operand.begin(), f.operand.end());
      return {};
    case Operator::range:
      if (f.operand.is_array() && f.operand.size() == 2 && f.operand[0].is_number() && f.operand[1].is_number()) {
        const double lo = f.operand[0].get<double>(), hi = f.operand[1].get<double>();
        return {lo, hi, 0.5 * (lo + hi)};
      }
      return {};
    default: return {};
  }
}

inline ActionSample sample_with(const std::string& field, const nlohmann::json& v) {
  ActionSample s;
  s.action.label = "";
  auto parts = split_path(field);
  if (parts.size() == 2 && parts[0] == "action" && parts[1] == "label") {
    if (v.is_string()) s.action.label = v.get<std::string>();
  } else if (!parts.empty() && parts[0] == "action") {
    assign_path(s.action.payload, field.substr(7), v);
  } else {
    assign_path(s.state, strip_state(field), v);
  }
  return s;
}

// Symbolic pass: pairs of eq/in/range checks on the same field propose
// candidate values admitted by one side; each is confirmed by evaluation.
inline void symbolic_conflicts(const std::vector<Constraint>& allow, const std::vector<Constraint>& deny,
                               const std::string& allow_name, const std::string& deny_name, ConditionResult& out,
                               std::set<std::string>& seen) {
  for (const auto& ga : allow) {
    const auto* fa = ga.check.as_field();
    if (!fa) continue;
    for (const auto& gb : deny) {
      const auto* fb = gb.check.as_field();
      if (!fb || gb.severity != Severity::hard || fb->field != fa->field) continue;
      for (const auto& v : admitted_values(*fa)) {
        auto s = sample_with(fa->field, v);
        auto hit = conflict(allow, deny, s);
        if (!hit) continue;
        const std::string key = allow_name + deny_name + fa->field + v.dump();
        if (!seen.insert(key).second) continue;
        out.pass = false;
        out.witnesses.push_back({{"field", fa->field},
                                 {"value", v},
                                 {"action", s.action.label},
                                 {"allowed_by", allow_name},
                                 {"prohibited_by", deny_name},
                                 {"constraint", *hit},
                                 {"source", "symbolic"}});
      }
    }
  }
}

}  // namespace detail

/// C1 static interface check; C2/C4 over witness states; C3 over the action
/// corpus (both directions) plus a symbolic pass. `hook` optionally supplies
/// A's recovery corrections for C4.
inline ConditionReport check_conditions(const Contract& a, const Contract& b, const HandoffSpec& h,
                                        const CompositionSamples& samples, const RecoveryHook& hook = {}) {
  if (samples.terminal_states.empty()) throw InsufficientSamples("C2 needs at least one terminal witness state");
  ConditionReport rep;

  // C1: every mapped field produced upstream with a compatible kind, and
  // every field B's preconditions read is delivered by the map.
  for (const auto& m : h.type_map) {
    const auto up = detail::strip_state(m.upstream);
    auto it = h.produces.find(up);
    if (it == h.produces.end()) {
      rep.c1.pass = false;
      rep.c1.witnesses.push_back({{"field", up}, {"downstream", m.downstream}, {"reason", "not produced upstream"}});
    } else if (!kind_compatible(it->second, m.kind)) {
      rep.c1.pass = false;
      rep.c1.witnesses.push_back({{"field", up}, {"produced", it->second}, {"required", m.kind}, {"reason", "kind mismatch"}});
    }
  }
  for (const auto& p : b.preconditions) {
    for (const auto& f : p.check.fields()) {
      if (f.rfind("action.", 0) == 0) continue;
      const auto need = detail::strip_state(f);
      bool mapped = std::any_of(h.type_map.begin(), h.type_map.end(),
                                [&](const FieldMapping& m) { return detail::strip_state(m.downstream) == need; });
      if (!mapped) {
        rep.c1.pass = false;
        rep.c1.witnesses.push_back({{"field", need}, {"precondition", p.name}, {"reason", "required downstream but not mapped"}});
      }
    }
  }

  // C2: PostCond_A and I_handoff entail P_B on every witness.
  std::vector<Constraint> post_a = a.invariants_hard;
  std::size_t considered = 0;
  for (std::size_t i = 0; i < samples.terminal_states.size(); ++i) {
    const auto& s = samples.terminal_states[i];
    if (!detail::holds_all(post_a, s) || !detail::holds_all(h.invariants, s)) continue;
    ++considered;
    std::string failing;
    if (!detail::holds_all(b.preconditions, handoff_state(s, h), nullptr, std::nullopt, &failing)) {
      rep.c2.pass = false;
      rep.c2.witnesses.push_back({{"sample", i}, {"precondition", failing}, {"state", s}});
    }
  }
  if (considered == 0) rep.c2.note = "no witness satisfied the postcondition and handoff invariant";

  // C3: no action allowed by one side's governance and prohibited by the other's.
  const auto ga = detail::governance_of(a), gb = detail::governance_of(b);
  std::set<std::string> seen;
  for (std::size_t i = 0; i < samples.actions.size(); ++i) {
    const auto& s = samples.actions[i];
    for (int dir = 0; dir < 2; ++dir) {
      const auto& allow = dir == 0 ? ga : gb;
      const auto& deny = dir == 0 ? gb : ga;
      if (auto hit = detail::conflict(allow, deny, s)) {
        const std::string key = std::to_string(dir) + "#" + std::to_string(i);
        if (!seen.insert(key).second) continue;
        rep.c3.pass = false;
        rep.c3.witnesses.push_back({{"action", s.action.label},
                                    {"sample", i},
                                    {"allowed_by", dir == 0 ? a.name : b.name},
                                    {"prohibited_by", dir == 0 ? b.name : a.name},
                                    {"constraint", *hit},
                                    {"source", "corpus"}});
      }
    }
  }
  detail::symbolic_conflicts(ga, gb, a.name, b.name, rep.c3, seen);
  detail::symbolic_conflicts(gb, ga, b.name, a.name, rep.c3, seen);

  // C4: states left by A's recovery still satisfy P_B.
  auto check_recovered = [&](const StateDict& s, nlohmann::json where) {
    std::string failing;
    if (!detail::holds_all(b.preconditions, handoff_state(s, h), nullptr, std::nullopt, &failing)) {
      rep.c4.pass = false;
      where["precondition"] = failing;
      where["state"] = s;
      rep.c4.witnesses.push_back(std::move(where));
    }
  };
  for (std::size_t i = 0; i < samples.recovered_states.size(); ++i) check_recovered(samples.recovered_states[i], {{"sample", i}});
  std::size_t hook_states = 0;
  if (hook) {
    for (std::size_t i = 0; i < samples.terminal_states.size(); ++i) {
      for (const auto* c : a.step_constraints()) {
        if (!c->recovery) continue;
        const auto* strat = a.find_strategy(*c->recovery);
        if (!strat) continue;
        auto fix = hook(RecoveryRequest{*strat, *c, samples.terminal_states[i], nullptr, 0, 1});
        if (!fix) continue;
        ++hook_states;
        check_recovered(fix->state, {{"sample", i}, {"strategy", strat->name}, {"constraint", c->name}});
      }
    }
  }
  if (samples.recovered_states.empty() && hook_states == 0) rep.c4.note = "no recovered states supplied";
  return rep;
}

// ---------------------------------------------------------------------------
// Chain bounds

struct ChainAgent {
  std::string name;
  double p = 1.0;
  double delta = 0.0;
};

struct ChainHandoff {
  double p_h = 1.0;
  double delta_h = 0.0;
};

struct ChainSpec {
  std::vector<ChainAgent> agents;
  std::vector<ChainHandoff> handoffs;
  bool conditional_independence_assumed = true;  // C5
};

struct ChainBounds {
  double p_chain = 1.0;
  double delta_chain = 0.0;
  std::optional<double> p_frechet;  // reported when C5 is not assumed
};

/// p_chain = prod p_i prod p_h, delta_chain = min(1, sum delta_i + sum delta_h).
/// Without C5 also folds p <- max(0, p + p_i p_h - 1) left to right.
inline ChainBounds chain_bounds(const ChainSpec& spec) {
  if (spec.agents.empty()) throw EmptyInput("chain needs at least one agent");
  if (spec.handoffs.size() + 1 != spec.agents.size())
    throw DimensionMismatch("a chain of " + std::to_string(spec.agents.size()) + " agents needs " +
                            std::to_string(spec.agents.size() - 1) + " handoffs");
  ChainBounds b;
  double delta = 0.0;
  for (const auto& a : spec.agents) {
    b.p_chain *= a.p;
    delta += a.delta;
  }
  for (const auto& h : spec.handoffs) {
    b.p_chain *= h.p_h;
    delta += h.delta_h;
  }
  b.delta_chain = std::min(1.0, delta);
  if (!spec.conditional_independence_assumed) {
    double acc = spec.agents.front().p;
    for (std::size_t i = 1; i < spec.agents.size(); ++i) acc = std::max(0.0, acc + spec.agents[i].p * spec.handoffs[i - 1].p_h - 1.0);
    b.p_frechet = acc;
  }
  return b;
}

/// Phase-scoped deterministic check of a composed contract.
inline SatisfactionVerdict verify_chain_trace(const Contract& composed, const ExecutionTrace& trace) {
  trace.validate();
  StageSchedule sched(composed.stages, trace.stage_ends);
  sched.check_against(trace.length());
  return check_deterministic(composed, trace, sched.empty() ? nullptr : &sched);
}

/// Cascade recovery: run the local strategy; at a stage boundary re-check
/// the downstream preconditions on the corrected state and, when they fail,
/// escalate once to the downstream agent's first strategy.
inline RecoveryHook cascade_hook(RecoveryHook local, std::vector<std::size_t> boundaries,
                                 std::vector<std::vector<Constraint>> downstream_preconditions,
                                 std::vector<std::optional<RecoveryStrategy>> downstream_entry) {
  return [=](const RecoveryRequest& req) -> std::optional<Correction> {
    auto fix = local(req);
    if (!fix) return fix;
    auto it = std::find(boundaries.begin(), boundaries.end(), req.step);
    if (it == boundaries.end()) return fix;
    const auto i = static_cast<std::size_t>(it - boundaries.begin());
    if (i >= downstream_preconditions.size() || detail::holds_all(downstream_preconditions[i], fix->state)) return fix;
    if (i >= downstream_entry.size() || !downstream_entry[i]) return std::nullopt;
    auto escalated = local(RecoveryRequest{*downstream_entry[i], req.constraint, fix->state, req.action, req.step, 1});
    if (escalated && detail::holds_all(downstream_preconditions[i], escalated->state)) return escalated;
    return std::nullopt;
  };
}

// ---------------------------------------------------------------------------
// Pipelines

struct PipelineStage {
  std::string name;
  std::string contract_path;
  Contract contract;
};

struct PipelineHandoff {
  std::string from;
  std::string to;
  HandoffSpec spec;
};

struct PipelineSpec {
  std::string name;
  std::string description;
  std::vector<PipelineStage> stages;
  std::vector<PipelineHandoff> handoffs;  // one per adjacent stage pair, in order
  std::vector<Constraint> governance_hard;
  std::vector<Constraint> governance_soft;
  std::optional<SatisfactionParams> satisfaction;
  std::string coordination = "cascade";
  bool conditional_independence_assumed = true;

  ChainSpec chain() const {
    ChainSpec c;
    for (const auto& s : stages) c.agents.push_back({s.name, s.contract.satisfaction.p, s.contract.satisfaction.delta});
    for (const auto& h : handoffs) c.handoffs.push_back({h.spec.p_h, h.spec.delta_h});
    c.conditional_independence_assumed = conditional_independence_assumed;
    return c;
  }
};

/// Folds the stages left to right and adds pipeline-level governance.
inline Contract compose_pipeline(const PipelineSpec& p) {
  if (p.stages.empty()) throw EmptyInput("pipeline has no stages");
  if (p.handoffs.size() + 1 != p.stages.size()) throw DimensionMismatch("pipeline needs one handoff per adjacent stage pair");
  Contract acc = p.stages.front().contract;
  acc.stages = {p.stages.front().name};
  for (auto* group : {&acc.preconditions, &acc.invariants_hard, &acc.invariants_soft, &acc.governance_hard, &acc.governance_soft})
    for (auto& k : *group) k.origin = p.stages.front().name;
  for (std::size_t i = 1; i < p.stages.size(); ++i)
    acc = compose_contracts(acc, p.stages[i].contract, p.handoffs[i - 1].spec, p.stages[i - 1].name, p.stages[i].name);
  acc.name = p.name;
  if (!p.description.empty()) acc.description = p.description;
  auto names = detail::constraint_names(acc);
  for (const auto* group : {&p.governance_hard, &p.governance_soft}) {
    for (auto k : *group) {
      if (names.count(k.name)) k.name = "pipeline/" + k.name;
      k.section = Section::governance;
      k.origin = "pipeline";
      (k.severity == Severity::hard ? acc.governance_hard : acc.governance_soft).push_back(std::move(k));
    }
  }
  if (p.satisfaction) acc.satisfaction = *p.satisfaction;
  return acc;
}

struct PipelineConditionReport {
  std::vector<std::pair<std::string, ConditionReport>> handoffs;  // "from->to"
  ConditionResult governance;  // stage governance vs pipeline governance (C3)
  ChainBounds bounds;

  bool all_pass() const {
    return governance.pass && std::all_of(handoffs.begin(), handoffs.end(), [](const auto& h) { return h.second.all_pass(); });
  }
};

/// Conditions for every adjacent pair plus C3 of each stage against the
/// pipeline-level governance. samples[i] are the witnesses for handoff i.
inline PipelineConditionReport check_pipeline(const PipelineSpec& p, const std::vector<CompositionSamples>& samples,
                                              const RecoveryHook& hook = {}) {
  if (samples.size() != p.handoffs.size()) throw DimensionMismatch("need one witness set per handoff");
  PipelineConditionReport out;
  for (std::size_t i = 0; i < p.handoffs.size(); ++i) {
    auto rep = check_conditions(p.stages[i].contract, p.stages[i + 1].contract, p.handoffs[i].spec, samples[i], hook);
    rep.c5_assumed = p.conditional_independence_assumed;
    out.handoffs.emplace_back(p.stages[i].name + "->" + p.stages[i + 1].name, std::move(rep));
  }
  auto pipe_gov = p.governance_hard;
  pipe_gov.insert(pipe_gov.end(), p.governance_soft.begin(), p.governance_soft.end());
  if (!pipe_gov.empty()) {
    std::set<std::string> seen;
    for (std::size_t si = 0; si < p.stages.size(); ++si) {
      const auto g = detail::governance_of(p.stages[si].contract);
      for (const auto& smp : samples)
        for (std::size_t i = 0; i < smp.actions.size(); ++i)
          if (auto hit = detail::conflict(g, pipe_gov, smp.actions[i])) {
            if (!seen.insert(p.stages[si].name + "#" + smp.actions[i].action.label).second) continue;
            out.governance.pass = false;
            out.governance.witnesses.push_back({{"action", smp.actions[i].action.label},
                                                {"allowed_by", p.stages[si].name},
                                                {"prohibited_by", "pipeline"},
                                                {"constraint", *hit},
                                                {"source", "corpus"}});
          }
      detail::symbolic_conflicts(g, pipe_gov, p.stages[si].name, "pipeline", out.governance, seen);
    }
  }
  out.bounds = chain_bounds(p.chain());
  return out;
}

}  // namespace abc
