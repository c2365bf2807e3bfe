#pragma once

// Randomized instances with ground truth computed independently of the engine:
// small contracts + traces for the satisfaction oracle, and serial chains
// built to satisfy every composition condition.

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "support/fixtures.hpp"

namespace gen_test {

using namespace abc;
using nlohmann::json;
using Rng = std::mt19937_64;

inline double uniform(Rng& r, double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(r); }
inline bool coin(Rng& r, double p = 0.5) { return std::bernoulli_distribution(p)(r); }
inline std::size_t pick(Rng& r, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(r); }

// ---------------------------------------------------------------------------
// Satisfaction oracle instances

struct OracleConstraint {
  enum Kind { state_ge, label_not_in, cost_le } kind = state_ge;
  std::string field;  // state key for state_ge
  double thr = 0.0;
  std::vector<std::string> labels;
  Section section = Section::invariant;
  Severity severity = Severity::hard;
  OnMissing missing = OnMissing::violate;
};

struct OracleInstance {
  std::vector<OracleConstraint> spec;
  Contract contract;
  ExecutionTrace trace;
};

struct OracleVerdict {
  bool pre = true, inv = true, gov = true, rec = true;
  bool overall() const { return pre && inv && gov && rec; }
};

inline OracleInstance make_oracle_instance(Rng& rng) {
  static const std::vector<std::string> labels{"a", "b", "c", "d", "e"};
  OracleInstance in;
  const std::size_t n = 1 + pick(rng, 6);
  for (std::size_t i = 0; i < n; ++i) {
    OracleConstraint oc;
    const double r = uniform(rng);
    if (r < 0.15) {
      oc.section = Section::precondition;
      oc.severity = Severity::hard;
    } else {
      oc.section = r < 0.6 ? Section::invariant : Section::governance;
      oc.severity = coin(rng) ? Severity::hard : Severity::soft;
    }
    oc.missing = static_cast<OnMissing>(pick(rng, 3));
    oc.thr = uniform(rng, 0.0, 0.6);
    if (oc.section == Section::governance) {
      oc.kind = coin(rng) ? OracleConstraint::label_not_in : OracleConstraint::cost_le;
      for (const auto& l : labels)
        if (coin(rng, 0.3)) oc.labels.push_back(l);
    } else {
      oc.field = "v" + std::to_string(pick(rng, 4));
    }
    in.spec.push_back(oc);

    Constraint c;
    c.name = "c" + std::to_string(i);
    c.section = oc.section;
    c.severity = oc.severity;
    c.on_missing = oc.missing;
    switch (oc.kind) {
      case OracleConstraint::state_ge: c.check = Predicate::field(oc.field, Operator::ge, oc.thr); break;
      case OracleConstraint::label_not_in: c.check = Predicate::field("action.label", Operator::not_in, oc.labels); break;
      case OracleConstraint::cost_le: c.check = Predicate::expression("action.cost <= " + std::to_string(oc.thr)); break;
    }
    if (oc.section == Section::precondition) in.contract.preconditions.push_back(c);
    else if (oc.section == Section::invariant)
      (oc.severity == Severity::hard ? in.contract.invariants_hard : in.contract.invariants_soft).push_back(c);
    else
      (oc.severity == Severity::hard ? in.contract.governance_hard : in.contract.governance_soft).push_back(c);
  }
  // the DSL form of cost_le prints the threshold with limited digits; keep
  // the oracle on the same number
  for (auto& oc : in.spec)
    if (oc.kind == OracleConstraint::cost_le) oc.thr = std::stod(std::to_string(oc.thr));
  in.contract.name = "oracle";
  in.contract.satisfaction.k = pick(rng, 5);

  const std::size_t T = pick(rng, 9);
  for (std::size_t t = 0; t <= T; ++t) {
    json s = json::object();
    for (int j = 0; j < 4; ++j)
      if (coin(rng, 0.85)) s["v" + std::to_string(j)] = uniform(rng);
    in.trace.states.push_back(s);
    if (t < T) {
      ActionRecord a{labels[pick(rng, labels.size())], json::object()};
      if (coin(rng, 0.8)) a.payload["cost"] = uniform(rng);
      in.trace.actions.push_back(a);
    }
  }
  return in;
}

// nullopt: not counted at this step
inline std::optional<bool> oracle_sat(const OracleConstraint& c, const ExecutionTrace& tr, std::size_t t) {
  auto missing = [&]() -> std::optional<bool> {
    if (c.missing == OnMissing::skip) return std::nullopt;
    return c.missing == OnMissing::satisfy;
  };
  if (c.kind == OracleConstraint::state_ge) {
    const auto& s = tr.states[t];
    if (!s.contains(c.field)) return missing();
    return s[c.field].get<double>() >= c.thr;
  }
  if (t >= tr.actions.size()) return std::nullopt;
  const auto& a = tr.actions[t];
  if (c.kind == OracleConstraint::label_not_in)
    return std::find(c.labels.begin(), c.labels.end(), a.label) == c.labels.end();
  if (!a.payload.contains("cost")) return missing();
  return a.payload["cost"].get<double>() <= c.thr;
}

inline OracleVerdict oracle_verdict(const OracleInstance& in) {
  OracleVerdict v;
  const std::size_t T = in.trace.actions.size();
  const std::size_t k = in.contract.satisfaction.k;
  for (const auto& c : in.spec) {
    if (c.section == Section::precondition) {
      auto s = oracle_sat(c, in.trace, 0);
      if (s && !*s) v.pre = false;
      continue;
    }
    for (std::size_t t = 0; t <= T; ++t) {
      auto s = oracle_sat(c, in.trace, t);
      if (!s || *s) continue;
      if (c.severity == Severity::hard) {
        (c.section == Section::invariant ? v.inv : v.gov) = false;
        continue;
      }
      bool back = false;
      for (std::size_t u = t; u <= std::min(t + k, T); ++u) {
        auto later = oracle_sat(c, in.trace, u);
        back = back || (later && *later);
      }
      if (!back) v.rec = false;
    }
  }
  return v;
}

// fraction of counted constraints of one severity holding at t
inline double oracle_ratio(const OracleInstance& in, std::size_t t, Severity sev) {
  int total = 0, ok = 0;
  for (const auto& c : in.spec) {
    if (c.section == Section::precondition || c.severity != sev) continue;
    auto s = oracle_sat(c, in.trace, t);
    if (!s) continue;
    ++total;
    ok += *s;
  }
  return total ? double(ok) / total : 1.0;
}

// ---------------------------------------------------------------------------
// Serial chains

struct ChainCase {
  PipelineSpec pipeline;
  ExecutionTrace trace;  // with stage_ends
  std::vector<ExecutionTrace> segments;
  std::vector<CompositionSamples> samples;  // one per handoff
  std::vector<double> handoff_threshold;    // th for in_{i+1}
};

inline const std::vector<std::string>& chain_labels() {
  static const std::vector<std::string> l{"l0", "l1", "l2", "l3", "l4", "l5", "l6", "l7"};
  return l;
}

inline Contract chain_agent(Rng& rng, std::size_t i, double lo, std::optional<double> in_threshold) {
  Contract c;
  c.name = "a" + std::to_string(i);
  const auto is = std::to_string(i);
  if (in_threshold)
    c.preconditions.push_back(fx::make("in_ok" + is, Section::precondition, Severity::hard,
                                       Predicate::field("in" + is, Operator::ge, *in_threshold)));
  else
    c.preconditions.push_back(fx::make("ready", Section::precondition, Severity::hard, Predicate::field("ready", Operator::eq, true)));
  c.invariants_hard.push_back(fx::inv("safe", Severity::hard, "s" + is, lo));
  c.invariants_soft.push_back(fx::inv("quality", Severity::soft, "q" + is, 0.5, "retry"));
  std::vector<std::string> banned;
  for (std::size_t j = 4; j < 8; ++j)
    if (coin(rng, 0.4)) banned.push_back(chain_labels()[j]);
  if (banned.empty()) banned.push_back(chain_labels()[4 + pick(rng, 4)]);
  c.governance_hard.push_back(fx::forbid("no_banned", Severity::hard, banned));
  c.recovery_strategies.push_back({"retry", StrategyType::re_prompt, json::object(), 2, std::nullopt});
  c.satisfaction.p = uniform(rng, 0.9, 1.0);
  c.satisfaction.delta = uniform(rng, 0.0, 0.1);
  c.satisfaction.k = 1 + pick(rng, 3);
  c.drift.vocabulary = {chain_labels().begin(), chain_labels().begin() + 4};
  return c;
}

inline ChainCase make_chain_case(Rng& rng, std::size_t n_agents) {
  ChainCase cc;
  std::vector<double> lo(n_agents);
  cc.handoff_threshold.assign(n_agents, 0.0);
  for (std::size_t i = 0; i < n_agents; ++i) {
    lo[i] = uniform(rng, 0.1, 0.4);
    if (i > 0) cc.handoff_threshold[i] = uniform(rng, 0.2, 0.6);
  }
  auto& p = cc.pipeline;
  p.name = "chain";
  for (std::size_t i = 0; i < n_agents; ++i) {
    std::optional<double> th;
    if (i > 0) th = cc.handoff_threshold[i];
    p.stages.push_back({"a" + std::to_string(i), "", chain_agent(rng, i, lo[i], th)});
  }
  for (std::size_t i = 0; i + 1 < n_agents; ++i) {
    HandoffSpec h;
    const auto out = "out" + std::to_string(i), in = "in" + std::to_string(i + 1);
    h.type_map.push_back({out, in, "number"});
    h.produces[out] = "number";
    h.invariants.push_back(fx::inv("handoff_ok", Severity::hard, out, cc.handoff_threshold[i + 1]));
    h.p_h = uniform(rng, 0.95, 1.0);
    h.delta_h = uniform(rng, 0.0, 0.05);
    p.handoffs.push_back({p.stages[i].name, p.stages[i + 1].name, h});
  }

  // phases share their boundary state
  std::vector<std::size_t> begin(n_agents), end(n_agents);
  std::size_t t0 = 0;
  for (std::size_t i = 0; i < n_agents; ++i) {
    begin[i] = t0;
    end[i] = t0 + 2 + pick(rng, 3);
    t0 = end[i];
  }
  const std::size_t T = end.back();
  std::vector<std::optional<std::size_t>> dip(n_agents);
  for (std::size_t i = 0; i < n_agents; ++i)
    if (coin(rng, 0.6) && end[i] - begin[i] >= 3) dip[i] = begin[i] + 1 + pick(rng, end[i] - begin[i] - 2);

  for (std::size_t t = 0; t <= T; ++t) {
    json s = {{"ready", true}};
    for (std::size_t j = 0; j < n_agents; ++j) {
      const bool active = t >= begin[j] && t <= end[j];
      const auto js = std::to_string(j);
      s["s" + js] = active ? uniform(rng, lo[j], 1.0) : uniform(rng);
      s["q" + js] = active ? (dip[j] == t ? uniform(rng, 0.0, 0.49) : uniform(rng, 0.5, 1.0)) : uniform(rng);
      if (j + 1 < n_agents) {
        const double th = cc.handoff_threshold[j + 1];
        const double out = t == end[j] ? uniform(rng, th, 1.0) : uniform(rng);
        s["out" + js] = out;
        if (t == end[j]) s["in" + std::to_string(j + 1)] = out;
      }
    }
    cc.trace.states.push_back(s);
    if (t < T) cc.trace.actions.push_back({chain_labels()[pick(rng, 4)], json::object()});
  }
  for (std::size_t i = 0; i + 1 < n_agents; ++i) cc.trace.stage_ends.push_back(end[i]);

  for (std::size_t i = 0; i < n_agents; ++i) {
    ExecutionTrace seg;
    for (std::size_t t = begin[i]; t <= end[i]; ++t) seg.states.push_back(cc.trace.states[t]);
    for (std::size_t t = begin[i]; t < end[i]; ++t) seg.actions.push_back(cc.trace.actions[t]);
    cc.segments.push_back(std::move(seg));
  }

  for (std::size_t i = 0; i + 1 < n_agents; ++i) {
    CompositionSamples smp;
    const auto& boundary = cc.trace.states[end[i]];
    smp.terminal_states.push_back(boundary);
    for (int extra = 0; extra < 3; ++extra) {
      json s = boundary;
      s["s" + std::to_string(i)] = uniform(rng, lo[i], 1.0);
      s["out" + std::to_string(i)] = uniform(rng, cc.handoff_threshold[i + 1], 1.0);
      smp.terminal_states.push_back(s);
    }
    for (std::size_t t = begin[i]; t < end[i + 1]; ++t) smp.actions.push_back({cc.trace.states[t], cc.trace.actions[t]});
    for (std::size_t l = 0; l < 4; ++l) smp.actions.push_back({json::object(), {chain_labels()[l], json::object()}});
    json rec = boundary;
    rec["q" + std::to_string(i)] = 0.9;
    smp.recovered_states.push_back(rec);
    cc.samples.push_back(std::move(smp));
  }
  return cc;
}

// Breaks exactly one composition condition on handoff j. Returns the
// condition number that must now be reported.
inline int inject_fault(ChainCase& cc, int condition, std::size_t j, Rng& rng) {
  auto& h = cc.pipeline.handoffs[j].spec;
  auto& smp = cc.samples[j];
  const auto out = "out" + std::to_string(j);
  const double th = cc.handoff_threshold[j + 1];
  switch (condition) {
    case 1:
      if (coin(rng)) h.produces.erase(out);
      else h.produces[out] = "string";
      break;
    case 2: {
      h.invariants.clear();
      json s = smp.terminal_states.front();
      s[out] = uniform(rng, 0.0, th * 0.99);
      smp.terminal_states.push_back(s);
      break;
    }
    case 3: {
      auto& down = cc.pipeline.stages[j + 1].contract;
      const auto label = chain_labels()[pick(rng, 4)];
      down.governance_hard.push_back(fx::forbid("no_" + label, Severity::hard, {label}));
      smp.actions.push_back({json::object(), {label, json::object()}});
      break;
    }
    default: {
      json s = smp.recovered_states.front();
      s[out] = uniform(rng, 0.0, th * 0.99);
      smp.recovered_states.push_back(s);
      break;
    }
  }
  return condition;
}

}  // namespace gen_test
