#pragma once

// Per-turn enforcement. Each step runs, in order: pre-check evaluation
// (recorded), metric update, event emission, bounded recovery for violated
// soft constraints through the hook and fallback chain, and a post-recovery
// re-evaluation recorded separately from the pre-check.

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "abc/drift.hpp"
#include "abc/eval.hpp"

namespace abc {

enum class MonitorEventKind {
  violation,
  drift_alert_mild,
  drift_alert_severe,
  recovery_attempted,
  recovery_succeeded,
  recovery_failed,
  session_terminated
};

inline const char* to_string(MonitorEventKind k) {
  switch (k) {
    case MonitorEventKind::violation: return "violation";
    case MonitorEventKind::drift_alert_mild: return "drift_alert_mild";
    case MonitorEventKind::drift_alert_severe: return "drift_alert_severe";
    case MonitorEventKind::recovery_attempted: return "recovery_attempted";
    case MonitorEventKind::recovery_succeeded: return "recovery_succeeded";
    case MonitorEventKind::recovery_failed: return "recovery_failed";
    case MonitorEventKind::session_terminated: return "session_terminated";
  }
  return "?";
}

inline std::optional<MonitorEventKind> monitor_event_kind_from_string(std::string_view s) {
  for (auto k : {MonitorEventKind::violation, MonitorEventKind::drift_alert_mild, MonitorEventKind::drift_alert_severe,
                 MonitorEventKind::recovery_attempted, MonitorEventKind::recovery_succeeded,
                 MonitorEventKind::recovery_failed, MonitorEventKind::session_terminated})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

struct MonitorEvent {
  MonitorEventKind kind = MonitorEventKind::violation;
  std::size_t step = 0;
  nlohmann::json payload = nlohmann::json::object();

  bool operator==(const MonitorEvent&) const = default;
};

using EventListener = std::function<void(const MonitorEvent&)>;

struct RecoveryRequest {
  const RecoveryStrategy& strategy;
  const Constraint& constraint;
  const StateDict& state;
  const ActionRecord* action;
  std::size_t step;
  int attempt;  // 1-based attempt number on this strategy
};

/// Corrected (state, action) to re-evaluate the current step with.
struct Correction {
  StateDict state;
  std::optional<ActionRecord> action;
};

/// Returns a correction, or nullopt when the strategy could not produce one.
using RecoveryHook = std::function<std::optional<Correction>(const RecoveryRequest&)>;

struct MonitorOptions {
  // Attempts allowed per (constraint, step); 0 means the whole chain budget.
  std::size_t attempts_per_step = 0;
  // Stage boundaries for composed pipeline contracts.
  std::vector<std::size_t> stage_ends;
  // Optional baseline compliance series; enables S in the session metrics.
  std::vector<double> stress_baseline;
};

struct StepReport {
  StepEvaluation pre;
  std::optional<StepEvaluation> post;
  DriftSample drift;
  std::vector<MonitorEvent> events;

  /// Post-recovery evaluation when recovery changed the step, else pre.
  const StepEvaluation& effective() const { return post ? *post : pre; }
  bool operator==(const StepReport&) const = default;
};

struct SessionReport {
  std::string contract;
  std::vector<StepReport> steps;
  std::vector<MonitorEvent> events;
  std::vector<ViolationEvent> violations;
  SessionMetrics metrics;
  SatisfactionVerdict verdict;
  Outcome outcome = Outcome::compliant;
  bool terminated = false;

  bool preconditions_ok() const { return verdict.preconditions_ok; }
  std::vector<double> c_hard_series() const {
    std::vector<double> out;
    for (const auto& s : steps) out.push_back(s.pre.c_hard);
    return out;
  }
  std::vector<double> c_soft_series() const {
    std::vector<double> out;
    for (const auto& s : steps) out.push_back(s.pre.c_soft);
    return out;
  }
  std::vector<double> drift_series() const {
    std::vector<double> out;
    for (const auto& s : steps) out.push_back(s.drift.d_total);
    return out;
  }
  bool operator==(const SessionReport&) const = default;
};

class SessionMonitor {
 public:
  explicit SessionMonitor(Contract contract, MonitorOptions options = {})
      : contract_(std::move(contract)),
        options_(std::move(options)),
        schedule_(contract_.stages, options_.stage_ends),
        window_(contract_.drift) {}

  void set_hook(RecoveryHook hook) { hook_ = std::move(hook); }
  void add_listener(EventListener listener) { listeners_.push_back(std::move(listener)); }

  const Contract& contract() const { return contract_; }
  bool terminated() const { return terminated_; }
  std::size_t steps() const { return reports_.size(); }
  const DriftWindow& window() const { return window_; }

  /// Processes s_t (and a_t when present). The terminal state of a trace is
  /// stepped without an action.
  StepReport step(const StateDict& state, const ActionRecord* action) {
    if (terminated_) throw SessionTerminated("session '" + contract_.name + "' was terminated by a recovery strategy");
    const std::size_t t = reports_.size();
    StepReport rep;

    // 1. pre-check evaluation
    rep.pre = evaluate_step(contract_, state, action, t, schedule_.empty() ? nullptr : &schedule_);

    // 2. metric update
    rep.drift = update_drift(window_, contract_.drift, rep.pre, action);

    // 3. event emission and violation bookkeeping
    for (const auto& p : rep.pre.preconditions)
      if (p.violated()) emit(rep, MonitorEventKind::violation, t, violation_payload(p));
    double counted_weight = 0.0, new_weight = 0.0;
    for (const auto& r : rep.pre.results) {
      if (r.skipped) continue;
      counted_weight += r.weight;
      if (r.violated() && !open_.count(r.name)) new_weight += r.weight;
    }
    for (const auto& r : rep.pre.results) {
      if (r.skipped) continue;
      if (r.violated()) {
        emit(rep, MonitorEventKind::violation, t, violation_payload(r));
        if (!open_.count(r.name)) {
          const double nu = std::clamp(new_weight / counted_weight, std::numeric_limits<double>::min(), 1.0);
          open_[r.name] = violations_.size();
          violations_.push_back(ViolationEvent::make(t, r.name, r.severity, nu));
        }
      } else {
        close_event(r.name, t);
        cursors_.erase(r.name);
      }
    }
    const double d = rep.drift.d_total;
    if (d > contract_.drift.theta2)
      emit(rep, MonitorEventKind::drift_alert_severe, t, {{"drift", d}, {"threshold", contract_.drift.theta2}});
    else if (d > contract_.drift.theta1)
      emit(rep, MonitorEventKind::drift_alert_mild, t, {{"drift", d}, {"threshold", contract_.drift.theta1}});

    // 4. recovery
    StateDict work_state = state;
    std::optional<ActionRecord> work_action;
    if (action) work_action = *action;
    bool corrected = false;
    for (const auto& r : rep.pre.results) {
      if (!r.violated() || r.severity != Severity::soft) continue;
      recover(rep, *contract_.find_constraint(r.name), t, work_state, work_action, corrected);
      if (terminated_) break;
    }

    // 5. post-recovery re-evaluation
    if (corrected) {
      rep.post = evaluate_step(contract_, work_state, work_action ? &*work_action : nullptr, t,
                               schedule_.empty() ? nullptr : &schedule_);
      rep.post->preconditions = rep.pre.preconditions;
    }
    reports_.push_back(rep);
    return rep;
  }

  StepReport step(const StateDict& state, const std::optional<ActionRecord>& action) {
    return step(state, action ? &*action : nullptr);
  }

  /// Session roll-up over the steps processed so far.
  SessionReport report() const {
    SessionReport out;
    out.contract = contract_.name;
    out.steps = reports_;
    out.events = events_;
    out.terminated = terminated_;
    out.violations = violations_;
    const std::size_t last = reports_.empty() ? 0 : reports_.size() - 1;
    for (auto& v : out.violations) {
      if (!v.delta_t_recovery) {
        v.censored = true;
        v.delta_t_recovery = last + 1 - v.step;
      }
    }

    std::vector<StepEvaluation> effective;
    effective.reserve(reports_.size());
    for (const auto& r : reports_) effective.push_back(r.effective());
    out.verdict = verdict_from_evaluations(contract_, effective);
    out.outcome = terminated_ ? Outcome::hard_violation : outcome_from(out.verdict, effective);

    auto& m = out.metrics;
    if (!reports_.empty()) {
      double ch = 0, cs = 0, cc = 0, dd = 0;
      for (const auto& r : reports_) {
        ch += r.pre.c_hard;
        cs += r.pre.c_soft;
        cc += 1.0 - r.drift.d_compliance;
        dd += r.drift.d_total;
      }
      const double n = static_cast<double>(reports_.size());
      m.mean_c_hard = ch / n;
      m.mean_c_soft = cs / n;
      m.mean_compliance = cc / n;
      m.mean_drift = dd / n;
    }
    m.recovery_effectiveness = recovery_effectiveness(out.violations);
    if (!options_.stress_baseline.empty() && !reports_.empty()) {
      std::vector<double> stressed;
      for (const auto& r : reports_) stressed.push_back(1.0 - r.drift.d_compliance);
      m.stress_resilience = stress_resilience(stressed, options_.stress_baseline);
    }
    m.theta = reliability_index({m.mean_compliance, m.mean_drift, m.recovery_effectiveness, m.stress_resilience.value_or(1.0)},
                                contract_.reliability);
    return out;
  }

 private:
  struct Cursor {
    std::size_t position = 0;  // index into the constraint's chain
    int used = 0;              // attempts spent on the current strategy
    bool exhausted = false;
  };

  static nlohmann::json violation_payload(const ConstraintResult& r) {
    nlohmann::json p = {{"constraint", r.name}, {"severity", to_string(r.severity)}, {"section", to_string(r.section)}};
    if (r.detail) p["detail"] = *r.detail;
    return p;
  }

  void emit(StepReport& rep, MonitorEventKind kind, std::size_t t, nlohmann::json payload) {
    MonitorEvent e{kind, t, std::move(payload)};
    rep.events.push_back(e);
    events_.push_back(e);
    for (const auto& l : listeners_) l(e);
  }

  void close_event(const std::string& name, std::size_t t) {
    auto it = open_.find(name);
    if (it == open_.end()) return;
    auto& v = violations_[it->second];
    v.recovered_at = t;
    v.delta_t_recovery = t - v.step;
    open_.erase(it);
  }

  void recover(StepReport& rep, const Constraint& c, std::size_t t, StateDict& state, std::optional<ActionRecord>& action,
               bool& corrected) {
    auto& cur = cursors_[c.name];
    if (cur.exhausted) return;
    const auto chain = c.recovery ? contract_.recovery_chain(*c.recovery) : std::vector<const RecoveryStrategy*>{};
    std::size_t this_step = 0;
    while (cur.position < chain.size()) {
      const auto& s = *chain[cur.position];
      if (cur.used >= s.max_attempts) {
        ++cur.position;
        cur.used = 0;
        continue;
      }
      if (options_.attempts_per_step && this_step >= options_.attempts_per_step) return;
      if (s.type == StrategyType::terminate_session) {
        ++cur.used;
        emit(rep, MonitorEventKind::recovery_attempted, t,
             {{"constraint", c.name}, {"strategy", s.name}, {"type", to_string(s.type)}, {"attempt", cur.used}});
        emit(rep, MonitorEventKind::session_terminated, t, {{"constraint", c.name}, {"strategy", s.name}});
        terminated_ = true;
        return;
      }
      if (!hook_) {
        // Hook-dispatched strategies are unavailable in detection-only mode.
        ++cur.position;
        cur.used = 0;
        continue;
      }
      ++cur.used;
      ++this_step;
      emit(rep, MonitorEventKind::recovery_attempted, t,
           {{"constraint", c.name}, {"strategy", s.name}, {"type", to_string(s.type)}, {"attempt", cur.used}});
      auto fix = hook_(RecoveryRequest{s, c, state, action ? &*action : nullptr, t, cur.used});
      if (!fix) continue;
      state = std::move(fix->state);
      if (fix->action) action = std::move(fix->action);
      corrected = true;
      auto again = evaluate_constraint(c, EvalView(state, action ? &*action : nullptr));
      if (!again.skipped && again.satisfied) {
        emit(rep, MonitorEventKind::recovery_succeeded, t, {{"constraint", c.name}, {"strategy", s.name}});
        close_event(c.name, t);
        cursors_.erase(c.name);
        return;
      }
    }
    emit(rep, MonitorEventKind::recovery_failed, t,
         {{"constraint", c.name},
          {"reason", chain.empty() ? "no recovery strategy defined" : (hook_ ? "attempts exhausted" : "no recovery hook registered")}});
    cur.exhausted = true;
  }

  Contract contract_;
  MonitorOptions options_;
  StageSchedule schedule_;
  DriftWindow window_;
  RecoveryHook hook_;
  std::vector<EventListener> listeners_;
  std::vector<StepReport> reports_;
  std::vector<MonitorEvent> events_;
  std::vector<ViolationEvent> violations_;
  std::map<std::string, std::size_t> open_;  // constraint -> index of its open violation
  std::map<std::string, Cursor> cursors_;
  bool terminated_ = false;
};

/// Replays a whole trace. Stops early when a terminate_session strategy fires.
inline SessionReport run_session(const Contract& c, const ExecutionTrace& trace, RecoveryHook hook = {},
                                 MonitorOptions options = {}) {
  trace.validate();
  if (options.stage_ends.empty()) options.stage_ends = trace.stage_ends;
  if (!c.stages.empty()) StageSchedule(c.stages, options.stage_ends).check_against(trace.length());
  SessionMonitor mon(c, std::move(options));
  if (hook) mon.set_hook(std::move(hook));
  for (std::size_t t = 0; t < trace.states.size() && !mon.terminated(); ++t)
    mon.step(trace.states[t], t < trace.actions.size() ? &trace.actions[t] : nullptr);
  return mon.report();
}

// ---------------------------------------------------------------------------
// (p, delta, k) verdicts over session ensembles

struct SessionSeries {
  bool preconditions_ok = true;
  std::vector<double> c_hard;
  std::vector<double> c_soft;
};

inline SessionSeries series_of(const SessionReport& r) {
  SessionSeries s;
  s.preconditions_ok = r.verdict.preconditions_ok;
  for (const auto& st : r.steps) {
    s.c_hard.push_back(st.pre.c_hard);
    s.c_soft.push_back(st.effective().c_soft);
  }
  return s;
}

struct PdkVerdict {
  std::size_t sessions = 0;
  std::size_t excluded = 0;  // sessions whose preconditions failed
  double hard_frequency = 0.0;
  double soft_frequency = 0.0;
  bool hard_ok = false;
  bool soft_ok = false;
  bool holds = false;
  std::vector<std::size_t> hard_counterexamples;  // indices into the input ensemble
  std::vector<std::size_t> soft_counterexamples;

  bool operator==(const PdkVerdict&) const = default;
};

namespace detail {
inline constexpr double kScoreTolerance = 1e-12;
}

/// Hard guarantee: C_hard(t) = 1 at every step. Soft guarantee: every step
/// with C_soft(t) < 1 - delta is followed within [t, min(t+k, T)] by a step
/// with C_soft >= 1 - delta.
inline PdkVerdict pdk_verdict(std::span<const SessionSeries> sessions, const SatisfactionParams& params) {
  PdkVerdict v;
  std::size_t hard_ok = 0, soft_ok = 0;
  const double floor = 1.0 - params.delta;
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    const auto& s = sessions[i];
    if (!s.preconditions_ok) {
      ++v.excluded;
      continue;
    }
    ++v.sessions;
    bool hard = std::all_of(s.c_hard.begin(), s.c_hard.end(), [](double c) { return c >= 1.0 - detail::kScoreTolerance; });
    bool soft = true;
    const std::size_t T = s.c_soft.empty() ? 0 : s.c_soft.size() - 1;
    for (std::size_t t = 0; t < s.c_soft.size() && soft; ++t) {
      if (s.c_soft[t] >= floor - detail::kScoreTolerance) continue;
      bool back = false;
      for (std::size_t u = t; u <= std::min(t + params.k, T) && !back; ++u) back = s.c_soft[u] >= floor - detail::kScoreTolerance;
      soft = back;
    }
    if (hard) ++hard_ok;
    else v.hard_counterexamples.push_back(i);
    if (soft) ++soft_ok;
    else v.soft_counterexamples.push_back(i);
  }
  if (v.sessions == 0) throw EmptyEnsemble("no sessions with satisfied preconditions to judge");
  v.hard_frequency = static_cast<double>(hard_ok) / static_cast<double>(v.sessions);
  v.soft_frequency = static_cast<double>(soft_ok) / static_cast<double>(v.sessions);
  v.hard_ok = v.hard_frequency >= params.p;
  v.soft_ok = v.soft_frequency >= params.p;
  v.holds = v.hard_ok && v.soft_ok;
  return v;
}

inline PdkVerdict pdk_verdict(const Contract& c, std::span<const SessionReport> reports,
                              std::optional<SatisfactionParams> params = std::nullopt) {
  std::vector<SessionSeries> series;
  series.reserve(reports.size());
  for (const auto& r : reports) series.push_back(series_of(r));
  return pdk_verdict(series, params.value_or(c.satisfaction));
}

// ---------------------------------------------------------------------------
// Bernoulli observations for sequential certification

enum class ObservationUnit { session, step };

/// One boolean per session (hard guarantee held throughout, preconditions
/// included) or per step (C_hard(t) = 1).
inline std::vector<bool> certification_observations(std::span<const SessionReport> reports,
                                                    ObservationUnit unit = ObservationUnit::session) {
  std::vector<bool> out;
  for (const auto& r : reports) {
    if (unit == ObservationUnit::step) {
      for (const auto& st : r.steps) out.push_back(st.pre.c_hard >= 1.0 - detail::kScoreTolerance);
      continue;
    }
    bool clean = r.verdict.preconditions_ok && !r.terminated;
    for (const auto& st : r.steps) clean = clean && st.pre.c_hard >= 1.0 - detail::kScoreTolerance;
    out.push_back(clean);
  }
  return out;
}

}  // namespace abc
