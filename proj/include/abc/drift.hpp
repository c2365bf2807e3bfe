#pragma once

// Behavioral drift score D(t) = w_c * compliance gap + w_d * JSD(observed,
// reference), its diagnostic decomposition, and the session metrics E, S
// and Theta.

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "abc/eval.hpp"

namespace abc {

inline constexpr double kSmoothingEpsilon = 1e-9;

namespace detail {

inline void check_distribution(std::span<const double> p, const char* name) {
  double sum = 0.0;
  for (double x : p) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw NotNormalized(std::string(name) + " has a negative or non-finite entry");
    sum += x;
  }
  if (std::fabs(sum - 1.0) > 1e-9) throw NotNormalized(std::string(name) + " sums to " + std::to_string(sum));
}

}  // namespace detail

/// Jensen-Shannon divergence with base-2 logarithms, in [0, 1].
inline double jsd(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size())
    throw DimensionMismatch("distributions have " + std::to_string(p.size()) + " and " + std::to_string(q.size()) + " entries");
  detail::check_distribution(p, "p");
  detail::check_distribution(q, "q");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) acc += p[i] * std::log2(p[i] / m);
    if (q[i] > 0.0) acc += q[i] * std::log2(q[i] / m);
  }
  return std::clamp(0.5 * acc, 0.0, 1.0);
}

/// Add-epsilon smoothing followed by renormalization.
inline std::vector<double> smooth(std::span<const double> p, double eps = kSmoothingEpsilon) {
  std::vector<double> out(p.begin(), p.end());
  double total = 0.0;
  for (auto& x : out) total += (x += eps);
  for (auto& x : out) x /= total;
  return out;
}

/// Sliding window over the most recent action labels with an incrementally
/// maintained histogram over the contract's support (vocabulary + __other__).
class DriftWindow {
 public:
  explicit DriftWindow(const DriftConfig& cfg) : capacity_(std::max<std::size_t>(cfg.window, 1)), support_(cfg.support()) {
    for (std::size_t i = 0; i < support_.size(); ++i) index_.emplace(support_[i], i);
    other_ = index_.at(std::string(kOtherLabel));
    counts_.assign(support_.size(), 0);
    reference_ = smooth(cfg.reference_vector());
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return ring_.size(); }
  bool empty() const { return ring_.empty(); }
  const std::vector<std::string>& support() const { return support_; }
  const std::vector<std::size_t>& counts() const { return counts_; }
  const std::vector<double>& smoothed_reference() const { return reference_; }

  std::size_t bucket(const std::string& label) const {
    auto it = index_.find(label);
    return it == index_.end() ? other_ : it->second;
  }

  /// O(1) insert, evicting the oldest label when full.
  void push(const std::string& label) {
    const auto b = bucket(label);
    ring_.push_back(b);
    ++counts_[b];
    if (ring_.size() > capacity_) {
      --counts_[ring_.front()];
      ring_.pop_front();
    }
  }

  /// Empirical distribution over the window (all zeros when empty).
  std::vector<double> observed() const {
    std::vector<double> p(counts_.size(), 0.0);
    if (ring_.empty()) return p;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = static_cast<double>(counts_[i]) / static_cast<double>(ring_.size());
    return p;
  }

  /// Smoothed JSD against the reference; 0 for an empty window.
  double divergence() const {
    if (ring_.empty()) return 0.0;
    return jsd(smooth(observed()), reference_);
  }

 private:
  std::size_t capacity_;
  std::vector<std::string> support_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t other_ = 0;
  std::deque<std::size_t> ring_;
  std::vector<std::size_t> counts_;
  std::vector<double> reference_;
};

struct DriftDecomposition {
  double preconditions = 0.0;  // D_P
  double invariants = 0.0;     // D_I
  double governance = 0.0;     // D_G
  double distributional = 0.0;

  bool operator==(const DriftDecomposition&) const = default;
};

struct DriftSample {
  std::size_t t = 0;
  double d_compliance = 0.0;
  double d_distributional = 0.0;
  double d_total = 0.0;
  DriftDecomposition decomposition;

  bool operator==(const DriftSample&) const = default;
};

/// Weighted compliance gap sum w_i (1 - sigma_i) / sum w_i over counted
/// results, optionally restricted to one section. 0 when nothing counts.
inline double weighted_gap(std::span<const ConstraintResult> results, std::optional<Section> only = std::nullopt) {
  double num = 0.0, den = 0.0;
  for (const auto& r : results) {
    if (r.skipped || (only && r.section != *only)) continue;
    den += r.weight;
    if (!r.satisfied) num += r.weight;
  }
  return den > 0.0 ? num / den : 0.0;
}

/// Pushes the step's action (if any) into the window and computes D(t).
inline DriftSample update_drift(DriftWindow& window, const DriftConfig& cfg, const StepEvaluation& step,
                                const ActionRecord* action) {
  if (action) window.push(action->label);
  DriftSample s;
  s.t = step.step;
  s.d_compliance = weighted_gap(step.results);
  s.d_distributional = window.divergence();
  s.d_total = std::clamp(cfg.w_c * s.d_compliance + cfg.w_d * s.d_distributional, 0.0, 1.0);
  s.decomposition.preconditions =
      std::any_of(step.preconditions.begin(), step.preconditions.end(), [](const auto& r) { return r.violated(); }) ? 1.0 : 0.0;
  s.decomposition.invariants = weighted_gap(step.results, Section::invariant);
  s.decomposition.governance = weighted_gap(step.results, Section::governance);
  s.decomposition.distributional = s.d_distributional;
  return s;
}

// ---------------------------------------------------------------------------
// Violation events and session metrics

struct ViolationEvent {
  std::size_t step = 0;
  std::string constraint;
  Severity severity = Severity::hard;
  double severity_magnitude = 1.0;  // nu(t), in (0, 1]
  std::optional<std::size_t> recovered_at;
  std::optional<std::size_t> delta_t_recovery;
  bool censored = false;  // never recovered; delta_t runs to one past the session end

  static ViolationEvent make(std::size_t step, std::string constraint, Severity sev, double nu) {
    if (!(nu > 0.0) || nu > 1.0) throw ZeroSeverity("violation severity must lie in (0, 1], got " + std::to_string(nu));
    return ViolationEvent{step, std::move(constraint), sev, nu, std::nullopt, std::nullopt, false};
  }

  bool operator==(const ViolationEvent&) const = default;
};

/// Session E: mean of delta_t / nu over events carrying a recovery time.
/// 0 when there are none.
inline double recovery_effectiveness(std::span<const ViolationEvent> events) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& e : events) {
    if (!e.delta_t_recovery) continue;
    if (!(e.severity_magnitude > 0.0)) throw ZeroSeverity("event at step " + std::to_string(e.step) + " has zero severity");
    sum += static_cast<double>(*e.delta_t_recovery) / e.severity_magnitude;
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

/// S = mean(stressed) / mean(baseline); may exceed 1.
inline double stress_resilience(std::span<const double> stressed, std::span<const double> baseline) {
  if (stressed.empty() || baseline.empty()) throw EmptyInput("stress resilience needs non-empty stressed and baseline series");
  const double ms = std::accumulate(stressed.begin(), stressed.end(), 0.0) / static_cast<double>(stressed.size());
  const double mb = std::accumulate(baseline.begin(), baseline.end(), 0.0) / static_cast<double>(baseline.size());
  if (mb == 0.0) throw ZeroBaseline("baseline compliance mean is zero");
  return ms / mb;
}

struct ReliabilityInputs {
  double mean_compliance = 1.0;  // C-bar
  double mean_drift = 0.0;       // D-bar
  double recovery_effectiveness = 0.0;
  double stress_resilience = 1.0;
};

/// Theta = a1 C + a2 (1 - D) + a3 / (1 + E) + a4 min(S, 1).
inline double reliability_index(const ReliabilityInputs& in, const ReliabilityWeights& w) {
  const double c = std::clamp(in.mean_compliance, 0.0, 1.0);
  const double d = std::clamp(in.mean_drift, 0.0, 1.0);
  const double e = std::max(in.recovery_effectiveness, 0.0);
  const double s = std::clamp(in.stress_resilience, 0.0, 1.0);
  const double recov = std::isinf(e) ? 0.0 : 1.0 / (1.0 + e);
  return std::clamp(w.a1 * c + w.a2 * (1.0 - d) + w.a3 * recov + w.a4 * s, 0.0, 1.0);
}

struct SessionMetrics {
  double mean_c_hard = 1.0;
  double mean_c_soft = 1.0;
  double mean_compliance = 1.0;  // C-bar: time average of the weighted compliance 1 - D_compliance
  double mean_drift = 0.0;       // D-bar
  double recovery_effectiveness = 0.0;
  std::optional<double> stress_resilience;  // raw, unclamped; absent without a stress arm
  double theta = 1.0;

  bool operator==(const SessionMetrics&) const = default;
};

}  // namespace abc
