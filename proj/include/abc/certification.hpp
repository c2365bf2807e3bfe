#pragma once

// Compliance bounds with and without recovery, Hoeffding sample sizes and Wald's SPRT.

#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "abc/error.hpp"

namespace abc {

/// Compliance without recovery: q^T.
inline double compliance_no_recovery(double q, std::uint64_t T) {
  if (!(q > 0.0 && q < 1.0)) throw InvalidArgument("q must lie in (0, 1)");
  return std::pow(q, static_cast<double>(T));
}

/// Lower bound with recovery probability r: max(0, 1 - T (1-q)(1-r)).
inline double compliance_with_recovery(double q, double r, std::uint64_t T) {
  if (!(q > 0.0 && q < 1.0)) throw InvalidArgument("q must lie in (0, 1)");
  if (!(r >= 0.0 && r <= 1.0)) throw InvalidArgument("r must lie in [0, 1]");
  return std::max(0.0, 1.0 - static_cast<double>(T) * (1.0 - q) * (1.0 - r));
}

/// Sessions needed so the empirical rate is within epsilon with prob 1 - alpha.
inline std::uint64_t hoeffding_n(double epsilon, double alpha_err) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidArgument("epsilon must lie in (0, 1)");
  if (!(alpha_err > 0.0 && alpha_err < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  return static_cast<std::uint64_t>(std::ceil(std::log(2.0 / alpha_err) / (2.0 * epsilon * epsilon)));
}

/// Bernoulli KL divergence KL(a || b) in nats.
inline double kl(double a, double b) {
  auto term = [](double x, double y) { return x == 0.0 ? 0.0 : x * std::log(x / y); };
  return term(a, b) + term(1.0 - a, 1.0 - b);
}

// ---------------------------------------------------------------------------
// SPRT

struct SprtConfig {
  double p0 = 0.90;
  double p1 = 0.95;
  double alpha_err = 0.05;
  double beta_err = 0.05;

  void validate() const {
    if (!(p0 > 0.0 && p0 < 1.0) || !(p1 > 0.0 && p1 < 1.0)) throw InvalidArgument("p0 and p1 must lie in (0, 1)");
    if (!(p0 < p1)) throw InvalidArgument("p0 must be < p1");
    if (!(alpha_err > 0.0 && alpha_err < 1.0) || !(beta_err > 0.0 && beta_err < 1.0))
      throw InvalidArgument("error rates must lie in (0, 1)");
  }
  double upper() const { return std::log((1.0 - beta_err) / alpha_err); }
  double lower() const { return std::log(beta_err / (1.0 - alpha_err)); }
  double success_increment() const { return std::log(p1 / p0); }
  double failure_increment() const { return std::log((1.0 - p1) / (1.0 - p0)); }
};

enum class SprtDecision { continue_sampling, accept_h1, accept_h0 };

inline const char* to_string(SprtDecision d) {
  switch (d) {
    case SprtDecision::continue_sampling: return "continue";
    case SprtDecision::accept_h1: return "accept_h1";
    case SprtDecision::accept_h0: return "accept_h0";
  }
  return "?";
}

inline std::optional<SprtDecision> sprt_decision_from_string(std::string_view s) {
  if (s == "continue") return SprtDecision::continue_sampling;
  if (s == "accept_h1") return SprtDecision::accept_h1;
  if (s == "accept_h0") return SprtDecision::accept_h0;
  return std::nullopt;
}

struct SprtState {
  std::uint64_t n = 0;
  double log_lambda = 0.0;
  double upper = 0.0;
  double lower = 0.0;
  SprtDecision decision = SprtDecision::continue_sampling;

  bool decided() const { return decision != SprtDecision::continue_sampling; }
  bool operator==(const SprtState&) const = default;
};

inline SprtState sprt_start(const SprtConfig& cfg) {
  cfg.validate();
  return SprtState{0, 0.0, cfg.upper(), cfg.lower(), SprtDecision::continue_sampling};
}

inline SprtState sprt_update(SprtState s, const SprtConfig& cfg, bool x) {
  if (s.decided()) throw AlreadyDecided(std::string("SPRT already decided ") + to_string(s.decision) + " at n = " + std::to_string(s.n));
  s.log_lambda += x ? cfg.success_increment() : cfg.failure_increment();
  ++s.n;
  if (s.log_lambda >= s.upper) s.decision = SprtDecision::accept_h1;
  else if (s.log_lambda <= s.lower) s.decision = SprtDecision::accept_h0;
  return s;
}

struct SprtBatchResult {
  SprtState state;
  std::size_t consumed = 0;  // observations used before a decision (or all of them)
};

/// Feeds observations until a decision; the remainder is left unconsumed.
inline SprtBatchResult sprt_update_batch(SprtState s, const SprtConfig& cfg, std::span<const bool> xs) {
  SprtBatchResult r{s, 0};
  for (bool x : xs) {
    if (r.state.decided()) break;
    r.state = sprt_update(r.state, cfg, x);
    ++r.consumed;
  }
  return r;
}

enum class Hypothesis { h0, h1 };

/// Wald's approximation to the expected sample size. Infinite when the
/// hypotheses are numerically indistinguishable.
inline double sprt_expected_n(const SprtConfig& cfg, Hypothesis truth) {
  cfg.validate();
  const double A = cfg.upper(), B = cfg.lower();
  if (truth == Hypothesis::h1) {
    const double d = kl(cfg.p1, cfg.p0);
    if (!(d > 1e-15)) return std::numeric_limits<double>::infinity();
    return ((1.0 - cfg.beta_err) * A + cfg.beta_err * B) / d;
  }
  const double d = kl(cfg.p0, cfg.p1);
  if (!(d > 1e-15)) return std::numeric_limits<double>::infinity();
  return (cfg.alpha_err * A + (1.0 - cfg.alpha_err) * B) / -d;
}

inline nlohmann::json to_json(const SprtState& s) {
  return {{"n", s.n},
          {"log_lambda", s.log_lambda},
          {"decision", to_string(s.decision)},
          {"boundaries", {{"upper", s.upper}, {"lower", s.lower}}}};
}

inline SprtState sprt_state_from_json(const nlohmann::json& j) {
  SprtState s;
  s.n = j.at("n").get<std::uint64_t>();
  s.log_lambda = j.at("log_lambda").get<double>();
  s.upper = j.at("boundaries").at("upper").get<double>();
  s.lower = j.at("boundaries").at("lower").get<double>();
  auto d = sprt_decision_from_string(j.at("decision").get<std::string>());
  if (!d) throw FormatError("unknown SPRT decision '" + j.at("decision").get<std::string>() + "'");
  s.decision = *d;
  return s;
}

/// Continuous certification. reset mode restarts the test after each
/// decision. window mode (experimental) keeps only the last `window`
/// increments and re-evaluates the boundaries on every observation.
class SprtStream {
 public:
  enum class Mode { reset, window };

  explicit SprtStream(SprtConfig cfg, Mode mode = Mode::reset, std::size_t window = 0)
      : cfg_(cfg), mode_(mode), window_(window), state_(sprt_start(cfg)) {
    if (mode_ == Mode::window && window_ == 0) throw InvalidArgument("window mode needs a positive window");
  }

  /// Returns the state after x. In reset mode a decided state is reported
  /// once and the next observation starts a fresh test.
  SprtState push(bool x) {
    ++total_;
    if (mode_ == Mode::reset) {
      if (state_.decided()) state_ = sprt_start(cfg_);
      state_ = sprt_update(state_, cfg_, x);
      if (state_.decided()) decisions_.push_back({total_, state_});
      return state_;
    }
    const double inc = x ? cfg_.success_increment() : cfg_.failure_increment();
    recent_.push_back(inc);
    sum_ += inc;
    if (recent_.size() > window_) {
      sum_ -= recent_.front();
      recent_.pop_front();
    }
    state_.n = recent_.size();
    state_.log_lambda = sum_;
    const auto prev = state_.decision;
    state_.decision = sum_ >= state_.upper ? SprtDecision::accept_h1
                      : sum_ <= state_.lower ? SprtDecision::accept_h0
                                             : SprtDecision::continue_sampling;
    if (state_.decided() && state_.decision != prev) decisions_.push_back({total_, state_});
    return state_;
  }

  struct Decision {
    std::uint64_t at;  // 1-based index in the whole stream
    SprtState state;
  };

  const SprtState& state() const { return state_; }
  const std::vector<Decision>& decisions() const { return decisions_; }
  std::uint64_t observed() const { return total_; }

 private:
  SprtConfig cfg_;
  Mode mode_;
  std::size_t window_;
  SprtState state_;
  std::deque<double> recent_;
  double sum_ = 0.0;
  std::uint64_t total_ = 0;
  std::vector<Decision> decisions_;
};

}  // namespace abc
