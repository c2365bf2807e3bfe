#pragma once

// Ornstein-Uhlenbeck drift model dD = (alpha - gamma D) dt + sigma dW:
// simulation, closed-form bounds, design criterion and trajectory fitting.
//
// Seed contract: path i of a batch seeded with s uses an mt19937_64 seeded
// with splitmix64(s ^ splitmix64(i + 1)). Normals come from Box-Muller on
// 53-bit uniforms, so a given seed reproduces the same path bit for bit
// under the same floating point environment.

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "abc/error.hpp"

namespace abc {

struct OUParams {
  double alpha = 0.02;
  double gamma = 0.2;
  double sigma = 0.05;
  double d0 = 0.0;

  /// sigma = 0 is accepted as the deterministic limit.
  void validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidArgument("alpha must be > 0");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidArgument("gamma must be > 0");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidArgument("sigma must be >= 0");
    if (!(d0 >= 0.0) || !std::isfinite(d0)) throw InvalidArgument("d0 must be >= 0");
  }
  bool operator==(const OUParams&) const = default;
};

struct DesignSpec {
  double d_max = 0.25;
  double epsilon = 0.05;

  void validate() const {
    if (!(d_max > 0.0 && d_max <= 1.0)) throw InvalidArgument("d_max must lie in (0, 1]");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidArgument("epsilon must lie in (0, 1)");
  }
};

struct OUFit {
  double gamma_hat = 0.0;
  double d_star_hat = 0.0;
  double d0 = 0.0;
  double r_squared = 0.0;
  bool degenerate = false;  // constant trajectory: gamma is unidentifiable and reported as 0
};

struct Trajectory {
  std::vector<double> t;
  std::vector<double> d;

  std::size_t size() const { return t.size(); }
};

// ---------------------------------------------------------------------------
// Random numbers

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t path_seed(std::uint64_t seed, std::uint64_t index) { return splitmix64(seed ^ splitmix64(index + 1)); }

class NormalSource {
 public:
  explicit NormalSource(std::uint64_t seed) : gen_(seed) {}

  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] keeps the log finite
    const double u1 = (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(th);
    has_spare_ = true;
    return r * std::cos(th);
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// ---------------------------------------------------------------------------
// Simulation

namespace detail {
inline std::size_t step_count(double horizon, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidStep("dt must be positive and finite");
  if (!(horizon >= dt) || !std::isfinite(horizon)) throw InvalidStep("horizon must be >= dt");
  return static_cast<std::size_t>(std::llround(horizon / dt));
}
}  // namespace detail

/// Euler-Maruyama path on [0, horizon]. clamp_zero reflects negative values.
inline Trajectory simulate_ou(const OUParams& p, double horizon, double dt = 0.01, std::uint64_t seed = 0,
                              bool clamp_zero = false) {
  const auto n = detail::step_count(horizon, dt);
  NormalSource z(seed);
  Trajectory tr;
  tr.t.reserve(n + 1);
  tr.d.reserve(n + 1);
  double d = p.d0;
  tr.t.push_back(0.0);
  tr.d.push_back(d);
  const double sq = std::sqrt(dt);
  for (std::size_t i = 1; i <= n; ++i) {
    d += (p.alpha - p.gamma * d) * dt + p.sigma * sq * z();
    if (clamp_zero && d < 0.0) d = -d;
    tr.t.push_back(static_cast<double>(i) * dt);
    tr.d.push_back(d);
  }
  return tr;
}

/// Exact transition sampler: D_{n+1} = m + (D_n - m) e^{-gamma dt} + s xi.
inline Trajectory simulate_ou_exact(const OUParams& p, double horizon, double dt = 0.01, std::uint64_t seed = 0) {
  const auto n = detail::step_count(horizon, dt);
  NormalSource z(seed);
  const double m = p.alpha / p.gamma;
  const double decay = std::exp(-p.gamma * dt);
  const double s = p.sigma * std::sqrt(-std::expm1(-2.0 * p.gamma * dt) / (2.0 * p.gamma));
  Trajectory tr;
  double d = p.d0;
  tr.t.push_back(0.0);
  tr.d.push_back(d);
  for (std::size_t i = 1; i <= n; ++i) {
    d = m + (d - m) * decay + s * z();
    tr.t.push_back(static_cast<double>(i) * dt);
    tr.d.push_back(d);
  }
  return tr;
}

enum class Sampler { euler, exact };

/// D(horizon) for n_paths independent paths, seeded per path.
inline std::vector<double> simulate_endpoints(const OUParams& p, double horizon, std::size_t n_paths, std::uint64_t seed,
                                              Sampler sampler = Sampler::exact, double dt = 0.01, unsigned threads = 1) {
  const auto n = detail::step_count(horizon, dt);
  std::vector<double> out(n_paths);
  const double m = p.alpha / p.gamma;
  const double decay = std::exp(-p.gamma * dt);
  const double s_exact = p.sigma * std::sqrt(-std::expm1(-2.0 * p.gamma * dt) / (2.0 * p.gamma));
  const double sq = std::sqrt(dt);
  auto work = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      NormalSource z(path_seed(seed, i));
      double d = p.d0;
      if (sampler == Sampler::exact)
        for (std::size_t k = 0; k < n; ++k) d = m + (d - m) * decay + s_exact * z();
      else
        for (std::size_t k = 0; k < n; ++k) d += (p.alpha - p.gamma * d) * dt + p.sigma * sq * z();
      out[i] = d;
    }
  };
  threads = std::max(1u, threads);
  if (threads == 1 || n_paths < 2) {
    work(0, n_paths);
    return out;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n_paths + threads - 1) / threads;
  for (std::size_t lo = 0; lo < n_paths; lo += chunk) pool.emplace_back(work, lo, std::min(n_paths, lo + chunk));
  for (auto& t : pool) t.join();
  return out;
}

// ---------------------------------------------------------------------------
// Closed forms

struct StationaryStats {
  double mean;
  double variance;
};

inline StationaryStats stationary_stats(const OUParams& p) {
  return {p.alpha / p.gamma, p.sigma * p.sigma / (2.0 * p.gamma)};
}

/// Pr(D > alpha/gamma + eta) <= exp(-gamma eta^2 / sigma^2) at stationarity.
inline double tail_probability(const OUParams& p, double eta) {
  if (!(eta > 0.0)) throw InvalidArgument("eta must be > 0");
  if (p.sigma == 0.0) return 0.0;
  return std::exp(-p.gamma * eta * eta / (p.sigma * p.sigma));
}

/// E[(D(t) - alpha/gamma)^2].
inline double mse_at_time(const OUParams& p, double t) {
  if (!(t >= 0.0)) throw InvalidArgument("t must be >= 0");
  const double gap = p.d0 - p.alpha / p.gamma;
  const double e = std::exp(-2.0 * p.gamma * t);
  return gap * gap * e + p.sigma * p.sigma / (2.0 * p.gamma) * (1.0 - e);
}

/// Smallest recovery rate with Pr(D > d_max) <= epsilon: the larger root of
/// d^2 g^2 - (2 a d + s^2 ln(1/eps)) g + a^2 = 0.
inline double solve_design_gamma(double alpha, double sigma, const DesignSpec& spec) {
  spec.validate();
  if (!(alpha > 0.0)) throw InvalidArgument("alpha must be > 0");
  if (!(sigma >= 0.0)) throw InvalidArgument("sigma must be >= 0");
  const double d = spec.d_max;
  if (sigma == 0.0) return alpha / d;  // noiseless: D settles at alpha/gamma, which may sit on d_max
  const double L = std::log(1.0 / spec.epsilon);
  const double a = d * d;
  const double b = 2.0 * alpha * d + sigma * sigma * L;
  // b^2 - 4ac = s^2 L (4 a d + s^2 L) >= 0; written this way to avoid cancellation
  const double disc = sigma * sigma * L * (4.0 * alpha * d + sigma * sigma * L);
  const double g = (b + std::sqrt(disc)) / (2.0 * a);
  if (!(d > alpha / g)) throw InvalidArgument("design criterion has no root with d_max > alpha/gamma");
  return g;
}

/// First-order version: gamma >~ alpha/d + sigma sqrt(2 ln(1/eps)) / (2 d).
inline double approx_design_gamma(double alpha, double sigma, const DesignSpec& spec) {
  spec.validate();
  return alpha / spec.d_max + sigma * std::sqrt(2.0 * std::log(1.0 / spec.epsilon)) / (2.0 * spec.d_max);
}

// ---------------------------------------------------------------------------
// Fitting D(t) = D* + (D0 - D*) e^{-gamma t}

namespace detail {

struct FitEval {
  double sse;
  double d_star;
};

inline FitEval fit_at(const Trajectory& tr, double gamma) {
  const double d0 = tr.d.front(), t0 = tr.t.front();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const double g = std::exp(-gamma * (tr.t[i] - t0));
    num += (1.0 - g) * (tr.d[i] - d0 * g);
    den += (1.0 - g) * (1.0 - g);
  }
  const double ds = den > 0.0 ? num / den : d0;
  double sse = 0.0;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const double g = std::exp(-gamma * (tr.t[i] - t0));
    const double r = tr.d[i] - (ds + (d0 - ds) * g);
    sse += r * r;
  }
  return {sse, ds};
}

}  // namespace detail

inline OUFit fit_ou(const Trajectory& tr) {
  if (tr.t.size() != tr.d.size()) throw DimensionMismatch("t and D columns differ in length");
  if (tr.size() < 4) throw DegenerateInput("fit needs at least 4 points");
  for (std::size_t i = 1; i < tr.size(); ++i)
    if (!(tr.t[i] > tr.t[i - 1])) throw DegenerateInput("t must be strictly increasing");

  OUFit fit;
  fit.d0 = tr.d.front();
  double mean = 0.0;
  for (double x : tr.d) mean += x;
  mean /= static_cast<double>(tr.size());
  double sst = 0.0;
  for (double x : tr.d) sst += (x - mean) * (x - mean);
  if (sst <= 1e-300) {
    fit.degenerate = true;
    fit.gamma_hat = 0.0;
    fit.d_star_hat = fit.d0;
    fit.r_squared = 1.0;
    return fit;
  }

  constexpr int kGrid = 200;
  const double lo = std::log(1e-3), hi = std::log(10.0);
  std::vector<double> grid(kGrid);
  for (int i = 0; i < kGrid; ++i) grid[i] = std::exp(lo + (hi - lo) * i / (kGrid - 1));
  int best = 0;
  double best_sse = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kGrid; ++i) {
    const double s = detail::fit_at(tr, grid[i]).sse;
    if (s < best_sse) {
      best_sse = s;
      best = i;
    }
  }

  // golden section on log gamma between the neighbours of the best grid point
  double a = std::log(grid[std::max(0, best - 1)]);
  double b = std::log(grid[std::min(kGrid - 1, best + 1)]);
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  auto f = [&](double lg) { return detail::fit_at(tr, std::exp(lg)).sse; };
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 200 && (b - a) > 1e-14; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  double g = std::exp(0.5 * (a + b));
  auto e = detail::fit_at(tr, g);
  if (best_sse < e.sse) {
    g = grid[best];
    e = detail::fit_at(tr, g);
  }
  fit.gamma_hat = g;
  fit.d_star_hat = e.d_star;
  fit.r_squared = 1.0 - e.sse / sst;
  return fit;
}

// ---------------------------------------------------------------------------
// CSV with columns t,D

inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  os << "t,D\n" << std::setprecision(17);
  for (std::size_t i = 0; i < tr.size(); ++i) os << tr.t[i] << ',' << tr.d[i] << '\n';
}

inline Trajectory read_trajectory_csv(std::istream& is) {
  Trajectory tr;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      header_seen = true;
      if (line.find_first_not_of("0123456789.-+eE, \t") != std::string::npos) continue;  // header row
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError("line " + std::to_string(lineno) + ": expected 't,D'");
    try {
      std::size_t used = 0;
      const std::string a = line.substr(0, comma), b = line.substr(comma + 1);
      tr.t.push_back(std::stod(a, &used));
      tr.d.push_back(std::stod(b, &used));
    } catch (const std::logic_error&) {
      throw FormatError("line " + std::to_string(lineno) + ": non-numeric value");
    }
  }
  return tr;
}

}  // namespace abc
