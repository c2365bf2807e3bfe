// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "support/generators.hpp"

using namespace abc;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) { return std::chrono::duration<double, std::milli>(Clock::now() - t0).count(); }

struct Outcome_ {
  bool pass = true;
  std::ostringstream detail;
  void require(bool cond, const std::string& why) {
    if (!cond) {
      pass = false;
      detail << " [failed: " << why << "]";
    }
  }
};

int failures = 0;

void report(int id, const char* name, const std::function<void(Outcome_&)>& body) {
  Outcome_ o;
  const auto t0 = Clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail << " [exception: " << e.what() << "]";
  }
  const double ms = ms_since(t0);
  if (!o.pass) ++failures;
  std::printf("%s  %2d %-28s %s (%.1f ms)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.str().c_str(), ms);
  std::fflush(stdout);
}

// ---------------------------------------------------------------------------

void compliance_bounds(Outcome_& o) {
  const auto t0 = Clock::now();
  const double a = compliance_no_recovery(0.99, 100);
  const double b = compliance_with_recovery(0.99, 0.95, 100);
  const double ms = ms_since(t0);
  o.detail << "no_recovery=" << a << " with_recovery=" << b << " t=" << ms << "ms";
  o.require(std::abs(a - 0.3660) <= 0.0005, "0.99^100");
  // 1 - 100 * 0.01 * 0.05, evaluated the same way as the closed form
  o.require(std::abs(b - 0.95) <= 1e-12, "with recovery != 0.95");
  o.require(ms < 1.0, "runtime");
}

void uniform_chain(Outcome_& o) {
  ChainSpec s;
  for (int i = 0; i < 5; ++i) s.agents.push_back({"a" + std::to_string(i), 0.95, 0.02});
  for (int i = 0; i < 4; ++i) s.handoffs.push_back({0.98, 0.01});
  const auto t0 = Clock::now();
  const auto b = chain_bounds(s);
  const double ms = ms_since(t0);
  o.detail << "p=" << b.p_chain << " delta=" << b.delta_chain << " t=" << ms << "ms";
  o.require(std::abs(b.p_chain - 0.714) <= 0.001, "p");
  o.require(std::abs(b.delta_chain - 0.14) <= 1e-12, "delta");
  o.require(ms < 1.0, "runtime");
}

void sample_complexity(Outcome_& o) {
  const auto t0 = Clock::now();
  const auto n = hoeffding_n(0.01, 0.05);
  const double d = kl(0.95, 0.90);
  const double en = sprt_expected_n(SprtConfig{}, Hypothesis::h1);
  const double ms = ms_since(t0);
  o.detail << "hoeffding=" << n << " kl=" << d << " E[N|H1]=" << en << " t=" << ms << "ms";
  o.require(n == 18445, "hoeffding");
  o.require(std::abs(d - 0.01671) <= 1e-4, "kl");
  o.require(std::abs(en - 159.0) <= 2.0, "wald");
  o.require(ms < 1.0, "runtime");
}

struct SprtRun {
  double mean_n = 0.0;
  double accept_h0 = 0.0;
  double accept_h1 = 0.0;
};

SprtRun sprt_mc(double p_true, std::size_t reps, std::uint64_t seed) {
  const SprtConfig cfg{0.90, 0.95, 0.05, 0.05};
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution draw(p_true);
  SprtRun r;
  double total = 0.0;
  std::size_t h0 = 0, h1 = 0;
  for (std::size_t i = 0; i < reps; ++i) {
    auto s = sprt_start(cfg);
    while (!s.decided()) s = sprt_update(s, cfg, draw(rng));
    total += static_cast<double>(s.n);
    (s.decision == SprtDecision::accept_h1 ? h1 : h0)++;
  }
  r.mean_n = total / static_cast<double>(reps);
  r.accept_h0 = static_cast<double>(h0) / static_cast<double>(reps);
  r.accept_h1 = static_cast<double>(h1) / static_cast<double>(reps);
  return r;
}

void sprt_monte_carlo(Outcome_& o) {
  const auto t0 = Clock::now();
  const auto at_h1 = sprt_mc(0.95, 10000, 11);
  const auto at_h0 = sprt_mc(0.90, 10000, 12);
  const double ms = ms_since(t0);
  o.detail << "mean_N(p=.95)=" << at_h1.mean_n << " typeII=" << at_h1.accept_h0 << " typeI=" << at_h0.accept_h1
           << " mean_N(p=.90)=" << at_h0.mean_n;
  o.require(at_h1.mean_n >= 150 && at_h1.mean_n <= 300, "mean stopping time");
  o.require(at_h1.accept_h0 <= 1.2 * 0.05, "type II error");
  o.require(at_h0.accept_h1 <= 1.2 * 0.05, "type I error");
  o.require(ms < 30000, "runtime");
}

void ou_stationary(Outcome_& o) {
  const auto t0 = Clock::now();
  const std::vector<OUParams> triples{{0.02, 0.2, 0.05, 0.0}, {0.1, 0.5, 0.1, 1.0}, {0.05, 1.0, 0.2, 0.5}};
  const std::size_t n = 10000;
  std::uint64_t seed = 100;
  for (const auto& p : triples) {
    const auto xs = simulate_endpoints(p, 10.0 / p.gamma, n, seed++, Sampler::exact, 0.01);
    const auto st = stationary_stats(p);
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const double var = ss / (n - 1);
    const double se = std::sqrt(st.variance / n);
    o.detail << "(a=" << p.alpha << ",g=" << p.gamma << ",s=" << p.sigma << ": mean " << mean << " vs " << st.mean << ", var " << var
             << " vs " << st.variance;
    o.require(std::abs(mean - st.mean) <= 3 * se, "mean");
    o.require(std::abs(var / st.variance - 1.0) <= 0.05, "variance");
    // burn-in leaves e^{-10} of the start offset
    const double sd = std::sqrt(st.variance);
    for (double k : {0.5, 1.0, 2.0}) {
      const double eta = k * sd;
      const double bound = tail_probability(p, eta);
      const double freq = static_cast<double>(std::count_if(xs.begin(), xs.end(), [&](double x) { return x > st.mean + eta; })) / n;
      const double tol = 3 * std::sqrt(bound * (1 - bound) / n);
      o.require(freq <= bound + tol, "tail bound");
      o.detail << ", P(>" << k << "sd)=" << freq << "<=" << bound;
    }
    o.detail << ") ";
  }
  o.require(ms_since(t0) < 60000, "runtime");
}

void design_round_trip(Outcome_& o) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ua(0.005, 0.1), us(0.01, 0.3), ud(0.1, 0.9), ue(0.001, 0.2);
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double a = ua(rng), s = us(rng), d = ud(rng), e = ue(rng);
    const double g = solve_design_gamma(a, s, DesignSpec{d, e});
    const double tail = tail_probability(OUParams{a, g, s, 0.0}, d - a / g);
    worst = std::max(worst, std::abs(tail - e));
    o.require(g > a / d, "gamma_min <= alpha/d_max");
  }
  o.detail << "10 grid points, max |tail - eps| = " << worst;
  o.require(worst <= 1e-9, "round trip");
}

// JSD from the definition, base 2
double jsd_ref(const std::vector<double>& p, const std::vector<double>& q) {
  double out = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0) out += 0.5 * p[i] * std::log2(p[i] / m);
    if (q[i] > 0) out += 0.5 * q[i] * std::log2(q[i] / m);
  }
  return out;
}

std::vector<double> random_dist(std::mt19937_64& rng, std::size_t n) {
  std::gamma_distribution<double> g(0.5, 1.0);
  std::vector<double> v(n);
  double tot = 0.0;
  for (auto& x : v) tot += (x = g(rng) + 1e-12);
  for (auto& x : v) x /= tot;
  return v;
}

void drift_properties(Outcome_& o) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(99);
  std::size_t range_bad = 0, min_bad = 0, tri_bad = 0, window_bad = 0, minimal_cases = 0;
  for (int c = 0; c < 1000; ++c) {
    const std::size_t v = 2 + rng() % 8;
    DriftConfig cfg;
    for (std::size_t i = 0; i < v; ++i) cfg.vocabulary.push_back("L" + std::to_string(i));
    cfg.window = 1 + rng() % 12;
    cfg.w_c = std::uniform_real_distribution<double>(0.05, 0.95)(rng);
    cfg.w_d = 1.0 - cfg.w_c;

    // labels, with an occasional out-of-vocabulary one
    const std::size_t steps = 1 + rng() % 30;
    std::vector<std::string> labels;
    for (std::size_t t = 0; t < steps; ++t)
      labels.push_back(rng() % 10 == 0 ? "zz" + std::to_string(rng() % 3) : cfg.vocabulary[rng() % v]);
    const bool matched = c % 4 == 0;
    if (matched) {
      // reference equal to the final window's histogram
      std::map<std::string, double> ref;
      const std::size_t from = steps > cfg.window ? steps - cfg.window : 0;
      for (std::size_t t = from; t < steps; ++t) {
        const auto& l = labels[t];
        const bool known = std::find(cfg.vocabulary.begin(), cfg.vocabulary.end(), l) != cfg.vocabulary.end();
        ref[known ? l : std::string(kOtherLabel)] += 1.0 / static_cast<double>(steps - from);
      }
      cfg.reference = ref;
    } else if (c % 2 == 0) {
      auto r = random_dist(rng, v);
      for (std::size_t i = 0; i < v; ++i) cfg.reference[cfg.vocabulary[i]] = r[i];
    }

    DriftWindow win(cfg);
    DriftSample last;
    bool full_compliance = false;
    for (std::size_t t = 0; t < steps; ++t) {
      StepEvaluation ev;
      ev.step = t;
      full_compliance = rng() % 3 == 0;
      for (int k = 0; k < 4; ++k) {
        ConstraintResult r;
        r.name = "c" + std::to_string(k);
        r.weight = 0.5 + (rng() % 4);
        r.skipped = rng() % 5 == 0;
        r.satisfied = full_compliance || rng() % 2 == 0;
        ev.results.push_back(r);
      }
      ActionRecord a{labels[t], json::object()};
      last = update_drift(win, cfg, ev, &a);
      if (!(last.d_total >= 0.0 && last.d_total <= 1.0)) ++range_bad;

      // recompute from scratch over the last `window` labels
      const auto sup = cfg.support();
      std::vector<double> hist(sup.size(), 0.0);
      const std::size_t from = t + 1 > cfg.window ? t + 1 - cfg.window : 0;
      for (std::size_t u = from; u <= t; ++u) {
        auto it = std::find(sup.begin(), sup.end(), labels[u]);
        hist[it == sup.end() ? sup.size() - 1 : static_cast<std::size_t>(it - sup.begin())] += 1.0;
      }
      for (auto& h : hist) h /= static_cast<double>(t + 1 - from);
      const double fresh = jsd_ref(smooth(hist), smooth(cfg.reference_vector()));
      if (std::abs(fresh - last.d_distributional) > 1e-12) ++window_bad;

      const bool compliant = weighted_gap(ev.results) == 0.0;
      if (t + 1 == steps) {
        const auto ref = cfg.reference_vector();
        bool identical = true;
        for (std::size_t i = 0; i < hist.size(); ++i) identical = identical && std::abs(hist[i] - ref[i]) < 1e-12;
        if (compliant && identical) ++minimal_cases;
        const bool minimal = last.d_total <= 1e-12;
        if (minimal != (compliant && identical)) ++min_bad;
      }
    }

    const auto p = random_dist(rng, v), q = random_dist(rng, v), r = random_dist(rng, v);
    const double pq = std::sqrt(jsd(p, q)), qr = std::sqrt(jsd(q, r)), pr = std::sqrt(jsd(p, r));
    if (pr > pq + qr + 1e-9) ++tri_bad;
  }
  const double ms = ms_since(t0);
  o.detail << "1000 cases: range " << range_bad << ", minimality " << min_bad << " (" << minimal_cases << " minimal), triangle "
           << tri_bad << ", window " << window_bad << " mismatches";
  o.require(range_bad == 0, "range");
  o.require(min_bad == 0, "minimality");
  o.require(minimal_cases > 0, "no minimal case exercised");
  o.require(tri_bad == 0, "triangle");
  o.require(window_bad == 0, "incremental window");
  o.require(ms < 10000, "runtime");
}

void satisfaction_oracle(Outcome_& o) {
  gen_test::Rng rng(4242);
  std::size_t mismatch = 0, ratio_mismatch = 0, violating = 0;
  for (int i = 0; i < 500; ++i) {
    auto in = gen_test::make_oracle_instance(rng);
    const auto want = gen_test::oracle_verdict(in);
    const auto got = check_deterministic(in.contract, in.trace);
    if (got.preconditions_ok != want.pre || got.invariants_ok != want.inv || got.governance_ok != want.gov ||
        got.recoverability_ok != want.rec || got.overall != want.overall())
      ++mismatch;
    if (!want.overall()) ++violating;
    const auto evals = evaluate_trace(in.contract, in.trace);
    for (const auto& e : evals)
      if (std::abs(e.c_hard - gen_test::oracle_ratio(in, e.step, Severity::hard)) > 1e-12 ||
          std::abs(e.c_soft - gen_test::oracle_ratio(in, e.step, Severity::soft)) > 1e-12)
        ++ratio_mismatch;
  }
  o.detail << "500 instances (" << violating << " violating): verdict mismatches " << mismatch << ", ratio mismatches " << ratio_mismatch;
  o.require(mismatch == 0, "verdict");
  o.require(ratio_mismatch == 0, "compliance ratios");
  o.require(violating > 50 && violating < 450, "corpus not mixed");
}

void compositionality(Outcome_& o) {
  gen_test::Rng rng(77);
  std::size_t agent_bad = 0, cond_bad = 0, composed_bad = 0, missed = 0, injected = 0;
  for (int i = 0; i < 200; ++i) {
    auto cc = gen_test::make_chain_case(rng, 2 + gen_test::pick(rng, 3));
    bool ok = true;
    for (std::size_t s = 0; s < cc.segments.size(); ++s)
      if (!check_deterministic(cc.pipeline.stages[s].contract, cc.segments[s]).overall) ok = false;
    if (!ok) ++agent_bad;
    if (!check_pipeline(cc.pipeline, cc.samples).all_pass()) ++cond_bad;
    if (!verify_chain_trace(compose_pipeline(cc.pipeline), cc.trace).overall) ++composed_bad;
    for (int cond = 1; cond <= 4; ++cond) {
      auto broken = cc;
      const auto j = gen_test::pick(rng, broken.pipeline.handoffs.size());
      gen_test::inject_fault(broken, cond, j, rng);
      ++injected;
      const auto failed = check_pipeline(broken.pipeline, broken.samples).handoffs[j].second.failed();
      if (std::find(failed.begin(), failed.end(), "C" + std::to_string(cond)) == failed.end()) ++missed;
    }
  }
  o.detail << "200 chains: premises failing " << agent_bad + cond_bad << ", composed violations " << composed_bad << "; " << injected
           << " injected faults, " << missed << " missed";
  o.require(agent_bad == 0 && cond_bad == 0, "generator premises");
  o.require(composed_bad == 0, "composed contract");
  o.require(missed == 0, "fault detection");
}

void bench_suite(Outcome_& o) {
  const auto t0 = Clock::now();
  const auto scores = score_all(load_suite(fx::data_dir() / "bench"));
  const auto summary = aggregate(scores);
  const double ms = ms_since(t0);
  std::set<std::string> domains;
  for (const auto& s : scores) domains.insert(s.domain);
  const auto passed = std::count_if(scores.begin(), scores.end(), [](const auto& s) { return s.pass; });
  o.detail << scores.size() << " scenarios, " << domains.size() << " families, detection " << summary.overall.detection_accuracy << ", "
           << passed << " pass";
  o.require(scores.size() >= 50, "suite size");
  o.require(domains.size() >= 6 && domains.count("loan_pipeline"), "families");
  o.require(summary.overall.detection_accuracy == 1.0, "detection accuracy");
  o.require(ms < 30000, "runtime");
}

void enforcement_overhead(Outcome_& o) {
  const std::size_t k = 100, vocab = 50;
  Contract c;
  c.name = "load";
  for (std::size_t i = 0; i < vocab; ++i) c.drift.vocabulary.push_back("act" + std::to_string(i));
  c.recovery_strategies.push_back({"retry", StrategyType::re_prompt, json::object(), 2, std::nullopt});
  for (std::size_t i = 0; i < k; ++i) {
    const auto f = "m.f" + std::to_string(i);
    const auto name = "c" + std::to_string(i);
    if (i % 10 == 0) {
      c.governance_hard.push_back(fx::forbid(name, Severity::hard, {"act48", "act49"}));
    } else if (i % 10 == 1) {
      c.invariants_hard.push_back(fx::make(name, Section::invariant, Severity::hard, Predicate::expression(f + " >= 0 and " + f + " <= 1")));
    } else if (i % 2 == 0) {
      c.invariants_hard.push_back(fx::inv(name, Severity::hard, f, 0.0));
    } else {
      c.invariants_soft.push_back(fx::inv(name, Severity::soft, f, 0.05, "retry"));
    }
  }
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SessionMonitor mon(c);
  std::vector<double> lat;
  const std::size_t steps = 2000;
  for (std::size_t t = 0; t < steps; ++t) {
    json m = json::object();
    for (std::size_t i = 0; i < k; ++i) m["f" + std::to_string(i)] = u(rng);
    json state = {{"m", m}};
    ActionRecord a{"act" + std::to_string(rng() % 48), json::object()};
    const auto t0 = Clock::now();
    mon.step(state, &a);
    lat.push_back(ms_since(t0));
  }
  std::sort(lat.begin(), lat.end());
  auto q = [&](double f) { return lat[static_cast<std::size_t>(f * (lat.size() - 1))]; };
  o.detail << k << " constraints, |A|=" << vocab << ", " << steps << " steps: min " << q(0) << " p50 " << q(0.5) << " p90 " << q(0.9)
           << " p99 " << q(0.99) << " max " << q(1.0) << " ms";
  o.require(q(0.5) < 10.0, "median latency");
}

}  // namespace

int main() {
  report(1, "compliance bounds", compliance_bounds);
  report(2, "uniform chain bounds", uniform_chain);
  report(3, "sample complexity", sample_complexity);
  report(4, "SPRT Monte Carlo", sprt_monte_carlo);
  report(5, "OU stationary statistics", ou_stationary);
  report(6, "design round trip", design_round_trip);
  report(7, "drift score properties", drift_properties);
  report(8, "satisfaction oracle", satisfaction_oracle);
  report(9, "compositionality", compositionality);
  report(10, "benchmark self-consistency", bench_suite);
  report(11, "enforcement overhead", enforcement_overhead);
  std::printf("%d/11 criteria pass\n", 11 - failures);
  return failures == 0 ? 0 : 1;
}
