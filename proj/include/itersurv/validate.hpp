#pragma once

// Invariant suite. Quick and full modes run the same checks with different budgets.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <boost/math/distributions/binomial.hpp>

#include "itersurv/config.hpp"
#include "itersurv/fluctuation.hpp"
#include "itersurv/oracles.hpp"
#include "itersurv/presets.hpp"
#include "itersurv/report.hpp"

namespace itersurv {

struct InvariantResult {
  std::string module;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct ValidateOptions {
  bool quick = true;
  std::uint64_t seed = 20240611;
  unsigned threads = 0;
  // Swappable for mutation tests.
  std::function<RunningExtrema(const PathSkeleton&)> extrema = [](const PathSkeleton& p) {
    return running_extrema(p);
  };
};

struct ValidationReport {
  std::vector<InvariantResult> results;
  bool quick = true;
  double seconds = 0.0;
  [[nodiscard]] bool all_passed() const {
    return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.passed; });
  }
};

namespace vdetail {

struct Check {
  bool ok = true;
  std::ostringstream msg;
  void expect(bool cond, const std::string& what) {
    if (!cond && ok) msg << what;
    ok = ok && cond;
  }
};

inline std::string num(double v) { return cfg::fmt(v); }

// Two-sample KS statistic.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

inline double ks_critical(double alpha, std::size_t n, std::size_t m) {
  const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
  return c * std::sqrt(static_cast<double>(n + m) / static_cast<double>(n * m));
}

struct Moments {
  double n = 0, mean = 0, m2 = 0;
  void add(double x) {
    n += 1;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
  [[nodiscard]] double var() const { return m2 / (n - 1); }
};

inline bool within_sigmas(double est, double target, double se, double k = 5.0) {
  return std::abs(est - target) <= k * se;
}

inline bool contains(const Interval& ci, double v) { return v >= ci.low && v <= ci.high; }

}  // namespace vdetail

inline std::vector<std::pair<std::string, std::string>> invariant_names() {
  return {
      {"core-rng", "stream-reproducibility"},
      {"core-rng", "parallel-serial-equivalence"},
      {"generators", "anchor-at-zero"},
      {"generators", "rademacher-unit-steps"},
      {"generators", "bm-self-similarity-ks"},
      {"generators", "ibm-step-covariance"},
      {"generators", "ibm-trapezoid-convergence"},
      {"generators", "fgn-increment-variance"},
      {"composition", "barrier-monotonicity"},
      {"composition", "one-two-sided-consistency"},
      {"composition", "duplicate-consistency"},
      {"composition", "query-exactness"},
      {"fluctuation-stats", "ladder-reconstruction"},
      {"fluctuation-stats", "ladder-direction-symmetry"},
      {"fluctuation-stats", "small-deviation-monotone"},
      {"fluctuation-stats", "srw-max-matches-dp"},
      {"estimation", "slope-scale-invariance"},
      {"estimation", "estimate-reproducibility"},
      {"estimation", "nested-barrier-monotonicity"},
      {"estimation", "wilson-calibration"},
      {"oracles", "dp-equals-enumeration"},
      {"oracles", "dp-monotonicity"},
      {"oracles", "bm-closed-form-asymptotics"},
      {"oracles", "small-deviation-series"},
      {"oracles", "counterexample-monte-carlo"},
      {"cli-runner", "preset-predictions"},
      {"cli-runner", "config-roundtrip"},
      {"cli-runner", "manifest-reproduces-results"},
  };
}

inline InvariantResult run_invariant(const std::string& name, const ValidateOptions& opt) {
  using namespace vdetail;
  const Seed seed{opt.seed};
  const auto cap = [&](std::uint64_t full, std::uint64_t quick) { return opt.quick ? std::min(quick, full) : full; };
  Check c;

  if (name == "stream-reproducibility") {
    const StreamKey k{3, 1, 42, kInner};
    Stream a = derive_stream(seed, k), b = derive_stream(seed, k), d = derive_stream(seed, k.with_channel(kOuterPlus));
    bool same = true, differs = false;
    for (int i = 0; i < 1000; ++i) {
      const auto x = a(), y = b(), z = d();
      same = same && x == y;
      differs = differs || x != z;
    }
    c.expect(same, "identical keys gave different streams");
    c.expect(differs, "channels share a stream");
  } else if (name == "parallel-serial-equivalence") {
    ExperimentPlan plan;
    plan.subject = CompositionSpec{brownian_motion(), {RandomWalkSpec{Gaussian{0, 1}}}, CompositionMode::OneSidedAbs, {}};
    plan.seed = seed;
    const HorizonSetup hs = make_setup(plan, 64.0, 0);
    const std::uint64_t n = cap(20000, 4000);
    plan.threads = 1;
    const auto s1 = estimate_survival(plan, hs, n);
    plan.threads = 3;
    const auto s3 = estimate_survival(plan, hs, n);
    c.expect(s1.n_survived == s3.n_survived,
             "serial " + std::to_string(s1.n_survived) + " vs parallel " + std::to_string(s3.n_survived));
  } else if (name == "anchor-at-zero") {
    Stream s = derive_stream(seed, StreamKey{});
    const TimeGrid g{0.125, 64};
    c.expect(gen_random_walk(50, Gaussian{0.3, 1}, s).values[0] == 0.0, "random walk");
    c.expect(gen_levy_path(g, LevySpec{0.1, 1, 2, Laplace{1, 1}, true}, s).values[0] == 0.0, "levy");
    c.expect(gen_ibm_path(g, IbmSpec{2}, s).values[0] == 0.0, "ibm");
    const auto f = gen_fbm_path(g, FbmSpec{0.3, true}, s);
    c.expect(f.plus.values[0] == 0.0 && f.minus->values[0] == 0.0, "fbm");
  } else if (name == "rademacher-unit-steps") {
    Stream s = derive_stream(seed, StreamKey{});
    const auto p = gen_random_walk(10000, Rademacher{}, s);
    for (std::size_t k = 1; k < p.values.size(); ++k)
      c.expect(std::abs(p.values[k] - p.values[k - 1]) == 1.0, "step " + std::to_string(k) + " is not +-1");
  } else if (name == "bm-self-similarity-ks") {
    const std::uint64_t n = cap(10000, 10000);
    const double dt = 1.0 / 64.0;
    auto sups = [&](double T, std::uint64_t scenario) {
      std::vector<double> out(n);
      const TimeGrid g = grid_for_horizon(T, dt);
      for (std::uint64_t i = 0; i < n; ++i) {
        Stream s = derive_stream(seed, StreamKey{scenario, 0, i, kInner});
        double x = 0.0, m = 0.0;
        for (std::size_t k = 0; k < g.count; ++k) {
          x += std::sqrt(dt) * s.normal();
          m = std::max(m, std::abs(x));
        }
        out[i] = m / std::sqrt(T);
      }
      return out;
    };
    const double d = ks_statistic(sups(16.0, 1), sups(64.0, 2));
    const double crit = ks_critical(0.001, n, n);
    c.expect(d < crit, "KS " + num(d) + " >= " + num(crit));
  } else if (name == "ibm-step-covariance") {
    for (int order : {1, 2, 3}) {
      for (double h : {0.5, 1.0, 3.0}) {
        const auto cov = ibm_step_covariance(order, h);
        // Simpson quadrature of int_0^h (h-s)^(j+k) / (j! k!) ds
        for (int j = 0; j <= order; ++j)
          for (int k = 0; k <= order; ++k) {
            const int m = 2000;
            double acc = 0.0;
            for (int i = 0; i <= m; ++i) {
              const double u = h * i / m;
              const double w = (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
              acc += w * std::pow(h - u, j + k);
            }
            acc *= h / m / 3.0 / (std::tgamma(j + 1.0) * std::tgamma(k + 1.0));
            c.expect(std::abs(acc - cov(j, k)) <= 1e-9 * std::max(1.0, std::abs(acc)),
                     "entry (" + std::to_string(j) + "," + std::to_string(k) + ") order " + std::to_string(order));
          }
      }
    }
    // one exact step from rest has that covariance
    const std::uint64_t n = cap(100000, 10000);
    Moments w, y;
    double cross = 0.0;
    for (std::uint64_t i = 0; i < n; ++i) {
      Stream s = derive_stream(seed, StreamKey{5, 0, i, kInner});
      IbmStepper st(1);
      st.step(2.0, s);
      w.add(st.state()[0]);
      y.add(st.state()[1]);
      cross += st.state()[0] * st.state()[1];
    }
    const double nn = static_cast<double>(n);
    c.expect(within_sigmas(w.var(), 2.0, 2.0 * std::sqrt(2.0 / nn)), "Var W(2) = " + num(w.var()));
    c.expect(within_sigmas(y.var(), 8.0 / 3.0, 8.0 / 3.0 * std::sqrt(2.0 / nn)), "Var Y(2) = " + num(y.var()));
    c.expect(within_sigmas(cross / nn, 2.0, std::sqrt((2.0 * 8.0 / 3.0 + 4.0) / nn)), "Cov = " + num(cross / nn));
  } else if (name == "ibm-trapezoid-convergence") {
    // trapezoid of BM on [0, 1] with step h has variance 1/3 - h^2/12
    const std::uint64_t n = cap(40000, 10000);
    Moments exact;
    std::vector<double> bias;
    for (std::uint64_t i = 0; i < n; ++i) {
      Stream s = derive_stream(seed, StreamKey{6, 0, i, kInner});
      IbmStepper st(1);
      for (int k = 0; k < 16; ++k) st.step(1.0 / 16.0, s);
      exact.add(st.value());
    }
    const double nn = static_cast<double>(n);
    const double se = (1.0 / 3.0) * std::sqrt(2.0 / nn);
    c.expect(within_sigmas(exact.var(), 1.0 / 3.0, se), "exact recursion variance " + num(exact.var()));
    double prev_gap = std::numeric_limits<double>::infinity();
    for (int m : {2, 8, 64}) {
      Moments tr;
      const double h = 1.0 / m;
      for (std::uint64_t i = 0; i < n; ++i) {
        Stream s = derive_stream(seed, StreamKey{7, static_cast<std::uint64_t>(m), i, kInner});
        double w = 0.0, acc = 0.0;
        for (int k = 0; k < m; ++k) {
          const double next = w + std::sqrt(h) * s.normal();
          acc += 0.5 * h * (w + next);
          w = next;
        }
        tr.add(acc);
      }
      const double target = 1.0 / 3.0 - h * h / 12.0;
      c.expect(within_sigmas(tr.var(), target, target * std::sqrt(2.0 / nn)),
               "trapezoid m=" + std::to_string(m) + " variance " + num(tr.var()));
      const double gap = std::abs(target - exact.var());
      c.expect(gap <= prev_gap + 5.0 * se, "no convergence at m=" + std::to_string(m));
      prev_gap = gap;
    }
  } else if (name == "fgn-increment-variance") {
    const std::uint64_t n = cap(40000, 10000);
    const double dt = 1.0 / 256.0;
    for (double H : {0.25, 0.5, 0.75}) {
      const FgnPlan plan(H, 256, dt);
      Moments m;
      std::vector<double> g;
      for (std::uint64_t i = 0; i < n; ++i) {
        Stream s = derive_stream(seed, StreamKey{8, 0, i, kInner});
        plan.sample(s, g);
        m.add(g[100]);
      }
      const double target = std::pow(dt, 2.0 * H);
      c.expect(within_sigmas(m.var(), target, target * std::sqrt(2.0 / static_cast<double>(n))),
               "H=" + num(H) + " variance " + num(m.var()) + " vs " + num(target));
    }
  } else if (name == "barrier-monotonicity") {
    const std::uint64_t n = cap(5000, 2000);
    const std::vector<double> barriers{0.25, 0.5, 1.0, 2.0, 4.0};
    for (std::uint64_t i = 0; i < n && c.ok; ++i) {
      Stream si = derive_stream(seed, StreamKey{9, 0, i, kInner});
      const auto rw = gen_random_walk(40, Gaussian{0, 1}, si);
      const auto bm = gen_levy_path(TimeGrid{0.25, 160}, brownian_motion(), si);
      for (int variant = 0; variant < 2; ++variant) {
        bool prev = false;
        for (double b : barriers) {
          const auto streams = composition_streams(seed, StreamKey{9, 0, i, kInner});
          const auto r = variant == 0
                             ? compose_survival_indicator(LevySpec{0, 1, 1, Laplace{1, 1}, true}, rw,
                                                          InnerType::Discrete, b, CompositionMode::OneSidedAbs,
                                                          ExactAtQueries{}, streams)
                             : compose_survival_indicator(brownian_motion(), bm, InnerType::Continuous, b,
                                                          CompositionMode::OneSidedAbs, DenseRange{0.125}, streams,
                                                          {SupMode::Bridge, false, nullptr});
          c.expect(!prev || r.survived, "sample " + std::to_string(i) + " survives b below " + num(b) + " only");
          prev = r.survived;
        }
      }
    }
  } else if (name == "one-two-sided-consistency") {
    const std::uint64_t n = cap(3000, 1000);
    const LevySpec x{0, 1, 1, Laplace{1, 1}, true};
    for (std::uint64_t i = 0; i < n && c.ok; ++i) {
      Stream si = derive_stream(seed, StreamKey{10, 0, i, kInner});
      PathSkeleton inner{TimeGrid{1.0, 30}, std::vector<double>(31, 0.0)};
      for (std::size_t k = 1; k <= 30; ++k) inner.values[k] = inner.values[k - 1] + std::abs(si.normal());
      const auto streams = composition_streams(seed, StreamKey{10, 0, i, kInner});
      const auto a = compose_survival_indicator(x, inner, InnerType::Continuous, 1.0, CompositionMode::OneSidedAbs,
                                                ExactAtQueries{}, streams);
      const auto b = compose_survival_indicator(TwoSidedSpec{x, x}, inner, InnerType::Continuous, 1.0,
                                                CompositionMode::TwoSided, ExactAtQueries{}, streams);
      c.expect(a.survived == b.survived && a.max_value == b.max_value, "sample " + std::to_string(i));
    }
  } else if (name == "duplicate-consistency") {
    PathSkeleton inner{TimeGrid{1.0, 7}, {0, 1, 2, 1, 2, 3, -2, 2}};
    const auto [plus, minus] = build_queries(inner, CompositionMode::OneSidedAbs);
    c.expect(plus.points == std::vector<double>{1, 2, 3}, "one-sided query set");
    c.expect(plus.back_map[2] == plus.back_map[4] && plus.back_map[4] == plus.back_map[6] &&
                 plus.back_map[6] == plus.back_map[7],
             "repeated values map to different queries");
    const auto [p2, m2] = build_queries(inner, CompositionMode::TwoSided);
    c.expect(p2.points == std::vector<double>{1, 2, 3} && m2.points == std::vector<double>{2}, "two-sided sets");
    Stream s = derive_stream(seed, StreamKey{11, 0, 0, kOuterPlus});
    const auto v = evaluate_levy_at(plus, brownian_motion(), s);
    c.expect(v.size() == plus.points.size(), "one outer value per distinct query");
  } else if (name == "query-exactness") {
    const std::uint64_t n = cap(100000, 10000);
    const LevySpec x{0.3, 1, 2, Laplace{0.5, 1}, false};
    QuerySet q;
    q.points = {0.5, 2.0, 2.25, 7.0};
    std::vector<std::vector<double>> inc(q.points.size());
    for (std::uint64_t i = 0; i < n; ++i) {
      const auto v = evaluate_levy_at(q, x, derive_stream(seed, StreamKey{12, 0, i, kOuterPlus}));
      double prev = 0.0;
      for (std::size_t j = 0; j < v.size(); ++j) {
        inc[j].push_back(v[j] - prev);
        prev = v[j];
      }
    }
    double prev_t = 0.0;
    const double nn = static_cast<double>(n);
    for (std::size_t j = 0; j < q.points.size(); ++j) {
      const double gap = q.points[j] - prev_t;
      prev_t = q.points[j];
      const double mu = x.mean_per_unit_time() * gap;
      const double var = x.variance_per_unit_time() * gap;
      Moments m;
      for (double d : inc[j]) m.add(d);
      double m4 = 0.0;
      for (double d : inc[j]) m4 += std::pow(d - m.mean, 4);
      m4 /= nn;
      const double se_var = std::sqrt(std::max(m4 - m.var() * m.var(), 0.0) / nn);
      c.expect(within_sigmas(m.mean, mu, std::sqrt(var / nn)), "gap mean " + num(m.mean) + " vs " + num(mu));
      c.expect(within_sigmas(m.var(), var, se_var), "gap variance " + num(m.var()) + " vs " + num(var));
    }
  } else if (name == "ladder-reconstruction") {
    const std::uint64_t n = cap(2000, 500);
    for (std::uint64_t i = 0; i < n && c.ok; ++i) {
      Stream s = derive_stream(seed, StreamKey{13, 0, i, kInner});
      const auto p = i % 2 ? gen_random_walk(60, Rademacher{}, s) : gen_random_walk(60, Laplace{0.1, 1}, s);
      const auto ext = opt.extrema(p);
      const auto d = ladder_decomposition(p, LadderDirection::Ascending);
      double acc = 0.0;
      for (std::size_t k = 0; k < d.epochs.size(); ++k) {
        acc += d.heights[k];
        const std::size_t e = d.epochs[k];
        c.expect(std::abs(acc - p.values[e]) <= 1e-9 && ext.max.size() == p.values.size() - 1 &&
                     std::abs(acc - ext.max[e - 1]) <= 1e-9,
                 "path " + std::to_string(i) + " epoch " + std::to_string(e));
      }
    }
  } else if (name == "ladder-direction-symmetry") {
    const std::uint64_t n = cap(2000, 500);
    for (std::uint64_t i = 0; i < n && c.ok; ++i) {
      Stream s = derive_stream(seed, StreamKey{14, 0, i, kInner});
      auto p = gen_random_walk(60, Gaussian{0, 1}, s);
      auto neg = p;
      for (auto& v : neg.values) v = -v;
      const auto a = ladder_decomposition(p, LadderDirection::Ascending);
      const auto b = ladder_decomposition(neg, LadderDirection::Descending);
      c.expect(a.epochs == b.epochs && a.heights == b.heights, "path " + std::to_string(i));
    }
  } else if (name == "small-deviation-monotone") {
    const std::vector<double> eps{0.5, 0.75, 1.0, 1.5};
    SmallDeviationOptions so;
    so.step = 0x1.0p-10;
    so.threads = opt.threads;
    const auto curve = small_deviation_curve(brownian_motion(), eps, cap(100000, 10000), seed, so);
    for (std::size_t j = 1; j < curve.size(); ++j)
      c.expect(curve[j].n_inside >= curve[j - 1].n_inside, "eps " + num(eps[j]) + " below eps " + num(eps[j - 1]));
    for (std::size_t j = 0; j < curve.size(); ++j)
      c.expect(curve[j].ci_low <= bm_small_dev_exact(eps[j]).value &&
                   bm_small_dev_exact(eps[j]).value <= curve[j].ci_high,
               "eps " + num(eps[j]) + " misses the series value");
  } else if (name == "srw-max-matches-dp") {
    // shared paths: every lattice barrier of one walk family
    const std::uint64_t n = cap(100000, 10000);
    const int steps = 16;
    std::vector<std::uint64_t> below(2 * steps + 1, 0);
    for (std::uint64_t i = 0; i < n; ++i) {
      Stream s = derive_stream(seed, StreamKey{15, 0, i, kInner});
      const auto p = gen_random_walk(steps, Rademacher{}, s);
      const double m = *std::max_element(p.values.begin() + 1, p.values.end());
      for (int b = -steps; b <= steps; ++b)
        if (m <= b) ++below[static_cast<std::size_t>(b + steps)];
    }
    for (int b = -steps; b <= steps; ++b) {
      const double exact = srw_max_dp(steps, b).value;
      const std::uint64_t k = below[static_cast<std::size_t>(b + steps)];
      c.expect(contains(wilson_interval(k, n, 0.999), exact), "barrier " + std::to_string(b));
    }
  } else if (name == "slope-scale-invariance") {
    auto fit_for = [](double scale) {
      std::vector<SurvivalEstimate> es;
      for (int j = 0; j < 6; ++j) {
        const double T = std::pow(2.0, 4 + j);
        const std::uint64_t n = 1000000;
        const double p = 3.0 * std::pow(T, -0.4);
        es.push_back(make_estimate(scale * T, 1.0, n, static_cast<std::uint64_t>(p * n), 0.99));
        es.back().p_hat = p;
      }
      return fit_exponent(es, 25);
    };
    const auto a = fit_for(1.0), b = fit_for(7.5);
    c.expect(std::abs(a.slope - b.slope) <= 1e-9, "slopes " + num(a.slope) + " vs " + num(b.slope));
    c.expect(std::abs(a.slope + 0.4) <= 1e-9, "slope " + num(a.slope));
    c.expect(std::abs(a.intercept - b.intercept) > 1e-6, "intercept did not move");
  } else if (name == "estimate-reproducibility") {
    ExperimentPlan plan = make_preset("levy-rw-centered").plan;
    plan.seed = seed;
    plan.threads = opt.threads;
    const HorizonSetup hs = make_setup(plan, 128.0, 0);
    const auto a = estimate_survival(plan, hs, cap(20000, 3000));
    const auto b = estimate_survival(plan, hs, cap(20000, 3000));
    c.expect(a.n_survived == b.n_survived && a.p_hat == b.p_hat && a.ci_low == b.ci_low, "re-run differs");
  } else if (name == "nested-barrier-monotonicity") {
    ExperimentPlan plan = make_preset("ibm-one-sided").plan;
    plan.seed = seed;
    plan.threads = opt.threads;
    std::uint64_t prev = 0;
    for (double b : {0.5, 1.0, 2.0}) {
      plan.barrier = b;
      const auto e = estimate_survival(plan, make_setup(plan, 64.0, 0), cap(10000, 2000));
      c.expect(e.n_survived >= prev, "barrier " + num(b));
      prev = e.n_survived;
    }
  } else if (name == "wilson-calibration") {
    const int reps = 200;
    const std::uint64_t per = 2000;
    const double exact = srw_max_dp(16, 0).value;
    boost::math::binomial_distribution<> law(static_cast<double>(per), exact);
    double exact_cov = 0.0;
    for (std::uint64_t k = 0; k <= per; ++k)
      if (contains(wilson_interval(k, per, 0.99), exact)) exact_cov += boost::math::pdf(law, static_cast<double>(k));
    c.expect(exact_cov >= 0.99, "exact binomial coverage " + num(exact_cov));
    int covered = 0;
    for (int r = 0; r < reps; ++r) {
      std::uint64_t k = 0;
      for (std::uint64_t i = 0; i < per; ++i) {
        Stream s = derive_stream(seed, StreamKey{16, static_cast<std::uint64_t>(r), i, kInner});
        double x = 0.0, m = -1.0;
        for (int t = 0; t < 16; ++t) {
          x += s.uniform() < 0.5 ? 1.0 : -1.0;
          m = std::max(m, x);
        }
        if (m <= 0.0) ++k;
      }
      if (contains(wilson_interval(k, per, 0.99), exact)) ++covered;
    }
    c.expect(covered >= 198, "coverage " + std::to_string(covered) + "/200");
    if (c.ok) c.msg << "coverage " << covered << "/200, exact " << num(exact_cov);
  } else if (name == "dp-equals-enumeration") {
    for (int N = 1; N <= 12; ++N)
      for (int b = -N; b <= N; ++b) {
        const auto dp = srw_max_dp(N, b), en = srw_max_enumerate(N, b);
        c.expect(dp.exact && en.exact && dp.exact->num == en.exact->num && dp.exact->den == en.exact->den,
                 "N=" + std::to_string(N) + " b=" + std::to_string(b));
      }
  } else if (name == "dp-monotonicity") {
    for (int N = 1; N <= 40; ++N)
      for (int b = -3; b <= 12; ++b) {
        const double v = srw_max_dp(N, b).value;
        c.expect(srw_max_dp(N + 1, b).value <= v + 1e-15, "N not monotone at " + std::to_string(N));
        c.expect(srw_max_dp(N, b + 1).value >= v - 1e-15, "barrier not monotone at " + std::to_string(b));
      }
  } else if (name == "bm-closed-form-asymptotics") {
    const double T = 1e8;
    for (double x : {0.5, 1.0, 3.0}) {
      const double lhs = bm_survival_closed_form(T, x).value * std::sqrt(T);
      const double rhs = x * std::sqrt(2.0 / boost::math::constants::pi<double>());
      c.expect(std::abs(lhs / rhs - 1.0) <= 1e-3, "x=" + num(x));
    }
  } else if (name == "small-deviation-series") {
    double prev = 1.0;
    for (double e : {3.0, 2.0, 1.5, 1.0, 0.75, 0.5, 0.3, 0.2}) {
      const double v = bm_small_dev_exact(e).value;
      c.expect(v < prev, "not decreasing at eps " + num(e));
      prev = v;
    }
    const double e = 0.2;
    const double ratio = std::log(bm_small_dev_exact(e).value) /
                         (-boost::math::constants::pi<double>() * boost::math::constants::pi<double>() / 8.0 / (e * e));
    c.expect(std::abs(ratio - 1.0) <= 0.02, "log ratio " + num(ratio));
  } else if (name == "counterexample-monte-carlo") {
    const std::uint64_t n = cap(100000, 10000);
    for (double T : {1.5, 4.5, 10.5, 30.5}) {
      const std::size_t m = static_cast<std::size_t>(std::floor(T + 0.5));
      std::uint64_t k = 0;
      for (std::uint64_t i = 0; i < n; ++i) {
        Stream s = derive_stream(seed, StreamKey{17, m, i, kOuterPlus});
        const auto v = gen_counterexample_values(m, s);
        if (std::all_of(v.begin(), v.end(), [](double x) { return x <= 1.0; })) ++k;
      }
      c.expect(contains(wilson_interval(k, n, 0.99), counterexample_survival_exact(T).value), "T=" + num(T));
    }
  } else if (name == "preset-predictions") {
    for (const std::string p : {"bm-baseline", "ibm-one-sided", "ibm-chain-2", "integrated-inner-1",
                                "levy-rw-centered", "levy-rw-drift", "levy-subordinator", "iterated-bm-two-sided",
                                "two-sided-levy-rw", "two-sided-levy-rw-drift", "fbm-outer-0.25",
                                "fbm-one-sided-molchan", "counterexample"}) {
      const Preset pr = make_preset(p);
      const Prediction pred = predicted_exponent(pr.plan.subject);
      c.expect(pred.theta.has_value() && pred.theorem != "none", p + " has no prediction");
    }
  } else if (name == "config-roundtrip") {
    for (const std::string p : {"bm-baseline", "ibm-chain-3", "integrated-inner-2", "levy-subordinator",
                                "iterated-bm-two-sided", "two-sided-levy-rw-drift", "fbm-outer-0.75",
                                "counterexample"}) {
      const std::string text = plan_to_config(make_preset(p).plan);
      const std::string again = plan_to_config(parse_config_text(text));
      c.expect(text == again, p + " does not round-trip");
      c.expect(config_digest(text) == config_digest(again), p + " digest");
    }
  } else if (name == "manifest-reproduces-results") {
    Preset p = make_preset("levy-rw-drift");
    p.plan.horizons = {16, 32};
    p.plan.budget = {cap(4000, 1500), 0.0, 1'000'000, 1.0};
    p.plan.seed = seed;
    p.plan.threads = opt.threads;
    const auto dir = std::filesystem::temp_directory_path() /
                     ("itersurv-validate-" + std::to_string(::getpid()));
    const auto r1 = run_experiment(p.plan);
    RunManifest m{"levy-rw-drift", plan_to_config(p.plan), "", ""};
    const auto files = write_run(dir, p.plan, r1, m);
    std::ifstream mf(files.manifest);
    const auto j = nlohmann::json::parse(mf);
    const ExperimentPlan again = parse_config_text(j.at("config").get<std::string>());
    const auto r2 = run_experiment(again);
    std::ostringstream a, b;
    write_estimates_csv(a, r1.estimates);
    write_estimates_csv(b, r2.estimates);
    c.expect(a.str() == b.str(), "re-run from manifest differs");
    c.expect(j.at("config_digest").get<std::string>() == config_digest(plan_to_config(again)), "digest mismatch");
    std::filesystem::remove_all(dir);
  } else {
    throw ConfigError("unknown invariant '" + name + "'");
  }
  InvariantResult r;
  r.name = name;
  r.passed = c.ok;
  r.detail = c.msg.str();
  return r;
}

inline ValidationReport validate_suite(const ValidateOptions& opt, std::ostream* progress = nullptr) {
  ValidationReport rep;
  rep.quick = opt.quick;
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& [module, name] : invariant_names()) {
    const auto s = std::chrono::steady_clock::now();
    InvariantResult r;
    try {
      r = run_invariant(name, opt);
    } catch (const std::exception& e) {
      r.name = name;
      r.passed = false;
      r.detail = std::string("exception: ") + e.what();
    }
    r.module = module;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - s).count();
    if (progress)
      *progress << (r.passed ? "PASS " : "FAIL ") << r.module << '/' << r.name << "  (" << cfg::fmt(std::round(r.seconds * 100) / 100)
                << " s)" << (r.detail.empty() ? "" : "  " + r.detail) << '\n'
                << std::flush;
    rep.results.push_back(std::move(r));
  }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace itersurv
