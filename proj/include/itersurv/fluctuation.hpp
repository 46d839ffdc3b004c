#pragma once

// Running extrema, ladder decompositions and the hypothesis probes.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "itersurv/composition.hpp"
#include "itersurv/generators.hpp"
#include "itersurv/parallel.hpp"
#include "itersurv/process.hpp"
#include "itersurv/rng.hpp"
#include "itersurv/stats.hpp"

namespace itersurv {

struct RunningExtrema {
  std::vector<double> max;  // M_n, n = 1..N
  std::vector<double> min;  // I_n
};

inline RunningExtrema running_extrema(const PathSkeleton& path) {
  if (path.values.size() < 2) throw ConfigError("running_extrema: path needs a value after the anchor");
  RunningExtrema r;
  const std::size_t n = path.values.size() - 1;
  r.max.resize(n);
  r.min.resize(n);
  double hi = path.values[1], lo = path.values[1];
  for (std::size_t k = 1; k <= n; ++k) {
    hi = std::max(hi, path.values[k]);
    lo = std::min(lo, path.values[k]);
    r.max[k - 1] = hi;
    r.min[k - 1] = lo;
  }
  return r;
}

enum class LadderDirection { Ascending, Descending };

struct LadderDecomposition {
  LadderDirection direction = LadderDirection::Ascending;
  std::vector<std::size_t> epochs;
  std::vector<double> heights;
};

// Strict records above max(0, earlier values); descending uses -path.
inline LadderDecomposition ladder_decomposition(const PathSkeleton& path, LadderDirection dir) {
  if (path.values.size() < 2) throw ConfigError("ladder_decomposition: path needs a value after the anchor");
  LadderDecomposition d;
  d.direction = dir;
  const double sign = dir == LadderDirection::Ascending ? 1.0 : -1.0;
  double record = 0.0;
  for (std::size_t k = 1; k < path.values.size(); ++k) {
    const double v = sign * path.values[k];
    if (v > record) {
      d.epochs.push_back(k);
      d.heights.push_back(v - record);
      record = v;
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Unit-interval sampling shared by the probes

namespace detail {

// Calls visit(t_index, value) for k = 1..M on [0, 1] with step dt; stops
// when visit returns false. BM/Levy and IBM are stepped, fBm is drawn whole.
template <class Visit>
void walk_unit_interval(const ProcessSpec& spec, double dt, Stream& stream, FgnPlanCache& cache, Visit&& visit) {
  const TimeGrid grid = grid_for_horizon(1.0, dt);
  std::visit(overloaded{
                 [&](const LevySpec& l) {
                   double x = 0.0;
                   for (std::size_t k = 1; k <= grid.count; ++k) {
                     const LevyIncrement inc = levy_increment(l, grid.step, stream);
                     const double pre = x + inc.continuous;
                     x = pre + inc.jumps;
                     if (!visit(k, x, pre)) return;
                   }
                 },
                 [&](const IbmSpec& i) {
                   IbmStepper st(i.order);
                   for (std::size_t k = 1; k <= grid.count; ++k) {
                     st.step(grid.step, stream);
                     if (!visit(k, st.value(), st.value())) return;
                   }
                 },
                 [&](const FbmSpec& f) {
                   auto plan = cache.get(f.hurst, grid.count, grid.step);
                   std::vector<double> g;
                   plan->sample(stream, g);
                   double s = 0.0;
                   for (std::size_t k = 1; k <= grid.count; ++k) {
                     s += g[k - 1];
                     if (!visit(k, s, s)) return;
                   }
                 },
                 [&](const RandomWalkSpec& rw) {
                   // unit interval of a unit-step walk: a single step
                   const double v = sample(rw.law, stream);
                   visit(1, v, v);
                 },
                 [&](const auto&) { throw ConfigError("probe: unsupported process for unit-interval sampling"); },
             },
             spec);
}

inline double diffusion_sigma(const ProcessSpec& spec) {
  if (const auto* l = std::get_if<LevySpec>(&spec)) return l->sigma;
  if (const auto* i = std::get_if<IbmSpec>(&spec); i && i->order == 0) return 1.0;
  return 0.0;
}

inline ProcessSpec as_steppable(const ProcessSpec& spec) {
  if (const auto* i = std::get_if<IbmSpec>(&spec); i && i->order == 0) return brownian_motion();
  return spec;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Small deviations: P(sup_[0,1] |Y| <= eps)

struct SmallDeviationPoint {
  double eps = 0.0;
  std::uint64_t n_samples = 0;
  std::uint64_t n_inside = 0;
  double p_hat = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct SmallDeviationOptions {
  double step = 0x1.0p-10;
  double level = 0.99;
  // Between grid points, kill with the Brownian-bridge strip-exit probability
  // of the diffusion part (BM and Levy specs only).
  bool bridge_correction = true;
  unsigned threads = 0;
  std::uint64_t scenario_index = 0;
};

inline std::vector<SmallDeviationPoint> small_deviation_curve(const ProcessSpec& spec_in,
                                                              const std::vector<double>& eps_list,
                                                              std::uint64_t samples, Seed seed,
                                                              const SmallDeviationOptions& opt = {}) {
  if (samples < 1) throw ConfigError("small_deviation_curve: samples must be at least 1");
  if (eps_list.empty()) throw ConfigError("small_deviation_curve: eps list is empty");
  for (double e : eps_list)
    if (!(e > 0.0)) throw ConfigError("small_deviation_curve: eps values must be positive");
  if (!(opt.step > 0.0 && opt.step <= 0x1.0p-10))
    throw ConfigError("small_deviation_curve: step must lie in (0, 2^-10]");
  validate(spec_in);
  const ProcessSpec spec = detail::as_steppable(spec_in);
  const double sigma = opt.bridge_correction ? detail::diffusion_sigma(spec) : 0.0;
  const double two_over_var = sigma > 0.0 ? 2.0 / (sigma * sigma * opt.step) : 0.0;
  const std::size_t ne = eps_list.size();

  // All eps share each path and its kill uniform, so the curve is monotone
  // in eps sample by sample.
  const unsigned threads = worker_count(opt.threads);
  std::vector<std::vector<std::uint64_t>> partial(threads, std::vector<std::uint64_t>(ne, 0));
  parallel_blocks(samples, threads, [&](unsigned w, std::uint64_t begin, std::uint64_t end) {
    FgnPlanCache cache;
    std::vector<char> alive(ne);
    std::vector<double> log_keep(ne);
    for (std::uint64_t i = begin; i < end; ++i) {
      Stream stream = derive_stream(seed, StreamKey{opt.scenario_index, 0, i, kInner});
      Stream kill = derive_stream(seed, StreamKey{opt.scenario_index, 0, i, kOuterPlus});
      std::fill(alive.begin(), alive.end(), 1);
      std::fill(log_keep.begin(), log_keep.end(), 0.0);
      std::size_t n_alive = ne;
      double prev = 0.0;
      detail::walk_unit_interval(spec, opt.step, stream, cache, [&](std::size_t, double x, double pre) {
        for (std::size_t j = 0; j < ne; ++j) {
          if (!alive[j]) continue;
          const double eps = eps_list[j];
          if (std::abs(x) > eps || std::abs(pre) > eps) {
            alive[j] = 0;
            --n_alive;
            continue;
          }
          if (two_over_var > 0.0) {
            const double up = two_over_var * (eps - prev) * (eps - pre);
            const double dn = two_over_var * (eps + prev) * (eps + pre);
            double p = 0.0;
            if (up < 40.0) p += std::exp(-up);
            if (dn < 40.0) p += std::exp(-dn);
            if (p > 0.0) log_keep[j] += std::log1p(-std::min(p, 1.0));
          }
        }
        prev = x;
        return n_alive > 0;
      });
      if (n_alive == 0) continue;
      const double u = kill.uniform();
      for (std::size_t j = 0; j < ne; ++j)
        if (alive[j] && u < std::exp(log_keep[j])) ++partial[w][j];
    }
  });

  std::vector<SmallDeviationPoint> out(ne);
  for (std::size_t j = 0; j < ne; ++j) {
    std::uint64_t inside = 0;
    for (const auto& p : partial) inside += p[j];
    auto& pt = out[j];
    pt.eps = eps_list[j];
    pt.n_samples = samples;
    pt.n_inside = inside;
    pt.p_hat = static_cast<double>(inside) / static_cast<double>(samples);
    const auto ci = wilson_interval(inside, samples, opt.level);
    pt.ci_low = ci.low;
    pt.ci_high = ci.high;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Negative moments E[(sup_[0,1] |Y|)^-eta]

struct NegativeMomentEstimate {
  double eta = 0.0;
  std::uint64_t n_samples = 0;
  double mean = 0.0;
  double std_error = 0.0;
  bool heavy_tail = false;  // top 0.1% of summands carry more than half the mass
  double top_share = 0.0;
};

inline NegativeMomentEstimate negative_moment_estimate(const ProcessSpec& spec_in, double eta, std::uint64_t samples,
                                                       Seed seed, double step = 0x1.0p-10,
                                                       std::uint64_t scenario_index = 0) {
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw ConfigError("negative_moment_estimate: eta must be nonnegative");
  if (samples < 1) throw ConfigError("negative_moment_estimate: samples must be at least 1");
  validate(spec_in);
  const ProcessSpec spec = detail::as_steppable(spec_in);
  FgnPlanCache cache;
  std::vector<double> terms(samples);
  for (std::uint64_t i = 0; i < samples; ++i) {
    Stream stream = derive_stream(seed, StreamKey{scenario_index, 0, i, kInner});
    double sup = 0.0;
    detail::walk_unit_interval(spec, step, stream, cache, [&](std::size_t, double x, double pre) {
      sup = std::max({sup, std::abs(x), std::abs(pre)});
      return true;
    });
    if (!(sup > 0.0))
      throw ConfigError("negative_moment_estimate: sampled supremum is 0; the moment is undefined for this process");
    terms[i] = std::pow(sup, -eta);
  }
  NegativeMomentEstimate r;
  r.eta = eta;
  r.n_samples = samples;
  const double n = static_cast<double>(samples);
  const double sum = std::accumulate(terms.begin(), terms.end(), 0.0);
  r.mean = sum / n;
  double ss = 0.0;
  for (double t : terms) ss += (t - r.mean) * (t - r.mean);
  r.std_error = samples > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  const std::size_t top = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.001 * n)));
  std::nth_element(terms.begin(), terms.begin() + static_cast<std::ptrdiff_t>(top - 1), terms.end(),
                   std::greater<>{});
  double top_sum = 0.0;
  for (std::size_t k = 0; k < top; ++k) top_sum += terms[k];
  r.top_share = sum > 0.0 ? top_sum / sum : 0.0;
  r.heavy_tail = samples >= 1000 && r.top_share > 0.5;
  return r;
}

// ---------------------------------------------------------------------------
// Normalized barrier: P(M_N <= N^a) sqrt(N) / N^a

struct BarrierRatio {
  std::uint64_t n_steps = 0;
  double exponent = 0.0;
  std::uint64_t n_samples = 0;
  std::uint64_t n_survived = 0;
  double ratio = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double target = 0.0;
};

namespace detail {

// For 16 Rademacher steps encoded as bits: net displacement and maximum
// prefix sum (over prefixes of length >= 1).
struct RademacherBlock {
  std::array<std::int8_t, 1 << 16> net{};
  std::array<std::int8_t, 1 << 16> max_prefix{};
  RademacherBlock() {
    for (std::uint32_t b = 0; b < (1u << 16); ++b) {
      int s = 0, m = -100;
      for (int k = 0; k < 16; ++k) {
        s += (b >> (15 - k)) & 1 ? 1 : -1;
        m = std::max(m, s);
      }
      net[b] = static_cast<std::int8_t>(s);
      max_prefix[b] = static_cast<std::int8_t>(m);
    }
  }
};

inline const RademacherBlock& rademacher_block() {
  static const RademacherBlock table;
  return table;
}

// Whether max_{1<=n<=N} S_n <= level for one Rademacher walk. Bits are
// consumed from the top of each 64-bit draw, as sample() does one at a time.
inline bool rademacher_max_below(std::uint64_t n, double level, Stream& s) {
  const auto& tb = rademacher_block();
  const auto lim = static_cast<std::int64_t>(std::floor(level));
  std::int64_t pos = 0;
  std::uint64_t done = 0;
  while (n - done >= 64) {
    const std::uint64_t w = s();
    for (int sh = 48; sh >= 0; sh -= 16) {
      const auto b = static_cast<std::uint32_t>((w >> sh) & 0xFFFF);
      if (pos + tb.max_prefix[b] > lim) return false;
      pos += tb.net[b];
    }
    done += 64;
  }
  if (done < n) {
    const std::uint64_t w = s();
    for (std::uint64_t k = 0; done < n; ++k, ++done) {
      pos += (w >> (63 - k)) & 1 ? 1 : -1;
      if (pos > lim) return false;
    }
  }
  return true;
}

}  // namespace detail

inline BarrierRatio normalized_barrier_check(const IncrementLaw& law, std::uint64_t n_steps, double a,
                                             std::uint64_t samples, Seed seed, double level = 0.99,
                                             unsigned threads = 0) {
  validate(law);
  if (std::abs(law_mean(law)) > 1e-12)
    throw ConfigError("normalized_barrier_check: law must be centered (mean " + std::to_string(law_mean(law)) + ")");
  const double m2 = law_second_moment(law);
  if (!(m2 > 0.0)) throw ConfigError("normalized_barrier_check: law must have positive variance");
  if (!(a > 0.0 && a < 0.5)) throw ConfigError("normalized_barrier_check: exponent a must lie in (0, 1/2)");
  if (n_steps < 1) throw ConfigError("normalized_barrier_check: N must be at least 1");
  if (samples < 1) throw ConfigError("normalized_barrier_check: samples must be at least 1");
  const double barrier = std::pow(static_cast<double>(n_steps), a);
  const bool lattice = std::holds_alternative<Rademacher>(law);
  const std::uint64_t survived = parallel_sum(
      samples, worker_count(threads), [] { return 0; },
      [&](int, std::uint64_t i) -> std::uint64_t {
        Stream s = derive_stream(seed, StreamKey{0, 0, i, kInner});
        if (lattice) return detail::rademacher_max_below(n_steps, barrier, s) ? 1 : 0;
        double x = 0.0;
        for (std::uint64_t k = 0; k < n_steps; ++k) {
          x += sample(law, s);
          if (x > barrier) return 0;
        }
        return 1;
      });
  BarrierRatio r;
  r.n_steps = n_steps;
  r.exponent = a;
  r.n_samples = samples;
  r.n_survived = survived;
  const double scale = std::sqrt(static_cast<double>(n_steps)) / barrier;
  const auto ci = wilson_interval(survived, samples, level);
  r.ratio = static_cast<double>(survived) / static_cast<double>(samples) * scale;
  r.ci_low = ci.low * scale;
  r.ci_high = ci.high * scale;
  r.target = std::sqrt(2.0 / (boost::math::constants::pi<double>() * m2));
  return r;
}

// ---------------------------------------------------------------------------
// First ascending ladder height tail

struct LadderTailPoint {
  double threshold = 0.0;
  std::uint64_t exceed = 0;
  double tail = 0.0;
};

struct LadderTail {
  std::uint64_t n_samples = 0;
  std::uint64_t n_used = 0;
  std::uint64_t n_capped = 0;  // no ladder epoch within max_steps
  std::vector<LadderTailPoint> points;
};

inline LadderTail ladder_height_tail_probe(const IncrementLaw& law, std::uint64_t samples, Seed seed,
                                           const std::vector<double>& thresholds,
                                           std::uint64_t max_steps = 1'000'000, unsigned threads = 0) {
  validate(law);
  if (law_mean(law) < 0.0) throw ConfigError("ladder_height_tail_probe: law must have nonnegative mean");
  if (samples < 1) throw ConfigError("ladder_height_tail_probe: samples must be at least 1");
  std::vector<double> heights(samples, std::numeric_limits<double>::quiet_NaN());
  parallel_sum(
      samples, worker_count(threads), [] { return 0; },
      [&](int, std::uint64_t i) -> std::uint64_t {
        Stream s = derive_stream(seed, StreamKey{0, 0, i, kInner});
        double x = 0.0;
        for (std::uint64_t k = 0; k < max_steps; ++k) {
          x += sample(law, s);
          if (x > 0.0) {
            heights[i] = x;
            return 1;
          }
        }
        return 0;
      });
  LadderTail r;
  r.n_samples = samples;
  for (double h : heights) (std::isnan(h) ? r.n_capped : r.n_used) += 1;
  for (double x : thresholds) {
    LadderTailPoint p{x, 0, 0.0};
    for (double h : heights)
      if (!std::isnan(h) && h > x) ++p.exceed;
    p.tail = r.n_used ? static_cast<double>(p.exceed) / static_cast<double>(r.n_used) : 0.0;
    r.points.push_back(p);
  }
  return r;
}

}  // namespace itersurv
