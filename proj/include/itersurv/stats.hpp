#pragma once

// Binomial intervals and weighted log-log regression.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "itersurv/process.hpp"

namespace itersurv {

struct Interval {
  double low = 0.0;
  double high = 1.0;
};

inline double normal_quantile_two_sided(double level) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>{}, 0.5 + 0.5 * level);
}

inline Interval wilson_interval(std::uint64_t k, std::uint64_t n, double level = 0.99) {
  if (n < 1) throw ConfigError("wilson_interval: n must be at least 1");
  if (k > n) throw ConfigError("wilson_interval: k must not exceed n");
  const double z = normal_quantile_two_sided(level);
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  Interval ci{std::max(0.0, center - half), std::min(1.0, center + half)};
  if (k == 0) ci.low = 0.0;
  if (k == n) ci.high = 1.0;
  ci.low = std::min(ci.low, p);
  ci.high = std::max(ci.high, p);
  return ci;
}

struct SurvivalEstimate {
  double horizon = 0.0;
  double barrier = 1.0;
  std::uint64_t n_samples = 0;
  std::uint64_t n_survived = 0;
  double p_hat = 0.0;
  double ci_low = 0.0;
  double ci_high = 1.0;
};

inline SurvivalEstimate make_estimate(double horizon, double barrier, std::uint64_t n, std::uint64_t k,
                                      double level) {
  SurvivalEstimate e;
  e.horizon = horizon;
  e.barrier = barrier;
  e.n_samples = n;
  e.n_survived = k;
  e.p_hat = static_cast<double>(k) / static_cast<double>(n);
  const Interval ci = wilson_interval(k, n, level);
  e.ci_low = ci.low;
  e.ci_high = ci.high;
  return e;
}

struct Prediction {
  std::optional<double> theta;
  std::string theorem = "none";
  std::vector<std::string> warnings;
};

struct ExponentFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double r_squared = 1.0;
  std::size_t points_used = 0;
  std::vector<double> excluded;  // horizons dropped for too few survivors
  std::optional<double> predicted;
  std::string theorem = "none";
};

struct FitPoint {
  double x = 0.0;  // log T
  double y = 0.0;  // log p
  double w = 1.0;
};

// Weighted least squares y = intercept + slope x. The weights are taken as
// inverse variances, so slope_stderr = 1 / sqrt(Sxx).
inline ExponentFit fit_log_log(const std::vector<FitPoint>& pts) {
  if (pts.size() < 2) throw ConfigError("exponent fit: need at least 2 usable points, got " + std::to_string(pts.size()));
  double sw = 0.0, sx = 0.0, sy = 0.0;
  for (const auto& p : pts) {
    if (!(p.w > 0.0) || !std::isfinite(p.x) || !std::isfinite(p.y))
      throw ConfigError("exponent fit: points need finite coordinates and positive weights");
    sw += p.w;
    sx += p.w * p.x;
    sy += p.w * p.y;
  }
  const double xm = sx / sw, ym = sy / sw;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& p : pts) {
    sxx += p.w * (p.x - xm) * (p.x - xm);
    sxy += p.w * (p.x - xm) * (p.y - ym);
    syy += p.w * (p.y - ym) * (p.y - ym);
  }
  if (!(sxx > 0.0)) throw ConfigError("exponent fit: all points share one horizon");
  ExponentFit f;
  f.slope = sxy / sxx;
  f.intercept = ym - f.slope * xm;
  f.slope_stderr = 1.0 / std::sqrt(sxx);
  double ss_res = 0.0;
  for (const auto& p : pts) {
    const double r = p.y - (f.intercept + f.slope * p.x);
    ss_res += p.w * r * r;
  }
  f.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  f.points_used = pts.size();
  return f;
}

// Weights n p / (1 - p): the delta-method inverse variance of log p-hat.
// p-hat = 1 uses 1 - p = 1/n.
inline ExponentFit fit_exponent(const std::vector<SurvivalEstimate>& estimates, std::uint64_t k_min = 25) {
  std::vector<FitPoint> pts;
  std::vector<double> excluded;
  for (const auto& e : estimates) {
    if (e.n_survived < k_min || e.n_survived == 0) {
      excluded.push_back(e.horizon);
      continue;
    }
    const double n = static_cast<double>(e.n_samples);
    const double q = std::max(1.0 - e.p_hat, 1.0 / n);
    pts.push_back({std::log(e.horizon), std::log(e.p_hat), n * e.p_hat / q});
  }
  if (pts.size() < 2)
    throw ConfigError("exponent fit: " + std::to_string(pts.size()) + " points have at least " +
                      std::to_string(k_min) + " survivors; need 2");
  ExponentFit f = fit_log_log(pts);
  f.excluded = std::move(excluded);
  return f;
}

}  // namespace itersurv
