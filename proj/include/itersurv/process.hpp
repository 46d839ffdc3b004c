#pragma once

// Process laws, time grids and sampled paths.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <boost/random/laplace_distribution.hpp>
#include <boost/random/weibull_distribution.hpp>

#include "itersurv/rng.hpp"

namespace itersurv {

// Invalid user-supplied parameters or incompatible options.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical failure that valid input cannot trigger.
class InternalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TimeGrid {
  double step = 1.0;
  std::size_t count = 1;

  [[nodiscard]] double horizon() const { return step * static_cast<double>(count); }
  [[nodiscard]] double time(std::size_t k) const { return step * static_cast<double>(k); }
};

inline void validate(const TimeGrid& g) {
  if (!(g.step > 0.0) || !std::isfinite(g.step))
    throw ConfigError("time grid: step must be positive and finite");
  if (g.count < 1) throw ConfigError("time grid: count must be at least 1");
}

// Grid with the given step covering [0, T]; the last point is the first grid
// point at or beyond T.
inline TimeGrid grid_for_horizon(double horizon, double step) {
  if (!(horizon > 0.0)) throw ConfigError("time grid: horizon must be positive");
  if (!(step > 0.0)) throw ConfigError("time grid: step must be positive");
  const double n = std::ceil(horizon / step - 1e-9);
  return TimeGrid{step, static_cast<std::size_t>(std::max(1.0, n))};
}

// Values on t_k = k * step, k = 0..count; values[0] == 0.
struct PathSkeleton {
  TimeGrid grid;
  std::vector<double> values;
};

// ---------------------------------------------------------------------------
// Increment laws

struct Rademacher {};
struct Gaussian {
  double mean = 0.0;
  double sd = 1.0;
};
struct Laplace {
  double mean = 0.0;
  double scale = 1.0;
};
// offset + S * W with S = +-1 fair and W ~ Weibull(shape, scale). Shape in
// (0, 1] gives stretched-exponential tails exp(-|x|^shape).
struct SignedWeibull {
  double shape = 0.5;
  double scale = 1.0;
  double offset = 0.0;
};
struct Constant {
  double value = 0.0;
};

using IncrementLaw = std::variant<Rademacher, Gaussian, Laplace, SignedWeibull, Constant>;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

inline void validate(const IncrementLaw& law) {
  std::visit(overloaded{
                 [](const Rademacher&) {},
                 [](const Gaussian& g) {
                   if (!(g.sd > 0.0)) throw ConfigError("gaussian law: sd must be positive");
                 },
                 [](const Laplace& l) {
                   if (!(l.scale > 0.0)) throw ConfigError("laplace law: scale must be positive");
                 },
                 [](const SignedWeibull& w) {
                   if (!(w.shape > 0.0 && w.shape <= 1.0))
                     throw ConfigError("signed-weibull law: shape must lie in (0, 1]");
                   if (!(w.scale > 0.0))
                     throw ConfigError("signed-weibull law: scale must be positive");
                 },
                 [](const Constant&) {},
             },
             law);
}

inline double law_mean(const IncrementLaw& law) {
  return std::visit(overloaded{
                        [](const Rademacher&) { return 0.0; },
                        [](const Gaussian& g) { return g.mean; },
                        [](const Laplace& l) { return l.mean; },
                        [](const SignedWeibull& w) { return w.offset; },
                        [](const Constant& c) { return c.value; },
                    },
                    law);
}

inline double law_variance(const IncrementLaw& law) {
  return std::visit(overloaded{
                        [](const Rademacher&) { return 1.0; },
                        [](const Gaussian& g) { return g.sd * g.sd; },
                        [](const Laplace& l) { return 2.0 * l.scale * l.scale; },
                        [](const SignedWeibull& w) {
                          return w.scale * w.scale * std::tgamma(1.0 + 2.0 / w.shape);
                        },
                        [](const Constant&) { return 0.0; },
                    },
                    law);
}

inline double law_second_moment(const IncrementLaw& law) {
  const double m = law_mean(law);
  return law_variance(law) + m * m;
}

// Largest alpha in (0, 1] with E exp(|X|^alpha) finite, as used by the
// moment-class hypotheses. Bounded and Gaussian laws report 1.
inline double law_tail_class(const IncrementLaw& law) {
  if (const auto* w = std::get_if<SignedWeibull>(&law)) return w->shape;
  return 1.0;
}

inline bool law_is_lattice(const IncrementLaw& law) {
  return std::holds_alternative<Rademacher>(law) || std::holds_alternative<Constant>(law);
}

inline double sample(const IncrementLaw& law, Stream& s) {
  return std::visit(
      overloaded{
          [&](const Rademacher&) { return (s() >> 63) ? 1.0 : -1.0; },
          [&](const Gaussian& g) { return g.mean + g.sd * s.normal(); },
          [&](const Laplace& l) {
            return boost::random::laplace_distribution<double>{l.mean, l.scale}(s);
          },
          [&](const SignedWeibull& w) {
            const double sign = (s() >> 63) ? 1.0 : -1.0;
            return w.offset +
                   sign * boost::random::weibull_distribution<double>{w.shape, w.scale}(s);
          },
          [&](const Constant& c) { return c.value; },
      },
      law);
}

// ---------------------------------------------------------------------------
// Process specifications

// Random walk with unit time steps; X_t = S_floor(t).
struct RandomWalkSpec {
  IncrementLaw law = Rademacher{};
};

// drift * t + sigma * W_t + compound Poisson(jump_rate, jump_law). With
// centered set, the drift is replaced by -jump_rate * E[jump].
struct LevySpec {
  double drift = 0.0;
  double sigma = 1.0;
  double jump_rate = 0.0;
  IncrementLaw jump_law = Constant{0.0};
  bool centered = false;

  [[nodiscard]] double effective_drift() const {
    return centered ? -jump_rate * law_mean(jump_law) : drift;
  }
  [[nodiscard]] double mean_per_unit_time() const {
    return effective_drift() + jump_rate * law_mean(jump_law);
  }
  [[nodiscard]] double variance_per_unit_time() const {
    return sigma * sigma + jump_rate * law_second_moment(jump_law);
  }
};

// n-times integrated Brownian motion; order 0 is Brownian motion.
struct IbmSpec {
  int order = 0;
};

struct FbmSpec {
  double hurst = 0.5;
  bool two_sided = false;
};

// X_t = X~_n at t = (2n-1)/2, 0 elsewhere; P(X~_n = 2) = 1/(n+1).
struct CounterexampleSpec {};

using BranchSpec = std::variant<RandomWalkSpec, LevySpec, IbmSpec, FbmSpec, CounterexampleSpec>;

// Two independent branches: X_t = plus(t) for t >= 0, minus(-t) for t < 0.
struct TwoSidedSpec {
  BranchSpec plus = LevySpec{};
  BranchSpec minus = LevySpec{};
};

using ProcessSpec = std::variant<RandomWalkSpec, LevySpec, IbmSpec, FbmSpec,
                                 CounterexampleSpec, TwoSidedSpec>;

inline LevySpec brownian_motion(double sigma = 1.0) { return LevySpec{0.0, sigma, 0.0, Constant{0.0}, false}; }

inline void validate(const LevySpec& s) {
  if (!(s.sigma >= 0.0) || !std::isfinite(s.sigma))
    throw ConfigError("levy: sigma must be nonnegative");
  if (!(s.jump_rate >= 0.0) || !std::isfinite(s.jump_rate))
    throw ConfigError("levy: jump_rate must be nonnegative");
  if (!std::isfinite(s.drift)) throw ConfigError("levy: drift must be finite");
  validate(s.jump_law);
}

inline void validate(const BranchSpec& spec) {
  std::visit(overloaded{
                 [](const RandomWalkSpec& rw) { validate(rw.law); },
                 [](const LevySpec& l) { validate(l); },
                 [](const IbmSpec& i) {
                   if (i.order < 0) throw ConfigError("ibm: order must be nonnegative");
                   if (i.order > 8) throw ConfigError("ibm: order above 8 is not supported");
                 },
                 [](const FbmSpec& f) {
                   if (!(f.hurst > 0.0 && f.hurst < 1.0))
                     throw ConfigError("fbm: hurst must lie in (0, 1)");
                 },
                 [](const CounterexampleSpec&) {},
             },
             spec);
}

inline void validate(const ProcessSpec& spec) {
  std::visit(overloaded{
                 [](const TwoSidedSpec& t) {
                   validate(t.plus);
                   validate(t.minus);
                   if (const auto* f = std::get_if<FbmSpec>(&t.plus); f && f->two_sided)
                     throw ConfigError("two-sided: branches must be one-sided processes");
                   if (const auto* f = std::get_if<FbmSpec>(&t.minus); f && f->two_sided)
                     throw ConfigError("two-sided: branches must be one-sided processes");
                 },
                 [](const auto& s) { validate(BranchSpec{s}); },
             },
             spec);
}

// Continuous-path processes (eligible for the dense-range strategy).
inline bool is_continuous(const ProcessSpec& spec) {
  return std::visit(overloaded{
                        [](const IbmSpec&) { return true; },
                        [](const FbmSpec&) { return true; },
                        [](const LevySpec& l) { return l.jump_rate == 0.0; },
                        [](const auto&) { return false; },
                    },
                    spec);
}

inline std::string law_name(const IncrementLaw& law) {
  return std::visit(overloaded{
                        [](const Rademacher&) { return std::string("rademacher"); },
                        [](const Gaussian&) { return std::string("gaussian"); },
                        [](const Laplace&) { return std::string("laplace"); },
                        [](const SignedWeibull&) { return std::string("signed-weibull"); },
                        [](const Constant&) { return std::string("constant"); },
                    },
                    law);
}

inline std::string process_kind(const ProcessSpec& spec) {
  return std::visit(overloaded{
                        [](const RandomWalkSpec&) { return std::string("rw"); },
                        [](const LevySpec&) { return std::string("levy"); },
                        [](const IbmSpec& i) { return std::string(i.order == 0 ? "bm" : "ibm"); },
                        [](const FbmSpec&) { return std::string("fbm"); },
                        [](const CounterexampleSpec&) { return std::string("counterexample"); },
                        [](const TwoSidedSpec&) { return std::string("two-sided"); },
                    },
                    spec);
}

inline ProcessSpec to_process(const BranchSpec& b) {
  return std::visit([](const auto& s) { return ProcessSpec{s}; }, b);
}

}  // namespace itersurv
