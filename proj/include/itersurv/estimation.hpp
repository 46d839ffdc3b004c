#pragma once

// Survival estimation over a horizon grid, exponent fits and predictions.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "itersurv/composition.hpp"
#include "itersurv/generators.hpp"
#include "itersurv/parallel.hpp"
#include "itersurv/process.hpp"
#include "itersurv/rng.hpp"
#include "itersurv/stats.hpp"

namespace itersurv {

// outer o |inner[0]| o |inner[1]| o ... ; the last inner process runs on the
// time grid. Chains longer than one are one-sided and continuous only.
struct CompositionSpec {
  ProcessSpec outer = LevySpec{};
  std::vector<ProcessSpec> inner{LevySpec{}};
  CompositionMode mode = CompositionMode::OneSidedAbs;
  std::optional<RangeStrategy> strategy;  // default picked from the inner type
};

using Subject = std::variant<ProcessSpec, CompositionSpec>;

struct BudgetPolicy {
  std::uint64_t n_min = 10'000;
  double c_budget = 0.0;  // n(T) = max(n_min, c_budget / min(1, T^-theta))
  std::uint64_t n_max = 20'000'000;
  double scale = 1.0;
};

struct ExperimentPlan {
  std::string name = "experiment";
  Subject subject = ProcessSpec{LevySpec{}};
  double t0 = 256.0;
  double ratio = 2.0;
  std::size_t n_horizons = 7;
  std::vector<double> horizons;  // overrides the geometric grid when set
  double step = 1.0;             // time-grid step of the driving process
  std::optional<double> fill_step;
  SupMode sup_mode = SupMode::Grid;
  BudgetPolicy budget;
  double barrier = 1.0;
  Seed seed{1};
  std::uint64_t scenario_index = 0;
  std::uint64_t k_min = 25;
  double level = 0.99;
  double tolerance = 0.05;
  unsigned threads = 0;
};

// ---------------------------------------------------------------------------
// Predicted exponents

namespace detail {

inline bool is_centered(double mean) { return std::abs(mean) < 1e-12; }

inline bool law_symmetric(const IncrementLaw& law) {
  return std::visit(overloaded{
                        [](const Rademacher&) { return true; },
                        [](const Gaussian& g) { return g.mean == 0.0; },
                        [](const Laplace& l) { return l.mean == 0.0; },
                        [](const SignedWeibull& w) { return w.offset == 0.0; },
                        [](const Constant& c) { return c.value == 0.0; },
                    },
                    law);
}

// Index of self-similarity for continuous self-similar processes.
inline std::optional<double> self_similar_index(const ProcessSpec& s) {
  return std::visit(overloaded{
                        [](const IbmSpec& i) -> std::optional<double> { return (2.0 * i.order + 1.0) / 2.0; },
                        [](const FbmSpec& f) -> std::optional<double> {
                          if (f.two_sided) return std::nullopt;
                          return f.hurst;
                        },
                        [](const LevySpec& l) -> std::optional<double> {
                          if (l.jump_rate == 0.0 && l.effective_drift() == 0.0 && l.sigma > 0.0) return 0.5;
                          return std::nullopt;
                        },
                        [](const auto&) -> std::optional<double> { return std::nullopt; },
                    },
                    s);
}

// rho with P(sup_[0,1] Y <= eps) ~ eps^rho, where known.
inline std::optional<double> small_sup_order(const ProcessSpec& s) {
  if (const auto* i = std::get_if<IbmSpec>(&s)) {
    if (i->order == 0) return 1.0;
    if (i->order == 1) return (1.0 / 4.0) / (3.0 / 2.0);
    return std::nullopt;
  }
  if (const auto* f = std::get_if<FbmSpec>(&s); f && !f->two_sided) return (1.0 - f->hurst) / f->hurst;
  if (self_similar_index(s)) return 1.0;  // Brownian motion with variance sigma^2
  return std::nullopt;
}

struct OuterExponent {
  double theta;
  std::string tag;
};

inline bool is_levy_like(const BranchSpec& b) {
  if (std::holds_alternative<LevySpec>(b)) return true;
  if (const auto* i = std::get_if<IbmSpec>(&b)) return i->order == 0;
  return false;
}

inline LevySpec as_levy(const BranchSpec& b) {
  if (const auto* l = std::get_if<LevySpec>(&b)) return *l;
  return brownian_motion();
}

inline std::optional<OuterExponent> survival_exponent(const BranchSpec& b, std::vector<std::string>& warn) {
  return std::visit(
      overloaded{
          [&](const LevySpec& l) -> std::optional<OuterExponent> {
            if (!(l.variance_per_unit_time() > 0.0)) {
              warn.push_back("levy process is degenerate (zero variance)");
              return std::nullopt;
            }
            if (!is_centered(l.mean_per_unit_time())) {
              warn.push_back("levy process is not centered");
              return std::nullopt;
            }
            return OuterExponent{0.5, "levy-survival"};
          },
          [&](const RandomWalkSpec& rw) -> std::optional<OuterExponent> {
            if (!(law_variance(rw.law) > 0.0) || !is_centered(law_mean(rw.law))) {
              warn.push_back("random walk is not centered or is degenerate");
              return std::nullopt;
            }
            return OuterExponent{0.5, "random-walk-survival"};
          },
          [&](const IbmSpec& i) -> std::optional<OuterExponent> {
            if (i.order == 0) return OuterExponent{0.5, "levy-survival"};
            if (i.order == 1) return OuterExponent{0.25, "integrated-bm-survival"};
            warn.push_back("no known survival exponent for integrated BM of order " + std::to_string(i.order));
            return std::nullopt;
          },
          [&](const FbmSpec& f) -> std::optional<OuterExponent> {
            if (f.two_sided) return OuterExponent{1.0, "fbm-two-sided-persistence"};
            return OuterExponent{1.0 - f.hurst, "fbm-persistence"};
          },
          [&](const CounterexampleSpec&) -> std::optional<OuterExponent> {
            return OuterExponent{1.0, "counterexample"};
          },
      },
      b);
}

inline bool is_discrete_random_time(const ProcessSpec& s) {
  if (std::holds_alternative<RandomWalkSpec>(s)) return true;
  if (const auto* l = std::get_if<LevySpec>(&s)) return l->jump_rate > 0.0 || !self_similar_index(s);
  return false;
}

inline double random_time_mean(const ProcessSpec& s) {
  if (const auto* rw = std::get_if<RandomWalkSpec>(&s)) return law_mean(rw->law);
  return std::get<LevySpec>(s).mean_per_unit_time();
}

inline double random_time_variance(const ProcessSpec& s) {
  if (const auto* rw = std::get_if<RandomWalkSpec>(&s)) return law_second_moment(rw->law);
  const auto& l = std::get<LevySpec>(s);
  return l.variance_per_unit_time() + l.mean_per_unit_time() * l.mean_per_unit_time();
}

inline bool is_subordinator(const ProcessSpec& s) {
  auto nonneg = [](const IncrementLaw& law) {
    const auto* c = std::get_if<Constant>(&law);
    return c && c->value >= 0.0;
  };
  if (const auto* rw = std::get_if<RandomWalkSpec>(&s)) return nonneg(rw->law) && law_mean(rw->law) > 0.0;
  if (const auto* l = std::get_if<LevySpec>(&s))
    return l->sigma == 0.0 && l->effective_drift() >= 0.0 && (l->jump_rate == 0.0 || nonneg(l->jump_law)) &&
           l->mean_per_unit_time() > 0.0;
  return false;
}

inline bool levy_symmetric(const LevySpec& l) {
  return l.effective_drift() == 0.0 && (l.jump_rate == 0.0 || law_symmetric(l.jump_law));
}

}  // namespace detail

inline Prediction predicted_exponent(const ProcessSpec& bare) {
  Prediction p;
  if (const auto* ts = std::get_if<TwoSidedSpec>(&bare)) {
    auto a = detail::survival_exponent(ts->plus, p.warnings);
    auto b = detail::survival_exponent(ts->minus, p.warnings);
    if (a && b) {
      p.theta = a->theta + b->theta;
      p.theorem = "independent-branches";
    }
    return p;
  }
  const BranchSpec b = std::visit(overloaded{[](const TwoSidedSpec&) -> BranchSpec { return LevySpec{}; },
                                             [](const auto& s) -> BranchSpec { return s; }},
                                  bare);
  if (auto e = detail::survival_exponent(b, p.warnings)) {
    p.theta = e->theta;
    p.theorem = e->tag;
  }
  return p;
}

inline Prediction predicted_exponent(const CompositionSpec& c) {
  Prediction p;
  if (c.inner.empty()) {
    p.warnings.push_back("composition has no inner process");
    return p;
  }
  // continuous self-similar chain
  std::optional<double> h = 1.0;
  for (const auto& s : c.inner) {
    const auto hi = detail::self_similar_index(s);
    h = (h && hi) ? std::optional<double>(*h * *hi) : std::nullopt;
  }
  if (c.mode == CompositionMode::OneSidedAbs) {
    if (std::holds_alternative<TwoSidedSpec>(c.outer)) {
      p.warnings.push_back("one-sided composition with a two-sided outer process");
      return p;
    }
    const BranchSpec outer = std::visit(overloaded{[](const TwoSidedSpec&) -> BranchSpec { return LevySpec{}; },
                                                   [](const FbmSpec& f) -> BranchSpec { return FbmSpec{f.hurst, false}; },
                                                   [](const auto& s) -> BranchSpec { return s; }},
                                        c.outer);
    if (h) {
      if (auto e = detail::survival_exponent(outer, p.warnings)) {
        p.theta = e->theta * *h;
        p.theorem = "self-similar-inner";
      }
      return p;
    }
    if (c.inner.size() == 1 && detail::is_discrete_random_time(c.inner[0])) {
      const auto& y = c.inner[0];
      if (!detail::is_levy_like(outer)) {
        p.warnings.push_back("outer process at random times must be a Levy process");
        return p;
      }
      const LevySpec x = detail::as_levy(outer);
      if (!(x.variance_per_unit_time() > 0.0) || !detail::is_centered(x.mean_per_unit_time())) {
        p.warnings.push_back("outer Levy process must be centered and nondegenerate");
        return p;
      }
      if (!(detail::random_time_variance(y) > 0.0)) {
        p.warnings.push_back("inner process is degenerate");
        return p;
      }
      if (detail::is_subordinator(y) && detail::levy_symmetric(x)) {
        p.theta = 0.5;
        p.theorem = "levy-at-subordinator";
        return p;
      }
      if (detail::is_centered(detail::random_time_mean(y))) {
        p.theta = 0.25;
        p.theorem = "levy-at-random-times-centered";
      } else {
        p.theta = 0.5;
        p.theorem = "levy-at-random-times-drift";
      }
      return p;
    }
    p.warnings.push_back("no theorem covers this composition");
    return p;
  }

  // two-sided
  if (c.inner.size() != 1) {
    p.warnings.push_back("two-sided compositions take a single inner process");
    return p;
  }
  const auto& y = c.inner[0];
  if (const auto* f = std::get_if<FbmSpec>(&c.outer); f && f->two_sided) {
    if (!h) {
      p.warnings.push_back("two-sided fbm outer needs a continuous self-similar inner process");
      return p;
    }
    const auto rho = detail::small_sup_order(y);
    if (!rho || *rho < 1.0)
      p.warnings.push_back("inner supremum may lack the negative moments the fbm-outer result needs");
    p.theta = *h;
    p.theorem = "two-sided-fbm-outer";
    return p;
  }
  const auto* ts = std::get_if<TwoSidedSpec>(&c.outer);
  if (!ts) {
    p.warnings.push_back("two-sided composition with a one-sided outer process");
    return p;
  }
  if (h) {
    auto a = detail::survival_exponent(ts->plus, p.warnings);
    auto b = detail::survival_exponent(ts->minus, p.warnings);
    if (!a || !b) return p;
    const auto rho = detail::small_sup_order(y);
    if (!rho || a->theta >= *rho || b->theta >= *rho)
      p.warnings.push_back("branch exponents are not below the inner small-deviation order");
    p.theta = *h * (a->theta + b->theta);
    p.theorem = "two-sided-self-similar";
    return p;
  }
  if (detail::is_discrete_random_time(y)) {
    for (const auto* br : {&ts->plus, &ts->minus}) {
      if (!detail::is_levy_like(*br)) {
        p.warnings.push_back("two-sided branches at random times must be Levy processes");
        return p;
      }
      const LevySpec x = detail::as_levy(*br);
      if (!(x.variance_per_unit_time() > 0.0) || !detail::is_centered(x.mean_per_unit_time())) {
        p.warnings.push_back("two-sided branches must be centered and nondegenerate");
        return p;
      }
    }
    if (!(detail::random_time_variance(y) > 0.0)) {
      p.warnings.push_back("inner process is degenerate");
      return p;
    }
    p.theta = 0.5;
    p.theorem = "two-sided-levy-at-random-times";
    return p;
  }
  p.warnings.push_back("no theorem covers this composition");
  return p;
}

inline Prediction predicted_exponent(const Subject& s) {
  return std::visit([](const auto& v) { return predicted_exponent(v); }, s);
}

// ---------------------------------------------------------------------------
// Per-sample evaluation

inline InnerType inner_type(const ProcessSpec& s) {
  return is_continuous(s) ? InnerType::Continuous : InnerType::Discrete;
}

inline void validate(const CompositionSpec& c) {
  validate(c.outer);
  if (c.inner.empty()) throw ConfigError("composition: at least one inner process is required");
  for (const auto& s : c.inner) {
    validate(s);
    if (std::holds_alternative<TwoSidedSpec>(s)) throw ConfigError("composition: inner processes must be one-sided");
    if (const auto* f = std::get_if<FbmSpec>(&s); f && f->two_sided)
      throw ConfigError("composition: inner fbm must be one-sided");
  }
  if (c.inner.size() > 1) {
    if (c.mode != CompositionMode::OneSidedAbs) throw ConfigError("composition: inner chains are one-sided only");
    for (const auto& s : c.inner)
      if (!is_continuous(s)) throw ConfigError("composition: inner chains need continuous processes");
    if (c.strategy && std::holds_alternative<ExactAtQueries>(*c.strategy))
      throw ConfigError("composition: inner chains use the dense-range strategy");
  }
  if (c.strategy && std::holds_alternative<DenseRange>(*c.strategy)) {
    if (!is_continuous(c.inner.back()))
      throw ConfigError("composition: dense-range strategy requires a continuous inner process");
    if (!(std::get<DenseRange>(*c.strategy).fill_step > 0.0))
      throw ConfigError("composition: fill_step must be positive");
  }
}

// Horizon-specific evaluation parameters.
struct HorizonSetup {
  double horizon = 1.0;
  std::uint64_t grid_index = 0;
  TimeGrid grid;
  std::uint64_t rw_steps = 1;  // unit-step walks use floor(T)
  RangeStrategy strategy = ExactAtQueries{};
};

inline double default_fill_step(const CompositionSpec& c, double step, double horizon) {
  double h = 1.0;
  for (const auto& s : c.inner) h *= detail::self_similar_index(s).value_or(0.5);
  return std::min(std::pow(step, 1.5), 1e-2 * std::pow(horizon, h));
}

inline HorizonSetup make_setup(const ExperimentPlan& plan, double horizon, std::uint64_t grid_index) {
  HorizonSetup s;
  s.horizon = horizon;
  s.grid_index = grid_index;
  s.grid = grid_for_horizon(horizon, plan.step);
  s.rw_steps = static_cast<std::uint64_t>(std::floor(horizon + 1e-9));
  if (s.rw_steps < 1) throw ConfigError("horizon below 1 leaves unit-step walks without steps");
  if (const auto* c = std::get_if<CompositionSpec>(&plan.subject)) {
    if (c->strategy) {
      s.strategy = *c->strategy;
    } else if (is_continuous(c->inner.back())) {
      s.strategy = DenseRange{plan.fill_step.value_or(default_fill_step(*c, plan.step, horizon))};
    }
    if (plan.fill_step && std::holds_alternative<DenseRange>(s.strategy))
      std::get<DenseRange>(s.strategy).fill_step = *plan.fill_step;
  }
  return s;
}

namespace detail {

// Sup of a bare (un-iterated) process over (0, T].
inline CompositionResult sample_bare(const ProcessSpec& spec, const ExperimentPlan& plan, const HorizonSetup& hs,
                                     std::uint64_t i, FgnPlanCache& cache) {
  const StreamKey key{plan.scenario_index, hs.grid_index, i, kOuterPlus};
  MaxTracker tracker{plan.barrier, true};
  tracker.max = -std::numeric_limits<double>::infinity();
  const TimeGrid& g = hs.grid;

  auto run_branch = [&](const BranchSpec& b, Stream stream) {
    if (const auto* f = std::get_if<FbmSpec>(&b)) {
      fbm_dense_range(*f, f->two_sided, g.count, f->two_sided ? g.count : 0, g.step, stream, &cache, tracker);
      return !tracker.stopped;
    }
    Cursor cur = make_cursor(b, stream, plan.sup_mode);
    if (std::holds_alternative<RandomWalkSpec>(b)) {
      for (std::uint64_t k = 1; k <= hs.rw_steps; ++k)
        if (!tracker.push(advance(cur, static_cast<double>(k)).value)) return false;
      return true;
    }
    if (std::holds_alternative<CounterexampleSpec>(b)) return tracker.push(advance(cur, hs.horizon).sup);
    for (std::size_t k = 1; k <= g.count; ++k)
      if (!tracker.push(advance(cur, g.time(k)).sup)) return false;
    return true;
  };

  if (const auto* ts = std::get_if<TwoSidedSpec>(&spec)) {
    if (run_branch(ts->plus, derive_stream(plan.seed, key))) run_branch(ts->minus, derive_stream(plan.seed, key.with_channel(kOuterMinus)));
  } else {
    const BranchSpec b = std::visit(overloaded{[](const TwoSidedSpec&) -> BranchSpec { return LevySpec{}; },
                                               [](const auto& s) -> BranchSpec { return s; }},
                                    spec);
    run_branch(b, derive_stream(plan.seed, key));
  }
  CompositionResult r;
  r.max_value = tracker.max;
  r.stopped_early = tracker.stopped;
  r.survived = tracker.max <= plan.barrier;
  return r;
}

// Values of a continuous inner process at grid points, one at a time.
class InnerStepper {
 public:
  InnerStepper(const ProcessSpec& spec, const TimeGrid& grid, Stream stream, FgnPlanCache& cache)
      : grid_(grid), stream_(stream) {
    if (const auto* f = std::get_if<FbmSpec>(&spec)) {
      auto plan = cache.get(f->hurst, grid.count, grid.step);
      plan->sample(stream_, fbm_);
      kind_ = Kind::Fbm;
    } else if (const auto* i = std::get_if<IbmSpec>(&spec); i && i->order > 0) {
      ibm_.emplace(i->order);
      kind_ = Kind::Ibm;
    } else {
      levy_ = std::holds_alternative<LevySpec>(spec) ? std::get<LevySpec>(spec) : brownian_motion();
      kind_ = Kind::Levy;
    }
  }

  double next() {
    ++k_;
    switch (kind_) {
      case Kind::Fbm:
        x_ += fbm_[k_ - 1];
        break;
      case Kind::Ibm:
        ibm_->step(grid_.step, stream_);
        x_ = ibm_->value();
        break;
      case Kind::Levy:
        x_ += levy_increment(levy_, grid_.step, stream_).total();
        break;
    }
    return x_;
  }

 private:
  enum class Kind { Levy, Ibm, Fbm };
  Kind kind_ = Kind::Levy;
  TimeGrid grid_;
  Stream stream_;
  LevySpec levy_;
  std::optional<IbmStepper> ibm_;
  std::vector<double> fbm_;
  std::size_t k_ = 0;
  double x_ = 0.0;
};

// Path of a process on a grid, exactly as InnerStepper produces it.
inline PathSkeleton inner_path(const ProcessSpec& spec, const HorizonSetup& hs, Stream stream, FgnPlanCache& cache) {
  if (const auto* rw = std::get_if<RandomWalkSpec>(&spec)) return gen_random_walk(hs.rw_steps, rw->law, stream);
  if (const auto* l = std::get_if<LevySpec>(&spec); l && l->jump_rate > 0.0) return gen_levy_path(hs.grid, *l, stream);
  if (std::holds_alternative<CounterexampleSpec>(spec)) {
    CounterexampleCursor cur(stream);
    PathSkeleton p{hs.grid, std::vector<double>(hs.grid.count + 1, 0.0)};
    for (std::size_t k = 1; k <= hs.grid.count; ++k) p.values[k] = cur.advance(hs.grid.time(k)).value;
    return p;
  }
  InnerStepper st(spec, hs.grid, stream, cache);
  PathSkeleton p{hs.grid, std::vector<double>(hs.grid.count + 1, 0.0)};
  for (std::size_t k = 1; k <= hs.grid.count; ++k) p.values[k] = st.next();
  return p;
}

// max |Y| over the fill grid [0, ceil(range/h) h] for one chain level.
inline double chain_level_range(const ProcessSpec& spec, double range, double h, Stream stream, FgnPlanCache& cache) {
  const std::size_t k = fill_count(range, h);
  if (k == 0) return 0.0;
  double r = 0.0;
  if (const auto* f = std::get_if<FbmSpec>(&spec)) {
    auto plan = cache.get(f->hurst, next_pow2(k), h);
    std::vector<double> g;
    plan->sample(stream, g);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      s += g[j];
      r = std::max(r, std::abs(s));
    }
    return r;
  }
  InnerStepper st(spec, TimeGrid{h, k}, stream, cache);
  for (std::size_t j = 0; j < k; ++j) r = std::max(r, std::abs(st.next()));
  return r;
}

inline CompositionResult sample_composition(const CompositionSpec& c, const ExperimentPlan& plan,
                                            const HorizonSetup& hs, std::uint64_t i, FgnPlanCache& cache) {
  const StreamKey key{plan.scenario_index, hs.grid_index, i, kInner};
  const Stream inner_stream = derive_stream(plan.seed, key);
  const CompositionStreams streams = composition_streams(plan.seed, key);
  const ProcessSpec& driver = c.inner.back();
  const bool dense = std::holds_alternative<DenseRange>(hs.strategy);
  ComposeOptions opts{plan.sup_mode, true, &cache};

  if (c.inner.size() > 1) {
    const double h = std::get<DenseRange>(hs.strategy).fill_step;
    InnerStepper st(driver, hs.grid, inner_stream, cache);
    double r = 0.0;
    for (std::size_t k = 1; k <= hs.grid.count; ++k) r = std::max(r, std::abs(st.next()));
    for (std::size_t lvl = c.inner.size() - 1; lvl-- > 0;)
      r = chain_level_range(c.inner[lvl], r, h, derive_stream(plan.seed, key.with_channel(kChainBase + static_cast<std::uint32_t>(lvl))), cache);
    // the outer sees a synthetic inner path reaching r
    const PathSkeleton synthetic{TimeGrid{1.0, 1}, {0.0, r}};
    return compose_survival_indicator(c.outer, synthetic, InnerType::Continuous, plan.barrier, c.mode, hs.strategy,
                                      streams, opts);
  }

  const bool fbm_outer = std::holds_alternative<FbmSpec>(c.outer) ||
                         (std::holds_alternative<TwoSidedSpec>(c.outer) &&
                          (std::holds_alternative<FbmSpec>(std::get<TwoSidedSpec>(c.outer).plus) ||
                           std::holds_alternative<FbmSpec>(std::get<TwoSidedSpec>(c.outer).minus)));
  if (!dense || fbm_outer) {
    const PathSkeleton path = inner_path(driver, hs, inner_stream, cache);
    return compose_survival_indicator(c.outer, path, inner_type(driver), plan.barrier, c.mode, hs.strategy, streams,
                                      opts);
  }

  // Streaming dense range: extend the outer branches as the inner range grows.
  const double h = std::get<DenseRange>(hs.strategy).fill_step;
  BranchSpec plus_spec, minus_spec = LevySpec{};
  bool two = false;
  if (c.mode == CompositionMode::OneSidedAbs) {
    if (std::holds_alternative<TwoSidedSpec>(c.outer))
      throw ConfigError("compose: one-sided mode needs a one-sided outer process");
    plus_spec = std::visit(overloaded{[](const TwoSidedSpec&) -> BranchSpec { return LevySpec{}; },
                                      [](const auto& s) -> BranchSpec { return s; }},
                           c.outer);
  } else {
    const auto* ts = std::get_if<TwoSidedSpec>(&c.outer);
    if (!ts) throw ConfigError("compose: two-sided mode needs a two-sided outer process");
    plus_spec = ts->plus;
    minus_spec = ts->minus;
    two = true;
  }
  MaxTracker tracker{plan.barrier, true};
  DenseBranch pb(plus_spec, streams.plus, plan.sup_mode, h);
  std::optional<DenseBranch> mb;
  if (two) mb.emplace(minus_spec, streams.minus, plan.sup_mode, h);
  InnerStepper st(driver, hs.grid, inner_stream, cache);
  double r_plus = 0.0, r_minus = 0.0;
  for (std::size_t k = 1; k <= hs.grid.count; ++k) {
    const double v = st.next();
    if (!two) {
      if (std::abs(v) > r_plus) {
        r_plus = std::abs(v);
        if (!pb.extend_to(fill_count(r_plus, h), tracker)) break;
      }
    } else if (v > r_plus) {
      r_plus = v;
      if (!pb.extend_to(fill_count(r_plus, h), tracker)) break;
    } else if (-v > r_minus) {
      r_minus = -v;
      if (!mb->extend_to(fill_count(r_minus, h), tracker)) break;
    }
  }
  CompositionResult r;
  r.max_value = tracker.max;
  r.stopped_early = tracker.stopped;
  r.survived = tracker.max <= plan.barrier;
  r.outside_model_setting = false;
  return r;
}

}  // namespace detail

// One Monte Carlo sample: survival indicator and maximum.
inline CompositionResult sample_survival(const ExperimentPlan& plan, const HorizonSetup& hs, std::uint64_t i,
                                         FgnPlanCache& cache) {
  return std::visit(overloaded{
                        [&](const ProcessSpec& p) { return detail::sample_bare(p, plan, hs, i, cache); },
                        [&](const CompositionSpec& c) { return detail::sample_composition(c, plan, hs, i, cache); },
                    },
                    plan.subject);
}

inline void validate(const ExperimentPlan& plan) {
  std::visit(overloaded{[](const ProcessSpec& p) { validate(p); }, [](const CompositionSpec& c) { validate(c); }},
             plan.subject);
  if (plan.horizons.empty()) {
    if (!(plan.t0 >= 1.0)) throw ConfigError("plan: t0 must be at least 1");
    if (!(plan.ratio > 1.0)) throw ConfigError("plan: ratio must exceed 1 (the horizon grid must grow)");
    if (plan.n_horizons < 1) throw ConfigError("plan: n_horizons must be at least 1");
  } else {
    for (double t : plan.horizons)
      if (!(t >= 1.0)) throw ConfigError("plan: horizons must be at least 1");
  }
  if (!(plan.step > 0.0)) throw ConfigError("plan: step must be positive");
  if (plan.fill_step && !(*plan.fill_step > 0.0)) throw ConfigError("plan: fill_step must be positive");
  if (plan.budget.n_min == 0 && !(plan.budget.c_budget > 0.0))
    throw ConfigError("plan: budget_n_min and budget_c are both zero");
  if (plan.budget.c_budget < 0.0) throw ConfigError("plan: budget_c must be nonnegative");
  if (!(plan.budget.scale > 0.0)) throw ConfigError("plan: budget_scale must be positive");
  if (plan.budget.n_max < 1) throw ConfigError("plan: budget_n_max must be at least 1");
  if (!(plan.level > 0.0 && plan.level < 1.0)) throw ConfigError("plan: level must lie in (0, 1)");
  if (!(plan.tolerance >= 0.0)) throw ConfigError("plan: tolerance must be nonnegative");
}

inline std::vector<double> plan_horizons(const ExperimentPlan& plan) {
  if (!plan.horizons.empty()) return plan.horizons;
  std::vector<double> t(plan.n_horizons);
  for (std::size_t j = 0; j < t.size(); ++j) t[j] = plan.t0 * std::pow(plan.ratio, static_cast<double>(j));
  return t;
}

inline std::uint64_t budget_for(const ExperimentPlan& plan, double horizon, std::optional<double> theta) {
  const auto& b = plan.budget;
  double p_rough = 1.0;
  if (theta && *theta > 0.0) p_rough = std::min(1.0, std::pow(horizon, -*theta));
  const double n = std::max(static_cast<double>(b.n_min), b.c_budget / p_rough) * b.scale;
  return static_cast<std::uint64_t>(std::clamp(std::round(n), 1.0, static_cast<double>(b.n_max)));
}

inline SurvivalEstimate estimate_survival(const ExperimentPlan& plan, const HorizonSetup& hs, std::uint64_t n_samples) {
  if (n_samples == 0) throw ConfigError("estimate_survival: n_samples must be positive");
  const std::uint64_t survived = parallel_sum(
      n_samples, worker_count(plan.threads), [] { return FgnPlanCache{}; },
      [&](FgnPlanCache& cache, std::uint64_t i) -> std::uint64_t {
        return sample_survival(plan, hs, i, cache).survived ? 1 : 0;
      });
  return make_estimate(hs.horizon, plan.barrier, n_samples, survived, plan.level);
}

struct ExperimentResult {
  std::vector<SurvivalEstimate> estimates;
  std::vector<HorizonSetup> setups;
  std::optional<ExponentFit> fit;
  std::string fit_error;
  Prediction prediction;
  std::optional<double> deviation;  // |slope + theta_pred|
  bool within_tolerance = false;
  double seconds = 0.0;
};

inline ExperimentResult run_experiment(const ExperimentPlan& plan) {
  validate(plan);
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult res;
  res.prediction = predicted_exponent(plan.subject);
  if (plan.barrier <= 0.0 && res.prediction.theta) {
    res.prediction.warnings.push_back("predictions apply to positive barriers only");
    res.prediction.theta.reset();
    res.prediction.theorem = "none";
  }
  const auto horizons = plan_horizons(plan);
  for (std::size_t j = 0; j < horizons.size(); ++j) {
    const HorizonSetup hs = make_setup(plan, horizons[j], j);
    res.setups.push_back(hs);
    res.estimates.push_back(estimate_survival(plan, hs, budget_for(plan, horizons[j], res.prediction.theta)));
  }
  try {
    ExponentFit f = fit_exponent(res.estimates, plan.k_min);
    f.predicted = res.prediction.theta;
    f.theorem = res.prediction.theorem;
    res.fit = f;
  } catch (const ConfigError& e) {
    res.fit_error = e.what();
  }
  if (res.fit && res.prediction.theta) {
    res.deviation = std::abs(res.fit->slope + *res.prediction.theta);
    res.within_tolerance = *res.deviation <= plan.tolerance;
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

}  // namespace itersurv
