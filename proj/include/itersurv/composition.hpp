#pragma once

// Evaluation of an outer process over the range of an inner path:
// Z = X o |Y| (one-sided) or Z = X o Y (two-sided, split across branches).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <memory>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "itersurv/generators.hpp"
#include "itersurv/process.hpp"
#include "itersurv/rng.hpp"

namespace itersurv {

enum class CompositionMode { OneSidedAbs, TwoSided };

struct ExactAtQueries {
  friend bool operator==(const ExactAtQueries&, const ExactAtQueries&) = default;
};
struct DenseRange {
  double fill_step = 1.0;
  friend bool operator==(const DenseRange&, const DenseRange&) = default;
};
using RangeStrategy = std::variant<ExactAtQueries, DenseRange>;

// How the supremum between evaluation points is taken. Bridge samples the
// exact maximum of the Brownian part of a Levy cell; other processes ignore it.
enum class SupMode { Grid, Bridge };

enum class InnerType { Discrete, Continuous };

inline std::string to_string(CompositionMode m) {
  return m == CompositionMode::OneSidedAbs ? "one-sided-abs" : "two-sided";
}
inline std::string to_string(SupMode m) { return m == SupMode::Grid ? "grid" : "bridge"; }

inline constexpr std::size_t kNoQuery = std::numeric_limits<std::size_t>::max();

struct QuerySet {
  std::vector<double> points;          // sorted, unique, nonnegative
  std::vector<std::size_t> back_map;   // per inner index; kNoQuery if not in this set
};

// Anchor index 0 is not a query; X(0) = 0 is accounted for separately.
inline std::pair<QuerySet, QuerySet> build_queries(const PathSkeleton& inner, CompositionMode mode) {
  if (inner.values.empty()) throw ConfigError("build_queries: inner path is empty");
  const std::size_t n = inner.values.size();
  QuerySet plus, minus;
  plus.back_map.assign(n, kNoQuery);
  minus.back_map.assign(n, kNoQuery);
  std::vector<double> p, m;
  for (std::size_t k = 1; k < n; ++k) {
    const double v = inner.values[k];
    if (mode == CompositionMode::OneSidedAbs || v >= 0.0)
      p.push_back(std::abs(v));
    else
      m.push_back(-v);
  }
  auto finish = [](std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  finish(p);
  finish(m);
  plus.points = std::move(p);
  minus.points = std::move(m);
  for (std::size_t k = 1; k < n; ++k) {
    const double v = inner.values[k];
    const bool to_plus = mode == CompositionMode::OneSidedAbs || v >= 0.0;
    QuerySet& set = to_plus ? plus : minus;
    const double key = to_plus ? std::abs(v) : -v;
    set.back_map[k] = static_cast<std::size_t>(
        std::lower_bound(set.points.begin(), set.points.end(), key) - set.points.begin());
  }
  return {std::move(plus), std::move(minus)};
}

namespace detail {

struct Advance {
  double value;
  double sup;  // supremum over (previous point, this point]
};

class LevyCursor {
 public:
  LevyCursor(LevySpec spec, Stream stream, SupMode mode)
      : spec_(std::move(spec)), stream_(stream), bridge_(mode == SupMode::Bridge && spec_.sigma > 0.0) {}

  Advance advance(double q) {
    const double gap = q - t_;
    if (!(gap > 0.0)) return {x_, x_};
    const LevyIncrement inc = levy_increment(spec_, gap, stream_);
    const double pre = x_ + inc.continuous;
    const double end = pre + inc.jumps;
    double sup = end;
    if (bridge_) {
      // Maximum of a Brownian bridge from x_ to pre with variance sigma^2 gap.
      const double d = pre - x_;
      const double e = stream_.exponential();
      const double bmax = 0.5 * (x_ + pre + std::sqrt(d * d + 2.0 * spec_.sigma * spec_.sigma * gap * e));
      sup = std::max(sup, bmax);
    }
    t_ = q;
    x_ = end;
    return {end, sup};
  }

 private:
  LevySpec spec_;
  Stream stream_;
  bool bridge_;
  double t_ = 0.0;
  double x_ = 0.0;
};

// X_t = S_floor(t).
class RandomWalkCursor {
 public:
  RandomWalkCursor(IncrementLaw law, Stream stream) : law_(std::move(law)), stream_(stream) {}

  Advance advance(double q) {
    const auto target = static_cast<long long>(std::floor(q));
    double sup = s_;
    while (k_ < target) {
      s_ += sample(law_, stream_);
      ++k_;
      sup = std::max(sup, s_);
    }
    return {s_, sup};
  }

 private:
  IncrementLaw law_;
  Stream stream_;
  long long k_ = 0;
  double s_ = 0.0;
};

class IbmCursor {
 public:
  IbmCursor(int order, Stream stream) : stepper_(order), stream_(stream) {}

  Advance advance(double q) {
    const double gap = q - t_;
    if (gap > 0.0) {
      stepper_.step(gap, stream_);
      t_ = q;
    }
    return {stepper_.value(), stepper_.value()};
  }

 private:
  IbmStepper stepper_;
  Stream stream_;
  double t_ = 0.0;
};

// Spikes X~_n are drawn in order of n as time passes their location.
class CounterexampleCursor {
 public:
  explicit CounterexampleCursor(Stream stream) : stream_(stream) {}

  Advance advance(double q) {
    if (!(q > t_)) return {current_, current_};
    double sup = 0.0;
    current_ = 0.0;
    while (counterexample_spike_time(next_) <= q) {
      const double v = counterexample_draw(next_, stream_);
      sup = std::max(sup, v);
      if (counterexample_spike_time(next_) == q) current_ = v;
      ++next_;
    }
    t_ = q;
    return {current_, sup};
  }

 private:
  Stream stream_;
  std::size_t next_ = 1;
  double t_ = 0.0;
  double current_ = 0.0;
};

using Cursor = std::variant<LevyCursor, RandomWalkCursor, IbmCursor, CounterexampleCursor>;

inline Cursor make_cursor(const BranchSpec& spec, Stream stream, SupMode mode) {
  return std::visit(
      overloaded{
          [&](const RandomWalkSpec& rw) -> Cursor { return RandomWalkCursor(rw.law, stream); },
          [&](const LevySpec& l) -> Cursor { return LevyCursor(l, stream, mode); },
          [&](const IbmSpec& i) -> Cursor {
            if (i.order == 0) return LevyCursor(brownian_motion(), stream, mode);
            return IbmCursor(i.order, stream);
          },
          [&](const CounterexampleSpec&) -> Cursor { return CounterexampleCursor(stream); },
          [&](const FbmSpec&) -> Cursor {
            throw InternalError("fbm outer has no sequential cursor");
          },
      },
      spec);
}

inline Advance advance(Cursor& c, double q) {
  return std::visit([q](auto& cur) { return cur.advance(q); }, c);
}

// Yields the distinct values of a multiset in ascending order, lazily.
class AscendingUnique {
 public:
  explicit AscendingUnique(std::vector<double> values) : heap_(std::move(values)) {
    std::make_heap(heap_.begin(), heap_.end(), std::greater<>{});
  }

  bool next(double& out) {
    while (!heap_.empty()) {
      std::pop_heap(heap_.begin(), heap_.end(), std::greater<>{});
      const double v = heap_.back();
      heap_.pop_back();
      if (have_last_ && v == last_) continue;
      have_last_ = true;
      last_ = v;
      out = v;
      return true;
    }
    return false;
  }

 private:
  std::vector<double> heap_;
  bool have_last_ = false;
  double last_ = 0.0;
};

}  // namespace detail

// Cache of immutable fGn tables keyed by (H, n, dt). One per worker.
class FgnPlanCache {
 public:
  std::shared_ptr<const FgnPlan> get(double hurst, std::size_t n, double dt) {
    const auto key = std::make_tuple(hurst, n, dt);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    auto plan = std::make_shared<const FgnPlan>(hurst, n, dt);
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::map<std::tuple<double, std::size_t, double>, std::shared_ptr<const FgnPlan>> plans_;
};

// Exact values of a Levy process at sorted unique nonnegative times.
inline std::vector<double> evaluate_levy_at(const QuerySet& queries, const LevySpec& spec, Stream stream) {
  validate(spec);
  detail::LevyCursor cursor(spec, stream, SupMode::Grid);
  std::vector<double> out;
  out.reserve(queries.points.size());
  for (double q : queries.points) out.push_back(cursor.advance(q).value);
  return out;
}

// Exact joint Gaussian draw at the given (signed) points.
inline std::vector<double> evaluate_gaussian_at(std::span<const double> points,
                                                const std::function<double(double, double)>& covariance,
                                                Stream& stream, const std::string& covariance_name = "covariance") {
  if (points.empty()) return {};
  if (points.size() > kMaxDenseGaussian)
    throw ConfigError("gaussian evaluation: " + std::to_string(points.size()) +
                      " query points exceed the dense limit of " + std::to_string(kMaxDenseGaussian));
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd cov(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) cov(i, j) = cov(j, i) = covariance(points[i], points[j]);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
  const Eigen::VectorXd d = ldlt.vectorD();
  const double scale = std::max(1.0, d.cwiseAbs().maxCoeff());
  if (ldlt.info() != Eigen::Success || d.minCoeff() < -1e-9 * scale)
    throw ConfigError("gaussian evaluation: factorisation failed; " + covariance_name +
                      " is not positive semidefinite on the query points");
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = stream.normal() * std::sqrt(std::max(0.0, d[i]));
  // cov = P^T L D L^T P  =>  x = P^T L sqrt(D) z
  Eigen::VectorXd y = ldlt.matrixL() * z;
  Eigen::VectorXd x = ldlt.transpositionsP().transpose() * y;
  return {x.data(), x.data() + n};
}

struct CompositionStreams {
  Stream plus;
  Stream minus;
};

inline CompositionStreams composition_streams(Seed seed, const StreamKey& key) {
  return {derive_stream(seed, key.with_channel(kOuterPlus)), derive_stream(seed, key.with_channel(kOuterMinus))};
}

struct ComposeOptions {
  SupMode sup_mode = SupMode::Grid;
  // Stop at the first value above the barrier; max_value is then a partial
  // maximum (still above the barrier).
  bool stop_at_barrier = false;
  FgnPlanCache* fgn_cache = nullptr;
};

struct CompositionResult {
  bool survived = true;
  double max_value = 0.0;
  bool stopped_early = false;
  bool outside_model_setting = false;
};

namespace detail {

// Running maximum shared by the branch evaluators.
struct MaxTracker {
  double barrier;
  bool stop;
  double max = 0.0;  // includes the anchor Z_0 = X(0) = 0
  bool stopped = false;

  // Returns false once evaluation should stop.
  bool push(double v) {
    if (v > max) max = v;
    if (stop && max > barrier) {
      stopped = true;
      return false;
    }
    return true;
  }
};

inline const FbmSpec* as_fbm(const BranchSpec& b) { return std::get_if<FbmSpec>(&b); }

inline std::shared_ptr<const FgnPlan> fgn_plan(FgnPlanCache* cache, double hurst, std::size_t n, double dt) {
  if (cache) return cache->get(hurst, n, dt);
  return std::make_shared<const FgnPlan>(hurst, n, dt);
}

inline std::size_t fill_count(double range, double h) {
  if (!(range > 0.0)) return 0;
  return static_cast<std::size_t>(std::ceil(range / h));
}

// Sequential dense-range evaluation of one branch: fill points k*h.
class DenseBranch {
 public:
  DenseBranch(const BranchSpec& spec, Stream stream, SupMode mode, double h)
      : cursor_(make_cursor(spec, stream, mode)), h_(h) {}

  // Evaluates fill points up to index k; returns false if the tracker stopped.
  bool extend_to(std::size_t k, MaxTracker& tracker) {
    while (done_ < k) {
      ++done_;
      if (!tracker.push(advance(cursor_, static_cast<double>(done_) * h_).sup)) return false;
    }
    return true;
  }

 private:
  Cursor cursor_;
  double h_;
  std::size_t done_ = 0;
};

// fBm on a uniform fill grid: one-sided over k_plus points, or two-sided over
// [-k_minus h, k_plus h] sharing one fGn draw.
inline void fbm_dense_range(const FbmSpec& spec, bool two_sided, std::size_t k_plus, std::size_t k_minus,
                            double h, Stream& stream, FgnPlanCache* cache, MaxTracker& tracker) {
  if (!two_sided) {
    if (k_plus == 0) return;
    const std::size_t n = next_pow2(k_plus);
    auto plan = fgn_plan(cache, spec.hurst, n, h);
    std::vector<double> g;
    plan->sample(stream, g);
    double s = 0.0;
    for (std::size_t k = 0; k < k_plus; ++k) {
      s += g[k];
      if (!tracker.push(s)) return;
    }
    return;
  }
  const std::size_t half = next_pow2(std::max<std::size_t>({k_plus, k_minus, 1}));
  auto plan = fgn_plan(cache, spec.hurst, 2 * half, h);
  std::vector<double> g;
  plan->sample(stream, g);
  double s = 0.0;
  for (std::size_t k = 0; k < k_plus; ++k) {
    s += g[half + k];
    if (!tracker.push(s)) return;
  }
  s = 0.0;
  for (std::size_t k = 0; k < k_minus; ++k) {
    s += g[half - 1 - k];
    if (!tracker.push(-s)) return;
  }
}

// Exact-at-queries evaluation of a sequential branch.
inline bool run_queries(const BranchSpec& spec, Stream stream, SupMode mode, std::vector<double> raw,
                        MaxTracker& tracker) {
  if (raw.empty()) return true;
  Cursor cursor = make_cursor(spec, stream, mode);
  AscendingUnique queries(std::move(raw));
  double q = 0.0;
  while (queries.next(q))
    if (!tracker.push(advance(cursor, q).value)) return false;
  return true;
}

inline std::vector<double> unique_sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

// Gaussian outer evaluated jointly at signed points (exact-at-queries).
inline void fbm_at_queries(const FbmSpec& spec, std::vector<double> plus, std::vector<double> minus,
                           Stream& stream, MaxTracker& tracker) {
  std::vector<double> pts;
  for (double q : unique_sorted(std::move(plus)))
    if (q != 0.0) pts.push_back(q);
  for (double q : unique_sorted(std::move(minus)))
    if (q != 0.0) pts.push_back(-q);
  const double hurst = spec.hurst;
  const auto values = evaluate_gaussian_at(
      pts, [hurst](double s, double t) { return fbm_covariance(hurst, s, t); }, stream,
      "fbm covariance (H=" + std::to_string(hurst) + ")");
  for (double v : values)
    if (!tracker.push(v)) return;
}

}  // namespace detail

// Survival indicator of Z against the barrier for one inner path.
//
// One-sided mode evaluates the outer at |Y|. Two-sided mode sends Y >= 0 to
// the plus branch (channel 1) and |Y| for Y < 0 to the minus branch
// (channel 2); a two-sided fBm outer is one dependent process drawn from the
// plus channel. ExactAtQueries uses the inner grid values only; DenseRange
// (continuous inner only) fills [0, running max] with points k * fill_step.
inline CompositionResult compose_survival_indicator(const ProcessSpec& outer, const PathSkeleton& inner,
                                                    InnerType inner_type, double barrier, CompositionMode mode,
                                                    const RangeStrategy& strategy, CompositionStreams streams,
                                                    const ComposeOptions& opts = {}) {
  validate(outer);
  if (inner.values.empty()) throw ConfigError("compose: inner path is empty");
  const bool dense = std::holds_alternative<DenseRange>(strategy);
  if (dense && inner_type == InnerType::Discrete)
    throw ConfigError("compose: dense-range strategy requires a continuous inner process");
  const double h = dense ? std::get<DenseRange>(strategy).fill_step : 0.0;
  if (dense && !(h > 0.0)) throw ConfigError("compose: fill_step must be positive");

  BranchSpec plus_spec;
  std::optional<BranchSpec> minus_spec;
  bool joint_fbm = false;  // two-sided fBm: one process, both signs
  if (mode == CompositionMode::OneSidedAbs) {
    if (std::holds_alternative<TwoSidedSpec>(outer))
      throw ConfigError("compose: one-sided mode needs a one-sided outer process");
    plus_spec = std::visit(
        overloaded{[](const TwoSidedSpec&) -> BranchSpec { return LevySpec{}; },
                   [](const FbmSpec& f) -> BranchSpec { return FbmSpec{f.hurst, false}; },
                   [](const auto& s) -> BranchSpec { return s; }},
        outer);
  } else if (const auto* ts = std::get_if<TwoSidedSpec>(&outer)) {
    plus_spec = ts->plus;
    minus_spec = ts->minus;
  } else if (const auto* f = std::get_if<FbmSpec>(&outer); f && f->two_sided) {
    plus_spec = *f;
    joint_fbm = true;
  } else {
    throw ConfigError("compose: two-sided mode needs a two-sided outer process");
  }

  CompositionResult result;
  result.outside_model_setting = barrier < 0.0 && inner_type == InnerType::Discrete;
  detail::MaxTracker tracker{barrier, opts.stop_at_barrier};

  if (dense) {
    double r_plus = 0.0, r_minus = 0.0;
    for (std::size_t k = 1; k < inner.values.size(); ++k) {
      const double v = inner.values[k];
      if (mode == CompositionMode::OneSidedAbs) {
        r_plus = std::max(r_plus, std::abs(v));
      } else {
        r_plus = std::max(r_plus, v);
        r_minus = std::max(r_minus, -v);
      }
    }
    const std::size_t k_plus = detail::fill_count(r_plus, h);
    const std::size_t k_minus = detail::fill_count(r_minus, h);
    if (const auto* f = detail::as_fbm(plus_spec)) {
      detail::fbm_dense_range(*f, joint_fbm, k_plus, k_minus, h, streams.plus, opts.fgn_cache, tracker);
    } else {
      detail::DenseBranch pb(plus_spec, streams.plus, opts.sup_mode, h);
      if (pb.extend_to(k_plus, tracker) && minus_spec) {
        if (const auto* fm = detail::as_fbm(*minus_spec))
          detail::fbm_dense_range(*fm, false, k_minus, 0, h, streams.minus, opts.fgn_cache, tracker);
        else
          detail::DenseBranch(*minus_spec, streams.minus, opts.sup_mode, h).extend_to(k_minus, tracker);
      }
    }
  } else {
    std::vector<double> plus_raw, minus_raw;
    plus_raw.reserve(inner.values.size());
    for (std::size_t k = 1; k < inner.values.size(); ++k) {
      const double v = inner.values[k];
      if (mode == CompositionMode::OneSidedAbs || v >= 0.0)
        plus_raw.push_back(std::abs(v));
      else
        minus_raw.push_back(-v);
    }
    if (joint_fbm) {
      detail::fbm_at_queries(std::get<FbmSpec>(plus_spec), std::move(plus_raw), std::move(minus_raw),
                             streams.plus, tracker);
    } else {
      auto run_branch = [&](const BranchSpec& spec, Stream stream, std::vector<double> raw) {
        if (const auto* f = detail::as_fbm(spec)) {
          detail::fbm_at_queries(*f, std::move(raw), {}, stream, tracker);
          return !tracker.stopped;
        }
        return detail::run_queries(spec, stream, SupMode::Grid, std::move(raw), tracker);
      };
      if (run_branch(plus_spec, streams.plus, std::move(plus_raw)) && minus_spec)
        run_branch(*minus_spec, streams.minus, std::move(minus_raw));
    }
  }

  result.max_value = tracker.max;
  result.stopped_early = tracker.stopped;
  result.survived = tracker.max <= barrier;
  return result;
}

}  // namespace itersurv
