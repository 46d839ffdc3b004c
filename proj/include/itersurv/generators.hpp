#pragma once

// Exact-at-grid path generators for every process family.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <boost/random/poisson_distribution.hpp>
#include <unsupported/Eigen/FFT>

#include "itersurv/process.hpp"
#include "itersurv/rng.hpp"

namespace itersurv {

// ---------------------------------------------------------------------------
// Random walks

inline PathSkeleton gen_random_walk(std::size_t n_steps, const IncrementLaw& law, Stream& stream) {
  if (n_steps < 1) throw ConfigError("random walk: n_steps must be at least 1");
  validate(law);
  PathSkeleton path{TimeGrid{1.0, n_steps}, std::vector<double>(n_steps + 1, 0.0)};
  double s = 0.0;
  for (std::size_t k = 1; k <= n_steps; ++k) {
    s += sample(law, stream);
    path.values[k] = s;
  }
  return path;
}

// ---------------------------------------------------------------------------
// Levy processes

// Increment over a cell of length h, split so callers can bridge the
// continuous part. Jumps are placed at the cell's right end.
struct LevyIncrement {
  double continuous = 0.0;
  double jumps = 0.0;
  [[nodiscard]] double total() const { return continuous + jumps; }
};

inline LevyIncrement levy_increment(const LevySpec& spec, double h, Stream& stream) {
  LevyIncrement inc;
  inc.continuous = spec.effective_drift() * h;
  if (spec.sigma > 0.0) inc.continuous += spec.sigma * std::sqrt(h) * stream.normal();
  if (spec.jump_rate > 0.0) {
    const int n_jumps = boost::random::poisson_distribution<int, double>{spec.jump_rate * h}(stream);
    for (int i = 0; i < n_jumps; ++i) inc.jumps += sample(spec.jump_law, stream);
  }
  return inc;
}

inline PathSkeleton gen_levy_path(const TimeGrid& grid, const LevySpec& spec, Stream& stream) {
  validate(grid);
  validate(spec);
  PathSkeleton path{grid, std::vector<double>(grid.count + 1, 0.0)};
  double x = 0.0;
  for (std::size_t k = 1; k <= grid.count; ++k) {
    x += levy_increment(spec, grid.step, stream).total();
    path.values[k] = x;
  }
  return path;
}

// ---------------------------------------------------------------------------
// Integrated Brownian motion

inline double factorial(int k) { return std::tgamma(static_cast<double>(k) + 1.0); }

// Covariance of the noise added to (W, Y1, ..., Yn) over a step of length h:
// h^(j+k+1) / (j! k! (j+k+1)).
inline Eigen::MatrixXd ibm_step_covariance(int order, double h) {
  const int d = order + 1;
  Eigen::MatrixXd c(d, d);
  for (int j = 0; j < d; ++j)
    for (int k = 0; k < d; ++k)
      c(j, k) = std::pow(h, j + k + 1) / (factorial(j) * factorial(k) * (j + k + 1));
  return c;
}

// Exact Gauss-Markov stepping of (W, Y^(1), ..., Y^(n)). The step covariance
// is D C D with D = diag(h^(k+1/2)) and C independent of h, so one Cholesky
// factor of C serves every step length.
class IbmStepper {
 public:
  explicit IbmStepper(int order) : order_(order), state_(static_cast<std::size_t>(order) + 1, 0.0) {
    if (order < 0) throw ConfigError("ibm: order must be nonnegative");
    const int d = order + 1;
    Eigen::MatrixXd unit = ibm_step_covariance(order, 1.0);
    Eigen::LLT<Eigen::MatrixXd> llt(unit);
    if (llt.info() != Eigen::Success)
      throw InternalError("ibm: Cholesky factorisation of the step covariance failed");
    unit_factor_ = llt.matrixL();
    noise_.resize(d);
    z_.resize(d);
  }

  void step(double h, Stream& stream) {
    if (order_ == 0) {
      state_[0] += std::sqrt(h) * stream.normal();
      return;
    }
    const int d = order_ + 1;
    for (int k = 0; k < d; ++k) z_[k] = stream.normal();
    noise_.noalias() = unit_factor_.triangularView<Eigen::Lower>() * z_;
    // Propagate top-down so lower levels are still at time t when read.
    for (int k = order_; k >= 0; --k) {
      double v = 0.0;
      double hp = 1.0;
      for (int j = k; j >= 0; --j) {
        v += hp / factorial(k - j) * state_[static_cast<std::size_t>(j)];
        hp *= h;
      }
      state_[static_cast<std::size_t>(k)] = v + std::pow(h, k + 0.5) * noise_[k];
    }
  }

  [[nodiscard]] double value() const { return state_.back(); }
  [[nodiscard]] const std::vector<double>& state() const { return state_; }
  [[nodiscard]] int order() const { return order_; }

 private:
  int order_;
  std::vector<double> state_;
  Eigen::MatrixXd unit_factor_;
  Eigen::VectorXd noise_;
  Eigen::VectorXd z_;
};

inline PathSkeleton gen_ibm_path(const TimeGrid& grid, const IbmSpec& spec, Stream& stream) {
  validate(grid);
  validate(BranchSpec{spec});
  IbmStepper stepper(spec.order);
  PathSkeleton path{grid, std::vector<double>(grid.count + 1, 0.0)};
  for (std::size_t k = 1; k <= grid.count; ++k) {
    stepper.step(grid.step, stream);
    path.values[k] = stepper.value();
  }
  return path;
}

// ---------------------------------------------------------------------------
// Fractional Gaussian noise / fractional Brownian motion

enum class FgnMethod { CirculantEmbedding, DenseCholesky };

inline std::string to_string(FgnMethod m) {
  return m == FgnMethod::CirculantEmbedding ? "circulant-embedding" : "dense-cholesky";
}

inline constexpr std::size_t kMaxDenseGaussian = 4096;

// Autocovariance of fGn increments over steps of length dt.
inline double fgn_autocovariance(double hurst, double dt, std::size_t lag) {
  const double k = static_cast<double>(lag);
  const double e = 2.0 * hurst;
  const double core = std::pow(k + 1.0, e) - 2.0 * std::pow(k, e) + std::pow(std::abs(k - 1.0), e);
  return 0.5 * std::pow(dt, e) * core;
}

inline double fbm_covariance(double hurst, double s, double t) {
  const double e = 2.0 * hurst;
  return 0.5 * (std::pow(std::abs(t), e) + std::pow(std::abs(s), e) - std::pow(std::abs(t - s), e));
}

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Immutable sampling tables for n fGn increments. Safe to share read-only.
class FgnPlan {
 public:
  FgnPlan(double hurst, std::size_t n, double dt, bool force_dense = false)
      : hurst_(hurst), n_(n), dt_(dt) {
    if (!(hurst > 0.0 && hurst < 1.0)) throw ConfigError("fbm: hurst must lie in (0, 1)");
    if (n < 1) throw ConfigError("fbm: need at least one increment");
    if (!force_dense && build_circulant()) return;
    build_dense();
  }

  [[nodiscard]] FgnMethod method() const { return method_; }
  [[nodiscard]] std::size_t size() const { return n_; }
  [[nodiscard]] double hurst() const { return hurst_; }
  [[nodiscard]] double step() const { return dt_; }
  [[nodiscard]] double min_eigenvalue_ratio() const { return min_ratio_; }

  void sample(Stream& stream, std::vector<double>& out) const {
    out.resize(n_);
    if (method_ == FgnMethod::DenseCholesky) {
      Eigen::VectorXd z(static_cast<Eigen::Index>(n_));
      for (std::size_t i = 0; i < n_; ++i) z[static_cast<Eigen::Index>(i)] = stream.normal();
      const Eigen::VectorXd x = factor_.triangularView<Eigen::Lower>() * z;
      for (std::size_t i = 0; i < n_; ++i) out[i] = x[static_cast<Eigen::Index>(i)];
      return;
    }
    const std::size_t m = scale_.size();
    std::vector<std::complex<double>> in(m);
    for (std::size_t k = 0; k < m; ++k) {
      const double a = stream.normal();
      const double b = stream.normal();
      in[k] = {scale_[k] * a, scale_[k] * b};
    }
    std::vector<std::complex<double>> spec;
    Eigen::FFT<double> fft;
    fft.fwd(spec, in);
    for (std::size_t i = 0; i < n_; ++i) out[i] = spec[i].real();
  }

 private:
  bool build_circulant() {
    const std::size_t half = next_pow2(n_);
    const std::size_t m = 2 * half;
    std::vector<std::complex<double>> row(m);
    for (std::size_t k = 0; k <= half; ++k) row[k] = fgn_autocovariance(hurst_, dt_, k);
    for (std::size_t k = half + 1; k < m; ++k) row[k] = row[m - k];
    std::vector<std::complex<double>> eig;
    Eigen::FFT<double> fft;
    fft.fwd(eig, row);
    double max_eig = 0.0;
    double min_eig = 0.0;
    for (const auto& e : eig) {
      max_eig = std::max(max_eig, e.real());
      min_eig = std::min(min_eig, e.real());
    }
    min_ratio_ = max_eig > 0.0 ? min_eig / max_eig : -1.0;
    if (min_eig < -1e-8 * max_eig) return false;
    scale_.resize(m);
    for (std::size_t k = 0; k < m; ++k)
      scale_[k] = std::sqrt(std::max(0.0, eig[k].real()) / static_cast<double>(m));
    method_ = FgnMethod::CirculantEmbedding;
    return true;
  }

  void build_dense() {
    if (n_ > kMaxDenseGaussian)
      throw ConfigError("fbm: circulant embedding is not nonnegative definite and the grid has " +
                        std::to_string(n_) + " points (dense fallback limit is " +
                        std::to_string(kMaxDenseGaussian) + ")");
    const auto n = static_cast<Eigen::Index>(n_);
    Eigen::MatrixXd cov(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        cov(i, j) = fgn_autocovariance(hurst_, dt_, static_cast<std::size_t>(std::abs(i - j)));
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
      throw InternalError("fbm: dense Cholesky of the fGn covariance failed");
    factor_ = llt.matrixL();
    method_ = FgnMethod::DenseCholesky;
  }

  double hurst_;
  std::size_t n_;
  double dt_;
  double min_ratio_ = 0.0;
  FgnMethod method_ = FgnMethod::CirculantEmbedding;
  std::vector<double> scale_;
  Eigen::MatrixXd factor_;
};

struct FbmPath {
  PathSkeleton plus;                  // B(k dt), k = 0..M
  std::optional<PathSkeleton> minus;  // B(-k dt), two-sided only
  FgnMethod method = FgnMethod::CirculantEmbedding;
};

// Builds the path from fGn increments. For a two-sided spec the increments
// cover [-T, T] and the cumulative sum is re-anchored at time 0.
inline FbmPath fbm_from_increments(const TimeGrid& grid, bool two_sided, const std::vector<double>& g,
                                   FgnMethod method) {
  const std::size_t m = grid.count;
  FbmPath out;
  out.method = method;
  out.plus = PathSkeleton{grid, std::vector<double>(m + 1, 0.0)};
  if (!two_sided) {
    double s = 0.0;
    for (std::size_t k = 1; k <= m; ++k) {
      s += g[k - 1];
      out.plus.values[k] = s;
    }
    return out;
  }
  out.minus = PathSkeleton{grid, std::vector<double>(m + 1, 0.0)};
  double s = 0.0;
  for (std::size_t k = 1; k <= m; ++k) {
    s += g[m + k - 1];
    out.plus.values[k] = s;
  }
  s = 0.0;
  for (std::size_t k = 1; k <= m; ++k) {
    s += g[m - k];
    out.minus->values[k] = -s;
  }
  return out;
}

inline FbmPath gen_fbm_path(const TimeGrid& grid, const FbmSpec& spec, Stream& stream,
                            bool force_dense = false) {
  validate(grid);
  validate(BranchSpec{spec});
  const std::size_t n = spec.two_sided ? 2 * grid.count : grid.count;
  const FgnPlan plan(spec.hurst, n, grid.step, force_dense);
  std::vector<double> g;
  plan.sample(stream, g);
  return fbm_from_increments(grid, spec.two_sided, g, plan.method());
}

// ---------------------------------------------------------------------------
// Counterexample process

inline double counterexample_spike_time(std::size_t n) { return (2.0 * static_cast<double>(n) - 1.0) / 2.0; }

inline double counterexample_draw(std::size_t n, Stream& stream) {
  return stream.uniform() < 1.0 / (static_cast<double>(n) + 1.0) ? 2.0 : 0.0;
}

// Entry i holds X~_(i+1).
inline std::vector<double> gen_counterexample_values(std::size_t m, Stream& stream) {
  if (m < 1) throw ConfigError("counterexample: m must be at least 1");
  std::vector<double> v(m);
  for (std::size_t i = 0; i < m; ++i) v[i] = counterexample_draw(i + 1, stream);
  return v;
}

}  // namespace itersurv
