#pragma once

// Exact reference values for small instances. Nothing here touches the
// simulation code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <boost/math/constants/constants.hpp>
#include <boost/math/distributions/normal.hpp>

#include "itersurv/process.hpp"

namespace itersurv {

enum class OracleMethod { Dp, Enumeration, Series, ClosedForm };

inline std::string to_string(OracleMethod m) {
  switch (m) {
    case OracleMethod::Dp: return "dp";
    case OracleMethod::Enumeration: return "enumeration";
    case OracleMethod::Series: return "series";
    case OracleMethod::ClosedForm: return "closed_form";
  }
  return "?";
}

using u128 = unsigned __int128;

struct Rational {
  u128 num = 0;
  u128 den = 1;
  friend bool operator==(const Rational& a, const Rational& b) { return a.num * b.den == b.num * a.den; }
};

inline std::string u128_to_string(u128 v) {
  if (v == 0) return "0";
  std::string s;
  while (v > 0) {
    s.insert(s.begin(), static_cast<char>('0' + static_cast<int>(v % 10)));
    v /= 10;
  }
  return s;
}

inline Rational reduced(Rational r) {
  u128 a = r.num, b = r.den;
  while (b != 0) {
    const u128 t = a % b;
    a = b;
    b = t;
  }
  if (a > 1) {
    r.num /= a;
    r.den /= a;
  }
  return r;
}

inline std::string to_string(const Rational& r) { return u128_to_string(r.num) + "/" + u128_to_string(r.den); }

struct ExactProbability {
  double value = 0.0;
  OracleMethod method = OracleMethod::ClosedForm;
  std::optional<Rational> exact;
};

namespace detail {

inline double to_double(const Rational& r) {
  return static_cast<double>(r.num) / static_cast<double>(r.den);
}

}  // namespace detail

// P(max_{1<=n<=N} S_n <= barrier) for the simple symmetric walk.
// Path counts are exact for N <= 64.
inline ExactProbability srw_max_dp(std::int64_t n_steps, std::int64_t barrier) {
  if (n_steps < 1) throw ConfigError("srw_max_dp: N must be at least 1");
  const std::int64_t n = n_steps;
  if (barrier >= n) return {1.0, OracleMethod::Dp, Rational{1, 1}};
  const auto width = static_cast<std::size_t>(2 * n + 1);  // positions -n..n
  auto run = [&](auto one, auto half) {
    using T = decltype(one);
    std::vector<T> cur(width, T{}), nxt(width, T{});
    cur[static_cast<std::size_t>(n)] = one;
    for (std::int64_t step = 0; step < n; ++step) {
      std::fill(nxt.begin(), nxt.end(), T{});
      for (std::size_t i = 0; i < width; ++i) {
        if (cur[i] == T{}) continue;
        const T c = half(cur[i]);
        if (i >= 1) nxt[i - 1] += c;
        if (i + 1 < width) nxt[i + 1] += c;
      }
      for (std::int64_t x = std::max(barrier + 1, -n); x <= n; ++x) nxt[static_cast<std::size_t>(x + n)] = T{};
      std::swap(cur, nxt);
    }
    T total{};
    for (const T& c : cur) total += c;
    return total;
  };
  if (n <= 64) {
    const u128 good = run(u128{1}, [](u128 c) { return c; });
    const Rational r = reduced(Rational{good, static_cast<u128>(1) << n});
    return {detail::to_double(r), OracleMethod::Dp, r};
  }
  return {run(1.0, [](double c) { return 0.5 * c; }), OracleMethod::Dp, std::nullopt};
}

// Brute force over all 2^N sign sequences.
inline ExactProbability srw_max_enumerate(int n_steps, std::int64_t barrier) {
  if (n_steps < 1 || n_steps > 24) throw ConfigError("srw_max_enumerate: N must lie in [1, 24]");
  const std::uint64_t paths = std::uint64_t{1} << n_steps;
  std::uint64_t good = 0;
  for (std::uint64_t mask = 0; mask < paths; ++mask) {
    std::int64_t s = 0;
    bool ok = true;
    for (int k = 0; k < n_steps && ok; ++k) {
      s += (mask >> k) & 1 ? 1 : -1;
      ok = s <= barrier;
    }
    good += ok;
  }
  const Rational r = reduced(Rational{good, paths});
  return {detail::to_double(r), OracleMethod::Enumeration, r};
}

// P(max_{1<=n<=N} X(|S_n|) <= barrier) for independent simple walks X, S.
// Every inner path is enumerated; the outer walk is handled by a lattice DP
// that only checks the constraint at query times.
inline ExactProbability srw_iterated_enum(int n_steps, std::int64_t barrier) {
  if (n_steps < 1) throw ConfigError("srw_iterated_enum: N must be at least 1");
  if (n_steps > 12) throw ConfigError("srw_iterated_enum: N above 12 is refused");
  const int n = n_steps;
  const std::uint64_t paths = std::uint64_t{1} << n;
  u128 total = 0;  // in units of 2^-n (inner) * 2^-n (outer)
  const int off = n;
  for (std::uint64_t mask = 0; mask < paths; ++mask) {
    std::set<int> queries;
    int s = 0;
    for (int k = 0; k < n; ++k) {
      s += (mask >> k) & 1 ? 1 : -1;
      queries.insert(s < 0 ? -s : s);
    }
    // outer DP over n steps (the largest query is at most n)
    std::vector<u128> cur(static_cast<std::size_t>(2 * n + 1), 0), nxt(cur.size(), 0);
    cur[static_cast<std::size_t>(off)] = 1;
    auto enforce = [&](int t) {
      if (!queries.count(t)) return;
      for (int x = -n; x <= n; ++x)
        if (x > barrier) cur[static_cast<std::size_t>(x + off)] = 0;
    };
    enforce(0);
    for (int t = 1; t <= n; ++t) {
      std::fill(nxt.begin(), nxt.end(), 0);
      for (int x = -n; x <= n; ++x) {
        const u128 c = cur[static_cast<std::size_t>(x + off)];
        if (c == 0) continue;
        if (x - 1 >= -n) nxt[static_cast<std::size_t>(x - 1 + off)] += c;
        if (x + 1 <= n) nxt[static_cast<std::size_t>(x + 1 + off)] += c;
      }
      std::swap(cur, nxt);
      enforce(t);
    }
    for (auto c : cur) total += c;
  }
  const Rational r = reduced(Rational{total, static_cast<u128>(1) << (2 * n)});
  return {detail::to_double(r), OracleMethod::Enumeration, r};
}

// P(sup_{[0,1]} |B| <= eps).
inline ExactProbability bm_small_dev_exact(double eps) {
  if (!(eps > 0.0)) throw ConfigError("bm_small_dev_exact: eps must be positive");
  const double pi = boost::math::constants::pi<double>();
  if (eps <= 1.0) {
    double sum = 0.0;
    for (int k = 0; k < 1000; ++k) {
      const double m = 2.0 * k + 1.0;
      const double term = std::exp(-m * m * pi * pi / (8.0 * eps * eps)) / m;
      sum += (k % 2 == 0 ? term : -term);
      if (term < 1e-14) break;
    }
    return {4.0 / pi * sum, OracleMethod::Series, std::nullopt};
  }
  // sum_k (-1)^k [Phi((2k+1) eps) - Phi((2k-1) eps)] over all integers k
  const boost::math::normal_distribution<double> nd;
  auto band = [&](int k) {
    const double hi = (2.0 * k + 1.0) * eps, lo = (2.0 * k - 1.0) * eps;
    if (lo >= 0.0) return boost::math::cdf(boost::math::complement(nd, lo)) -
                          boost::math::cdf(boost::math::complement(nd, hi));
    return boost::math::cdf(nd, hi) - boost::math::cdf(nd, lo);
  };
  double sum = band(0);
  for (int k = 1; k < 1000; ++k) {
    const double b = band(k) + band(-k);
    sum += (k % 2 == 0 ? b : -b);
    if (std::abs(b) < 1e-14) break;
  }
  return {std::min(1.0, sum), OracleMethod::Series, std::nullopt};
}

// Survival of the counterexample process to time T at barrier 1.
inline ExactProbability counterexample_survival_exact(double horizon) {
  if (!(horizon > 0.0)) throw ConfigError("counterexample_survival_exact: T must be positive");
  const auto m = static_cast<std::uint64_t>(std::floor(horizon + 0.5));
  const Rational r{1, static_cast<u128>(m) + 1};
  return {detail::to_double(r), OracleMethod::ClosedForm, r};
}

// P(sup_{[0,T]} B <= x) = 2 Phi(x / sqrt T) - 1.
inline ExactProbability bm_survival_closed_form(double horizon, double barrier) {
  if (!(horizon > 0.0)) throw ConfigError("bm_survival_closed_form: T must be positive");
  if (!(barrier > 0.0)) throw ConfigError("bm_survival_closed_form: barrier must be positive");
  return {std::erf(barrier / std::sqrt(2.0 * horizon)), OracleMethod::ClosedForm, std::nullopt};
}

}  // namespace itersurv
