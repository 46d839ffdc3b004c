#pragma once

// Named experiments. Predicted exponents always come from predicted_exponent.

#include <optional>
#include <string>
#include <vector>

#include "itersurv/estimation.hpp"
#include "itersurv/oracles.hpp"

namespace itersurv {

enum class PresetOracle { None, BmSurvival, Counterexample };

struct Preset {
  ExperimentPlan plan;
  bool gating = true;
  PresetOracle oracle = PresetOracle::None;
  std::string description;
  std::string warning;
};

struct PresetInfo {
  std::string name;
  std::string description;
};

inline std::vector<PresetInfo> list_presets() {
  return {
      {"bm-baseline", "Brownian motion survival, bridge supremum"},
      {"ibm-one-sided", "BM o |BM|"},
      {"ibm-chain-N", "BM o |BM| o ... with N inner Brownian motions (N = 1..4)"},
      {"integrated-inner-N", "BM o |N-times integrated BM| (N = 1..3)"},
      {"levy-rw-centered", "compensated Laplace-jump Levy at centered Gaussian walk times"},
      {"levy-rw-drift", "compensated Laplace-jump Levy at drifted Gaussian walk times"},
      {"levy-subordinator", "symmetric Levy at subordinator times"},
      {"iterated-bm-two-sided", "two-sided BM o BM"},
      {"two-sided-levy-rw", "two-sided compensated Levy at centered walk times"},
      {"two-sided-levy-rw-drift", "two-sided compensated Levy at drifted walk times"},
      {"fbm-outer-H", "two-sided fBm(H) o BM, H in (0, 1), e.g. fbm-outer-0.25"},
      {"fbm-one-sided-molchan", "bare one-sided fBm(0.75) persistence (informative, not gating)"},
      {"counterexample", "spike process with P(spike n = 2) = 1/(n+1)"},
  };
}

inline LevySpec compensated_laplace_levy() { return LevySpec{0.0, 1.0, 1.0, Laplace{1.0, 1.0}, true}; }

namespace detail {

inline std::optional<double> suffix_number(const std::string& name, const std::string& prefix) {
  if (name.rfind(prefix, 0) != 0 || name.size() == prefix.size()) return std::nullopt;
  try {
    std::size_t used = 0;
    const std::string rest = name.substr(prefix.size());
    const double v = std::stod(rest, &used);
    if (used != rest.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace detail

inline std::string preset_names_text() {
  std::string s;
  for (const auto& p : list_presets()) s += "  " + p.name + "  " + p.description + "\n";
  return s;
}

inline Preset make_preset(const std::string& name) {
  Preset p;
  ExperimentPlan& plan = p.plan;
  plan.name = name;
  plan.seed = Seed{1};
  auto composition = [](ProcessSpec outer, std::vector<ProcessSpec> inner,
                        CompositionMode mode = CompositionMode::OneSidedAbs) {
    CompositionSpec c;
    c.outer = std::move(outer);
    c.inner = std::move(inner);
    c.mode = mode;
    return c;
  };

  if (name == "bm-baseline") {
    p.description = "Brownian motion survival, bridge supremum";
    plan.subject = ProcessSpec{IbmSpec{0}};
    plan.t0 = 256;
    plan.n_horizons = 7;
    plan.step = 1.0 / 64.0;
    plan.sup_mode = SupMode::Bridge;
    plan.budget = {200'000, 0.0, 20'000'000, 1.0};
    plan.tolerance = 0.05;
    plan.scenario_index = 1;
    p.oracle = PresetOracle::BmSurvival;
  } else if (name == "ibm-one-sided" || detail::suffix_number(name, "ibm-chain-")) {
    int n = 1;
    if (name != "ibm-one-sided") {
      const double v = *detail::suffix_number(name, "ibm-chain-");
      if (v != std::floor(v) || v < 1 || v > 4) throw ConfigError("preset " + name + ": chain length must be 1..4");
      n = static_cast<int>(v);
    }
    p.description = "Brownian motion over the range of " + std::to_string(n) + " nested Brownian motions";
    plan.subject = composition(IbmSpec{0}, std::vector<ProcessSpec>(static_cast<std::size_t>(n), IbmSpec{0}));
    plan.t0 = 1024;
    plan.n_horizons = 7;
    plan.step = 1.0;
    plan.fill_step = 0.25;
    plan.sup_mode = SupMode::Bridge;
    plan.budget = {0, 3000.0, 20'000'000, 1.0};
    plan.tolerance = 0.05;
    plan.scenario_index = 2 + static_cast<std::uint64_t>(n);
  } else if (detail::suffix_number(name, "integrated-inner-")) {
    const double v = *detail::suffix_number(name, "integrated-inner-");
    if (v != std::floor(v) || v < 1 || v > 3) throw ConfigError("preset " + name + ": order must be 1..3");
    const int n = static_cast<int>(v);
    p.description = "Brownian motion over the range of " + std::to_string(n) + "-times integrated BM";
    plan.subject = composition(IbmSpec{0}, {IbmSpec{n}});
    plan.t0 = 128;
    plan.n_horizons = 5;
    plan.step = 1.0;
    plan.fill_step = 1.0;
    plan.sup_mode = SupMode::Bridge;
    plan.budget = {0, 3000.0, 20'000'000, 1.0};
    plan.tolerance = 0.08;
    plan.scenario_index = 10 + static_cast<std::uint64_t>(n);
  } else if (name == "levy-rw-centered" || name == "levy-rw-drift") {
    const bool drift = name == "levy-rw-drift";
    p.description = "compensated Laplace-jump Levy at Gaussian walk times";
    plan.subject = composition(compensated_laplace_levy(), {RandomWalkSpec{Gaussian{drift ? 0.5 : 0.0, 1.0}}});
    plan.t0 = 256;
    plan.n_horizons = 7;
    plan.budget = {0, 2000.0, 20'000'000, 1.0};
    plan.tolerance = drift ? 0.06 : 0.05;
    plan.scenario_index = drift ? 21 : 20;
  } else if (name == "levy-subordinator") {
    p.description = "symmetric Levy at subordinator times";
    plan.subject = composition(LevySpec{0.0, 1.0, 1.0, Laplace{0.0, 1.0}, false},
                               {LevySpec{0.5, 0.0, 1.0, Constant{1.0}, false}});
    plan.t0 = 256;
    plan.n_horizons = 7;
    plan.budget = {0, 2000.0, 20'000'000, 1.0};
    plan.tolerance = 0.06;
    plan.scenario_index = 22;
  } else if (name == "iterated-bm-two-sided") {
    p.description = "two-sided Brownian motion over a Brownian path";
    plan.subject = composition(TwoSidedSpec{IbmSpec{0}, IbmSpec{0}}, {IbmSpec{0}}, CompositionMode::TwoSided);
    plan.t0 = 256;
    plan.n_horizons = 6;
    plan.step = 0.25;
    plan.fill_step = 0.25;
    plan.sup_mode = SupMode::Bridge;
    plan.budget = {0, 3000.0, 20'000'000, 1.0};
    plan.tolerance = 0.07;
    plan.scenario_index = 30;
  } else if (name == "two-sided-levy-rw" || name == "two-sided-levy-rw-drift") {
    const bool drift = name == "two-sided-levy-rw-drift";
    p.description = "two-sided compensated Levy at Gaussian walk times";
    plan.subject = composition(TwoSidedSpec{compensated_laplace_levy(), compensated_laplace_levy()},
                               {RandomWalkSpec{Gaussian{drift ? 0.5 : 0.0, 1.0}}}, CompositionMode::TwoSided);
    plan.t0 = 256;
    plan.n_horizons = 7;
    plan.budget = {0, 2000.0, 20'000'000, 1.0};
    plan.tolerance = 0.07;
    plan.scenario_index = drift ? 41 : 40;
  } else if (auto h = detail::suffix_number(name, "fbm-outer-")) {
    if (!(*h > 0.0 && *h < 1.0)) throw ConfigError("preset " + name + ": H must lie in (0, 1)");
    p.description = "two-sided fBm over a Brownian path";
    plan.subject = composition(FbmSpec{*h, true}, {IbmSpec{0}}, CompositionMode::TwoSided);
    plan.t0 = 256;
    plan.n_horizons = 6;
    plan.step = 0.25;
    plan.fill_step = 0.125;
    plan.budget = {0, 2000.0, 20'000'000, 1.0};
    plan.tolerance = 0.07;
    plan.scenario_index = 50;
  } else if (name == "fbm-one-sided-molchan") {
    p.description = "bare one-sided fBm(0.75) persistence";
    p.gating = false;
    p.warning = "slow convergence with logarithmic corrections; informative only";
    plan.subject = ProcessSpec{FbmSpec{0.75, false}};
    plan.t0 = 64;
    plan.n_horizons = 7;
    plan.step = 1.0;
    plan.budget = {0, 2000.0, 20'000'000, 1.0};
    plan.tolerance = 0.10;
    plan.scenario_index = 60;
  } else if (name == "counterexample") {
    p.description = "spike process, exact law 1/(floor(T+1/2)+1)";
    plan.subject = ProcessSpec{CounterexampleSpec{}};
    plan.horizons = {10.5, 40.5, 121.5, 364.5, 1093.5, 3280.5};
    plan.budget = {0, 1000.0, 20'000'000, 1.0};
    plan.tolerance = 0.1;
    plan.scenario_index = 70;
    p.oracle = PresetOracle::Counterexample;
  } else {
    throw ConfigError("unknown preset '" + name + "'; available presets:\n" + preset_names_text());
  }
  validate(plan);
  return p;
}

inline std::optional<double> preset_oracle_value(PresetOracle o, double horizon, double barrier) {
  switch (o) {
    case PresetOracle::BmSurvival: return bm_survival_closed_form(horizon, barrier).value;
    case PresetOracle::Counterexample:
      if (barrier != 1.0) return std::nullopt;
      return counterexample_survival_exact(horizon).value;
    case PresetOracle::None: break;
  }
  return std::nullopt;
}

}  // namespace itersurv
