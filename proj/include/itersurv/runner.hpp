#pragma once

// Preset execution: estimate, fit, compare, persist.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "itersurv/config.hpp"
#include "itersurv/presets.hpp"
#include "itersurv/report.hpp"

namespace itersurv {

struct ScenarioOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> tolerance;
  std::optional<double> budget_scale;
  std::vector<double> horizons;
  std::optional<unsigned> threads;
};

struct ScenarioOutcome {
  Preset preset;
  ExperimentResult result;
  std::vector<OracleRow> oracle;
  bool oracle_ok = true;
  std::optional<double> oracle_slope;  // exact law fitted on the same grid and weights
  bool slope_ok = false;
  bool passed = false;
  WrittenFiles files;
  std::string config_text;
};

inline Preset apply_overrides(Preset p, const ScenarioOverrides& o) {
  if (o.seed) p.plan.seed = Seed{*o.seed};
  if (o.tolerance) p.plan.tolerance = *o.tolerance;
  if (o.budget_scale) p.plan.budget.scale = *o.budget_scale;
  if (!o.horizons.empty()) p.plan.horizons = o.horizons;
  if (o.threads) p.plan.threads = *o.threads;
  validate(p.plan);
  return p;
}

// Fit of the exact survival law with the weights the estimates carry.
inline std::optional<double> oracle_law_slope(const std::vector<SurvivalEstimate>& es, const std::vector<OracleRow>& rows,
                                              std::uint64_t k_min) {
  std::vector<SurvivalEstimate> exact = es;
  for (std::size_t i = 0; i < exact.size(); ++i) {
    exact[i].p_hat = rows[i].oracle;
    exact[i].n_survived =
        static_cast<std::uint64_t>(std::llround(rows[i].oracle * static_cast<double>(exact[i].n_samples)));
  }
  try {
    return fit_exponent(exact, k_min).slope;
  } catch (const ConfigError&) {
    return std::nullopt;
  }
}

inline ScenarioOutcome run_preset(const Preset& preset, const std::filesystem::path& out_dir) {
  ScenarioOutcome out;
  out.preset = preset;
  const ExperimentPlan& plan = preset.plan;
  out.config_text = plan_to_config(plan);
  RunManifest m;
  m.preset = preset.plan.name;
  m.config_text = out.config_text;
  m.started = utc_timestamp(std::chrono::system_clock::now());
  out.result = run_experiment(plan);
  m.finished = utc_timestamp(std::chrono::system_clock::now());

  const auto& es = out.result.estimates;
  if (preset.oracle != PresetOracle::None) {
    for (const auto& e : es) {
      const auto v = preset_oracle_value(preset.oracle, e.horizon, plan.barrier);
      if (!v) continue;
      out.oracle.push_back({e.horizon, *v, *v >= e.ci_low && *v <= e.ci_high});
      out.oracle_ok = out.oracle_ok && out.oracle.back().within;
    }
    if (out.oracle.size() != es.size()) out.oracle.clear();
  }

  if (preset.oracle == PresetOracle::Counterexample && !out.oracle.empty()) {
    out.oracle_slope = oracle_law_slope(es, out.oracle, plan.k_min);
    out.slope_ok = out.result.fit && out.oracle_slope &&
                   std::abs(out.result.fit->slope - *out.oracle_slope) <= plan.tolerance;
  } else {
    out.slope_ok = out.result.within_tolerance;
  }
  out.passed = out.slope_ok && out.oracle_ok;
  out.files = write_run(out_dir, plan, out.result, m, out.oracle.empty() ? nullptr : &out.oracle);
  return out;
}

inline ScenarioOutcome run_scenario(const std::string& name, const ScenarioOverrides& o,
                                    const std::filesystem::path& out_dir) {
  return run_preset(apply_overrides(make_preset(name), o), out_dir);
}

// 0 when accepted; non-gating presets always report 0.
inline int scenario_exit_code(const ScenarioOutcome& s) { return (s.passed || !s.preset.gating) ? 0 : 1; }

}  // namespace itersurv
