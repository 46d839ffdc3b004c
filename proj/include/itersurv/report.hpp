#pragma once

// CSV tables and JSON run manifests.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "itersurv/config.hpp"
#include "itersurv/estimation.hpp"

namespace itersurv {

inline constexpr const char* kToolVersion = "1.0.0";

inline void write_estimates_csv(std::ostream& o, const std::vector<SurvivalEstimate>& es) {
  using cfg::fmt;
  o << "T,p_hat,ci_low,ci_high,n_samples,n_survived\n";
  for (const auto& e : es)
    o << fmt(e.horizon) << ',' << fmt(e.p_hat) << ',' << fmt(e.ci_low) << ',' << fmt(e.ci_high) << ','
      << e.n_samples << ',' << e.n_survived << '\n';
}

inline void write_fit_csv(std::ostream& o, const ExponentFit& f) {
  using cfg::fmt;
  o << "slope,slope_stderr,intercept,r_squared,theta_pred,theorem\n";
  o << fmt(f.slope) << ',' << fmt(f.slope_stderr) << ',' << fmt(f.intercept) << ',' << fmt(f.r_squared) << ','
    << (f.predicted ? fmt(*f.predicted) : std::string()) << ',' << f.theorem << '\n';
}

struct OracleRow {
  double horizon = 0.0;
  double oracle = 0.0;
  bool within = false;
};

inline void write_oracle_csv(std::ostream& o, const std::vector<SurvivalEstimate>& es,
                             const std::vector<OracleRow>& rows) {
  using cfg::fmt;
  o << "T,oracle,p_hat,ci_low,ci_high,within_ci\n";
  for (std::size_t i = 0; i < rows.size(); ++i)
    o << fmt(rows[i].horizon) << ',' << fmt(rows[i].oracle) << ',' << fmt(es[i].p_hat) << ',' << fmt(es[i].ci_low)
      << ',' << fmt(es[i].ci_high) << ',' << (rows[i].within ? 1 : 0) << '\n';
}

inline std::string utc_timestamp(std::chrono::system_clock::time_point tp) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct RunManifest {
  std::string preset;
  std::string config_text;
  std::string started;
  std::string finished;
};

inline nlohmann::json manifest_json(const RunManifest& m, const ExperimentPlan& plan, const ExperimentResult& r) {
  using nlohmann::json;
  json j;
  j["tool"] = "itersurv";
  j["version"] = kToolVersion;
  j["preset"] = m.preset;
  j["name"] = plan.name;
  j["seed"] = plan.seed.value;
  j["config_digest"] = config_digest(m.config_text);
  j["config"] = m.config_text;
  j["started"] = m.started;
  j["finished"] = m.finished;
  j["threads"] = worker_count(plan.threads);
  json grid = json::array();
  for (const auto& s : r.setups) {
    json g;
    g["T"] = s.horizon;
    g["step"] = s.grid.step;
    g["count"] = s.grid.count;
    if (const auto* d = std::get_if<DenseRange>(&s.strategy)) {
      g["strategy"] = "dense";
      g["fill_step"] = d->fill_step;
    } else {
      g["strategy"] = "exact";
    }
    grid.push_back(g);
  }
  j["grids"] = grid;
  j["sup_mode"] = to_string(plan.sup_mode);
  j["theta_pred"] = r.prediction.theta ? json(*r.prediction.theta) : json(nullptr);
  j["theorem"] = r.prediction.theorem;
  j["warnings"] = r.prediction.warnings;
  if (r.fit) {
    j["slope"] = r.fit->slope;
    j["slope_stderr"] = r.fit->slope_stderr;
    j["excluded_T"] = r.fit->excluded;
  } else {
    j["fit_error"] = r.fit_error;
  }
  j["deviation"] = r.deviation ? json(*r.deviation) : json(nullptr);
  j["tolerance"] = plan.tolerance;
  j["within_tolerance"] = r.within_tolerance;
  j["seconds"] = r.seconds;
  return j;
}

struct WrittenFiles {
  std::filesystem::path results, fit, manifest, config, oracle;
};

inline WrittenFiles write_run(const std::filesystem::path& dir, const ExperimentPlan& plan,
                              const ExperimentResult& r, const RunManifest& m,
                              const std::vector<OracleRow>* oracle = nullptr) {
  std::filesystem::create_directories(dir);
  WrittenFiles w;
  const std::string base = plan.name;
  w.results = dir / (base + ".csv");
  w.fit = dir / (base + "_fit.csv");
  w.manifest = dir / (base + "_manifest.json");
  w.config = dir / (base + ".ini");
  {
    std::ofstream f(w.results);
    write_estimates_csv(f, r.estimates);
  }
  if (r.fit) {
    std::ofstream f(w.fit);
    write_fit_csv(f, *r.fit);
  }
  {
    std::ofstream f(w.config);
    f << m.config_text;
  }
  if (oracle) {
    w.oracle = dir / (base + "_oracle.csv");
    std::ofstream f(w.oracle);
    write_oracle_csv(f, r.estimates, *oracle);
  }
  {
    std::ofstream f(w.manifest);
    f << manifest_json(m, plan, r).dump(2) << '\n';
  }
  return w;
}

}  // namespace itersurv
