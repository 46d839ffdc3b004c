#include <gtest/gtest.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "itersurv/itersurv.hpp"

using namespace itersurv;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& tag) {
  const auto d = fs::temp_directory_path() / ("itersurv_test_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

struct Proc {
  int code = -1;
  std::string out;
};

Proc run_cli(const std::string& args) {
  Proc r;
  const std::string cmd = std::string(ITERSURV_CLI_PATH) + " " + args + " 2>&1";
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  while (auto n = std::fread(buf.data(), 1, buf.size(), p)) r.out.append(buf.data(), n);
  const int st = ::pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

// templated entries get a concrete instance
std::string concrete(std::string name) {
  if (name.size() > 2 && name.substr(name.size() - 2) == "-N") return name.substr(0, name.size() - 1) + "2";
  if (name.size() > 2 && name.substr(name.size() - 2) == "-H") return name.substr(0, name.size() - 1) + "0.3";
  return name;
}

const char* kMinimal = R"([experiment]
process = walk

[process:walk]
kind = rw
law = rademacher
)";

}  // namespace

TEST(Config, MinimalGivesDefaults) {
  const auto p = parse_config_text(kMinimal);
  const ExperimentPlan d;
  EXPECT_EQ(p.t0, d.t0);
  EXPECT_EQ(p.ratio, d.ratio);
  EXPECT_EQ(p.n_horizons, d.n_horizons);
  EXPECT_EQ(p.k_min, d.k_min);
  EXPECT_EQ(p.level, d.level);
  EXPECT_EQ(p.budget.n_min, d.budget.n_min);
  EXPECT_EQ(p.barrier, d.barrier);
}

TEST(Config, NegativeBudgetNamesField) {
  try {
    parse_config_text(std::string("[experiment]\nprocess = walk\nbudget_c = -3\n[process:walk]\nkind = rw\nlaw = rademacher\n"));
    FAIL() << "accepted negative budget";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("budget_c"), std::string::npos) << e.what();
  }
}

TEST(Config, RatioOneRejected) {
  EXPECT_THROW(parse_config_text("[experiment]\nprocess = w\nratio = 1\n[process:w]\nkind = rw\nlaw = rademacher\n"),
               ConfigError);
}

TEST(Config, UnknownKeyRejected) {
  try {
    parse_config_text("[experiment]\nprocess = w\nhorizon = 3\n[process:w]\nkind = rw\nlaw = rademacher\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("horizon"), std::string::npos);
  }
}

TEST(Config, PresetPlansRoundTrip) {
  for (const auto& info : list_presets()) {
    const auto p = make_preset(concrete(info.name)).plan;
    const std::string text = plan_to_config(p);
    EXPECT_EQ(plan_to_config(parse_config_text(text)), text) << info.name;
  }
}

TEST(Runner, CounterexampleShortGridMatchesOracle) {
  ScenarioOverrides o;
  o.horizons = {1.5, 4.5, 10.5};
  o.seed = 7;
  const auto out = run_scenario("counterexample", o, scratch("cx"));
  ASSERT_EQ(out.oracle.size(), 3u);
  EXPECT_TRUE(out.oracle_ok);
  for (const auto& row : out.oracle) EXPECT_TRUE(row.within) << row.horizon;
  ASSERT_TRUE(out.oracle_slope);
  EXPECT_NEAR(*out.oracle_slope, -0.70, 0.03);
  EXPECT_EQ(scenario_exit_code(out), 0);
  EXPECT_TRUE(fs::exists(out.files.results));
  EXPECT_TRUE(fs::exists(out.files.oracle));
}

TEST(Runner, UnknownPresetListsChoices) {
  EXPECT_THROW(make_preset("no-such-preset"), ConfigError);
  const auto r = run_cli("preset no-such-preset --out " + scratch("unk").string());
  EXPECT_NE(r.code, 0);
  for (const auto& info : list_presets()) EXPECT_NE(r.out.find(info.name), std::string::npos) << info.name;
}

TEST(Runner, PresetPredictionsAreSet) {
  for (const auto& info : list_presets()) {
    const auto p = make_preset(concrete(info.name));
    EXPECT_TRUE(predicted_exponent(p.plan.subject).theta.has_value()) << info.name;
  }
}

TEST(Cli, ListPresets) {
  const auto r = run_cli("list-presets");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("bm-baseline"), std::string::npos);
}

TEST(Cli, OracleSubcommand) {
  const auto r = run_cli("oracle srw-max --n 4 --barrier 0");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("3/8"), std::string::npos) << r.out;
}

TEST(Cli, SingleInnerIsNotAChain) {
  const auto r = run_cli("survival --outer bm --inner rw:law=rademacher --horizon 16 --samples 2000");
  EXPECT_EQ(r.code, 0) << r.out;
  // same subject through the library
  ExperimentPlan p;
  p.subject = CompositionSpec{brownian_motion(), {RandomWalkSpec{Rademacher{}}}, CompositionMode::OneSidedAbs, {}};
  p.horizons = {16};
  p.budget = {2000, 0.0, 2000, 1.0};
  std::ostringstream csv;
  write_estimates_csv(csv, {estimate_survival(p, make_setup(p, 16, 0), 2000)});
  EXPECT_NE(r.out.find(csv.str()), std::string::npos) << r.out << "\nvs\n" << csv.str();
}

TEST(Cli, BadConfigExitsTwo) {
  const auto d = scratch("badcfg");
  std::ofstream(d / "bad.ini") << "[experiment]\nprocess = w\nratio = 0.5\n[process:w]\nkind = rw\nlaw = rademacher\n";
  const auto r = run_cli("experiment --config " + (d / "bad.ini").string() + " --out " + (d / "out").string());
  EXPECT_EQ(r.code, 2) << r.out;
}

TEST(Validate, QuickSuitePasses) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto rep = validate_suite(ValidateOptions{});
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (const auto& r : rep.results) EXPECT_TRUE(r.passed) << r.module << "/" << r.name << ": " << r.detail;
  EXPECT_EQ(rep.results.size(), invariant_names().size());
  EXPECT_LT(s, 60.0);
}

TEST(Validate, OffByOneExtremaIsCaught) {
  ValidateOptions o;
  o.extrema = [](const PathSkeleton& p) {
    auto r = running_extrema(p);
    if (r.max.size() > 1) r.max.erase(r.max.begin());
    r.max.push_back(r.max.back());
    return r;
  };
  const auto r = run_invariant("ladder-reconstruction", o);
  EXPECT_FALSE(r.passed) << r.detail;
}

TEST(Validate, QuickAndFullShareTheList) {
  // the list is a fixed table; both modes walk it in order
  ValidateOptions q, f;
  f.quick = false;
  const auto names = invariant_names();
  const auto a = run_invariant("dp-equals-enumeration", q);
  const auto b = run_invariant("dp-equals-enumeration", f);
  EXPECT_EQ(a.module, b.module);
  EXPECT_EQ(a.name, b.name);
  EXPECT_TRUE(a.passed && b.passed);
  EXPECT_EQ(names.size(), 28u);
}

TEST(Determinism, SameSeedSameCsv) {
  ScenarioOverrides o;
  o.horizons = {16, 64};
  o.budget_scale = 0.02;
  o.threads = 1;
  const auto a = run_scenario("levy-rw-centered", o, scratch("det_a"));
  o.threads = 4;
  const auto b = run_scenario("levy-rw-centered", o, scratch("det_b"));
  ASSERT_EQ(a.result.estimates.size(), 2u);
  EXPECT_GT(a.result.estimates[0].n_samples, 0u);
  EXPECT_GT(slurp(a.files.results).size(), 40u);
  EXPECT_EQ(slurp(a.files.results), slurp(b.files.results));
  EXPECT_EQ(slurp(a.files.fit), slurp(b.files.fit));
}

TEST(Determinism, ManifestConfigReproducesResults) {
  ScenarioOverrides o;
  o.horizons = {16, 64};
  o.budget_scale = 0.02;
  const auto d = scratch("manifest");
  const auto a = run_scenario("levy-rw-drift", o, d / "a");
  const auto r = run_cli("experiment --config " + a.files.config.string() + " --out " + (d / "b").string());
  ASSERT_EQ(r.code == 0 || r.code == 1, true) << r.out;
  const auto b_results = d / "b" / a.files.results.filename();
  ASSERT_TRUE(fs::exists(b_results)) << r.out;
  EXPECT_GT(slurp(b_results).size(), 40u);
  EXPECT_EQ(slurp(a.files.results), slurp(b_results));
}
