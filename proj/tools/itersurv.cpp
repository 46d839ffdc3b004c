#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "itersurv/itersurv.hpp"

using namespace itersurv;

namespace {

const char* kConfigHelp = R"(Config file (INI sections, unknown keys rejected):

[experiment]
  name = experiment        output file stem
  process = NAME           bare process (when there is no [composition])
  t0 = 256                 first horizon
  ratio = 2                horizon growth factor, > 1
  n_horizons = 7
  horizons = a, b, ...     explicit horizons (overrides t0/ratio/n_horizons)
  step = 1                 time-grid step of the driving process
  fill_step =              dense-range spacing for continuous inners
  sup_mode = grid          grid | bridge
  barrier = 1
  seed = 1
  scenario_index = 0
  k_min = 25               horizons with fewer survivors are left out of the fit
  level = 0.99             Wilson interval level
  tolerance = 0.05         acceptance band on |slope + theta|
  budget_n_min = 10000     n(T) = max(n_min, c / T^-theta) * scale, capped
  budget_c = 0
  budget_n_max = 20000000
  budget_scale = 1
  threads = 0              0 = all cores (ITERSURV_THREADS caps)

[process:NAME]
  kind = rw               law = rademacher | gaussian(m,s) | laplace(m,b) | weibull(k,s,off) | constant(c)
  kind = levy             drift, sigma, jump_rate, jump_law, centered
  kind = bm               sigma
  kind = ibm              order
  kind = fbm              hurst, two_sided
  kind = counterexample
  kind = two-sided        plus = NAME, minus = NAME

[composition]
  outer = NAME
  inner = NAME[, NAME...]  last entry drives time
  mode = one-sided-abs     one-sided-abs | two-sided
  strategy = auto          auto | exact | dense
)";

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : cfg::split_top(s, ','))
    if (!item.empty()) out.push_back(cfg::parse_double("list", item));
  return out;
}

void print_outcome(const ScenarioOutcome& o, std::ostream& os) {
  const auto& r = o.result;
  for (const auto& e : r.estimates)
    os << "  T=" << cfg::fmt(e.horizon) << "  n=" << e.n_samples << "  k=" << e.n_survived
       << "  p=" << cfg::fmt(e.p_hat) << "  [" << cfg::fmt(e.ci_low) << ", " << cfg::fmt(e.ci_high) << "]\n";
  for (const auto& w : r.prediction.warnings) os << "  warning: " << w << '\n';
  if (!o.preset.warning.empty()) os << "  warning: " << o.preset.warning << '\n';
  if (r.fit) {
    os << "  slope " << cfg::fmt(r.fit->slope) << " +- " << cfg::fmt(r.fit->slope_stderr);
    if (r.prediction.theta) os << "  theta_pred " << cfg::fmt(*r.prediction.theta) << " (" << r.prediction.theorem << ")";
    os << '\n';
  } else {
    os << "  fit: " << r.fit_error << '\n';
  }
  if (!o.oracle.empty()) {
    os << "  oracle " << (o.oracle_ok ? "agrees" : "DISAGREES") << " at every horizon";
    if (o.oracle_slope) os << "; exact-law slope on this grid " << cfg::fmt(*o.oracle_slope);
    os << '\n';
  }
  os << "  " << (o.passed ? "PASS" : "FAIL") << (o.preset.gating ? "" : " (informative)") << "  "
     << cfg::fmt(std::round(r.seconds * 10) / 10) << " s\n  results: " << o.files.results.string() << '\n';
}

ExperimentPlan single_horizon_plan(const Subject& subject, double horizon, std::uint64_t samples, double step,
                                   std::optional<double> fill, const std::string& sup, double barrier,
                                   std::uint64_t seed, unsigned threads) {
  ExperimentPlan p;
  p.subject = subject;
  p.horizons = {horizon};
  p.step = step;
  p.fill_step = fill;
  p.sup_mode = sup == "bridge" ? SupMode::Bridge : SupMode::Grid;
  if (sup != "bridge" && sup != "grid") throw ConfigError("--sup-mode: expected grid or bridge, got '" + sup + "'");
  p.barrier = barrier;
  p.seed = Seed{seed};
  p.budget = {samples, 0.0, samples, 1.0};
  p.threads = threads;
  return p;
}

Subject subject_from(const std::string& process, const std::string& outer, const std::vector<std::string>& inner,
                     const std::string& mode) {
  if (outer.empty()) {
    if (process.empty()) throw ConfigError("give --process, or --outer with --inner");
    return parse_process_string(process);
  }
  if (inner.empty()) throw ConfigError("--outer needs at least one --inner");
  CompositionSpec c;
  c.outer = parse_process_string(outer);
  c.inner.clear();
  for (const auto& s : inner) c.inner.push_back(parse_process_string(s));
  if (mode == "two-sided") c.mode = CompositionMode::TwoSided;
  else if (mode != "one-sided-abs") throw ConfigError("--mode: expected one-sided-abs or two-sided");
  return c;
}

std::vector<SurvivalEstimate> read_estimates_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open '" + path + "'");
  std::string line;
  std::getline(f, line);
  if (cfg::trim(line) != "T,p_hat,ci_low,ci_high,n_samples,n_survived")
    throw ConfigError(path + ": expected header T,p_hat,ci_low,ci_high,n_samples,n_survived");
  std::vector<SurvivalEstimate> out;
  while (std::getline(f, line)) {
    if (cfg::trim(line).empty()) continue;
    const auto cols = cfg::split_top(line, ',');
    if (cols.size() != 6) throw ConfigError(path + ": malformed row '" + line + "'");
    SurvivalEstimate e;
    e.horizon = cfg::parse_double("T", cols[0]);
    e.p_hat = cfg::parse_double("p_hat", cols[1]);
    e.ci_low = cfg::parse_double("ci_low", cols[2]);
    e.ci_high = cfg::parse_double("ci_high", cols[3]);
    e.n_samples = cfg::parse_u64("n_samples", cols[4]);
    e.n_survived = cfg::parse_u64("n_survived", cols[5]);
    out.push_back(e);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"itersurv: survival exponents of iterated processes by Monte Carlo"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  // paths
  auto* paths = app.add_subcommand("paths", "write sample paths as CSV (path,t,value)");
  std::string p_process = "bm";
  double p_horizon = 10, p_step = 0.01;
  std::uint64_t p_count = 3, p_seed = 1;
  std::string p_out;
  paths->add_option("--process", p_process, "process, e.g. levy:sigma=1,jump_rate=1,jump_law=laplace(0,1)")
      ->capture_default_str();
  paths->add_option("--horizon", p_horizon)->capture_default_str();
  paths->add_option("--step", p_step)->capture_default_str();
  paths->add_option("--count", p_count)->capture_default_str();
  paths->add_option("--seed", p_seed)->capture_default_str();
  paths->add_option("--out", p_out, "output file (stdout if empty)");

  // survival
  auto* surv = app.add_subcommand("survival", "estimate P(sup Z <= barrier) at one horizon");
  std::string s_process, s_outer, s_mode = "one-sided-abs", s_sup = "grid";
  std::vector<std::string> s_inner;
  double s_horizon = 256, s_step = 1, s_barrier = 1;
  std::optional<double> s_fill;
  std::uint64_t s_samples = 100000, s_seed = 1;
  unsigned s_threads = 0;
  surv->add_option("--process", s_process, "bare process");
  surv->add_option("--outer", s_outer, "outer process of a composition");
  surv->add_option("--inner", s_inner, "inner process (repeat for chains; last drives time)");
  surv->add_option("--mode", s_mode)->capture_default_str();
  surv->add_option("--horizon", s_horizon)->capture_default_str();
  surv->add_option("--samples", s_samples)->capture_default_str();
  surv->add_option("--step", s_step)->capture_default_str();
  surv->add_option("--fill-step", s_fill);
  surv->add_option("--sup-mode", s_sup)->capture_default_str();
  surv->add_option("--barrier", s_barrier)->capture_default_str();
  surv->add_option("--seed", s_seed)->capture_default_str();
  surv->add_option("--threads", s_threads)->capture_default_str();

  // fit
  auto* fit = app.add_subcommand("fit", "weighted log-log fit of an estimates CSV");
  std::string f_input;
  std::optional<double> f_theta;
  std::uint64_t f_kmin = 25;
  fit->add_option("input", f_input, "CSV with header T,p_hat,ci_low,ci_high,n_samples,n_survived")->required();
  fit->add_option("--theta", f_theta, "predicted exponent to compare against");
  fit->add_option("--k-min", f_kmin)->capture_default_str();

  // probe
  auto* probe = app.add_subcommand("probe", "fluctuation probes");
  std::string pr_kind = "small-dev", pr_process = "bm", pr_law = "rademacher";
  std::string pr_eps = "0.5,0.75,1", pr_thresholds = "0.5,1,2,4";
  double pr_eta = 1.0, pr_a = 0.4, pr_step = 0x1.0p-10;
  std::uint64_t pr_samples = 100000, pr_seed = 1, pr_n = 1000000;
  unsigned pr_threads = 0;
  probe->add_option("kind", pr_kind, "small-dev | negative-moment | barrier | ladder-tail")->capture_default_str();
  probe->add_option("--process", pr_process)->capture_default_str();
  probe->add_option("--law", pr_law, "increment law (barrier, ladder-tail)")->capture_default_str();
  probe->add_option("--eps", pr_eps)->capture_default_str();
  probe->add_option("--eta", pr_eta)->capture_default_str();
  probe->add_option("--a", pr_a, "barrier exponent in N^a")->capture_default_str();
  probe->add_option("--steps", pr_n, "walk length N")->capture_default_str();
  probe->add_option("--thresholds", pr_thresholds)->capture_default_str();
  probe->add_option("--step", pr_step)->capture_default_str();
  probe->add_option("--samples", pr_samples)->capture_default_str();
  probe->add_option("--seed", pr_seed)->capture_default_str();
  probe->add_option("--threads", pr_threads)->capture_default_str();

  // oracle
  auto* orc = app.add_subcommand("oracle", "exact reference values");
  std::string o_kind = "srw-max";
  std::int64_t o_n = 16, o_b = 0;
  double o_x = 1.0, o_t = 100.0, o_eps = 1.0;
  orc->add_option("kind", o_kind, "srw-max | srw-max-enum | srw-iterated | bm-small-dev | counterexample | bm-survival")
      ->capture_default_str();
  orc->add_option("--n", o_n, "walk length")->capture_default_str();
  orc->add_option("--barrier", o_b)->capture_default_str();
  orc->add_option("--horizon", o_t)->capture_default_str();
  orc->add_option("--x", o_x, "level for bm-survival")->capture_default_str();
  orc->add_option("--eps", o_eps)->capture_default_str();

  // experiment
  auto* exp = app.add_subcommand("experiment", "run an experiment from a config file");
  exp->footer(kConfigHelp);
  std::string e_config, e_out = "results";
  exp->add_option("--config", e_config)->required()->check(CLI::ExistingFile);
  exp->add_option("--out", e_out)->capture_default_str();

  // preset
  auto* pre = app.add_subcommand("preset", "run a named preset; exit 0 iff accepted");
  std::string pre_name, pre_out = "results", pre_horizons;
  std::optional<std::uint64_t> pre_seed;
  std::optional<double> pre_tol, pre_scale;
  std::optional<unsigned> pre_threads;
  pre->add_option("name", pre_name)->required();
  pre->add_option("--seed", pre_seed);
  pre->add_option("--tolerance", pre_tol);
  pre->add_option("--budget-scale", pre_scale);
  pre->add_option("--horizons", pre_horizons, "comma-separated horizons");
  pre->add_option("--threads", pre_threads);
  pre->add_option("--out", pre_out)->capture_default_str();

  // validate
  auto* val = app.add_subcommand("validate", "invariant suite");
  bool v_quick = false;
  std::uint64_t v_seed = ValidateOptions{}.seed;
  val->add_flag("--quick", v_quick, "cap sample sizes at 10^4");
  val->add_option("--seed", v_seed)->capture_default_str();

  auto* list = app.add_subcommand("list-presets", "list preset names");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*paths) {
      const ProcessSpec spec = parse_process_string(p_process);
      const TimeGrid g = grid_for_horizon(p_horizon, p_step);
      std::ofstream file;
      if (!p_out.empty()) file.open(p_out);
      std::ostream& os = p_out.empty() ? std::cout : file;
      os << "path,t,value\n";
      for (std::uint64_t i = 0; i < p_count; ++i) {
        Stream s = derive_stream(Seed{p_seed}, StreamKey{0, 0, i, kOuterPlus});
        auto emit = [&](const PathSkeleton& ps, double sign) {
          for (std::size_t k = 0; k < ps.values.size(); ++k)
            os << i << ',' << cfg::fmt(sign * ps.grid.time(k)) << ',' << cfg::fmt(ps.values[k]) << '\n';
        };
        std::visit(overloaded{
                       [&](const RandomWalkSpec& rw) {
                         emit(gen_random_walk(static_cast<std::size_t>(std::floor(p_horizon)), rw.law, s), 1.0);
                       },
                       [&](const LevySpec& l) { emit(gen_levy_path(g, l, s), 1.0); },
                       [&](const IbmSpec& b) { emit(gen_ibm_path(g, b, s), 1.0); },
                       [&](const FbmSpec& f) {
                         const auto fp = gen_fbm_path(g, f, s);
                         if (fp.minus) emit(*fp.minus, -1.0);
                         emit(fp.plus, 1.0);
                       },
                       [&](const CounterexampleSpec&) {
                         const std::size_t m = static_cast<std::size_t>(std::floor(p_horizon + 0.5));
                         const auto v = gen_counterexample_values(std::max<std::size_t>(m, 1), s);
                         for (std::size_t n = 0; n < m; ++n)
                           os << i << ',' << cfg::fmt(counterexample_spike_time(n + 1)) << ',' << cfg::fmt(v[n])
                              << '\n';
                       },
                       [&](const TwoSidedSpec&) {
                         throw ConfigError("paths: draw each branch of a two-sided process separately");
                       },
                   },
                   spec);
      }
      return 0;
    }
    if (*surv) {
      const Subject subj = subject_from(s_process, s_outer, s_inner, s_mode);
      ExperimentPlan plan =
          single_horizon_plan(subj, s_horizon, s_samples, s_step, s_fill, s_sup, s_barrier, s_seed, s_threads);
      validate(plan);
      const auto e = estimate_survival(plan, make_setup(plan, s_horizon, 0), s_samples);
      write_estimates_csv(std::cout, {e});
      return 0;
    }
    if (*fit) {
      auto es = read_estimates_csv(f_input);
      ExponentFit f = fit_exponent(es, f_kmin);
      f.predicted = f_theta;
      f.theorem = f_theta ? "user" : "none";
      write_fit_csv(std::cout, f);
      return 0;
    }
    if (*probe) {
      const Seed seed{pr_seed};
      if (pr_kind == "small-dev") {
        SmallDeviationOptions so;
        so.step = pr_step;
        so.threads = pr_threads;
        const auto curve = small_deviation_curve(parse_process_string(pr_process), parse_list(pr_eps), pr_samples,
                                                 seed, so);
        std::cout << "eps,p_hat,ci_low,ci_high,n_samples,n_inside\n";
        for (const auto& pt : curve)
          std::cout << cfg::fmt(pt.eps) << ',' << cfg::fmt(pt.p_hat) << ',' << cfg::fmt(pt.ci_low) << ','
                    << cfg::fmt(pt.ci_high) << ',' << pt.n_samples << ',' << pt.n_inside << '\n';
      } else if (pr_kind == "negative-moment") {
        const auto r = negative_moment_estimate(parse_process_string(pr_process), pr_eta, pr_samples, seed, pr_step);
        std::cout << "eta,mean,std_error,n_samples,heavy_tail,top_share\n"
                  << cfg::fmt(r.eta) << ',' << cfg::fmt(r.mean) << ',' << cfg::fmt(r.std_error) << ',' << r.n_samples
                  << ',' << (r.heavy_tail ? 1 : 0) << ',' << cfg::fmt(r.top_share) << '\n';
      } else if (pr_kind == "barrier") {
        const auto r = normalized_barrier_check(parse_law("--law", pr_law), pr_n, pr_a, pr_samples, seed, 0.99,
                                                pr_threads);
        std::cout << "N,a,ratio,ci_low,ci_high,target,n_samples,n_survived\n"
                  << r.n_steps << ',' << cfg::fmt(r.exponent) << ',' << cfg::fmt(r.ratio) << ','
                  << cfg::fmt(r.ci_low) << ',' << cfg::fmt(r.ci_high) << ',' << cfg::fmt(r.target) << ','
                  << r.n_samples << ',' << r.n_survived << '\n';
      } else if (pr_kind == "ladder-tail") {
        const auto r = ladder_height_tail_probe(parse_law("--law", pr_law), pr_samples, seed,
                                                parse_list(pr_thresholds), 1'000'000, pr_threads);
        std::cout << "threshold,tail,exceed,n_used,n_capped\n";
        for (const auto& pt : r.points)
          std::cout << cfg::fmt(pt.threshold) << ',' << cfg::fmt(pt.tail) << ',' << pt.exceed << ',' << r.n_used
                    << ',' << r.n_capped << '\n';
      } else {
        throw ConfigError("probe: unknown kind '" + pr_kind + "'");
      }
      return 0;
    }
    if (*orc) {
      ExactProbability r;
      if (o_kind == "srw-max") r = srw_max_dp(o_n, o_b);
      else if (o_kind == "srw-max-enum") r = srw_max_enumerate(static_cast<int>(o_n), o_b);
      else if (o_kind == "srw-iterated") r = srw_iterated_enum(static_cast<int>(o_n), o_b);
      else if (o_kind == "bm-small-dev") r = bm_small_dev_exact(o_eps);
      else if (o_kind == "counterexample") r = counterexample_survival_exact(o_t);
      else if (o_kind == "bm-survival") r = bm_survival_closed_form(o_t, o_x);
      else throw ConfigError("oracle: unknown kind '" + o_kind + "'");
      std::cout << "value,method,exact\n"
                << cfg::fmt(r.value) << ',' << to_string(r.method) << ',' << (r.exact ? to_string(*r.exact) : "")
                << '\n';
      return 0;
    }
    if (*exp) {
      Preset p;
      p.plan = parse_config(e_config);
      p.description = "config " + e_config;
      p.gating = true;
      const auto o = run_preset(p, e_out);
      print_outcome(o, std::cout);
      return scenario_exit_code(o);
    }
    if (*pre) {
      ScenarioOverrides ov;
      ov.seed = pre_seed;
      ov.tolerance = pre_tol;
      ov.budget_scale = pre_scale;
      ov.threads = pre_threads;
      if (!pre_horizons.empty()) ov.horizons = parse_list(pre_horizons);
      Preset p;
      try {
        p = apply_overrides(make_preset(pre_name), ov);
      } catch (const ConfigError& e) {
        std::cerr << e.what();
        return 2;
      }
      std::cout << pre_name << ": " << p.description << '\n';
      const auto o = run_preset(p, pre_out);
      print_outcome(o, std::cout);
      return scenario_exit_code(o);
    }
    if (*val) {
      ValidateOptions vo;
      vo.quick = v_quick;
      vo.seed = v_seed;
      const auto rep = validate_suite(vo, &std::cout);
      std::cout << (rep.all_passed() ? "all invariants pass" : "invariant failures") << " ("
                << cfg::fmt(std::round(rep.seconds * 10) / 10) << " s, " << (rep.quick ? "quick" : "full") << ")\n";
      return rep.all_passed() ? 0 : 1;
    }
    if (*list) {
      for (const auto& p : list_presets()) std::cout << p.name << "\t" << p.description << '\n';
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
