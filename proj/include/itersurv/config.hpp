#pragma once

// Experiment configuration: INI-style sections, parsed strictly.
//
//   [experiment]            horizons, budgets, seed, barrier, ...
//   [process:NAME]          kind = rw|levy|bm|ibm|fbm|counterexample|two-sided
//   [composition]           outer = NAME, inner = NAME[, NAME...], mode, strategy
//
// Without a [composition] section, [experiment] process = NAME names a bare
// process.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "itersurv/estimation.hpp"

namespace itersurv {

namespace cfg {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Splits on `sep` outside parentheses.
inline std::vector<std::string> split_top(std::string_view s, char sep) {
  std::vector<std::string> out;
  int depth = 0;
  std::string cur;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == sep && depth == 0) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
  return out;
}

inline double parse_double(const std::string& field, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto* end = t.data() + t.size();
  const auto [p, ec] = std::from_chars(t.data(), end, v);
  if (ec != std::errc{} || p != end || t.empty())
    throw ConfigError(field + ": expected a real number, got '" + text + "'");
  return v;
}

inline std::int64_t parse_int(const std::string& field, const std::string& text) {
  const std::string t = trim(text);
  // allow 1e6-style integers
  const double d = parse_double(field, t);
  if (d != std::floor(d) || std::abs(d) > 9.0e18)
    throw ConfigError(field + ": expected an integer, got '" + text + "'");
  return static_cast<std::int64_t>(d);
}

inline std::uint64_t parse_count(const std::string& field, const std::string& text) {
  const std::int64_t v = parse_int(field, text);
  if (v < 0) throw ConfigError(field + ": expected a nonnegative integer, got '" + text + "'");
  return static_cast<std::uint64_t>(v);
}

inline std::uint64_t parse_u64(const std::string& field, const std::string& text) {
  const std::string t = trim(text);
  std::uint64_t v = 0;
  const auto* end = t.data() + t.size();
  const auto [p, ec] = std::from_chars(t.data(), end, v);
  if (ec != std::errc{} || p != end || t.empty())
    throw ConfigError(field + ": expected an unsigned 64-bit integer, got '" + text + "'");
  return v;
}

inline bool parse_bool(const std::string& field, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError(field + ": expected true or false, got '" + text + "'");
}

// Shortest text that reads back to the same double.
inline std::string fmt(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace cfg

// Law syntax: rademacher | gaussian(mean,sd) | laplace(mean,scale) |
// signed-weibull(shape,scale,offset) | constant(c)
inline IncrementLaw parse_law(const std::string& field, const std::string& text) {
  const std::string t = cfg::trim(text);
  const auto open = t.find('(');
  const std::string name = cfg::trim(t.substr(0, open));
  std::vector<double> args;
  if (open != std::string::npos) {
    if (t.back() != ')') throw ConfigError(field + ": unbalanced parentheses in '" + text + "'");
    for (const auto& a : cfg::split_top(t.substr(open + 1, t.size() - open - 2), ','))
      args.push_back(cfg::parse_double(field, a));
  }
  auto need = [&](std::size_t n) {
    if (args.size() != n)
      throw ConfigError(field + ": law '" + name + "' takes " + std::to_string(n) + " arguments, got " +
                        std::to_string(args.size()));
  };
  IncrementLaw law;
  if (name == "rademacher") {
    need(0);
    law = Rademacher{};
  } else if (name == "gaussian") {
    need(2);
    law = Gaussian{args[0], args[1]};
  } else if (name == "laplace") {
    need(2);
    law = Laplace{args[0], args[1]};
  } else if (name == "signed-weibull") {
    need(3);
    law = SignedWeibull{args[0], args[1], args[2]};
  } else if (name == "constant") {
    need(1);
    law = Constant{args[0]};
  } else {
    throw ConfigError(field + ": unknown law '" + name +
                      "' (expected rademacher, gaussian, laplace, signed-weibull or constant)");
  }
  validate(law);
  return law;
}

inline std::string format_law(const IncrementLaw& law) {
  using cfg::fmt;
  return std::visit(overloaded{
                        [](const Rademacher&) { return std::string("rademacher"); },
                        [](const Gaussian& g) { return "gaussian(" + fmt(g.mean) + "," + fmt(g.sd) + ")"; },
                        [](const Laplace& l) { return "laplace(" + fmt(l.mean) + "," + fmt(l.scale) + ")"; },
                        [](const SignedWeibull& w) {
                          return "signed-weibull(" + fmt(w.shape) + "," + fmt(w.scale) + "," + fmt(w.offset) + ")";
                        },
                        [](const Constant& c) { return "constant(" + fmt(c.value) + ")"; },
                    },
                    law);
}

using KeyValues = std::vector<std::pair<std::string, std::string>>;

namespace cfg {

inline void reject_unknown(const std::string& where, const KeyValues& kv, const std::set<std::string>& allowed) {
  for (const auto& [k, v] : kv)
    if (!allowed.count(k)) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      throw ConfigError(where + ": unknown key '" + k + "' (allowed: " + list + ")");
    }
}

inline const std::string* find(const KeyValues& kv, const std::string& key) {
  for (const auto& [k, v] : kv)
    if (k == key) return &v;
  return nullptr;
}

}  // namespace cfg

// One branch/process from key-value pairs. Two-sided specs resolve their
// branch names through `lookup`.
template <class Lookup>
ProcessSpec process_from_keys(const std::string& where, const KeyValues& kv, Lookup&& lookup) {
  const std::string* kind = cfg::find(kv, "kind");
  if (!kind) throw ConfigError(where + ".kind: missing (expected rw, levy, bm, ibm, fbm, counterexample or two-sided)");
  const std::string k = cfg::trim(*kind);
  auto get = [&](const std::string& key) { return cfg::find(kv, key); };
  auto num = [&](const std::string& key, double def) {
    const std::string* v = get(key);
    return v ? cfg::parse_double(where + "." + key, *v) : def;
  };
  ProcessSpec spec;
  if (k == "rw") {
    cfg::reject_unknown(where, kv, {"kind", "law"});
    const std::string* law = get("law");
    spec = RandomWalkSpec{law ? parse_law(where + ".law", *law) : IncrementLaw{Rademacher{}}};
  } else if (k == "levy" || k == "bm") {
    if (k == "bm") {
      cfg::reject_unknown(where, kv, {"kind", "sigma"});
      spec = brownian_motion(num("sigma", 1.0));
    } else {
      cfg::reject_unknown(where, kv, {"kind", "drift", "sigma", "jump_rate", "jump_law", "centered"});
      LevySpec l;
      l.drift = num("drift", 0.0);
      l.sigma = num("sigma", 1.0);
      l.jump_rate = num("jump_rate", 0.0);
      if (const auto* j = get("jump_law")) l.jump_law = parse_law(where + ".jump_law", *j);
      if (const auto* c = get("centered")) l.centered = cfg::parse_bool(where + ".centered", *c);
      spec = l;
    }
  } else if (k == "ibm") {
    cfg::reject_unknown(where, kv, {"kind", "order"});
    const std::string* o = get("order");
    spec = IbmSpec{o ? static_cast<int>(cfg::parse_int(where + ".order", *o)) : 1};
  } else if (k == "fbm") {
    cfg::reject_unknown(where, kv, {"kind", "hurst", "two_sided"});
    FbmSpec f;
    f.hurst = num("hurst", 0.5);
    if (const auto* t = get("two_sided")) f.two_sided = cfg::parse_bool(where + ".two_sided", *t);
    spec = f;
  } else if (k == "counterexample") {
    cfg::reject_unknown(where, kv, {"kind"});
    spec = CounterexampleSpec{};
  } else if (k == "two-sided") {
    cfg::reject_unknown(where, kv, {"kind", "plus", "minus"});
    const std::string* p = get("plus");
    const std::string* m = get("minus");
    if (!p || !m) throw ConfigError(where + ": two-sided needs plus = NAME and minus = NAME");
    auto branch = [&](const std::string& name) -> BranchSpec {
      const ProcessSpec s = lookup(cfg::trim(name));
      if (std::holds_alternative<TwoSidedSpec>(s)) throw ConfigError(where + ": branches must be one-sided");
      return std::visit(overloaded{[](const TwoSidedSpec&) -> BranchSpec { return LevySpec{}; },
                                   [](const auto& v) -> BranchSpec { return v; }},
                        s);
    };
    spec = TwoSidedSpec{branch(*p), branch(*m)};
  } else {
    throw ConfigError(where + ".kind: unknown kind '" + k +
                      "' (expected rw, levy, bm, ibm, fbm, counterexample or two-sided)");
  }
  try {
    validate(spec);
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return spec;
}

// Command-line form "kind:key=value,key=value". Two-sided processes need a
// config file, except the shorthand "two-sided-bm".
inline ProcessSpec parse_process_string(const std::string& text) {
  const std::string t = cfg::trim(text);
  if (t == "two-sided-bm") return TwoSidedSpec{IbmSpec{0}, IbmSpec{0}};
  const auto colon = t.find(':');
  KeyValues kv{{"kind", t.substr(0, colon)}};
  if (colon != std::string::npos) {
    for (const auto& item : cfg::split_top(t.substr(colon + 1), ',')) {
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw ConfigError("process '" + text + "': expected key=value, got '" + item + "'");
      kv.emplace_back(cfg::trim(item.substr(0, eq)), cfg::trim(item.substr(eq + 1)));
    }
  }
  return process_from_keys("process '" + text + "'", kv, [&](const std::string& name) -> ProcessSpec {
    throw ConfigError("process '" + text + "': cannot reference '" + name + "' here");
  });
}

inline KeyValues process_keys(const ProcessSpec& spec, const std::string& plus_name = "",
                              const std::string& minus_name = "") {
  using cfg::fmt;
  return std::visit(
      overloaded{
          [](const RandomWalkSpec& rw) { return KeyValues{{"kind", "rw"}, {"law", format_law(rw.law)}}; },
          [](const LevySpec& l) {
            return KeyValues{{"kind", "levy"},           {"drift", fmt(l.drift)},
                             {"sigma", fmt(l.sigma)},    {"jump_rate", fmt(l.jump_rate)},
                             {"jump_law", format_law(l.jump_law)}, {"centered", l.centered ? "true" : "false"}};
          },
          [](const IbmSpec& i) { return KeyValues{{"kind", "ibm"}, {"order", std::to_string(i.order)}}; },
          [](const FbmSpec& f) {
            return KeyValues{{"kind", "fbm"}, {"hurst", fmt(f.hurst)}, {"two_sided", f.two_sided ? "true" : "false"}};
          },
          [](const CounterexampleSpec&) { return KeyValues{{"kind", "counterexample"}}; },
          [&](const TwoSidedSpec&) { return KeyValues{{"kind", "two-sided"}, {"plus", plus_name}, {"minus", minus_name}}; },
      },
      spec);
}

inline std::string process_to_string(const ProcessSpec& spec) {
  if (std::holds_alternative<TwoSidedSpec>(spec)) {
    const auto& ts = std::get<TwoSidedSpec>(spec);
    return "two-sided(" + process_to_string(to_process(ts.plus)) + " | " + process_to_string(to_process(ts.minus)) + ")";
  }
  const KeyValues kv = process_keys(spec);
  std::string s = kv[0].second;
  for (std::size_t i = 1; i < kv.size(); ++i) s += (i == 1 ? ":" : ",") + kv[i].first + "=" + kv[i].second;
  return s;
}

namespace cfg {

inline const std::set<std::string> kExperimentKeys = {
    "name",        "process",       "t0",          "ratio",        "n_horizons", "horizons",
    "step",        "fill_step",     "sup_mode",    "barrier",      "seed",       "scenario_index",
    "k_min",       "level",         "tolerance",   "budget_n_min", "budget_c",   "budget_n_max",
    "budget_scale", "threads"};

}  // namespace cfg

inline ExperimentPlan plan_from_ptree(const boost::property_tree::ptree& root) {
  std::map<std::string, KeyValues> sections;
  std::vector<std::string> order;
  for (const auto& [name, sec] : root) {
    if (sec.empty() && !sec.data().empty())
      throw ConfigError("config: key '" + name + "' appears outside any section");
    if (sections.count(name)) throw ConfigError("config: duplicate section [" + name + "]");
    KeyValues kv;
    for (const auto& [k, v] : sec) kv.emplace_back(k, v.data());
    sections[name] = kv;
    order.push_back(name);
  }
  for (const auto& name : order)
    if (name != "experiment" && name != "composition" && name.rfind("process:", 0) != 0)
      throw ConfigError("config: unknown section [" + name + "] (expected experiment, composition or process:NAME)");
  if (!sections.count("experiment")) throw ConfigError("config: missing [experiment] section");

  std::map<std::string, ProcessSpec> resolved;
  std::set<std::string> resolving;
  std::function<ProcessSpec(const std::string&)> lookup = [&](const std::string& name) -> ProcessSpec {
    if (auto it = resolved.find(name); it != resolved.end()) return it->second;
    const auto sec = sections.find("process:" + name);
    if (sec == sections.end()) throw ConfigError("config: reference to undefined process '" + name + "'");
    if (resolving.count(name)) throw ConfigError("config: process '" + name + "' refers to itself");
    resolving.insert(name);
    ProcessSpec s = process_from_keys("[process:" + name + "]", sec->second, lookup);
    resolving.erase(name);
    resolved[name] = s;
    return s;
  };

  ExperimentPlan plan;
  const KeyValues& ex = sections["experiment"];
  cfg::reject_unknown("[experiment]", ex, cfg::kExperimentKeys);
  auto get = [&](const std::string& k) { return cfg::find(ex, k); };
  auto field = [](const std::string& k) { return "[experiment]." + k; };
  if (auto v = get("name")) plan.name = cfg::trim(*v);
  if (auto v = get("t0")) plan.t0 = cfg::parse_double(field("t0"), *v);
  if (auto v = get("ratio")) plan.ratio = cfg::parse_double(field("ratio"), *v);
  if (auto v = get("n_horizons")) plan.n_horizons = cfg::parse_count(field("n_horizons"), *v);
  if (auto v = get("horizons"))
    for (const auto& t : cfg::split_top(*v, ',')) plan.horizons.push_back(cfg::parse_double(field("horizons"), t));
  if (auto v = get("step")) plan.step = cfg::parse_double(field("step"), *v);
  if (auto v = get("fill_step")) plan.fill_step = cfg::parse_double(field("fill_step"), *v);
  if (auto v = get("sup_mode")) {
    const std::string m = cfg::trim(*v);
    if (m == "grid") plan.sup_mode = SupMode::Grid;
    else if (m == "bridge") plan.sup_mode = SupMode::Bridge;
    else throw ConfigError(field("sup_mode") + ": expected grid or bridge, got '" + m + "'");
  }
  if (auto v = get("barrier")) plan.barrier = cfg::parse_double(field("barrier"), *v);
  if (auto v = get("seed")) plan.seed = Seed{cfg::parse_u64(field("seed"), *v)};
  if (auto v = get("scenario_index")) plan.scenario_index = cfg::parse_count(field("scenario_index"), *v);
  if (auto v = get("k_min")) plan.k_min = cfg::parse_count(field("k_min"), *v);
  if (auto v = get("level")) plan.level = cfg::parse_double(field("level"), *v);
  if (auto v = get("tolerance")) plan.tolerance = cfg::parse_double(field("tolerance"), *v);
  if (auto v = get("budget_n_min")) plan.budget.n_min = cfg::parse_count(field("budget_n_min"), *v);
  if (auto v = get("budget_c")) plan.budget.c_budget = cfg::parse_double(field("budget_c"), *v);
  if (auto v = get("budget_n_max")) plan.budget.n_max = cfg::parse_count(field("budget_n_max"), *v);
  if (auto v = get("budget_scale")) plan.budget.scale = cfg::parse_double(field("budget_scale"), *v);
  if (auto v = get("threads")) plan.threads = static_cast<unsigned>(cfg::parse_count(field("threads"), *v));

  if (sections.count("composition")) {
    const KeyValues& co = sections["composition"];
    cfg::reject_unknown("[composition]", co, {"outer", "inner", "mode", "strategy", "fill_step", "barrier"});
    if (get("process")) throw ConfigError("[experiment].process: not allowed together with [composition]");
    CompositionSpec c;
    const std::string* outer = cfg::find(co, "outer");
    const std::string* inner = cfg::find(co, "inner");
    if (!outer) throw ConfigError("[composition].outer: missing (expected a process name)");
    if (!inner) throw ConfigError("[composition].inner: missing (expected one or more process names)");
    c.outer = lookup(cfg::trim(*outer));
    c.inner.clear();
    for (const auto& n : cfg::split_top(*inner, ',')) c.inner.push_back(lookup(n));
    if (const auto* m = cfg::find(co, "mode")) {
      const std::string mm = cfg::trim(*m);
      if (mm == "one-sided-abs") c.mode = CompositionMode::OneSidedAbs;
      else if (mm == "two-sided") c.mode = CompositionMode::TwoSided;
      else throw ConfigError("[composition].mode: expected one-sided-abs or two-sided, got '" + mm + "'");
    }
    if (const auto* s = cfg::find(co, "strategy")) {
      const std::string ss = cfg::trim(*s);
      if (ss == "exact") c.strategy = ExactAtQueries{};
      else if (ss == "dense") c.strategy = DenseRange{plan.fill_step.value_or(0.0)};
      else if (ss != "auto") throw ConfigError("[composition].strategy: expected auto, exact or dense, got '" + ss + "'");
    }
    if (const auto* f = cfg::find(co, "fill_step")) plan.fill_step = cfg::parse_double("[composition].fill_step", *f);
    if (c.strategy && std::holds_alternative<DenseRange>(*c.strategy)) {
      if (!plan.fill_step) throw ConfigError("[composition].strategy: dense needs fill_step");
      std::get<DenseRange>(*c.strategy).fill_step = *plan.fill_step;
    }
    if (const auto* b = cfg::find(co, "barrier")) plan.barrier = cfg::parse_double("[composition].barrier", *b);
    plan.subject = c;
  } else {
    const std::string* p = get("process");
    if (!p) throw ConfigError("[experiment].process: missing (or add a [composition] section)");
    plan.subject = lookup(cfg::trim(*p));
  }
  for (const auto& name : order)
    if (name.rfind("process:", 0) == 0) lookup(name.substr(8));
  validate(plan);
  return plan;
}

inline ExperimentPlan parse_config_text(const std::string& text) {
  std::istringstream in(text);
  boost::property_tree::ptree root;
  try {
    boost::property_tree::read_ini(in, root);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.message() + " at line " + std::to_string(e.line()));
  }
  return plan_from_ptree(root);
}

inline ExperimentPlan parse_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return parse_config_text(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// Canonical text; parse_config_text(plan_to_config(p)) reproduces p.
inline std::string plan_to_config(const ExperimentPlan& plan) {
  using cfg::fmt;
  std::ostringstream o;
  std::vector<std::pair<std::string, ProcessSpec>> procs;
  auto add = [&](const std::string& base, const ProcessSpec& s) {
    procs.emplace_back(base, s);
    return base;
  };
  std::string subject_line;
  std::string composition;
  if (const auto* p = std::get_if<ProcessSpec>(&plan.subject)) {
    subject_line = "process = " + add("x", *p) + "\n";
  } else {
    const auto& c = std::get<CompositionSpec>(plan.subject);
    std::ostringstream co;
    co << "\n[composition]\nouter = " << add("x", c.outer) << "\ninner = ";
    for (std::size_t i = 0; i < c.inner.size(); ++i) co << (i ? ", " : "") << add("y" + std::to_string(i), c.inner[i]);
    co << "\nmode = " << to_string(c.mode) << "\nstrategy = ";
    if (!c.strategy) co << "auto";
    else if (std::holds_alternative<ExactAtQueries>(*c.strategy)) co << "exact";
    else co << "dense";
    co << "\n";
    composition = co.str();
  }
  o << "[experiment]\n";
  o << "name = " << plan.name << "\n" << subject_line;
  if (plan.horizons.empty()) {
    o << "t0 = " << fmt(plan.t0) << "\nratio = " << fmt(plan.ratio) << "\nn_horizons = " << plan.n_horizons << "\n";
  } else {
    o << "horizons = ";
    for (std::size_t i = 0; i < plan.horizons.size(); ++i) o << (i ? ", " : "") << fmt(plan.horizons[i]);
    o << "\n";
  }
  o << "step = " << fmt(plan.step) << "\n";
  std::optional<double> fill = plan.fill_step;
  if (const auto* c = std::get_if<CompositionSpec>(&plan.subject); c && c->strategy &&
                                                                    std::holds_alternative<DenseRange>(*c->strategy))
    fill = std::get<DenseRange>(*c->strategy).fill_step;
  if (fill) o << "fill_step = " << fmt(*fill) << "\n";
  o << "sup_mode = " << to_string(plan.sup_mode) << "\n";
  o << "barrier = " << fmt(plan.barrier) << "\n";
  o << "seed = " << plan.seed.value << "\n";
  o << "scenario_index = " << plan.scenario_index << "\n";
  o << "k_min = " << plan.k_min << "\n";
  o << "level = " << fmt(plan.level) << "\n";
  o << "tolerance = " << fmt(plan.tolerance) << "\n";
  o << "budget_n_min = " << plan.budget.n_min << "\n";
  o << "budget_c = " << fmt(plan.budget.c_budget) << "\n";
  o << "budget_n_max = " << plan.budget.n_max << "\n";
  o << "budget_scale = " << fmt(plan.budget.scale) << "\n";
  o << "threads = " << plan.threads << "\n";
  o << composition;
  // two-sided branches become their own sections
  for (std::size_t i = 0; i < procs.size(); ++i) {
    const auto [name, spec] = procs[i];
    KeyValues kv;
    if (const auto* ts = std::get_if<TwoSidedSpec>(&spec)) {
      const std::string pn = add(name + "_plus", to_process(ts->plus));
      const std::string mn = add(name + "_minus", to_process(ts->minus));
      kv = process_keys(spec, pn, mn);
    } else {
      kv = process_keys(spec);
    }
    o << "\n[process:" << name << "]\n";
    for (const auto& [k, v] : kv) o << k << " = " << v << "\n";
  }
  return o.str();
}

// FNV-1a over the canonical text, as 16 hex digits.
inline std::string config_digest(const std::string& canonical) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream o;
  o << std::hex << std::setw(16) << std::setfill('0') << h;
  return o.str();
}

}  // namespace itersurv
