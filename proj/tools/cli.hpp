#pragma once

// Command-line front end: configuration parsing and the subcommands
// check, simulate, orbit, spectrum, stability, pde-compare and sweep.

#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hsc/hsc.hpp"

namespace hsc::cli {

using json = nlohmann::ordered_json;

enum ExitCode : int { kOk = 0, kNumerical = 1, kHypothesis = 2, kConfig = 64 };

// ---------------------------------------------------------------- schema

inline std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

inline void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
}

inline void reject_unknown(const json& j, const std::string& path,
                           std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(join_path(path, it.key()) + ": unknown key");
  }
}

inline double number_at(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) throw ConfigError(join_path(path, key) + ": missing required number");
  const json& v = j.at(key);
  if (!v.is_number()) throw ConfigError(join_path(path, key) + ": expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(join_path(path, key) + ": must be finite");
  return d;
}

inline double number_or(const json& j, const std::string& key, const std::string& path, double def) {
  return j.contains(key) ? number_at(j, key, path) : def;
}

inline std::optional<double> optional_number(const json& j, const std::string& key,
                                             const std::string& path) {
  if (!j.contains(key)) return std::nullopt;
  return number_at(j, key, path);
}

inline long integer_or(const json& j, const std::string& key, const std::string& path, long def) {
  if (!j.contains(key)) return def;
  const json& v = j.at(key);
  if (!v.is_number_integer()) throw ConfigError(join_path(path, key) + ": expected an integer");
  return v.get<long>();
}

inline std::string string_or(const json& j, const std::string& key, const std::string& path,
                             const std::string& def) {
  if (!j.contains(key)) return def;
  if (!j.at(key).is_string()) throw ConfigError(join_path(path, key) + ": expected a string");
  return j.at(key).get<std::string>();
}

/// Either a bare number (constant) or {"mean": c0, "harmonics": [{"m", "cos", "sin"}]}.
inline PeriodicCoefficient parse_coefficient(const json& j, double period, const std::string& path) {
  if (j.is_number()) return PeriodicCoefficient::constant(period, j.get<double>());
  expect_object(j, path);
  reject_unknown(j, path, {"mean", "harmonics"});
  const double mean = number_at(j, "mean", path);
  std::vector<Harmonic> hs;
  if (j.contains("harmonics")) {
    const json& arr = j.at("harmonics");
    const std::string hp = join_path(path, "harmonics");
    if (!arr.is_array()) throw ConfigError(hp + ": expected an array");
    for (std::size_t k = 0; k < arr.size(); ++k) {
      const std::string ep = hp + "[" + std::to_string(k) + "]";
      const json& h = arr[k];
      expect_object(h, ep);
      reject_unknown(h, ep, {"m", "cos", "sin"});
      const long m = integer_or(h, "m", ep, 0);
      if (m < 1) throw ConfigError(join_path(ep, "m") + ": expected a positive integer");
      hs.push_back({static_cast<int>(m), number_or(h, "cos", ep, 0.0), number_or(h, "sin", ep, 0.0)});
    }
  }
  return PeriodicCoefficient(period, mean, std::move(hs));
}

inline ModelParams parse_model(const json& j, const std::string& path = "model") {
  expect_object(j, path);
  reject_unknown(j, path, {"beta0", "r", "tau", "T", "delta", "K", "gamma"});
  ModelParams p;
  p.beta0 = number_at(j, "beta0", path);
  p.hill_r = number_at(j, "r", path);
  p.tau = number_at(j, "tau", path);
  p.period = number_at(j, "T", path);
  if (!(p.period > 0.0)) throw ConfigError(join_path(path, "T") + ": must be positive");
  for (const char* k : {"delta", "K", "gamma"}) {
    if (!j.contains(k)) throw ConfigError(join_path(path, k) + ": missing coefficient");
  }
  p.delta = parse_coefficient(j.at("delta"), p.period, join_path(path, "delta"));
  p.K = parse_coefficient(j.at("K"), p.period, join_path(path, "K"));
  p.gamma = parse_coefficient(j.at("gamma"), p.period, join_path(path, "gamma"));
  return p;
}

/// Initial history on [-tau, 0]: a number or {"mean", "harmonics", "period"}.
struct PhiSpec {
  PeriodicCoefficient f;
  double operator()(double s) const { return f(s); }
};

inline PhiSpec parse_phi(const json& j, double default_period, const std::string& path) {
  if (j.is_number()) return {PeriodicCoefficient::constant(default_period, j.get<double>())};
  expect_object(j, path);
  reject_unknown(j, path, {"mean", "harmonics", "period"});
  const double period = number_or(j, "period", path, default_period);
  if (!(period > 0.0)) throw ConfigError(join_path(path, "period") + ": must be positive");
  json copy = j;
  copy.erase("period");
  return {parse_coefficient(copy, period, path)};
}

struct SimulateCfg {
  double Q0 = 0.0;
  PhiSpec phi;
  double t_end = 0.0;
  int m = 64;
  bool with_P = false;
};

struct OrbitCfg {
  std::size_t n = 0;
  double tol = 1e-10;
  std::string method = "collocation";
  int max_iters = 500;
};

struct SpectrumCfg {
  int k_max = 1024;
  int k_window = 64;
  std::optional<std::pair<double, double>> tau_window;
};

struct StabilityCfg {
  double eps_env = 0.01;
  int periods = 50;
  int m = 64;
  std::optional<double> Q0;
  std::optional<PhiSpec> phi;
};

struct PdeCfg {
  std::optional<double> da;
  std::optional<double> t_end;
  std::optional<double> Q0;
  std::optional<PhiSpec> phi;
  double profile_rate = 0.0;
};

struct SweepCfg {
  std::string parameter;
  std::vector<double> values;
  std::string command = "check";
};

struct Config {
  json model_json;
  ModelParams model;
  json simulate_json, orbit_json, spectrum_json, stability_json, pde_json;
  std::optional<SweepCfg> sweep;
};

inline SimulateCfg parse_simulate(const json& j, const ModelParams& p) {
  const std::string path = "simulate";
  expect_object(j, path);
  reject_unknown(j, path, {"Q0", "phi", "t_end", "m", "P"});
  SimulateCfg s;
  s.Q0 = number_at(j, "Q0", path);
  if (!j.contains("phi")) throw ConfigError("simulate.phi: missing initial history");
  s.phi = parse_phi(j.at("phi"), p.period, "simulate.phi");
  s.t_end = number_or(j, "t_end", path, 10.0 * p.period);
  s.m = static_cast<int>(integer_or(j, "m", path, 64));
  if (j.contains("P")) {
    if (!j.at("P").is_boolean()) throw ConfigError("simulate.P: expected a boolean");
    s.with_P = j.at("P").get<bool>();
  }
  return s;
}

inline OrbitCfg parse_orbit(const json& j) {
  const std::string path = "orbit";
  expect_object(j, path);
  reject_unknown(j, path, {"n", "tol", "method", "max_iters"});
  OrbitCfg o;
  const long n = integer_or(j, "n", path, 0);
  if (n < 0) throw ConfigError("orbit.n: must be nonnegative");
  o.n = static_cast<std::size_t>(n);
  o.tol = number_or(j, "tol", path, o.tol);
  o.method = string_or(j, "method", path, o.method);
  if (o.method != "collocation" && o.method != "poincare") {
    throw ConfigError("orbit.method: expected \"collocation\" or \"poincare\"");
  }
  o.max_iters = static_cast<int>(integer_or(j, "max_iters", path, o.max_iters));
  return o;
}

inline SpectrumCfg parse_spectrum(const json& j) {
  const std::string path = "spectrum";
  expect_object(j, path);
  reject_unknown(j, path, {"k_max", "k_window", "tau_window"});
  SpectrumCfg s;
  s.k_max = static_cast<int>(integer_or(j, "k_max", path, s.k_max));
  s.k_window = static_cast<int>(integer_or(j, "k_window", path, s.k_window));
  if (j.contains("tau_window")) {
    const json& w = j.at("tau_window");
    if (!w.is_array() || w.size() != 2 || !w[0].is_number() || !w[1].is_number()) {
      throw ConfigError("spectrum.tau_window: expected [lo, hi]");
    }
    s.tau_window = std::pair{w[0].get<double>(), w[1].get<double>()};
  }
  return s;
}

inline StabilityCfg parse_stability(const json& j, const ModelParams& p) {
  const std::string path = "stability";
  expect_object(j, path);
  reject_unknown(j, path, {"eps_env", "periods", "m", "Q0", "phi"});
  StabilityCfg s;
  s.eps_env = number_or(j, "eps_env", path, s.eps_env);
  s.periods = static_cast<int>(integer_or(j, "periods", path, s.periods));
  s.m = static_cast<int>(integer_or(j, "m", path, s.m));
  s.Q0 = optional_number(j, "Q0", path);
  if (j.contains("phi")) s.phi = parse_phi(j.at("phi"), p.period, "stability.phi");
  return s;
}

inline PdeCfg parse_pde(const json& j, const ModelParams& p) {
  const std::string path = "pde";
  expect_object(j, path);
  reject_unknown(j, path, {"da", "t_end", "Q0", "phi", "profile_rate"});
  PdeCfg s;
  s.da = optional_number(j, "da", path);
  s.t_end = optional_number(j, "t_end", path);
  s.Q0 = optional_number(j, "Q0", path);
  if (j.contains("phi")) s.phi = parse_phi(j.at("phi"), p.period, "pde.phi");
  s.profile_rate = number_or(j, "profile_rate", path, 0.0);
  return s;
}

/// Resolves a dotted path such as "tau" or "delta.harmonics.0.cos" inside
/// the model object; the leaf must be a number.
inline json* resolve_path(json& model, const std::string& dotted) {
  json* cur = &model;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (cur->is_object()) {
      if (!cur->contains(part)) return nullptr;
      cur = &(*cur)[part];
    } else if (cur->is_array()) {
      std::size_t idx = 0;
      try {
        std::size_t used = 0;
        idx = std::stoul(part, &used);
        if (used != part.size()) return nullptr;
      } catch (const std::exception&) {
        return nullptr;
      }
      if (idx >= cur->size()) return nullptr;
      cur = &(*cur)[idx];
    } else {
      return nullptr;
    }
  }
  return cur->is_number() ? cur : nullptr;
}

inline SweepCfg parse_sweep(const json& j, const json& model) {
  const std::string path = "sweep";
  expect_object(j, path);
  reject_unknown(j, path, {"parameter", "values", "command"});
  SweepCfg s;
  s.parameter = string_or(j, "parameter", path, "");
  if (s.parameter.empty()) throw ConfigError("sweep.parameter: missing parameter path");
  json probe = model;
  if (!resolve_path(probe, s.parameter)) {
    throw ConfigError("sweep.parameter: \"" + s.parameter + "\" does not address a numeric model field");
  }
  if (!j.contains("values") || !j.at("values").is_array()) throw ConfigError("sweep.values: expected an array");
  for (std::size_t k = 0; k < j.at("values").size(); ++k) {
    const json& v = j.at("values")[k];
    if (!v.is_number()) throw ConfigError("sweep.values[" + std::to_string(k) + "]: expected a number");
    s.values.push_back(v.get<double>());
  }
  s.command = string_or(j, "command", path, s.command);
  static const char* kNested[] = {"check", "simulate", "orbit", "spectrum", "stability"};
  bool ok = false;
  for (const char* c : kNested) ok = ok || s.command == c;
  if (!ok) throw ConfigError("sweep.command: unsupported nested command \"" + s.command + "\"");
  return s;
}

/// Validates the whole configuration (every block present) before any
/// computation. The root is either {"model": {...}, <blocks>} or a bare
/// model object.
inline Config parse_config(const json& root) {
  expect_object(root, "<root>");
  Config cfg;
  if (root.contains("model")) {
    reject_unknown(root, "", {"model", "simulate", "orbit", "spectrum", "stability", "pde", "sweep"});
    cfg.model_json = root.at("model");
  } else {
    cfg.model_json = root;
  }
  cfg.model = parse_model(cfg.model_json);
  auto grab = [&](const char* key, json& dst) {
    if (root.contains("model") && root.contains(key)) dst = root.at(key);
  };
  grab("simulate", cfg.simulate_json);
  grab("orbit", cfg.orbit_json);
  grab("spectrum", cfg.spectrum_json);
  grab("stability", cfg.stability_json);
  grab("pde", cfg.pde_json);
  if (!cfg.simulate_json.is_null()) parse_simulate(cfg.simulate_json, cfg.model);
  if (!cfg.orbit_json.is_null()) parse_orbit(cfg.orbit_json);
  if (!cfg.spectrum_json.is_null()) parse_spectrum(cfg.spectrum_json);
  if (!cfg.stability_json.is_null()) parse_stability(cfg.stability_json, cfg.model);
  if (!cfg.pde_json.is_null()) parse_pde(cfg.pde_json, cfg.model);
  if (root.contains("model") && root.contains("sweep")) cfg.sweep = parse_sweep(root.at("sweep"), cfg.model_json);
  return cfg;
}

inline json parse_json_text(const std::string& text, const std::string& name) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(name + ":" + std::to_string(line) + ":" + std::to_string(col) +
                      ": malformed JSON (" + e.what() + ")");
  }
}

inline Config load_config(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError(file + ": cannot open configuration file");
  std::stringstream ss;
  ss << in.rdbuf();
  const json root = parse_json_text(ss.str(), file);
  try {
    return parse_config(root);
  } catch (const ConfigError& e) {
    throw ConfigError(file + ": " + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(file + ": " + e.what());
  }
}

// ------------------------------------------------------------ commands

/// H0 violations surface as hypothesis failures at the CLI level.
inline DerivedCoefficients make_coefficients(const ModelParams& p) {
  try {
    return DerivedCoefficients(p);
  } catch (const DomainError& e) {
    throw HypothesisError(e.what());
  }
}

inline json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json hypothesis_json(const HypothesisReport& r) {
  json j;
  j["H0"] = r.H0;
  j["H1"] = r.H1;
  j["H2"] = r.H2;
  j["H3"] = r.H3;
  j["H3prime"] = r.H3prime;
  j["margins"] = {{"H0", num(r.margin_H0)},
                  {"H1", num(r.margin_H1)},
                  {"H2", num(r.margin_H2)},
                  {"H3", num(r.margin_H3)},
                  {"H3prime", num(r.margin_H3prime)}};
  if (!r.H0_message.empty()) j["H0_message"] = r.H0_message;
  return j;
}

inline void write_file(const std::string& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream f(path);
  if (!f) throw Error("cannot open output file " + path);
  body(f);
  if (!f) throw Error("failed writing output file " + path);
}

inline std::optional<Equilibrium> averaged_equilibrium(const ModelParams& p) {
  try {
    return equilibrium(p.averaged());
  } catch (const Error&) {
    return std::nullopt;
  }
}

inline json cmd_check(const Config& cfg) {
  json rep;
  rep["command"] = "check";
  const auto hr = check_hypotheses(cfg.model);
  json h = hypothesis_json(hr);
  for (auto it = h.begin(); it != h.end(); ++it) rep[it.key()] = it.value();
  if (hr.H0) {
    const DerivedCoefficients c(cfg.model);
    rep["derived"] = {{"h1_min", c.h1_min}, {"h1_max", c.h1_max}, {"h2_min", c.h2_min},
                      {"h2_max", c.h2_max}, {"delta_min", c.delta_min}, {"delta_max", c.delta_max},
                      {"alpha", num(c.alpha)}, {"alpha_max", num(c.alpha_max)}, {"B", c.B},
                      {"rbar", c.rbar}};
    if (cfg.model.is_constant()) {
      const auto w = tau_window(cfg.model);
      rep["tau_window"] = {{"tau_low", w.tau_low},
                           {"tau_high_existence", w.tau_high_existence},
                           {"tau_high_H3", num(w.tau_high_H3)},
                           {"contains_tau", w.contains(cfg.model.tau)}};
      try {
        const auto e = equilibrium(cfg.model);
        rep["equilibrium"] = {{"Q", e.Q}, {"u", e.u}};
      } catch (const NoEquilibriumError&) {
        rep["equilibrium"] = nullptr;
      }
    }
  }
  return rep;
}

inline json cmd_simulate(const Config& cfg, const std::string& out) {
  if (cfg.simulate_json.is_null()) throw ConfigError("simulate: configuration needs a \"simulate\" block");
  const auto s = parse_simulate(cfg.simulate_json, cfg.model);
  const auto c = make_coefficients(cfg.model);
  const Trajectory tr = simulate(c, s.Q0, s.phi, s.t_end, s.m);
  std::vector<double> P;
  if (s.with_P) P = recover_P(tr, cfg.model);
  double max_Q = 0.0;
  for (double q : tr.Q) max_Q = std::max(max_Q, q);
  json rep{{"command", "simulate"},
           {"steps", tr.size() - 1},
           {"h", tr.h},
           {"t_end", tr.times.back()},
           {"Q_end", tr.Q.back()},
           {"u_end", tr.u.back()},
           {"max_Q", max_Q},
           {"initial_mismatch", tr.initial_mismatch}};
  if (s.with_P) rep["P_end"] = P.back();
  if (!out.empty()) {
    write_file(out, [&](std::ostream& os) {
      if (s.with_P) {
        write_csv(os, {"t", "Q", "u", "P"}, {&tr.times, &tr.Q, &tr.u, &P});
      } else {
        write_csv(os, {"t", "Q", "u"}, {&tr.times, &tr.Q, &tr.u});
      }
    });
  }
  return rep;
}

inline json box_json(const AprioriBox& b) {
  return {{"eps", b.eps}, {"R", b.R}, {"C0", b.C0}, {"C1", b.C1}, {"C2", b.C2},
          {"f_eps", b.f_eps}, {"f_R", b.f_R}, {"sign_f_eps", b.sign_eps}, {"sign_f_R", b.sign_R}};
}

struct OrbitOutcome {
  json report;
  OrbitResult orbit;
  bool converged = false;
};

inline OrbitOutcome run_orbit(const Config& cfg) {
  const OrbitCfg o = cfg.orbit_json.is_null() ? OrbitCfg{} : parse_orbit(cfg.orbit_json);
  const auto c = make_coefficients(cfg.model);
  OrbitOutcome res;
  json& rep = res.report;
  rep["command"] = "orbit";
  rep["method"] = o.method;
  if (o.method == "collocation") {
    CollocationOptions co;
    co.n = o.n;
    co.tol = o.tol;
    res.orbit = find_orbit_collocation(c, co);
    rep["newton_iters"] = res.orbit.newton_iters;
  } else {
    PoincareOptions po;
    po.tol = o.tol;
    po.max_iters = o.max_iters;
    po.n = o.n;
    const auto pr = find_orbit_poincare(c, po);
    res.orbit = pr.orbit;
    rep["iterations"] = pr.iterations;
    rep["last_distance"] = num(pr.last_distance);
  }
  const auto& orb = res.orbit;
  res.converged = orb.converged;
  rep["converged"] = orb.converged;
  rep["residual"] = num(orb.residual);
  rep["u_residual"] = num(orb.u_residual);
  rep["n"] = orb.Q.size();
  rep["min_Q"] = orb.Q.min();
  rep["max_Q"] = orb.Q.max();
  rep["mean_Q"] = orb.Q.mean();
  rep["in_box"] = orb.in_box;
  rep["box"] = orb.box ? box_json(*orb.box) : json(nullptr);
  if (const auto e = averaged_equilibrium(cfg.model)) {
    double d = 0.0;
    for (std::size_t i = 0; i < orb.Q.size(); ++i) d = std::max(d, std::abs(orb.Q[i] - e->Q));
    rep["Qbar_averaged"] = e->Q;
    rep["sup_dev_Qbar"] = d;
  }
  return res;
}

inline json cmd_orbit(const Config& cfg, const std::string& out, bool& ok) {
  auto res = run_orbit(cfg);
  ok = res.converged;
  if (!out.empty()) {
    const auto& o = res.orbit;
    std::vector<double> t(o.Q.size()), q(o.Q.values().begin(), o.Q.values().end()),
        u(o.u.values().begin(), o.u.values().end());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = o.Q.node(i);
    write_file(out, [&](std::ostream& os) { write_csv(os, {"t", "Q", "u"}, {&t, &q, &u}); });
  }
  return res.report;
}

inline json cmd_spectrum(const Config& cfg, const std::string& out) {
  const SpectrumCfg s = cfg.spectrum_json.is_null() ? SpectrumCfg{} : parse_spectrum(cfg.spectrum_json);
  const bool averaged = !cfg.model.is_constant();
  const ModelParams p = averaged ? cfg.model.averaged() : cfg.model;
  make_coefficients(p);
  const auto win = s.tau_window.value_or(std::pair{0.0, 10.0 * p.tau});
  const auto r = resonance_report(p, s.k_window, win.first, win.second, s.k_max);
  json rep{{"command", "spectrum"},
           {"averaged", averaged},
           {"A", r.data.A},
           {"Bc", r.data.Bc},
           {"a", r.data.a},
           {"b", r.data.b},
           {"omega", r.data.omega},
           {"Qbar", r.data.Qbar},
           {"intersects_unit_circle", r.intersects_unit_circle},
           {"r_star", r.r_star ? json(*r.r_star) : json(nullptr)},
           {"eta", r.eta ? json(*r.eta) : json(nullptr)},
           {"nonresonance_margin", r.margin.margin},
           {"margin_k", r.margin.k_argmin},
           {"k_checked", r.margin.k_checked},
           {"tail_bound", r.margin.tail_bound}};
  json taus = json::array();
  for (const auto& d : r.degenerate) taus.push_back({{"tau", d.tau}, {"k", d.k}, {"l", d.l}});
  rep["degenerate_taus"] = taus;
  if (!out.empty()) {
    std::vector<double> t, k, l;
    for (const auto& d : r.degenerate) {
      t.push_back(d.tau);
      k.push_back(d.k);
      l.push_back(static_cast<double>(d.l));
    }
    write_file(out, [&](std::ostream& os) { write_csv(os, {"tau", "k", "l"}, {&t, &k, &l}); });
  }
  return rep;
}

inline ComparisonReport run_stability(const Config& cfg, const StabilityCfg& s,
                                      const DerivedCoefficients& c) {
  const auto env = envelope(c, s.eps_env);
  const double radius = basin_radius(c, env);
  const double Q0 = s.Q0.value_or(0.9 * radius);
  if (s.phi) return run_comparison(c, Q0, *s.phi, s.periods, s.m, s.eps_env);
  const double v = 0.9 * radius;
  (void)cfg;
  return run_comparison(c, Q0, [v](double) { return v; }, s.periods, s.m, s.eps_env);
}

inline json cmd_stability(const Config& cfg, const std::string& out) {
  const StabilityCfg s = cfg.stability_json.is_null() ? StabilityCfg{} : parse_stability(cfg.stability_json, cfg.model);
  const auto c = make_coefficients(cfg.model);
  const auto r = run_stability(cfg, s, c);
  json rep{{"command", "stability"},
           {"envelope", {{"delta_star", r.env.delta_star}, {"h1_star", r.env.h1_star},
                         {"h2_star", r.env.h2_star}, {"eps_env", r.env.eps_env}}},
           {"basin_radius", r.basin_radius_used},
           {"initial_norm", r.initial_norm},
           {"ordering_ok", r.ordering_ok},
           {"ordering_slack", r.ordering_slack},
           {"lyapunov_monotone", r.lyapunov_monotone},
           {"max_V_increase", r.max_V_increase},
           {"below_rbar", r.below_rbar},
           {"max_Q", r.max_Q},
           {"decay_ok", r.decay_ok},
           {"final_sup", r.final_sup},
           {"final_sup_env", r.final_sup_env},
           {"iss_slack", r.iss_slack}};
  if (!out.empty()) {
    write_file(out, [&](std::ostream& os) {
      write_csv(os, {"t", "Q", "u", "Q_env", "u_env"},
                {&r.traj.times, &r.traj.Q, &r.traj.u, &r.traj_env.Q, &r.traj_env.u});
    });
  }
  return rep;
}

inline json cmd_pde(const Config& cfg, const std::string& out) {
  const PdeCfg s = cfg.pde_json.is_null() ? PdeCfg{} : parse_pde(cfg.pde_json, cfg.model);
  const auto c = make_coefficients(cfg.model);
  const double da = s.da.value_or(c.tau() / 256.0);
  const double t_end = s.t_end.value_or(5.0 * c.period());
  double Q0 = 0.0;
  if (s.Q0) {
    Q0 = *s.Q0;
  } else if (const auto e = averaged_equilibrium(cfg.model)) {
    Q0 = e->Q;
  } else {
    Q0 = 0.5 * c.rbar;
  }
  ReductionCheck rc;
  if (s.phi) {
    rc = validate_reduction(c, Q0, *s.phi, t_end, da, s.profile_rate);
  } else {
    // history compatible with the difference equation at t = 0
    const double v = c.hill().j(Q0) / (1.0 - c.h2(0.0));
    rc = validate_reduction(c, Q0, [v](double) { return v; }, t_end, da, s.profile_rate);
  }
  json rep{{"command", "pde-compare"},
           {"da", da},
           {"t_end", t_end},
           {"max_rel_error", rc.max_rel_error},
           {"err_Q", rc.err_Q},
           {"err_u", rc.err_u},
           {"max_tail_fraction", rc.max_tail_fraction}};
  if (!out.empty()) {
    write_file(out, [&](std::ostream& os) {
      write_csv(os, {"t", "Q_pde", "u_pde", "Q", "u"}, {&rc.times, &rc.Q_pde, &rc.u_pde, &rc.Q_red, &rc.u_red});
    });
  }
  return rep;
}

// ---------------------------------------------------------------- sweep

inline std::vector<std::string> sweep_columns(const std::string& command) {
  std::vector<std::string> cols{"value", "status", "H0", "H1", "H2", "H3", "H3prime"};
  std::vector<std::string> extra;
  if (command == "check") {
    extra = {"margin_H1", "margin_H2", "margin_H3", "margin_H3prime", "tau_in_window"};
  } else if (command == "orbit") {
    extra = {"residual", "min_Q", "max_Q", "sup_dev_Qbar", "in_box", "converged"};
  } else if (command == "simulate") {
    extra = {"Q_end", "u_end", "max_Q"};
  } else if (command == "stability") {
    extra = {"ordering_ok", "decay_ok", "lyapunov_monotone", "below_rbar", "final_sup"};
  } else if (command == "spectrum") {
    extra = {"r_star", "nonresonance_margin", "n_degenerate"};
  }
  cols.insert(cols.end(), extra.begin(), extra.end());
  return cols;
}

inline std::string csv_cell(const json& v) {
  if (v.is_null()) return "";
  if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return format_double(v.get<double>());
  return v.get<std::string>();
}

inline std::string status_of(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config_error";
  if (dynamic_cast<const HypothesisError*>(&e)) return "hypothesis_error";
  if (dynamic_cast<const ConvergenceError*>(&e)) return "convergence_error";
  if (dynamic_cast<const SchemeError*>(&e)) return "scheme_error";
  if (dynamic_cast<const DomainError*>(&e)) return "domain_error";
  return "error";
}

inline std::map<std::string, json> sweep_row(const Config& base, const SweepCfg& sw, double value) {
  std::map<std::string, json> row;
  row["value"] = value;
  Config cfg = base;
  json* leaf = resolve_path(cfg.model_json, sw.parameter);
  *leaf = value;
  try {
    cfg.model = parse_model(cfg.model_json);
    const auto hr = check_hypotheses(cfg.model);
    row["H0"] = hr.H0;
    row["H1"] = hr.H1;
    row["H2"] = hr.H2;
    row["H3"] = hr.H3;
    row["H3prime"] = hr.H3prime;
    if (sw.command == "check") {
      row["margin_H1"] = num(hr.margin_H1);
      row["margin_H2"] = num(hr.margin_H2);
      row["margin_H3"] = num(hr.margin_H3);
      row["margin_H3prime"] = num(hr.margin_H3prime);
      if (hr.H0 && cfg.model.is_constant()) row["tau_in_window"] = tau_window(cfg.model).contains(cfg.model.tau);
    } else if (sw.command == "orbit") {
      const auto o = run_orbit(cfg);
      for (const char* k : {"residual", "min_Q", "max_Q", "sup_dev_Qbar", "in_box", "converged"}) {
        if (o.report.contains(k)) row[k] = o.report.at(k);
      }
      if (!o.converged) throw ConvergenceError("orbit did not converge");
    } else if (sw.command == "simulate") {
      const json r = cmd_simulate(cfg, "");
      for (const char* k : {"Q_end", "u_end", "max_Q"}) row[k] = r.at(k);
    } else if (sw.command == "stability") {
      const json r = cmd_stability(cfg, "");
      for (const char* k : {"ordering_ok", "decay_ok", "lyapunov_monotone", "below_rbar", "final_sup"}) row[k] = r.at(k);
    } else if (sw.command == "spectrum") {
      const json r = cmd_spectrum(cfg, "");
      row["r_star"] = r.at("r_star");
      row["nonresonance_margin"] = r.at("nonresonance_margin");
      row["n_degenerate"] = r.at("degenerate_taus").size();
    }
    row["status"] = "ok";
  } catch (const std::exception& e) {
    row["status"] = status_of(e);
  }
  return row;
}

inline json cmd_sweep(const Config& cfg, const std::string& out, std::ostream& stdout_csv) {
  if (!cfg.sweep) throw ConfigError("sweep: configuration needs a \"sweep\" block");
  const SweepCfg& sw = *cfg.sweep;
  const auto cols = sweep_columns(sw.command);
  std::vector<std::map<std::string, json>> rows;
  for (double v : sw.values) rows.push_back(sweep_row(cfg, sw, v));
  auto emit = [&](std::ostream& os) {
    for (std::size_t k = 0; k < cols.size(); ++k) os << (k ? "," : "") << cols[k];
    os << '\n';
    for (const auto& r : rows) {
      for (std::size_t k = 0; k < cols.size(); ++k) {
        const auto it = r.find(cols[k]);
        os << (k ? "," : "") << (it == r.end() ? std::string() : csv_cell(it->second));
      }
      os << '\n';
    }
  };
  std::size_t failed = 0;
  for (const auto& r : rows) failed += r.at("status") != "ok";
  json rep{{"command", "sweep"},
           {"parameter", sw.parameter},
           {"nested", sw.command},
           {"rows", rows.size()},
           {"failed", failed}};
  if (out.empty()) {
    emit(stdout_csv);
  } else {
    write_file(out, emit);
  }
  return rep;
}

// ------------------------------------------------------------------ run

/// Entry point. Exit codes: 0 success, 1 numerical failure, 2 hypotheses
/// exclude the computation, 64 malformed configuration or usage.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Numerical laboratory for a periodic delay model of stem-cell dynamics"};
  app.require_subcommand(1, 1);
  std::string config_path, out_path;
  const std::vector<std::pair<std::string, std::string>> subs{
      {"check", "Evaluate the standing hypotheses and closed-form quantities"},
      {"simulate", "Integrate the delay system and write t,Q,u[,P]"},
      {"orbit", "Compute a periodic solution (collocation or period map)"},
      {"spectrum", "Characteristic equation, resonance radius and degenerate delays"},
      {"stability", "Envelope comparison, Lyapunov functional and decay"},
      {"pde-compare", "Cross-check the reduced model against the age-structured PDE"},
      {"sweep", "Run a nested command over a list of parameter values"}};
  for (const auto& [name, desc] : subs) {
    auto* s = app.add_subcommand(name, desc);
    s->add_option("--config", config_path, "JSON configuration file")->required();
    s->add_option("--out", out_path, "Output CSV file");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfig;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();

  try {
    const Config cfg = load_config(config_path);
    json rep;
    int code = kOk;
    if (cmd == "check") {
      rep = cmd_check(cfg);
    } else if (cmd == "simulate") {
      rep = cmd_simulate(cfg, out_path);
    } else if (cmd == "orbit") {
      bool ok = false;
      rep = cmd_orbit(cfg, out_path, ok);
      if (!ok) code = kNumerical;
    } else if (cmd == "spectrum") {
      rep = cmd_spectrum(cfg, out_path);
    } else if (cmd == "stability") {
      rep = cmd_stability(cfg, out_path);
    } else if (cmd == "pde-compare") {
      rep = cmd_pde(cfg, out_path);
    } else if (cmd == "sweep") {
      std::ostringstream csv;
      rep = cmd_sweep(cfg, out_path, csv);
      out << csv.str();
      if (!out_path.empty()) out << rep.dump(2) << '\n';
      return code;
    }
    out << rep.dump(2) << '\n';
    return code;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kConfig;
  } catch (const HypothesisError& e) {
    err << "hypothesis failure: " << e.what() << '\n';
    return kHypothesis;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kNumerical;
  }
}

}  // namespace hsc::cli
