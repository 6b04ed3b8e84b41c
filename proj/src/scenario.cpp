#include "boltzstab/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "boltzstab/errors.hpp"

namespace boltzstab {

using nlohmann::json;

namespace {

const std::set<std::string> kCommands = {"relax", "stability", "sweep-eps", "propagation", "lab"};

/// Placeholder default marking a field the file must provide.
json required(const char* type) { return json{{"$required", type}}; }

bool is_required(const json& d) { return d.is_object() && d.contains("$required"); }

std::string type_name(const json& v) {
  if (v.is_number()) return "number";
  if (v.is_string()) return "string";
  if (v.is_boolean()) return "boolean";
  if (v.is_array()) return "array";
  if (v.is_object()) return "object";
  return "null";
}

void expect_type(const json& v, const std::string& type, const std::string& path) {
  if (type == "any" || type_name(v) == type) return;
  throw ParseError(path, "expected " + type + ", got " + type_name(v));
}

/// Fills defaults, rejects unknown keys, checks scalar types.
json resolve_block(const json& in, const json& defaults, const std::string& path) {
  if (!in.is_object()) throw ParseError(path, "expected object, got " + type_name(in));
  for (auto it = in.begin(); it != in.end(); ++it)
    if (!defaults.contains(it.key())) throw ParseError(path + "." + it.key(), "unknown field");
  json out = json::object();
  for (auto it = defaults.begin(); it != defaults.end(); ++it) {
    const std::string field = path + "." + it.key();
    const json& d = it.value();
    if (!in.contains(it.key())) {
      if (is_required(d)) throw ParseError(field, "missing required field");
      out[it.key()] = d;
      continue;
    }
    const json& v = in.at(it.key());
    if (is_required(d)) expect_type(v, d.at("$required").get<std::string>(), field);
    else if (!d.is_null()) expect_type(v, type_name(d), field);
    out[it.key()] = v;
  }
  return out;
}

json kernel_defaults() {
  return {{"dimension", 2},           {"variant", required("string")}, {"gamma", required("number")},
          {"nu", required("number")}, {"c_b", required("number")},     {"c_phi", required("number")},
          {"mollifier_scale", 1.0}};
}

json grid_defaults() { return {{"half_width", 8.0}, {"points", 48}}; }

json quadrature_defaults() {
  return {{"eps", 0.1},
          {"n_theta", 8},
          {"n_phi", 8},
          {"spacing", "geometric"},
          {"geometric_ratio", 0.0},
          {"diagonal_exclusion_radius", 0.0},
          {"interpolation_order", 3}};
}

json time_defaults() {
  return {{"dt", required("number")},   {"t_end", required("number")}, {"integrator", "rk4"},
          {"record_every", 1},          {"cfl_limit", 0.5},             {"clip_tolerance", 1e-6},
          {"entropy_slack", 1e-8}};
}

json initial_defaults() {
  return {{"shape", "maxwellian"},        {"rho", 1.0},       {"temperature", 1.0},
          {"separation", 1.5},            {"temperatures", json::array()},
          {"radius", 3.0},                {"power", 6},       {"center", json::array()}};
}

json perturbation_defaults() { return {{"shape", "tilt"}, {"amplitude", 0.05}}; }

json norms_defaults() {
  return {{"l1", {0.0, 2.0, 4.0}}, {"lp", {2.0}},           {"w11", json::array()},
          {"w21", json::array()},  {"grad_lp", json::array()}, {"entropy_production", true},
          {"coercivity", false}};
}

json resolve_initial(const json& in, const std::string& path) {
  json out = resolve_block(in, initial_defaults(), path);
  const std::string shape = out["shape"];
  static const std::set<std::string> shapes = {"maxwellian", "bimodal", "anisotropic", "bump"};
  if (!shapes.count(shape)) throw ParseError(path + ".shape", "unknown initial data '" + shape + "'");
  return out;
}

json resolve_perturbation(const json& in, const std::string& path) {
  json out = resolve_block(in, perturbation_defaults(), path);
  static const std::set<std::string> shapes = {"tilt", "cosine", "radial", "odd-cubic"};
  if (!shapes.count(out["shape"].get<std::string>()))
    throw ParseError(path + ".shape", "unknown perturbation '" + out["shape"].get<std::string>() + "'");
  return out;
}

json resolve_number_array(const json& in, const std::string& path) {
  expect_type(in, "array", path);
  for (std::size_t k = 0; k < in.size(); ++k)
    expect_type(in[k], "number", path + "[" + std::to_string(k) + "]");
  return in;
}

json resolve_relax(const json& in, const json& top) {
  (void)top;
  json d = {{"initial", required("any")}, {"norms", json::object()},
            {"conservation_tolerance", 1e-10}};
  json out = resolve_block(in, d, "scenario");
  json list = out["initial"].is_array() ? out["initial"] : json::array({out["initial"]});
  if (list.empty()) throw ParseError("scenario.initial", "needs at least one entry");
  for (std::size_t k = 0; k < list.size(); ++k)
    list[k] = resolve_initial(list[k], "scenario.initial[" + std::to_string(k) + "]");
  out["initial"] = list;
  out["norms"] = resolve_block(out["norms"], norms_defaults(), "scenario.norms");
  for (const char* key : {"l1", "lp", "w11", "w21", "grad_lp"})
    resolve_number_array(out["norms"][key], std::string("scenario.norms.") + key);
  return out;
}

json resolve_stability(const json& in, const json& top) {
  json d = {{"q", {2.0, 4.0}},
            {"rate_norms", json::object()},
            {"initial", required("object")},
            {"calibration", nullptr},
            {"cst_hat", nullptr},
            {"pairs", json::array()},
            {"half_dt", true},
            {"half_eps", true},
            {"slack", 1e-9}};
  json out = resolve_block(in, d, "scenario");
  resolve_number_array(out["q"], "scenario.q");
  out["rate_norms"] = resolve_block(out["rate_norms"], {{"p", 0.0}, {"p1", 0.0}, {"p2", 0.0}},
                                    "scenario.rate_norms");
  out["initial"] = resolve_initial(out["initial"], "scenario.initial");
  if (out["calibration"].is_null() && out["cst_hat"].is_null())
    throw ParseError("scenario", "needs either a calibration pair or frozen cst_hat values");
  if (!out["calibration"].is_null()) {
    out["calibration"] = resolve_block(out["calibration"], {{"perturbation", required("object")}},
                                       "scenario.calibration");
    out["calibration"]["perturbation"] =
        resolve_perturbation(out["calibration"]["perturbation"], "scenario.calibration.perturbation");
  }
  if (!out["cst_hat"].is_null()) {
    expect_type(out["cst_hat"], "object", "scenario.cst_hat");
    for (const auto& q : out["q"]) {
      const std::string key = format_number(q.get<double>());
      if (!out["cst_hat"].contains(key))
        throw ParseError("scenario.cst_hat", "missing value for q = " + key);
      expect_type(out["cst_hat"][key], "number", "scenario.cst_hat." + key);
    }
  }
  expect_type(out["pairs"], "array", "scenario.pairs");
  for (std::size_t k = 0; k < out["pairs"].size(); ++k) {
    const std::string path = "scenario.pairs[" + std::to_string(k) + "]";
    json p = resolve_block(out["pairs"][k],
                           {{"perturbation", required("object")}, {"kernel", json::object()},
                            {"dt", nullptr}},
                           path);
    p["perturbation"] = resolve_perturbation(p["perturbation"], path + ".perturbation");
    json k_in = top.at("kernel");
    expect_type(p["kernel"], "object", path + ".kernel");
    for (auto it = p["kernel"].begin(); it != p["kernel"].end(); ++it) k_in[it.key()] = it.value();
    p["kernel"] = resolve_block(k_in, kernel_defaults(), path + ".kernel");
    if (p["dt"].is_null()) p["dt"] = top.at("time").at("dt");
    expect_type(p["dt"], "number", path + ".dt");
    out["pairs"][k] = p;
  }
  return out;
}

json resolve_sweep(const json& in, const json&) {
  json d = {{"initial", required("object")},
            {"eps_list", {0.4, 0.2, 0.1, 0.05}},
            {"band", 3.0},
            {"l1_weights", {4.0}}};
  json out = resolve_block(in, d, "scenario");
  out["initial"] = resolve_initial(out["initial"], "scenario.initial");
  resolve_number_array(out["eps_list"], "scenario.eps_list");
  resolve_number_array(out["l1_weights"], "scenario.l1_weights");
  return out;
}

json resolve_propagation(const json& in, const json& top) {
  json d = {{"q", 4.0},
            {"p", 2.0},
            {"calibration", nullptr},
            {"validation", required("array")},
            {"checks", {"moment", "lp", "gradient"}},
            {"constants", json::object()},
            {"bound_tolerance", 1e-2},
            {"slack", 1e-9}};
  json out = resolve_block(in, d, "scenario");
  const double t_end = top.at("time").at("t_end");
  auto run_block = [&](const json& b, const std::string& path) {
    json r = resolve_block(b, {{"initial", required("object")}, {"t_end", t_end}}, path);
    r["initial"] = resolve_initial(r["initial"], path + ".initial");
    return r;
  };
  if (!out["calibration"].is_null()) out["calibration"] = run_block(out["calibration"], "scenario.calibration");
  for (std::size_t k = 0; k < out["validation"].size(); ++k)
    out["validation"][k] =
        run_block(out["validation"][k], "scenario.validation[" + std::to_string(k) + "]");
  expect_type(out["checks"], "array", "scenario.checks");
  static const std::set<std::string> checks = {"moment", "lp", "gradient"};
  for (const auto& c : out["checks"]) {
    expect_type(c, "string", "scenario.checks");
    if (!checks.count(c.get<std::string>()))
      throw ParseError("scenario.checks", "unknown check '" + c.get<std::string>() + "'");
  }
  out["constants"] = resolve_block(out["constants"],
                                   {{"moment", nullptr}, {"lp", nullptr}, {"gradient", nullptr}},
                                   "scenario.constants");
  for (const auto& c : out["checks"])
    if (out["constants"][c.get<std::string>()].is_null() && out["calibration"].is_null())
      throw ParseError("scenario", "check '" + c.get<std::string>() +
                                       "' has no frozen constant and no calibration run");
  return out;
}

json resolve_lab(const json& in, const json&) {
  json d = {{"calibration_samples", 20000},
            {"scoring_samples", 100000},
            {"seed_b", nullptr},
            {"slack", 1e-9},
            {"battery", "default"}};
  json out = resolve_block(in, d, "scenario");
  if (out["battery"] != "default") throw ParseError("scenario.battery", "only 'default' exists");
  return out;
}

json resolve(const json& in) {
  if (!in.is_object()) throw ParseError("top level", "expected object");
  json top_defaults = {{"version", required("string")},
                       {"command", required("string")},
                       {"seed", nullptr},
                       {"threads", 1},
                       {"output", "out"},
                       {"kernel", nullptr},
                       {"grid", json::object()},
                       {"quadrature", json::object()},
                       {"time", nullptr},
                       {"scenario", json::object()}};
  json out = resolve_block(in, top_defaults, "config");
  if (out["version"] != kScenarioVersion)
    throw ParseError("config.version", "unrecognized version '" + out["version"].get<std::string>() +
                                           "', expected " + kScenarioVersion);
  const std::string cmd = out["command"];
  if (!kCommands.count(cmd)) throw ParseError("config.command", "unknown command '" + cmd + "'");
  if (!out["seed"].is_null()) {
    if (!out["seed"].is_number_unsigned())
      throw ParseError("config.seed", "expected a nonnegative integer");
  }
  if (!out["threads"].is_number_integer() || out["threads"].get<int>() < 1)
    throw ParseError("config.threads", "expected a positive integer");

  if (cmd != "lab") {
    if (out["kernel"].is_null()) throw ParseError("config.kernel", "missing required field");
    if (out["time"].is_null()) throw ParseError("config.time", "missing required field");
  }
  if (!out["kernel"].is_null()) out["kernel"] = resolve_block(out["kernel"], kernel_defaults(), "kernel");
  out["grid"] = resolve_block(out["grid"], grid_defaults(), "grid");
  out["quadrature"] = resolve_block(out["quadrature"], quadrature_defaults(), "quadrature");
  if (!out["time"].is_null()) out["time"] = resolve_block(out["time"], time_defaults(), "time");

  if (cmd == "relax") out["scenario"] = resolve_relax(out["scenario"], out);
  else if (cmd == "stability") out["scenario"] = resolve_stability(out["scenario"], out);
  else if (cmd == "sweep-eps") out["scenario"] = resolve_sweep(out["scenario"], out);
  else if (cmd == "propagation") out["scenario"] = resolve_propagation(out["scenario"], out);
  else out["scenario"] = resolve_lab(out["scenario"], out);
  return out;
}

int line_of(const std::string& text, std::size_t byte) {
  int line = 1;
  for (std::size_t k = 0; k < std::min(byte, text.size()); ++k)
    if (text[k] == '\n') ++line;
  return line;
}

// Typed extraction with field paths in the error.
template <class T>
T get(const json& block, const char* key, const std::string& path) {
  try {
    return block.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(path + "." + key, e.what());
  }
}

std::string key_text(double x) {
  if (std::isinf(x)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

std::vector<double> doubles(const json& a) {
  std::vector<double> out;
  for (const auto& x : a) out.push_back(x.get<double>());
  return out;
}

Table series_table(const std::string& name, const TrajectoryReport& rep) {
  Table t;
  t.name = name;
  t.description = "time series; l1_s = ||f||_{L^1_s}, lp_p = ||f||_{L^p}, w11_s = ||f||_{W^{1,1}_s}, "
                   "w21_s = ||f||_{W^{2,1}_s}, grad_lp_p = ||grad f||_{L^p}, entropy = int f log f";
  const int n = rep.grid->dimension();
  t.columns = {"time", "step", "mass"};
  for (int a = 0; a < n; ++a) t.columns.push_back("momentum_" + std::to_string(a + 1));
  for (const char* c : {"energy", "entropy", "entropy_production", "distance_to_equilibrium"})
    t.columns.push_back(c);
  const NormRequest& nr = rep.norms;
  for (double w : nr.l1_weights) t.columns.push_back("l1_" + key_text(w));
  for (double p : nr.lp) t.columns.push_back("lp_" + key_text(p));
  for (double w : nr.w11_weights) t.columns.push_back("w11_" + key_text(w));
  for (double w : nr.w21_weights) t.columns.push_back("w21_" + key_text(w));
  for (double p : nr.grad_lp) t.columns.push_back("grad_lp_" + key_text(p));
  t.columns.push_back("coercivity");
  t.columns.push_back("clipped_mass");
  for (const Snapshot& s : rep.snapshots) {
    std::vector<std::string> row = {format_number(s.time), std::to_string(s.step),
                                    format_number(s.moments.mass)};
    for (int a = 0; a < n; ++a) row.push_back(format_number(s.moments.momentum(a)));
    row.push_back(format_number(s.moments.energy));
    row.push_back(format_number(s.entropy));
    row.push_back(format_number(s.entropy_production));
    row.push_back(format_number(s.distance_to_equilibrium));
    for (double w : nr.l1_weights) row.push_back(format_number(s.l1.at(w)));
    for (double p : nr.lp) row.push_back(format_number(s.lp.at(p)));
    for (double w : nr.w11_weights) row.push_back(format_number(s.w11.at(w)));
    for (double w : nr.w21_weights) row.push_back(format_number(s.w21.at(w)));
    for (double p : nr.grad_lp) row.push_back(format_number(s.grad_lp.at(p)));
    row.push_back(format_number(s.coercivity));
    row.push_back(format_number(s.clipped_mass));
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string pass_word(bool b) { return b ? "true" : "false"; }

Outcome run_relax(const Scenario& s) {
  const json& sc = s.resolved["scenario"];
  SimulationConfig cfg = simulation_of(s);
  const json& nb = sc["norms"];
  cfg.norms.l1_weights = doubles(nb["l1"]);
  cfg.norms.lp = doubles(nb["lp"]);
  cfg.norms.w11_weights = doubles(nb["w11"]);
  cfg.norms.w21_weights = doubles(nb["w21"]);
  cfg.norms.grad_lp = doubles(nb["grad_lp"]);
  cfg.norms.entropy_production = nb["entropy_production"];
  cfg.norms.coercivity = nb["coercivity"];
  merge(cfg.norms, NormRequest{{0.0, 2.0}, {}, {}, {}, {}, false, false});
  const double tol = sc["conservation_tolerance"];

  Outcome o;
  for (std::size_t k = 0; k < sc["initial"].size(); ++k) {
    const InitialData init = initial_of(sc["initial"][k]);
    const Distribution f0 = make_initial(cfg.grid, init);
    const TrajectoryReport rep = evolve(f0, cfg);
    const std::string tag = "relax_" + std::to_string(k);
    o.tables.push_back(series_table(tag, rep));
    std::ostringstream d1, d2;
    d1 << init.shape << ": max relative drift " << format_number(rep.max_drift) << " (limit "
       << format_number(tol) << ")";
    o.verdicts.push_back({tag + ".conservation", rep.max_drift < tol, d1.str()});
    d2 << init.shape << ": " << rep.entropy_rises << " steps above slack, worst relative rise "
       << format_number(rep.worst_entropy_rise);
    o.verdicts.push_back({tag + ".entropy_nonincreasing", rep.entropy_rises == 0, d2.str()});
    std::ostringstream n;
    n << tag << ": regime " << rep.regime << ", max dt*L " << format_number(rep.cfl)
      << ", clipped mass " << format_number(rep.total_clipped);
    o.notes.push_back(n.str());
  }
  return o;
}

struct PairRuns {
  TrajectoryReport f, g;
};

Outcome run_stability(const Scenario& s) {
  const json& sc = s.resolved["scenario"];
  const SimulationConfig base = simulation_of(s);
  const std::vector<double> qs = doubles(sc["q"]);
  for (double q : qs)
    if (q < 2.0) throw ConfigError("scenario.q: stability needs q >= 2, got " + format_number(q));
  RateNorms rn{sc["rate_norms"]["p"], sc["rate_norms"]["p1"], sc["rate_norms"]["p2"]};
  const InitialData init = initial_of(sc["initial"]);
  const Distribution f0 = make_initial(base.grid, init);
  const double slack = sc["slack"];

  std::map<std::string, TrajectoryReport> f_cache;
  auto run_pair = [&](const CollisionKernel& kernel, double dt, double eps,
                      const Perturbation& pert) {
    if (kernel.angular.nu >= 1.0) throw ConfigError("stability runs need nu < 1");
    SimulationConfig c = base;
    c.kernel = kernel;
    c.dt = dt;
    c.record_every = static_cast<int>(std::lround(base.record_every * base.dt / dt));
    c.record_every = std::max(1, c.record_every);
    c.quad.eps = eps;
    for (double q : qs) merge(c.norms, rate_requirements(kernel, q, rn));
    std::ostringstream key;
    key << to_string(kernel.kinetic.variant) << ' ' << kernel.kinetic.gamma << ' '
        << kernel.kinetic.c_phi << ' ' << kernel.kinetic.mollifier_scale << ' ' << kernel.angular.nu
        << ' ' << kernel.angular.c_b << ' ' << format_number(dt) << ' ' << format_number(eps);
    auto it = f_cache.find(key.str());
    if (it == f_cache.end()) it = f_cache.emplace(key.str(), evolve(f0, c)).first;
    const Distribution g0(base.grid, f0.values + make_perturbation(f0, pert));
    return PairRuns{it->second, evolve(g0, c)};
  };

  Outcome o;
  Table series{"stability", "||f - g||_{L^1_q} per pair; margin = log D(t) - log D(0) - C_s t",
               {"pair", "q", "variant", "time", "d_norm", "bound_margin"}, {}};
  Table summary{"stability_summary", "one row per pair, q and variant",
                {"pair", "q", "variant", "kernel", "dt", "eps", "d0", "measured_rate", "norm_sum",
                 "cst_hat", "c_s", "max_margin", "verdict"},
                {}};
  auto emit = [&](const std::string& pair, const std::string& variant, const CollisionKernel& k,
                  double dt, double eps, const StabilityReport& r) {
    for (std::size_t i = 0; i < r.times.size(); ++i)
      series.rows.push_back({pair, format_number(r.q), variant, format_number(r.times[i]),
                             format_number(r.d_norm[i]), format_number(r.bound_margin[i])});
    summary.rows.push_back({pair, format_number(r.q), variant, to_string(k.kinetic.variant) +
                            "(gamma=" + key_text(k.kinetic.gamma) + ",nu=" + key_text(k.angular.nu) + ")",
                            format_number(dt), format_number(eps), format_number(r.d_norm[0]),
                            format_number(r.measured_rate), format_number(r.norm_sum),
                            format_number(r.cst_hat), format_number(r.c_s),
                            format_number(r.max_margin), pass_word(r.verdict)});
  };

  std::map<double, double> cst;
  if (!sc["cst_hat"].is_null()) {
    for (double q : qs) {
      cst[q] = sc["cst_hat"][format_number(q)].get<double>();
      o.notes.push_back("cst_hat(q=" + format_number(q) + ") = " + format_number(cst[q]) + " (frozen in config)");
    }
  } else {
    const Perturbation pert = perturbation_of(sc["calibration"]["perturbation"]);
    const PairRuns runs = run_pair(base.kernel, base.dt, base.quad.eps, pert);
    for (double q : qs) {
      StabilityReport r = compare_runs(runs.f, runs.g, base.kernel, q, 0.0, rn, slack);
      cst[q] = calibrate_cst(r);
      r = compare_runs(runs.f, runs.g, base.kernel, q, cst[q], rn, slack);
      emit("calibration", "base", base.kernel, base.dt, base.quad.eps, r);
      o.notes.push_back("cst_hat(q=" + format_number(q) + ") = " + format_number(cst[q]) +
                        " calibrated on " + pert.shape + "/" + format_number(pert.amplitude) +
                        " (measured rate " + format_number(r.measured_rate) + ", norm sum " +
                        format_number(r.norm_sum) + ")");
    }
  }

  for (std::size_t j = 0; j < sc["pairs"].size(); ++j) {
    const json& pj = sc["pairs"][j];
    const CollisionKernel kernel = kernel_of(pj["kernel"]);
    const double dt = pj["dt"];
    const Perturbation pert = perturbation_of(pj["perturbation"]);
    const std::string tag = "pair_" + std::to_string(j);
    struct Variant {
      std::string name;
      double dt, eps;
    };
    std::vector<Variant> variants = {{"base", dt, base.quad.eps}};
    if (sc["half_dt"].get<bool>()) variants.push_back({"half_dt", 0.5 * dt, base.quad.eps});
    if (sc["half_eps"].get<bool>()) variants.push_back({"half_eps", dt, 0.5 * base.quad.eps});
    std::map<double, bool> base_verdict;
    for (const Variant& v : variants) {
      const PairRuns runs = run_pair(kernel, v.dt, v.eps, pert);
      for (double q : qs) {
        const StabilityReport r = compare_runs(runs.f, runs.g, kernel, q, cst[q], rn, slack);
        emit(tag, v.name, kernel, v.dt, v.eps, r);
        std::ostringstream d;
        d << pert.shape << "/" << format_number(pert.amplitude) << ", "
          << to_string(kernel.kinetic.variant) << " gamma=" << key_text(kernel.kinetic.gamma)
          << ", dt=" << format_number(v.dt) << ", eps=" << format_number(v.eps)
          << ": max margin " << format_number(r.max_margin) << ", C_s " << format_number(r.c_s)
          << ", measured rate " << format_number(r.measured_rate);
        const std::string name = tag + ".q" + key_text(q) + "." + v.name;
        if (v.name == "base") {
          base_verdict[q] = r.verdict;
          o.verdicts.push_back({name, r.verdict, d.str()});
        } else {
          d << ", verdict " << pass_word(r.verdict) << " vs base " << pass_word(base_verdict[q]);
          o.verdicts.push_back({name + "_unchanged", r.verdict == base_verdict[q], d.str()});
        }
      }
    }
  }
  o.tables.push_back(std::move(series));
  o.tables.push_back(std::move(summary));
  return o;
}

Outcome run_sweep(const Scenario& s) {
  const json& sc = s.resolved["scenario"];
  SimulationConfig cfg = simulation_of(s);
  merge(cfg.norms, NormRequest{doubles(sc["l1_weights"]), {}, {}, {}, {}, false, false});
  const Distribution f0 = make_initial(cfg.grid, initial_of(sc["initial"]));
  const GrazingTable t = grazing_sweep(f0, cfg, doubles(sc["eps_list"]), sc["band"]);

  Outcome o;
  Table rows{"sweep_eps", "final-time observables per eps; m1_grazing = m_1 of the part theta < eps",
             {"eps", "m1_grazing"}, {}};
  for (const auto& n : t.names) rows.columns.push_back(n);
  for (const GrazingRow& r : t.rows) {
    std::vector<std::string> row = {format_number(r.eps), format_number(r.m1_grazing)};
    for (const auto& n : t.names) row.push_back(format_number(r.observables.at(n)));
    rows.rows.push_back(std::move(row));
  }
  Table ratios{"sweep_eps_ratios",
               "ratio = (obs(eps_k) - obs(eps_k+1)) / (m1(eps_k) - m1(eps_k+1))",
               {"observable", "eps_from", "eps_to", "difference", "ratio"}, {}};
  for (const auto& n : t.names) {
    for (std::size_t k = 0; k < t.ratios.at(n).size(); ++k)
      ratios.rows.push_back({n, format_number(t.rows[k].eps), format_number(t.rows[k + 1].eps),
                             format_number(t.differences.at(n)[k]),
                             format_number(t.ratios.at(n)[k])});
    std::ostringstream d;
    d << "fitted factor " << format_number(t.fitted_factor.at(n)) << ", ratios";
    for (double r : t.ratios.at(n)) d << " " << format_number(r);
    d << ", band x" << format_number(sc["band"].get<double>());
    o.verdicts.push_back({"sweep." + n + ".ratio_stable", t.stable.at(n), d.str()});
    o.notes.push_back("sweep." + n + ": differences monotone " + pass_word(t.monotone.at(n)));
  }
  o.tables.push_back(std::move(rows));
  o.tables.push_back(std::move(ratios));
  return o;
}

Outcome run_propagation(const Scenario& s) {
  const json& sc = s.resolved["scenario"];
  SimulationConfig cfg = simulation_of(s);
  const double q = sc["q"], p = sc["p"];
  const double slack = sc["slack"];
  const double tol = sc["bound_tolerance"];
  std::set<std::string> checks;
  for (const auto& c : sc["checks"]) checks.insert(c.get<std::string>());
  cfg.norms.l1_weights = {0.0, 2.0, q};
  cfg.norms.lp = {p};
  cfg.norms.w11_weights = {q};
  cfg.norms.entropy_production = false;
  const CollisionKernel& k = cfg.kernel;

  Outcome o;
  o.notes.push_back("regime flag: " + regime_flag(k));

  // Applicability is decided before any run so that skipped checks are reported.
  std::map<std::string, std::string> skipped;
  if (checks.count("moment")) {
    try {
      moment_case(k.kinetic.gamma, q, p);
    } catch (const InapplicableError& e) {
      skipped["moment"] = e.what();
    }
  }
  if (checks.count("lp")) {
    const int n = k.dimension();
    if (k.kinetic.gamma > 0.0) skipped["lp"] = "the L^p estimate is stated for gamma <= 0";
    else if (!(p > n / (n + k.kinetic.gamma))) skipped["lp"] = "p must exceed N/(N+gamma)";
  }
  if (checks.count("gradient") && k.angular.nu >= 1.0) skipped["gradient"] = "needs nu < 1";
  for (const auto& [c, why] : skipped) o.notes.push_back("check " + c + " skipped: " + why);

  std::map<std::string, double> constant;
  for (const std::string& c : checks) {
    if (skipped.count(c)) continue;
    if (!sc["constants"][c].is_null()) {
      constant[c] = sc["constants"][c];
      o.notes.push_back(c + " constant = " + format_number(constant[c]) + " (frozen in config)");
    }
  }
  if (!sc["calibration"].is_null()) {
    SimulationConfig cc = cfg;
    cc.t_end = sc["calibration"]["t_end"];
    const InitialData init = initial_of(sc["calibration"]["initial"]);
    const TrajectoryReport rep = evolve(make_initial(cfg.grid, init), cc);
    o.tables.push_back(series_table("propagation_calibration", rep));
    for (const std::string& c : checks) {
      if (skipped.count(c) || constant.count(c)) continue;
      if (c == "moment") constant[c] = fit_moment(rep, q, k.kinetic.gamma, p);
      if (c == "lp") constant[c] = fit_lp_ode(rep, p);
      if (c == "gradient") constant[c] = fit_gradient(rep, q, p);
      o.notes.push_back(c + " constant = " + format_number(constant[c]) + " calibrated on " +
                        init.shape + " over [0, " + format_number(cc.t_end) + "]");
    }
  }

  Table summary{"propagation_summary", "one row per validation run and check",
                {"run", "initial", "check", "constant", "violations", "max_excess", "t_star",
                 "bounded", "holds"},
                {}};
  for (std::size_t j = 0; j < sc["validation"].size(); ++j) {
    SimulationConfig cv = cfg;
    cv.t_end = sc["validation"][j]["t_end"];
    const InitialData init = initial_of(sc["validation"][j]["initial"]);
    const TrajectoryReport rep = evolve(make_initial(cfg.grid, init), cv);
    const std::string tag = "validation_" + std::to_string(j);
    Table t = series_table("propagation_" + std::to_string(j), rep);
    const std::vector<double> times = rep.times();
    std::vector<std::vector<double>> extra;
    if (constant.count("moment")) {
      const MomentCheck m = moment_check(rep, q, k.kinetic.gamma, constant["moment"], p, tol, slack);
      t.columns.push_back("moment_envelope");
      extra.push_back(m.gronwall.envelope);
      std::ostringstream d;
      d << init.shape << " t_end=" << format_number(cv.t_end) << ": " << m.gronwall.violations
        << " violations, max excess " << format_number(m.gronwall.max_excess);
      if (k.kinetic.gamma > 0.0) {
        const std::vector<double> y = rep.series("l1", q);
        d << ", sup " << format_number(*std::max_element(y.begin(), y.end()))
          << " vs uniform bound " << format_number(m.uniform_bound);
      }
      o.verdicts.push_back({tag + ".moment", m.holds, d.str()});
      summary.rows.push_back({tag, init.shape, "moment", format_number(constant["moment"]),
                              std::to_string(m.gronwall.violations),
                              format_number(m.gronwall.max_excess), "", pass_word(m.bounded),
                              pass_word(m.holds)});
    }
    if (constant.count("lp")) {
      const LpOdeCheck c = lp_ode_check(rep, k, p, constant["lp"], kInfinity, slack);
      std::vector<double> env;
      const double a = c.constant * (std::isinf(p) ? 1.0 : 1.0 - 1.0 / p);
      const double y0 = rep.snapshots.front().lp.at(p);
      for (double tt : times) {
        const double e = y0 / (1.0 + y0) * std::exp(a * tt);
        env.push_back(e < 1.0 ? e / (1.0 - e) : kInfinity);
      }
      t.columns.push_back("lp_envelope");
      extra.push_back(env);
      std::ostringstream d;
      d << init.shape << " t_end=" << format_number(cv.t_end) << ": " << c.violations
        << " slope violations, max " << format_number(c.max_violation) << ", envelope "
        << pass_word(c.envelope_holds) << ", T* " << format_number(c.t_star);
      o.verdicts.push_back({tag + ".lp", c.holds, d.str()});
      summary.rows.push_back({tag, init.shape, "lp", format_number(constant["lp"]),
                              std::to_string(c.violations), format_number(c.max_violation),
                              format_number(c.t_star), "", pass_word(c.holds)});
    }
    if (constant.count("gradient")) {
      const GronwallCheck g = gradient_check(rep, k, q, p, constant["gradient"], slack);
      t.columns.push_back("gradient_envelope");
      extra.push_back(g.envelope);
      std::ostringstream d;
      d << init.shape << " t_end=" << format_number(cv.t_end) << ": " << g.violations
        << " violations, max excess " << format_number(g.max_excess);
      o.verdicts.push_back({tag + ".gradient", g.holds, d.str()});
      summary.rows.push_back({tag, init.shape, "gradient", format_number(constant["gradient"]),
                              std::to_string(g.violations), format_number(g.max_excess), "", "",
                              pass_word(g.holds)});
    }
    for (std::size_t r = 0; r < t.rows.size(); ++r)
      for (const auto& col : extra) t.rows[r].push_back(format_number(col[r]));
    o.tables.push_back(std::move(t));
  }
  o.tables.push_back(std::move(summary));
  return o;
}

Outcome run_lab(const Scenario& s) {
  const json& sc = s.resolved["scenario"];
  if (s.resolved["seed"].is_null()) throw ConfigError("config.seed: the lab draws samples and needs a seed");
  const std::uint64_t seed_a = s.resolved["seed"].get<std::uint64_t>();
  const std::uint64_t seed_b =
      sc["seed_b"].is_null() ? seed_a + 1 : sc["seed_b"].get<std::uint64_t>();
  const std::size_t n_a = sc["calibration_samples"], n_b = sc["scoring_samples"];
  const double slack = sc["slack"];

  Outcome o;
  Table t{"lab", "one row per (check, q, N, gamma, nu); fitted on seed_a, scored on seed_b",
          {"check", "q", "N", "variant", "gamma", "nu", "fitted", "sample_extreme", "bounded",
           "vacuous", "samples", "violations", "max_ratio", "worst_excess", "seed_a", "seed_b"},
          {}};
  // Only the cos expansion depends on gamma; the other checks are shared across variants.
  std::map<std::string, LabRow> memo;
  for (const LabCase& c : default_battery()) {
    std::ostringstream key;
    key << to_string(c.check) << ' ' << c.q << ' ' << c.kernel.dimension() << ' '
        << c.kernel.angular.nu;
    if (c.check == LabCheck::CosExpansion) key << ' ' << c.kernel.kinetic.gamma;
    auto it = memo.find(key.str());
    if (it == memo.end()) it = memo.emplace(key.str(), run_lab_case(c, n_a, seed_a, n_b, seed_b, slack)).first;
    const LabRow& r = it->second;
    t.rows.push_back({to_string(c.check), format_number(c.q), std::to_string(c.kernel.dimension()),
                      to_string(c.kernel.kinetic.variant), format_number(c.kernel.kinetic.gamma),
                      format_number(c.kernel.angular.nu), format_number(r.fitted.value),
                      format_number(r.fitted.sample_extreme), r.fitted.bounded ? "1" : "0",
                      std::to_string(r.fitted.vacuous), std::to_string(r.tally.samples),
                      std::to_string(r.tally.violations), format_number(r.tally.max_ratio),
                      format_number(r.tally.worst_excess), std::to_string(seed_a),
                      std::to_string(seed_b)});
    std::ostringstream name, d;
    name << "lab." << to_string(c.check) << ".q" << key_text(c.q) << ".N" << c.kernel.dimension()
         << "." << to_string(c.kernel.kinetic.variant) << ".gamma" << key_text(c.kernel.kinetic.gamma)
         << ".nu" << key_text(c.kernel.angular.nu);
    d << r.tally.violations << "/" << r.tally.samples << " violations, fitted "
      << format_number(r.fitted.value) << ", worst relative excess "
      << format_number(r.tally.worst_excess);
    if (!r.fitted.bounded) d << "; calibration ascent still rising, no finite constant";
    o.verdicts.push_back({name.str(), r.tally.violations == 0 && r.fitted.bounded, d.str()});
  }
  o.notes.push_back("seed_a = " + std::to_string(seed_a) + ", seed_b = " + std::to_string(seed_b));
  o.tables.push_back(std::move(t));
  return o;
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& source) {
  json raw;
  try {
    raw = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source + " line " + std::to_string(line_of(text, e.byte)), e.what());
  }
  Scenario s;
  s.source = source;
  s.resolved = resolve(raw);
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), "cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path.string());
}

Scenario apply(const Scenario& s, const Overrides& o) {
  json raw = s.resolved;
  if (o.command && *o.command != raw["command"].get<std::string>())
    throw ParseError("config.command", "file is a '" + raw["command"].get<std::string>() +
                                           "' scenario, not '" + *o.command + "'");
  if (o.threads) raw["threads"] = *o.threads;
  if (o.seed) raw["seed"] = *o.seed;
  if (o.output) raw["output"] = *o.output;
  Scenario out;
  out.source = s.source;
  out.resolved = resolve(raw);
  return out;
}

CollisionKernel kernel_of(const json& b) {
  CollisionKernel k;
  k.angular.dimension = get<int>(b, "dimension", "kernel");
  k.angular.nu = get<double>(b, "nu", "kernel");
  k.angular.c_b = get<double>(b, "c_b", "kernel");
  try {
    k.kinetic.variant = parse_kinetic_variant(get<std::string>(b, "variant", "kernel"));
  } catch (const ConfigError& e) {
    throw ParseError("kernel.variant", e.what());
  }
  k.kinetic.gamma = get<double>(b, "gamma", "kernel");
  k.kinetic.c_phi = get<double>(b, "c_phi", "kernel");
  k.kinetic.mollifier_scale = get<double>(b, "mollifier_scale", "kernel");
  return k;
}

GridPtr grid_of(const json& b, int dimension) {
  return make_grid(dimension, get<double>(b, "half_width", "grid"), get<int>(b, "points", "grid"));
}

QuadratureSpec quadrature_of(const json& b) {
  QuadratureSpec q;
  q.eps = get<double>(b, "eps", "quadrature");
  q.n_theta = get<int>(b, "n_theta", "quadrature");
  q.n_phi = get<int>(b, "n_phi", "quadrature");
  const std::string sp = get<std::string>(b, "spacing", "quadrature");
  if (sp == "geometric") q.theta_spacing = ThetaSpacing::Geometric;
  else if (sp == "uniform") q.theta_spacing = ThetaSpacing::Uniform;
  else throw ParseError("quadrature.spacing", "expected 'geometric' or 'uniform'");
  q.geometric_ratio = get<double>(b, "geometric_ratio", "quadrature");
  q.diagonal_exclusion_radius = get<double>(b, "diagonal_exclusion_radius", "quadrature");
  q.interpolation_order = get<int>(b, "interpolation_order", "quadrature");
  return q;
}

InitialData initial_of(const json& b) {
  InitialData d;
  d.shape = get<std::string>(b, "shape", "initial");
  d.rho = get<double>(b, "rho", "initial");
  d.temperature = get<double>(b, "temperature", "initial");
  d.separation = get<double>(b, "separation", "initial");
  d.temperatures = get<std::vector<double>>(b, "temperatures", "initial");
  d.radius = get<double>(b, "radius", "initial");
  d.power = get<int>(b, "power", "initial");
  d.center = get<std::vector<double>>(b, "center", "initial");
  return d;
}

Perturbation perturbation_of(const json& b) {
  Perturbation p;
  p.shape = get<std::string>(b, "shape", "perturbation");
  p.amplitude = get<double>(b, "amplitude", "perturbation");
  return p;
}

SimulationConfig simulation_of(const Scenario& s) {
  const json& r = s.resolved;
  SimulationConfig c;
  c.kernel = kernel_of(r["kernel"]);
  c.grid = grid_of(r["grid"], c.kernel.dimension());
  c.quad = quadrature_of(r["quadrature"]);
  const json& t = r["time"];
  c.dt = get<double>(t, "dt", "time");
  c.t_end = get<double>(t, "t_end", "time");
  c.integrator = parse_integrator(get<std::string>(t, "integrator", "time"));
  c.record_every = get<int>(t, "record_every", "time");
  c.cfl_limit = get<double>(t, "cfl_limit", "time");
  c.clip_tolerance = get<double>(t, "clip_tolerance", "time");
  c.entropy_slack = get<double>(t, "entropy_slack", "time");
  c.threads = r["threads"];
  c.norms = NormRequest{};
  return c;
}

std::vector<Diagnostic> validate_scenario(const Scenario& s) {
  std::vector<Diagnostic> out;
  const json& r = s.resolved;
  const std::string cmd = s.command();
  auto guard = [&](const std::string& field, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      out.push_back({field, e.what()});
    }
  };
  if (cmd == "lab") {
    if (r["seed"].is_null()) out.push_back({"config.seed", "the lab draws samples and needs a seed"});
    return out;
  }
  CollisionKernel k;
  bool kernel_ok = true;
  guard("kernel", [&] {
    k = kernel_of(r["kernel"]);
    validate(k);
  });
  if (!out.empty()) kernel_ok = false;
  guard("grid", [&] { grid_of(r["grid"], kernel_ok ? k.dimension() : 2); });
  if (kernel_ok) {
    guard("quadrature", [&] { validate(quadrature_of(r["quadrature"]), k); });
    guard("time", [&] {
      SimulationConfig c = simulation_of(s);
      validate(c);
    });
    if (k.angular.nu >= 1.0)
      out.push_back({"kernel.nu", "time evolution is restricted to nu < 1, got nu = " +
                                      format_number(k.angular.nu)});
  }
  const json& sc = r["scenario"];
  if (cmd == "stability" && kernel_ok) {
    RateNorms rn{sc["rate_norms"]["p"], sc["rate_norms"]["p1"], sc["rate_norms"]["p2"]};
    for (const auto& qj : sc["q"]) {
      const double q = qj.get<double>();
      if (q < 2.0) {
        out.push_back({"scenario.q", "stability needs q >= 2, got q = " + format_number(q)});
        continue;
      }
      if (k.angular.nu < 1.0) guard("scenario.rate_norms", [&] { rate_requirements(k, q, rn); });
    }
    for (std::size_t j = 0; j < sc["pairs"].size(); ++j)
      guard("scenario.pairs[" + std::to_string(j) + "].kernel", [&] {
        const CollisionKernel pk = kernel_of(sc["pairs"][j]["kernel"]);
        validate(pk);
        if (pk.angular.nu >= 1.0) throw ConfigError("time evolution is restricted to nu < 1");
        for (const auto& qj : sc["q"])
          if (qj.get<double>() >= 2.0) rate_requirements(pk, qj.get<double>(), rn);
      });
  }
  if (cmd == "propagation" && kernel_ok) {
    const double q = sc["q"], p = sc["p"];
    for (const auto& c : sc["checks"]) {
      const std::string name = c;
      if (name == "moment") guard("scenario.q", [&] { moment_case(k.kinetic.gamma, q, p); });
      if (name == "lp" && k.kinetic.gamma <= 0.0) {
        const int n = k.dimension();
        if (!(p > n / (n + k.kinetic.gamma)))
          out.push_back({"scenario.p", "the L^p estimate needs p > N/(N+gamma) = " +
                                           format_number(n / (n + k.kinetic.gamma))});
      }
    }
  }
  if (cmd == "sweep-eps") {
    const auto eps = doubles(sc["eps_list"]);
    for (std::size_t j = 0; j + 1 < eps.size(); ++j)
      if (!(eps[j + 1] < eps[j])) out.push_back({"scenario.eps_list", "must be decreasing"});
    if (eps.size() < 2) out.push_back({"scenario.eps_list", "needs at least two values"});
  }
  return out;
}

bool Outcome::all_passed() const {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.passed; });
}

Outcome run_scenario(const Scenario& s) {
  const std::vector<Diagnostic> diags = validate_scenario(s);
  if (!diags.empty()) throw ConfigError(diags.front().field + ": " + diags.front().message);
  const std::string cmd = s.command();
  Outcome o;
  if (cmd == "relax") o = run_relax(s);
  else if (cmd == "stability") o = run_stability(s);
  else if (cmd == "sweep-eps") o = run_sweep(s);
  else if (cmd == "propagation") o = run_propagation(s);
  else o = run_lab(s);
  o.command = cmd;
  o.manifest = s.resolved;
  return o;
}

std::string format_number(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string csv_text(const Table& t) {
  std::ostringstream os;
  os << "# " << t.name << ": " << t.description << "\n";
  for (std::size_t k = 0; k < t.columns.size(); ++k) os << (k ? "," : "") << t.columns[k];
  os << "\n";
  for (const auto& row : t.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) os << (k ? "," : "") << row[k];
    os << "\n";
  }
  return os.str();
}

std::string verdict_text(const Outcome& o) {
  std::ostringstream os;
  os << "command: " << o.command << "\n";
  os << "status: " << (o.all_passed() ? "all verdicts true" : "verdict failure") << "\n";
  os << "verdicts on the discrete system:\n";
  for (const auto& v : o.verdicts)
    os << (v.passed ? "  PASS " : "  FAIL ") << v.name << "  " << v.detail << "\n";
  if (!o.notes.empty()) {
    os << "notes:\n";
    for (const auto& n : o.notes) os << "  " << n << "\n";
  }
  if (o.manifest.contains("seed")) os << "seed: " << o.manifest["seed"].dump() << "\n";
  return os.str();
}

void write_outcome(const Outcome& o, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const Table& t : o.tables) {
    std::ofstream f(dir / (t.name + ".csv"));
    f << csv_text(t);
  }
  std::ofstream(dir / "verdicts.txt") << verdict_text(o);
  std::ofstream(dir / "manifest.json") << o.manifest.dump(2) << "\n";
}

}  // namespace boltzstab
