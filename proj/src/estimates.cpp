#include "boltzstab/estimates.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "boltzstab/errors.hpp"
#include "boltzstab/quadrature.hpp"

namespace boltzstab {

namespace {

void add_unique(std::vector<double>& into, const std::vector<double>& from) {
  for (double x : from)
    if (std::find(into.begin(), into.end(), x) == into.end()) into.push_back(x);
  std::sort(into.begin(), into.end());
}

double sup_of(const std::vector<double>& s) { return *std::max_element(s.begin(), s.end()); }

std::vector<double> cumulative_trapezoid(const std::vector<double>& t,
                                         const std::vector<double>& a) {
  std::vector<double> out(t.size(), 0.0);
  for (std::size_t k = 1; k < t.size(); ++k)
    out[k] = out[k - 1] + 0.5 * (t[k] - t[k - 1]) * (a[k] + a[k - 1]);
  return out;
}

void require_series_shape(const std::vector<double>& t, const std::vector<double>& y,
                          const std::vector<double>& a) {
  if (t.size() != y.size() || t.size() != a.size() || t.size() < 2)
    throw ConfigError("series lengths differ or fewer than two snapshots");
}

double sum_of(const Eigen::ArrayXd& a) {
  return pairwise_sum(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())));
}

/// Rows 1, v_1..v_N, |v|^2.
Eigen::ArrayXXd invariants(const VelocityGrid& grid) {
  const int n = grid.dimension();
  Eigen::ArrayXXd phi(grid.size(), n + 2);
  phi.col(0).setOnes();
  for (int a = 0; a < n; ++a) phi.col(a + 1) = grid.component(a);
  phi.col(n + 1) = grid.speed_squared();
  return phi;
}

Eigen::VectorXd invariant_moments(const Eigen::ArrayXXd& phi, const Eigen::ArrayXd& f,
                                  double cell) {
  Eigen::VectorXd m(phi.cols());
  for (Eigen::Index j = 0; j < phi.cols(); ++j) m(j) = sum_of(phi.col(j) * f) * cell;
  return m;
}

/**
 * Clips negative values, then multiplies by 1 + c . phi so that the invariant moments
 * return to their pre-clip values. The factor stays positive for the tiny c involved.
 */
void clip(const VelocityGrid& grid, Eigen::ArrayXd& v, double& clipped) {
  const double cell = grid.cell_volume();
  const Eigen::ArrayXd neg = v.min(0.0);
  clipped = -sum_of(neg) * cell;
  if (clipped == 0.0) return;
  const Eigen::ArrayXXd phi = invariants(grid);
  const Eigen::VectorXd target = invariant_moments(phi, v, cell);
  v = v.max(0.0);
  const Eigen::Index k = phi.cols();
  Eigen::MatrixXd gram(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = i; j < k; ++j)
      gram(i, j) = gram(j, i) = sum_of(phi.col(i) * phi.col(j) * v) * cell;
  const Eigen::VectorXd c = gram.ldlt().solve(target - invariant_moments(phi, v, cell));
  v *= 1.0 + (phi.matrix() * c).array();
  v = v.max(0.0);
}

}  // namespace

std::string to_string(Integrator i) { return i == Integrator::Euler ? "euler" : "rk4"; }

Integrator parse_integrator(const std::string& name) {
  if (name == "euler") return Integrator::Euler;
  if (name == "rk4") return Integrator::RK4;
  throw ConfigError("unknown integrator '" + name + "'");
}

void merge(NormRequest& into, const NormRequest& extra) {
  add_unique(into.l1_weights, extra.l1_weights);
  add_unique(into.lp, extra.lp);
  add_unique(into.w11_weights, extra.w11_weights);
  add_unique(into.w21_weights, extra.w21_weights);
  add_unique(into.grad_lp, extra.grad_lp);
  into.entropy_production = into.entropy_production || extra.entropy_production;
  into.coercivity = into.coercivity || extra.coercivity;
}

void validate(const SimulationConfig& cfg) {
  if (!cfg.grid) throw ConfigError("simulation has no grid");
  validate(cfg.kernel);
  validate(cfg.quad, cfg.kernel);
  if (cfg.kernel.dimension() != cfg.grid->dimension())
    throw ConfigError("kernel and grid dimensions differ");
  if (!(cfg.dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(cfg.t_end > 0.0)) throw ConfigError("t_end must be positive");
  const double steps = cfg.t_end / cfg.dt;
  if (std::abs(steps - std::round(steps)) > 1e-9 * steps)
    throw ConfigError("t_end must be a whole number of steps");
  if (cfg.record_every < 1) throw ConfigError("record_every must be >= 1");
  if (!(cfg.cfl_limit > 0.0)) throw ConfigError("cfl_limit must be positive");
}

std::string regime_flag(const CollisionKernel& k) {
  const double g = k.kinetic.gamma;
  if (g > 0.0) return "hard";
  if (g > -k.angular.nu) return "global-regime";
  return "local-regime";
}

std::vector<double> TrajectoryReport::times() const {
  std::vector<double> t;
  t.reserve(snapshots.size());
  for (const auto& s : snapshots) t.push_back(s.time);
  return t;
}

std::vector<double> TrajectoryReport::series(const std::string& family, double key) const {
  std::vector<double> out;
  out.reserve(snapshots.size());
  const std::map<std::string, double Snapshot::*> scalars{
      {"entropy", &Snapshot::entropy},
      {"entropy_production", &Snapshot::entropy_production},
      {"distance_to_equilibrium", &Snapshot::distance_to_equilibrium},
      {"coercivity", &Snapshot::coercivity},
      {"clipped_mass", &Snapshot::clipped_mass}};
  if (auto it = scalars.find(family); it != scalars.end()) {
    for (const auto& s : snapshots) out.push_back(s.*(it->second));
    return out;
  }
  for (const auto& s : snapshots) {
    const std::map<double, double>* m = nullptr;
    if (family == "l1") m = &s.l1;
    else if (family == "lp") m = &s.lp;
    else if (family == "w11") m = &s.w11;
    else if (family == "w21") m = &s.w21;
    else if (family == "grad_lp") m = &s.grad_lp;
    else throw ConfigError("unknown norm family '" + family + "'");
    auto it = m->find(key);
    if (it == m->end()) {
      std::ostringstream os;
      os << "norm series " << family << "(" << key << ") was not recorded";
      throw ConfigError(os.str());
    }
    out.push_back(it->second);
  }
  return out;
}

Distribution TrajectoryReport::state(std::size_t k) const {
  return Distribution(grid, states.at(k), snapshots.at(k).time);
}

double cfl_number(const CollisionOperator& op, const Distribution& f, double dt) {
  return dt * op.eval_loss_rate(f).maxCoeff();
}

StepResult step(const CollisionOperator& op, const Distribution& f, double dt,
                Integrator integrator) {
  const GridPtr& g = f.grid;
  StepResult out;
  Eigen::ArrayXd next;
  if (integrator == Integrator::Euler) {
    next = f.values + dt * op.eval_Q(f).values;
  } else {
    const Eigen::ArrayXd k1 = op.eval_Q(f).values;
    const Eigen::ArrayXd k2 = op.eval_Q(Distribution(g, f.values + 0.5 * dt * k1)).values;
    const Eigen::ArrayXd k3 = op.eval_Q(Distribution(g, f.values + 0.5 * dt * k2)).values;
    const Eigen::ArrayXd k4 = op.eval_Q(Distribution(g, f.values + dt * k3)).values;
    next = f.values + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  clip(*g, next, out.clipped_mass);
  out.f = Distribution(g, std::move(next), f.time + dt);
  return out;
}

StepResult step(const Distribution& f, const SimulationConfig& cfg) {
  validate(cfg);
  CollisionOperator op(cfg.kernel, cfg.grid, cfg.quad, cfg.threads);
  const double c = cfl_number(op, f, cfg.dt);
  if (!(c < cfg.cfl_limit)) {
    std::ostringstream os;
    os << "CFL breach: dt * max L = " << c << " >= " << cfg.cfl_limit;
    throw RunAbort(os.str());
  }
  return step(op, f, cfg.dt, cfg.integrator);
}

Snapshot observe(const CollisionOperator& op, const Distribution& f, const Distribution& eq,
                 const NormRequest& norms) {
  const VelocityGrid& grid = *f.grid;
  Snapshot s;
  s.time = f.time;
  s.moments = moments(f);
  s.entropy = entropy(f);
  if (norms.entropy_production) s.entropy_production = op.entropy_production(f).value;
  s.distance_to_equilibrium = lp_norm(grid, f.values - eq.values, 1.0);
  for (double w : norms.l1_weights) s.l1[w] = lp_norm(grid, f.values, 1.0, w);
  for (double p : norms.lp) s.lp[p] = lp_norm(grid, f.values, p);
  for (double w : norms.w11_weights) s.w11[w] = sobolev_norm(grid, f.values, 1, 1.0, w);
  for (double w : norms.w21_weights) s.w21[w] = sobolev_norm(grid, f.values, 2, 1.0, w);
  for (double p : norms.grad_lp) s.grad_lp[p] = gradient_lp_norm(grid, f.values, p);
  if (norms.coercivity)
    s.coercivity = coercivity_lower_bound(f, op.kernel().kinetic,
                                          op.quadrature().diagonal_exclusion_radius)
                       .c_hat;
  return s;
}

TrajectoryReport evolve(const Distribution& f0, const SimulationConfig& cfg) {
  validate(cfg);
  if (!f0.grid || !(*f0.grid == *cfg.grid)) throw ConfigError("initial data lives on another grid");
  if ((f0.values < 0.0).any()) throw ConfigError("initial data has negative values");
  const Moments m0 = moments(f0);
  if (!(m0.mass > 0.0)) throw ConfigError("initial data has no mass");

  CollisionOperator op(cfg.kernel, cfg.grid, cfg.quad, cfg.threads);
  const Distribution eq = matching_maxwellian(f0);
  TrajectoryReport rep;
  rep.grid = cfg.grid;
  rep.norms = cfg.norms;
  rep.regime = regime_flag(cfg.kernel);
  rep.dt = cfg.dt;
  for (double w : cfg.norms.l1_weights) rep.equilibrium_l1[w] = lp_norm(eq, 1.0, w);

  auto guard = [&](const Distribution& f) {
    const double c = cfl_number(op, f, cfg.dt);
    rep.cfl = std::max(rep.cfl, c);
    if (!(c < cfg.cfl_limit)) {
      std::ostringstream os;
      os << "CFL breach at t = " << f.time << ": dt * max L = " << c << " >= " << cfg.cfl_limit;
      throw RunAbort(os.str());
    }
  };

  Distribution f = f0;
  f.time = 0.0;
  guard(f);
  const long n_steps = std::lround(cfg.t_end / cfg.dt);
  rep.snapshots.push_back(observe(op, f, eq, cfg.norms));
  rep.states.push_back(f.values);
  rep.step_entropy.push_back(rep.snapshots.back().entropy);
  double peak = f.values.maxCoeff();
  double clipped_since = 0.0;

  for (long k = 1; k <= n_steps; ++k) {
    StepResult r = step(op, f, cfg.dt, cfg.integrator);
    f = std::move(r.f);
    f.time = static_cast<double>(k) * cfg.dt;
    clipped_since += r.clipped_mass;
    rep.total_clipped += r.clipped_mass;
    if (r.clipped_mass > cfg.clip_tolerance * m0.mass) {
      std::ostringstream os;
      os << "clipping abort at t = " << f.time << ": clipped mass " << r.clipped_mass;
      throw RunAbort(os.str());
    }
    const double h_prev = rep.step_entropy.back();
    const double h = entropy(f);
    const double rise = (h - h_prev) / std::max(std::abs(h_prev), 1e-300);
    rep.worst_entropy_rise = std::max(rep.worst_entropy_rise, rise);
    if (rise > cfg.entropy_slack) ++rep.entropy_rises;
    rep.step_entropy.push_back(h);

    const bool record = k % cfg.record_every == 0 || k == n_steps;
    const double top = f.values.maxCoeff();
    if (record || top > 1.1 * peak) {
      guard(f);
      peak = std::max(peak, top);
    }
    if (record) {
      Snapshot s = observe(op, f, eq, cfg.norms);
      s.step = static_cast<int>(k);
      s.clipped_mass = clipped_since;
      clipped_since = 0.0;
      rep.snapshots.push_back(std::move(s));
      rep.states.push_back(f.values);
    }
  }

  // Momentum drift is measured against sqrt(mass * energy), the natural momentum scale.
  const double p_scale = std::sqrt(m0.mass * std::max(m0.energy, 1e-300));
  for (const auto& s : rep.snapshots) {
    double d = std::abs(s.moments.mass - m0.mass) / m0.mass;
    d = std::max(d, std::abs(s.moments.energy - m0.energy) / std::max(m0.energy, 1e-300));
    d = std::max(d, (s.moments.momentum - m0.momentum).cwiseAbs().maxCoeff() / p_scale);
    rep.max_drift = std::max(rep.max_drift, d);
  }
  return rep;
}

NormRequest rate_requirements(const CollisionKernel& kernel, double q, const RateNorms& rn) {
  NormRequest r;
  r.l1_weights = {q};
  const double g = kernel.kinetic.gamma;
  const int n = kernel.dimension();
  if (kernel.angular.nu >= 1.0) {
    if (kernel.kinetic.variant == KineticVariant::PowerSoft)
      throw InapplicableError("strong singularity rate is not available for power-law soft kernels");
    if (q < 4.0) throw InapplicableError("1 <= nu < 2 needs q >= 4");
    r.w21_weights = {q + std::max(2.0 + g, 0.0)};
    return r;
  }
  if (q < 2.0) throw InapplicableError("stability needs q >= 2");
  r.w11_weights = {q + std::max(1.0 + g, 0.0)};
  if (kernel.kinetic.variant == KineticVariant::PowerSoft) {
    const double p_min = n / (n + g);
    if (g + 1.0 >= 0.0) {
      if (!(rn.p > p_min)) {
        std::ostringstream os;
        os << "power-law soft kernel needs p > N/(N+gamma) = " << p_min;
        throw ConfigError(os.str());
      }
      r.lp = {rn.p};
    } else {
      const double p2_min = n / (n + g + 1.0);
      if (!(rn.p1 > p_min) || !(rn.p2 > p2_min)) {
        std::ostringstream os;
        os << "gamma + 1 < 0 needs p1 > " << p_min << " and p2 > " << p2_min;
        throw ConfigError(os.str());
      }
      r.lp = {rn.p1};
      r.grad_lp = {rn.p2};
    }
  }
  return r;
}

double rate_norm_sum(const TrajectoryReport& f, const TrajectoryReport& g,
                     const CollisionKernel& kernel, double q, const RateNorms& rn) {
  const NormRequest need = rate_requirements(kernel, q, rn);
  double total = 0.0;
  for (const TrajectoryReport* r : {&f, &g}) {
    for (double w : need.w11_weights) total += sup_of(r->series("w11", w));
    for (double w : need.w21_weights) total += sup_of(r->series("w21", w));
    for (double p : need.lp) total += sup_of(r->series("lp", p));
    for (double p : need.grad_lp) total += sup_of(r->series("grad_lp", p));
  }
  return total;
}

double compute_Cs(const TrajectoryReport& f, const TrajectoryReport& g,
                  const CollisionKernel& kernel, double q, double cst_hat, const RateNorms& rn) {
  return cst_hat * rate_norm_sum(f, g, kernel, q, rn);
}

StabilityReport compare_runs(const TrajectoryReport& f, const TrajectoryReport& g,
                             const CollisionKernel& kernel, double q, double cst_hat,
                             const RateNorms& rn, double slack) {
  if (!f.grid || !g.grid || !(*f.grid == *g.grid)) throw ConfigError("runs live on different grids");
  if (f.snapshots.size() != g.snapshots.size() || f.states.size() != f.snapshots.size() ||
      g.states.size() != g.snapshots.size() || f.snapshots.size() < 2)
    throw ConfigError("runs were recorded on different schedules");
  StabilityReport r;
  r.q = q;
  r.cst_hat = cst_hat;
  r.slack = slack;
  r.norm_sum = rate_norm_sum(f, g, kernel, q, rn);
  r.c_s = cst_hat * r.norm_sum;
  r.times = f.times();
  const std::size_t m = r.times.size();
  r.d_norm.resize(m);
  for (std::size_t k = 0; k < m; ++k) {
    if (std::abs(r.times[k] - g.snapshots[k].time) > 1e-12)
      throw ConfigError("runs were recorded at different times");
    r.d_norm[k] = lp_norm(*f.grid, f.states[k] - g.states[k], 1.0, q);
  }
  r.bound_margin.assign(m, 0.0);
  const double d0 = r.d_norm[0];
  if (d0 == 0.0) {
    r.degenerate = true;
    r.measured_rate = 0.0;
    r.max_margin = 0.0;
    for (double d : r.d_norm)
      if (d != 0.0) r.max_margin = kInfinity;
    r.verdict = r.max_margin <= slack;
    return r;
  }
  r.measured_rate = -kInfinity;
  r.max_margin = -kInfinity;
  for (std::size_t k = 0; k < m; ++k) {
    const double growth = std::log(r.d_norm[k] / d0);
    r.bound_margin[k] = growth - r.c_s * r.times[k];
    r.max_margin = std::max(r.max_margin, r.bound_margin[k]);
    if (r.times[k] > 0.0) r.measured_rate = std::max(r.measured_rate, growth / r.times[k]);
  }
  r.verdict = r.max_margin <= slack;
  return r;
}

StabilityReport stability_run(const Distribution& f0, const Distribution& g0,
                              const SimulationConfig& cfg, double q, double cst_hat,
                              const RateNorms& rn, double slack) {
  if (!f0.grid || !g0.grid || !(*f0.grid == *g0.grid)) throw ConfigError("mismatched grids");
  if (cfg.kernel.angular.nu >= 1.0)
    throw InapplicableError("stability runs need nu < 1");
  SimulationConfig c = cfg;
  merge(c.norms, rate_requirements(cfg.kernel, q, rn));
  const TrajectoryReport rf = evolve(f0, c);
  const TrajectoryReport rg = evolve(g0, c);
  return compare_runs(rf, rg, cfg.kernel, q, cst_hat, rn, slack);
}

double calibrate_cst(const StabilityReport& r) {
  if (r.degenerate || !(r.norm_sum > 0.0)) return 0.0;
  return std::max(r.measured_rate, 0.0) / r.norm_sum;
}

double fit_gronwall(const std::vector<double>& t, const std::vector<double>& y,
                    const std::vector<double>& a) {
  require_series_shape(t, y, a);
  const std::vector<double> area = cumulative_trapezoid(t, a);
  double c = 0.0;
  for (std::size_t k = 1; k < t.size(); ++k)
    if (area[k] > 0.0 && y[0] > 0.0) c = std::max(c, std::log(y[k] / y[0]) / area[k]);
  return c;
}

GronwallCheck check_gronwall(const std::vector<double>& t, const std::vector<double>& y,
                             const std::vector<double>& a, double c, double slack) {
  require_series_shape(t, y, a);
  const std::vector<double> area = cumulative_trapezoid(t, a);
  GronwallCheck out;
  out.constant = c;
  out.envelope.resize(t.size());
  out.max_excess = -kInfinity;
  for (std::size_t k = 0; k < t.size(); ++k) {
    out.envelope[k] = y[0] * std::exp(c * area[k]);
    const double excess = (y[k] - out.envelope[k]) / out.envelope[k];
    out.max_excess = std::max(out.max_excess, excess);
    if (!(excess <= slack)) ++out.violations;
  }
  out.holds = out.violations == 0;
  return out;
}

namespace {

double lp_factor(double p) { return std::isinf(p) ? 1.0 : 1.0 - 1.0 / p; }

struct Slopes {
  std::vector<double> slope, rhs;
};

Slopes lp_slopes(const std::vector<double>& t, const std::vector<double>& y, double p) {
  Slopes s;
  for (std::size_t k = 0; k + 1 < t.size(); ++k) {
    // lower end, so a passing slope test implies the integrated envelope
    const double low = std::min(y[k], y[k + 1]);
    s.slope.push_back((y[k + 1] - y[k]) / (t[k + 1] - t[k]));
    s.rhs.push_back(lp_factor(p) * (low + low * low));
  }
  return s;
}

void require_soft_lp(const CollisionKernel& kernel, double p) {
  const double g = kernel.kinetic.gamma;
  const int n = kernel.dimension();
  if (g > 0.0) throw InapplicableError("the L^p estimate is stated for gamma <= 0");
  if (!(p > n / (n + g))) {
    std::ostringstream os;
    os << "p must exceed N/(N+gamma) = " << n / (n + g);
    throw InapplicableError(os.str());
  }
}

}  // namespace

double fit_lp_ode(const TrajectoryReport& rep, double p) {
  const std::vector<double> t = rep.times();
  const std::vector<double> y = rep.series("lp", p);
  if (t.size() < 2) throw ConfigError("L^p check needs at least two snapshots");
  const Slopes s = lp_slopes(t, y, p);
  double c = 0.0;
  for (std::size_t k = 0; k < s.slope.size(); ++k)
    if (s.rhs[k] > 0.0) c = std::max(c, s.slope[k] / s.rhs[k]);
  return c;
}

LpOdeCheck lp_ode_check(const TrajectoryReport& rep, const CollisionKernel& kernel, double p,
                        double c_hat, double t_limit, double slack) {
  require_soft_lp(kernel, p);
  const std::vector<double> t = rep.times();
  const std::vector<double> y = rep.series("lp", p);
  if (t.size() < 2) throw ConfigError("L^p check needs at least two snapshots");
  LpOdeCheck out;
  out.p = p;
  out.constant = c_hat;
  const double a = c_hat * lp_factor(p);
  const double y0 = y[0];
  out.t_star = a > 0.0 ? std::log((1.0 + y0) / y0) / a : kInfinity;
  const Slopes s = lp_slopes(t, y, p);
  out.max_violation = -kInfinity;
  out.envelope_holds = true;
  const double kk = y0 / (1.0 + y0);
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] > t_limit * (1.0 + 1e-12)) break;
    out.t_checked = t[k];
    const double e = kk * std::exp(a * t[k]);
    const double env = e < 1.0 ? e / (1.0 - e) : kInfinity;
    if (!(y[k] <= env * (1.0 + slack))) out.envelope_holds = false;
    if (k + 1 < t.size() && t[k + 1] <= t_limit * (1.0 + 1e-12)) {
      const double v = (s.slope[k] - c_hat * s.rhs[k]) / s.rhs[k];
      out.max_violation = std::max(out.max_violation, v);
      if (v > slack) ++out.violations;
    }
  }
  out.holds = out.violations == 0 && out.envelope_holds && out.t_checked < out.t_star;
  return out;
}

MomentCase moment_case(double gamma, double q, double p) {
  if (gamma + 1.0 >= 0.0) {
    if (q < 2.0) throw InapplicableError("gamma + 1 >= 0 needs q >= 2");
    return MomentCase::GammaPlusOne;
  }
  if (gamma + 2.0 >= 0.0) {
    if (q < 4.0) throw InapplicableError("gamma + 2 >= 0 needs q >= 4");
    return MomentCase::GammaPlusTwo;
  }
  if (!(p > 0.0)) throw InapplicableError("gamma + 2 < 0 needs an L^p bound on the data");
  return MomentCase::VerySoft;
}

std::vector<double> moment_coefficient(const TrajectoryReport& rep, MomentCase c, double p) {
  std::vector<double> a = rep.series("l1", 0.0);
  if (c == MomentCase::VerySoft) {
    const std::vector<double> lp = rep.series("lp", p);
    for (std::size_t k = 0; k < a.size(); ++k) a[k] += lp[k];
  }
  return a;
}

double fit_moment(const TrajectoryReport& rep, double q, double gamma, double p) {
  const MomentCase c = moment_case(gamma, q, p);
  return fit_gronwall(rep.times(), rep.series("l1", q), moment_coefficient(rep, c, p));
}

MomentCheck moment_check(const TrajectoryReport& rep, double q, double gamma, double c_hat,
                         double p, double bound_tolerance, double slack) {
  MomentCheck out;
  out.which = moment_case(gamma, q, p);
  const std::vector<double> y = rep.series("l1", q);
  out.gronwall = check_gronwall(rep.times(), y, moment_coefficient(rep, out.which, p), c_hat, slack);
  if (gamma > 0.0) {
    auto it = rep.equilibrium_l1.find(q);
    const double eq = it == rep.equilibrium_l1.end() ? 0.0 : it->second;
    out.uniform_bound = std::max(y[0], eq) * (1.0 + bound_tolerance);
    out.bounded = sup_of(y) <= out.uniform_bound;
  }
  out.holds = out.gronwall.holds && out.bounded;
  return out;
}

namespace {

std::vector<double> gradient_coefficient(const TrajectoryReport& rep, double q, double p) {
  std::vector<double> a = rep.series("l1", q);
  const std::vector<double> lp = rep.series("lp", p);
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!std::isfinite(a[k]) || !std::isfinite(lp[k]))
      throw ConfigError("L^p or L^1_q series is not finite");
    a[k] += lp[k];
  }
  return a;
}

}  // namespace

double fit_gradient(const TrajectoryReport& rep, double q, double p) {
  return fit_gronwall(rep.times(), rep.series("w11", q), gradient_coefficient(rep, q, p));
}

GronwallCheck gradient_check(const TrajectoryReport& rep, const CollisionKernel& kernel, double q,
                             double p, double c_hat, double slack) {
  if (kernel.angular.nu >= 1.0) throw InapplicableError("gradient propagation needs nu < 1");
  return check_gronwall(rep.times(), rep.series("w11", q), gradient_coefficient(rep, q, p), c_hat,
                        slack);
}

GrazingTable grazing_sweep(const Distribution& f0, const SimulationConfig& cfg,
                           const std::vector<double>& eps_list, double band) {
  if (cfg.kernel.angular.nu >= 1.0) throw InapplicableError("eps sweep needs nu < 1");
  if (eps_list.size() < 2) throw ConfigError("eps_list needs at least two values");
  for (std::size_t k = 0; k + 1 < eps_list.size(); ++k)
    if (!(eps_list[k + 1] < eps_list[k])) throw ConfigError("eps_list must decrease");
  const CollisionKernel sym = cfg.kernel.symmetrized ? cfg.kernel : symmetrize(cfg.kernel);

  GrazingTable table;
  table.names = {"entropy", "distance_to_equilibrium"};
  for (double w : cfg.norms.l1_weights)
    if (w > 2.0) table.names.push_back("l1_" + std::to_string(static_cast<int>(w)));

  for (double eps : eps_list) {
    SimulationConfig c = cfg;
    c.quad.eps = eps;
    const TrajectoryReport rep = evolve(f0, c);
    const Snapshot& last = rep.snapshots.back();
    GrazingRow row;
    row.eps = eps;
    row.m1_grazing = angular_moment(split(sym, eps).grazing, 1);
    row.observables["entropy"] = last.entropy;
    row.observables["distance_to_equilibrium"] = last.distance_to_equilibrium;
    for (double w : cfg.norms.l1_weights)
      if (w > 2.0) row.observables["l1_" + std::to_string(static_cast<int>(w))] = last.l1.at(w);
    table.rows.push_back(std::move(row));
  }

  table.verdict = true;
  for (const std::string& name : table.names) {
    std::vector<double> diff, ratio;
    for (std::size_t k = 0; k + 1 < table.rows.size(); ++k) {
      const double d = table.rows[k].observables.at(name) - table.rows[k + 1].observables.at(name);
      const double dm = table.rows[k].m1_grazing - table.rows[k + 1].m1_grazing;
      diff.push_back(d);
      ratio.push_back(d / dm);
    }
    bool monotone = true;
    for (std::size_t k = 0; k + 1 < diff.size(); ++k)
      if (std::abs(diff[k + 1]) > std::abs(diff[k])) monotone = false;
    double log_sum = 0.0;
    bool all_zero = true;
    bool any_zero = false;
    for (double r : ratio) {
      if (r == 0.0) any_zero = true;
      else all_zero = false;
      log_sum += std::log(std::abs(r));
    }
    double c = 0.0;
    bool stable = true;
    if (all_zero) {
      stable = true;
    } else if (any_zero) {
      stable = false;
    } else {
      c = std::exp(log_sum / static_cast<double>(ratio.size()));
      for (double r : ratio)
        if (std::abs(r) > band * c || std::abs(r) < c / band) stable = false;
    }
    table.differences[name] = diff;
    table.ratios[name] = ratio;
    table.fitted_factor[name] = c;
    table.stable[name] = stable;
    table.monotone[name] = monotone;
    table.verdict = table.verdict && stable;
  }
  return table;
}

}  // namespace boltzstab
