#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "boltzstab/collision.hpp"
#include "boltzstab/kernel.hpp"
#include "boltzstab/phase_space.hpp"

namespace boltzstab {

enum class Integrator { Euler, RK4 };

std::string to_string(Integrator i);
Integrator parse_integrator(const std::string& name);

/// Norms recorded at every snapshot. Entries are weights s (L^1_s, W^{k,1}_s) or exponents p.
struct NormRequest {
  std::vector<double> l1_weights{0.0, 2.0};
  std::vector<double> lp{};
  std::vector<double> w11_weights{};
  std::vector<double> w21_weights{};
  std::vector<double> grad_lp{};
  bool entropy_production = false;
  bool coercivity = false;
};

void merge(NormRequest& into, const NormRequest& extra);

struct SimulationConfig {
  CollisionKernel kernel;
  GridPtr grid;
  QuadratureSpec quad;
  double dt = 0.01;
  double t_end = 1.0;
  Integrator integrator = Integrator::RK4;
  double q = 2.0;
  int record_every = 1;
  int threads = 1;
  NormRequest norms;
  double cfl_limit = 0.5;
  double clip_tolerance = 1e-6;   ///< abort when one step clips more than this fraction of mass
  double entropy_slack = 1e-8;    ///< allowed per-step entropy rise relative to |H|
};

/// Throws ConfigError on inconsistent settings.
void validate(const SimulationConfig& cfg);

/// "hard" for gamma > 0, "global-regime" for -nu < gamma <= 0, "local-regime" otherwise.
std::string regime_flag(const CollisionKernel& kernel);

struct Snapshot {
  double time = 0.0;
  int step = 0;
  Moments moments;
  double entropy = 0.0;
  double entropy_production = 0.0;
  double distance_to_equilibrium = 0.0;  ///< ||f - M||_{L^1}, M matching f0
  std::map<double, double> l1;
  std::map<double, double> lp;
  std::map<double, double> w11;
  std::map<double, double> w21;
  std::map<double, double> grad_lp;
  double coercivity = 0.0;
  double clipped_mass = 0.0;  ///< clipped since the previous snapshot
};

struct TrajectoryReport {
  GridPtr grid;
  std::vector<Snapshot> snapshots;
  std::vector<Eigen::ArrayXd> states;  ///< nodal values at each snapshot
  std::vector<double> step_entropy;    ///< H after every step, index 0 is t = 0
  NormRequest norms;
  std::string regime;
  double dt = 0.0;
  double cfl = 0.0;                 ///< largest dt * max L(f) seen
  double max_drift = 0.0;           ///< relative mass/momentum/energy drift over the run
  int entropy_rises = 0;            ///< steps where H grew beyond the slack
  double worst_entropy_rise = 0.0;  ///< largest (H_{k+1} - H_k) / |H_k|
  double total_clipped = 0.0;
  std::map<double, double> equilibrium_l1;  ///< L^1_s norms of the Maxwellian matching f0

  std::vector<double> times() const;
  /// Series for one recorded norm, or a scalar column (entropy, entropy_production,
  /// distance_to_equilibrium, coercivity, clipped_mass) with the key ignored.
  /// Throws ConfigError when the norm was not requested.
  std::vector<double> series(const std::string& family, double key) const;
  Distribution state(std::size_t k) const;
};

/// Largest dt * L(f)(v) over the grid.
double cfl_number(const CollisionOperator& op, const Distribution& f, double dt);

struct StepResult {
  Distribution f;
  double clipped_mass = 0.0;
};

/// One Euler or RK4 step with projected stages. Negative values are clipped and the
/// conserved moments restored by a positive multiplicative correction.
StepResult step(const CollisionOperator& op, const Distribution& f, double dt,
                Integrator integrator);
StepResult step(const Distribution& f, const SimulationConfig& cfg);

Snapshot observe(const CollisionOperator& op, const Distribution& f, const Distribution& eq,
                 const NormRequest& norms);

/// Runs to t_end. Throws RunAbort on a CFL breach or excessive clipping.
TrajectoryReport evolve(const Distribution& f0, const SimulationConfig& cfg);

/// Norm list multiplying the calibration constant in the stability rate.
struct RateNorms {
  double p = 0.0;   ///< L^p exponent (variant 4, gamma + 1 >= 0)
  double p1 = 0.0;  ///< variant 4, gamma + 1 < 0
  double p2 = 0.0;  ///< gradient exponent, variant 4, gamma + 1 < 0
};

/// Norms a run must record for the stability rate at weight q.
NormRequest rate_requirements(const CollisionKernel& kernel, double q, const RateNorms& rn);

/// Sum of the variant's sup-norms over both runs.
double rate_norm_sum(const TrajectoryReport& f, const TrajectoryReport& g,
                     const CollisionKernel& kernel, double q, const RateNorms& rn);

/// cst_hat times rate_norm_sum.
double compute_Cs(const TrajectoryReport& f, const TrajectoryReport& g,
                  const CollisionKernel& kernel, double q, double cst_hat, const RateNorms& rn);

struct StabilityReport {
  double q = 2.0;
  std::vector<double> times;
  std::vector<double> d_norm;        ///< ||f - g||_{L^1_q}
  std::vector<double> bound_margin;  ///< log D(t) - log D(0) - C_s t
  double norm_sum = 0.0;
  double cst_hat = 0.0;
  double c_s = 0.0;
  double measured_rate = 0.0;  ///< max_t log(D(t)/D(0)) / t
  double max_margin = 0.0;
  double slack = 0.0;
  bool degenerate = false;  ///< D(0) = 0
  bool verdict = false;
};

StabilityReport compare_runs(const TrajectoryReport& f, const TrajectoryReport& g,
                             const CollisionKernel& kernel, double q, double cst_hat,
                             const RateNorms& rn, double slack = 1e-9);

/// Evolves both data under cfg and compares them.
StabilityReport stability_run(const Distribution& f0, const Distribution& g0,
                              const SimulationConfig& cfg, double q, double cst_hat,
                              const RateNorms& rn = {}, double slack = 1e-9);

/// Smallest cst_hat for which the pair satisfies the bound, floored at zero.
double calibrate_cst(const StabilityReport& r);

/// Exponential envelope y0 exp(C int_0^t a) against a measured series.
struct GronwallCheck {
  double constant = 0.0;
  std::vector<double> envelope;
  double max_excess = 0.0;  ///< max (y - envelope) / envelope
  int violations = 0;
  bool holds = false;
};

/// Smallest C with y(t) <= y(0) exp(C int_0^t a), floored at zero.
double fit_gronwall(const std::vector<double>& t, const std::vector<double>& y,
                    const std::vector<double>& a);

GronwallCheck check_gronwall(const std::vector<double>& t, const std::vector<double>& y,
                             const std::vector<double>& a, double c, double slack = 1e-9);

struct LpOdeCheck {
  double p = 2.0;
  double constant = 0.0;
  double max_violation = 0.0;  ///< max of slope - rhs, relative to rhs
  int violations = 0;
  double t_star = kInfinity;   ///< blow-up time of the fitted Riccati envelope
  double t_checked = 0.0;
  bool envelope_holds = false;
  bool holds = false;
};

/// Fitted constant for d/dt ||f||_p <= C (1 - 1/p)(||f||_p + ||f||_p^2).
double fit_lp_ode(const TrajectoryReport& rep, double p);

/// Throws InapplicableError for gamma > 0 or p <= N/(N + gamma).
LpOdeCheck lp_ode_check(const TrajectoryReport& rep, const CollisionKernel& kernel, double p,
                        double c_hat, double t_limit = kInfinity, double slack = 1e-9);

enum class MomentCase { GammaPlusOne, GammaPlusTwo, VerySoft };

/// Case of the moment estimate; throws InapplicableError when q is below its threshold.
MomentCase moment_case(double gamma, double q, double p);

struct MomentCheck {
  MomentCase which = MomentCase::GammaPlusOne;
  GronwallCheck gronwall;
  double uniform_bound = 0.0;  ///< max(y(0), equilibrium moment) for gamma > 0
  bool bounded = true;
  bool holds = false;
};

/// Coefficient series a(t) for the moment estimate.
std::vector<double> moment_coefficient(const TrajectoryReport& rep, MomentCase c, double p);

double fit_moment(const TrajectoryReport& rep, double q, double gamma, double p = 0.0);

/// For gamma > 0 also checks sup_t y <= max(y(0), y of the matching Maxwellian).
MomentCheck moment_check(const TrajectoryReport& rep, double q, double gamma, double c_hat,
                         double p = 0.0, double bound_tolerance = 1e-2, double slack = 1e-9);

double fit_gradient(const TrajectoryReport& rep, double q, double p);

GronwallCheck gradient_check(const TrajectoryReport& rep, const CollisionKernel& kernel, double q,
                             double p, double c_hat, double slack = 1e-9);

struct GrazingRow {
  double eps = 0.0;
  double m1_grazing = 0.0;  ///< m_1 of the removed part theta < eps
  std::map<std::string, double> observables;
};

struct GrazingTable {
  std::vector<GrazingRow> rows;
  std::vector<std::string> names;
  /// Per observable: (obs(eps_k) - obs(eps_{k+1})) / (m1(eps_k) - m1(eps_{k+1})).
  std::map<std::string, std::vector<double>> ratios;
  std::map<std::string, std::vector<double>> differences;
  std::map<std::string, double> fitted_factor;  ///< geometric mean of |ratio|
  std::map<std::string, bool> stable;           ///< every |ratio| within [C/3, 3C]
  std::map<std::string, bool> monotone;         ///< |differences| decreasing
  bool verdict = false;
};

/// Evolves f0 once per eps and tabulates final-time observables.
GrazingTable grazing_sweep(const Distribution& f0, const SimulationConfig& cfg,
                           const std::vector<double>& eps_list, double band = 3.0);

}  // namespace boltzstab
