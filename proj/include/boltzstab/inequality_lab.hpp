#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "boltzstab/kernel.hpp"

namespace boltzstab {

enum class LabCheck { Diffpoids1, Diffpoids2, Povzner, CosExpansion };

std::string to_string(LabCheck c);
LabCheck parse_lab_check(const std::string& name);

struct CheckValue {
  double lhs = 0.0;
  double rhs_core = 0.0;
};

/**
 * |int (<v'>^q - <v>^q) b dsigma| against m_order |v - v_*|^order (<v>^{q-order} + <v_*>^{q-order}).
 * With swap the roles of (v, v') and (v_*, v'_*) are exchanged.
 */
CheckValue check_diffpoids(int order, const Eigen::VectorXd& v, const Eigen::VectorXd& v_star,
                           double q, const AngularPart& b, bool swap = false);

/// The sigma-averaged first-order term int (v' - v) b dsigma.
Eigen::VectorXd first_order_drift(const Eigen::VectorXd& v, const Eigen::VectorXd& v_star,
                                  const AngularPart& b);

struct PovznerValue {
  double lhs = 0.0;    ///< max over azimuth of <v'>^q + <v'_*>^q - <v>^q - <v_*>^q
  double gain = 0.0;   ///< 2^{q+1}[<v>^{q-1}<v_*> + <v_*>^{q-1}<v>] cs
  double damp = 0.0;   ///< [<v>^q + <v_*>^q] cs^2
  double rhs(double k_q) const { return gain - k_q * damp; }
};

/**
 * Both sides of the Povzner-type bound at deviation angle theta in [0, pi/2].
 * cs is the product cos(phi) sin(phi) of the angle phi between omega and v - v_*
 * in the omega-representation, i.e. sin(theta)/2.
 */
PovznerValue check_povzner(const Eigen::VectorXd& v, const Eigen::VectorXd& v_star, double theta,
                           double q, int azimuth_points = 64);

/// |cos(theta/2)^{-(N+gamma)} - 1| against 1 - cos(theta).
CheckValue check_cos_expansion(double theta, int dimension, double gamma);

/// One lab configuration: the check, q, and the kernel it is run for.
struct LabCase {
  LabCheck check = LabCheck::Diffpoids1;
  double q = 2.0;
  CollisionKernel kernel;
};

void validate(const LabCase& c);

struct LabSample {
  Eigen::VectorXd v;
  Eigen::VectorXd v_star;
  double theta = 0.0;
};

/// Seeded draws: Gaussian of variance 4 per axis, 10% heavy tail with |v| uniform in [0, 50].
std::vector<LabSample> draw_samples(int dimension, std::size_t count, std::uint64_t seed);

struct FittedConstant {
  double value = 0.0;
  double sample_extreme = 0.0;  ///< best ratio among the samples before the ascent
  bool bounded = true;          ///< every ascent converged
  std::uint64_t seed = 0;
  std::size_t samples = 0;
  std::size_t vacuous = 0;
  bool lower_bound = false;  ///< povzner fits a minimum
};

/**
 * Max of lhs/rhs_core (min of (gain - lhs)/damp for povzner) over a seeded sample, refined
 * by compass search from the eight best samples inside the sampled region. An ascent still
 * climbing after its last step halvings marks the constant unbounded.
 */
FittedConstant calibrate(const LabCase& c, std::size_t sample_count, std::uint64_t seed);

struct LabTally {
  std::size_t samples = 0;
  std::size_t violations = 0;
  double max_ratio = 0.0;     ///< max lhs/rhs_core (povzner: min (gain - lhs)/damp)
  double worst_excess = 0.0;  ///< largest relative amount by which a sample broke the bound
  LabSample worst;
};

/// Scores a fresh sample against a frozen constant with relative slack.
LabTally score(const LabCase& c, const FittedConstant& fitted, std::size_t sample_count,
               std::uint64_t seed, double slack = 1e-9);

struct LabRow {
  LabCase lab_case;
  FittedConstant fitted;
  LabTally tally;
};

/// Default battery: the four kinetic variants, each check at its admissible q.
std::vector<LabCase> default_battery();

LabRow run_lab_case(const LabCase& c, std::size_t calibration_samples, std::uint64_t seed_a,
                    std::size_t scoring_samples, std::uint64_t seed_b, double slack = 1e-9);

}  // namespace boltzstab
