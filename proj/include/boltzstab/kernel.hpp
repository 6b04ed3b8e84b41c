#pragma once

#include <string>
#include <utility>

namespace boltzstab {

/// Kinetic-part families.
enum class KineticVariant {
  MollifiedHard,  ///< smooth, positive, gamma in (0, 1]
  MollifiedSoft,  ///< smooth, positive, gamma in (-N, 0]
  PowerHard,      ///< c_phi r^gamma, gamma in (0, 1]
  PowerSoft,      ///< c_phi r^gamma, gamma in (-N, 0]
};

std::string to_string(KineticVariant v);
KineticVariant parse_kinetic_variant(const std::string& name);

/// b(cos theta) = c_b theta^{-(N-1)-nu} on (0, pi].
struct AngularKernel {
  double nu = 0.5;
  double c_b = 1.0;
  int dimension = 2;
};

struct KineticKernel {
  double gamma = 0.0;
  double c_phi = 1.0;
  KineticVariant variant = KineticVariant::PowerSoft;
  double mollifier_scale = 1.0;
};

struct CollisionKernel {
  AngularKernel angular;
  KineticKernel kinetic;
  bool symmetrized = false;

  int dimension() const { return angular.dimension; }
};

/// Checks ranges (nu < 2, c_b > 0, gamma inside the variant's interval, ...).
void validate(const CollisionKernel& kernel);

double eval_angular(const AngularKernel& b, double theta);

/// Angular part of a kernel; after symmetrization b(theta) + b(pi - theta) on [0, pi/2].
double eval_angular(const CollisionKernel& kernel, double theta);

/**
 * Phi(r).
 *
 * Mollified variants coincide with c_phi r^gamma for r >= s (s the mollifier
 * scale), are constant c_phi (s/2)^gamma for r <= s/2 and blend with a C-infinity
 * step in between.
 */
double eval_kinetic(const KineticKernel& phi, double r);

struct InversePowerLaw {
  double gamma;
  double nu;
  std::string regime;  ///< "hard", "maxwell", "moderately-soft" or "very-soft"
};

/// Exponents for the 3D inverse-power-law potential, s > 1.
InversePowerLaw from_inverse_power_law(double s);

/// Throws UsageError if already symmetrized.
CollisionKernel symmetrize(const CollisionKernel& kernel);

/**
 * Restriction of an angular kernel to [lo, hi) (hi included when it is pi/2).
 * With `symmetric` the value is b(theta) + b(pi - theta).
 */
struct AngularPart {
  AngularKernel angular;
  double lo = 0.0;
  double hi = 0.0;
  bool symmetric = true;

  double operator()(double theta) const;
  bool singular_at_zero() const { return lo == 0.0; }
};

/// The whole symmetrized kernel as a part on [0, pi/2].
AngularPart full_part(const CollisionKernel& kernel);

struct AngularSplit {
  AngularPart cutoff;   ///< theta >= eps
  AngularPart grazing;  ///< theta < eps
};

AngularSplit split(const CollisionKernel& kernel, double eps);

/// |S^{d}|, the area of the unit d-sphere.
double sphere_area(int d);

/**
 * m_k = int part(theta) sin(theta/2)^k dsigma over S^{N-1}.
 *
 * Returns +infinity when the integral diverges (nu >= k for parts reaching 0).
 */
double angular_moment(const AngularPart& part, int k);

/// Same as above with a real exponent.
double angular_moment(const AngularPart& part, double k);

}  // namespace boltzstab
