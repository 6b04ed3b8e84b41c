#include "boltzstab/kernel.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "boltzstab/errors.hpp"
#include "boltzstab/quadrature.hpp"

namespace boltzstab {

namespace {

constexpr double kPi = std::numbers::pi;

double smooth_step(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / x);
  const double b = std::exp(-1.0 / (1.0 - x));
  return a / (a + b);
}

}  // namespace

std::string to_string(KineticVariant v) {
  switch (v) {
    case KineticVariant::MollifiedHard: return "mollified-hard";
    case KineticVariant::MollifiedSoft: return "mollified-soft";
    case KineticVariant::PowerHard: return "power-hard";
    case KineticVariant::PowerSoft: return "power-soft";
  }
  return "unknown";
}

KineticVariant parse_kinetic_variant(const std::string& name) {
  if (name == "mollified-hard") return KineticVariant::MollifiedHard;
  if (name == "mollified-soft") return KineticVariant::MollifiedSoft;
  if (name == "power-hard") return KineticVariant::PowerHard;
  if (name == "power-soft") return KineticVariant::PowerSoft;
  throw ConfigError("unknown kinetic variant '" + name + "'");
}

void validate(const CollisionKernel& k) {
  const int n = k.angular.dimension;
  if (n < 2) throw ConfigError("dimension must be >= 2");
  if (!(k.angular.nu < 2.0)) throw ConfigError("nu must be < 2");
  if (!(k.angular.c_b > 0.0)) throw ConfigError("c_b must be positive");
  if (!(k.kinetic.c_phi > 0.0)) throw ConfigError("c_phi must be positive");
  const double g = k.kinetic.gamma;
  switch (k.kinetic.variant) {
    case KineticVariant::MollifiedHard:
    case KineticVariant::PowerHard:
      if (!(g > 0.0 && g <= 1.0)) throw ConfigError("hard variants need gamma in (0, 1]");
      break;
    case KineticVariant::MollifiedSoft:
    case KineticVariant::PowerSoft:
      if (!(g > -n && g <= 0.0)) throw ConfigError("soft variants need gamma in (-N, 0]");
      break;
  }
  if ((k.kinetic.variant == KineticVariant::MollifiedHard ||
       k.kinetic.variant == KineticVariant::MollifiedSoft) &&
      !(k.kinetic.mollifier_scale > 0.0))
    throw ConfigError("mollifier_scale must be positive");
}

double eval_angular(const AngularKernel& b, double theta) {
  if (!(theta > 0.0 && theta <= kPi)) throw DomainError("theta outside (0, pi]");
  return b.c_b * std::pow(theta, -(b.dimension - 1) - b.nu);
}

double eval_angular(const CollisionKernel& k, double theta) {
  if (!k.symmetrized) return eval_angular(k.angular, theta);
  if (!(theta > 0.0 && theta <= kPi)) throw DomainError("theta outside (0, pi]");
  if (theta > 0.5 * kPi) return 0.0;
  return eval_angular(k.angular, theta) + eval_angular(k.angular, kPi - theta);
}

double eval_kinetic(const KineticKernel& phi, double r) {
  if (!(r >= 0.0) || !std::isfinite(r)) throw DomainError("r must be finite and >= 0");
  const double g = phi.gamma;
  switch (phi.variant) {
    case KineticVariant::PowerHard:
      return phi.c_phi * std::pow(r, g);
    case KineticVariant::PowerSoft:
      if (g == 0.0) return phi.c_phi;
      if (r == 0.0) throw SingularPointError("Phi singular at r = 0 for gamma < 0");
      return phi.c_phi * std::pow(r, g);
    case KineticVariant::MollifiedHard:
    case KineticVariant::MollifiedSoft: {
      const double s = phi.mollifier_scale;
      if (r >= s) return phi.c_phi * std::pow(r, g);
      const double flat = std::pow(0.5 * s, g);
      if (r <= 0.5 * s) return phi.c_phi * flat;
      const double t = smooth_step(2.0 * r / s - 1.0);
      return phi.c_phi * ((1.0 - t) * flat + t * std::pow(r, g));
    }
  }
  return 0.0;
}

InversePowerLaw from_inverse_power_law(double s) {
  if (!(s > 1.0)) throw DomainError("inverse power law needs s > 1");
  InversePowerLaw out{(s - 4.0) / s, 2.0 / s, ""};
  if (s > 4.0)
    out.regime = "hard";
  else if (s == 4.0)
    out.regime = "maxwell";
  else if (s > 2.0)
    out.regime = "moderately-soft";
  else
    out.regime = "very-soft";
  return out;
}

CollisionKernel symmetrize(const CollisionKernel& k) {
  if (k.symmetrized) throw UsageError("kernel is already symmetrized");
  CollisionKernel out = k;
  out.symmetrized = true;
  return out;
}

double AngularPart::operator()(double theta) const {
  if (!(theta > 0.0)) throw DomainError("theta must be positive");
  const bool inside = theta >= lo && (theta < hi || (theta == hi && hi == 0.5 * kPi));
  if (!inside) return 0.0;
  const double b = eval_angular(angular, theta);
  return symmetric ? b + eval_angular(angular, kPi - theta) : b;
}

AngularPart full_part(const CollisionKernel& k) {
  if (!k.symmetrized) throw UsageError("angular parts need a symmetrized kernel");
  return AngularPart{k.angular, 0.0, 0.5 * kPi, true};
}

AngularSplit split(const CollisionKernel& k, double eps) {
  if (!k.symmetrized) throw UsageError("split needs a symmetrized kernel");
  if (!(eps > 0.0 && eps < 0.5 * kPi)) throw DomainError("eps must lie in (0, pi/2)");
  return AngularSplit{AngularPart{k.angular, eps, 0.5 * kPi, true},
                      AngularPart{k.angular, 0.0, eps, true}};
}

double sphere_area(int d) {
  if (d < 0) throw DomainError("sphere dimension must be >= 0");
  const double h = 0.5 * (d + 1);
  return 2.0 * std::pow(kPi, h) / std::tgamma(h);
}

double angular_moment(const AngularPart& part, double k) {
  const int n = part.angular.dimension;
  const double area = sphere_area(n - 2);
  auto g = [&](double t) {
    return part(t) * std::pow(std::sin(0.5 * t), k) * area * std::pow(std::sin(t), n - 2);
  };
  if (part.lo > 0.0) return integrate_adaptive(g, part.lo, part.hi, 1e-12);
  auto r = integrate_toward_zero(g, part.hi, 1e-10, 1e12);
  return r.finite ? r.value : std::numeric_limits<double>::infinity();
}

double angular_moment(const AngularPart& part, int k) {
  return angular_moment(part, static_cast<double>(k));
}

}  // namespace boltzstab
