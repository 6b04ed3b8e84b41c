#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "boltzstab/errors.hpp"
#include "boltzstab/kernel.hpp"
#include "boltzstab/quadrature.hpp"

using namespace boltzstab;
using std::numbers::pi;

namespace {

CollisionKernel family(double nu, int n = 2) {
  CollisionKernel k;
  k.angular = {nu, 1.0, n};
  k.kinetic = {0.0, 1.0, KineticVariant::MollifiedSoft, 1.0};
  return symmetrize(k);
}

}  // namespace

TEST_CASE("angular kernel values") {
  CHECK(eval_angular(AngularKernel{0.5, 1.0, 2}, 1.0) == doctest::Approx(1.0));
  // (pi/2)^{-1.5}, long double reference
  const long double ref = std::pow(std::numbers::pi_v<long double> / 2, -1.5L);
  CHECK(eval_angular(AngularKernel{0.5, 1.0, 2}, pi / 2) ==
        doctest::Approx(static_cast<double>(ref)).epsilon(1e-14));
  CHECK(static_cast<double>(ref) == doctest::Approx(0.50795).epsilon(1e-5));
  CHECK(eval_angular(AngularKernel{-1.0, 2.0, 3}, 0.1) == doctest::Approx(20.0));
  CHECK_THROWS_AS(eval_angular(AngularKernel{0.5, 1.0, 2}, 0.0), DomainError);
  CHECK_THROWS_AS(eval_angular(AngularKernel{0.5, 1.0, 2}, 4.0), DomainError);
}

TEST_CASE("kinetic kernel values") {
  CHECK(eval_kinetic({1.0, 1.0, KineticVariant::PowerHard, 1.0}, 3.0) == doctest::Approx(3.0));
  CHECK(eval_kinetic({-1.0, 2.0, KineticVariant::PowerSoft, 1.0}, 0.5) == doctest::Approx(4.0));
  const double far = eval_kinetic({0.5, 1.0, KineticVariant::MollifiedHard, 1.0}, 100.0);
  CHECK(std::abs(far / 10.0 - 1.0) < 1e-6);
  CHECK_THROWS_AS(eval_kinetic({-1.0, 1.0, KineticVariant::PowerSoft, 1.0}, 0.0),
                  SingularPointError);
  const KineticKernel m{-1.0, 1.0, KineticVariant::MollifiedSoft, 1.0};
  CHECK(std::isfinite(eval_kinetic(m, 0.0)));
  CHECK(eval_kinetic(m, 0.0) == doctest::Approx(2.0));
  // continuous across the blend
  CHECK(eval_kinetic(m, 0.5 + 1e-9) == doctest::Approx(eval_kinetic(m, 0.5)).epsilon(1e-6));
  CHECK(eval_kinetic(m, 1.0 - 1e-9) == doctest::Approx(eval_kinetic(m, 1.0)).epsilon(1e-6));
}

TEST_CASE("inverse power law exponents") {
  const auto a = from_inverse_power_law(4.0);
  CHECK(a.gamma == doctest::Approx(0.0));
  CHECK(a.nu == doctest::Approx(0.5));
  CHECK(a.regime == "maxwell");
  const auto b = from_inverse_power_law(8.0);
  CHECK(b.gamma == doctest::Approx(0.5));
  CHECK(b.nu == doctest::Approx(0.25));
  CHECK(b.regime == "hard");
  const auto c = from_inverse_power_law(3.0);
  CHECK(c.gamma == doctest::Approx(-1.0 / 3));
  CHECK(c.nu == doctest::Approx(2.0 / 3));
  CHECK(c.gamma > -c.nu);
  CHECK(c.regime == "moderately-soft");
  CHECK(from_inverse_power_law(1.5).regime == "very-soft");
  CHECK_THROWS_AS(from_inverse_power_law(1.0), DomainError);
}

TEST_CASE("validate rejects out-of-range kernels") {
  CollisionKernel k = family(0.5);
  CHECK_NOTHROW(validate(k));
  k.angular.nu = 2.0;
  CHECK_THROWS_AS(validate(k), ConfigError);
  k = family(0.5);
  k.kinetic.variant = KineticVariant::PowerHard;
  CHECK_THROWS_AS(validate(k), ConfigError);
  k.kinetic.gamma = 1.0;
  CHECK_NOTHROW(validate(k));
  k.kinetic.variant = KineticVariant::PowerSoft;
  k.kinetic.gamma = -2.0;
  CHECK_THROWS_AS(validate(k), ConfigError);
}

TEST_CASE("symmetrization") {
  const auto k = family(0.5);
  CHECK_THROWS_AS(symmetrize(k), UsageError);
  const double t = pi / 3;
  CHECK(eval_angular(k, t) == doctest::Approx(std::pow(t, -1.5) + std::pow(2 * t, -1.5)));
  CHECK(eval_angular(k, 3 * pi / 4) == 0.0);
  CHECK(eval_angular(k, pi / 2) == doctest::Approx(2 * std::pow(pi / 2, -1.5)));

  // a part already supported in [0, pi/2] keeps only its own value
  AngularPart half{AngularKernel{0.5, 1.0, 2}, 0.0, pi / 2, false};
  CHECK(half(t) == doctest::Approx(std::pow(t, -1.5)));
}

TEST_CASE("split partitions the kernel") {
  const auto k = family(0.5);
  const double eps = 0.2;
  const auto s = split(k, eps);
  CHECK(s.cutoff(eps / 2) == 0.0);
  CHECK(s.grazing(eps / 2) == eval_angular(k, eps / 2));
  CHECK(s.cutoff(eps) == eval_angular(k, eps));
  CHECK(s.grazing(eps) == 0.0);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(1e-6, pi / 2);
  for (int i = 0; i < 100; ++i) {
    const double t = u(rng);
    CHECK(s.cutoff(t) + s.grazing(t) == eval_angular(k, t));
  }
  CHECK_THROWS_AS(split(k, 0.0), DomainError);
  CHECK_THROWS_AS(split(k, 2.0), DomainError);
  CollisionKernel raw = k;
  raw.symmetrized = false;
  CHECK_THROWS_AS(split(raw, 0.1), UsageError);
}

TEST_CASE("angular moments") {
  // b = 1 on [0.1, pi/2], N = 2: m_1 = 2 * int sin(t/2) = 4 (cos 0.05 - cos(pi/4))
  AngularPart one{AngularKernel{-1.0, 1.0, 2}, 0.1, pi / 2, false};
  const double closed = 4.0 * (std::cos(0.05) - std::cos(pi / 4));
  const double quad = 2.0 * integrate_adaptive([](double t) { return std::sin(0.5 * t); }, 0.1,
                                               pi / 2, 1e-14);
  CHECK(quad == doctest::Approx(closed).epsilon(1e-12));
  CHECK(angular_moment(one, 1) == doctest::Approx(closed).epsilon(1e-10));

  const auto k = family(0.5);
  double prev = std::numeric_limits<double>::infinity();
  for (double eps : {0.4, 0.2, 0.1, 0.05}) {
    const double m = angular_moment(split(k, eps).grazing, 1);
    CHECK(std::isfinite(m));
    CHECK(m < prev);
    prev = m;
  }
  const auto hot = family(1.5);
  CHECK(std::isinf(angular_moment(split(hot, 0.1).grazing, 1)));
  CHECK(std::isfinite(angular_moment(split(hot, 0.1).grazing, 2)));
}

TEST_CASE("grazing moment matches closed form") {
  // N = 2, symmetric part on (0, eps): int (t^{-1.5} + (pi - t)^{-1.5}) sin(t/2)^2 * 2 dt
  const auto k = family(0.5);
  const double eps = 0.3;
  const double ref = 2.0 * integrate_adaptive(
                               [](double t) {
                                 const double s = std::sin(0.5 * t);
                                 return (std::pow(t, -1.5) + std::pow(pi - t, -1.5)) * s * s;
                               },
                               1e-12, eps, 1e-14);
  CHECK(angular_moment(split(k, eps).grazing, 2) == doctest::Approx(ref).epsilon(1e-6));
}

TEST_CASE("sphere area") {
  CHECK(sphere_area(0) == doctest::Approx(2.0));
  CHECK(sphere_area(1) == doctest::Approx(2 * pi));
  CHECK(sphere_area(2) == doctest::Approx(4 * pi));
}
