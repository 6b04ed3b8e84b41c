#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "boltzstab/errors.hpp"
#include "boltzstab/inequality_lab.hpp"
#include "boltzstab/quadrature.hpp"

using namespace boltzstab;
using std::numbers::pi;

namespace {

CollisionKernel kernel(int n, double gamma, double nu, KineticVariant v) {
  CollisionKernel k;
  k.angular = {nu, 1.0, n};
  k.kinetic = {gamma, 1.0, v, 1.0};
  return symmetrize(k);
}

CollisionKernel maxwell(int n = 2) { return kernel(n, 0.0, 0.5, KineticVariant::MollifiedSoft); }

}  // namespace

TEST_CASE("coincident velocities are vacuous") {
  const Eigen::Vector2d v(0.5, 1.0);
  const auto b = full_part(maxwell());
  for (int order : {1, 2}) {
    const auto cv = check_diffpoids(order, v, v, 4.0, b);
    CHECK(cv.lhs == 0.0);
    CHECK(cv.rhs_core == 0.0);
  }
}

TEST_CASE("q = 2 weight difference in closed form") {
  // averaged over sigma, |v'|^2 - |v|^2 integrates to m_2 (|v_*|^2 - |v|^2)
  for (int n : {2, 3}) {
    const auto b = full_part(maxwell(n));
    const double m2 = angular_moment(b, 2);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n), vs = Eigen::VectorXd::Zero(n);
    v(0) = 1.0;
    vs(1) = 2.0;
    const double expect = m2 * std::abs(vs.squaredNorm() - v.squaredNorm());
    const auto a = check_diffpoids(1, v, vs, 2.0, b);
    const auto s = check_diffpoids(1, v, vs, 2.0, b, true);
    CAPTURE(n);
    CHECK(a.lhs == doctest::Approx(expect).epsilon(1e-8));
    CHECK(s.lhs == doctest::Approx(expect).epsilon(1e-8));
    CHECK(a.rhs_core == doctest::Approx(angular_moment(b, 1) * std::sqrt(5.0) *
                                        (std::sqrt(2.0) + std::sqrt(5.0))));
    const Eigen::VectorXd drift = first_order_drift(v, vs, b);
    CHECK((drift + m2 * (v - vs)).norm() < 1e-8 * m2);
  }
}

TEST_CASE("order thresholds") {
  const auto b = full_part(maxwell());
  const Eigen::Vector2d v(1, 0), vs(0, 1);
  CHECK_THROWS_AS(check_diffpoids(1, v, vs, 1.5, b), InapplicableError);
  CHECK_THROWS_AS(check_diffpoids(2, v, vs, 3.0, b), InapplicableError);
  CHECK_THROWS_AS(check_diffpoids(3, v, vs, 4.0, b), DomainError);
  const auto hot = full_part(kernel(2, 0.5, 1.5, KineticVariant::PowerHard));
  CHECK_THROWS_AS(check_diffpoids(1, v, vs, 4.0, hot), InapplicableError);
  CHECK_NOTHROW(check_diffpoids(2, v, vs, 4.0, hot));
}

TEST_CASE("povzner boundary cases") {
  const Eigen::Vector3d v(1, -2, 0.5), vs(0, 3, 1);
  const auto z = check_povzner(v, vs, 0.0, 4.0);
  CHECK(z.lhs == 0.0);
  CHECK(z.gain == 0.0);
  CHECK(z.damp == 0.0);
  for (double t : {0.2, 0.9, pi / 2}) {
    const auto e = check_povzner(v, vs, t, 2.0);
    CHECK(std::abs(e.lhs) < 1e-12 * (1 + v.squaredNorm() + vs.squaredNorm()));
  }
  CHECK_THROWS_AS(check_povzner(v, vs, 2.0, 4.0), DomainError);
}

TEST_CASE("cos expansion") {
  const auto top = check_cos_expansion(pi / 2, 2, 1.0);
  CHECK(top.lhs == doctest::Approx(std::pow(2.0, 1.5) - 1.0));
  CHECK(top.rhs_core == doctest::Approx(1.0));
  const auto zero = check_cos_expansion(0.0, 3, -1.0);
  CHECK(zero.lhs == 0.0);
  CHECK(zero.rhs_core == 0.0);
  for (auto [n, g] : {std::pair{2, 1.0}, {3, -1.0}, {3, -2.5}}) {
    const auto small = check_cos_expansion(1e-4, n, g);
    CHECK(small.lhs / small.rhs_core == doctest::Approx((n + g) / 4.0).epsilon(1e-6));
    double prev = 0.0;
    for (int i = 1; i <= 1000; ++i) {
      const auto cv = check_cos_expansion(0.5 * pi * i / 1000, n, g);
      const double r = cv.lhs / cv.rhs_core;
      CHECK(r >= prev);
      CHECK(std::isfinite(r));
      prev = r;
    }
  }
}

TEST_CASE("seeded draws are reproducible") {
  const auto a = draw_samples(3, 50, 17);
  const auto b = draw_samples(3, 50, 17);
  const auto c = draw_samples(3, 50, 18);
  bool differ = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK((a[i].v.array() == b[i].v.array()).all());
    CHECK(a[i].theta == b[i].theta);
    CHECK(a[i].theta >= 0.0);
    CHECK(a[i].theta <= pi / 2);
    differ = differ || (a[i].v.array() != c[i].v.array()).any();
  }
  CHECK(differ);
}

TEST_CASE("fitted constants") {
  const LabCase d1{LabCheck::Diffpoids1, 2.0, maxwell()};
  double lo = 1e300, hi = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    const double c = calibrate(d1, 2000, seed).value;
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  CHECK(hi <= 1.1 * lo);

  for (auto [n, g] : {std::pair{2, 1.0}, {3, -1.0}}) {
    const LabCase ce{LabCheck::CosExpansion, 0.0,
                     kernel(n, g, 0.5, g > 0 ? KineticVariant::PowerHard
                                             : KineticVariant::PowerSoft)};
    CHECK(calibrate(ce, 2000, 5).value >= (n + g) / 4.0);
  }

  for (double q : {3.0, 4.0, 6.0}) {
    const LabCase pz{LabCheck::Povzner, q, maxwell(3)};
    const auto fc = calibrate(pz, 5000, 7);
    CHECK(fc.lower_bound);
    CHECK(fc.value > 0.0);
    const auto t = score(pz, fc, 5000, 8);
    CHECK(t.samples == 5000);
  }
  CHECK_THROWS_AS(calibrate(d1, 10, 1), ConfigError);
  CHECK_THROWS_AS(calibrate(LabCase{LabCheck::Povzner, 2.0, maxwell()}, 2000, 1),
                  InapplicableError);
}

TEST_CASE("frozen constants score their own sample clean") {
  const LabCase c{LabCheck::CosExpansion, 0.0, maxwell()};
  const auto fc = calibrate(c, 3000, 21);
  const auto t = score(c, fc, 3000, 21);
  CHECK(t.violations == 0);
  CHECK(t.max_ratio == fc.sample_extreme);
  CHECK(fc.value >= fc.sample_extreme);
}

TEST_CASE("calibration ascent reaches the supremum") {
  // the cos ratio increases in theta, so its supremum sits at pi/2: 2^{(N+gamma)/2} - 1
  for (auto [n, g] : {std::pair{2, 0.0}, {3, -1.0}}) {
    const LabCase c{LabCheck::CosExpansion, 0.0, kernel(n, g, 0.5, KineticVariant::MollifiedSoft)};
    const auto fc = calibrate(c, 1000, 3);
    CHECK(fc.bounded);
    CHECK(fc.sample_extreme < fc.value);
    CHECK(fc.value == doctest::Approx(std::pow(2.0, 0.5 * (n + g)) - 1.0).epsilon(1e-12));
  }
  const LabCase d1{LabCheck::Diffpoids1, 4.0, maxwell()};
  CHECK(calibrate(d1, 1000, 3).bounded);
}

TEST_CASE("second-order ratio has no finite supremum") {
  const LabCase d2{LabCheck::Diffpoids2, 4.0, maxwell()};
  const auto fc = calibrate(d2, 1000, 3);
  CHECK_FALSE(fc.bounded);
  CHECK(fc.value > 100.0 * fc.sample_extreme);
}

TEST_CASE("strong singularity at q = 4 against the averaged polynomial") {
  // <v + u>^4 - <v>^4 = 2 c d + d^2 with d = 2 v.u + |u|^2; average the azimuth in closed form
  const auto b = full_part(kernel(3, -1.0, 1.5, KineticVariant::PowerSoft));
  const Eigen::Vector3d v(1.0, -2.0, 0.5), vs(0.0, 3.0, 1.0);
  const Eigen::Vector3d z = v - vs;
  const double zn = z.norm(), ae = v.dot(z) / zn, ap2 = v.squaredNorm() - ae * ae;
  const double c = 1.0 + v.squaredNorm();
  auto avg = [&](double th) {
    const double s2 = std::sin(0.5 * th) * std::sin(0.5 * th), st = std::sin(th);
    const double uu = zn * zn * s2;
    const double au = -zn * s2 * ae;  // mean of v.u
    const double au2 = zn * zn * (s2 * s2 * ae * ae + 0.125 * st * st * ap2);  // mean of (v.u)^2
    const double d = 2.0 * au + uu;
    const double d2 = 4.0 * au2 + 4.0 * au * uu + uu * uu;
    return 2.0 * c * d + d2;
  };
  // theta = t^2 absorbs the theta^{-1/2} endpoint behaviour
  const double expect = std::abs(integrate_adaptive(
      [&](double t) { return 2.0 * t * b(t * t) * std::sin(t * t) * 2.0 * pi * avg(t * t); }, 0.0,
      std::sqrt(pi / 2), 1e-12));
  const auto cv = check_diffpoids(2, v, vs, 4.0, b);
  CHECK(std::isfinite(cv.lhs));
  CHECK(cv.lhs == doctest::Approx(expect).epsilon(1e-8));
}

TEST_CASE("default battery covers every variant") {
  const auto battery = default_battery();
  std::set<KineticVariant> variants;
  std::set<LabCheck> checks;
  for (const auto& c : battery) {
    CHECK_NOTHROW(validate(c));
    variants.insert(c.kernel.kinetic.variant);
    checks.insert(c.check);
  }
  CHECK(variants.size() == 4);
  CHECK(checks.size() == 4);
  CHECK(parse_lab_check(to_string(LabCheck::Povzner)) == LabCheck::Povzner);
  CHECK_THROWS_AS(parse_lab_check("nope"), ConfigError);
}
