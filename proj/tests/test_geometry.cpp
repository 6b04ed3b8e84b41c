#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

#include "boltzstab/geometry.hpp"

using namespace boltzstab;
using std::numbers::pi;
using Eigen::Vector2d;
using Eigen::Vector3d;

namespace {

struct Sampler {
  std::mt19937_64 rng;
  std::normal_distribution<double> n{0.0, 1.0};
  std::uniform_real_distribution<double> u{0.0, 1.0};

  explicit Sampler(std::uint64_t seed) : rng(seed) {}

  Eigen::VectorXd vec(int d) {
    Eigen::VectorXd x(d);
    for (int i = 0; i < d; ++i) x(i) = 2.0 * n(rng);
    return x;
  }
  Eigen::VectorXd unit(int d) { return vec(d).normalized(); }

  // sigma at deviation theta from z
  Eigen::VectorXd at_angle(const Eigen::VectorXd& z, double theta) {
    const Eigen::VectorXd e = z.normalized();
    Eigen::VectorXd t = vec(static_cast<int>(z.size()));
    t -= t.dot(e) * e;
    return std::cos(theta) * e + std::sin(theta) * t.normalized();
  }
};

}  // namespace

TEST_CASE("post-collision velocities") {
  const Vector2d v(1, 0), vs(-1, 0);
  auto same = post_collision(v, vs, Vector2d((v - vs).normalized()));
  CHECK((same.v - v).norm() < 1e-15);
  CHECK((same.v_star - vs).norm() < 1e-15);
  auto swapped = post_collision(v, vs, Vector2d(-(v - vs).normalized()));
  CHECK((swapped.v - vs).norm() < 1e-15);
  CHECK((swapped.v_star - v).norm() < 1e-15);
  auto r = post_collision(v, vs, Vector2d(0, 1));
  CHECK((r.v - Vector2d(0, 1)).norm() < 1e-15);
  CHECK((r.v_star - Vector2d(0, -1)).norm() < 1e-15);
  CHECK(r.v.squaredNorm() + r.v_star.squaredNorm() == doctest::Approx(2.0));

  Sampler s(1);
  for (int i = 0; i < 100; ++i) {
    const auto a = s.vec(3), b = s.vec(3), sg = s.unit(3);
    const auto p = post_collision(a, b, sg);
    CHECK((p.v + p.v_star - a - b).norm() < 1e-12);
    CHECK(p.v.squaredNorm() + p.v_star.squaredNorm() ==
          doctest::Approx(a.squaredNorm() + b.squaredNorm()).epsilon(1e-12));
    // involution: colliding back along the pre-collision direction
    const Eigen::VectorXd back = (a - b).normalized();
    const auto q = post_collision(p.v, p.v_star, back);
    CHECK((q.v - a).norm() < 1e-12);
    CHECK((q.v_star - b).norm() < 1e-12);
  }
}

TEST_CASE("deviation angle") {
  const Vector2d v(1, 0), vs(0, 0);
  CHECK(deviation_angle(v, vs, Vector2d(1, 0)) == doctest::Approx(0.0));
  CHECK(deviation_angle(v, vs, Vector2d(0, 1)) == doctest::Approx(pi / 2));
  CHECK(std::abs(deviation_angle(v, vs, Vector2d(std::cos(0.3), std::sin(0.3))) - 0.3) < 1e-12);
  CHECK_THROWS_AS(deviation_angle(v, v, Vector2d(1, 0)), DegenerateGeometryError);
}

TEST_CASE("inverse of v -> v'") {
  const Vector3d v(0.3, -1, 2), vs(1, 1, -0.5);
  const Vector3d e = (v - vs).normalized();
  CHECK((inverse_map_phi(v, vs, e) - v).norm() < 1e-14);
  CHECK_THROWS_AS(inverse_map_phi(v, vs, Vector3d(-e)), OutOfSupportError);

  Sampler s(2);
  int checked = 0;
  while (checked < 1000) {
    const auto a = s.vec(3), b = s.vec(3);
    const double theta = 0.5 * pi * s.u(s.rng) * 0.999;
    const auto sg = s.at_angle(a - b, theta);
    const auto p = post_collision(a, b, sg);
    const auto back = inverse_map_phi(p.v, b, sg);
    CHECK((back - a).norm() < 1e-10);
    // |vbar - v| = tan(theta/2) |v - v_*| with v the post-collision point
    const double lhs = (back - p.v).norm();
    const double rhs = std::tan(0.5 * theta) * (p.v - b).norm();
    CHECK(std::abs(lhs - rhs) < 1e-10);
    ++checked;
  }
}

TEST_CASE("2D change of variables v_* -> w") {
  const Vector2d v(0.4, -0.7), w(1.1, 0.2);
  auto id = vstar_of_w_2d(v, w, 0.0);
  CHECK((id.first - w).norm() < 1e-14);
  CHECK(id.second == doctest::Approx(1.0));
  CHECK(vstar_of_w_2d(v, w, pi / 2).second == doctest::Approx(0.5));
  CHECK_THROWS_AS(vstar_of_w_2d(v, w, 2.0), OutOfSupportError);

  Sampler s(3);
  const double theta = 0.3, h = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const Vector2d a = s.vec(2), b = s.vec(2);
    Eigen::Matrix2d jac;
    for (int c = 0; c < 2; ++c) {
      Vector2d d = Vector2d::Zero();
      d(c) = h;
      jac.col(c) = (w_of_vstar_2d(a, Vector2d(b + d), theta) -
                    w_of_vstar_2d(a, Vector2d(b - d), theta)) /
                   (2 * h);
    }
    const double c2 = std::pow(std::cos(theta / 2), 2);
    CHECK(std::abs(jac.determinant() - c2) < 1e-6);
    const auto inv = vstar_of_w_2d(a, w_of_vstar_2d(a, b, theta), theta);
    CHECK((inv.first - b).norm() < 1e-10);
    CHECK(inv.second == doctest::Approx(c2));
  }
}

TEST_CASE("N-D change of variables w -> v_*") {
  const Vector3d v(1, 0, 0), w(0, 1, 0);
  const Vector3d e = (v - w).normalized();
  auto r = vstar_of_w_nd(v, w, e);
  CHECK((r.first - w).norm() < 1e-14);
  CHECK(r.second == doctest::Approx(4.0));
  CHECK_THROWS_AS(vstar_of_w_nd(v, w, Vector3d(-e)), OutOfSupportError);

  Sampler s(4);
  const double h = 1e-6;
  int done = 0;
  while (done < 100) {
    const Eigen::VectorXd a = s.vec(3), b = s.vec(3);
    const double theta = 0.5 * pi * s.u(s.rng) * 0.9;
    const Eigen::VectorXd sg = s.at_angle(a - b, theta);
    const Eigen::VectorXd w2 = post_collision(a, b, sg).v_star;
    const auto rec = vstar_of_w_nd(a, w2, sg);
    CHECK((rec.first - b).norm() < 1e-10);

    Eigen::Matrix3d jac;
    for (int c = 0; c < 3; ++c) {
      Eigen::VectorXd d = Eigen::VectorXd::Zero(3);
      d(c) = h;
      jac.col(c) = (vstar_of_w_nd(a, Eigen::VectorXd(w2 + d), sg).first -
                    vstar_of_w_nd(a, Eigen::VectorXd(w2 - d), sg).first) /
                   (2 * h);
    }
    CHECK(std::abs(std::abs(jac.determinant()) - rec.second) < 1e-6 * std::max(1.0, rec.second));
    ++done;
  }
}

TEST_CASE("sigma decomposition") {
  const Vector3d v(1, 2, 3), w(0, 0, 1);
  const Vector3d e = (v - w).normalized();
  Vector3d n = e.unitOrthogonal();
  CHECK((sigma_decompose(v, w, 0.0, n) - e).norm() < 1e-15);
  CHECK((sigma_decompose(v, w, pi / 2, n) - n).norm() < 1e-15);
  CHECK_THROWS_AS(sigma_decompose(v, w, 0.3, e), DomainError);

  Sampler s(5);
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd a = s.vec(3), b = s.vec(3);
    const Eigen::VectorXd u = (a - b).normalized();
    const Eigen::VectorXd m = s.at_angle(u, pi / 2);
    const double t = pi * s.u(s.rng);
    const auto sg = sigma_decompose(a, b, t, m);
    CHECK(std::abs(sg.norm() - 1) < 1e-12);
    CHECK(std::abs(sg.dot(u) - std::cos(t)) < 1e-12);
  }
}

TEST_CASE("long double instantiation") {
  using V = Eigen::Matrix<long double, 2, 1>;
  const V v(1.0L, 0.5L), vs(-0.25L, 0.0L);
  const V sg = V(1.0L, 1.0L).normalized();
  const auto p = post_collision(v, vs, sg);
  CHECK(static_cast<double>((p.v + p.v_star - v - vs).norm()) < 1e-17);
}
