#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "boltzstab/collision.hpp"
#include "boltzstab/errors.hpp"
#include "boltzstab/quadrature.hpp"

using namespace boltzstab;
using std::numbers::pi;

namespace {

CollisionKernel maxwell_kernel() {
  CollisionKernel k;
  k.angular = {0.5, 1.0, 2};
  k.kinetic = {0.0, 1.0, KineticVariant::MollifiedSoft, 1.0};
  return k;
}

CollisionKernel hard_sphere() {
  CollisionKernel k = maxwell_kernel();
  k.kinetic = {1.0, 1.0, KineticVariant::PowerHard, 1.0};
  return k;
}

QuadratureSpec quad(int n_theta = 6) {
  QuadratureSpec q;
  q.eps = 0.1;
  q.n_theta = n_theta;
  return q;
}

Distribution bimodal(GridPtr g) {
  InitialData d;
  d.shape = "bimodal";
  d.temperature = 0.5;
  return make_initial(g, d);
}

double moment_defect(const VelocityGrid& g, const Eigen::ArrayXd& q) {
  const auto m = moments(g, q);
  return std::max({std::abs(m.mass), m.momentum.cwiseAbs().maxCoeff(), std::abs(m.energy)});
}

}  // namespace

TEST_CASE("polar node weights integrate the kernel") {
  const auto k = symmetrize(maxwell_kernel());
  const auto q = quad(8);
  const auto nodes = polar_nodes(k, q);
  REQUIRE(nodes.theta.size() == 8);
  CHECK(nodes.theta.front() == doctest::Approx(0.1));
  CHECK(nodes.theta.back() == doctest::Approx(pi / 2));
  double s = 0;
  for (double w : nodes.weight) s += w;
  const double ref = integrate_adaptive([&](double t) { return eval_angular(k, t); }, 0.1, pi / 2,
                                        1e-13);
  CHECK(s == doctest::Approx(ref).epsilon(1e-11));

  QuadratureSpec geo = q;
  geo.geometric_ratio = std::sqrt(2.0);
  const auto g = polar_nodes(k, geo);
  for (std::size_t i = 1; i + 1 < g.theta.size(); ++i)
    CHECK(g.theta[i] / g.theta[i - 1] == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("quadrature validation") {
  const auto k = maxwell_kernel();
  QuadratureSpec q = quad();
  q.interpolation_order = 2;
  CHECK_THROWS_AS(validate(q, k), ConfigError);
  q = quad();
  q.eps = 0.0;
  CHECK_THROWS_AS(validate(q, k), ConfigError);
  CollisionKernel soft = k;
  soft.kinetic = {-0.5, 1.0, KineticVariant::PowerSoft, 1.0};
  CHECK_THROWS_AS(validate(quad(), soft), ConfigError);
}

TEST_CASE("equilibrium is annihilated") {
  const auto g = make_grid(2, 8.0, 48);
  const auto m = matching_maxwellian(bimodal(g));
  CollisionOperator op(maxwell_kernel(), g, quad());
  const auto r = op.eval_Q(m, m);
  CHECK(lp_norm(*g, r.values, 1.0) <= 1e-3 * r.gain_norm);
}

TEST_CASE("bilinear form at f = g and conservation") {
  const auto g = make_grid(2, 8.0, 32);
  const auto f = bimodal(g);
  CollisionOperator op(maxwell_kernel(), g, quad());
  const auto two = op.eval_Q(f, f);
  const auto one = op.eval_Q(f);
  CHECK(two.gain_norm == one.gain_norm);
  CHECK(two.loss_norm == one.loss_norm);
  CHECK((conserve_project(*g, two.values).values == one.values).all());
  CHECK(one.projected);
  CHECK(moment_defect(*g, one.values) < 1e-12);
  // adjoint form conserves before projection too, up to rounding
  CHECK(moment_defect(*g, two.values) < 1e-10 * two.gain_norm);
}

TEST_CASE("zero data") {
  const auto g = make_grid(2, 8.0, 24);
  const Distribution z(g, Eigen::ArrayXd::Zero(g->size()));
  CollisionOperator op(maxwell_kernel(), g, quad());
  CHECK(op.eval_Q(z).values.abs().maxCoeff() == 0.0);
  CHECK(op.eval_gain(z).abs().maxCoeff() == 0.0);
  CHECK(op.eval_loss_rate(z).abs().maxCoeff() == 0.0);
}

TEST_CASE("a lone point mass does not collide with itself") {
  const auto g = make_grid(2, 8.0, 32);
  Eigen::ArrayXd v = Eigen::ArrayXd::Zero(g->size());
  const Eigen::Index c = g->flat_index({16, 16, 0});
  v(c) = 1.0 / g->cell_volume();
  CollisionOperator op(hard_sphere(), g, quad());
  const Eigen::ArrayXd gain = op.eval_gain(Distribution(g, v));
  // v = v_* gives zero relative speed; with Phi(0) = 0 nothing moves
  CHECK(gain.abs().maxCoeff() == 0.0);
  CollisionOperator mx(maxwell_kernel(), g, quad());
  CHECK(mx.eval_gain(Distribution(g, v)).abs().maxCoeff() == 0.0);
  CHECK(mx.eval_Q(Distribution(g, v)).values.abs().maxCoeff() == 0.0);
}

TEST_CASE("gain mass equals loss mass") {
  const auto g = make_grid(2, 8.0, 24);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  CollisionOperator op(hard_sphere(), g, quad());
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::ArrayXd x(g->size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double r2 = g->speed_squared()(i);
      x(i) = u(rng) * std::exp(-0.5 * r2);
    }
    const Distribution f(g, x);
    // signed integrals: cubic taps make the gain slightly negative in places
    const double gain = op.eval_gain(f).sum();
    const double loss = (op.eval_loss_rate(f) * x).sum();
    CHECK(gain == doctest::Approx(loss).epsilon(1e-8));
  }
}

TEST_CASE("Maxwell loss rate is the mass of the other nodes") {
  const auto g = make_grid(2, 8.0, 32);
  const auto f = maxwellian(g, 1.0, Eigen::Vector2d::Zero(), 0.3);
  CollisionOperator op(maxwell_kernel(), g, quad());
  const Eigen::ArrayXd l = op.eval_loss_rate(f);
  const double mass = moments(f).mass;
  for (Eigen::Index i = 0; i < g->size(); ++i) {
    if (g->speed_squared()(i) >= 4.0) continue;
    const double expect = op.angular_mass() * (mass - f.values(i) * g->cell_volume());
    CHECK(l(i) == doctest::Approx(expect).epsilon(1e-10));
  }
}

TEST_CASE("hard-sphere loss rate from a point mass") {
  const auto g = make_grid(2, 8.0, 32);
  Eigen::ArrayXd v = Eigen::ArrayXd::Zero(g->size());
  v(g->flat_index({16, 16, 0})) = 1.0 / g->cell_volume();
  CollisionOperator op(hard_sphere(), g, quad());
  const Eigen::ArrayXd l = op.eval_loss_rate(Distribution(g, v));
  for (Eigen::Index i = 0; i < g->size(); ++i) {
    const double r = std::sqrt(g->speed_squared()(i));
    if (r < 5.0) CHECK(l(i) == doctest::Approx(r * op.angular_mass()).epsilon(1e-12));
  }
}

TEST_CASE("conservative projection") {
  const auto g = make_grid(2, 8.0, 24);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::ArrayXd q(g->size());
  for (auto& x : q) x = n(rng);
  const auto p = conserve_project(*g, q);
  CHECK(moment_defect(*g, p.values) < 1e-12);
  const auto again = conserve_project(*g, p.values);
  CHECK((again.values - p.values).abs().maxCoeff() < 1e-13);
  CHECK(again.correction_norm < 1e-12);
  const auto c = conserve_project(*g, Eigen::ArrayXd::Ones(g->size()));
  CHECK(std::abs(moments(*g, c.values).mass) < 1e-12);
}

TEST_CASE("entropy production") {
  const auto g = make_grid(2, 8.0, 48);
  CollisionOperator op(maxwell_kernel(), g, quad());
  const auto f = bimodal(g);
  const auto m = matching_maxwellian(f);
  const double pf = op.entropy_production(f).value;
  const double pm = op.entropy_production(m).value;
  CHECK(pf > 0.0);
  CHECK(std::abs(pm) <= 1e-6 * pf);
}

TEST_CASE("coercivity lower bound") {
  const auto g = make_grid(2, 4.0, 16);
  const auto s = maxwellian(g, 1.0, Eigen::Vector2d::Zero(), 0.5);
  const KineticKernel mx{0.0, 2.0, KineticVariant::MollifiedSoft, 1.0};
  const auto c = coercivity_lower_bound(s, mx);
  CHECK(c.c_hat == doctest::Approx(2.0 * moments(s).mass).epsilon(1e-13));
  const Distribution twice(g, 2.0 * s.values);
  CHECK(coercivity_lower_bound(twice, mx).c_hat == doctest::Approx(2.0 * c.c_hat));

  Eigen::ArrayXd v = Eigen::ArrayXd::Zero(g->size());
  v(g->flat_index({8, 8, 0})) = 1.0 / g->cell_volume();
  const KineticKernel hs{1.0, 1.0, KineticVariant::PowerHard, 1.0};
  const auto p = coercivity_lower_bound(Distribution(g, v), hs);
  CHECK(p.c_hat == 0.0);
  for (Eigen::Index i = 0; i < g->size(); ++i) {
    const double r = std::sqrt(g->speed_squared()(i));
    CHECK(p.profile(i) == doctest::Approx(r / g->bracket()(i)).epsilon(1e-12));
  }
}

TEST_CASE("cell averages of r^gamma") {
  Eigen::Vector2d far(10.0, 0.0);
  CHECK(cell_average_power(far, 0.1, -0.5) == doctest::Approx(std::pow(10.0, -0.5)).epsilon(1e-5));
  CHECK(cell_average_power(Eigen::Vector2d::Zero(), 0.2, 0.0) == doctest::Approx(1.0));
  // int over [-1,1]^2 of r^{-1}, closed form 8 asinh(1), divided by the area
  CHECK(cell_average_power(Eigen::Vector2d::Zero(), 2.0, -1.0) ==
        doctest::Approx(2.0 * std::asinh(1.0)).epsilon(1e-10));
  CHECK_THROWS_AS(cell_average_power(Eigen::Vector2d::Zero(), 1.0, -2.0), DomainError);
}
