#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "boltzstab/errors.hpp"
#include "boltzstab/phase_space.hpp"

using namespace boltzstab;
using std::numbers::pi;

namespace {

Distribution standard(int n = 64) {
  return maxwellian(make_grid(2, 8.0, n), 1.0, Eigen::Vector2d::Zero(), 1.0);
}

}  // namespace

TEST_CASE("grid layout") {
  const auto g = make_grid(2, 8.0, 48);
  CHECK(g->spacing() == doctest::Approx(16.0 / 48));
  CHECK(g->size() == 48 * 48);
  CHECK(g->coordinate(24) == 0.0);
  const auto idx = g->multi_index(g->flat_index({3, 7, 0}));
  CHECK(idx[0] == 3);
  CHECK(idx[1] == 7);
  CHECK(g->velocity(g->flat_index({24, 25, 0}))(1) == doctest::Approx(g->spacing()));
}

TEST_CASE("weighted norms") {
  const auto g = make_grid(2, 8.0, 32);
  Eigen::ArrayXd zero = Eigen::ArrayXd::Zero(g->size());
  for (double p : {1.0, 2.0, kInfinity})
    for (double s : {0.0, 2.0}) CHECK(lp_norm(*g, zero, p, s) == 0.0);

  Eigen::ArrayXd spike = zero;
  spike(g->flat_index({16, 16, 0})) = 1.0;
  CHECK(lp_norm(*g, spike, 1.0, 2.0) == doctest::Approx(g->cell_volume()));

  CHECK(lp_norm(standard(), 1.0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("sobolev norms") {
  const auto f = standard();
  const auto& g = *f.grid;
  // ||d_1 e^{-|v|^2/2}||_{L^1} = int |v1| e^{-v1^2/2} dv1 int e^{-v2^2/2} dv2 = 2 sqrt(2 pi)
  const Eigen::ArrayXd e = (-0.5 * g.speed_squared()).exp();
  const double d1 = lp_norm(g, partial(g, e, 0), 1.0);
  CHECK(d1 == doctest::Approx(2.0 * std::sqrt(2 * pi)).epsilon(0.01));

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 20; ++i) {
    Eigen::ArrayXd r(g.size());
    for (auto& x : r) x = u(rng);
    CHECK(sobolev_norm(g, r, 0, 1.0, 1.0) == doctest::Approx(lp_norm(g, r, 1.0, 1.0)));
  }

  Eigen::ArrayXd c = Eigen::ArrayXd::Constant(g.size(), 3.0);
  const Eigen::ArrayXd dc = partial(g, c, 1);
  CHECK(dc.abs().maxCoeff() < 1e-12);
}

TEST_CASE("moments") {
  const auto g = make_grid(2, 8.0, 64);
  Eigen::ArrayXd point = Eigen::ArrayXd::Zero(g->size());
  const int one = 32 + static_cast<int>(std::lround(1.0 / g->spacing()));
  point(g->flat_index({one, 32, 0})) = 1.0 / g->cell_volume();
  const double x = g->coordinate(one);
  const auto m = moments(*g, point);
  CHECK(m.mass == doctest::Approx(1.0));
  CHECK(m.momentum(0) == doctest::Approx(x));
  CHECK(m.energy == doctest::Approx(x * x));

  const auto s = moments(standard());
  CHECK(s.mass == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(std::abs(s.momentum(0)) < 1e-12);
  CHECK(std::abs(s.momentum(1)) < 1e-12);
  CHECK(s.energy == doctest::Approx(2.0).epsilon(1e-4));

  const Eigen::Vector2d u(0.5, -0.25);
  const auto d = moments(maxwellian(g, 1.0, u, 1.0));
  CHECK(d.momentum(0) == doctest::Approx(0.5).epsilon(1e-4));
  CHECK(d.momentum(1) == doctest::Approx(-0.25).epsilon(1e-4));
  CHECK(d.energy == doctest::Approx(u.squaredNorm() + 2.0).epsilon(1e-4));
}

TEST_CASE("entropy") {
  CHECK(entropy(standard()) == doctest::Approx(-(1 + std::log(2 * pi))).epsilon(1e-3));

  const auto g = make_grid(2, 4.0, 16);
  Eigen::ArrayXd box = Eigen::ArrayXd::Zero(g->size());
  const int cells = 16;
  for (int k = 0; k < cells; ++k) box(k) = 1.0 / (cells * g->cell_volume());
  const Distribution f(g, box);
  CHECK(entropy(f) == doctest::Approx(std::log(1.0 / (cells * g->cell_volume()))));

  const auto m = standard(32);
  const Distribution twice(m.grid, 2.0 * m.values);
  CHECK(entropy(twice) ==
        doctest::Approx(2 * entropy(m) + 2 * moments(m).mass * std::log(2.0)));

  Eigen::ArrayXd neg = m.values;
  neg(0) = -1e-3;
  CHECK_THROWS_AS(entropy(Distribution(m.grid, neg)), DomainError);
}

TEST_CASE("maxwellians") {
  const auto g = make_grid(2, 8.0, 64);
  const Eigen::Vector2d u(g->coordinate(40), g->coordinate(30));
  const auto m = maxwellian(g, 2.0, u, 0.5);
  CHECK(m.values(g->flat_index({40, 30, 0})) == doctest::Approx(2.0 / (2 * pi * 0.5)));

  InitialData bi;
  bi.shape = "bimodal";
  bi.temperature = 0.5;
  const auto f = make_initial(g, bi);
  const auto mm = matching_maxwellian(f);
  const auto a = moments(f);
  const auto b = moments(mm);
  CHECK(b.mass == doctest::Approx(a.mass).epsilon(1e-12));
  CHECK(b.energy == doctest::Approx(a.energy).epsilon(1e-12));
  CHECK(std::abs(b.momentum(0) - a.momentum(0)) < 1e-12);
}

TEST_CASE("initial data match closed-form moments") {
  const auto g = make_grid(2, 8.0, 64);
  InitialData bi;
  bi.shape = "bimodal";
  bi.temperature = 0.5;
  InitialData an;
  an.shape = "anisotropic";
  an.temperatures = {2.0, 0.5};
  InitialData bump;
  bump.shape = "bump";
  for (const auto& spec : {bi, an, bump}) {
    const auto f = make_initial(g, spec);
    const auto exact = exact_moments(spec, 2);
    const auto m = moments(f);
    CHECK(m.mass == doctest::Approx(exact.mass).epsilon(1e-4));
    CHECK(m.energy == doctest::Approx(exact.energy).epsilon(1e-3));
    CHECK((f.values >= 0.0).all());
  }
}

TEST_CASE("interpolation") {
  const auto f = standard(32);
  const auto& g = *f.grid;
  const Eigen::Index k = g.flat_index({10, 20, 0});
  for (int order : {1, 3})
    CHECK(interpolate(f, g.velocity(k), order) == doctest::Approx(f.values(k)).epsilon(1e-13));

  const double h = g.spacing();
  const Eigen::Vector2d mid = g.velocity(k) + Eigen::Vector2d(h / 2, h / 2);
  const double avg = 0.25 * (f.values(k) + f.values(g.flat_index({11, 20, 0})) +
                             f.values(g.flat_index({10, 21, 0})) +
                             f.values(g.flat_index({11, 21, 0})));
  CHECK(interpolate(f, mid, 1) == doctest::Approx(avg).epsilon(1e-13));
  CHECK(interpolate(f, Eigen::Vector2d(9.0, 9.0), 1) == 0.0);
  CHECK(interpolate(f, Eigen::Vector2d(9.0, 9.0), 3) == 0.0);
}

TEST_CASE("checkpoint round trip") {
  const auto f = standard(16);
  std::stringstream ss;
  write_checkpoint(ss, f);
  const auto r = read_checkpoint(ss);
  CHECK(*r.grid == *f.grid);
  CHECK((r.values == f.values).all());
  CHECK(r.time == f.time);
}

TEST_CASE("perturbations carry no conserved moments") {
  const auto g = make_grid(2, 8.0, 48);
  InitialData bi;
  bi.shape = "bimodal";
  const auto f = make_initial(g, bi);
  for (const char* shape : {"tilt", "cosine", "radial", "odd-cubic"}) {
    const Eigen::ArrayXd d = make_perturbation(f, Perturbation{shape, 0.05});
    const auto m = moments(*g, d);
    CAPTURE(shape);
    CHECK(std::abs(m.mass) < 1e-13);
    CHECK(m.momentum.cwiseAbs().maxCoeff() < 1e-13);
    CHECK(std::abs(m.energy) < 1e-12);
    CHECK(lp_norm(*g, d, 1.0) > 0.0);
    CHECK(((f.values + d) >= 0.0).all());
  }
}
