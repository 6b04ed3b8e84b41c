#include "boltzstab/inequality_lab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "boltzstab/errors.hpp"
#include "boltzstab/quadrature.hpp"

namespace boltzstab {

namespace {

constexpr double kPi = std::numbers::pi;

struct Frame {
  Eigen::VectorXd e;                 // unit (v - v_*)
  std::vector<Eigen::VectorXd> perp;  // orthonormal complement
};

Frame frame_of(const Eigen::VectorXd& z) {
  Frame fr;
  const int n = static_cast<int>(z.size());
  fr.e = z / z.norm();
  if (n == 2) {
    Eigen::VectorXd p(2);
    p << -fr.e[1], fr.e[0];
    fr.perp.push_back(p);
    return fr;
  }
  int axis = 0;
  for (int a = 1; a < n; ++a)
    if (std::abs(fr.e[a]) < std::abs(fr.e[axis])) axis = a;
  Eigen::VectorXd a1 = Eigen::VectorXd::Zero(n);
  a1[axis] = 1.0;
  a1 -= a1.dot(fr.e) * fr.e;
  a1.normalize();
  Eigen::Vector3d c = Eigen::Vector3d(fr.e).cross(Eigen::Vector3d(a1));
  fr.perp.push_back(a1);
  fr.perp.push_back(Eigen::VectorXd(c));
  return fr;
}

/// Unit directions n orthogonal to e with their azimuthal weights (sum = |S^{N-2}|).
void azimuths(const Frame& fr, int points, std::vector<Eigen::VectorXd>& dirs,
              std::vector<double>& w) {
  dirs.clear();
  w.clear();
  if (fr.perp.size() == 1) {
    dirs.push_back(fr.perp[0]);
    dirs.push_back(-fr.perp[0]);
    w.assign(2, 1.0);
    return;
  }
  for (int k = 0; k < points; ++k) {
    const double ph = 2.0 * kPi * (k + 0.5) / points;
    dirs.push_back(std::cos(ph) * fr.perp[0] + std::sin(ph) * fr.perp[1]);
    w.push_back(2.0 * kPi / points);
  }
}

/// <a + u>^q - <a>^q without cancellation.
double bracket_power_difference(const Eigen::VectorXd& a, const Eigen::VectorXd& u, double q) {
  const double c = 1.0 + a.squaredNorm();
  const double delta = 2.0 * a.dot(u) + u.squaredNorm();
  return std::pow(c, 0.5 * q) * std::expm1(0.5 * q * std::log1p(delta / c));
}

/// Displacement v' - v at deviation theta along azimuth n.
Eigen::VectorXd displacement(double zn, const Frame& fr, const Eigen::VectorXd& n, double theta) {
  const double s2 = std::sin(0.5 * theta);
  return zn * (-s2 * s2 * fr.e + 0.5 * std::sin(theta) * n);
}

constexpr int kGauss = 8;

struct GaussRule {
  double x[kGauss], w[kGauss];
  GaussRule() { gauss_legendre(kGauss, x, w); }
};

const GaussRule& rule() {
  static const GaussRule r;
  return r;
}

template <class G>
double band(const G& g, double a, double b) {
  const GaussRule& r = rule();
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double s = 0.0;
  for (int i = 0; i < kGauss; ++i) s += r.w[i] * g(c + h * r.x[i]);
  return s * h;
}

/// Integral over the support of an angular part; dyadic bands with a geometric tail toward 0.
template <class G>
double integrate_part(const AngularPart& b, const G& g) {
  if (b.lo > 0.0) {
    double s = 0.0;
    const int panels = 8;
    const double r = std::pow(b.hi / b.lo, 1.0 / panels);
    double a = b.lo;
    for (int k = 0; k < panels; ++k) {
      const double e = k + 1 == panels ? b.hi : a * r;
      s += band(g, a, e);
      a = e;
    }
    return s;
  }
  double sum = 0.0, prev = 0.0;
  double top = b.hi;
  for (int m = 0; m < 400; ++m) {
    const double bottom = 0.5 * top;
    const double c = band(g, bottom, top);
    sum += c;
    if (m >= 4 && prev != 0.0) {
      const double r = c / prev;
      if (r > 0.0 && r < 0.95) {
        const double tail = c * r / (1.0 - r);
        if (std::abs(tail) <= 1e-13 * std::abs(sum)) return sum + tail;
      }
      if (c == 0.0) return sum;
    }
    prev = c;
    top = bottom;
  }
  return sum;
}

/**
 * (1 + a + b)^p + (1 + a - b)^p - 2. The odd powers of b cancel in closed form, so the
 * result stays accurate when b is first order and a second order in a small parameter.
 */
double even_power_sum(double a, double b, double p) {
  const double y = 1.0 + a;
  const double x = b / y;
  if (std::abs(x) >= 0.25)
    return std::expm1(p * std::log1p(a + b)) + std::expm1(p * std::log1p(a - b));
  const double x2 = x * x;
  double coef = p * (p - 1.0) / 2.0, pw = x2, series = 0.0;
  for (int k = 2; k < 80; k += 2) {
    const double term = coef * pw;
    series += term;
    if (std::abs(term) <= 1e-17 * std::abs(series)) break;
    coef *= (p - k) * (p - k - 1.0) / ((k + 1.0) * (k + 2.0));
    pw *= x2;
  }
  return 2.0 * std::expm1(p * std::log1p(a)) + 2.0 * std::pow(y, p) * series;
}

double moment_of(const AngularPart& b, int order) {
  const double m = angular_moment(b, order);
  if (!std::isfinite(m))
    throw InapplicableError("angular moment m_" + std::to_string(order) + " diverges");
  return m;
}

}  // namespace

std::string to_string(LabCheck c) {
  switch (c) {
    case LabCheck::Diffpoids1: return "diffpoids1";
    case LabCheck::Diffpoids2: return "diffpoids2";
    case LabCheck::Povzner: return "povzner";
    case LabCheck::CosExpansion: return "cos_expansion";
  }
  return "unknown";
}

LabCheck parse_lab_check(const std::string& name) {
  if (name == "diffpoids1") return LabCheck::Diffpoids1;
  if (name == "diffpoids2") return LabCheck::Diffpoids2;
  if (name == "povzner") return LabCheck::Povzner;
  if (name == "cos_expansion") return LabCheck::CosExpansion;
  throw ConfigError("unknown lab check '" + name + "'");
}

namespace {

double diffpoids_lhs(const Eigen::VectorXd& v, const Eigen::VectorXd& v_star, double q,
                     const AngularPart& b, bool swap) {
  const Eigen::VectorXd z = v - v_star;
  const double zn = z.norm();
  if (zn == 0.0) return 0.0;
  const int n = static_cast<int>(v.size());
  const Frame fr = frame_of(z);
  const Eigen::VectorXd& base = swap ? v_star : v;
  const double c = 1.0 + base.squaredNorm();
  const double ae = (swap ? -1.0 : 1.0) * base.dot(fr.e);
  // azimuths come in pairs n, -n; keep a . n for one of each pair
  double an[4];
  int pairs;
  double w;
  if (n == 2) {
    an[0] = base.dot(fr.perp[0]);
    pairs = 1;
    w = 1.0;
  } else {
    const double a0 = base.dot(fr.perp[0]), a1 = base.dot(fr.perp[1]);
    pairs = 4;
    w = 2.0 * kPi / 8;
    for (int k = 0; k < pairs; ++k) {
      const double ph = 2.0 * kPi * (k + 0.5) / 8;
      an[k] = std::cos(ph) * a0 + std::sin(ph) * a1;
    }
  }
  const double p = 0.5 * q;
  const double scale = std::pow(c, p);
  auto g = [&](double theta) {
    const double s2 = std::sin(0.5 * theta);
    const double st = std::sin(theta);
    const double a = zn * s2 * s2 * (zn - 2.0 * ae) / c;
    double acc = 0.0;
    for (int k = 0; k < pairs; ++k) acc += even_power_sum(a, st * zn * an[k] / c, p);
    const double jac = n == 2 ? 1.0 : st;
    return b(theta) * jac * w * scale * acc;
  };
  return std::abs(integrate_part(b, g));
}

}  // namespace

CheckValue check_diffpoids(int order, const Eigen::VectorXd& v, const Eigen::VectorXd& v_star,
                           double q, const AngularPart& b, bool swap) {
  if (order != 1 && order != 2) throw DomainError("order must be 1 or 2");
  if (order == 1 && q < 2.0) throw InapplicableError("first-order bound needs q >= 2");
  if (order == 2 && q < 4.0) throw InapplicableError("second-order bound needs q >= 4");
  if (v.size() != b.angular.dimension || v_star.size() != v.size())
    throw UsageError("velocity dimension mismatch");
  const double m = moment_of(b, order);
  CheckValue out;
  out.lhs = diffpoids_lhs(v, v_star, q, b, swap);
  const double bv = std::sqrt(1.0 + v.squaredNorm());
  const double bs = std::sqrt(1.0 + v_star.squaredNorm());
  out.rhs_core = m * std::pow((v - v_star).norm(), order) *
                 (std::pow(bv, q - order) + std::pow(bs, q - order));
  return out;
}

Eigen::VectorXd first_order_drift(const Eigen::VectorXd& v, const Eigen::VectorXd& v_star,
                                  const AngularPart& b) {
  const Eigen::VectorXd z = v - v_star;
  const int n = static_cast<int>(v.size());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  const double zn = z.norm();
  if (zn == 0.0) return out;
  const Frame fr = frame_of(z);
  std::vector<Eigen::VectorXd> dirs;
  std::vector<double> w;
  azimuths(fr, 8, dirs, w);
  for (int a = 0; a < n; ++a) {
    auto g = [&](double theta) {
      double acc = 0.0;
      for (std::size_t k = 0; k < dirs.size(); ++k)
        acc += w[k] * displacement(zn, fr, dirs[k], theta)[a];
      return b(theta) * std::pow(std::sin(theta), n - 2) * acc;
    };
    out[a] = integrate_part(b, g);
  }
  return out;
}

PovznerValue check_povzner(const Eigen::VectorXd& v, const Eigen::VectorXd& v_star, double theta,
                           double q, int azimuth_points) {
  if (!(theta >= 0.0 && theta <= 0.5 * kPi)) throw DomainError("theta outside [0, pi/2]");
  PovznerValue out;
  const double bv = std::sqrt(1.0 + v.squaredNorm());
  const double bs = std::sqrt(1.0 + v_star.squaredNorm());
  const double cs = 0.5 * std::sin(theta);
  out.gain = std::pow(2.0, q + 1.0) * (std::pow(bv, q - 1.0) * bs + std::pow(bs, q - 1.0) * bv) * cs;
  out.damp = (std::pow(bv, q) + std::pow(bs, q)) * cs * cs;
  const Eigen::VectorXd z = v - v_star;
  const double zn = z.norm();
  if (zn == 0.0 || theta == 0.0) return out;
  const Frame fr = frame_of(z);
  std::vector<Eigen::VectorXd> dirs;
  std::vector<double> w;
  azimuths(fr, azimuth_points, dirs, w);
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& nv : dirs) {
    const Eigen::VectorXd u = displacement(zn, fr, nv, theta);
    const double l = bracket_power_difference(v, u, q) + bracket_power_difference(v_star, -u, q);
    best = std::max(best, l);
  }
  out.lhs = best;
  return out;
}

CheckValue check_cos_expansion(double theta, int dimension, double gamma) {
  if (!(theta >= 0.0 && theta <= 0.5 * kPi)) throw DomainError("theta outside [0, pi/2]");
  if (!(dimension + gamma > 0.0)) throw DomainError("needs N + gamma > 0");
  CheckValue out;
  const double c = std::cos(0.5 * theta);
  out.lhs = std::abs(std::expm1(-(dimension + gamma) * std::log(c)));
  const double s = std::sin(0.5 * theta);
  out.rhs_core = 2.0 * s * s;
  return out;
}

void validate(const LabCase& c) {
  validate(c.kernel);
  const double nu = c.kernel.angular.nu;
  switch (c.check) {
    case LabCheck::Diffpoids1:
      if (c.q < 2.0) throw InapplicableError("diffpoids1 needs q >= 2");
      if (nu >= 1.0) throw InapplicableError("diffpoids1 needs nu < 1 (m_1 finite)");
      break;
    case LabCheck::Diffpoids2:
      if (c.q < 4.0) throw InapplicableError("diffpoids2 needs q >= 4");
      break;
    case LabCheck::Povzner:
      if (!(c.q > 2.0)) throw InapplicableError("povzner needs q > 2");
      break;
    case LabCheck::CosExpansion:
      break;
  }
}

namespace {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do u1 = uniform();
    while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * kPi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * kPi * u2);
  }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

constexpr double kSpeedCap = 50.0;

Eigen::VectorXd draw_velocity(Rng& rng, int n) {
  Eigen::VectorXd v(n);
  const bool heavy = rng.uniform() < 0.1;
  for (int a = 0; a < n; ++a) v[a] = rng.normal();
  if (heavy) {
    const double nv = v.norm();
    const double radius = kSpeedCap * rng.uniform();
    if (nv > 0.0) v *= radius / nv;
  } else {
    v *= 2.0;
  }
  return v;
}

}  // namespace

std::vector<LabSample> draw_samples(int dimension, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<LabSample> out(count);
  for (auto& s : out) {
    s.v = draw_velocity(rng, dimension);
    s.v_star = draw_velocity(rng, dimension);
    s.theta = 0.5 * kPi * rng.uniform();
  }
  return out;
}

namespace {

struct Evaluated {
  double ratio;  // lhs/core or (gain - lhs)/damp
  bool vacuous;
  double lhs, core;  // for scoring
  PovznerValue pv;
};

Evaluated evaluate(const LabCase& c, const LabSample& s, const AngularPart& part) {
  Evaluated e{0.0, false, 0.0, 0.0, {}};
  switch (c.check) {
    case LabCheck::Diffpoids1:
    case LabCheck::Diffpoids2: {
      const CheckValue cv =
          check_diffpoids(c.check == LabCheck::Diffpoids1 ? 1 : 2, s.v, s.v_star, c.q, part);
      e.lhs = cv.lhs;
      e.core = cv.rhs_core;
      e.vacuous = cv.rhs_core == 0.0;
      e.ratio = e.vacuous ? 0.0 : cv.lhs / cv.rhs_core;
      break;
    }
    case LabCheck::CosExpansion: {
      const CheckValue cv = check_cos_expansion(s.theta, c.kernel.dimension(), c.kernel.kinetic.gamma);
      e.lhs = cv.lhs;
      e.core = cv.rhs_core;
      e.vacuous = cv.rhs_core == 0.0;
      e.ratio = e.vacuous ? 0.0 : cv.lhs / cv.rhs_core;
      break;
    }
    case LabCheck::Povzner: {
      e.pv = check_povzner(s.v, s.v_star, s.theta, c.q);
      e.vacuous = e.pv.damp == 0.0;
      e.ratio = e.vacuous ? 0.0 : (e.pv.gain - e.pv.lhs) / e.pv.damp;
      break;
    }
  }
  return e;
}

AngularPart lab_part(const LabCase& c) {
  CollisionKernel k = c.kernel;
  if (!k.symmetrized) k = symmetrize(k);
  return full_part(k);
}

}  // namespace

namespace {

double objective(const LabCase& c, const LabSample& s, const AngularPart& part) {
  const Evaluated e = evaluate(c, s, part);
  if (e.vacuous) return -std::numeric_limits<double>::infinity();
  return c.check == LabCheck::Povzner ? -e.ratio : e.ratio;
}

struct Ascent {
  double value;
  bool converged;
};

/**
 * Hooke-Jeeves search on (v, v_*, theta) from a sample, kept inside the sampled region
 * |v|, |v_*| <= kSpeedCap and theta in [0, pi/2]. Gains below 1e-12 relative are rounding
 * and rejected. Converged when the best value moved by at most 1e-3 relative over the last
 * ten step halvings, or over the second half of the evaluations if the budget runs out.
 */
Ascent ascend(const LabCase& c, const AngularPart& part, const LabSample& start, double f0) {
  const int n = static_cast<int>(start.v.size());
  const int dim = 2 * n + 1;
  std::vector<int> coords;
  if (c.check != LabCheck::CosExpansion)
    for (int i = 0; i < 2 * n; ++i) coords.push_back(i);
  if (c.check == LabCheck::Povzner || c.check == LabCheck::CosExpansion) coords.push_back(2 * n);
  constexpr int kHalvings = 40, kBudget = 6000;
  int evals = 0;
  auto better = [](double a, double b) { return a > b + 1e-12 * std::abs(b); };
  auto pack = [&](const LabSample& s) {
    Eigen::VectorXd x(dim);
    x << s.v, s.v_star, s.theta;
    return x;
  };
  auto clamp = [&](Eigen::VectorXd x) {
    for (int k = 0; k < 2; ++k) {
      auto seg = x.segment(k * n, n);
      const double r = seg.norm();
      if (r > kSpeedCap) seg *= kSpeedCap / r;
    }
    x[2 * n] = std::clamp(x[2 * n], 0.0, 0.5 * kPi);
    return x;
  };
  auto value = [&](const Eigen::VectorXd& x) {
    ++evals;
    LabSample s;
    s.v = x.head(n);
    s.v_star = x.segment(n, n);
    s.theta = x[2 * n];
    return objective(c, s, part);
  };
  Eigen::VectorXd step(dim);
  step.head(2 * n).setConstant(0.5);
  step[2 * n] = 0.05;
  auto explore = [&](Eigen::VectorXd x, double& fx) {
    for (int i : coords) {
      for (double d : {1.0, -1.0}) {
        Eigen::VectorXd y = x;
        y[i] += d * step[i];
        y = clamp(y);
        const double fy = value(y);
        if (better(fy, fx)) {
          x = y;
          fx = fy;
          break;
        }
      }
    }
    return x;
  };
  Eigen::VectorXd base = pack(start);
  double fb = f0;
  std::vector<double> history, level{fb};  // best value per batch and per halving
  std::vector<int> at;
  int halvings = 0;
  while (halvings < kHalvings && evals < kBudget) {
    history.push_back(fb);
    at.push_back(evals);
    double fx = fb;
    Eigen::VectorXd x = explore(base, fx);
    if (!better(fx, fb)) {
      step *= 0.5;
      ++halvings;
      level.push_back(fb);
      continue;
    }
    while (better(fx, fb) && evals < kBudget) {
      const Eigen::VectorXd pattern = clamp(2.0 * x - base);
      base = x;
      fb = fx;
      double fp = value(pattern);
      const Eigen::VectorXd y = explore(pattern, fp);
      if (better(fp, fb)) {
        x = y;
        fx = fp;
      }
    }
  }
  double ref;
  if (halvings == kHalvings) {
    ref = level[kHalvings - 10];
  } else {
    const auto mid = std::upper_bound(at.begin(), at.end(), evals / 2) - at.begin() - 1;
    ref = history[static_cast<std::size_t>(std::max<std::ptrdiff_t>(mid, 0))];
  }
  return {fb, std::abs(fb - ref) <= 1e-3 * std::abs(fb)};
}

}  // namespace

FittedConstant calibrate(const LabCase& c, std::size_t sample_count, std::uint64_t seed) {
  validate(c);
  if (sample_count < 1000) throw ConfigError("calibration needs at least 1000 samples");
  const AngularPart part = lab_part(c);
  FittedConstant fc;
  fc.seed = seed;
  fc.samples = sample_count;
  fc.lower_bound = c.check == LabCheck::Povzner;
  std::vector<std::pair<double, LabSample>> top;
  const std::size_t starts = 8;
  for (const LabSample& s : draw_samples(c.kernel.dimension(), sample_count, seed)) {
    const double f = objective(c, s, part);
    if (f == -std::numeric_limits<double>::infinity()) {
      ++fc.vacuous;
      continue;
    }
    if (top.size() < starts || f > top.back().first) {
      if (top.size() == starts) top.pop_back();
      const auto at = std::find_if(top.begin(), top.end(), [&](const auto& e) { return f > e.first; });
      top.insert(at, {f, s});
    }
  }
  if (top.empty()) throw RunAbort("calibration failed: every sample was vacuous");
  const double sign = fc.lower_bound ? -1.0 : 1.0;
  fc.sample_extreme = sign * top.front().first;
  double best = top.front().first;
  for (const auto& [f, s] : top) {
    const Ascent a = ascend(c, part, s, f);
    best = std::max(best, a.value);
    fc.bounded = fc.bounded && a.converged;
  }
  fc.value = sign * best;
  return fc;
}

LabTally score(const LabCase& c, const FittedConstant& fitted, std::size_t sample_count,
               std::uint64_t seed, double slack) {
  validate(c);
  const AngularPart part = lab_part(c);
  LabTally t;
  t.samples = sample_count;
  bool first = true;
  for (const LabSample& s : draw_samples(c.kernel.dimension(), sample_count, seed)) {
    const Evaluated e = evaluate(c, s, part);
    double excess;
    if (c.check == LabCheck::Povzner) {
      const double scale = std::max(e.pv.gain, fitted.value * e.pv.damp);
      excess = scale > 0.0 ? (e.pv.lhs - e.pv.rhs(fitted.value)) / scale
                           : (e.pv.lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    } else {
      const double bound = fitted.value * e.core;
      excess = bound > 0.0 ? (e.lhs - bound) / bound : (e.lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    }
    if (!e.vacuous) {
      if (first) {
        t.max_ratio = e.ratio;
        first = false;
      } else {
        t.max_ratio = fitted.lower_bound ? std::min(t.max_ratio, e.ratio)
                                         : std::max(t.max_ratio, e.ratio);
      }
    }
    if (excess > slack) {
      ++t.violations;
      if (excess > t.worst_excess) {
        t.worst_excess = excess;
        t.worst = s;
      }
    }
  }
  return t;
}

std::vector<LabCase> default_battery() {
  struct K {
    KineticVariant variant;
    int dim;
    double gamma;
    double nu;
    bool only_second;
  };
  const K kernels[] = {
      {KineticVariant::MollifiedHard, 3, 0.5, 0.5, false},
      {KineticVariant::MollifiedSoft, 2, 0.0, 0.5, false},
      {KineticVariant::PowerHard, 2, 1.0, 0.5, false},
      {KineticVariant::PowerSoft, 3, -2.5, 0.5, false},
      {KineticVariant::PowerHard, 2, 0.5, 1.5, true},
      {KineticVariant::PowerSoft, 3, -1.0, 1.5, true},
  };
  std::vector<LabCase> out;
  for (const K& k : kernels) {
    CollisionKernel ck;
    ck.angular = {k.nu, 1.0, k.dim};
    ck.kinetic = {k.gamma, 1.0, k.variant, 1.0};
    if (!k.only_second) {
      for (double q : {2.0, 4.0, 6.0}) out.push_back({LabCheck::Diffpoids1, q, ck});
    }
    for (double q : {4.0, 6.0}) out.push_back({LabCheck::Diffpoids2, q, ck});
    if (!k.only_second) {
      for (double q : {4.0, 6.0}) out.push_back({LabCheck::Povzner, q, ck});
      out.push_back({LabCheck::CosExpansion, 0.0, ck});
    }
  }
  return out;
}

LabRow run_lab_case(const LabCase& c, std::size_t calibration_samples, std::uint64_t seed_a,
                    std::size_t scoring_samples, std::uint64_t seed_b, double slack) {
  LabRow row;
  row.lab_case = c;
  row.fitted = calibrate(c, calibration_samples, seed_a);
  row.tally = score(c, row.fitted, scoring_samples, seed_b, slack);
  return row;
}

}  // namespace boltzstab
