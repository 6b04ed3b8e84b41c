#include "boltzstab/phase_space.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "boltzstab/errors.hpp"
#include "boltzstab/kernel.hpp"
#include "boltzstab/quadrature.hpp"

namespace boltzstab {

namespace {

constexpr double kPi = std::numbers::pi;

double sum_of(const Eigen::ArrayXd& a) {
  return pairwise_sum(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())));
}

void check_same_size(const VelocityGrid& grid, const Eigen::ArrayXd& f) {
  if (f.size() != grid.size()) throw UsageError("array size does not match grid");
}

}  // namespace

VelocityGrid::VelocityGrid(int dimension, double half_width, int points_per_axis)
    : dim_(dimension), half_width_(half_width), n_(points_per_axis) {
  if (dim_ != 2 && dim_ != 3) throw ConfigError("grid dimension must be 2 or 3");
  if (!(half_width_ > 0.0)) throw ConfigError("half_width must be positive");
  if (n_ < 8 || n_ % 2 != 0) throw ConfigError("points_per_axis must be even and >= 8");
  h_ = 2.0 * half_width_ / n_;
  cell_volume_ = std::pow(h_, dim_);
  size_ = 1;
  for (int a = 0; a < dim_; ++a) size_ *= n_;
  Eigen::Index s = 1;
  for (int a = dim_ - 1; a >= 0; --a) {
    strides_[a] = s;
    s *= n_;
  }
  coords_.assign(dim_, Eigen::ArrayXd(size_));
  speed2_ = Eigen::ArrayXd::Zero(size_);
  for (Eigen::Index i = 0; i < size_; ++i) {
    for (int a = 0; a < dim_; ++a) {
      const int k = static_cast<int>((i / strides_[a]) % n_);
      coords_[a][i] = coordinate(k);
      speed2_[i] += coords_[a][i] * coords_[a][i];
    }
  }
  bracket_ = (1.0 + speed2_).sqrt();
}

Eigen::VectorXd VelocityGrid::velocity(Eigen::Index flat) const {
  Eigen::VectorXd v(dim_);
  for (int a = 0; a < dim_; ++a) v[a] = coords_[a][flat];
  return v;
}

std::array<int, 3> VelocityGrid::multi_index(Eigen::Index flat) const {
  std::array<int, 3> idx{0, 0, 0};
  for (int a = 0; a < dim_; ++a) idx[a] = static_cast<int>((flat / strides_[a]) % n_);
  return idx;
}

Eigen::Index VelocityGrid::flat_index(const std::array<int, 3>& idx) const {
  Eigen::Index f = 0;
  for (int a = 0; a < dim_; ++a) f += idx[a] * strides_[a];
  return f;
}

GridPtr make_grid(int dimension, double half_width, int points_per_axis) {
  return std::make_shared<const VelocityGrid>(dimension, half_width, points_per_axis);
}

Distribution::Distribution(GridPtr g, Eigen::ArrayXd v, double t)
    : grid(std::move(g)), values(std::move(v)), time(t) {
  if (!grid) throw UsageError("distribution without grid");
  check_same_size(*grid, values);
}

double lp_norm(const VelocityGrid& grid, const Eigen::ArrayXd& f, double p, double s) {
  check_same_size(grid, f);
  if (!(p >= 1.0)) throw DomainError("p must be >= 1");
  if (std::isinf(p)) {
    if (s == 0.0) return f.abs().maxCoeff();
    return (f.abs() * grid.bracket().pow(s)).maxCoeff();
  }
  Eigen::ArrayXd terms = f.abs();
  if (p != 1.0) terms = terms.pow(p);
  if (s != 0.0) terms *= grid.bracket().pow(p * s);
  const double total = sum_of(terms) * grid.cell_volume();
  return p == 1.0 ? total : std::pow(total, 1.0 / p);
}

double lp_norm(const Distribution& f, double p, double s) {
  return lp_norm(*f.grid, f.values, p, s);
}

Eigen::ArrayXd partial(const VelocityGrid& grid, const Eigen::ArrayXd& f, int axis) {
  check_same_size(grid, f);
  const int n = grid.points_per_axis();
  const Eigen::Index st = grid.stride(axis);
  const double inv = 1.0 / (2.0 * grid.spacing());
  const double inv4 = 1.0 / (12.0 * grid.spacing());
  Eigen::ArrayXd d(f.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    const int k = static_cast<int>((i / st) % n);
    if (k == 0)
      d[i] = (-3.0 * f[i] + 4.0 * f[i + st] - f[i + 2 * st]) * inv;
    else if (k == n - 1)
      d[i] = (3.0 * f[i] - 4.0 * f[i - st] + f[i - 2 * st]) * inv;
    else if (k == 1 || k == n - 2)
      d[i] = (f[i + st] - f[i - st]) * inv;
    else
      d[i] = (8.0 * (f[i + st] - f[i - st]) - (f[i + 2 * st] - f[i - 2 * st])) * inv4;
  }
  return d;
}

Eigen::ArrayXd second_partial(const VelocityGrid& grid, const Eigen::ArrayXd& f, int axis) {
  check_same_size(grid, f);
  const int n = grid.points_per_axis();
  const Eigen::Index st = grid.stride(axis);
  const double inv = 1.0 / (grid.spacing() * grid.spacing());
  Eigen::ArrayXd d(f.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    const int k = static_cast<int>((i / st) % n);
    if (k == 0)
      d[i] = (2.0 * f[i] - 5.0 * f[i + st] + 4.0 * f[i + 2 * st] - f[i + 3 * st]) * inv;
    else if (k == n - 1)
      d[i] = (2.0 * f[i] - 5.0 * f[i - st] + 4.0 * f[i - 2 * st] - f[i - 3 * st]) * inv;
    else
      d[i] = (f[i + st] - 2.0 * f[i] + f[i - st]) * inv;
  }
  return d;
}

double sobolev_norm(const VelocityGrid& grid, const Eigen::ArrayXd& f, int k, double p, double s) {
  if (k < 0 || k > 2) throw DomainError("sobolev order must be 0, 1 or 2");
  std::vector<double> parts;
  parts.push_back(lp_norm(grid, f, p, s));
  const int n = grid.dimension();
  if (k >= 1) {
    std::vector<Eigen::ArrayXd> first;
    for (int a = 0; a < n; ++a) {
      first.push_back(partial(grid, f, a));
      parts.push_back(lp_norm(grid, first.back(), p, s));
    }
    if (k == 2) {
      for (int a = 0; a < n; ++a) {
        parts.push_back(lp_norm(grid, second_partial(grid, f, a), p, s));
        for (int b = a + 1; b < n; ++b)
          parts.push_back(lp_norm(grid, partial(grid, first[b], a), p, s));
      }
    }
  }
  if (std::isinf(p)) {
    double m = 0.0;
    for (double x : parts) m = std::max(m, x);
    return m;
  }
  if (p == 1.0) return pairwise_sum(parts);
  double acc = 0.0;
  for (double x : parts) acc += std::pow(x, p);
  return std::pow(acc, 1.0 / p);
}

double sobolev_norm(const Distribution& f, int k, double p, double s) {
  return sobolev_norm(*f.grid, f.values, k, p, s);
}

double gradient_lp_norm(const VelocityGrid& grid, const Eigen::ArrayXd& f, double p, double s) {
  Eigen::ArrayXd g2 = Eigen::ArrayXd::Zero(f.size());
  for (int a = 0; a < grid.dimension(); ++a) g2 += partial(grid, f, a).square();
  return lp_norm(grid, g2.sqrt(), p, s);
}

Moments moments(const VelocityGrid& grid, const Eigen::ArrayXd& f) {
  check_same_size(grid, f);
  Moments m;
  const double hn = grid.cell_volume();
  m.mass = sum_of(f) * hn;
  m.momentum.resize(grid.dimension());
  for (int a = 0; a < grid.dimension(); ++a)
    m.momentum[a] = sum_of(f * grid.component(a)) * hn;
  m.energy = sum_of(f * grid.speed_squared()) * hn;
  return m;
}

Moments moments(const Distribution& f) { return moments(*f.grid, f.values); }

double entropy(const Distribution& f) {
  if (f.values.minCoeff() < 0.0) throw DomainError("entropy of a negative density");
  Eigen::ArrayXd t = (f.values > 0.0).select(f.values * f.values.max(1e-300).log(), 0.0);
  return sum_of(t) * f.grid->cell_volume();
}

Distribution maxwellian(GridPtr grid, double rho, const Eigen::VectorXd& u, double temperature) {
  if (!(rho > 0.0) || !(temperature > 0.0))
    throw DomainError("maxwellian needs rho > 0 and T > 0");
  const int n = grid->dimension();
  if (u.size() != n) throw UsageError("drift dimension mismatch");
  Eigen::ArrayXd r2 = Eigen::ArrayXd::Zero(grid->size());
  for (int a = 0; a < n; ++a) r2 += (grid->component(a) - u[a]).square();
  const double norm = rho * std::pow(2.0 * kPi * temperature, -0.5 * n);
  return Distribution(grid, norm * (-r2 / (2.0 * temperature)).exp());
}

Distribution matching_maxwellian(const Distribution& f) {
  const int n = f.grid->dimension();
  const Moments target = moments(f);
  if (!(target.mass > 0.0)) throw DomainError("matching maxwellian needs positive mass");
  auto params = [n](const Moments& m, double& rho, Eigen::VectorXd& u, double& t) {
    rho = m.mass;
    u = m.momentum / m.mass;
    t = (m.energy / m.mass - u.squaredNorm()) / n;
  };
  double rho, t;
  Eigen::VectorXd u;
  params(target, rho, u, t);
  const double rho_t = rho, t_t = t;
  const Eigen::VectorXd u_t = u;
  Distribution m = maxwellian(f.grid, rho, u, t);
  for (int it = 0; it < 30; ++it) {
    double rho_m, t_m;
    Eigen::VectorXd u_m;
    params(moments(m), rho_m, u_m, t_m);
    rho *= rho_t / rho_m;
    u += u_t - u_m;
    t *= t_t / t_m;
    m = maxwellian(f.grid, rho, u, t);
    if (std::abs(rho_m - rho_t) < 1e-15 * rho_t && std::abs(t_m - t_t) < 1e-15 * t_t &&
        (u_m - u_t).norm() < 1e-15)
      break;
  }
  m.time = f.time;
  return m;
}

namespace {

void tap_weights(double t, int order, double* w) {
  if (order == 1) {
    w[0] = 0.0;
    w[1] = 1.0 - t;
    w[2] = t;
    w[3] = 0.0;
  } else {
    w[0] = -t * (t - 1.0) * (t - 2.0) / 6.0;
    w[1] = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    w[2] = -(t + 1.0) * t * (t - 2.0) / 2.0;
    w[3] = (t + 1.0) * t * (t - 1.0) / 6.0;
  }
}

}  // namespace

double interpolate(const Distribution& f, const Eigen::VectorXd& v, int order) {
  const VelocityGrid& g = *f.grid;
  const int n = g.dimension();
  if (order != 1 && order != 3) throw DomainError("interpolation order must be 1 or 3");
  if (v.size() != n) throw UsageError("velocity dimension mismatch");
  const double L = g.half_width();
  for (int a = 0; a < n; ++a)
    if (!(v[a] >= -L && v[a] <= L)) return 0.0;
  int base[3];
  double w[3][4];
  for (int a = 0; a < n; ++a) {
    const double x = (v[a] + L) / g.spacing();
    base[a] = static_cast<int>(std::floor(x));
    tap_weights(x - base[a], order, w[a]);
  }
  const int np = g.points_per_axis();
  double acc = 0.0;
  const int combos = n == 2 ? 16 : 64;
  for (int c = 0; c < combos; ++c) {
    double weight = 1.0;
    Eigen::Index flat = 0;
    bool inside = true;
    int rest = c;
    for (int a = n - 1; a >= 0; --a) {
      const int t = rest % 4;
      rest /= 4;
      const int k = base[a] + t - 1;
      weight *= w[a][t];
      if (k < 0 || k >= np) inside = false;
      flat += static_cast<Eigen::Index>(k) * g.stride(a);
    }
    if (inside && weight != 0.0) acc += weight * f.values[flat];
  }
  return acc;
}

void write_checkpoint(std::ostream& os, const Distribution& f) {
  const VelocityGrid& g = *f.grid;
  os << "# boltzstab distribution: dimension half_width points_per_axis time\n";
  os << std::setprecision(17) << g.dimension() << ' ' << g.half_width() << ' '
     << g.points_per_axis() << ' ' << f.time << '\n';
  os << "index,value\n";
  for (Eigen::Index i = 0; i < f.values.size(); ++i) os << i << ',' << f.values[i] << '\n';
}

Distribution read_checkpoint(std::istream& is) {
  std::string line;
  do {
    if (!std::getline(is, line)) throw ConfigError("checkpoint: missing header");
  } while (!line.empty() && line[0] == '#');
  std::istringstream hdr(line);
  int dim = 0, n = 0;
  double L = 0.0, t = 0.0;
  if (!(hdr >> dim >> L >> n >> t)) throw ConfigError("checkpoint: malformed header");
  auto grid = make_grid(dim, L, n);
  if (!std::getline(is, line) || line != "index,value")
    throw ConfigError("checkpoint: missing column line");
  Eigen::ArrayXd values = Eigen::ArrayXd::Zero(grid->size());
  std::vector<char> seen(static_cast<std::size_t>(grid->size()), 0);
  Eigen::Index count = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ConfigError("checkpoint: malformed row");
    const long long idx = std::stoll(line.substr(0, comma));
    if (idx < 0 || idx >= grid->size() || seen[idx]) throw ConfigError("checkpoint: bad index");
    values[idx] = std::stod(line.substr(comma + 1));
    seen[idx] = 1;
    ++count;
  }
  if (count != grid->size()) throw ConfigError("checkpoint: row count mismatch");
  return Distribution(grid, values, t);
}

namespace {

Eigen::VectorXd center_of(const InitialData& s, int n) {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
  if (!s.center.empty()) {
    if (static_cast<int>(s.center.size()) != n) throw ConfigError("center has wrong dimension");
    for (int a = 0; a < n; ++a) c[a] = s.center[a];
  }
  return c;
}

double bump_normalizer(int n, double radius, int power) {
  const double a = 0.5 * n, b = power + 1.0;
  const double beta = std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
  return sphere_area(n - 1) * std::pow(radius, n) * 0.5 * beta;
}

}  // namespace

Distribution make_initial(GridPtr grid, const InitialData& s) {
  const int n = grid->dimension();
  const Eigen::VectorXd c = center_of(s, n);
  if (!(s.rho > 0.0)) throw ConfigError("initial rho must be positive");
  if (s.shape == "maxwellian") return maxwellian(grid, s.rho, c, s.temperature);
  if (s.shape == "bimodal") {
    Eigen::VectorXd shift = Eigen::VectorXd::Zero(n);
    shift[0] = s.separation;
    Distribution a = maxwellian(grid, 0.5 * s.rho, c + shift, s.temperature);
    Distribution b = maxwellian(grid, 0.5 * s.rho, c - shift, s.temperature);
    a.values += b.values;
    return a;
  }
  if (s.shape == "anisotropic") {
    if (static_cast<int>(s.temperatures.size()) != n)
      throw ConfigError("anisotropic data needs one temperature per axis");
    Eigen::ArrayXd expo = Eigen::ArrayXd::Zero(grid->size());
    double norm = s.rho;
    for (int a = 0; a < n; ++a) {
      const double t = s.temperatures[a];
      if (!(t > 0.0)) throw ConfigError("temperatures must be positive");
      expo -= (grid->component(a) - c[a]).square() / (2.0 * t);
      norm /= std::sqrt(2.0 * kPi * t);
    }
    return Distribution(grid, norm * expo.exp());
  }
  if (s.shape == "bump") {
    if (!(s.radius > 0.0) || s.power < 2) throw ConfigError("bump needs radius > 0, power >= 2");
    Eigen::ArrayXd r2 = Eigen::ArrayXd::Zero(grid->size());
    for (int a = 0; a < n; ++a) r2 += (grid->component(a) - c[a]).square();
    const Eigen::ArrayXd base = (1.0 - r2 / (s.radius * s.radius)).max(0.0);
    const double norm = s.rho / bump_normalizer(n, s.radius, s.power);
    return Distribution(grid, norm * base.pow(s.power));
  }
  throw ConfigError("unknown initial shape '" + s.shape + "'");
}

Moments exact_moments(const InitialData& s, int n) {
  Moments m;
  const Eigen::VectorXd c = center_of(s, n);
  m.mass = s.rho;
  m.momentum = s.rho * c;
  double spread = 0.0;
  if (s.shape == "maxwellian")
    spread = n * s.temperature;
  else if (s.shape == "bimodal")
    spread = n * s.temperature + s.separation * s.separation;
  else if (s.shape == "anisotropic")
    for (double t : s.temperatures) spread += t;
  else if (s.shape == "bump")
    spread = s.radius * s.radius * n / (n + 2.0 * s.power + 2.0);
  else
    throw ConfigError("unknown initial shape '" + s.shape + "'");
  m.energy = s.rho * (spread + c.squaredNorm());
  return m;
}

Eigen::ArrayXd make_perturbation(const Distribution& f0, const Perturbation& p) {
  const VelocityGrid& g = *f0.grid;
  const int n = g.dimension();
  const Eigen::ArrayXd& vx = g.component(0);
  const Eigen::ArrayXd& vy = g.component(1);
  Eigen::ArrayXd h;
  if (p.shape == "tilt")
    h = (vx + 0.5 * vy).sin();
  else if (p.shape == "cosine")
    h = (2.0 * vx).cos() * vy.cos();
  else if (p.shape == "radial")
    h = (g.speed_squared() - 2.0).tanh();
  else if (p.shape == "odd-cubic")
    h = vx.cube() / (1.0 + g.speed_squared()).pow(1.5);
  else
    throw ConfigError("unknown perturbation shape '" + p.shape + "'");

  const int m = n + 2;
  std::vector<Eigen::ArrayXd> basis;
  basis.push_back(Eigen::ArrayXd::Ones(g.size()));
  for (int a = 0; a < n; ++a) basis.push_back(g.component(a));
  basis.push_back(g.speed_squared());
  const Eigen::ArrayXd damp = f0.values * (-g.speed_squared() / 8.0).exp();
  Eigen::MatrixXd gram(m, m);
  Eigen::VectorXd rhs(m);
  for (int r = 0; r < m; ++r) {
    rhs[r] = sum_of(f0.values * h * basis[r]);
    for (int c = 0; c < m; ++c) gram(r, c) = sum_of(damp * basis[c] * basis[r]);
  }
  const Eigen::VectorXd coef = gram.fullPivLu().solve(rhs);
  Eigen::ArrayXd corr = Eigen::ArrayXd::Zero(g.size());
  for (int c = 0; c < m; ++c) corr += coef[c] * basis[c];
  Eigen::ArrayXd out = p.amplitude * (f0.values * h - damp * corr);
  if ((f0.values + out).minCoeff() < 0.0)
    throw ConfigError("perturbation amplitude makes the density negative");
  return out;
}

}  // namespace boltzstab
