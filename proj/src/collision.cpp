#include "boltzstab/collision.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

#include "boltzstab/errors.hpp"
#include "boltzstab/quadrature.hpp"

namespace boltzstab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kLogCap = 1e3;

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

struct Stencil {
  int base[3];
  double w[3][4];
};

Stencil make_stencil(const double* delta, int dim, int order) {
  Stencil s;
  for (int a = 0; a < dim; ++a) {
    const double fl = std::floor(delta[a]);
    s.base[a] = static_cast<int>(fl);
    tap_weights(delta[a] - fl, order, s.w[a]);
  }
  return s;
}

double sum_of(const Eigen::ArrayXd& a) {
  return pairwise_sum(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())));
}

}  // namespace

void validate(const QuadratureSpec& q, const CollisionKernel& k) {
  if (!(q.eps > 0.0 && q.eps < 0.5 * kPi)) throw ConfigError("eps must lie in (0, pi/2)");
  if (q.n_theta < 2) throw ConfigError("n_theta must be >= 2");
  if (k.dimension() == 3 && q.n_phi < 4) throw ConfigError("n_phi must be >= 4");
  if (q.interpolation_order != 1 && q.interpolation_order != 3)
    throw ConfigError("interpolation_order must be 1 or 3");
  if (q.geometric_ratio != 0.0 && !(q.geometric_ratio > 1.0))
    throw ConfigError("geometric_ratio must exceed 1");
  if (q.diagonal_exclusion_radius < 0.0) throw ConfigError("diagonal_exclusion_radius < 0");
  if (k.kinetic.variant == KineticVariant::PowerSoft && k.kinetic.gamma < 0.0 &&
      !(q.diagonal_exclusion_radius > 0.0))
    throw ConfigError("gamma < 0 needs a positive diagonal_exclusion_radius");
}

PolarNodes polar_nodes(const CollisionKernel& kernel, const QuadratureSpec& q) {
  const double top = 0.5 * kPi;
  PolarNodes out;
  auto& th = out.theta;
  if (q.theta_spacing == ThetaSpacing::Uniform) {
    for (int m = 0; m < q.n_theta; ++m) th.push_back(q.eps + (top - q.eps) * m / (q.n_theta - 1));
  } else if (q.geometric_ratio > 1.0) {
    for (double t = q.eps; t < top * (1.0 - 1e-9); t *= q.geometric_ratio) th.push_back(t);
    th.push_back(top);
  } else {
    const double r = std::pow(top / q.eps, 1.0 / (q.n_theta - 1));
    for (int m = 0; m + 1 < q.n_theta; ++m) th.push_back(q.eps * std::pow(r, m));
    th.push_back(top);
  }
  const CollisionKernel sym = kernel.symmetrized ? kernel : symmetrize(kernel);
  const int n = kernel.dimension();
  auto density = [&](double t) { return eval_angular(sym, t) * std::pow(std::sin(t), n - 2); };
  const std::size_t m = th.size();
  out.weight.assign(m, 0.0);
  for (std::size_t k = 0; k + 1 < m; ++k) {
    const double a = th[k], b = th[k + 1];
    const double len = b - a;
    out.weight[k] += integrate_adaptive([&](double t) { return density(t) * (b - t) / len; }, a,
                                        b, 1e-13);
    out.weight[k + 1] += integrate_adaptive([&](double t) { return density(t) * (t - a) / len; },
                                            a, b, 1e-13);
  }
  return out;
}

double cell_average_power(const Eigen::VectorXd& z, double h, double gamma) {
  const int n = static_cast<int>(z.size());
  if (z.norm() == 0.0) {
    if (!(gamma > -n)) throw DomainError("cell average diverges for gamma <= -N");
    // Divergence theorem on each face: int_cell r^g = sum_faces (h/2)/(g+N) int_face r^g.
    constexpr int kq = 24;
    double x[kq], w[kq];
    gauss_legendre(kq, x, w);
    double face = 0.0;
    if (n == 2) {
      for (int i = 0; i < kq; ++i) {
        const double y = 0.5 * h * x[i];
        face += 0.5 * h * w[i] * std::pow(0.25 * h * h + y * y, 0.5 * gamma);
      }
    } else {
      for (int i = 0; i < kq; ++i)
        for (int j = 0; j < kq; ++j) {
          const double y = 0.5 * h * x[i], u = 0.5 * h * x[j];
          face += 0.25 * h * h * w[i] * w[j] * std::pow(0.25 * h * h + y * y + u * u, 0.5 * gamma);
        }
    }
    return 2.0 * n * 0.5 * h / (gamma + n) * face / std::pow(h, n);
  }
  constexpr int kq = 8;
  double x[kq], w[kq];
  gauss_legendre(kq, x, w);
  double acc = 0.0;
  if (n == 2) {
    for (int i = 0; i < kq; ++i)
      for (int j = 0; j < kq; ++j) {
        const double a = z[0] + 0.5 * h * x[i], b = z[1] + 0.5 * h * x[j];
        acc += w[i] * w[j] * std::pow(a * a + b * b, 0.5 * gamma);
      }
    return acc / 4.0;
  }
  for (int i = 0; i < kq; ++i)
    for (int j = 0; j < kq; ++j)
      for (int k = 0; k < kq; ++k) {
        const double a = z[0] + 0.5 * h * x[i], b = z[1] + 0.5 * h * x[j],
                     c = z[2] + 0.5 * h * x[k];
        acc += w[i] * w[j] * w[k] * std::pow(a * a + b * b + c * c, 0.5 * gamma);
      }
  return acc / 8.0;
}

namespace {

double phi_value(const KineticKernel& phi, const std::array<int, 3>& d, int dim, double h,
                 double radius) {
  Eigen::VectorXd z(dim);
  for (int a = 0; a < dim; ++a) z[a] = d[a] * h;
  const double r = z.norm();
  const bool singular = phi.variant == KineticVariant::PowerSoft && phi.gamma < 0.0;
  if (singular && (r == 0.0 || r < radius))
    return phi.c_phi * cell_average_power(z, h, phi.gamma);
  return eval_kinetic(phi, r);
}

}  // namespace

CollisionOperator::CollisionOperator(CollisionKernel kernel, GridPtr grid, QuadratureSpec quad,
                                     int threads)
    : kernel_(kernel.symmetrized ? kernel : symmetrize(kernel)),
      grid_(std::move(grid)),
      quad_(quad),
      threads_(std::max(1, threads)) {
  validate(kernel_);
  validate(quad_, kernel_);
  if (kernel_.dimension() != grid_->dimension())
    throw ConfigError("kernel and grid dimensions differ");
  nodes_ = polar_nodes(kernel_, quad_);
  const int n = grid_->points_per_axis();
  const int dim = grid_->dimension();
  std::array<int, 3> d{0, 0, 0};
  const int span = 2 * n - 1;
  const long total = dim == 2 ? static_cast<long>(span) * span
                              : static_cast<long>(span) * span * span;
  for (long c = 0; c < total; ++c) {
    long rest = c;
    for (int a = dim - 1; a >= 0; --a) {
      d[a] = static_cast<int>(rest % span) - (n - 1);
      rest /= span;
    }
    int lead = 0;
    for (int a = 0; a < dim; ++a)
      if (d[a] != 0) {
        lead = d[a];
        break;
      }
    if (lead <= 0) continue;
    offsets_.push_back(
        {d, phi_value(kernel_.kinetic, d, dim, grid_->spacing(), quad_.diagonal_exclusion_radius)});
  }
}

double CollisionOperator::phi_of_offset(const std::array<int, 3>& d) const {
  return phi_value(kernel_.kinetic, d, grid_->dimension(), grid_->spacing(),
                   quad_.diagonal_exclusion_radius);
}

double CollisionOperator::angular_mass() const {
  double s = 0.0;
  for (double w : nodes_.weight) s += w;
  return kernel_.dimension() == 2 ? 2.0 * s : 2.0 * kPi * s;
}

void CollisionOperator::directions_for(const Offset& off, std::vector<Direction>& out) const {
  out.clear();
  const int dim = grid_->dimension();
  double zn = 0.0;
  for (int a = 0; a < dim; ++a) zn += double(off.d[a]) * off.d[a];
  zn = std::sqrt(zn);
  double e[3] = {off.d[0] / zn, off.d[1] / zn, dim == 3 ? off.d[2] / zn : 0.0};
  if (dim == 2) {
    for (std::size_t m = 0; m < nodes_.theta.size(); ++m) {
      const double c = std::cos(nodes_.theta[m]), s = std::sin(nodes_.theta[m]);
      for (int sign : {1, -1}) {
        Direction dir;
        dir.unit = {c * e[0] - sign * s * e[1], sign * s * e[0] + c * e[1], 0.0};
        dir.weight = nodes_.weight[m];
        out.push_back(dir);
      }
    }
    return;
  }
  int axis = 0;
  for (int a = 1; a < 3; ++a)
    if (std::abs(e[a]) < std::abs(e[axis])) axis = a;
  double e1[3] = {0, 0, 0};
  e1[axis] = 1.0;
  const double dot = e1[0] * e[0] + e1[1] * e[1] + e1[2] * e[2];
  for (int a = 0; a < 3; ++a) e1[a] -= dot * e[a];
  const double n1 = std::sqrt(e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]);
  for (double& x : e1) x /= n1;
  const double e2[3] = {e[1] * e1[2] - e[2] * e1[1], e[2] * e1[0] - e[0] * e1[2],
                        e[0] * e1[1] - e[1] * e1[0]};
  const double dphi = 2.0 * kPi / quad_.n_phi;
  for (std::size_t m = 0; m < nodes_.theta.size(); ++m) {
    const double c = std::cos(nodes_.theta[m]), s = std::sin(nodes_.theta[m]);
    for (int k = 0; k < quad_.n_phi; ++k) {
      const double ph = dphi * (k + 0.5);
      const double cp = std::cos(ph), sp = std::sin(ph);
      Direction dir;
      for (int a = 0; a < 3; ++a) dir.unit[a] = c * e[a] + s * (cp * e1[a] + sp * e2[a]);
      dir.weight = nodes_.weight[m] * dphi;
      out.push_back(dir);
    }
  }
}

namespace {

/// Iterates outer rows (all axes except the last) of a box.
struct RowBox {
  int dim;
  int lo[3], hi[3];
  long rows() const {
    long r = 1;
    for (int a = 0; a + 1 < dim; ++a) r *= (hi[a] - lo[a] + 1);
    return r;
  }
  void outer(long r, int* idx) const {
    for (int a = dim - 2; a >= 0; --a) {
      const int len = hi[a] - lo[a] + 1;
      idx[a] = lo[a] + static_cast<int>(r % len);
      r /= len;
    }
  }
};

}  // namespace

void CollisionOperator::sweep_range(std::size_t begin, std::size_t stride_count,
                                    const Eigen::ArrayXd& g, const Eigen::ArrayXd& f, bool same,
                                    Mode mode, Eigen::ArrayXd& gain, Eigen::ArrayXd& loss) const {
  const VelocityGrid& grid = *grid_;
  const int dim = grid.dimension();
  const int n = grid.points_per_axis();
  const int order = quad_.interpolation_order;
  const int tmin = order == 3 ? -1 : 0;
  const int tmax = order == 3 ? 2 : 1;
  const int ntap = tmax - tmin + 1;
  const double hn = grid.cell_volume();
  Eigen::Index st[3] = {grid.stride(0), grid.stride(1), dim == 3 ? grid.stride(2) : 1};

  Eigen::ArrayXd p1 = Eigen::ArrayXd::Zero(grid.size());
  Eigen::ArrayXd p2 = Eigen::ArrayXd::Zero(grid.size());
  Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(grid.size());
  std::vector<double> tmp(n + 8);
  std::vector<char> active;
  std::vector<Direction> dirs;

  const double fmax = f.abs().maxCoeff(), gmax = g.abs().maxCoeff();
  const double floor_p = 1e-18 * fmax * gmax;

  for (std::size_t k = begin; k < offsets_.size(); k += stride_count) {
    const Offset& off = offsets_[k];
    RowBox box{dim, {0, 0, 0}, {0, 0, 0}};
    Eigen::Index dflat = 0;
    bool empty = false;
    for (int a = 0; a < dim; ++a) {
      box.lo[a] = std::max(0, off.d[a]);
      box.hi[a] = std::min(n - 1, n - 1 + off.d[a]);
      if (box.lo[a] > box.hi[a]) empty = true;
      dflat += off.d[a] * st[a];
    }
    if (empty) continue;
    const int xl = box.lo[dim - 1], xh = box.hi[dim - 1];
    const long nrows = box.rows();
    active.assign(nrows, 0);
    bool any = false;
    int idx[3];
    for (long r = 0; r < nrows; ++r) {
      box.outer(r, idx);
      Eigen::Index base = 0;
      for (int a = 0; a + 1 < dim; ++a) base += idx[a] * st[a];
      double rmax = 0.0;
      for (int x = xl; x <= xh; ++x) {
        const Eigen::Index i = base + x;
        const Eigen::Index j = i - dflat;
        double a1, a2;
        if (mode == Mode::LossRate) {
          a1 = f[j];
          a2 = f[i];
        } else {
          a1 = f[i] * g[j];
          a2 = same ? a1 : g[i] * f[j];
        }
        p1[i] = a1;
        p2[i] = a2;
        rmax = std::max(rmax, std::max(std::abs(a1), std::abs(a2)));
      }
      const double thr = mode == Mode::LossRate ? 1e-28 * fmax : floor_p;
      if (rmax > thr) {
        active[r] = 1;
        any = true;
      }
    }
    if (!any) continue;

    directions_for(off, dirs);
    double dn = 0.0;
    for (int a = 0; a < dim; ++a) dn += double(off.d[a]) * off.d[a];
    dn = std::sqrt(dn);

    for (const Direction& dir : dirs) {
      double d1[3], d2[3];
      for (int a = 0; a < dim; ++a) {
        d1[a] = 0.5 * (-off.d[a] + dn * dir.unit[a]);
        d2[a] = 0.5 * (-off.d[a] - dn * dir.unit[a]);
      }
      const Stencil s1 = make_stencil(d1, dim, order);
      const Stencil s2 = make_stencil(d2, dim, order);
      RowBox sub = box;
      bool none = false;
      for (int a = 0; a < dim; ++a) {
        sub.lo[a] = std::max({box.lo[a], -s1.base[a] - tmin, -s2.base[a] - tmin});
        sub.hi[a] = std::min({box.hi[a], n - 1 - s1.base[a] - tmax, n - 1 - s2.base[a] - tmax});
        if (sub.lo[a] > sub.hi[a]) none = true;
      }
      if (none) continue;
      const double c = dir.weight * off.phi * hn;
      const int sxl = sub.lo[dim - 1], sxh = sub.hi[dim - 1];
      const int len = sxh - sxl + 1;
      const long srows = sub.rows();
      for (long r = 0; r < srows; ++r) {
        sub.outer(r, idx);
        // Row index inside the parent box for the activity flag.
        long br = 0;
        for (int a = 0; a + 1 < dim; ++a) br = br * (box.hi[a] - box.lo[a] + 1) + (idx[a] - box.lo[a]);
        if (!active[br]) continue;
        Eigen::Index rowbase = 0;
        for (int a = 0; a + 1 < dim; ++a) rowbase += idx[a] * st[a];
        if (mode != Mode::GainOnly) {
          double* __restrict ap = acc.data() + rowbase + sxl;
          for (int x = 0; x < len; ++x) ap[x] += c;
        }
        if (mode == Mode::LossRate) continue;
        for (int land = 0; land < 2; ++land) {
          const Stencil& s = land == 0 ? s1 : s2;
          const double* __restrict src = (land == 0 ? p1 : p2).data() + rowbase + sxl;
          const int tl = len + ntap - 1;
          std::fill(tmp.begin(), tmp.begin() + tl, 0.0);
          double* __restrict tp = tmp.data();
          for (int t = 0; t < ntap; ++t) {
            const double wx = s.w[dim - 1][t + tmin + 1];
            double* __restrict tt = tp + t;
            for (int x = 0; x < len; ++x) tt[x] += wx * src[x];
          }
          const Eigen::Index xdst = sxl + s.base[dim - 1] + tmin;
          if (dim == 2) {
            const Eigen::Index yb = (idx[0] + s.base[0]) * st[0];
            for (int ty = tmin; ty <= tmax; ++ty) {
              const double wy = c * s.w[0][ty + 1];
              double* __restrict dst = gain.data() + yb + ty * st[0] + xdst;
              for (int x = 0; x < tl; ++x) dst[x] += wy * tp[x];
            }
          } else {
            for (int ta = tmin; ta <= tmax; ++ta)
              for (int tb = tmin; tb <= tmax; ++tb) {
                const double wo = c * s.w[0][ta + 1] * s.w[1][tb + 1];
                double* __restrict dst = gain.data() + (idx[0] + s.base[0] + ta) * st[0] +
                                         (idx[1] + s.base[1] + tb) * st[1] + xdst;
                for (int x = 0; x < tl; ++x) dst[x] += wo * tp[x];
              }
          }
        }
      }
    }

    if (mode == Mode::GainOnly) continue;
    for (long r = 0; r < nrows; ++r) {
      box.outer(r, idx);
      Eigen::Index base = 0;
      for (int a = 0; a + 1 < dim; ++a) base += idx[a] * st[a];
      for (int x = xl; x <= xh; ++x) {
        const Eigen::Index i = base + x;
        const double a = acc[i];
        if (a == 0.0) continue;
        loss[i] += a * p1[i];
        loss[i - dflat] += a * p2[i];
        acc[i] = 0.0;
      }
    }
  }
}

void CollisionOperator::sweep(const Eigen::ArrayXd& g, const Eigen::ArrayXd& f, Mode mode,
                              Eigen::ArrayXd& gain, Eigen::ArrayXd& loss) const {
  const Eigen::Index size = grid_->size();
  if (g.size() != size || f.size() != size) throw UsageError("distribution/grid mismatch");
  const bool same = &g == &f || (g.data() == f.data());
  gain = Eigen::ArrayXd::Zero(size);
  loss = Eigen::ArrayXd::Zero(size);
  if (threads_ == 1) {
    sweep_range(0, 1, g, f, same, mode, gain, loss);
    return;
  }
  std::vector<Eigen::ArrayXd> gains(threads_, Eigen::ArrayXd::Zero(size));
  std::vector<Eigen::ArrayXd> losses(threads_, Eigen::ArrayXd::Zero(size));
  std::vector<std::thread> pool;
  for (int t = 0; t < threads_; ++t)
    pool.emplace_back([&, t] {
      sweep_range(t, threads_, g, f, same, mode, gains[t], losses[t]);
    });
  for (auto& th : pool) th.join();
  for (int t = 0; t < threads_; ++t) {
    gain += gains[t];
    loss += losses[t];
  }
}

ProjectionResult conserve_project(const VelocityGrid& grid, const Eigen::ArrayXd& q) {
  const int n = grid.dimension();
  const int m = n + 2;
  std::vector<const Eigen::ArrayXd*> basis;
  const Eigen::ArrayXd ones = Eigen::ArrayXd::Ones(grid.size());
  basis.push_back(&ones);
  for (int a = 0; a < n; ++a) basis.push_back(&grid.component(a));
  basis.push_back(&grid.speed_squared());
  Eigen::MatrixXd gram(m, m);
  Eigen::VectorXd rhs(m);
  for (int r = 0; r < m; ++r) {
    rhs[r] = sum_of(q * *basis[r]);
    for (int c = 0; c < m; ++c) gram(r, c) = sum_of(*basis[r] * *basis[c]);
  }
  const Eigen::VectorXd coef = gram.ldlt().solve(rhs);
  Eigen::ArrayXd corr = Eigen::ArrayXd::Zero(grid.size());
  for (int c = 0; c < m; ++c) corr += coef[c] * *basis[c];
  ProjectionResult out;
  out.values = q - corr;
  out.correction_norm = lp_norm(grid, corr, 1.0);
  return out;
}

namespace {

Eigen::VectorXd defect_of(const VelocityGrid& grid, const Eigen::ArrayXd& q) {
  const Moments m = moments(grid, q);
  Eigen::VectorXd d(grid.dimension() + 2);
  d[0] = m.mass;
  d.segment(1, grid.dimension()) = m.momentum;
  d[grid.dimension() + 1] = m.energy;
  return d;
}

}  // namespace

CollisionResult CollisionOperator::eval_Q(const Distribution& g, const Distribution& f) const {
  if (!(*g.grid == *grid_) || !(*f.grid == *grid_)) throw UsageError("grid mismatch");
  Eigen::ArrayXd gain, loss;
  sweep(g.values, f.values, Mode::Full, gain, loss);
  CollisionResult out;
  out.values = gain - loss;
  out.gain_norm = lp_norm(*grid_, gain, 1.0);
  out.loss_norm = lp_norm(*grid_, loss, 1.0);
  out.defect = defect_of(*grid_, out.values);
  return out;
}

CollisionResult CollisionOperator::eval_Q(const Distribution& f) const {
  if (!(*f.grid == *grid_)) throw UsageError("grid mismatch");
  Eigen::ArrayXd gain, loss;
  sweep(f.values, f.values, Mode::Full, gain, loss);
  CollisionResult out;
  out.gain_norm = lp_norm(*grid_, gain, 1.0);
  out.loss_norm = lp_norm(*grid_, loss, 1.0);
  const Eigen::ArrayXd raw = gain - loss;
  out.defect = defect_of(*grid_, raw);
  ProjectionResult p = conserve_project(*grid_, raw);
  out.values = std::move(p.values);
  out.correction_norm = p.correction_norm;
  out.projected = true;
  return out;
}

Eigen::ArrayXd CollisionOperator::eval_gain(const Distribution& f) const {
  Eigen::ArrayXd gain, loss;
  sweep(f.values, f.values, Mode::GainOnly, gain, loss);
  return gain;
}

Eigen::ArrayXd CollisionOperator::eval_loss_rate(const Distribution& f) const {
  Eigen::ArrayXd gain, loss;
  sweep(f.values, f.values, Mode::LossRate, gain, loss);
  return loss;
}

EntropyProduction CollisionOperator::entropy_production(const Distribution& fd) const {
  const VelocityGrid& grid = *grid_;
  const Eigen::ArrayXd& f = fd.values;
  const int dim = grid.dimension();
  const int n = grid.points_per_axis();
  const int order = quad_.interpolation_order;
  const int tmin = order == 3 ? -1 : 0;
  const int tmax = order == 3 ? 2 : 1;
  const int ntap = tmax - tmin + 1;
  const double hn = grid.cell_volume();
  Eigen::Index st[3] = {grid.stride(0), grid.stride(1), dim == 3 ? grid.stride(2) : 1};
  std::vector<double> comb(n + 8), land1(n + 8), land2(n + 8);
  std::vector<Direction> dirs;
  EntropyProduction out;
  std::vector<double> per_offset;
  per_offset.reserve(offsets_.size());
  const double fmax = f.maxCoeff();

  auto gather = [&](const Stencil& s, const int* idx, int sxl, int len, std::vector<double>& dst) {
    const int tl = len + ntap - 1;
    std::fill(comb.begin(), comb.begin() + tl, 0.0);
    const Eigen::Index xsrc = sxl + s.base[dim - 1] + tmin;
    if (dim == 2) {
      for (int ty = tmin; ty <= tmax; ++ty) {
        const double w = s.w[0][ty + 1];
        const double* src = f.data() + (idx[0] + s.base[0] + ty) * st[0] + xsrc;
        for (int x = 0; x < tl; ++x) comb[x] += w * src[x];
      }
    } else {
      for (int ta = tmin; ta <= tmax; ++ta)
        for (int tb = tmin; tb <= tmax; ++tb) {
          const double w = s.w[0][ta + 1] * s.w[1][tb + 1];
          const double* src = f.data() + (idx[0] + s.base[0] + ta) * st[0] +
                              (idx[1] + s.base[1] + tb) * st[1] + xsrc;
          for (int x = 0; x < tl; ++x) comb[x] += w * src[x];
        }
    }
    for (int x = 0; x < len; ++x) {
      double v = 0.0;
      for (int t = 0; t < ntap; ++t) v += s.w[dim - 1][t + tmin + 1] * comb[x + t];
      dst[x] = v;
    }
  };

  for (const Offset& off : offsets_) {
    RowBox box{dim, {0, 0, 0}, {0, 0, 0}};
    Eigen::Index dflat = 0;
    for (int a = 0; a < dim; ++a) {
      box.lo[a] = std::max(0, off.d[a]);
      box.hi[a] = std::min(n - 1, n - 1 + off.d[a]);
      dflat += off.d[a] * st[a];
    }
    directions_for(off, dirs);
    double dn = 0.0;
    for (int a = 0; a < dim; ++a) dn += double(off.d[a]) * off.d[a];
    dn = std::sqrt(dn);
    double total = 0.0;
    for (const Direction& dir : dirs) {
      double d1[3], d2[3];
      for (int a = 0; a < dim; ++a) {
        d1[a] = 0.5 * (-off.d[a] + dn * dir.unit[a]);
        d2[a] = 0.5 * (-off.d[a] - dn * dir.unit[a]);
      }
      const Stencil s1 = make_stencil(d1, dim, order);
      const Stencil s2 = make_stencil(d2, dim, order);
      RowBox sub = box;
      bool none = false;
      for (int a = 0; a < dim; ++a) {
        sub.lo[a] = std::max({box.lo[a], -s1.base[a] - tmin, -s2.base[a] - tmin});
        sub.hi[a] = std::min({box.hi[a], n - 1 - s1.base[a] - tmax, n - 1 - s2.base[a] - tmax});
        if (sub.lo[a] > sub.hi[a]) none = true;
      }
      if (none) continue;
      const double c = dir.weight * off.phi * hn;
      const int sxl = sub.lo[dim - 1], len = sub.hi[dim - 1] - sxl + 1;
      int idx[3];
      double dsum = 0.0;
      for (long r = 0; r < sub.rows(); ++r) {
        sub.outer(r, idx);
        Eigen::Index rowbase = 0;
        for (int a = 0; a + 1 < dim; ++a) rowbase += idx[a] * st[a];
        gather(s1, idx, sxl, len, land1);
        gather(s2, idx, sxl, len, land2);
        for (int x = 0; x < len; ++x) {
          const Eigen::Index i = rowbase + sxl + x;
          const double before = f[i] * f[i - dflat];
          const double after = land1[x] * land2[x];
          if (after == before) continue;
          if (std::max(std::abs(after), std::abs(before)) < 1e-300 * fmax) continue;
          double lr;
          if (after > 0.0 && before > 0.0) {
            lr = std::log(after / before);
            if (std::abs(lr) > kLogCap) {
              lr = std::copysign(kLogCap, lr);
              ++out.capped;
            }
          } else {
            lr = after > before ? kLogCap : -kLogCap;
            ++out.capped;
          }
          dsum += (after - before) * lr;
        }
      }
      total += c * dsum;
    }
    per_offset.push_back(total);
  }
  out.value = 0.5 * hn * pairwise_sum(per_offset);
  return out;
}

CollisionResult eval_Q(const Distribution& g, const Distribution& f, const CollisionKernel& kernel,
                       const QuadratureSpec& quad) {
  CollisionOperator op(kernel, f.grid, quad);
  if (&g == &f) return op.eval_Q(f);
  return op.eval_Q(g, f);
}

Eigen::ArrayXd eval_gain(const Distribution& f, const CollisionKernel& kernel,
                         const QuadratureSpec& quad) {
  return CollisionOperator(kernel, f.grid, quad).eval_gain(f);
}

Eigen::ArrayXd eval_loss_rate(const Distribution& f, const CollisionKernel& kernel,
                              const QuadratureSpec& quad) {
  return CollisionOperator(kernel, f.grid, quad).eval_loss_rate(f);
}

EntropyProduction entropy_production(const Distribution& f, const CollisionKernel& kernel,
                                     const QuadratureSpec& quad) {
  return CollisionOperator(kernel, f.grid, quad).entropy_production(f);
}

Coercivity coercivity_lower_bound(const Distribution& s, const KineticKernel& phi,
                                  double diagonal_exclusion_radius) {
  const VelocityGrid& grid = *s.grid;
  const int dim = grid.dimension();
  const int n = grid.points_per_axis();
  const int span = 2 * n - 1;
  const long table_size = dim == 2 ? long(span) * span : long(span) * span * span;
  std::vector<double> table(table_size);
  for (long c = 0; c < table_size; ++c) {
    std::array<int, 3> d{0, 0, 0};
    long rest = c;
    for (int a = dim - 1; a >= 0; --a) {
      d[a] = static_cast<int>(rest % span) - (n - 1);
      rest /= span;
    }
    table[c] = phi_value(phi, d, dim, grid.spacing(), diagonal_exclusion_radius);
  }
  Coercivity out;
  out.profile.resize(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const auto ii = grid.multi_index(i);
    double acc = 0.0;
    for (Eigen::Index j = 0; j < grid.size(); ++j) {
      if (s.values[j] == 0.0) continue;
      const auto jj = grid.multi_index(j);
      long c = 0;
      for (int a = 0; a < dim; ++a) c = c * span + (ii[a] - jj[a] + n - 1);
      acc += s.values[j] * table[c];
    }
    out.profile[i] = acc * grid.cell_volume() / std::pow(grid.bracket()[i], phi.gamma);
  }
  out.c_hat = out.profile.minCoeff();
  return out;
}

}  // namespace boltzstab
