#include "boltzstab/quadrature.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace boltzstab {

double pairwise_sum(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n <= 32) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

namespace {

constexpr std::array<double, 8> kXk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

void kronrod(const std::function<double(double)>& g, double a, double b, double& k15,
             double& err) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = g(c);
  double sk = kWk[7] * fc;
  double sg = kWg[3] * fc;
  for (int j = 0; j < 7; ++j) {
    const double x = h * kXk[j];
    const double f1 = g(c - x);
    const double f2 = g(c + x);
    sk += kWk[j] * (f1 + f2);
    if (j % 2 == 1) sg += kWg[j / 2] * (f1 + f2);
  }
  k15 = sk * h;
  err = std::abs((sk - sg) * h);
}

double adapt(const std::function<double(double)>& g, double a, double b, double tol, int depth) {
  double k, e;
  kronrod(g, a, b, k, e);
  if (e <= tol || depth <= 0 || !std::isfinite(k)) return k;
  const double c = 0.5 * (a + b);
  return adapt(g, a, c, 0.5 * tol, depth - 1) + adapt(g, c, b, 0.5 * tol, depth - 1);
}

}  // namespace

double integrate_adaptive(const std::function<double(double)>& g, double a, double b, double tol,
                          int max_depth) {
  if (a == b) return 0.0;
  return adapt(g, a, b, tol, max_depth);
}

void gauss_legendre(int n, double* nodes, double* weights) {
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    weights[i] = weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
}

SingularIntegral integrate_toward_zero(const std::function<double(double)>& g, double hi,
                                       double tol, double blowup) {
  SingularIntegral out;
  double sum = 0.0;
  double prev = 0.0;
  double prev_ratio = std::numeric_limits<double>::quiet_NaN();
  double top = hi;
  for (int m = 0; m < 400; ++m) {
    const double bottom = 0.5 * top;
    const double band = integrate_adaptive(g, bottom, top, 0.1 * tol);
    sum += band;
    out.bands = m + 1;
    if (!std::isfinite(sum) || std::abs(sum) > blowup) {
      out.finite = false;
      out.value = std::numeric_limits<double>::infinity();
      return out;
    }
    if (m >= 3) {
      const double ratio = prev != 0.0 ? band / prev : 0.0;
      if (m >= 24 && ratio >= 1.0 - 1e-9) {
        out.finite = false;
        out.value = std::numeric_limits<double>::infinity();
        return out;
      }
      if (ratio >= 0.0 && ratio < 1.0) {
        const double tail = band * ratio / (1.0 - ratio);
        if (std::abs(sum + tail) > blowup) {
          out.finite = false;
          out.value = std::numeric_limits<double>::infinity();
          return out;
        }
        const bool settled =
            std::isfinite(prev_ratio) && std::abs(ratio - prev_ratio) < 1e-4 * (1.0 - ratio);
        if (std::abs(tail) < tol || (settled && std::abs(band) < tol)) {
          out.value = sum + tail;
          return out;
        }
      } else if (std::abs(band) < 1e-3 * tol) {
        out.value = sum;
        return out;
      }
      prev_ratio = ratio;
    }
    prev = band;
    top = bottom;
  }
  out.value = sum;
  return out;
}

}  // namespace boltzstab
