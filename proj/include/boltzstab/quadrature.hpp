#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace boltzstab {

/// Sum with a fixed pairwise tree; the order depends only on the length.
double pairwise_sum(std::span<const double> x);

/// Adaptive Gauss-Kronrod (7-15) on [a, b] to absolute tolerance tol.
double integrate_adaptive(const std::function<double(double)>& g, double a, double b,
                          double tol = 1e-12, int max_depth = 40);

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, double* nodes, double* weights);

struct SingularIntegral {
  double value = 0.0;
  bool finite = true;
  int bands = 0;
};

/**
 * Integral of g over (0, hi] where g may blow up at 0.
 *
 * The interval is cut into dyadic bands [hi 2^-(m+1), hi 2^-m]. Band sums that
 * stop decreasing, or a partial sum above `blowup`, mean divergence; otherwise
 * the geometric tail of the band sequence is added once it drops below tol.
 */
SingularIntegral integrate_toward_zero(const std::function<double(double)>& g, double hi,
                                       double tol = 1e-10, double blowup = 1e12);

}  // namespace boltzstab
