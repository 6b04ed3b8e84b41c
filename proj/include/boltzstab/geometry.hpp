#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

#include "boltzstab/errors.hpp"

namespace boltzstab {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct CollisionPair {
  VectorX<Scalar> v;
  VectorX<Scalar> v_star;
};

/// (v', v'_*) for the sigma-representation.
template <typename DA, typename DB, typename DS>
CollisionPair<typename DA::Scalar> post_collision(const Eigen::MatrixBase<DA>& v,
                                                  const Eigen::MatrixBase<DB>& v_star,
                                                  const Eigen::MatrixBase<DS>& sigma) {
  using S = typename DA::Scalar;
  const VectorX<S> mid = (v + v_star) / S(2);
  const S half = (v - v_star).norm() / S(2);
  return {mid + half * sigma, mid - half * sigma};
}

/// cos(theta) = sigma . (v - v_*)/|v - v_*|, clamped to [-1, 1] up to 1e-9.
template <typename DA, typename DB, typename DS>
typename DA::Scalar deviation_angle(const Eigen::MatrixBase<DA>& v,
                                    const Eigen::MatrixBase<DB>& v_star,
                                    const Eigen::MatrixBase<DS>& sigma) {
  using S = typename DA::Scalar;
  const VectorX<S> z = v - v_star;
  const S nz = z.norm();
  if (nz == S(0)) throw DegenerateGeometryError("deviation angle undefined for v == v_*");
  S c = sigma.dot(z) / (nz * sigma.norm());
  if (std::abs(c) > S(1) + S(1e-9)) throw DomainError("cosine outside [-1, 1]");
  c = std::clamp(c, S(-1), S(1));
  return std::acos(c);
}

/**
 * Inverse of v -> v' at fixed (v_*, sigma).
 *
 * Returns vbar with post_collision(vbar, v_star, sigma).v == v. The deviation
 * angle of (vbar, v_star, sigma) is twice the angle between sigma and
 * v - v_star; it must not exceed pi/2.
 */
template <typename DA, typename DB, typename DS>
VectorX<typename DA::Scalar> inverse_map_phi(const Eigen::MatrixBase<DA>& v,
                                             const Eigen::MatrixBase<DB>& v_star,
                                             const Eigen::MatrixBase<DS>& sigma) {
  using S = typename DA::Scalar;
  const VectorX<S> z = v - v_star;
  const S nz2 = z.squaredNorm();
  if (nz2 == S(0)) throw DegenerateGeometryError("inverse map undefined for v == v_*");
  const S c = z.dot(sigma);
  if (!(c > S(0))) throw OutOfSupportError("sigma not in the forward hemisphere of v - v_*");
  if (c * c < S(0.5) * nz2 * (S(1) - S(64) * Eigen::NumTraits<S>::epsilon()))
    throw OutOfSupportError("pre-image deviation exceeds pi/2");
  return v_star + S(2) * z - (nz2 / c) * sigma;
}

template <typename S>
Eigen::Matrix<S, 2, 2> rotation2(S angle) {
  Eigen::Matrix<S, 2, 2> r;
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return r;
}

/// w = (v + v_*)/2 - R_theta (v - v_*)/2, the 2D post-collision partner of v.
template <typename DA, typename DB>
Eigen::Matrix<typename DA::Scalar, 2, 1> w_of_vstar_2d(const Eigen::MatrixBase<DA>& v,
                                                       const Eigen::MatrixBase<DB>& v_star,
                                                       typename DA::Scalar theta) {
  using S = typename DA::Scalar;
  return (v + v_star) / S(2) - rotation2(theta) * (v - v_star) / S(2);
}

/**
 * Inverse of v_* -> w at fixed (v, theta) in 2D, theta in [0, pi/2].
 *
 * Returns (v_*, J) with J = cos^2(theta/2) the Jacobian of v_* -> w.
 */
template <typename DA, typename DB>
std::pair<Eigen::Matrix<typename DA::Scalar, 2, 1>, typename DA::Scalar> vstar_of_w_2d(
    const Eigen::MatrixBase<DA>& v, const Eigen::MatrixBase<DB>& w, typename DA::Scalar theta) {
  using S = typename DA::Scalar;
  if (!(theta >= S(0) && theta <= S(std::numbers::pi / 2)))
    throw OutOfSupportError("theta outside [0, pi/2]");
  const S c = std::cos(theta / S(2));
  const S s = std::sin(theta / S(2));
  const Eigen::Matrix<S, 2, 1> vs =
      (rotation2(-theta / S(2)) * w + s * (rotation2(S(std::numbers::pi / 2)) * v)) / c;
  return {vs, c * c};
}

/**
 * Inverse of v_* -> w = v'_* at fixed (v, sigma) in any dimension.
 *
 * Returns (v_*, J) with J = 2^{N-1}|v - w|^2 / ((v - w).sigma)^2, the Jacobian
 * of w -> v_*.
 */
template <typename DA, typename DB, typename DS>
std::pair<VectorX<typename DA::Scalar>, typename DA::Scalar> vstar_of_w_nd(
    const Eigen::MatrixBase<DA>& v, const Eigen::MatrixBase<DB>& w,
    const Eigen::MatrixBase<DS>& sigma) {
  using S = typename DA::Scalar;
  const VectorX<S> u = v - w;
  const S c = u.dot(sigma);
  if (!(c > S(0))) throw OutOfSupportError("(v - w).sigma must be positive");
  const S u2 = u.squaredNorm();
  const VectorX<S> vs = S(2) * w - v + (u2 / c) * sigma;
  const S jac = std::pow(S(2), S(v.size() - 1)) * u2 / (c * c);
  return {vs, jac};
}

/// sigma = cos(theta) (v - w)/|v - w| + sin(theta) n, with n a unit vector orthogonal to v - w.
template <typename DA, typename DB, typename DN>
VectorX<typename DA::Scalar> sigma_decompose(const Eigen::MatrixBase<DA>& v,
                                             const Eigen::MatrixBase<DB>& w,
                                             typename DA::Scalar theta,
                                             const Eigen::MatrixBase<DN>& n) {
  using S = typename DA::Scalar;
  const VectorX<S> u = v - w;
  const S nu = u.norm();
  if (nu == S(0)) throw DegenerateGeometryError("v == w");
  const VectorX<S> e = u / nu;
  if (std::abs(e.dot(n)) > S(1e-9) || std::abs(n.norm() - S(1)) > S(1e-9))
    throw DomainError("n must be a unit vector orthogonal to v - w");
  return std::cos(theta) * e + std::sin(theta) * n;
}

}  // namespace boltzstab
