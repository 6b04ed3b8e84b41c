#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "boltzstab/kernel.hpp"
#include "boltzstab/phase_space.hpp"

namespace boltzstab {

enum class ThetaSpacing { Uniform, Geometric };

struct QuadratureSpec {
  double eps = 0.1;          ///< angular cutoff; nodes live on [eps, pi/2]
  int n_theta = 8;           ///< polar nodes
  int n_phi = 8;             ///< azimuthal nodes (N = 3 only)
  ThetaSpacing theta_spacing = ThetaSpacing::Geometric;
  double geometric_ratio = 0.0;  ///< > 1 fixes the node ratio (nodes eps r^m, then pi/2)
  double diagonal_exclusion_radius = 0.0;  ///< |v - v_*| below this uses cell-averaged Phi
  int interpolation_order = 3;             ///< 1 or 3
};

void validate(const QuadratureSpec& quad, const CollisionKernel& kernel);

/// Polar nodes with weights int b(theta) hat_m(theta) (sin theta)^{N-2} dtheta.
struct PolarNodes {
  std::vector<double> theta;
  std::vector<double> weight;
};

PolarNodes polar_nodes(const CollisionKernel& kernel, const QuadratureSpec& quad);

struct CollisionResult {
  Eigen::ArrayXd values;
  double gain_norm = 0.0;   ///< ||Q+||_{L^1}
  double loss_norm = 0.0;   ///< ||Q-||_{L^1}
  Eigen::VectorXd defect;   ///< (mass, momentum..., energy) of Q before projection
  double correction_norm = 0.0;
  bool projected = false;
};

struct ProjectionResult {
  Eigen::ArrayXd values;
  double correction_norm = 0.0;  ///< L^1 norm of what was removed
};

/// Removes the h^N-orthogonal component of q along span{1, v_1..v_N, |v|^2}.
ProjectionResult conserve_project(const VelocityGrid& grid, const Eigen::ArrayXd& q);

struct EntropyProduction {
  double value = 0.0;
  long capped = 0;  ///< terms whose log ratio hit the cap
};

/**
 * Discrete collision operator restricted to theta >= eps.
 *
 * Q is evaluated in adjoint form: for each node pair (i, j) and each sigma the
 * post-collision velocities are spread onto the grid with the interpolation
 * stencil, and the same amount is removed at i and j. Pairs whose stencils
 * leave the grid are dropped from gain and loss alike, so mass, momentum and
 * energy are conserved up to rounding.
 */
class CollisionOperator {
 public:
  CollisionOperator(CollisionKernel kernel, GridPtr grid, QuadratureSpec quad, int threads = 1);

  /// Q(g, f) = int int B (g'_* f' - g_* f).
  CollisionResult eval_Q(const Distribution& g, const Distribution& f) const;
  /// Q(f, f), projected onto the conserved moments.
  CollisionResult eval_Q(const Distribution& f) const;

  Eigen::ArrayXd eval_gain(const Distribution& f) const;
  /// L(f)(v) = int int B f_* ; Q-(f, f) = f L(f).
  Eigen::ArrayXd eval_loss_rate(const Distribution& f) const;

  EntropyProduction entropy_production(const Distribution& f) const;

  const CollisionKernel& kernel() const { return kernel_; }
  const QuadratureSpec& quadrature() const { return quad_; }
  const GridPtr& grid() const { return grid_; }
  const PolarNodes& nodes() const { return nodes_; }
  int threads() const { return threads_; }

  /// Discrete ||b_c||_{L^1(S^{N-1})}.
  double angular_mass() const;

  /// Phi used for lattice offset d (cell-averaged near the diagonal when soft).
  double phi_of_offset(const std::array<int, 3>& d) const;

 private:
  struct Offset {
    std::array<int, 3> d;
    double phi;
  };
  struct Direction {
    std::array<double, 3> unit;  ///< sigma in lattice coordinates
    double weight;
  };

  enum class Mode { Full, GainOnly, LossRate };

  void sweep(const Eigen::ArrayXd& g, const Eigen::ArrayXd& f, Mode mode, Eigen::ArrayXd& gain,
             Eigen::ArrayXd& loss) const;
  void sweep_range(std::size_t begin, std::size_t end, const Eigen::ArrayXd& g,
                   const Eigen::ArrayXd& f, bool same, Mode mode, Eigen::ArrayXd& gain,
                   Eigen::ArrayXd& loss) const;
  void directions_for(const Offset& off, std::vector<Direction>& out) const;

  CollisionKernel kernel_;
  GridPtr grid_;
  QuadratureSpec quad_;
  int threads_;
  PolarNodes nodes_;
  std::vector<Offset> offsets_;
};

CollisionResult eval_Q(const Distribution& g, const Distribution& f, const CollisionKernel& kernel,
                       const QuadratureSpec& quad);
Eigen::ArrayXd eval_gain(const Distribution& f, const CollisionKernel& kernel,
                         const QuadratureSpec& quad);
Eigen::ArrayXd eval_loss_rate(const Distribution& f, const CollisionKernel& kernel,
                              const QuadratureSpec& quad);
EntropyProduction entropy_production(const Distribution& f, const CollisionKernel& kernel,
                                     const QuadratureSpec& quad);

struct Coercivity {
  double c_hat = 0.0;
  Eigen::ArrayXd profile;  ///< int S Phi dv_* / <v>^gamma at every node
};

/// Lower bound of int S(v_*) Phi(|v - v_*|) dv_* / <v>^gamma over the grid.
Coercivity coercivity_lower_bound(const Distribution& s, const KineticKernel& phi,
                                  double diagonal_exclusion_radius = 0.0);

/// Average of |z + u|^gamma over the cell u in [-h/2, h/2]^N.
double cell_average_power(const Eigen::VectorXd& z, double h, double gamma);

}  // namespace boltzstab
