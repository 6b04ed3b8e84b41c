#pragma once

#include <Eigen/Dense>
#include <array>
#include <iosfwd>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace boltzstab {

/**
 * Uniform velocity grid on [-L, L)^N with n nodes per axis.
 *
 * Node k on an axis sits at -L + k h, h = 2L/n, so each node is the center of
 * the cell [v - h/2, v + h/2] and v = 0 is a node. Storage is row-major with
 * the last axis fastest.
 */
class VelocityGrid {
 public:
  VelocityGrid(int dimension, double half_width, int points_per_axis);

  int dimension() const { return dim_; }
  double half_width() const { return half_width_; }
  int points_per_axis() const { return n_; }
  double spacing() const { return h_; }
  double cell_volume() const { return cell_volume_; }
  Eigen::Index size() const { return size_; }

  double coordinate(int k) const { return h_ * (k - 0.5 * n_); }
  Eigen::Index stride(int axis) const { return strides_[axis]; }

  /// Component `axis` of every node.
  const Eigen::ArrayXd& component(int axis) const { return coords_[axis]; }
  const Eigen::ArrayXd& speed_squared() const { return speed2_; }
  /// <v> = sqrt(1 + |v|^2) at every node.
  const Eigen::ArrayXd& bracket() const { return bracket_; }

  Eigen::VectorXd velocity(Eigen::Index flat) const;
  std::array<int, 3> multi_index(Eigen::Index flat) const;
  Eigen::Index flat_index(const std::array<int, 3>& idx) const;

  bool operator==(const VelocityGrid& o) const {
    return dim_ == o.dim_ && half_width_ == o.half_width_ && n_ == o.n_;
  }

 private:
  int dim_;
  double half_width_;
  int n_;
  double h_;
  double cell_volume_;
  Eigen::Index size_;
  std::array<Eigen::Index, 3> strides_{};
  std::vector<Eigen::ArrayXd> coords_;
  Eigen::ArrayXd speed2_;
  Eigen::ArrayXd bracket_;
};

using GridPtr = std::shared_ptr<const VelocityGrid>;

GridPtr make_grid(int dimension, double half_width, int points_per_axis);

/// Nodal values on a grid, with the time they belong to.
struct Distribution {
  GridPtr grid;
  Eigen::ArrayXd values;
  double time = 0.0;

  Distribution() = default;
  Distribution(GridPtr g, Eigen::ArrayXd v, double t = 0.0);
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// ||f||_{L^p_s} = (sum |f|^p <v>^{ps} h^N)^{1/p}; p = kInfinity gives max |f| <v>^s.
double lp_norm(const VelocityGrid& grid, const Eigen::ArrayXd& f, double p, double s = 0.0);
double lp_norm(const Distribution& f, double p, double s = 0.0);

/// First differences along `axis`: fourth-order centered inside, second order in the two
/// outer layers.
Eigen::ArrayXd partial(const VelocityGrid& grid, const Eigen::ArrayXd& f, int axis);

/// Second difference along `axis`.
Eigen::ArrayXd second_partial(const VelocityGrid& grid, const Eigen::ArrayXd& f, int axis);

/**
 * ||f||_{W^{k,p}_s}, k <= 2, as (sum_{|alpha| <= k} ||d^alpha f||^p_{L^p_s})^{1/p}.
 * For p = kInfinity the maximum over alpha.
 */
double sobolev_norm(const VelocityGrid& grid, const Eigen::ArrayXd& f, int k, double p,
                    double s = 0.0);
double sobolev_norm(const Distribution& f, int k, double p, double s = 0.0);

/// ||grad f||_{L^p_s} with the Euclidean length of the gradient.
double gradient_lp_norm(const VelocityGrid& grid, const Eigen::ArrayXd& f, double p,
                        double s = 0.0);

struct Moments {
  double mass = 0.0;
  Eigen::VectorXd momentum;
  double energy = 0.0;  ///< int f |v|^2
};

Moments moments(const VelocityGrid& grid, const Eigen::ArrayXd& f);
Moments moments(const Distribution& f);

/// sum f log f h^N with 0 log 0 = 0. Throws DomainError on negative values.
double entropy(const Distribution& f);

Distribution maxwellian(GridPtr grid, double rho, const Eigen::VectorXd& u, double temperature);

/// Maxwellian whose discrete mass, momentum and energy equal those of f.
Distribution matching_maxwellian(const Distribution& f);

/// Value at an arbitrary velocity; order 1 multilinear, order 3 tensor cubic. 0 outside the box.
double interpolate(const Distribution& f, const Eigen::VectorXd& v, int order = 1);

void write_checkpoint(std::ostream& os, const Distribution& f);
Distribution read_checkpoint(std::istream& is);

/// Named initial data with closed-form moments, all of unit mass unless rho is given.
struct InitialData {
  std::string shape = "maxwellian";  ///< maxwellian | bimodal | anisotropic | bump
  double rho = 1.0;
  double temperature = 1.0;            ///< maxwellian, bimodal (per mode)
  double separation = 1.5;             ///< bimodal: modes at +-separation e_1
  std::vector<double> temperatures;    ///< anisotropic, one per axis
  double radius = 3.0;                 ///< bump
  int power = 6;                       ///< bump: (1 - |v|^2/R^2)_+^power
  std::vector<double> center;          ///< optional drift, default 0
};

Distribution make_initial(GridPtr grid, const InitialData& spec);

/// Closed-form (continuum) mass and energy of the named data.
Moments exact_moments(const InitialData& spec, int dimension);

/// Bounded, moment-free perturbation of f0 (mass, momentum and energy all zero).
struct Perturbation {
  std::string shape = "tilt";  ///< tilt | cosine | radial | odd-cubic
  double amplitude = 0.05;
};

Eigen::ArrayXd make_perturbation(const Distribution& f0, const Perturbation& p);

}  // namespace boltzstab
