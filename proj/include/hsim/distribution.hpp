#pragma once

#include <string>
#include <vector>

#include "hsim/geom.hpp"
#include "hsim/rng.hpp"

namespace hsim {

class EmptySupport : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Discrete distribution over base poses (x, y, θ) on a regular grid.
/// Weights are nonnegative and sum to 1 over the support.
struct PoseDistribution {
  double x0 = 0.0, y0 = 0.0;   // center of cell (0, 0)
  double res = 0.05;           // meters per cell
  int nx = 0, ny = 0;
  int ntheta = 16;
  double z = 0.0;              // reference height for placement distributions
  std::vector<double> w;       // nx * ny * ntheta weights

  int index(int ix, int iy, int it) const { return (ix * ny + iy) * ntheta + it; }
  double& at(int ix, int iy, int it) { return w[index(ix, iy, it)]; }
  double at(int ix, int iy, int it) const { return w[index(ix, iy, it)]; }

  double theta_of(int it) const { return 2.0 * M_PI * it / ntheta; }
  double x_of(int ix) const { return x0 + ix * res; }
  double y_of(int iy) const { return y0 + iy * res; }
  Pose pose_at(int ix, int iy, int it) const {
    return Pose::translation(x_of(ix), y_of(iy), 0.0) * Pose::rot_z(theta_of(it));
  }

  bool empty_support() const;
  /// Scale weights to sum 1; throws EmptySupport when all weights are zero.
  void normalize();
  /// Cell index with the highest weight (lowest linear index wins ties).
  int argmax() const;
  /// Weight-proportional draw of a cell-center pose.
  Pose sample(Rng& rng) const;
  int sample_index(Rng& rng) const;

  /// Heat-map export: x,y,theta,weight per line.
  std::string to_csv() const;
};

}  // namespace hsim
