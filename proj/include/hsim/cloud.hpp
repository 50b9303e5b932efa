#pragma once

#include <string>
#include <vector>

#include "hsim/rng.hpp"
#include "hsim/world.hpp"

namespace hsim {

/// Points in the camera frame. The source id is the ground-truth association
/// used instead of a learned segmenter.
struct PointCloud {
  std::vector<Vec3> points;
  std::string source_id;
};

class PcaDegenerate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PcaResult {
  Vec3 centroid;
  Eigen::Matrix3d axes;  // columns, orthonormal, right-handed, eigenvalue-descending
  Vec3 eigenvalues;
};

/// Uniform-ish surface samples of a primitive in its local frame.
std::vector<Vec3> surface_samples(const Shape& s, int n, Rng& rng);

/// Simulated depth view of one object: rays from the camera toward surface
/// samples, first-hit visibility against the whole scene, Gaussian noise and
/// dropout. Camera looks along +x; fov is the half-angle of the cone.
PointCloud render_cloud(const WorldState& w, const Pose& camera, const std::string& object_id,
                        double noise_sigma, double dropout, uint64_t seed, int rays = 600,
                        double fov = 1.0);

PcaResult pca_axes(const PointCloud& cloud);

std::string cloud_to_xyz(const PointCloud& cloud);

}  // namespace hsim
