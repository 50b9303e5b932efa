#pragma once

#include <vector>

#include "hsim/geom.hpp"

namespace hsim {

/// Rotations mapping model axes onto measured axes: the 24 proper signed
/// permutations by default, or the 12 even ones in "paper-12" mode.
std::vector<Quat> axis_candidates(bool paper12 = false);

struct IcpResult {
  Pose transform;  // maps model-frame points into the target frame
  double score = 0.0;  // final mean squared correspondence error
  int iterations = 0;
};

/// Point-to-point ICP: nearest-neighbor correspondences against a kd-tree of
/// the target, orthogonal-Procrustes alignment, until the MSE change drops
/// below tol or max_iters is reached.
IcpResult icp(const std::vector<Vec3>& model, const std::vector<Vec3>& target, const Pose& init,
              int max_iters = 60, double tol = 1e-10);

}  // namespace hsim
