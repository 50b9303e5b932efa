#pragma once

#include <map>

#include "hsim/cloud.hpp"
#include "hsim/designator.hpp"
#include "hsim/icp.hpp"

namespace hsim {

struct PerceptionConfig {
  double noise_sigma = 0.002;
  double dropout = 0.05;
  bool paper12 = false;  // 12 even axis candidates instead of all 24
  int model_samples = 500;
  int icp_max_iters = 60;
  double icp_tol = 1e-10;
  int rays = 600;
  double fov = 1.0;
  std::map<std::string, double> miss_probability;  // per object type
  double default_miss = 0.0;
};

/// Query answer: the matched object augmented with an estimated, physically
/// plausible pose. Score is the best ICP residual (covariance proxy).
struct DetectionResult {
  std::string object_id;
  std::string type;
  std::string color;
  Pose pose;
  double score = 0.0;
  double confidence = 0.0;  // exp(-score / sigma^2)
  bool corrected_by_physics = false;
  int candidate_index = -1;
  std::vector<double> candidate_scores;  // per axis candidate, for audits

  DesignatorPtr to_designator() const;
};

/// Deterministic per-type model cloud used as the ICP source.
std::vector<Vec3> model_cloud_for(const std::string& type, const Shape& shape, int n = 500);

/// PCA axes, one ICP run per axis-labeling candidate, best score wins (ties
/// to the lowest candidate index), then a settle pass for plausibility.
DetectionResult estimate_pose(const std::string& object_type, const PointCloud& cloud,
                              const Pose& camera, const WorldState& w,
                              const PerceptionConfig& cfg = {});

/// Taskable query: filter scene objects by the designator's type/color,
/// render a cloud for the match and estimate its pose. Misses (occlusion,
/// absent object, injected false negative) raise PlanFailure(Perception).
DetectionResult detect(const Designator& query, const WorldState& w, const Pose& camera,
                       uint64_t seed, const PerceptionConfig& cfg = {});

}  // namespace hsim
