#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hsim/distribution.hpp"
#include "hsim/episode.hpp"

namespace hsim {

class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-task multivariate Gaussian over the continuous action parameters.
/// The theta component (if any) is circular: the stored mean is the circular
/// mean and deviations are wrapped to (-pi, pi]. This assumes successful
/// orientations cluster tightly; multimodal orientation sets are out of scope.
struct GaussianModel {
  std::string task_key;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  int count = 0;
  int theta_index = -1;

  double density(const Eigen::VectorXd& x) const;

  void save(const std::string& path) const;
  static GaussianModel load(const std::string& path);
};

struct FitOptions {
  double ridge = 1e-6;
  int theta_index = 2;  // base-pose layout (x, y, theta); -1 for none
};

/// MLE fit over the successful episodes matching the key.
GaussianModel fit(const std::vector<Episode>& episodes, const std::string& task_key,
                  const FitOptions& opt = {});

/// Learned density multiplied into a heuristic prior, cell by cell.
struct CombinedDistribution {
  GaussianModel learned;
  PoseDistribution prior;
  PoseDistribution product;  // normalized; support subset of the prior's
};

CombinedDistribution combine(const GaussianModel& model, const PoseDistribution& prior);

/// Seeded cell-center draws of (x, y, theta) from the combined product.
std::vector<Eigen::Vector3d> sample(const CombinedDistribution& dist, uint64_t seed, int n);

}  // namespace hsim
