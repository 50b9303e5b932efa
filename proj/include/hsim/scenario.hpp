#pragma once

#include <map>
#include <string>
#include <vector>

#include "hsim/rng.hpp"
#include "hsim/worldio.hpp"

namespace hsim {

/// Symbolic storage location: a surface link ("on:<link>") or a container
/// ("in:<container>"). Spawn poses get per-run jitter around the anchor.
struct SpawnRule {
  std::string object_id;
  std::string location;   // "on:<link>" | "in:<container>"
  Vec3 anchor{0, 0, 0};   // nominal position (world)
  double jitter_xy = 0.04;
  double jitter_yaw = M_PI;
};

struct TransportTask {
  std::string object_id;
  std::string destination;       // "on:<link>" | "in:<container>"
  std::string source_container;  // open before fetching, "" if none
  std::string dest_container;    // open before delivering, "" if none
};

struct Scenario {
  std::string environment_file;
  Vec3 robot_home{0, 0, 0};  // base (x, y, theta) at run start
  std::vector<SpawnRule> spawns;
  std::vector<TransportTask> setting;
  std::vector<TransportTask> cleaning;

  /// Parse and cross-check every referenced link/container/object against the
  /// environment (format tag "hsim-scenario-1").
  static Scenario load(const std::string& path);
};

struct FailureInjectionConfig {
  std::map<std::string, double> perception_miss;  // per object type
  double default_miss = 0.0;
  double grasp_slip_base = 0.0;       // scaled by alignment error and thinness
  double grasp_slip_thin_scale = 1.0;
  std::map<std::string, double> handle_slip;  // per container
  double handle_slip_default = 0.0;
  double base_noise_sigma = 0.0;  // localization noise after navigation, m
  double carry_drop_prob = 0.0;   // cleaning only: object drops to the floor
  double gripper_jam_prob = 0.0;  // cleaning only: jam at the dishwasher
  uint64_t seed = 0;

  void check() const;  // probabilities in [0, 1], sigma >= 0
};

struct HarnessConfig {
  std::string scenario_path;
  std::string robot_file;
  std::string grasp_file;
  std::string mode = "heuristic";  // heuristic | specialized
  int runs = 5;
  std::vector<uint64_t> seeds{1, 2, 3, 4, 5};
  FailureInjectionConfig injection;
  std::string output_dir = "out";
  std::string models_dir;  // specialized mode reads GaussianModel files here

  static HarnessConfig load(const std::string& path);
};

/// Instantiate the scenario for one run: load the environment, spawn objects
/// at jittered, settled poses, and place the robot at its home pose.
WorldState spawn_scenario(const Scenario& sc, const RobotInfo& robot, uint64_t seed);

}  // namespace hsim
