#pragma once

#include <memory>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "hsim/world.hpp"

namespace hsim {

/// Semantic handles into the robot model used by planning and control.
struct RobotInfo {
  std::shared_ptr<KinematicTree> tree;
  std::string base_link;
  std::string camera_link;
  std::string torso_dof;
  std::map<std::string, std::string> gripper_link;  // arm ("left"/"right") -> tool frame link
  std::map<std::string, std::string> gripper_dof;   // arm -> gripper opening dof
  std::map<std::string, std::vector<std::string>> arm_links;    // arm -> all arm links
  std::map<std::string, std::vector<std::string>> hand_links;   // arm -> hand links
  std::map<std::string, std::vector<std::string>> finger_links; // arm -> finger links
  double base_radius = 0.35;   // footprint disc for base-pose grids
  double gripper_min = 0.0;    // opening range
  double gripper_max = 0.09;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parse a kinematic tree from the declarative JSON schema shared by the
/// robot and environment files (see config/README notes in the repo README).
std::shared_ptr<KinematicTree> parse_tree(const nlohmann::json& j);

Shape parse_shape(const nlohmann::json& j);
Pose parse_pose(const nlohmann::json& j);

/// Load a robot model file (format tag "hsim-robot-1").
RobotInfo load_robot_file(const std::string& path);

/// Load an environment file (format tag "hsim-env-1") into a world with no
/// robot: environment tree, initial joint positions, objects, containers.
WorldState load_environment_file(const std::string& path);

nlohmann::json load_json_file(const std::string& path);

}  // namespace hsim
