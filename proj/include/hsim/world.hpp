#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hsim/collision.hpp"
#include "hsim/failure.hpp"
#include "hsim/kinematics.hpp"

namespace hsim {

struct SceneObject {
  std::string id;
  std::string type;   // bowl | spoon | cup | milk | cereal | ...
  std::string color;  // symbol, e.g. red
  Shape shape;
  Pose pose;  // world pose; when attached, pose relative to the attachment link
  std::optional<std::string> attachment;  // robot link name
  double mass = 0.1;  // kg, > 0
};

enum class ContainerKind { Drawer, Door, DishwasherDoor };

struct ArticulatedContainer {
  std::string id;
  std::string joint;  // dof name in the environment tree
  ContainerKind kind = ContainerKind::Drawer;
  std::string moving_link;
  Pose handle;  // handle frame relative to the moving link
  double open_position = 0.0;
  double closed_position = 0.0;
};

/// Belief state: robot + environment kinematic trees, joint positions, free
/// objects and attachments. Value semantics; copies are independent worlds.
class WorldState {
 public:
  std::shared_ptr<const KinematicTree> robot;
  std::shared_ptr<const KinematicTree> environment;
  std::map<std::string, double> joint_positions;  // dof name -> value, both trees
  std::vector<SceneObject> objects;
  std::vector<ArticulatedContainer> containers;
  double sim_time = 0.0;

  // workspace footprint for base-pose grids
  double x_min = -3.0, x_max = 3.0, y_min = -3.0, y_max = 3.0;

  std::vector<double> robot_config() const;
  std::vector<double> environment_config() const;
  void set_robot_config(std::span<const double> q);

  double joint_position(const std::string& dof) const;
  void set_joint_position(const std::string& dof, double value);

  /// World pose of a link in either tree.
  Pose link_pose(const std::string& link) const;
  bool has_link(const std::string& link) const;

  /// World pose of an object (resolves attachment).
  Pose object_pose(const SceneObject& obj) const;
  Pose object_pose(const std::string& id) const;

  SceneObject& object(const std::string& id);
  const SceneObject& object(const std::string& id) const;
  bool has_object(const std::string& id) const;
  const ArticulatedContainer& container(const std::string& id) const;
  bool has_container(const std::string& id) const;

  /// Rigidly attach an object to a robot link. The object must currently be
  /// within `tolerance` of the link frame origin, else grasp-failure.
  void attach(const std::string& object_id, const std::string& link, double tolerance = 0.05);
  void detach(const std::string& object_id);

  /// FNV-1a hash over the full mutable state, for purity checks and
  /// determinism audits.
  uint64_t hash() const;

  /// Checks the attached-object and joint-limit invariants; throws
  /// std::logic_error with a description on violation.
  void audit() const;
};

/// One collision geometry instance in the current world.
struct WorldShape {
  Shape shape;
  Pose pose;
  enum class Owner { RobotLink, EnvironmentLink, Object } owner;
  std::string name;  // link name or object id
};

/// All posed collision shapes. Attached objects are reported as robot-owned.
std::vector<WorldShape> collect_shapes(const WorldState& w);

struct SettleParams {
  int max_iterations = 200;
  double support_tolerance = 0.002;   // m
  double offset_step = 0.01;          // m, iterative correction step
  double significant_translation = 0.05;  // m, horizontal or upward motion
  double significant_drop = 0.25;         // m, plain fall-to-support below this is expected
  double significant_rotation = 0.35;     // rad
};

struct SettleResult {
  Pose pose;
  bool corrected_significantly = false;
};

/// Quasi-static settling of a free object: resolve penetration by minimal
/// translation along contact normals, drop along -z to the first support
/// contact, topple boxes whose center of mass leaves the support polygon.
/// Throws PlanFailure(Settle) when no stable pose is found.
SettleResult settle(WorldState& w, const std::string& object_id,
                    const SettleParams& params = SettleParams{});

/// Settle computation without mutating the world.
SettleResult settle_preview(const WorldState& w, const std::string& object_id,
                            const SettleParams& params = SettleParams{});

}  // namespace hsim
