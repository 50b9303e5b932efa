#pragma once

#include <deque>
#include <optional>

#include "hsim/designator.hpp"
#include "hsim/distribution.hpp"
#include "hsim/exec.hpp"

namespace hsim {

/// One grasp from the per-object-type catalog.
struct GraspSpec {
  std::string id;
  std::string object_type;
  Vec3 approach{1, 0, 0};       // approach direction in the object frame
  Quat orientation{1, 0, 0, 0}; // gripper orientation in the object frame
  double pregrasp_offset = 0.1; // meters backed off along the approach
  double opening = 0.08;        // gripper opening, meters
  double force = 30.0;          // effort setpoint
  int priority = 0;             // lower tries first
};

class GraspCatalog {
 public:
  static GraspCatalog load(const std::string& path);
  /// Grasps for an object type, ordered by priority. Empty if unknown.
  std::vector<GraspSpec> for_type(const std::string& object_type) const;
  const std::vector<GraspSpec>& all() const { return grasps_; }
  const GraspSpec& by_id(const std::string& id) const;

 private:
  std::vector<GraspSpec> grasps_;
};

/// Heuristic constants of the grounding predicates.
struct ReasonerParams {
  double grid_res = 0.05;
  int theta_bins = 16;
  double reach_inner = 0.4;   // reachability annulus, meters
  double reach_outer = 0.9;
  double facing_tolerance = 0.7;  // rad, base heading vs. target bearing
  double visible_min = 0.5;   // line-of-sight distance band
  double visible_max = 2.5;
  double camera_height = 1.2;
  double placement_margin = 0.04;   // shrink of support footprints
  double occupied_margin = 0.07;    // xy clearance to existing objects on a surface
};

/// Grounds a symbolic location designator to a pose distribution:
/// (a location (reachable-for cup)), (visible-for …), (on map-link),
/// (in container-id). Throws PlanFailure(navigation) on empty support.
PoseDistribution ground_location(const Designator& location, const WorldState& w,
                                 const RobotInfo& robot,
                                 const ReasonerParams& params = ReasonerParams{});

/// Query for one missing action parameter.
struct ParameterQuery {
  std::string action_type;
  std::string parameter;  // arm | grasp | base-pose | gripper-opening |
                          // grasping-force | placement-pose
  DesignatorPtr object;   // object/container context designator
  const WorldState* world = nullptr;
  const RobotInfo* robot = nullptr;
  const GraspCatalog* catalog = nullptr;
  uint64_t seed = 0;
  int max_candidates = 12;
  ReasonerParams params;
};

/// Deterministic finite stream of candidate values for one parameter.
class CandidateStream {
 public:
  explicit CandidateStream(std::vector<Value> items) : items_(std::move(items)) {}
  std::optional<Value> next() {
    if (pos_ >= items_.size()) return std::nullopt;
    return items_[pos_++];
  }
  size_t remaining() const { return items_.size() - pos_; }

 private:
  std::vector<Value> items_;
  size_t pos_ = 0;
};

CandidateStream infer(const ParameterQuery& q);

/// Runs the action in a noise-free clone of the world ("projection"); the
/// real world is untouched. `setup` registers the generalized plans on the
/// projection interpreter. Returns the projected outcome instead of raising.
Outcome validate_by_projection(const DesignatorPtr& action, const WorldState& world,
                               const RobotInfo& robot,
                               const std::function<void(Interpreter&)>& setup);

}  // namespace hsim
