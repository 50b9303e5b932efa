#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hsim/qp.hpp"
#include "hsim/world.hpp"
#include "hsim/worldio.hpp"

namespace hsim {

enum class CollisionMode {
  AvoidAll,
  AllowAll,
  AllowArm,
  AllowHand,
  AllowFingers,
  AllowFingersAndObject,
};

CollisionMode collision_mode_from_string(const std::string& s);

enum class MotionConstraint { KeepVertical, LookAtHand, JointCentering };

enum class MotionType { MovingArm, MovingBase, Opening, Closing, Looking };

/// Symbolic motion description, the unit the plan executive hands to motion.
struct MotionGoalSpec {
  MotionType type = MotionType::MovingArm;
  std::map<std::string, Pose> goal_poses;  // end-effector frame -> world pose
  CollisionMode collision_mode = CollisionMode::AvoidAll;
  std::string collision_object;       // scope of the mode's allowance
  std::string collision_object_part;  // narrows it to one link / object
  std::vector<MotionConstraint> constraints;
  std::string arm = "right";      // acting arm for arm-relative modes/constraints
  std::string container;          // opening/closing
  double container_target = 0.0;  // env joint target for opening/closing
  std::string look_target_link;   // Looking: frame to look at...
  Vec3 look_target_point{0, 0, 0};  // ...or a fixed point
  bool look_at_point = false;
};

/// Goal precedence tiers; invariant w_cb < w_c < w_ca.
struct Weights {
  double w_cb = 1.0;    // ordinary goals
  double w_c = 10.0;    // collision standoff
  double w_ca = 100.0;  // environment-interaction goals
};

struct ControlParams {
  double dt = 0.02;       // s, sim time per tick
  int max_ticks = 3000;
  double eps_reg = 1e-4;  // regularization on joint velocities
  double d_hard = 0.0;    // non-penetration bound
  double d_soft = 0.05;   // standoff kept at weight w_c
  double broadphase = 0.3;      // monitor pairs closer than this
  double p_gain = 3.0;          // error feedback gain
  double lin_cap = 0.4;         // m/s velocity cap on pose errors
  double ang_cap = 1.2;         // rad/s
  double pos_tol = 0.005;       // convergence thresholds
  double rot_tol = 0.02;
  double limit_funnel = 0.05;   // fraction of joint range
  double articulation_rate = 0.15;  // m/s or rad/s of container joint reference
};

/// One row block of the velocity QP contributed by a task function.
struct TaskRows {
  Eigen::MatrixXd jacobian;  // m x n_robot_dofs
  Eigen::VectorXd lo, hi;    // desired derivative bounds (lo == hi: tracking row)
  double weight = 1.0;
  bool hard = false;
  std::string name;
};

/// A differentiable task function with bounded first derivative.
class TaskGoal {
 public:
  virtual ~TaskGoal() = default;
  virtual std::string name() const = 0;
  /// f(o) at the current world state.
  virtual Eigen::VectorXd value(const WorldState& w) const = 0;
  /// df/dq over the robot DOFs.
  virtual Eigen::MatrixXd jacobian(const WorldState& w) const = 0;
  /// QP rows (desired derivative window + weight).
  virtual TaskRows rows(const WorldState& w, const ControlParams& p) const;
  /// Convergence error; negative means "not a convergence criterion".
  virtual double error(const WorldState& w) const { return value(w).cwiseAbs().maxCoeff(); }
  /// Per-tick state update (e.g. articulation reference advance).
  virtual void on_tick(WorldState&, const ControlParams&) {}
  double weight = 1.0;
};

std::shared_ptr<TaskGoal> make_cartesian_pose_goal(std::string frame, Pose target, double weight);
std::shared_ptr<TaskGoal> make_planar_pose_goal(std::string frame, Pose target, double weight);
std::shared_ptr<TaskGoal> make_keep_vertical_goal(std::string frame, Vec3 local_axis,
                                                  double weight);
std::shared_ptr<TaskGoal> make_look_at_goal(std::string camera_link, std::string target_link,
                                            Vec3 target_point, bool use_point, double weight);
std::shared_ptr<TaskGoal> make_joint_centering_goal(const RobotInfo& robot, double weight);
std::shared_ptr<TaskGoal> make_follow_articulation_goal(const RobotInfo& robot,
                                                        const ArticulatedContainer& container,
                                                        std::string gripper_frame, double target,
                                                        double weight);

/// Monitored closest-point observation for one link/obstacle pair.
struct CollisionObservation {
  std::string link;      // robot link (or grasped object id)
  std::string obstacle;  // environment link or object id
  Vec3 on_link, on_obstacle, normal;  // normal points from obstacle to link
  double distance = 0.0;
};

/// Observable vector refreshed each tick: joint positions plus closest-point
/// data for all monitored pairs.
struct Observables {
  Eigen::VectorXd q;
  std::vector<CollisionObservation> collisions;
};

struct ControlProblem {
  std::vector<std::shared_ptr<TaskGoal>> goals;
  std::vector<std::shared_ptr<TaskGoal>> convergence_goals;  // subset that gates convergence
  CollisionMode collision_mode = CollisionMode::AvoidAll;
  std::function<bool(const WorldShape&)> obstacle_in_scope;  // mode allowance target
  std::vector<std::string> exempt_links;   // robot links exempt vs the scope
  std::vector<std::string> exempt_objects; // grasped objects exempt vs the scope
  Weights weights;
  ControlParams params;
  RobotInfo robot;
};

ControlProblem compile(const MotionGoalSpec& spec, const WorldState& w, const RobotInfo& robot,
                       const Weights& weights = Weights{},
                       const ControlParams& params = ControlParams{});

Observables observe(const ControlProblem& p, const WorldState& w);

struct TickResult {
  Eigen::VectorXd qdot;
  bool feasible = false;
  double min_distance = std::numeric_limits<double>::infinity();
  QpProblem qp;        // assembled problem, for verification
  QpSolution solution;
};

TickResult solve_tick(const ControlProblem& p, const WorldState& w, const Observables& o);

struct Trajectory {
  std::vector<std::pair<double, std::vector<double>>> points;  // (sim time, robot config)
  bool converged = false;
  double min_monitored_distance = std::numeric_limits<double>::infinity();
  int ticks = 0;
};

/// Integrates solve_tick until convergence or the tick budget runs out,
/// mutating the robot configuration (and tracked container joints) in `w`.
/// `on_tick` runs after each integration step; returning false aborts.
Trajectory execute(ControlProblem& p, WorldState& w,
                   const std::function<bool(WorldState&, int)>& on_tick = {});

/// Trajectory CSV dump: tick, time, one column per DOF.
void write_trajectory_csv(const Trajectory& t, const RobotInfo& robot, const std::string& path);

}  // namespace hsim
