#include "hsim/control.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace hsim {

CollisionMode collision_mode_from_string(const std::string& s) {
  if (s == "avoid-all") return CollisionMode::AvoidAll;
  if (s == "allow-all") return CollisionMode::AllowAll;
  if (s == "allow-arm") return CollisionMode::AllowArm;
  if (s == "allow-hand") return CollisionMode::AllowHand;
  if (s == "allow-fingers") return CollisionMode::AllowFingers;
  if (s == "allow-fingers-and-object") return CollisionMode::AllowFingersAndObject;
  throw std::invalid_argument("unknown collision mode " + s);
}

namespace {

double clamp_abs(double v, double cap) { return std::clamp(v, -cap, cap); }

Eigen::Matrix3d skew(const Vec3& v) {
  Eigen::Matrix3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

// Inverse right Jacobian of SO(3) at rotation vector e; maps body angular
// velocity to the derivative of the log coordinates.
Eigen::Matrix3d right_jacobian_inverse(const Vec3& e) {
  double theta = e.norm();
  Eigen::Matrix3d S = skew(e);
  if (theta < 1e-8) return Eigen::Matrix3d::Identity() + 0.5 * S;
  double c =
      1.0 / (theta * theta) - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  return Eigen::Matrix3d::Identity() + 0.5 * S + c * S * S;
}

class CartesianPoseGoal : public TaskGoal {
 public:
  CartesianPoseGoal(std::string frame, Pose target, double w)
      : frame_(std::move(frame)), target_(std::move(target)) {
    weight = w;
  }
  std::string name() const override { return "cartesian_pose:" + frame_; }

  Eigen::VectorXd value(const WorldState& w) const override {
    Pose p = w.robot->link_pose(w.robot_config(), frame_);
    Eigen::VectorXd f(6);
    f.head<3>() = p.t - target_.t;
    f.tail<3>() = rotation_vector(target_.q * p.q.conjugate());
    return f;
  }

  Eigen::MatrixXd jacobian(const WorldState& w) const override {
    auto q = w.robot_config();
    Pose p = w.robot->link_pose(q, frame_);
    Eigen::MatrixXd J6 = w.robot->jacobian(q, frame_, p.t);
    Eigen::MatrixXd J(6, J6.cols());
    J.topRows(3) = J6.topRows(3);
    Vec3 e = rotation_vector(target_.q * p.q.conjugate());
    J.bottomRows(3) = -right_jacobian_inverse(e) * J6.bottomRows(3);
    return J;
  }

  TaskRows rows(const WorldState& w, const ControlParams& p) const override {
    Eigen::VectorXd f = value(w);
    TaskRows r;
    r.name = name();
    r.jacobian = jacobian(w);
    r.lo.resize(6);
    for (int i = 0; i < 3; ++i) r.lo[i] = clamp_abs(-p.p_gain * f[i], p.lin_cap);
    for (int i = 3; i < 6; ++i) r.lo[i] = clamp_abs(-p.p_gain * f[i], p.ang_cap);
    r.hi = r.lo;
    r.weight = weight;
    return r;
  }

  double error(const WorldState& w) const override {
    Eigen::VectorXd f = value(w);
    // rotation scaled so a single positional threshold gates both
    return std::max(f.head<3>().norm(), 0.25 * f.tail<3>().norm());
  }

 protected:
  std::string frame_;
  Pose target_;
};

class PlanarPoseGoal : public TaskGoal {
 public:
  PlanarPoseGoal(std::string frame, Pose target, double w)
      : frame_(std::move(frame)), target_(std::move(target)) {
    weight = w;
  }
  std::string name() const override { return "planar_pose:" + frame_; }

  Eigen::VectorXd value(const WorldState& w) const override {
    Pose p = w.robot->link_pose(w.robot_config(), frame_);
    double yaw = std::atan2(2.0 * (p.q.w() * p.q.z() + p.q.x() * p.q.y()),
                            1.0 - 2.0 * (p.q.y() * p.q.y() + p.q.z() * p.q.z()));
    double yaw_t = std::atan2(2.0 * (target_.q.w() * target_.q.z() + target_.q.x() * target_.q.y()),
                              1.0 - 2.0 * (target_.q.y() * target_.q.y() +
                                           target_.q.z() * target_.q.z()));
    double dyaw = std::remainder(yaw - yaw_t, 2.0 * M_PI);
    return Eigen::Vector3d(p.t.x() - target_.t.x(), p.t.y() - target_.t.y(), dyaw);
  }

  Eigen::MatrixXd jacobian(const WorldState& w) const override {
    auto q = w.robot_config();
    Pose p = w.robot->link_pose(q, frame_);
    Eigen::MatrixXd J6 = w.robot->jacobian(q, frame_, p.t);
    Eigen::MatrixXd J(3, J6.cols());
    J.row(0) = J6.row(0);
    J.row(1) = J6.row(1);
    J.row(2) = J6.row(5);
    return J;
  }

  TaskRows rows(const WorldState& w, const ControlParams& p) const override {
    Eigen::VectorXd f = value(w);
    TaskRows r;
    r.name = name();
    r.jacobian = jacobian(w);
    r.lo.resize(3);
    r.lo[0] = clamp_abs(-p.p_gain * f[0], p.lin_cap);
    r.lo[1] = clamp_abs(-p.p_gain * f[1], p.lin_cap);
    r.lo[2] = clamp_abs(-p.p_gain * f[2], p.ang_cap);
    r.hi = r.lo;
    r.weight = weight;
    return r;
  }

  double error(const WorldState& w) const override {
    Eigen::VectorXd f = value(w);
    return std::max(f.head<2>().norm(), 0.25 * std::abs(f[2]));
  }

 private:
  std::string frame_;
  Pose target_;
};

class KeepVerticalGoal : public TaskGoal {
 public:
  KeepVerticalGoal(std::string frame, Vec3 axis, double w)
      : frame_(std::move(frame)), axis_(axis.normalized()) {
    weight = w;
  }
  std::string name() const override { return "keep_vertical:" + frame_; }

  Eigen::VectorXd value(const WorldState& w) const override {
    Vec3 a = w.robot->link_pose(w.robot_config(), frame_).q * axis_;
    return Eigen::Vector2d(a.x(), a.y());
  }

  Eigen::MatrixXd jacobian(const WorldState& w) const override {
    auto q = w.robot_config();
    Pose p = w.robot->link_pose(q, frame_);
    Vec3 a = p.q * axis_;
    Eigen::MatrixXd J6 = w.robot->jacobian(q, frame_, p.t);
    Eigen::MatrixXd J(2, J6.cols());
    for (int c = 0; c < J6.cols(); ++c) {
      Vec3 da = Vec3(J6.block<3, 1>(3, c)).cross(a);
      J(0, c) = da.x();
      J(1, c) = da.y();
    }
    return J;
  }

  double error(const WorldState&) const override { return -1.0; }  // not a convergence gate

 private:
  std::string frame_;
  Vec3 axis_;
};

class LookAtGoal : public TaskGoal {
 public:
  LookAtGoal(std::string camera, std::string target_link, Vec3 target_point, bool use_point,
             double w)
      : camera_(std::move(camera)),
        target_link_(std::move(target_link)),
        point_(target_point),
        use_point_(use_point) {
    weight = w;
  }
  std::string name() const override { return "look_at:" + camera_; }

  Eigen::VectorXd value(const WorldState& w) const override {
    auto q = w.robot_config();
    Pose cam = w.robot->link_pose(q, camera_);
    Vec3 t = use_point_ ? point_ : w.robot->link_pose(q, target_link_).t;
    Vec3 l = cam.q.conjugate() * (t - cam.t);
    double n = l.norm();
    if (n < 1e-9) return Eigen::Vector2d::Zero();
    Vec3 u = l / n;
    return Eigen::Vector2d(u.y(), u.z());  // zero iff camera x-axis points at target
  }

  Eigen::MatrixXd jacobian(const WorldState& w) const override {
    auto q = w.robot_config();
    Pose cam = w.robot->link_pose(q, camera_);
    Vec3 t = use_point_ ? point_ : w.robot->link_pose(q, target_link_).t;
    Vec3 d = t - cam.t;
    Vec3 l = cam.q.conjugate() * d;
    double n = l.norm();
    Eigen::MatrixXd Jcam = w.robot->jacobian(q, camera_, cam.t);
    Eigen::MatrixXd Jt = Eigen::MatrixXd::Zero(6, Jcam.cols());
    if (!use_point_) Jt = w.robot->jacobian(q, target_link_, t);
    Eigen::Matrix3d R_T = cam.q.conjugate().toRotationMatrix();
    Eigen::MatrixXd J(2, Jcam.cols());
    Eigen::Matrix3d P = (Eigen::Matrix3d::Identity() - (l / n) * (l / n).transpose()) / n;
    for (int c = 0; c < Jcam.cols(); ++c) {
      Vec3 v_cam = Jcam.block<3, 1>(0, c);
      Vec3 w_cam = Jcam.block<3, 1>(3, c);
      Vec3 v_t = Jt.block<3, 1>(0, c);
      Vec3 ldot = R_T * (v_t - v_cam - w_cam.cross(d));
      Vec3 udot = P * ldot;
      J(0, c) = udot.y();
      J(1, c) = udot.z();
    }
    return J;
  }

 private:
  std::string camera_;
  std::string target_link_;
  Vec3 point_;
  bool use_point_;
};

class JointCenteringGoal : public TaskGoal {
 public:
  JointCenteringGoal(const RobotInfo& robot, double w) {
    weight = w;
    const auto& dofs = robot.tree->dofs();
    for (int i = 0; i < static_cast<int>(dofs.size()); ++i) {
      const DofInfo& d = dofs[i];
      if (d.hi - d.lo > 50.0) continue;  // unbounded (base) dofs
      bool gripper = false;
      for (const auto& [arm, g] : robot.gripper_dof) gripper |= (g == d.name);
      if (gripper) continue;
      dof_idx_.push_back(i);
      mid_.push_back(0.5 * (d.lo + d.hi));
      names_.push_back(d.name);
    }
  }
  std::string name() const override { return "joint_centering"; }

  Eigen::VectorXd value(const WorldState& w) const override {
    auto q = w.robot_config();
    Eigen::VectorXd f(dof_idx_.size());
    for (size_t i = 0; i < dof_idx_.size(); ++i) f[i] = q[dof_idx_[i]] - mid_[i];
    return f;
  }

  Eigen::MatrixXd jacobian(const WorldState& w) const override {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(dof_idx_.size(), w.robot->dof_count());
    for (size_t i = 0; i < dof_idx_.size(); ++i) J(i, dof_idx_[i]) = 1.0;
    return J;
  }

  TaskRows rows(const WorldState& w, const ControlParams& p) const override {
    TaskRows r = TaskGoal::rows(w, p);
    // gentle pull only
    for (int i = 0; i < r.lo.size(); ++i) {
      r.lo[i] = clamp_abs(r.lo[i], 0.1);
      r.hi[i] = r.lo[i];
    }
    return r;
  }

  double error(const WorldState&) const override { return -1.0; }

  bool is_zero_for(const WorldState& w, const std::string& dof) const {
    auto q = w.robot_config();
    for (size_t i = 0; i < dof_idx_.size(); ++i)
      if (names_[i] == dof) return std::abs(q[dof_idx_[i]] - mid_[i]) < 1e-12;
    return false;
  }

 private:
  std::vector<int> dof_idx_;
  std::vector<double> mid_;
  std::vector<std::string> names_;
};

// Drives a container joint from its current position to a target while the
// given gripper frame tracks the handle. The articulation reference advances
// only while the gripper is on the handle, which bounds the tracking error.
class FollowArticulationGoal : public TaskGoal {
 public:
  FollowArticulationGoal(const RobotInfo&, ArticulatedContainer container, std::string gripper,
                         double target, double w)
      : container_(std::move(container)), gripper_(std::move(gripper)), target_(target) {
    weight = w;
    reference_ = std::numeric_limits<double>::quiet_NaN();
  }
  std::string name() const override { return "follow_articulation:" + container_.id; }

  Pose handle_world_pose(const WorldState& w, double joint_value) const {
    WorldState tmp = w;
    tmp.set_joint_position(container_.joint, joint_value);
    return tmp.environment->link_pose(tmp.environment_config(), container_.moving_link) *
           container_.handle;
  }

  double reference(const WorldState& w) const {
    return std::isnan(reference_) ? w.joint_position(container_.joint) : reference_;
  }

  Eigen::VectorXd value(const WorldState& w) const override {
    Pose target = handle_world_pose(w, reference(w));
    Pose g = w.robot->link_pose(w.robot_config(), gripper_);
    Eigen::VectorXd f(6);
    f.head<3>() = g.t - target.t;
    f.tail<3>() = rotation_vector(target.q * g.q.conjugate());
    return f;
  }

  Eigen::MatrixXd jacobian(const WorldState& w) const override {
    auto q = w.robot_config();
    Pose g = w.robot->link_pose(q, gripper_);
    Eigen::MatrixXd J6 = w.robot->jacobian(q, gripper_, g.t);
    Eigen::MatrixXd J(6, J6.cols());
    J.topRows(3) = J6.topRows(3);
    Pose target = handle_world_pose(w, reference(w));
    Vec3 e = rotation_vector(target.q * g.q.conjugate());
    J.bottomRows(3) = -right_jacobian_inverse(e) * J6.bottomRows(3);
    return J;
  }

  TaskRows rows(const WorldState& w, const ControlParams& p) const override {
    Eigen::VectorXd f = value(w);
    TaskRows r;
    r.name = name();
    r.jacobian = jacobian(w);
    r.lo.resize(6);
    for (int i = 0; i < 3; ++i) r.lo[i] = clamp_abs(-p.p_gain * f[i], p.lin_cap);
    for (int i = 3; i < 6; ++i) r.lo[i] = clamp_abs(-p.p_gain * f[i], p.ang_cap);
    r.hi = r.lo;
    r.weight = weight;
    return r;
  }

  void on_tick(WorldState& w, const ControlParams& p) override {
    if (std::isnan(reference_)) reference_ = w.joint_position(container_.joint);
    double track_err = value(w).head<3>().norm();
    if (track_err < 0.005) {
      double step = p.articulation_rate * p.dt;
      double delta = target_ - reference_;
      reference_ += clamp_abs(delta, step);
    }
    w.set_joint_position(container_.joint, reference_);
  }

  double error(const WorldState& w) const override {
    double track = value(w).head<3>().norm();
    double joint = std::abs(w.joint_position(container_.joint) - target_);
    return std::max(track, 0.8 * joint);
  }

 private:
  ArticulatedContainer container_;
  std::string gripper_;
  double target_;
  double reference_;
};

}  // namespace

TaskRows TaskGoal::rows(const WorldState& w, const ControlParams& p) const {
  Eigen::VectorXd f = value(w);
  TaskRows r;
  r.name = name();
  r.jacobian = jacobian(w);
  r.lo.resize(f.size());
  for (int i = 0; i < f.size(); ++i) r.lo[i] = clamp_abs(-p.p_gain * f[i], p.lin_cap);
  r.hi = r.lo;
  r.weight = weight;
  return r;
}

std::shared_ptr<TaskGoal> make_cartesian_pose_goal(std::string frame, Pose target, double weight) {
  return std::make_shared<CartesianPoseGoal>(std::move(frame), std::move(target), weight);
}
std::shared_ptr<TaskGoal> make_planar_pose_goal(std::string frame, Pose target, double weight) {
  return std::make_shared<PlanarPoseGoal>(std::move(frame), std::move(target), weight);
}
std::shared_ptr<TaskGoal> make_keep_vertical_goal(std::string frame, Vec3 local_axis,
                                                  double weight) {
  return std::make_shared<KeepVerticalGoal>(std::move(frame), local_axis, weight);
}
std::shared_ptr<TaskGoal> make_look_at_goal(std::string camera_link, std::string target_link,
                                            Vec3 target_point, bool use_point, double weight) {
  return std::make_shared<LookAtGoal>(std::move(camera_link), std::move(target_link), target_point,
                                      use_point, weight);
}
std::shared_ptr<TaskGoal> make_joint_centering_goal(const RobotInfo& robot, double weight) {
  return std::make_shared<JointCenteringGoal>(robot, weight);
}
std::shared_ptr<TaskGoal> make_follow_articulation_goal(const RobotInfo& robot,
                                                        const ArticulatedContainer& container,
                                                        std::string gripper_frame, double target,
                                                        double weight) {
  return std::make_shared<FollowArticulationGoal>(robot, container, std::move(gripper_frame),
                                                  target, weight);
}

ControlProblem compile(const MotionGoalSpec& spec, const WorldState& w, const RobotInfo& robot,
                       const Weights& weights, const ControlParams& params) {
  if (!(weights.w_cb < weights.w_c && weights.w_c < weights.w_ca))
    throw std::invalid_argument("weight tiers must satisfy w_cb < w_c < w_ca");
  ControlProblem p;
  p.weights = weights;
  p.params = params;
  p.robot = robot;
  p.collision_mode = spec.collision_mode;

  auto tool = [&](const std::string& arm) {
    auto it = robot.gripper_link.find(arm);
    if (it == robot.gripper_link.end()) throw std::invalid_argument("unknown arm " + arm);
    return it->second;
  };

  switch (spec.type) {
    case MotionType::MovingArm: {
      if (spec.goal_poses.empty()) throw std::invalid_argument("moving-arm without goal poses");
      for (const auto& [frame, pose] : spec.goal_poses) {
        if (!robot.tree->has_link(frame)) throw KinematicError("unknown frame " + frame);
        auto g = make_cartesian_pose_goal(frame, pose, weights.w_cb);
        p.goals.push_back(g);
        p.convergence_goals.push_back(g);
      }
      break;
    }
    case MotionType::MovingBase: {
      auto it = spec.goal_poses.begin();
      if (it == spec.goal_poses.end()) throw std::invalid_argument("moving-base without goal pose");
      auto g = make_planar_pose_goal(robot.base_link, it->second, weights.w_cb);
      p.goals.push_back(g);
      p.convergence_goals.push_back(g);
      break;
    }
    case MotionType::Looking: {
      auto g = make_look_at_goal(robot.camera_link, spec.look_target_link, spec.look_target_point,
                                 spec.look_at_point, weights.w_cb);
      p.goals.push_back(g);
      p.convergence_goals.push_back(g);
      break;
    }
    case MotionType::Opening:
    case MotionType::Closing: {
      if (!w.has_container(spec.container))
        throw std::invalid_argument("unknown container " + spec.container);
      const ArticulatedContainer& c = w.container(spec.container);
      double target = spec.container_target;
      int di = w.environment->dof_index(c.joint);
      if (di < 0) throw std::invalid_argument("container joint missing: " + c.joint);
      const DofInfo& dof = w.environment->dofs()[di];
      if (target < dof.lo - 1e-9 || target > dof.hi + 1e-9)
        throw std::invalid_argument("articulation target outside joint limits");
      auto g = make_follow_articulation_goal(robot, c, tool(spec.arm), target, weights.w_ca);
      p.goals.push_back(g);
      p.convergence_goals.push_back(g);
      break;
    }
  }

  for (MotionConstraint c : spec.constraints) {
    switch (c) {
      case MotionConstraint::KeepVertical:
        p.goals.push_back(make_keep_vertical_goal(tool(spec.arm), Vec3::UnitZ(), weights.w_cb));
        break;
      case MotionConstraint::LookAtHand:
        p.goals.push_back(
            make_look_at_goal(robot.camera_link, tool(spec.arm), Vec3::Zero(), false,
                              0.5 * weights.w_cb));
        break;
      case MotionConstraint::JointCentering:
        p.goals.push_back(make_joint_centering_goal(robot, 0.005 * weights.w_cb));
        break;
    }
  }

  // collision allowance scope
  std::string part = spec.collision_object_part;
  std::string object = spec.collision_object;
  p.obstacle_in_scope = [part, object](const WorldShape& ws) {
    if (!part.empty()) return ws.name == part;
    if (!object.empty()) return ws.name == object || object == "all";
    return true;
  };

  auto add_links = [&](const std::vector<std::string>& ls) {
    for (const auto& l : ls) p.exempt_links.push_back(l);
  };
  auto arm_it = [&](const std::map<std::string, std::vector<std::string>>& m)
      -> const std::vector<std::string>& {
    static const std::vector<std::string> empty;
    auto it = m.find(spec.arm);
    return it == m.end() ? empty : it->second;
  };
  switch (spec.collision_mode) {
    case CollisionMode::AvoidAll:
      p.obstacle_in_scope = [](const WorldShape&) { return false; };
      break;
    case CollisionMode::AllowAll:
      for (const Link& l : robot.tree->links()) p.exempt_links.push_back(l.name);
      for (const SceneObject& o : w.objects)
        if (o.attachment) p.exempt_objects.push_back(o.id);
      break;
    case CollisionMode::AllowArm:
      add_links(arm_it(robot.arm_links));
      add_links(arm_it(robot.hand_links));
      add_links(arm_it(robot.finger_links));
      break;
    case CollisionMode::AllowHand:
      add_links(arm_it(robot.hand_links));
      add_links(arm_it(robot.finger_links));
      break;
    case CollisionMode::AllowFingers:
      add_links(arm_it(robot.finger_links));
      break;
    case CollisionMode::AllowFingersAndObject: {
      add_links(arm_it(robot.finger_links));
      add_links(arm_it(robot.hand_links));
      for (const SceneObject& o : w.objects)
        if (o.attachment) p.exempt_objects.push_back(o.id);
      break;
    }
  }
  return p;
}

Observables observe(const ControlProblem& p, const WorldState& w) {
  Observables o;
  auto qv = w.robot_config();
  o.q = Eigen::Map<const Eigen::VectorXd>(qv.data(), qv.size());

  std::vector<WorldShape> all = collect_shapes(w);
  struct RobotShape {
    const WorldShape* ws;
    std::string jac_link;
    bool exempt;
  };
  std::vector<RobotShape> robot_shapes;
  for (const WorldShape& ws : all) {
    if (ws.owner == WorldShape::Owner::RobotLink) {
      bool ex = std::find(p.exempt_links.begin(), p.exempt_links.end(), ws.name) !=
                p.exempt_links.end();
      robot_shapes.push_back({&ws, ws.name, ex});
    } else if (ws.owner == WorldShape::Owner::Object) {
      const SceneObject& obj = w.object(ws.name);
      if (obj.attachment) {
        bool ex = std::find(p.exempt_objects.begin(), p.exempt_objects.end(), ws.name) !=
                  p.exempt_objects.end();
        robot_shapes.push_back({&ws, *obj.attachment, ex});
      }
    }
  }
  for (const RobotShape& rs : robot_shapes) {
    for (const WorldShape& obs : all) {
      if (obs.owner == WorldShape::Owner::RobotLink) continue;
      if (obs.owner == WorldShape::Owner::Object && w.object(obs.name).attachment) continue;
      if (rs.exempt && p.obstacle_in_scope(obs)) continue;
      double gap = (rs.ws->pose.t - obs.pose.t).norm() - bounding_radius(rs.ws->shape) -
                   bounding_radius(obs.shape);
      if (gap > p.params.broadphase) continue;
      ClosestPoints cp = closest_points(rs.ws->shape, rs.ws->pose, obs.shape, obs.pose);
      if (cp.distance > p.params.broadphase) continue;
      o.collisions.push_back(
          {rs.jac_link, obs.name, cp.on_a, cp.on_b, cp.normal, cp.distance});
    }
  }
  return o;
}

TickResult solve_tick(const ControlProblem& p, const WorldState& w, const Observables& o) {
  const int n = w.robot->dof_count();
  TickResult res;

  std::vector<TaskRows> blocks;
  for (const auto& g : p.goals) blocks.push_back(g->rows(w, p.params));

  int n_soft_eq = 0;
  for (const TaskRows& b : blocks) n_soft_eq += static_cast<int>(b.lo.size());
  const int n_coll = static_cast<int>(o.collisions.size());
  const int nx = n + n_soft_eq + n_coll;  // qdot + goal slacks + collision slacks

  QpProblem qp;
  qp.h.resize(nx);
  qp.h.head(n).setConstant(2.0 * p.params.eps_reg);

  qp.E.resize(n_soft_eq, nx);
  qp.E.setZero();
  qp.f.resize(n_soft_eq);
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(nx);
  int row = 0;
  for (const TaskRows& b : blocks) {
    for (int i = 0; i < b.lo.size(); ++i, ++row) {
      qp.E.block(row, 0, 1, n) = b.jacobian.row(i);
      qp.E(row, n + row) = 1.0;
      qp.f[row] = b.lo[i];
      qp.h[n + row] = 2.0 * b.weight;
      x0[n + row] = b.lo[i];
    }
  }

  // inequalities: collision soft + hard rows, velocity bounds with the
  // position-limit funnel
  const double k_soft = p.params.p_gain;
  const double k_hard = 0.25 / p.params.dt;
  std::vector<Eigen::RowVectorXd> C_rows;
  std::vector<double> d_vals;
  auto q = w.robot_config();
  for (int ci = 0; ci < n_coll; ++ci) {
    const CollisionObservation& c = o.collisions[ci];
    res.min_distance = std::min(res.min_distance, c.distance);
    Eigen::MatrixXd J6 = w.robot->jacobian(q, c.link, c.on_link);
    Eigen::RowVectorXd Jd = c.normal.transpose() * J6.topRows(3);
    // soft standoff: ddot + s >= k_soft (d_soft - d), slack weight w_c
    Eigen::RowVectorXd soft = Eigen::RowVectorXd::Zero(nx);
    soft.head(n) = -Jd;
    soft[n + n_soft_eq + ci] = -1.0;
    double lo_soft = std::min(k_soft * (p.params.d_soft - c.distance), p.params.lin_cap);
    C_rows.push_back(soft);
    d_vals.push_back(-lo_soft);
    qp.h[n + n_soft_eq + ci] = 2.0 * p.weights.w_c;
    x0[n + n_soft_eq + ci] = std::max(lo_soft, 0.0);
    // hard floor: ddot >= min(k_hard (d_hard - d), 0); feasible at qdot = 0
    Eigen::RowVectorXd hard = Eigen::RowVectorXd::Zero(nx);
    hard.head(n) = -Jd;
    double lo_hard = std::min(k_hard * (p.params.d_hard - c.distance), 0.0);
    C_rows.push_back(hard);
    d_vals.push_back(-lo_hard);
  }
  const auto& dofs = w.robot->dofs();
  for (int j = 0; j < n; ++j) {
    const DofInfo& d = dofs[j];
    double range = d.hi - d.lo;
    double margin = std::max(1e-6, p.params.limit_funnel * std::min(range, 10.0));
    double ub = d.vmax, lb = -d.vmax;
    if (range < 50.0) {
      ub = d.vmax * std::clamp((d.hi - q[j]) / margin, 0.0, 1.0);
      lb = -d.vmax * std::clamp((q[j] - d.lo) / margin, 0.0, 1.0);
    }
    Eigen::RowVectorXd r1 = Eigen::RowVectorXd::Zero(nx);
    r1[j] = 1.0;
    C_rows.push_back(r1);
    d_vals.push_back(ub);
    Eigen::RowVectorXd r2 = Eigen::RowVectorXd::Zero(nx);
    r2[j] = -1.0;
    C_rows.push_back(r2);
    d_vals.push_back(-lb);
  }
  qp.C.resize(C_rows.size(), nx);
  qp.d.resize(C_rows.size());
  for (size_t i = 0; i < C_rows.size(); ++i) {
    qp.C.row(i) = C_rows[i];
    qp.d[i] = d_vals[i];
  }

  QpSolution sol = solve_qp(qp, x0);
  res.feasible = sol.feasible;
  res.qdot = sol.feasible ? Eigen::VectorXd(sol.x.head(n)) : Eigen::VectorXd::Zero(n);
  res.qp = std::move(qp);
  res.solution = std::move(sol);
  return res;
}

Trajectory execute(ControlProblem& p, WorldState& w,
                   const std::function<bool(WorldState&, int)>& on_tick) {
  Trajectory traj;
  const int n = w.robot->dof_count();
  traj.points.push_back({w.sim_time, w.robot_config()});
  for (int tick = 0; tick < p.params.max_ticks; ++tick) {
    Observables o = observe(p, w);
    TickResult r = solve_tick(p, w, o);
    traj.min_monitored_distance = std::min(traj.min_monitored_distance, r.min_distance);
    if (!r.feasible) break;
    auto q = w.robot_config();
    const auto& dofs = w.robot->dofs();
    for (int j = 0; j < n; ++j) {
      q[j] += r.qdot[j] * p.params.dt;
      if (dofs[j].hi - dofs[j].lo < 1e9) q[j] = std::clamp(q[j], dofs[j].lo, dofs[j].hi);
    }
    w.set_robot_config(q);
    w.sim_time += p.params.dt;
    for (auto& g : p.goals) g->on_tick(w, p.params);
    traj.points.push_back({w.sim_time, q});
    traj.ticks = tick + 1;
    if (on_tick && !on_tick(w, tick)) break;
    bool done = !p.convergence_goals.empty();
    for (const auto& g : p.convergence_goals) {
      double e = g->error(w);
      if (e >= 0.0 && e > p.params.pos_tol) {
        done = false;
        break;
      }
    }
    if (done) {
      traj.converged = true;
      break;
    }
  }
  return traj;
}

void write_trajectory_csv(const Trajectory& t, const RobotInfo& robot, const std::string& path) {
  std::ofstream out(path);
  out << "tick,time";
  for (const DofInfo& d : robot.tree->dofs()) out << "," << d.name;
  out << "\n";
  int tick = 0;
  for (const auto& [time, q] : t.points) {
    out << tick++ << "," << time;
    for (double v : q) out << "," << v;
    out << "\n";
  }
}

}  // namespace hsim
