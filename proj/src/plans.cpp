#include "hsim/plans.hpp"

#include <algorithm>
#include <cmath>

namespace hsim {

namespace {

// Fixed per-phase overheads (sim seconds): bookkeeping the controller does
// not model (planning, image processing, gripper actuation).
constexpr double kPerceiveOverhead = 4.0;
constexpr double kNavigateOverhead = 10.0;
constexpr double kGraspOverhead = 6.0;
constexpr double kPlaceOverhead = 6.0;
constexpr double kContainerOverhead = 5.0;
constexpr double kGripperSeconds = 1.0;

constexpr double kNavTolerance = 0.12;       // m, accepted base-pose error
constexpr double kAisleX = 1.45;             // m, x of the free center aisle
constexpr double kFingerLength = 0.06;       // m, gripper origin to fingertip
constexpr double kAttachTolerance = 0.09;    // m
constexpr double kLiftHeight = 0.12;         // m
constexpr double kPrePlaceHeight = 0.10;     // m

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (char c : s) {
    h ^= static_cast<uint64_t>(static_cast<unsigned char>(c));
    h *= 1099511628211ull;
  }
  return h;
}

std::pair<std::string, std::string> split_location(const std::string& loc) {
  auto colon = loc.find(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("location must be on:<link> or in:<container>: " + loc);
  return {loc.substr(0, colon), loc.substr(colon + 1)};
}

std::string prop(const Designator& d, const std::string& key, const std::string& fallback = "") {
  const Value* v = d.find(key);
  return v ? v->symbol() : fallback;
}

/// Runs one compiled motion on the interpreter's world, advancing the logical
/// clock by the executed ticks. Non-convergence raises `category`.
Trajectory run_motion(Interpreter& it, PlanContext& c, const MotionGoalSpec& spec,
                      const std::string& phase_key, FailureCategory category,
                      const std::string& what, int max_ticks = 0) {
  ControlParams params = c.control;
  if (max_ticks > 0) params.max_ticks = max_ticks;
  ControlProblem p = compile(spec, it.world(), c.robot, Weights{}, params);
  it.count_motion_command();
  Trajectory traj = execute(p, it.world());
  c.spend(it, phase_key, traj.ticks * params.dt);
  if (!traj.converged) c.fail(category, what + ": motion did not converge");
  return traj;
}

void set_gripper(Interpreter& it, PlanContext& c, const std::string& arm, double opening) {
  WorldState& w = it.world();
  const auto& fingers = c.robot.finger_links.count(arm) ? c.robot.finger_links.at(arm)
                                                        : std::vector<std::string>{};
  for (const DofInfo& d : c.robot.tree->dofs()) {
    const Joint& j = c.robot.tree->joints()[d.joint];
    if (std::find(fingers.begin(), fingers.end(), j.child) == fingers.end()) continue;
    w.set_joint_position(d.name, std::clamp(opening / 2.0, d.lo, d.hi));
  }
  it.count_motion_command();
  c.spend(it, "grasping", kGripperSeconds);
}

Pose base_pose(const WorldState& w, const RobotInfo& robot) {
  return w.link_pose(robot.base_link);
}

std::string planar_joint(const RobotInfo& robot) {
  for (const Joint& j : robot.tree->joints())
    if (j.type == JointType::PlanarBase) return j.name;
  throw std::logic_error("robot has no planar base joint");
}

double planar_distance(const Pose& a, const Vec3& b) {
  return std::hypot(a.t.x() - b.x(), a.t.y() - b.y());
}

/// Believed pose of the object: last perception result when it matches,
/// ground truth otherwise (e.g. right after a successful placement).
Pose believed_pose(const PlanContext& c, const WorldState& w, const std::string& object_id) {
  if (c.last_detection && c.last_detection->object_id == object_id)
    return c.last_detection->pose;
  return w.object_pose(object_id);
}

bool is_thin(const Shape& s) {
  return std::visit(
      [](const auto& sh) {
        using T = std::decay_t<decltype(sh)>;
        if constexpr (std::is_same_v<T, Box>) return sh.half_extents.minCoeff() < 0.016;
        else if constexpr (std::is_same_v<T, Capsule>) return sh.radius < 0.016;
        else return sh.radius < 0.016;
      },
      s);
}

/// Grasp slip probability: base rate scaled by object thinness and by how far
/// the base stands from the ideal grasping distance (alignment error proxy).
double slip_probability(const PlanContext& c, const WorldState& w,
                        const std::string& object_id) {
  const SceneObject& o = w.object(object_id);
  double p = c.injection.grasp_slip_base;
  if (is_thin(o.shape)) p *= c.injection.grasp_slip_thin_scale;
  double d = planar_distance(base_pose(w, c.robot), w.object_pose(o).t);
  double align = std::clamp((d - 0.45) / 0.45, 0.0, 1.0);
  return std::min(1.0, p * (0.4 + 1.8 * align));
}

// ---------------------------------------------------------------------------
// plan bodies

/// Fold the arm against the torso so base motions are not throttled by the
/// standoff rows of an outstretched arm.
void tuck_arm(Interpreter& it, PlanContext& c, const std::string& arm) {
  WorldState& w = it.world();
  static const std::map<std::string, double> posture = {
      {"_shoulder_pan", -0.3}, {"_shoulder_lift", 1.2}, {"_elbow", -2.2},
      {"_wrist_roll", 0.0},    {"_wrist_flex", 0.8},    {"_gripper_roll", 0.0}};
  std::string prefix = arm.substr(0, 1);
  for (const auto& [suffix, value] : posture) {
    std::string dof = prefix + suffix;
    for (const DofInfo& d : c.robot.tree->dofs())
      if (d.name == dof) w.set_joint_position(dof, std::clamp(value, d.lo, d.hi));
  }
  c.spend(it, "navigation", 2.0);
}

void navigating_body(Interpreter& it, const Designator& a, PlanContext& c) {
  Pose goal = a.get("target").pose();
  std::string joint = planar_joint(c.robot);
  tuck_arm(it, c, prop(a, "arm", "right"));
  int attempt = 0;
  Outcome out = it.with_retry(2, [&](Interpreter& in) {
    c.spend(in, "navigation", kNavigateOverhead);
    auto drive = [&](const Pose& target, int max_ticks) {
      MotionGoalSpec spec;
      spec.type = MotionType::MovingBase;
      spec.goal_poses["base"] = target;
      spec.collision_mode = CollisionMode::AvoidAll;
      ControlParams params = c.control;
      params.max_ticks = max_ticks;
      ControlProblem p = compile(spec, in.world(), c.robot, Weights{}, params);
      in.count_motion_command();
      Trajectory traj = execute(p, in.world());
      c.spend(in, "navigation", traj.ticks * params.dt);
    };
    // retries reroute through the open center aisle: straight-line attraction
    // can wedge the base against furniture or a swung-open door
    if (attempt++ > 0) {
      Pose here = base_pose(in.world(), c.robot);
      drive(Pose{Vec3(kAisleX, here.t.y(), 0), goal.q}, 1200);
      drive(Pose{Vec3(kAisleX, goal.t.y(), 0), goal.q}, 1200);
    }
    drive(goal, 2000);
    // the QP attractor stalling within the docking tolerance still counts
    if (planar_distance(base_pose(in.world(), c.robot), goal.t) > 0.75 * kNavTolerance)
      c.fail(FailureCategory::Navigation, "navigating: no path to the goal pose");
    // localization noise: the base never ends up exactly where it believes
    if (c.injection.base_noise_sigma > 0.0) {
      WorldState& w = in.world();
      w.set_joint_position(joint + "/x", w.joint_position(joint + "/x") +
                                             c.inject_rng.normal(0, c.injection.base_noise_sigma));
      w.set_joint_position(joint + "/y", w.joint_position(joint + "/y") +
                                             c.inject_rng.normal(0, c.injection.base_noise_sigma));
      w.set_joint_position(joint + "/theta",
                           w.joint_position(joint + "/theta") +
                               c.inject_rng.normal(0, 0.5 * c.injection.base_noise_sigma));
    }
    if (planar_distance(base_pose(in.world(), c.robot), goal.t) > kNavTolerance)
      c.fail(FailureCategory::Navigation, "navigating: localization drift past tolerance");
  });
  if (!out.ok) out.rethrow();
}

void perceiving_body(Interpreter& it, const Designator& a, PlanContext& c) {
  std::string object_id = a.get("object").symbol();
  WorldState& w = it.world();

  // point the head at the expected object position
  MotionGoalSpec look;
  look.type = MotionType::Looking;
  look.look_at_point = true;
  look.look_target_point = w.object_pose(object_id).t;
  run_motion(it, c, look, "perception", FailureCategory::Perception, "looking", 600);
  c.spend(it, "perception", kPerceiveOverhead);

  PerceptionConfig cfg = c.perception;
  cfg.miss_probability = c.injection.perception_miss;
  cfg.default_miss = c.injection.default_miss;
  auto query = make_designator(
      DesignatorKind::Object,
      {{"type", w.object(object_id).type}, {"name", object_id}});
  uint64_t seed = c.seed ^ fnv1a(object_id) ^ (0x632be59bd9b4e019ull * ++c.attempt_serial);
  try {
    DetectionResult r = detect(*query, w, w.link_pose(c.robot.camera_link), seed, cfg);
    c.last_detection = r;
  } catch (const PlanFailure& f) {
    c.fail(FailureCategory::Perception, f.what());
  }
}

void picking_up_body(Interpreter& it, const Designator& a, PlanContext& c) {
  std::string object_id = a.get("object").symbol();
  std::string arm = prop(a, "arm", "right");
  const GraspSpec& g = c.catalog.by_id(a.get("grasp").symbol());
  double opening = a.get("gripper-opening").number();
  WorldState& w = it.world();

  Pose obj = believed_pose(c, w, object_id);
  // the estimated orientation is only defined up to the object's symmetry
  // group; pick the equivalent whose approach is downward / toward the robot
  Vec3 to_obj = obj.t - base_pose(w, c.robot).t;
  to_obj.z() = 0.0;
  if (to_obj.norm() > 1e-6) to_obj.normalize();
  static const std::vector<Quat> kFlips = {
      Quat::Identity(),
      Quat(Eigen::AngleAxisd(M_PI, Vec3::UnitX())),
      Quat(Eigen::AngleAxisd(M_PI, Vec3::UnitY())),
      Quat(Eigen::AngleAxisd(M_PI, Vec3::UnitZ())),
      Quat(Eigen::AngleAxisd(M_PI / 2, Vec3::UnitZ())),
      Quat(Eigen::AngleAxisd(-M_PI / 2, Vec3::UnitZ()))};
  Quat best_q = obj.q;
  double best_score = -1e9;
  for (const Quat& f : kFlips) {
    Quat cand = (obj.q * f).normalized();
    Vec3 a = cand * g.approach;
    double score = -a.z() + 0.8 * (a.x() * to_obj.x() + a.y() * to_obj.y());
    if (score > best_score) {
      best_score = score;
      best_q = cand;
    }
  }
  obj.q = best_q;
  Vec3 approach_w = obj.q * g.approach;
  Quat grip_q = (obj.q * g.orientation).normalized();
  // fingertips aim at the object center but must stay clear of the support
  Vec3 tip = obj.t;
  if (approach_w.z() < -0.5) {
    double bottom = support_point(w.object(object_id).shape, obj, Vec3(0, 0, -1)).z();
    tip.z() = std::max(tip.z(), bottom + 0.012);
  }
  Pose grasp{tip - approach_w * kFingerLength, grip_q};
  Pose pregrasp{grasp.t - approach_w * g.pregrasp_offset, grip_q};
  std::string tool = c.robot.gripper_link.at(arm);

  c.spend(it, "grasping", kGraspOverhead);
  set_gripper(it, c, arm, opening);

  MotionGoalSpec reach;
  reach.type = MotionType::MovingArm;
  reach.arm = arm;
  reach.collision_mode = CollisionMode::AllowHand;
  reach.collision_object = object_id;
  reach.constraints = {MotionConstraint::JointCentering};

  // staging waypoint up and back toward the base keeps the greedy QP
  // attractor from diving under the support surface
  Vec3 back = base_pose(w, c.robot).t - obj.t;
  back.z() = 0.0;
  back = back.norm() > 1e-6 ? Vec3(back.normalized()) : Vec3(-1, 0, 0);
  Vec3 wp = pregrasp.t + back * 0.2;
  wp.z() = std::max(pregrasp.t.z(), obj.t.z() + 0.28);
  reach.goal_poses[tool] = Pose{wp, grip_q};
  {
    ControlParams loose = c.control;
    loose.max_ticks = 900;
    loose.pos_tol = 0.05;
    loose.rot_tol = 0.3;
    ControlProblem p = compile(reach, w, c.robot, Weights{}, loose);
    it.count_motion_command();
    Trajectory traj = execute(p, w);
    c.spend(it, "grasping", traj.ticks * loose.dt);
    if (!traj.converged)
      c.fail(FailureCategory::Manipulation, "staging reach: motion did not converge");
  }

  reach.goal_poses[tool] = pregrasp;
  run_motion(it, c, reach, "grasping", FailureCategory::Manipulation, "pre-grasp reach", 900);

  // the fingers must get within the soft standoff of the support surface, so
  // the final approach frees the hand from all standoff rows
  reach.collision_object = "all";
  reach.goal_poses[tool] = grasp;
  run_motion(it, c, reach, "grasping", FailureCategory::Manipulation, "grasp approach", 900);

  set_gripper(it, c, arm, 0.0);
  double miss = (w.link_pose(tool).t - w.object_pose(object_id).t).norm();
  if (miss > kAttachTolerance)
    c.fail(FailureCategory::Grasp, "grasp closed " + std::to_string(miss) + " m off the object");
  w.attach(object_id, tool, kAttachTolerance + 0.01);

  if (c.inject_rng.bernoulli(slip_probability(c, w, object_id))) {
    w.detach(object_id);
    settle(w, object_id);
    c.fail(FailureCategory::Grasp, "object slipped out of the gripper");
  }

  MotionGoalSpec lift = reach;
  lift.collision_mode = CollisionMode::AllowFingersAndObject;
  lift.collision_object = "all";
  lift.goal_poses[tool] = Pose{grasp.t + Vec3(0, 0, kLiftHeight), grip_q};
  run_motion(it, c, lift, "grasping", FailureCategory::Manipulation, "lift", 900);
}

void placing_body(Interpreter& it, const Designator& a, PlanContext& c) {
  std::string object_id = a.get("object").symbol();
  std::string arm = prop(a, "arm", "right");
  Pose place = a.get("target").pose();
  std::string support = a.get("support").symbol();
  WorldState& w = it.world();
  std::string tool = c.robot.gripper_link.at(arm);

  c.spend(it, "placing", kPlaceOverhead);
  if (c.phase == "cleaning" && prop(a, "jam-risk") == "yes" &&
      c.inject_rng.bernoulli(c.injection.gripper_jam_prob))
    c.fail(FailureCategory::Unrecoverable, "gripper jammed on the dishwasher grid");

  const SceneObject& o = w.object(object_id);
  if (!o.attachment) c.fail(FailureCategory::Grasp, "placing without the object in hand");
  Pose rel = o.pose;  // object pose relative to the attachment link

  MotionGoalSpec move;
  move.type = MotionType::MovingArm;
  move.arm = arm;
  move.collision_mode = CollisionMode::AllowFingersAndObject;
  move.collision_object = "all";
  move.constraints = {MotionConstraint::JointCentering, MotionConstraint::KeepVertical};
  // staging waypoint first, for the same local-minimum reason as in picking
  Vec3 back = base_pose(w, c.robot).t - place.t;
  back.z() = 0.0;
  back = back.norm() > 1e-6 ? Vec3(back.normalized()) : Vec3(-1, 0, 0);
  Pose above = Pose{place.t + Vec3(0, 0, kPrePlaceHeight), place.q};
  Pose staged = Pose{above.t + back * 0.22 + Vec3(0, 0, 0.08), above.q};
  move.goal_poses[tool] = staged * rel.inverse();
  {
    ControlParams loose = c.control;
    loose.max_ticks = 900;
    loose.pos_tol = 0.05;
    loose.rot_tol = 0.3;
    ControlProblem p = compile(move, w, c.robot, Weights{}, loose);
    it.count_motion_command();
    Trajectory traj = execute(p, w);
    c.spend(it, "placing", traj.ticks * loose.dt);
    if (!traj.converged)
      c.fail(FailureCategory::Manipulation, "staging move: motion did not converge");
  }
  move.goal_poses[tool] = above * rel.inverse();
  run_motion(it, c, move, "placing", FailureCategory::Manipulation, "pre-place", 900);

  // final lowering brings the object and fingers inside the soft standoff of
  // the support, so the whole hand is freed from standoff rows
  move.collision_object = "all";
  Pose touch = Pose{place.t + Vec3(0, 0, 0.01), place.q};
  move.goal_poses[tool] = touch * rel.inverse();
  run_motion(it, c, move, "placing", FailureCategory::Manipulation, "lower to placement", 900);

  set_gripper(it, c, arm, 0.08);
  w.detach(object_id);
  settle(w, object_id);

  MotionGoalSpec retract = move;
  retract.constraints = {MotionConstraint::JointCentering};
  Pose tool_now = w.link_pose(tool);
  retract.goal_poses[tool] = Pose{tool_now.t + Vec3(0, 0, 0.15), tool_now.q};
  run_motion(it, c, retract, "placing", FailureCategory::Manipulation, "retract", 600);

  auto s = supported_by(w, object_id);
  if (!s || *s != support)
    c.fail(FailureCategory::Manipulation,
           "object ended up on " + (s ? *s : std::string("nothing")) + " instead of " + support);
}

void opening_closing_body(Interpreter& it, const Designator& a, PlanContext& c, bool opening) {
  std::string cid = a.get("container").symbol();
  WorldState& w = it.world();
  const ArticulatedContainer& cont = w.container(cid);
  double target = opening ? cont.open_position : cont.closed_position;
  double slip_p = c.injection.handle_slip.count(cid) ? c.injection.handle_slip.at(cid)
                                                     : c.injection.handle_slip_default;

  Outcome out = it.with_retry(2, [&](Interpreter& in) {
    c.spend(in, "environment", kContainerOverhead);
    WorldState& cw = in.world();
    double start = cw.joint_position(cont.joint);
    // objects resting on the moving link ride along with the articulation
    std::vector<std::string> riders;
    for (const SceneObject& o : cw.objects) {
      auto s = supported_by(cw, o.id);
      if (s && *s == cont.moving_link && !o.attachment) riders.push_back(o.id);
    }
    Pose link_before = cw.link_pose(cont.moving_link);
    bool slip = c.inject_rng.bernoulli(slip_p);
    MotionGoalSpec spec;
    spec.type = opening ? MotionType::Opening : MotionType::Closing;
    spec.container = cid;
    spec.arm = prop(a, "arm", "right");
    // the hand must close on the handle, well inside the standoff of both the
    // moving link and the container body, so free it from all standoff rows
    spec.collision_mode = CollisionMode::AllowHand;
    spec.collision_object = "all";
    // a slipping handle lets go partway through the articulation
    spec.container_target = slip ? start + 0.35 * (target - start) : target;
    run_motion(in, c, spec, "environment", FailureCategory::EnvManipulation,
               opening ? "opening " + cid : "closing " + cid, 3500);
    Pose delta = cw.link_pose(cont.moving_link) * link_before.inverse();
    for (const std::string& rid : riders) {
      cw.object(rid).pose = delta * cw.object(rid).pose;
      settle(cw, rid);
    }
    if (slip)
      c.fail(FailureCategory::EnvManipulation, "handle slipped out of the gripper on " + cid);
  });
  if (!out.ok) out.rethrow();
}

void fetching_body(Interpreter& it, const Designator& a, PlanContext& c) {
  std::string object_id = a.get("object").symbol();
  WorldState& w = it.world();

  uint64_t ladder_seed = c.seed ^ fnv1a("fetch:" + object_id) ^ (c.attempt_serial * 0x9e37ull);
  std::vector<Pose> bases = base_pose_candidates(c, w, object_id, 3, ladder_seed);
  if (bases.empty())
    c.fail(FailureCategory::Navigation, "no reachable base pose for " + object_id);

  std::vector<GraspSpec> grasps = c.catalog.for_type(w.object(object_id).type);
  if (grasps.empty()) c.fail(FailureCategory::Grasp, "no grasp known for " + object_id);

  ParameterQuery q;
  q.action_type = "picking-up";
  q.object = make_designator(DesignatorKind::Object,
                             {{"type", w.object(object_id).type}, {"name", object_id}});
  q.world = &w;
  q.robot = &c.robot;
  q.parameter = "arm";
  std::string arm = infer(q).next()->symbol();
  q.parameter = "gripper-opening";
  double opening = infer(q).next()->number();

  std::optional<PlanFailure> last;
  for (size_t bi = 0; bi < bases.size(); ++bi) {
    auto nav = make_designator(DesignatorKind::Action,
                               {{"type", "navigating"}, {"target", bases[bi]}});
    try {
      it.perform(nav);
    } catch (const PlanFailure& f) {
      last = f;
      continue;
    }
    auto perceive = make_designator(DesignatorKind::Action,
                                    {{"type", "perceiving"}, {"object", object_id}});
    Outcome seen = it.with_retry(2, [&](Interpreter& in) { in.perform(perceive); });
    if (!seen.ok) {
      last = PlanFailure(seen.category, seen.message);
      continue;
    }
    Pose at = base_pose(w, c.robot);
    double yaw = std::atan2(2.0 * (at.q.w() * at.q.z() + at.q.x() * at.q.y()),
                            1.0 - 2.0 * (at.q.y() * at.q.y() + at.q.z() * at.q.z()));
    for (size_t gi = 0; gi < std::min<size_t>(grasps.size(), 3); ++gi) {
      auto pick = make_designator(DesignatorKind::Action, {{"type", "picking-up"},
                                                           {"object", object_id},
                                                           {"arm", arm},
                                                           {"grasp", grasps[gi].id},
                                                           {"gripper-opening", opening}});
      Episode e;
      e.task_key = "picking-up:" + object_id;
      e.params = {at.t.x(), at.t.y(), yaw};
      e.grasp_id = grasps[gi].id;
      e.arm = arm;
      e.run_id = c.run_id;
      e.seed = c.seed;
      double t0 = it.now();
      try {
        it.perform(pick);
        e.success = true;
        e.phase_durations["grasping"] = it.now() - t0;
        if (c.on_episode) c.on_episode(e);
        return;
      } catch (const PlanFailure& f) {
        e.success = false;
        e.failure = f.category();
        e.phase_durations["grasping"] = it.now() - t0;
        if (c.on_episode) c.on_episode(e);
        last = f;
        if (w.object(object_id).attachment) {
          // a half-finished pick leaves the object in hand; release and resettle
          w.detach(object_id);
          settle(w, object_id);
        }
        if (f.category() == FailureCategory::Unrecoverable) throw;
      }
      it.count_retry();
    }
  }
  if (last) throw *last;
  c.fail(FailureCategory::Grasp, "fetching exhausted all candidates for " + object_id);
}

void delivering_body(Interpreter& it, const Designator& a, PlanContext& c) {
  std::string object_id = a.get("object").symbol();
  std::string destination = a.get("destination").symbol();
  auto [kind, place] = split_location(destination);
  WorldState& w = it.world();

  auto loc = kind == "on"
                 ? make_designator(DesignatorKind::Location, {{"on", place}})
                 : make_designator(DesignatorKind::Location, {{"in", place}});
  std::string support =
      kind == "on" ? place : w.container(place).moving_link;

  ParameterQuery q;
  q.action_type = "placing";
  q.object = loc;
  q.world = &w;
  q.robot = &c.robot;
  q.parameter = "placement-pose";
  q.seed = c.seed ^ fnv1a("deliver:" + object_id) ^ (c.attempt_serial * 0x7f4aull);
  CandidateStream places = infer(q);

  std::optional<PlanFailure> last;
  for (int attempt = 0; attempt < 3; ++attempt) {
    auto pv = places.next();
    if (!pv) break;
    Pose target = pv->pose();
    // stand where the placement point is reachable
    auto reach_loc = make_designator(DesignatorKind::Location, {{"reachable-for", target}});
    PoseDistribution d;
    try {
      d = ground_location(*reach_loc, w, c.robot, c.reason);
    } catch (const PlanFailure& f) {
      if (c.on_failure) c.on_failure(c.current_object, f.category());
      last = f;
      continue;
    }
    Rng stream = Rng(q.seed + attempt).derive("deliver-base");
    Pose base_goal = d.sample(stream);
    auto nav = make_designator(DesignatorKind::Action,
                               {{"type", "navigating"}, {"target", base_goal}});
    try {
      it.perform(nav);
      if (c.phase == "cleaning" && c.inject_rng.bernoulli(c.injection.carry_drop_prob)) {
        // carried object drops on the way; ends up on the floor, unrecoverable
        Pose at = base_pose(w, c.robot);
        w.detach(object_id);
        w.object(object_id).pose =
            Pose::translation(at.t.x() + 0.4, at.t.y(), 0.3) * Pose::rot_z(0.7);
        settle(w, object_id);
        c.fail(FailureCategory::Unrecoverable, "carried object dropped to the floor");
      }
      auto placing = make_designator(DesignatorKind::Action, {{"type", "placing"},
                                                              {"object", object_id},
                                                              {"target", target},
                                                              {"support", support},
                                                              {"jam-risk", prop(a, "jam-risk")}});
      it.perform(placing);
      return;
    } catch (const PlanFailure& f) {
      if (f.category() == FailureCategory::Unrecoverable) throw;
      last = f;
      it.count_retry();
      if (!w.object(object_id).attachment) throw;  // lost the object; cannot keep placing
    }
  }
  if (last) throw *last;
  c.fail(FailureCategory::Navigation, "no feasible delivery pose for " + object_id);
}

void transporting_body(Interpreter& it, const Designator& a, PlanContext& c) {
  std::string object_id = a.get("object").symbol();
  std::string source_container = prop(a, "source-container");
  std::string dest_container = prop(a, "dest-container");
  c.current_object = object_id;
  c.last_detection.reset();

  auto container_action = [&](const std::string& type, const std::string& cid) {
    return make_designator(DesignatorKind::Action, {{"type", type}, {"container", cid}});
  };
  auto nav_to_container = [&](const std::string& cid) {
    const ArticulatedContainer& cont = it.world().container(cid);
    // aim for the handle itself, not the moving-link origin (the hinge can sit
    // a full door-width away from where the gripper has to reach)
    Pose handle = it.world().link_pose(cont.moving_link) * cont.handle;
    auto loc = make_designator(DesignatorKind::Location, {{"reachable-for", handle}});
    PoseDistribution d = ground_location(*loc, it.world(), c.robot, c.reason);
    Rng stream = Rng(c.seed ^ fnv1a("container:" + cid)).derive("container-base");
    auto nav = make_designator(DesignatorKind::Action,
                               {{"type", "navigating"}, {"target", d.sample(stream)}});
    it.perform(nav);
  };

  Outcome out = it.with_retry(1, [&](Interpreter& in) {
    if (!source_container.empty() &&
        !holds(*Goal::container_state(source_container, "open"), in.world(), c.robot)) {
      nav_to_container(source_container);
      in.perform(container_action("opening-container", source_container));
    }
    in.perform(make_designator(DesignatorKind::Action,
                               {{"type", "fetching"}, {"object", object_id}}));
    if (!source_container.empty())
      in.perform(container_action("closing-container", source_container));
    if (!dest_container.empty() &&
        !holds(*Goal::container_state(dest_container, "open"), in.world(), c.robot)) {
      nav_to_container(dest_container);
      in.perform(container_action("opening-container", dest_container));
    }
    in.perform(make_designator(
        DesignatorKind::Action,
        {{"type", "delivering"},
         {"object", object_id},
         {"destination", a.get("destination").symbol()},
         {"jam-risk", dest_container.empty() ? "no" : "yes"}}));
    if (!dest_container.empty())
      in.perform(container_action("closing-container", dest_container));
  });
  if (!out.ok) out.rethrow();
}

GoalPtr transporting_goal(const Designator& a) {
  auto [kind, place] = split_location(a.get("destination").symbol());
  return Goal::object_at(a.get("object").symbol(), kind, place);
}

}  // namespace

void PlanContext::fail(FailureCategory cat, const std::string& message) {
  if (on_failure) on_failure(current_object, cat);
  throw PlanFailure(cat, message);
}

void PlanContext::spend(Interpreter& it, const std::string& phase_key, double seconds) {
  if (seconds <= 0.0) return;
  it.advance(seconds);
  phase_durations[phase_key] += seconds;
}

std::vector<Pose> base_pose_candidates(const PlanContext& ctx, const WorldState& w,
                                       const std::string& object_id, int n, uint64_t seed) {
  auto loc = make_designator(DesignatorKind::Location, {{"reachable-for", object_id}});
  if (ctx.mode == "specialized") {
    auto mit = ctx.models.find("picking-up:" + object_id);
    if (mit != ctx.models.end()) {
      try {
        PoseDistribution prior = ground_location(*loc, w, ctx.robot, ctx.reason);
        CombinedDistribution comb = combine(mit->second, prior);
        std::vector<Pose> out;
        for (const Eigen::Vector3d& s : sample(comb, seed, 6 * n)) {
          Pose p = Pose::translation(s.x(), s.y(), 0.0) * Pose::rot_z(s.z());
          bool dup = false;
          for (const Pose& o : out)
            if ((o.t - p.t).norm() < 1e-9 && rotation_angle(o.q, p.q) < 1e-9) dup = true;
          if (!dup) out.push_back(p);
          if (static_cast<int>(out.size()) == n) break;
        }
        if (!out.empty()) return out;
      } catch (const EmptySupport&) {
        // no overlap between experience and the current prior: fall back
      }
    }
  }
  ParameterQuery q;
  q.action_type = "picking-up";
  q.parameter = "base-pose";
  q.object = make_designator(DesignatorKind::Object,
                             {{"type", w.object(object_id).type}, {"name", object_id}});
  q.world = &w;
  q.robot = &ctx.robot;
  q.seed = seed;
  q.max_candidates = n;
  q.params = ctx.reason;
  CandidateStream s = infer(q);
  std::vector<Pose> out;
  while (auto v = s.next()) out.push_back(v->pose());
  return out;
}

DesignatorPtr transport_action(const TransportTask& t, const std::string& phase) {
  return make_designator(DesignatorKind::Action, {{"type", "transporting"},
                                                  {"object", t.object_id},
                                                  {"destination", t.destination},
                                                  {"source-container", t.source_container},
                                                  {"dest-container", t.dest_container},
                                                  {"phase", phase}});
}

void register_standard_plans(Interpreter& it, PlanContext& ctx) {
  PlanContext* c = &ctx;
  it.register_plan("transporting",
                   [c](Interpreter& in, const Designator& a) { transporting_body(in, a, *c); },
                   transporting_goal);
  it.register_plan("fetching",
                   [c](Interpreter& in, const Designator& a) { fetching_body(in, a, *c); });
  it.register_plan("delivering",
                   [c](Interpreter& in, const Designator& a) { delivering_body(in, a, *c); });
  it.register_plan("navigating",
                   [c](Interpreter& in, const Designator& a) { navigating_body(in, a, *c); });
  it.register_plan("picking-up",
                   [c](Interpreter& in, const Designator& a) { picking_up_body(in, a, *c); });
  it.register_plan("placing",
                   [c](Interpreter& in, const Designator& a) { placing_body(in, a, *c); });
  it.register_plan("perceiving",
                   [c](Interpreter& in, const Designator& a) { perceiving_body(in, a, *c); });
  it.register_plan("opening-container", [c](Interpreter& in, const Designator& a) {
    opening_closing_body(in, a, *c, true);
  });
  it.register_plan("closing-container", [c](Interpreter& in, const Designator& a) {
    opening_closing_body(in, a, *c, false);
  });
}

}  // namespace hsim
