#include <doctest.h>

#include <fstream>

#include "hsim/collision.hpp"
#include "hsim/reasoner.hpp"

using namespace hsim;

namespace {

RobotInfo mini_robot() {
  auto t = std::make_shared<KinematicTree>();
  t->add_link({"odom", {}});
  t->add_link({"base_link", {}});
  t->add_link({"gripper_l", {}});
  t->add_link({"gripper_r", {}});
  t->add_link({"camera", {}});
  Joint base;
  base.name = "world_joint";
  base.type = JointType::PlanarBase;
  base.parent = "odom";
  base.child = "base_link";
  base.lo = -10;
  base.hi = 10;
  base.vmax = 1.0;
  t->add_joint(base);
  for (auto [name, child, y] : {std::tuple{"gl", "gripper_l", 0.25}, {"gr", "gripper_r", -0.25}}) {
    Joint j;
    j.name = name;
    j.type = JointType::Fixed;
    j.parent = "base_link";
    j.child = child;
    j.origin = Pose::translation(0.4, y, 0.8);
    t->add_joint(j);
  }
  Joint c;
  c.name = "cam";
  c.type = JointType::Fixed;
  c.parent = "base_link";
  c.child = "camera";
  c.origin = Pose::translation(0.0, 0.0, 1.2);
  t->add_joint(c);
  t->finalize();
  RobotInfo r;
  r.tree = t;
  r.base_link = "base_link";
  r.camera_link = "camera";
  r.gripper_link["left"] = "gripper_l";
  r.gripper_link["right"] = "gripper_r";
  r.base_radius = 0.35;
  return r;
}

WorldState table_world(const RobotInfo& robot) {
  auto env = std::make_shared<KinematicTree>();
  Link root;
  root.name = "map";
  env->add_link(root);
  Link table;
  table.name = "dining_table";
  table.shapes.push_back({Box{Vec3(0.5, 0.4, 0.02)}, Pose::translation(0, 0, 0.72)});
  table.shapes.push_back({Box{Vec3(0.04, 0.04, 0.36)}, Pose::translation(0, 0, 0.36)});
  env->add_link(table);
  Joint tj;
  tj.name = "table_joint";
  tj.type = JointType::Fixed;
  tj.parent = "map";
  tj.child = "dining_table";
  tj.origin = Pose::translation(2.0, 0.0, 0.0);
  env->add_joint(tj);
  env->finalize();
  WorldState w;
  w.robot = robot.tree;
  w.environment = env;
  for (const DofInfo& d : robot.tree->dofs()) w.joint_positions[d.name] = 0.0;
  SceneObject cup;
  cup.id = "cup";
  cup.type = "cup";
  cup.shape = Box{Vec3(0.04, 0.04, 0.06)};
  cup.pose = Pose::translation(1.8, 0.2, 0.8);
  w.objects.push_back(cup);
  return w;
}

std::string write_test_catalog() {
  std::string path = "grasps_test.json";
  std::ofstream out(path);
  out << R"({"format":"hsim-grasps-1","grasps":[
    {"id":"cup-side","object_type":"cup","approach":[1,0,0],"priority":1,"opening":0.08},
    {"id":"cup-top","object_type":"cup","approach":[0,0,-1],"priority":0,"opening":0.08},
    {"id":"spoon-top","object_type":"spoon","approach":[0,0,-1],"priority":0,"opening":0.03}
  ]})";
  return path;
}

}  // namespace

TEST_CASE("reachable-for matches an independent predicate grid scan") {
  RobotInfo robot = mini_robot();
  WorldState w = table_world(robot);
  ReasonerParams p;
  auto loc = make_designator(DesignatorKind::Location, {{"reachable-for", "cup"}});
  PoseDistribution d = ground_location(*loc, w, robot, p);
  Vec3 target = w.object_pose("cup").t;
  auto shapes = collect_shapes(w);

  double w_support = -1.0;
  int support_cells = 0;
  for (int ix = 0; ix < d.nx; ++ix)
    for (int iy = 0; iy < d.ny; ++iy)
      for (int it = 0; it < d.ntheta; ++it) {
        double x = d.x_of(ix), y = d.y_of(iy);
        // independent predicate evaluation
        double dist = std::hypot(target.x() - x, target.y() - y);
        bool in_annulus = dist >= p.reach_inner && dist <= p.reach_outer;
        bool free = true;
        for (const WorldShape& ws : shapes) {
          if (ws.owner == WorldShape::Owner::RobotLink) continue;
          double pz = std::clamp(ws.pose.t.z(), 0.1, 1.2);
          if (point_shape_distance(ws.shape, ws.pose, Vec3(x, y, pz)) < robot.base_radius)
            free = false;
        }
        double bearing = std::atan2(target.y() - y, target.x() - x);
        bool facing =
            std::abs(std::remainder(d.theta_of(it) - bearing, 2 * M_PI)) <= p.facing_tolerance;
        bool oracle = in_annulus && free && facing;
        double weight = d.at(ix, iy, it);
        CHECK((weight > 0.0) == oracle);
        if (weight > 0.0) {
          ++support_cells;
          if (w_support < 0) w_support = weight;
          CHECK(weight == doctest::Approx(w_support));  // uniform over support
        }
      }
  CHECK(support_cells > 100);
  double sum = 0;
  for (double v : d.w) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("reachable-for a point inside a wall is location-unreachable") {
  RobotInfo robot = mini_robot();
  auto env = std::make_shared<KinematicTree>();
  Link root;
  root.name = "map";
  root.shapes.push_back({Box{Vec3(1.3, 1.3, 1.0)}, Pose::translation(0, 0, 1.0)});
  env->add_link(root);
  env->finalize();
  WorldState w;
  w.robot = robot.tree;
  w.environment = env;
  for (const DofInfo& d : robot.tree->dofs()) w.joint_positions[d.name] = 0.0;
  auto loc = make_designator(DesignatorKind::Location,
                             {{"reachable-for", Value(Pose::translation(0, 0, 1.0))}});
  CHECK_THROWS_AS(ground_location(*loc, w, robot), PlanFailure);
}

TEST_CASE("on(surface) support excludes occupied footprints and stays on the table") {
  RobotInfo robot = mini_robot();
  WorldState w = table_world(robot);
  w.object("cup").pose = Pose::translation(2.1, 0.1, 0.8);  // standing on the table
  auto loc = make_designator(DesignatorKind::Location, {{"on", "dining_table"}});
  PoseDistribution d = ground_location(*loc, w, robot);
  CHECK(d.z == doctest::Approx(0.74).epsilon(0.01));
  Vec3 cup_xy = w.object_pose("cup").t;
  for (int ix = 0; ix < d.nx; ++ix)
    for (int iy = 0; iy < d.ny; ++iy)
      for (int it = 0; it < d.ntheta; ++it) {
        if (d.at(ix, iy, it) <= 0.0) continue;
        double x = d.x_of(ix), y = d.y_of(iy);
        CHECK(std::abs(x - 2.0) < 0.5);  // within the table top
        CHECK(std::abs(y) < 0.4);
        CHECK(std::hypot(x - cup_xy.x(), y - cup_xy.y()) > 0.07);
      }
}

TEST_CASE("visible-for requires line of sight") {
  RobotInfo robot = mini_robot();
  WorldState w = table_world(robot);
  // a tall screen north of the cup blocks sight from that side
  auto env = std::make_shared<KinematicTree>();
  Link root;
  root.name = "map";
  root.shapes.push_back({Box{Vec3(0.05, 4.0, 1.2)}, Pose::translation(1.2, 0.0, 1.2)});
  env->add_link(root);
  env->finalize();
  w.environment = env;
  w.object("cup").pose = Pose::translation(2.0, 0.0, 0.9);
  auto loc = make_designator(DesignatorKind::Location, {{"visible-for", "cup"}});
  PoseDistribution d = ground_location(*loc, w, robot);
  for (int ix = 0; ix < d.nx; ++ix)
    for (int iy = 0; iy < d.ny; ++iy)
      for (int it = 0; it < d.ntheta; ++it)
        if (d.at(ix, iy, it) > 0.0)
          CHECK(d.x_of(ix) > 1.2);  // all support is on the cup's side of the screen
}

TEST_CASE("infer arm candidates are ordered by laterality") {
  RobotInfo robot = mini_robot();
  WorldState w = table_world(robot);
  ParameterQuery q;
  q.action_type = "picking-up";
  q.parameter = "arm";
  q.world = &w;
  q.robot = &robot;
  q.object = make_designator(DesignatorKind::Object, {{"type", "cup"}, {"name", "cup"}});

  w.object("cup").pose = Pose::translation(1.0, 0.6, 0.8);  // robot's left
  auto s = infer(q);
  CHECK(s.next()->symbol() == "left");
  CHECK(s.next()->symbol() == "right");
  CHECK_FALSE(s.next().has_value());

  w.object("cup").pose = Pose::translation(1.0, -0.6, 0.8);
  auto s2 = infer(q);
  CHECK(s2.next()->symbol() == "right");
}

TEST_CASE("grasp candidates follow catalog priority; spoon gets the top grasp first") {
  GraspCatalog cat = GraspCatalog::load(write_test_catalog());
  RobotInfo robot = mini_robot();
  WorldState w = table_world(robot);
  ParameterQuery q;
  q.parameter = "grasp";
  q.world = &w;
  q.robot = &robot;
  q.catalog = &cat;
  q.object = make_designator(DesignatorKind::Object, {{"type", "cup"}, {"name", "cup"}});
  auto s = infer(q);
  CHECK(s.next()->symbol() == "cup-top");  // priority 0 before priority 1
  CHECK(s.next()->symbol() == "cup-side");

  q.object = make_designator(DesignatorKind::Object, {{"type", "spoon"}});
  auto s2 = infer(q);
  CHECK(s2.next()->symbol() == "spoon-top");
  CHECK_FALSE(s2.next().has_value());

  CHECK(cat.by_id("spoon-top").opening == doctest::Approx(0.03));
  CHECK_THROWS_AS(GraspCatalog::load("no_such_file.json"), std::exception);
}

TEST_CASE("gripper-opening is the object width plus clearance") {
  RobotInfo robot = mini_robot();
  WorldState w = table_world(robot);
  ParameterQuery q;
  q.parameter = "gripper-opening";
  q.world = &w;
  q.robot = &robot;
  q.object = make_designator(DesignatorKind::Object, {{"type", "cup"}, {"name", "cup"}});
  auto clamped = infer(q);
  CHECK(clamped.next()->number() == doctest::Approx(0.09));  // capped at the gripper range

  RobotInfo wide = robot;
  wide.gripper_max = 0.2;
  q.robot = &wide;
  auto s = infer(q);
  CHECK(s.next()->number() == doctest::Approx(0.08 + 0.02));  // 2*0.04 + 0.02
}

TEST_CASE("base-pose candidates are deterministic per seed and inside the support") {
  RobotInfo robot = mini_robot();
  WorldState w = table_world(robot);
  ParameterQuery q;
  q.parameter = "base-pose";
  q.world = &w;
  q.robot = &robot;
  q.seed = 42;
  q.object = make_designator(DesignatorKind::Object, {{"type", "cup"}, {"name", "cup"}});

  auto loc = make_designator(DesignatorKind::Location, {{"reachable-for", "cup"}});
  PoseDistribution d = ground_location(*loc, w, robot);
  Vec3 target = w.object_pose("cup").t;

  std::vector<Pose> run1, run2;
  for (auto* out : {&run1, &run2}) {
    auto s = infer(q);
    while (auto v = s.next()) out->push_back(v->pose());
  }
  REQUIRE(run1.size() == run2.size());
  REQUIRE(run1.size() >= 5);
  for (size_t i = 0; i < run1.size(); ++i) {
    CHECK((run1[i].t - run2[i].t).norm() == 0.0);
    double dist = std::hypot(target.x() - run1[i].t.x(), target.y() - run1[i].t.y());
    CHECK(dist >= 0.4);
    CHECK(dist <= 0.9);
  }
  q.seed = 43;  // different seed, different draw order
  auto s3 = infer(q);
  bool any_diff = false;
  for (size_t i = 0; i < run1.size(); ++i) {
    auto v = s3.next();
    if (!v || (v->pose().t - run1[i].t).norm() > 0) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("validate_by_projection is pure and returns the projected failure") {
  RobotInfo robot = mini_robot();
  WorldState w = table_world(robot);
  uint64_t before = w.hash();

  auto setup = [](Interpreter& in) {
    in.register_plan("teleporting", [](Interpreter& i, const Designator& a) {
      i.world().set_joint_position("world_joint/x", a.get("x").number());
      i.advance(1.0);
      if (a.get("x").number() > 5.0)
        throw PlanFailure(FailureCategory::Navigation, "base pose in collision");
    });
  };
  auto ok = validate_by_projection(
      make_designator(DesignatorKind::Action, {{"type", "teleporting"}, {"x", 1.0}}), w, robot,
      setup);
  CHECK(ok.ok);
  CHECK(w.hash() == before);  // projection never touches the real world
  CHECK(w.joint_position("world_joint/x") == 0.0);

  auto bad = validate_by_projection(
      make_designator(DesignatorKind::Action, {{"type", "teleporting"}, {"x", 9.0}}), w, robot,
      setup);
  CHECK_FALSE(bad.ok);
  CHECK(bad.category == FailureCategory::Navigation);
  CHECK(w.hash() == before);
}

TEST_CASE("distribution sampling stays in support; single cell support is degenerate") {
  PoseDistribution d;
  d.nx = 3;
  d.ny = 3;
  d.ntheta = 4;
  d.res = 0.05;
  d.w.assign(3 * 3 * 4, 0.0);
  d.at(1, 2, 3) = 1.0;
  d.normalize();
  Rng rng(7);
  for (int i = 0; i < 50; ++i) CHECK(d.sample_index(rng) == d.index(1, 2, 3));
  Pose p = d.sample(rng);
  CHECK(p.t.x() == doctest::Approx(d.x_of(1)));
  CHECK(p.t.y() == doctest::Approx(d.y_of(2)));

  PoseDistribution empty = d;
  empty.w.assign(empty.w.size(), 0.0);
  CHECK_THROWS_AS(empty.normalize(), EmptySupport);
}
