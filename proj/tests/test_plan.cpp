#include <doctest.h>

#include "hsim/collision.hpp"
#include "hsim/exec.hpp"
#include "hsim/rng.hpp"
#include <nlohmann/json.hpp>

using namespace hsim;

namespace {

RobotInfo mini_robot() {
  auto t = std::make_shared<KinematicTree>();
  t->add_link({"odom", {}});
  t->add_link({"base_link", {}});
  t->add_link({"gripper", {}});
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
  Joint g;
  g.name = "gripper_joint";
  g.type = JointType::Fixed;
  g.parent = "base_link";
  g.child = "gripper";
  g.origin = Pose::translation(0.4, 0.0, 0.8);
  t->add_joint(g);
  Joint c = g;
  c.name = "camera_joint";
  c.child = "camera";
  c.origin = Pose::translation(0.0, 0.0, 1.3);
  t->add_joint(c);
  t->finalize();
  RobotInfo r;
  r.tree = t;
  r.base_link = "base_link";
  r.camera_link = "camera";
  r.gripper_link["right"] = "gripper";
  r.gripper_dof["right"] = "";
  return r;
}

WorldState plan_world(const RobotInfo& robot) {
  auto env = std::make_shared<KinematicTree>();
  Link root;
  root.name = "map";
  root.shapes.push_back({Box{Vec3(0.6, 0.6, 0.02)}, Pose::translation(2.0, 0.0, 0.7)});
  env->add_link(root);
  Link door;
  door.name = "fridge_door";
  env->add_link(door);
  Joint dj;
  dj.name = "fridge_joint";
  dj.type = JointType::Revolute;
  dj.parent = "map";
  dj.child = "fridge_door";
  dj.origin = Pose::translation(3.0, 1.0, 0.0);
  dj.axis = Vec3::UnitZ();
  dj.lo = 0.0;
  dj.hi = 1.6;
  dj.vmax = 1.0;
  env->add_joint(dj);
  env->finalize();

  WorldState w;
  w.robot = robot.tree;
  w.environment = env;
  for (const DofInfo& d : robot.tree->dofs()) w.joint_positions[d.name] = 0.0;
  w.joint_positions["fridge_joint"] = 0.0;
  ArticulatedContainer fridge;
  fridge.id = "fridge";
  fridge.joint = "fridge_joint";
  fridge.kind = ContainerKind::Door;
  fridge.moving_link = "fridge_door";
  fridge.handle = Pose::translation(0.0, -0.3, 1.0);
  fridge.open_position = 1.5;
  fridge.closed_position = 0.0;
  w.containers.push_back(fridge);

  SceneObject cup;
  cup.id = "cup";
  cup.type = "cup";
  cup.color = "red";
  cup.shape = Box{Vec3(0.04, 0.04, 0.06)};
  cup.pose = Pose::translation(2.0, 0.0, 0.78);
  w.objects.push_back(cup);
  SceneObject milk = cup;
  milk.id = "milk";
  milk.type = "milk";
  milk.color = "white";
  milk.pose = Pose::translation(2.2, 0.2, 0.78);
  w.objects.push_back(milk);
  return w;
}

DesignatorPtr action(std::string type) {
  return make_designator(DesignatorKind::Action, {{"type", std::move(type)}});
}

}  // namespace

TEST_CASE("designator key and kind invariants") {
  CHECK_THROWS_AS(Designator(DesignatorKind::Action, {{"object", Value("cup")}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      Designator(DesignatorKind::Action, {{"type", Value("a")}, {"type", Value("b")}}),
      std::invalid_argument);
  auto d = make_designator(DesignatorKind::Object, {{"type", "cup"}, {"color", "red"}});
  CHECK(d->get("color").symbol() == "red");
  auto d2 = d->with("color", "blue")->with("grasp", 2.0);
  CHECK(d2->get("color").symbol() == "blue");
  CHECK(d->get("color").symbol() == "red");  // immutability
  CHECK(d2->get("grasp").number() == 2.0);
}

TEST_CASE("designator json round trip with nesting") {
  auto inner = make_designator(DesignatorKind::Object, {{"type", "cup"}});
  auto d = make_designator(
      DesignatorKind::Action,
      {{"type", "picking-up"},
       {"object", Value(inner)},
       {"target", Value(Pose{Vec3(1, 2, 3), Quat(Eigen::AngleAxisd(0.5, Vec3::UnitZ()))})},
       {"via", Value(std::vector<Value>{Value(1.0), Value("a")})}});
  auto back = Designator::from_json(d->to_json());
  CHECK(back->to_json() == d->to_json());
  CHECK(back->get("object").designator()->get("type").symbol() == "cup");
  CHECK((back->get("target").pose().t - Vec3(1, 2, 3)).norm() < 1e-12);
}

TEST_CASE("holds: object-in-hand and connectives") {
  RobotInfo robot = mini_robot();
  WorldState w = plan_world(robot);
  CHECK_FALSE(holds(*Goal::object_in_hand("cup"), w, robot));
  CHECK(holds(*Goal::g_and({Goal::container_state("fridge", "closed"),
                            Goal::g_not(Goal::object_in_hand("milk"))}),
              w, robot));
  // move gripper over the cup and attach
  w.set_joint_position("world_joint/x", 1.6);
  w.object("cup").pose = Pose::translation(2.0, 0.0, 0.8);
  w.attach("cup", "gripper");
  CHECK(holds(*Goal::object_in_hand("cup"), w, robot));
  CHECK(holds(*Goal::object_in_hand("cup", "right"), w, robot));
  CHECK_FALSE(holds(*Goal::object_in_hand("milk"), w, robot));
  CHECK(holds(*Goal::g_or({Goal::object_in_hand("milk"), Goal::object_in_hand("cup")}), w,
              robot));
}

TEST_CASE("holds: unbound terms raise formula errors") {
  RobotInfo robot = mini_robot();
  WorldState w = plan_world(robot);
  CHECK_THROWS_AS(holds(*Goal::object_in_hand("ghost"), w, robot), FormulaError);
  CHECK_THROWS_AS(holds(*Goal::container_state("microwave", "open"), w, robot), FormulaError);
  CHECK_THROWS_AS(holds(*Goal::object_at("cup", "under", "map"), w, robot), FormulaError);
}

TEST_CASE("holds: object-at matches a brute-force support scan") {
  RobotInfo robot = mini_robot();
  WorldState w = plan_world(robot);
  Rng rng(77);
  for (int i = 0; i < 40; ++i) {
    Pose p = Pose::translation(rng.uniform(1.2, 2.8), rng.uniform(-0.8, 0.8),
                               rng.uniform(0.7, 1.1));
    w.object("cup").pose = p;
    // oracle: resting on the table iff horizontally inside and vertically in contact
    bool inside = std::abs(p.t.x() - 2.0) < 0.64 && std::abs(p.t.y()) < 0.64;
    bool contact = std::abs(p.t.z() - 0.78) < 0.02;
    bool oracle = inside && contact;
    ClosestPoints cp = closest_points(w.object("cup").shape, p,
                                      Box{Vec3(0.6, 0.6, 0.02)},
                                      Pose::translation(2.0, 0.0, 0.7));
    if (std::abs(cp.distance) < 0.0205 && std::abs(cp.distance) > 0.0195) continue;  // boundary
    if (std::abs(std::abs(p.t.x() - 2.0) - 0.64) < 0.05) continue;  // edge overhang ambiguity
    if (std::abs(std::abs(p.t.y()) - 0.64) < 0.05) continue;
    CHECK(holds(*Goal::object_at("cup", "on", "map"), w, robot) == oracle);
  }
}

TEST_CASE("holds: container state tracks the joint") {
  RobotInfo robot = mini_robot();
  WorldState w = plan_world(robot);
  CHECK(holds(*Goal::container_state("fridge", "closed"), w, robot));
  CHECK_FALSE(holds(*Goal::container_state("fridge", "open"), w, robot));
  w.set_joint_position("fridge_joint", 1.5);
  CHECK(holds(*Goal::container_state("fridge", "open"), w, robot));
  w.set_joint_position("fridge_joint", 0.7);  // ajar: neither
  CHECK_FALSE(holds(*Goal::container_state("fridge", "open"), w, robot));
  CHECK_FALSE(holds(*Goal::container_state("fridge", "closed"), w, robot));
}

TEST_CASE("perform short-circuits when the goal already holds") {
  RobotInfo robot = mini_robot();
  WorldState w = plan_world(robot);
  w.set_joint_position("world_joint/x", 1.6);
  w.object("cup").pose = Pose::translation(2.0, 0.0, 0.8);
  w.attach("cup", "gripper");

  Interpreter in(w, robot);
  int body_runs = 0;
  in.register_plan(
      "picking-up",
      [&](Interpreter& i, const Designator&) {
        ++body_runs;
        i.count_motion_command();
      },
      [](const Designator& a) { return Goal::object_in_hand(a.get("object").symbol()); });
  auto o = in.run([&](Interpreter& i) {
    i.perform(action("picking-up")->with("object", "cup"));
  });
  CHECK(o.ok);
  CHECK(body_runs == 0);
  CHECK(in.motion_commands() == 0);
  REQUIRE(in.task_tree().size() == 1);
  CHECK(in.task_tree()[0].status == TaskStatus::Succeeded);
}

TEST_CASE("perform runs the body and monitors the goal") {
  RobotInfo robot = mini_robot();
  WorldState w = plan_world(robot);
  Interpreter in(w, robot);
  in.register_plan(
      "picking-up",
      [&](Interpreter& i, const Designator& a) {
        i.count_motion_command();
        i.advance(2.0);
        i.world().set_joint_position("world_joint/x", 1.6);
        i.world().object(a.get("object").symbol()).pose = Pose::translation(2.0, 0.0, 0.8);
        i.world().attach(a.get("object").symbol(), "gripper");
      },
      [](const Designator& a) { return Goal::object_in_hand(a.get("object").symbol()); });
  auto o = in.run([&](Interpreter& i) {
    i.perform(action("picking-up")->with("object", "cup"));
  });
  CHECK(o.ok);
  CHECK(in.motion_commands() == 1);
  CHECK(holds(*Goal::object_in_hand("cup"), w, robot));
  CHECK(in.task_tree()[0].end_time == doctest::Approx(2.0));
}

TEST_CASE("perform fails when the body does not achieve the goal") {
  RobotInfo robot = mini_robot();
  WorldState w = plan_world(robot);
  Interpreter in(w, robot);
  in.register_plan(
      "picking-up", [](Interpreter&, const Designator&) { /* does nothing */ },
      [](const Designator& a) { return Goal::object_in_hand(a.get("object").symbol()); });
  auto o = in.run([&](Interpreter& i) {
    i.perform(action("picking-up")->with("object", "cup"));
  });
  CHECK_FALSE(o.ok);
  CHECK(o.category == FailureCategory::Manipulation);
  CHECK(in.task_tree()[0].status == TaskStatus::Failed);
  CHECK(o.task_id == 0);
}

TEST_CASE("perform without a registered plan fails") {
  RobotInfo robot = mini_robot();
  WorldState w = plan_world(robot);
  Interpreter in(w, robot);
  auto o = in.run([&](Interpreter& i) { i.perform(action("juggling")); });
  CHECK_FALSE(o.ok);
  CHECK(o.category == FailureCategory::Unrecoverable);
}

TEST_CASE("pursue returns the first finisher and evaporates the rest") {
  RobotInfo robot = mini_robot();
  WorldState w = plan_world(robot);
  Interpreter in(w, robot);
  double b_end = -1.0;
  auto o = in.run([&](Interpreter& i) {
    int a = -1, b = -1;
    auto out = i.pursue({[&](Interpreter& i2) {
                           a = i2.begin_task(action("a"));
                           i2.advance(5.0);
                           i2.end_task(a, Outcome::success());
                         },
                         [&](Interpreter& i2) {
                           b = i2.begin_task(action("b"));
                           i2.advance(9.0);
                           i2.end_task(b, Outcome::success());
                           b_end = i2.now();
                         }});
    CHECK(out.ok);
    CHECK(i.now() == doctest::Approx(5.0));
    CHECK(i.task_tree()[b].status == TaskStatus::Evaporated);
    CHECK(i.task_tree()[b].end_time == doctest::Approx(5.0));
    CHECK(i.task_tree()[a].status == TaskStatus::Succeeded);
  });
  CHECK(o.ok);
  CHECK(b_end == -1.0);  // b's tail never ran
}

TEST_CASE("pursue: immediate failure wins over a long branch") {
  RobotInfo robot = mini_robot();
  WorldState w = plan_world(robot);
  Interpreter in(w, robot);
  bool long_branch_finished = false;
  auto o = in.run([&](Interpreter& i) {
    auto out = i.pursue({[&](Interpreter& i2) {
                           i2.advance(100.0);
                           long_branch_finished = true;
                         },
                         [&](Interpreter&) {
                           throw PlanFailure(FailureCategory::Grasp, "slipped immediately");
                         }});
    CHECK_FALSE(out.ok);
    CHECK(out.category == FailureCategory::Grasp);
    CHECK(i.now() == doctest::Approx(0.0));
  });
  CHECK(o.ok);
  CHECK_FALSE(long_branch_finished);
}

TEST_CASE("pursue with slip monitor: object-slipped failure at the event time") {
  RobotInfo robot = mini_robot();
  WorldState w = plan_world(robot);
  Interpreter in(w, robot);
  auto o = in.run([&](Interpreter& i) {
    auto out = i.pursue({[](Interpreter& i2) {
                           // carrying: long motion, posts slip at t=3
                           i2.advance(3.0);
                           i2.post_event("object-slipped", "cup");
                           i2.advance(7.0);
                         },
                         [](Interpreter& i2) {
                           Event e = i2.wait_for("object-slipped");
                           throw PlanFailure(FailureCategory::Grasp,
                                             "object-slipped: " + e.payload);
                         }});
    CHECK_FALSE(out.ok);
    CHECK(out.message == std::string("object-slipped: cup"));
    CHECK(i.now() == doctest::Approx(3.0));
  });
  CHECK(o.ok);
}

TEST_CASE("wait_for returns at the posting time") {
  RobotInfo robot = mini_robot();
  WorldState w = plan_world(robot);
  Interpreter in(w, robot);
  in.run([&](Interpreter& i) {
    auto out = i.pursue({[](Interpreter& i2) {
                           Event e = i2.wait_for("fingers-closed-completely");
                           CHECK(e.time == doctest::Approx(7.0));
                           CHECK(i2.now() == doctest::Approx(7.0));
                         },
                         [](Interpreter& i2) {
                           i2.advance(7.0);
                           i2.post_event("fingers-closed-completely");
                           i2.advance(1.0);
                         }});
    CHECK(out.ok);
  });
}

TEST_CASE("wait_for on a never-posted event evaporates under pursue") {
  RobotInfo robot = mini_robot();
  WorldState w = plan_world(robot);
  Interpreter in(w, robot);
  bool waiter_resumed = false;
  in.run([&](Interpreter& i) {
    int waiter_task = -1;
    auto out = i.pursue({[&](Interpreter& i2) {
                           waiter_task = i2.begin_task(action("waiting"));
                           i2.wait_for("never");
                           waiter_resumed = true;
                         },
                         [](Interpreter& i2) { i2.advance(2.0); }});
    CHECK(out.ok);
    CHECK(i.task_tree()[waiter_task].status == TaskStatus::Evaporated);
  });
  CHECK_FALSE(waiter_resumed);
}

TEST_CASE("seq stops at the first failure") {
  RobotInfo robot = mini_robot();
  WorldState w = plan_world(robot);
  Interpreter in(w, robot);
  bool b_ran = false;
  in.run([&](Interpreter& i) {
    auto out = i.seq({[](Interpreter&) {
                        throw PlanFailure(FailureCategory::Navigation, "no path");
                      },
                      [&](Interpreter&) { b_ran = true; }});
    CHECK_FALSE(out.ok);
    CHECK(out.category == FailureCategory::Navigation);
  });
  CHECK_FALSE(b_ran);
}

TEST_CASE("seq runs children in order on success") {
  RobotInfo robot = mini_robot();
  WorldState w = plan_world(robot);
  Interpreter in(w, robot);
  std::string trace;
  in.run([&](Interpreter& i) {
    auto out = i.seq({[&](Interpreter& i2) { trace += "a"; i2.advance(1.0); },
                      [&](Interpreter& i2) { trace += "b"; i2.advance(1.0); },
                      [&](Interpreter&) { trace += "c"; }});
    CHECK(out.ok);
    CHECK(i.now() == doctest::Approx(2.0));
  });
  CHECK(trace == "abc");
}

TEST_CASE("with_retry: fails twice then succeeds, cap 3") {
  RobotInfo robot = mini_robot();
  WorldState w = plan_world(robot);
  Interpreter in(w, robot);
  int attempts = 0;
  in.run([&](Interpreter& i) {
    int t = i.begin_task(action("stubborn"));
    auto out = i.with_retry(3, [&](Interpreter&) {
      if (++attempts <= 2) throw PlanFailure(FailureCategory::Grasp, "slip");
    });
    CHECK(out.ok);
    i.end_task(t, out);
    CHECK(i.task_tree()[t].retries == 2);
  });
  CHECK(attempts == 3);
}

TEST_CASE("with_retry: cap 0 fails immediately") {
  RobotInfo robot = mini_robot();
  WorldState w = plan_world(robot);
  Interpreter in(w, robot);
  int attempts = 0;
  in.run([&](Interpreter& i) {
    auto out = i.with_retry(0, [&](Interpreter&) {
      ++attempts;
      throw PlanFailure(FailureCategory::Grasp, "slip");
    });
    CHECK_FALSE(out.ok);
  });
  CHECK(attempts == 1);
}

TEST_CASE("pursue rejects fewer than two branches") {
  RobotInfo robot = mini_robot();
  WorldState w = plan_world(robot);
  Interpreter in(w, robot);
  in.run([&](Interpreter& i) {
    CHECK_THROWS_AS(i.pursue({[](Interpreter&) {}}), std::invalid_argument);
  });
}

TEST_CASE("deadlocked wait_for outside pursue is detected") {
  RobotInfo robot = mini_robot();
  WorldState w = plan_world(robot);
  Interpreter in(w, robot);
  CHECK_THROWS_AS(in.run([](Interpreter& i) { i.wait_for("nothing-ever"); }),
                  std::logic_error);
}

namespace {

// a small but branchy program exercised for determinism + well-formedness
void demo_program(Interpreter& i) {
  int root = i.begin_task(action("transporting"));
  i.with_retry(2, [&](Interpreter& i2) {
    static thread_local int fails = 0;
    int t = i2.begin_task(action("fetching"));
    i2.advance(1.5);
    if (i2.task_tree()[root].retries < 1) {
      i2.end_task(t, Outcome{false, FailureCategory::Navigation, "jittery start", t});
      throw PlanFailure(FailureCategory::Navigation, "jittery start");
    }
    (void)fails;
    i2.end_task(t, Outcome::success());
  });
  i.pursue({[](Interpreter& i2) {
              int t = i2.begin_task(action("delivering"));
              i2.advance(4.0);
              i2.post_event("delivered");
              i2.end_task(t, Outcome::success());
            },
            [](Interpreter& i2) {
              i2.wait_for("never-happens");
            },
            [](Interpreter& i2) {
              Event e = i2.wait_for("delivered");
              (void)e;
              i2.advance(10.0);
            }});
  i.end_task(root, Outcome::success());
}

}  // namespace

TEST_CASE("determinism: identical programs give bit-identical logs") {
  RobotInfo robot = mini_robot();
  std::string log1, log2;
  for (std::string* log : {&log1, &log2}) {
    WorldState w = plan_world(robot);
    Interpreter in(w, robot);
    in.run(demo_program);
    *log = in.log_ndjson();
  }
  CHECK(log1 == log2);
  CHECK(!log1.empty());
}

TEST_CASE("task tree well-formedness on a branchy program") {
  RobotInfo robot = mini_robot();
  WorldState w = plan_world(robot);
  Interpreter in(w, robot);
  auto o = in.run(demo_program);
  CHECK(o.ok);
  const auto& tasks = in.task_tree();
  CHECK(tasks.size() >= 4);
  for (const TaskNode& n : tasks) {
    CHECK(n.end_time >= n.start_time);
    CHECK((n.status == TaskStatus::Succeeded || n.status == TaskStatus::Failed ||
           n.status == TaskStatus::Evaporated));
    if (n.parent >= 0) {
      const TaskNode& p = tasks[n.parent];
      CHECK(p.start_time <= n.start_time + 1e-12);
      CHECK(p.end_time + 1e-12 >= n.end_time);
    }
    if (n.failure) CHECK(n.status == TaskStatus::Failed);
  }
  // events nondecreasing
  const auto& evs = in.events();
  for (size_t i = 1; i < evs.size(); ++i) CHECK(evs[i].time >= evs[i - 1].time);
}

TEST_CASE("every failure in a log is attached to exactly one task node") {
  RobotInfo robot = mini_robot();
  WorldState w = plan_world(robot);
  Interpreter in(w, robot);
  in.register_plan("failing-leaf", [](Interpreter&, const Designator&) {
    throw PlanFailure(FailureCategory::Perception, "cup not found");
  });
  auto o = in.run([](Interpreter& i) {
    auto out = i.with_retry(1, [](Interpreter& i2) {
      i2.perform(action("failing-leaf"));
    });
    CHECK_FALSE(out.ok);
  });
  CHECK(o.ok);
  int failed_nodes = 0;
  for (const TaskNode& n : in.task_tree())
    if (n.failure) ++failed_nodes;
  CHECK(failed_nodes == 2);  // one per attempt, each its own node
}
