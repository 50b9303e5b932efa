#include <doctest.h>

#include "hsim/perception.hpp"

using namespace hsim;

namespace {

// Table slab with a camera-friendly layout; objects are added per test.
WorldState scene_world() {
  auto env = std::make_shared<KinematicTree>();
  Link root;
  root.name = "map";
  root.shapes.push_back({Box{Vec3(0.8, 0.8, 0.02)}, Pose::translation(0.9, 0.0, 0.68)});
  env->add_link(root);
  env->finalize();
  WorldState w;
  w.environment = env;
  return w;
}

SceneObject milk_box(const std::string& id, const Pose& p) {
  SceneObject o;
  o.id = id;
  o.type = "milk";
  o.color = "white";
  o.shape = Box{Vec3(0.035, 0.05, 0.10)};
  o.pose = p;
  return o;
}

// camera at `eye` looking along +x toward the table center
Pose camera_at(const Vec3& eye, double pitch = 0.5) {
  return Pose{eye, Quat(Eigen::AngleAxisd(pitch, Vec3::UnitY()))};
}

double box_symmetric_angle(const Quat& est, const Quat& truth) {
  // a box with distinct extents is invariant under 180-degree flips
  double best = rotation_angle(est, truth);
  for (const Vec3& axis : {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()}) {
    Quat flipped = truth * Quat(Eigen::AngleAxisd(M_PI, axis));
    best = std::min(best, rotation_angle(est, flipped));
  }
  return best;
}

}  // namespace

TEST_CASE("noiseless sphere cloud lies exactly on the sphere surface") {
  WorldState w = scene_world();
  SceneObject ball;
  ball.id = "ball";
  ball.type = "ball";
  ball.shape = Sphere{0.1};
  ball.pose = Pose::translation(1.0, 0.0, 0.8);
  w.objects.push_back(ball);
  Pose cam = camera_at({0.0, 0.0, 1.0}, 0.2);
  PointCloud c = render_cloud(w, cam, "ball", 0.0, 0.0, 1);
  REQUIRE(c.points.size() > 100);
  for (const Vec3& p : c.points) {
    Vec3 wp = cam.apply(p);
    CHECK(std::abs((wp - ball.pose.t).norm() - 0.1) < 1e-9);
    // only the camera-facing hemisphere is visible
    CHECK((wp - cam.t).norm() < (ball.pose.t - cam.t).norm() + 1e-9);
  }
}

TEST_CASE("an object behind furniture renders an empty cloud") {
  WorldState w = scene_world();
  auto env = std::make_shared<KinematicTree>();
  Link root;
  root.name = "map";
  root.shapes.push_back({Box{Vec3(0.05, 2.0, 2.0)}, Pose::translation(0.6, 0.0, 1.0)});
  env->add_link(root);
  env->finalize();
  w.environment = env;
  w.objects.push_back(milk_box("milk1", Pose::translation(1.2, 0.0, 0.9)));
  PointCloud c = render_cloud(w, camera_at({0.0, 0.0, 1.0}, 0.0), "milk1", 0.0, 0.0, 1);
  CHECK(c.points.empty());

  // and outside the frustum (object behind the camera)
  w.environment = scene_world().environment;
  PointCloud c2 = render_cloud(w, camera_at({2.5, 0.0, 1.0}, 0.0), "milk1", 0.0, 0.0, 1);
  CHECK(c2.points.empty());
}

TEST_CASE("noise sigma produces the expected RMS radial deviation") {
  WorldState w = scene_world();
  SceneObject ball;
  ball.id = "ball";
  ball.type = "ball";
  ball.shape = Sphere{0.15};
  ball.pose = Pose::translation(1.0, 0.0, 1.0);
  w.objects.push_back(ball);
  Pose cam = camera_at({0.0, 0.0, 1.0}, 0.0);
  double sigma = 0.003;
  PointCloud noisy = render_cloud(w, cam, "ball", sigma, 0.0, 7, 6000);
  PointCloud clean = render_cloud(w, cam, "ball", 0.0, 0.0, 7, 6000);
  REQUIRE(noisy.points.size() == clean.points.size());
  double ss = 0.0;
  for (size_t i = 0; i < noisy.points.size(); ++i)
    ss += (noisy.points[i] - clean.points[i]).squaredNorm();
  double rms = std::sqrt(ss / noisy.points.size());
  CHECK(rms == doctest::Approx(sigma * std::sqrt(3.0)).epsilon(0.10));

  PointCloud dropped = render_cloud(w, cam, "ball", 0.0, 0.5, 7, 6000);
  CHECK(dropped.points.size() < clean.points.size() * 0.6);
  CHECK(dropped.points.size() > clean.points.size() * 0.4);
}

TEST_CASE("pca axes follow the box extents and are orthonormal") {
  Rng rng(3);
  PointCloud c;
  for (int i = 0; i < 4000; ++i)
    c.points.push_back({rng.uniform(-0.3, 0.3), rng.uniform(-0.2, 0.2), rng.uniform(-0.1, 0.1)});
  PcaResult r = pca_axes(c);
  CHECK(std::abs(r.axes.col(0).dot(Vec3::UnitX())) > 0.999);
  CHECK(std::abs(r.axes.col(1).dot(Vec3::UnitY())) > 0.999);
  CHECK(std::abs(r.axes.col(2).dot(Vec3::UnitZ())) > 0.999);
  CHECK(r.eigenvalues(0) >= r.eigenvalues(1));
  CHECK(r.eigenvalues(1) >= r.eigenvalues(2));
  // variance of U(-a, a) is a^2/3
  CHECK(r.eigenvalues(0) == doctest::Approx(0.09 / 3).epsilon(0.1));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(std::abs(r.axes.col(i).dot(r.axes.col(j)) - (i == j ? 1.0 : 0.0)) < 1e-9);
  CHECK(r.axes.determinant() == doctest::Approx(1.0));

  PointCloud line;
  for (int i = 0; i < 5; ++i) line.points.push_back({0.1 * i, 0.0, 0.0});
  CHECK_THROWS_AS(pca_axes(line), PcaDegenerate);
  PointCloud few{{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, ""};
  CHECK_THROWS_AS(pca_axes(few), PcaDegenerate);
}

TEST_CASE("axis candidates are proper, distinct, and counted 24 or 12") {
  for (bool paper12 : {false, true}) {
    auto cands = axis_candidates(paper12);
    CHECK(cands.size() == (paper12 ? 12 : 24));
    for (size_t i = 0; i < cands.size(); ++i) {
      CHECK(cands[i].toRotationMatrix().determinant() == doctest::Approx(1.0));
      for (size_t j = i + 1; j < cands.size(); ++j)
        CHECK(rotation_angle(cands[i], cands[j]) > 1e-6);
    }
  }
}

TEST_CASE("icp fixed point, known rotation, and symmetry equivalence") {
  Rng rng(5);
  Shape box = Box{Vec3(0.06, 0.04, 0.12)};
  auto model = surface_samples(box, 400, rng);

  IcpResult fixed = icp(model, model, Pose::identity());
  CHECK(fixed.score <= 1e-12);
  CHECK((fixed.transform.t).norm() < 1e-9);
  CHECK(rotation_angle(fixed.transform.q, Quat::Identity()) < 1e-9);

  Pose truth = Pose::rot_z(10.0 * M_PI / 180.0);
  std::vector<Vec3> target;
  for (const Vec3& p : model) target.push_back(truth.apply(p));
  IcpResult r = icp(model, target, Pose::identity());
  CHECK(r.score <= 1e-8);
  CHECK(rotation_angle(r.transform.q, truth.q) < 0.5 * M_PI / 180.0);

  // square cross-section: a 90-degree turn is in the symmetry class
  Shape sq = Box{Vec3(0.05, 0.05, 0.12)};
  Rng rng2(6);
  auto sq_model = surface_samples(sq, 400, rng2);
  std::vector<Vec3> sq_turned;
  for (const Vec3& p : sq_model) sq_turned.push_back(Pose::rot_z(M_PI / 2).apply(p));
  double s0 = icp(sq_model, sq_model, Pose::identity()).score;
  double s1 = icp(sq_model, sq_turned, Pose::rot_z(M_PI / 2)).score;
  CHECK(std::abs(s0 - s1) < 1e-9);
}

TEST_CASE("estimate_pose from the exact model cloud is the exact pose") {
  WorldState w = scene_world();
  w.objects.push_back(milk_box("milk1", Pose::translation(1.0, 0.1, 0.8)));
  Pose cam = camera_at({0.0, 0.0, 1.2}, 0.3);
  Pose truth = w.object_pose("milk1");
  PointCloud cloud;
  cloud.source_id = "milk1";
  for (const Vec3& p : model_cloud_for("milk", w.object("milk1").shape))
    cloud.points.push_back(cam.inverse().apply(truth.apply(p)));
  DetectionResult r = estimate_pose("milk", cloud, cam, w);
  CHECK(r.score <= 1e-12);
  CHECK((r.pose.t - truth.t).norm() < 1e-6);
  CHECK(box_symmetric_angle(r.pose.q, truth.q) < 1e-6);
  CHECK(r.confidence > 0.99);
  CHECK_FALSE(r.corrected_by_physics);
  for (double s : r.candidate_scores) CHECK(r.score <= s);  // best-score selection
}

TEST_CASE("estimate_pose over 50 noisy scenes stays within 1 cm and 5 degrees") {
  Rng rng(42);
  int corrected = 0;
  for (int trial = 0; trial < 50; ++trial) {
    WorldState w = scene_world();
    double yaw = rng.uniform(0, 2 * M_PI);
    // lying on its side: long axis horizontal, resting height = half the y extent
    Pose truth = Pose::translation(rng.uniform(0.7, 1.1), rng.uniform(-0.3, 0.3), 0.75) *
                 Pose::rot_z(yaw) *
                 Pose{Vec3::Zero(), Quat(Eigen::AngleAxisd(M_PI / 2, Vec3::UnitX()))};
    w.objects.push_back(milk_box("milk1", truth));
    Pose cam = camera_at({-0.4, 0.0, 1.4}, 0.45);
    PointCloud cloud = render_cloud(w, cam, "milk1", 0.002, 0.05, 1000 + trial, 900);
    REQUIRE(cloud.points.size() > 50);
    DetectionResult r = estimate_pose("milk", cloud, cam, w);
    CHECK((r.pose.t - truth.t).norm() <= 0.01);
    CHECK(box_symmetric_angle(r.pose.q, truth.q) <= 5.0 * M_PI / 180.0);
    if (r.corrected_by_physics) ++corrected;
  }
  CHECK(corrected <= 5);  // resting objects should rarely need correction
}

TEST_CASE("estimate_pose error is equivariant under a rigid scene motion") {
  auto run = [](const Pose& g) {
    WorldState w = scene_world();
    // move the table along with the scene
    auto env = std::make_shared<KinematicTree>();
    Link root;
    root.name = "map";
    root.shapes.push_back({Box{Vec3(0.8, 0.8, 0.02)}, g * Pose::translation(0.9, 0.0, 0.68)});
    env->add_link(root);
    env->finalize();
    w.environment = env;
    Pose truth = g * Pose::translation(1.0, 0.1, 0.8);
    w.objects.push_back(milk_box("milk1", truth));
    Pose cam = g * camera_at({-0.2, 0.0, 1.3}, 0.4);
    PointCloud cloud = render_cloud(w, cam, "milk1", 0.001, 0.0, 77, 900);
    DetectionResult r = estimate_pose("milk", cloud, cam, w);
    return std::pair{(r.pose.t - truth.t).norm(), box_symmetric_angle(r.pose.q, truth.q)};
  };
  auto [e0_t, e0_r] = run(Pose::identity());
  auto [e1_t, e1_r] = run(Pose::translation(0.8, -1.5, 0.0) * Pose::rot_z(1.1));
  CHECK(e0_t < 0.01);
  CHECK(e1_t < 0.01);
  CHECK(e0_r < 5.0 * M_PI / 180.0);
  CHECK(e1_r < 5.0 * M_PI / 180.0);
}

TEST_CASE("estimate_pose is deterministic for identical inputs") {
  WorldState w = scene_world();
  w.objects.push_back(milk_box("milk1", Pose::translation(1.0, -0.1, 0.8)));
  Pose cam = camera_at({-0.2, 0.0, 1.3}, 0.4);
  PointCloud cloud = render_cloud(w, cam, "milk1", 0.002, 0.05, 31, 900);
  DetectionResult a = estimate_pose("milk", cloud, cam, w);
  DetectionResult b = estimate_pose("milk", cloud, cam, w);
  CHECK((a.pose.t - b.pose.t).norm() == 0.0);
  CHECK(rotation_angle(a.pose.q, b.pose.q) == 0.0);
  CHECK(a.score == b.score);
  CHECK(a.candidate_index == b.candidate_index);
  CHECK(a.candidate_scores == b.candidate_scores);
  CHECK(a.candidate_scores.size() == 24);

  PerceptionConfig twelve;
  twelve.paper12 = true;
  DetectionResult c = estimate_pose("milk", cloud, cam, w, twelve);
  CHECK(c.candidate_scores.size() == 12);
  // the reduced candidate set can land in a slightly worse basin
  CHECK((c.pose.t - w.object_pose("milk1").t).norm() < 0.03);
}

TEST_CASE("a penetrating estimate is corrected by physics") {
  WorldState w = scene_world();
  Pose truth = Pose::translation(1.0, 0.0, 0.8);
  w.objects.push_back(milk_box("milk1", truth));
  Pose cam = camera_at({0.0, 0.0, 1.2}, 0.3);
  // hand-built cloud that reports the object sunk into the table top
  Pose sunk = Pose::translation(1.0, 0.0, 0.74);
  PointCloud cloud;
  cloud.source_id = "milk1";
  for (const Vec3& p : model_cloud_for("milk", w.object("milk1").shape))
    cloud.points.push_back(cam.inverse().apply(sunk.apply(p)));
  DetectionResult r = estimate_pose("milk", cloud, cam, w);
  CHECK(r.corrected_by_physics);
  // output pose does not penetrate the table slab
  CHECK(r.pose.t.z() >= 0.70 + 0.035 - 1e-3);
}

TEST_CASE("detect filters by type and color and reports misses") {
  WorldState w = scene_world();
  w.objects.push_back(milk_box("milk1", Pose::translation(1.0, 0.2, 0.8)));
  SceneObject cup;
  cup.id = "red_cup";
  cup.type = "cup";
  cup.color = "red";
  cup.shape = Box{Vec3(0.04, 0.04, 0.06)};
  cup.pose = Pose::translation(1.0, -0.2, 0.76);
  w.objects.push_back(cup);
  Pose cam = camera_at({-0.3, 0.0, 1.3}, 0.4);

  auto q = make_designator(DesignatorKind::Object, {{"type", "cup"}, {"color", "red"}});
  DetectionResult r = detect(*q, w, cam, 5);
  CHECK(r.object_id == "red_cup");
  CHECK(r.color == "red");
  CHECK((r.pose.t - cup.pose.t).norm() < 0.02);
  auto d = r.to_designator();
  CHECK(d->get("name").symbol() == "red_cup");
  CHECK(d->get("confidence").number() > 0.0);

  auto absent = make_designator(DesignatorKind::Object, {{"type", "bowl"}});
  CHECK_THROWS_AS(detect(*absent, w, cam, 5), PlanFailure);
  try {
    detect(*absent, w, cam, 5);
  } catch (const PlanFailure& f) {
    CHECK(f.category() == FailureCategory::Perception);
  }
  auto empty = make_designator(DesignatorKind::Object, {{"type", ""}});
  CHECK_THROWS_AS(detect(*empty, w, cam, 5), std::invalid_argument);
}

TEST_CASE("injected miss probability shows up at the configured frequency") {
  WorldState w = scene_world();
  SceneObject spoon;
  spoon.id = "spoon1";
  spoon.type = "spoon";
  spoon.shape = Box{Vec3(0.08, 0.015, 0.008)};
  spoon.pose = Pose::translation(1.0, 0.0, 0.71);
  w.objects.push_back(spoon);
  Pose cam = camera_at({-0.3, 0.0, 1.3}, 0.5);
  PerceptionConfig cfg;
  cfg.miss_probability["spoon"] = 0.3;
  int misses = 0;
  int n = 400;
  for (int i = 0; i < n; ++i) {
    try {
      auto q = make_designator(DesignatorKind::Object, {{"type", "spoon"}});
      detect(*q, w, cam, 10000 + i, cfg);
    } catch (const PlanFailure& f) {
      REQUIRE(f.category() == FailureCategory::Perception);
      ++misses;
    }
  }
  // ~3 sigma band around the binomial mean 120
  CHECK(misses > 120 - 3 * 10);
  CHECK(misses < 120 + 3 * 10);
}
