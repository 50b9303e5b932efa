#include <doctest.h>

#include <Eigen/Dense>

#include "hsim/kinematics.hpp"
#include "hsim/rng.hpp"

using namespace hsim;

namespace {

KinematicTree fixed_chain(int n) {
  KinematicTree t;
  t.add_link({"l0", {}});
  for (int i = 1; i <= n; ++i) {
    t.add_link({"l" + std::to_string(i), {}});
    Joint j;
    j.name = "j" + std::to_string(i);
    j.type = JointType::Fixed;
    j.parent = "l" + std::to_string(i - 1);
    j.child = "l" + std::to_string(i);
    t.add_joint(j);
  }
  t.finalize();
  return t;
}

// 8-DOF serial arm with mixed joint types and non-trivial origins.
KinematicTree random_arm() {
  KinematicTree t;
  t.add_link({"base", {}});
  Rng rng(7);
  std::string parent = "base";
  for (int i = 0; i < 8; ++i) {
    std::string child = "link" + std::to_string(i);
    t.add_link({child, {}});
    Joint j;
    j.name = "q" + std::to_string(i);
    j.type = (i % 3 == 2) ? JointType::Prismatic : JointType::Revolute;
    j.parent = parent;
    j.child = child;
    j.origin = Pose{Vec3(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(0.0, 0.4)),
                    Quat(Eigen::AngleAxisd(rng.uniform(-1.0, 1.0),
                                           Vec3(rng.normal(), rng.normal(), rng.normal()).normalized()))};
    j.axis = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    j.lo = -3.0;
    j.hi = 3.0;
    j.vmax = 1.0;
    t.add_joint(j);
    parent = child;
  }
  t.finalize();
  return t;
}

// Independent oracle: chain 4x4 homogeneous matrices link by link.
Eigen::Matrix4d matrix_chain_fk(const KinematicTree& t, std::span<const double> q,
                                const std::string& link) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  int di = 0;
  for (int li : t.chain_to(link)) {
    int pj = t.parent_joint(li);
    if (pj == -1) continue;
    const Joint& j = t.joints()[pj];
    m = m * j.origin.matrix();
    Eigen::Matrix4d jm = Eigen::Matrix4d::Identity();
    if (j.type == JointType::Revolute) {
      jm.block<3, 3>(0, 0) = Eigen::AngleAxisd(q[di++], j.axis.normalized()).toRotationMatrix();
    } else if (j.type == JointType::Prismatic) {
      jm.block<3, 1>(0, 3) = j.axis.normalized() * q[di++];
    }
    m = m * jm;
  }
  return m;
}

}  // namespace

TEST_CASE("fixed identity chain gives identity pose") {
  KinematicTree t = fixed_chain(4);
  std::vector<double> q;
  Pose p = t.link_pose(q, "l4");
  CHECK(p.t.norm() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rotation_angle(p.q, Quat::Identity()) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("single revolute joint rotates child offset") {
  KinematicTree t;
  t.add_link({"base", {}});
  t.add_link({"arm", {}});
  t.add_link({"tip", {}});
  Joint j;
  j.name = "q0";
  j.type = JointType::Revolute;
  j.parent = "base";
  j.child = "arm";
  j.axis = Vec3::UnitZ();
  j.lo = -3.14;
  j.hi = 3.14;
  t.add_joint(j);
  Joint f;
  f.name = "tipj";
  f.type = JointType::Fixed;
  f.parent = "arm";
  f.child = "tip";
  f.origin = Pose::translation(1.0, 0.0, 0.0);
  t.add_joint(f);
  t.finalize();
  std::vector<double> q{M_PI / 2.0};
  Pose p = t.link_pose(q, "tip");
  CHECK(p.t.x() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(p.t.y() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("random 8-DOF FK matches matrix-chain oracle") {
  KinematicTree t = random_arm();
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> q(8);
    for (double& v : q) v = rng.uniform(-2.0, 2.0);
    Pose p = t.link_pose(q, "link7");
    Eigen::Matrix4d m = matrix_chain_fk(t, q, "link7");
    CHECK((p.matrix() - m).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("FK composition: child pose equals parent composed with joint transform") {
  KinematicTree t = random_arm();
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> q(8);
    for (double& v : q) v = rng.uniform(-2.0, 2.0);
    auto chain = t.chain_to("link7");
    for (size_t i = 1; i < chain.size(); ++i) {
      const std::string& parent = t.links()[chain[i - 1]].name;
      const std::string& child = t.links()[chain[i]].name;
      Pose pp = t.link_pose(q, parent);
      Pose cp = t.link_pose(q, child);
      // recompute via oracle matrices
      Eigen::Matrix4d rel = matrix_chain_fk(t, q, parent).inverse() * matrix_chain_fk(t, q, child);
      Eigen::Matrix4d composed = pp.matrix() * rel;
      CHECK((cp.matrix() - composed).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("fixed-only chain has zero Jacobian") {
  KinematicTree t = fixed_chain(3);
  std::vector<double> q;
  Eigen::MatrixXd J = t.jacobian(q, "l3", Vec3(0.1, 0.2, 0.3));
  CHECK(J.cols() == 0);
}

TEST_CASE("single prismatic joint Jacobian") {
  KinematicTree t;
  t.add_link({"base", {}});
  t.add_link({"slider", {}});
  Joint j;
  j.name = "s";
  j.type = JointType::Prismatic;
  j.parent = "base";
  j.child = "slider";
  j.axis = Vec3::UnitX();
  j.lo = -1.0;
  j.hi = 1.0;
  t.add_joint(j);
  t.finalize();
  std::vector<double> q{0.3};
  Eigen::MatrixXd J = t.jacobian(q, "slider", Vec3(0.3, 0.0, 0.0));
  CHECK(J(0, 0) == doctest::Approx(1.0));
  CHECK(J.block<3, 1>(3, 0).norm() == doctest::Approx(0.0));
}

TEST_CASE("Jacobian matches central finite differences on 100 random configs") {
  KinematicTree t = random_arm();
  Rng rng(99);
  const double h = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> q(8);
    for (double& v : q) v = rng.uniform(-2.0, 2.0);
    Pose p0 = t.link_pose(q, "link7");
    Vec3 ref = p0.apply(Vec3(0.05, -0.02, 0.1));
    Eigen::MatrixXd J = t.jacobian(q, "link7", ref);
    for (int d = 0; d < 8; ++d) {
      std::vector<double> qp = q, qm = q;
      qp[d] += h;
      qm[d] -= h;
      Pose pp = t.link_pose(qp, "link7");
      Pose pm = t.link_pose(qm, "link7");
      // linear: move the same material point
      Vec3 local = p0.inverse().apply(ref);
      Vec3 dv = (pp.apply(local) - pm.apply(local)) / (2.0 * h);
      CHECK((J.block<3, 1>(0, d) - dv).norm() < 1e-6);
      // angular via quaternion difference
      Quat dq = pp.q * pm.q.conjugate();
      Vec3 w = rotation_vector(dq) / (2.0 * h);
      CHECK((J.block<3, 1>(3, d) - w).norm() < 1e-6);
    }
  }
}

TEST_CASE("planar base contributes 3 DOF and correct Jacobian") {
  KinematicTree t;
  t.add_link({"odom", {}});
  t.add_link({"base", {}});
  Joint j;
  j.name = "world_joint";
  j.type = JointType::PlanarBase;
  j.parent = "odom";
  j.child = "base";
  j.lo = -10.0;
  j.hi = 10.0;
  j.vmax = 0.5;
  t.add_joint(j);
  t.finalize();
  CHECK(t.dof_count() == 3);
  std::vector<double> q{1.0, 2.0, M_PI / 2.0};
  Pose p = t.link_pose(q, "base");
  CHECK(p.t.x() == doctest::Approx(1.0));
  CHECK(p.t.y() == doctest::Approx(2.0));
  // point 1m ahead of base (now pointing +y)
  Vec3 ref(1.0, 3.0, 0.0);
  Eigen::MatrixXd J = t.jacobian(q, "base", ref);
  CHECK(J(0, 0) == doctest::Approx(1.0));
  CHECK(J(1, 1) == doctest::Approx(1.0));
  // theta column: omega x r with r = (0,1,0) -> v = (-1, 0, 0)
  CHECK(J(0, 2) == doctest::Approx(-1.0));
  CHECK(J(5, 2) == doctest::Approx(1.0));
}

TEST_CASE("unknown link raises") {
  KinematicTree t = fixed_chain(1);
  std::vector<double> q;
  CHECK_THROWS_AS(t.link_pose(q, "nope"), KinematicError);
}

TEST_CASE("invalid trees rejected") {
  KinematicTree t;
  t.add_link({"a", {}});
  t.add_link({"b", {}});
  // no joint between them -> two roots
  CHECK_THROWS_AS(t.finalize(), KinematicError);

  KinematicTree t2;
  t2.add_link({"a", {}});
  Joint j;
  j.name = "bad";
  j.parent = "a";
  j.child = "a";
  j.lo = 1.0;
  j.hi = -1.0;
  CHECK_THROWS_AS(t2.add_joint(j), KinematicError);
}
