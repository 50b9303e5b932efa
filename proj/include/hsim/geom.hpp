#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <string>
#include <variant>
#include <vector>

namespace hsim {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

/// Rigid transform: rotation followed by translation.
struct Pose {
  Vec3 t{0.0, 0.0, 0.0};
  Quat q{1.0, 0.0, 0.0, 0.0};

  static Pose identity() { return Pose{}; }
  static Pose translation(double x, double y, double z) {
    return Pose{Vec3(x, y, z), Quat::Identity()};
  }
  static Pose rot_z(double angle) {
    return Pose{Vec3::Zero(), Quat(Eigen::AngleAxisd(angle, Vec3::UnitZ()))};
  }
  static Pose rot_axis(const Vec3& axis, double angle) {
    return Pose{Vec3::Zero(), Quat(Eigen::AngleAxisd(angle, axis.normalized()))};
  }

  Pose operator*(const Pose& o) const { return Pose{t + q * o.t, (q * o.q).normalized()}; }
  Vec3 apply(const Vec3& p) const { return t + q * p; }
  Pose inverse() const {
    Quat qi = q.conjugate();
    return Pose{qi * (-t), qi};
  }
  Eigen::Matrix3d rot() const { return q.toRotationMatrix(); }
  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.block<3, 3>(0, 0) = rot();
    m.block<3, 1>(0, 3) = t;
    return m;
  }
};

/// Angle of the relative rotation between two orientations, in [0, pi].
inline double rotation_angle(const Quat& a, const Quat& b) {
  double d = std::abs(a.dot(b));
  d = std::min(1.0, d);
  return 2.0 * std::acos(d);
}

/// Rotation-vector (axis * angle) of q, angle in [0, pi].
Vec3 rotation_vector(const Quat& q);

struct Sphere {
  double radius = 0.0;
};
struct Capsule {
  double radius = 0.0;
  double half_length = 0.0;  // along local z
};
struct Box {
  Vec3 half_extents{0.0, 0.0, 0.0};
};

using Shape = std::variant<Sphere, Capsule, Box>;

/// Radius of the smallest origin-centered bounding sphere.
double bounding_radius(const Shape& s);

/// Support point of the shape (posed in world) in world direction dir.
Vec3 support_point(const Shape& s, const Pose& pose, const Vec3& dir);

}  // namespace hsim
