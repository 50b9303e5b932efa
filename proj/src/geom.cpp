#include "hsim/geom.hpp"

#include <cmath>

namespace hsim {

Vec3 rotation_vector(const Quat& q_in) {
  Quat q = q_in;
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  Eigen::AngleAxisd aa(q);
  return aa.axis() * aa.angle();
}

double bounding_radius(const Shape& s) {
  return std::visit(
      [](const auto& sh) -> double {
        using T = std::decay_t<decltype(sh)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          return sh.radius;
        } else if constexpr (std::is_same_v<T, Capsule>) {
          return sh.radius + sh.half_length;
        } else {
          return sh.half_extents.norm();
        }
      },
      s);
}

Vec3 support_point(const Shape& s, const Pose& pose, const Vec3& dir) {
  Vec3 d_local = pose.q.conjugate() * dir;
  Vec3 local = std::visit(
      [&](const auto& sh) -> Vec3 {
        using T = std::decay_t<decltype(sh)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          double n = d_local.norm();
          return n > 1e-12 ? Vec3(d_local * (sh.radius / n)) : Vec3(sh.radius, 0, 0);
        } else if constexpr (std::is_same_v<T, Capsule>) {
          double n = d_local.norm();
          Vec3 p = n > 1e-12 ? Vec3(d_local * (sh.radius / n)) : Vec3(sh.radius, 0, 0);
          p.z() += (d_local.z() >= 0.0 ? sh.half_length : -sh.half_length);
          return p;
        } else {
          return Vec3(std::copysign(sh.half_extents.x(), d_local.x()),
                      std::copysign(sh.half_extents.y(), d_local.y()),
                      std::copysign(sh.half_extents.z(), d_local.z()));
        }
      },
      s);
  return pose.apply(local);
}

}  // namespace hsim
