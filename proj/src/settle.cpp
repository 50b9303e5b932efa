#include <algorithm>
#include <cmath>
#include <limits>

#include "hsim/world.hpp"

namespace hsim {

namespace {

struct Obstacle {
  Shape shape;
  Pose pose;
};

// Everything the object can rest on or collide with: environment geometry,
// other free objects, plus an implicit floor slab at z = 0.
std::vector<Obstacle> gather_obstacles(const WorldState& w, const std::string& object_id) {
  std::vector<Obstacle> obs;
  for (const WorldShape& ws : collect_shapes(w)) {
    if (ws.owner == WorldShape::Owner::RobotLink) continue;
    if (ws.owner == WorldShape::Owner::Object && ws.name == object_id) continue;
    obs.push_back({ws.shape, ws.pose});
  }
  obs.push_back({Box{Vec3(50.0, 50.0, 1.0)}, Pose::translation(0.0, 0.0, -1.0)});
  return obs;
}

ClosestPoints min_distance(const Shape& s, const Pose& p, const std::vector<Obstacle>& obs) {
  ClosestPoints best;
  best.distance = std::numeric_limits<double>::infinity();
  double br = bounding_radius(s);
  for (const Obstacle& o : obs) {
    // broad phase
    if ((p.t - o.pose.t).norm() - br - bounding_radius(o.shape) > best.distance) continue;
    ClosestPoints r = closest_points(s, p, o.shape, o.pose);
    if (r.distance < best.distance) best = r;
  }
  return best;
}

// 2D convex hull (monotone chain), returns CCW polygon.
std::vector<Eigen::Vector2d> hull2d(std::vector<Eigen::Vector2d> pts) {
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const auto& a, const auto& b) { return (a - b).norm() < 1e-9; }),
            pts.end());
  if (pts.size() < 3) return pts;
  auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Eigen::Vector2d> h(2 * pts.size());
  size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], p) <= 0) --k;
    h[k++] = p;
  }
  for (size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

bool point_in_hull(const Eigen::Vector2d& p, const std::vector<Eigen::Vector2d>& hull,
                   double margin) {
  if (hull.size() < 3) return false;
  for (size_t i = 0; i < hull.size(); ++i) {
    const auto& a = hull[i];
    const auto& b = hull[(i + 1) % hull.size()];
    Eigen::Vector2d e = b - a;
    double c = e.x() * (p.y() - a.y()) - e.y() * (p.x() - a.x());
    if (c < margin * e.norm()) return false;
  }
  return true;
}

// Box stability: corners near the lowest contact height form the support set;
// the center of mass projection must fall inside their hull.
bool box_stable(const Box& box, const Pose& pose, double tol) {
  std::vector<Vec3> corners;
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1})
        corners.push_back(pose.apply(Vec3(sx * box.half_extents.x(), sy * box.half_extents.y(),
                                          sz * box.half_extents.z())));
  double zmin = std::numeric_limits<double>::infinity();
  for (const Vec3& c : corners) zmin = std::min(zmin, c.z());
  std::vector<Eigen::Vector2d> support;
  for (const Vec3& c : corners)
    if (c.z() - zmin <= tol) support.push_back(c.head<2>());
  auto h = hull2d(support);
  return point_in_hull(pose.t.head<2>(), h, 1e-6);
}

// Snap the box axis nearest to gravity exactly onto -z: the minimal rotation
// taking the current "down" face flat onto the support plane.
Pose topple_to_face(const Pose& pose) {
  Eigen::Matrix3d R = pose.rot();
  int best_axis = 0;
  double best_dot = 0.0;
  double sign = 1.0;
  for (int i = 0; i < 3; ++i) {
    double d = R.col(i).z();
    if (std::abs(d) > std::abs(best_dot)) {
      best_dot = d;
      best_axis = i;
      sign = d >= 0.0 ? 1.0 : -1.0;
    }
  }
  Vec3 col = sign * R.col(best_axis);
  Vec3 target = Vec3::UnitZ();
  Vec3 axis = col.cross(target);
  double angle = std::atan2(axis.norm(), col.dot(target));
  Pose out = pose;
  if (axis.norm() > 1e-12) {
    Quat rot(Eigen::AngleAxisd(angle, axis.normalized()));
    out.q = (rot * pose.q).normalized();
  }
  return out;
}

}  // namespace

SettleResult settle_preview(const WorldState& w, const std::string& object_id,
                            const SettleParams& params) {
  const SceneObject& obj = w.object(object_id);
  if (obj.attachment) throw std::invalid_argument("cannot settle attached object " + object_id);
  std::vector<Obstacle> obstacles = gather_obstacles(w, object_id);
  const Pose initial = obj.pose;
  Pose pose = initial;
  const double tol = params.support_tolerance;

  bool done = false;
  bool just_pushed = false;
  for (int iter = 0; iter < params.max_iterations && !done; ++iter) {
    ClosestPoints cp = min_distance(obj.shape, pose, obstacles);
    if (cp.distance < -1e-9) {
      // minimal translation out of penetration along the contact normal
      pose.t += cp.normal * (-cp.distance + 1e-6);
      just_pushed = true;
      continue;
    }
    // a fresh de-penetration witness counts as contact even when the distance
    // metric reports a slightly larger gap (it is discontinuous at touching
    // box-box configurations)
    if (cp.distance > tol && !just_pushed) {
      // sphere-trace drop along -z; the Euclidean gap bounds the safe step
      pose.t.z() -= std::max(cp.distance - 0.5 * tol, 0.25 * tol);
      continue;
    }
    just_pushed = false;
    // in contact; lateral contacts get nudged away so the object can keep
    // falling to actual support
    if (cp.normal.z() < 0.5) {
      Vec3 lateral(cp.normal.x(), cp.normal.y(), 0.0);
      if (lateral.norm() > 1e-9)
        pose.t += lateral.normalized() * params.offset_step;
      else
        pose.t.z() -= params.offset_step;  // touching from below: keep falling
      continue;
    }
    // supported; stability check (boxes only, rounded shapes treated stable)
    if (const Box* box = std::get_if<Box>(&obj.shape)) {
      if (!box_stable(*box, pose, 4.0 * tol)) {
        pose = topple_to_face(pose);
        pose.t.z() += params.offset_step;  // re-drop after the snap
        continue;
      }
    }
    done = true;
  }
  if (!done)
    throw PlanFailure(FailureCategory::Settle,
                      "no stable pose found for " + object_id + " within iteration budget");

  SettleResult res;
  res.pose = pose;
  // a straight drop onto support is the expected settling motion; horizontal
  // or upward correction, long falls and large rotations are "significant"
  Vec3 d = pose.t - initial.t;
  double horizontal = d.head<2>().norm();
  double dr = rotation_angle(pose.q, initial.q);
  res.corrected_significantly = horizontal > params.significant_translation ||
                                d.z() > params.significant_translation ||
                                -d.z() > params.significant_drop ||
                                dr > params.significant_rotation;
  return res;
}

SettleResult settle(WorldState& w, const std::string& object_id, const SettleParams& params) {
  SettleResult res = settle_preview(w, object_id, params);
  w.object(object_id).pose = res.pose;
  return res;
}

}  // namespace hsim
