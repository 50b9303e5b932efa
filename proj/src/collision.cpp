#include "hsim/collision.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hsim {

namespace {

Vec3 clamp_to_box(const Vec3& p, const Vec3& he) {
  return Vec3(std::clamp(p.x(), -he.x(), he.x()), std::clamp(p.y(), -he.y(), he.y()),
              std::clamp(p.z(), -he.z(), he.z()));
}

// Signed distance and outward normal from a box (local frame) to a point.
// Negative distance when the point is inside.
struct PointBox {
  double dist;
  Vec3 closest;  // on the box surface, local frame
  Vec3 normal;   // outward, local frame
};

PointBox point_box_local(const Vec3& p, const Vec3& he) {
  Vec3 c = clamp_to_box(p, he);
  Vec3 d = p - c;
  double n = d.norm();
  if (n > 1e-12) {
    return {n, c, d / n};
  }
  // inside: push out through the nearest face
  double best = std::numeric_limits<double>::infinity();
  int axis = 0;
  double sign = 1.0;
  for (int i = 0; i < 3; ++i) {
    double dpos = he[i] - p[i];
    double dneg = p[i] + he[i];
    if (dpos < best) {
      best = dpos;
      axis = i;
      sign = 1.0;
    }
    if (dneg < best) {
      best = dneg;
      axis = i;
      sign = -1.0;
    }
  }
  Vec3 normal = Vec3::Zero();
  normal[axis] = sign;
  Vec3 surf = p;
  surf[axis] = sign * he[axis];
  return {-best, surf, normal};
}

Vec3 closest_on_segment(const Vec3& p, const Vec3& a, const Vec3& b) {
  Vec3 ab = b - a;
  double t = ab.squaredNorm() > 1e-18 ? (p - a).dot(ab) / ab.squaredNorm() : 0.0;
  return a + std::clamp(t, 0.0, 1.0) * ab;
}

// Ericson, Real-Time Collision Detection, closest points of two segments.
void segment_segment(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2, Vec3& c1,
                     Vec3& c2) {
  Vec3 d1 = q1 - p1, d2 = q2 - p2, r = p1 - p2;
  double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
  double s = 0.0, t = 0.0;
  const double eps = 1e-14;
  if (a <= eps && e <= eps) {
    c1 = p1;
    c2 = p2;
    return;
  }
  if (a <= eps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    double c = d1.dot(r);
    if (e <= eps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      double b = d1.dot(d2);
      double denom = a * e - b * b;
      if (denom > eps) s = std::clamp((b * f - c * e) / denom, 0.0, 1.0);
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  c1 = p1 + d1 * s;
  c2 = p2 + d2 * t;
}

void capsule_segment(const Capsule& c, const Pose& pose, Vec3& a, Vec3& b) {
  a = pose.apply(Vec3(0, 0, -c.half_length));
  b = pose.apply(Vec3(0, 0, c.half_length));
}

ClosestPoints from_sphere_like(const Vec3& ca, double ra, const Vec3& cb, double rb) {
  Vec3 d = ca - cb;
  double n = d.norm();
  Vec3 normal = n > 1e-12 ? Vec3(d / n) : Vec3::UnitX();
  ClosestPoints out;
  out.normal = normal;
  out.distance = n - ra - rb;
  out.on_a = ca - normal * ra;
  out.on_b = cb + normal * rb;
  return out;
}

ClosestPoints sphere_box(const Sphere& s, const Pose& ps, const Box& b, const Pose& pb) {
  Vec3 local = pb.inverse().apply(ps.t);
  PointBox r = point_box_local(local, b.half_extents);
  ClosestPoints out;
  out.normal = pb.q * r.normal;
  out.distance = r.dist - s.radius;
  out.on_b = pb.apply(r.closest);
  out.on_a = ps.t - out.normal * s.radius;
  return out;
}

ClosestPoints capsule_box(const Capsule& c, const Pose& pc, const Box& b, const Pose& pb) {
  Vec3 a0, a1;
  capsule_segment(c, pc, a0, a1);
  Pose binv = pb.inverse();
  auto sd = [&](double t) {
    Vec3 p = binv.apply(a0 + t * (a1 - a0));
    return point_box_local(p, b.half_extents).dist;
  };
  // coarse scan, then ternary refinement around the best sample
  const int K = 32;
  double best_t = 0.0, best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= K; ++i) {
    double t = static_cast<double>(i) / K;
    double d = sd(t);
    if (d < best_d) {
      best_d = d;
      best_t = t;
    }
  }
  double lo = std::max(0.0, best_t - 1.0 / K), hi = std::min(1.0, best_t + 1.0 / K);
  for (int it = 0; it < 60; ++it) {
    double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
    if (sd(m1) < sd(m2))
      hi = m2;
    else
      lo = m1;
  }
  double t = 0.5 * (lo + hi);
  Vec3 seg_pt = a0 + t * (a1 - a0);
  PointBox r = point_box_local(binv.apply(seg_pt), b.half_extents);
  ClosestPoints out;
  out.normal = pb.q * r.normal;
  out.distance = r.dist - c.radius;
  out.on_b = pb.apply(r.closest);
  out.on_a = seg_pt - out.normal * c.radius;
  return out;
}

struct ObbFrame {
  Eigen::Matrix3d R;
  Vec3 c;
  Vec3 he;
};

// 15-axis separating axis test; returns penetration depth (negative when a
// separating axis exists, with the largest separation) and the axis.
double box_box_sat(const ObbFrame& A, const ObbFrame& B, Vec3& axis_out) {
  std::vector<Vec3> axes;
  for (int i = 0; i < 3; ++i) axes.push_back(A.R.col(i));
  for (int i = 0; i < 3; ++i) axes.push_back(B.R.col(i));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      Vec3 cx = A.R.col(i).cross(B.R.col(j));
      if (cx.norm() > 1e-9) axes.push_back(cx.normalized());
    }
  double min_overlap = std::numeric_limits<double>::infinity();
  Vec3 best_axis = Vec3::UnitX();
  Vec3 d = A.c - B.c;
  for (const Vec3& L : axes) {
    double ra = 0.0, rb = 0.0;
    for (int i = 0; i < 3; ++i) {
      ra += A.he[i] * std::abs(A.R.col(i).dot(L));
      rb += B.he[i] * std::abs(B.R.col(i).dot(L));
    }
    double dist = std::abs(d.dot(L));
    double overlap = ra + rb - dist;
    if (overlap < min_overlap) {
      min_overlap = overlap;
      best_axis = d.dot(L) >= 0.0 ? L : Vec3(-L);
    }
  }
  axis_out = best_axis;  // points from B toward A
  return min_overlap;
}

ClosestPoints box_box(const Box& a, const Pose& pa, const Box& b, const Pose& pb) {
  ObbFrame A{pa.rot(), pa.t, a.half_extents};
  ObbFrame B{pb.rot(), pb.t, b.half_extents};
  Vec3 sat_axis;
  double depth = box_box_sat(A, B, sat_axis);
  ClosestPoints out;
  if (depth <= 1e-12) {
    // separated: alternating projection between the two convex sets
    Pose ia = pa.inverse(), ib = pb.inverse();
    Vec3 x = pa.apply(clamp_to_box(ia.apply(pb.t), a.half_extents));
    Vec3 y = pb.apply(clamp_to_box(ib.apply(x), b.half_extents));
    for (int it = 0; it < 256; ++it) {
      Vec3 nx = pa.apply(clamp_to_box(ia.apply(y), a.half_extents));
      Vec3 ny = pb.apply(clamp_to_box(ib.apply(nx), b.half_extents));
      if ((nx - x).squaredNorm() + (ny - y).squaredNorm() < 1e-24) {
        x = nx;
        y = ny;
        break;
      }
      x = nx;
      y = ny;
    }
    out.on_a = x;
    out.on_b = y;
    double n = (x - y).norm();
    out.normal = n > 1e-12 ? Vec3((x - y) / n) : sat_axis;
    out.distance = n;
  } else {
    out.normal = sat_axis;
    out.distance = -depth;
    // deepest supports along the contact axis
    out.on_a = support_point(Shape{a}, pa, -sat_axis);
    out.on_b = support_point(Shape{b}, pb, sat_axis);
  }
  return out;
}

ClosestPoints flip(ClosestPoints r) {
  std::swap(r.on_a, r.on_b);
  r.normal = -r.normal;
  return r;
}

}  // namespace

Vec3 closest_point_on_shape(const Shape& s, const Pose& pose, const Vec3& p) {
  return std::visit(
      [&](const auto& sh) -> Vec3 {
        using T = std::decay_t<decltype(sh)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          Vec3 d = p - pose.t;
          double n = d.norm();
          return n > 1e-12 ? Vec3(pose.t + d * (sh.radius / n)) : pose.t + Vec3(sh.radius, 0, 0);
        } else if constexpr (std::is_same_v<T, Capsule>) {
          Vec3 a, b;
          capsule_segment(sh, pose, a, b);
          Vec3 c = closest_on_segment(p, a, b);
          Vec3 d = p - c;
          double n = d.norm();
          return n > 1e-12 ? Vec3(c + d * (sh.radius / n)) : c + Vec3(sh.radius, 0, 0);
        } else {
          Vec3 local = pose.inverse().apply(p);
          PointBox r = point_box_local(local, sh.half_extents);
          return pose.apply(r.closest);
        }
      },
      s);
}

double point_shape_distance(const Shape& s, const Pose& pose, const Vec3& p) {
  return std::visit(
      [&](const auto& sh) -> double {
        using T = std::decay_t<decltype(sh)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          return (p - pose.t).norm() - sh.radius;
        } else if constexpr (std::is_same_v<T, Capsule>) {
          Vec3 a, b;
          capsule_segment(sh, pose, a, b);
          return (p - closest_on_segment(p, a, b)).norm() - sh.radius;
        } else {
          return point_box_local(pose.inverse().apply(p), sh.half_extents).dist;
        }
      },
      s);
}

ClosestPoints closest_points(const Shape& a, const Pose& pa, const Shape& b, const Pose& pb) {
  return std::visit(
      [&](const auto& sa, const auto& sb) -> ClosestPoints {
        using A = std::decay_t<decltype(sa)>;
        using B = std::decay_t<decltype(sb)>;
        if constexpr (std::is_same_v<A, Sphere> && std::is_same_v<B, Sphere>) {
          return from_sphere_like(pa.t, sa.radius, pb.t, sb.radius);
        } else if constexpr (std::is_same_v<A, Sphere> && std::is_same_v<B, Capsule>) {
          Vec3 b0, b1;
          capsule_segment(sb, pb, b0, b1);
          return from_sphere_like(pa.t, sa.radius, closest_on_segment(pa.t, b0, b1), sb.radius);
        } else if constexpr (std::is_same_v<A, Capsule> && std::is_same_v<B, Sphere>) {
          return flip(closest_points(b, pb, a, pa));
        } else if constexpr (std::is_same_v<A, Capsule> && std::is_same_v<B, Capsule>) {
          Vec3 a0, a1, b0, b1, c1, c2;
          capsule_segment(sa, pa, a0, a1);
          capsule_segment(sb, pb, b0, b1);
          segment_segment(a0, a1, b0, b1, c1, c2);
          return from_sphere_like(c1, sa.radius, c2, sb.radius);
        } else if constexpr (std::is_same_v<A, Sphere> && std::is_same_v<B, Box>) {
          return sphere_box(sa, pa, sb, pb);
        } else if constexpr (std::is_same_v<A, Box> && std::is_same_v<B, Sphere>) {
          return flip(closest_points(b, pb, a, pa));
        } else if constexpr (std::is_same_v<A, Capsule> && std::is_same_v<B, Box>) {
          return capsule_box(sa, pa, sb, pb);
        } else if constexpr (std::is_same_v<A, Box> && std::is_same_v<B, Capsule>) {
          return flip(closest_points(b, pb, a, pa));
        } else {
          return box_box(sa, pa, sb, pb);
        }
      },
      a, b);
}

double ray_shape_intersect(const Shape& s, const Pose& pose, const Vec3& origin, const Vec3& dir,
                           double tmax) {
  return std::visit(
      [&](const auto& sh) -> double {
        using T = std::decay_t<decltype(sh)>;
        Pose inv = pose.inverse();
        Vec3 o = inv.apply(origin);
        Vec3 d = inv.q * dir;
        if constexpr (std::is_same_v<T, Sphere>) {
          double b = o.dot(d), c = o.squaredNorm() - sh.radius * sh.radius;
          double disc = b * b - c * d.squaredNorm();
          if (disc < 0.0) return -1.0;
          double t = (-b - std::sqrt(disc)) / d.squaredNorm();
          return (t >= 0.0 && t <= tmax) ? t : -1.0;
        } else if constexpr (std::is_same_v<T, Box>) {
          double t0 = 0.0, t1 = tmax;
          for (int i = 0; i < 3; ++i) {
            if (std::abs(d[i]) < 1e-12) {
              if (std::abs(o[i]) > sh.half_extents[i]) return -1.0;
              continue;
            }
            double ta = (-sh.half_extents[i] - o[i]) / d[i];
            double tb = (sh.half_extents[i] - o[i]) / d[i];
            if (ta > tb) std::swap(ta, tb);
            t0 = std::max(t0, ta);
            t1 = std::min(t1, tb);
            if (t0 > t1) return -1.0;
          }
          return t0;
        } else {
          // capsule: march along the ray against the signed distance field
          double t = 0.0;
          for (int it = 0; it < 128 && t <= tmax; ++it) {
            Vec3 p = origin + t * dir;
            double dist = point_shape_distance(s, pose, p);
            if (dist < 1e-6) return t;
            t += std::max(dist, 1e-5);
          }
          return -1.0;
        }
      },
      s);
}

}  // namespace hsim
