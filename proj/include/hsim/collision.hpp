#pragma once

#include "hsim/geom.hpp"

namespace hsim {

struct ClosestPoints {
  Vec3 on_a;      // witness point on shape a (world)
  Vec3 on_b;      // witness point on shape b (world)
  Vec3 normal;    // unit, points from b toward a
  double distance = 0.0;  // negative iff penetrating
};

/// Closest points / signed distance between two posed primitives.
/// Symmetric: swapping arguments swaps witness points and negates the normal.
ClosestPoints closest_points(const Shape& a, const Pose& pa, const Shape& b, const Pose& pb);

/// Closest point on a posed shape to a world point (surface point if p inside).
Vec3 closest_point_on_shape(const Shape& s, const Pose& pose, const Vec3& p);

/// Signed distance from a world point to a posed shape (negative inside).
double point_shape_distance(const Shape& s, const Pose& pose, const Vec3& p);

/// First intersection of ray origin + t*dir (t in [0, tmax]) with the shape.
/// Returns t, or a negative value when there is no hit.
double ray_shape_intersect(const Shape& s, const Pose& pose, const Vec3& origin, const Vec3& dir,
                           double tmax);

}  // namespace hsim
