#include "hsim/cloud.hpp"

#include <sstream>

namespace hsim {

namespace {

Vec3 uniform_direction(Rng& rng) {
  for (;;) {
    Vec3 v(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    double n = v.norm();
    if (n > 1e-6 && n <= 1.0) return v / n;
  }
}

Vec3 sample_box(const Box& b, Rng& rng) {
  const Vec3& h = b.half_extents;
  double ax = h.y() * h.z(), ay = h.x() * h.z(), az = h.x() * h.y();
  double u = rng.uniform() * (ax + ay + az);
  double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
  if (u < ax)
    return {sign * h.x(), rng.uniform(-h.y(), h.y()), rng.uniform(-h.z(), h.z())};
  if (u < ax + ay)
    return {rng.uniform(-h.x(), h.x()), sign * h.y(), rng.uniform(-h.z(), h.z())};
  return {rng.uniform(-h.x(), h.x()), rng.uniform(-h.y(), h.y()), sign * h.z()};
}

Vec3 sample_capsule(const Capsule& c, Rng& rng) {
  double side = 2.0 * M_PI * c.radius * 2.0 * c.half_length;
  double caps = 4.0 * M_PI * c.radius * c.radius;
  if (rng.uniform() * (side + caps) < side) {
    double a = rng.uniform(0, 2.0 * M_PI);
    return {c.radius * std::cos(a), c.radius * std::sin(a),
            rng.uniform(-c.half_length, c.half_length)};
  }
  Vec3 d = uniform_direction(rng);
  double zc = d.z() >= 0 ? c.half_length : -c.half_length;
  return Vec3(0, 0, zc) + c.radius * d;
}

}  // namespace

std::vector<Vec3> surface_samples(const Shape& s, int n, Rng& rng) {
  std::vector<Vec3> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    if (auto* sp = std::get_if<Sphere>(&s))
      out.push_back(sp->radius * uniform_direction(rng));
    else if (auto* b = std::get_if<Box>(&s))
      out.push_back(sample_box(*b, rng));
    else
      out.push_back(sample_capsule(std::get<Capsule>(s), rng));
  }
  return out;
}

PointCloud render_cloud(const WorldState& w, const Pose& camera, const std::string& object_id,
                        double noise_sigma, double dropout, uint64_t seed, int rays, double fov) {
  const SceneObject& obj = w.object(object_id);
  Pose obj_pose = w.object_pose(obj);
  auto shapes = collect_shapes(w);
  Pose cam_inv = camera.inverse();
  Vec3 eye = camera.t;

  Rng rng = Rng(seed).derive("render-cloud");
  auto targets = surface_samples(obj.shape, rays, rng);

  PointCloud cloud;
  cloud.source_id = object_id;
  for (const Vec3& local : targets) {
    Vec3 aim = obj_pose.apply(local);
    Vec3 dir = aim - eye;
    double range = dir.norm();
    if (range < 1e-9) continue;
    dir /= range;
    // frustum: camera forward is +x
    Vec3 d_cam = cam_inv.q * dir;
    if (d_cam.x() < std::cos(fov)) continue;
    double t = ray_shape_intersect(obj.shape, obj_pose, eye, dir, range + 1e-6);
    if (t < 0.0) continue;
    bool occluded = false;
    for (const WorldShape& ws : shapes) {
      if (ws.name == object_id) continue;
      double t2 = ray_shape_intersect(ws.shape, ws.pose, eye, dir, t);
      if (t2 >= 0.0 && t2 < t - 1e-9) {
        occluded = true;
        break;
      }
    }
    if (occluded) continue;
    if (dropout > 0.0 && rng.bernoulli(dropout)) continue;
    Vec3 p = cam_inv.apply(eye + t * dir);
    if (noise_sigma > 0.0)
      p += Vec3(rng.normal(0, noise_sigma), rng.normal(0, noise_sigma),
                rng.normal(0, noise_sigma));
    cloud.points.push_back(p);
  }
  return cloud;
}

PcaResult pca_axes(const PointCloud& cloud) {
  const auto& pts = cloud.points;
  if (pts.size() < 4) throw PcaDegenerate("pca needs at least 4 points");
  Vec3 c = Vec3::Zero();
  for (const Vec3& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const Vec3& p : pts) {
    Vec3 d = p - c;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(pts.size());

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  // eigen returns ascending order; we want descending
  PcaResult r;
  r.centroid = c;
  for (int i = 0; i < 3; ++i) {
    r.eigenvalues(i) = es.eigenvalues()(2 - i);
    r.axes.col(i) = es.eigenvectors().col(2 - i);
  }
  if (r.eigenvalues(1) < 1e-12) throw PcaDegenerate("cloud is (near-)collinear");
  // fix signs deterministically: largest-|component| positive, then right-handed
  for (int i = 0; i < 2; ++i) {
    int k;
    r.axes.col(i).cwiseAbs().maxCoeff(&k);
    if (r.axes(k, i) < 0) r.axes.col(i) = -r.axes.col(i);
  }
  r.axes.col(2) = r.axes.col(0).cross(r.axes.col(1));
  return r;
}

std::string cloud_to_xyz(const PointCloud& cloud) {
  std::ostringstream out;
  out.precision(9);
  for (const Vec3& p : cloud.points) out << p.x() << " " << p.y() << " " << p.z() << "\n";
  return out.str();
}

}  // namespace hsim
