#include "hsim/reasoner.hpp"

#include <nlohmann/json.hpp>

#include "hsim/collision.hpp"
#include "hsim/worldio.hpp"

namespace hsim {

GraspCatalog GraspCatalog::load(const std::string& path) {
  nlohmann::json j = load_json_file(path);
  if (j.value("format", "") != "hsim-grasps-1")
    throw ConfigError("grasp catalog: unexpected format tag in " + path);
  GraspCatalog c;
  for (const auto& g : j.at("grasps")) {
    GraspSpec s;
    s.id = g.at("id").get<std::string>();
    s.object_type = g.at("object_type").get<std::string>();
    auto a = g.at("approach");
    s.approach = Vec3(a[0], a[1], a[2]).normalized();
    if (g.contains("rpy")) {
      auto r = g.at("rpy");
      s.orientation = Quat(Eigen::AngleAxisd(r[2].get<double>(), Vec3::UnitZ()) *
                           Eigen::AngleAxisd(r[1].get<double>(), Vec3::UnitY()) *
                           Eigen::AngleAxisd(r[0].get<double>(), Vec3::UnitX()));
    }
    s.pregrasp_offset = g.value("pregrasp_offset", 0.1);
    s.opening = g.value("opening", 0.08);
    s.force = g.value("force", 30.0);
    s.priority = g.value("priority", 0);
    if (s.pregrasp_offset <= 0) throw ConfigError("grasp " + s.id + ": pregrasp offset <= 0");
    c.grasps_.push_back(std::move(s));
  }
  return c;
}

std::vector<GraspSpec> GraspCatalog::for_type(const std::string& object_type) const {
  std::vector<GraspSpec> out;
  for (const GraspSpec& g : grasps_)
    if (g.object_type == object_type) out.push_back(g);
  std::stable_sort(out.begin(), out.end(),
                   [](const GraspSpec& a, const GraspSpec& b) { return a.priority < b.priority; });
  return out;
}

const GraspSpec& GraspCatalog::by_id(const std::string& id) const {
  for (const GraspSpec& g : grasps_)
    if (g.id == id) return g;
  throw std::out_of_range("unknown grasp id " + id);
}

namespace {

struct Aabb {
  Vec3 lo, hi;
};

Aabb world_aabb(const Shape& s, const Pose& pose) {
  Aabb b;
  for (int k = 0; k < 3; ++k) {
    Vec3 d = Vec3::Zero();
    d[k] = 1.0;
    b.hi[k] = support_point(s, pose, d)[k];
    b.lo[k] = support_point(s, pose, -d)[k];
  }
  return b;
}

// Can the robot's base footprint disc stand at (x, y)?
bool base_cell_free(const std::vector<WorldShape>& shapes, double x, double y, double radius) {
  for (const WorldShape& ws : shapes) {
    if (ws.owner == WorldShape::Owner::RobotLink) continue;
    Aabb b = world_aabb(ws.shape, ws.pose);
    if (b.hi.z() < 0.02 || b.lo.z() > 1.4) continue;  // not at robot body height
    double pz = std::clamp(ws.pose.t.z(), 0.1, 1.2);
    if (point_shape_distance(ws.shape, ws.pose, Vec3(x, y, pz)) < radius) return false;
  }
  return true;
}

double wrap_angle(double a) { return std::remainder(a, 2.0 * M_PI); }

Vec3 resolve_target(const Value& v, const WorldState& w) {
  if (std::holds_alternative<Pose>(v.v)) return v.pose().t;
  const std::string& name = v.symbol();
  if (w.has_object(name)) return w.object_pose(name).t;
  if (w.has_link(name)) return w.link_pose(name).t;
  throw FormulaError("unresolvable location target " + name);
}

PoseDistribution make_grid(const WorldState& w, const ReasonerParams& p, double xlo, double xhi,
                           double ylo, double yhi) {
  PoseDistribution d;
  d.res = p.grid_res;
  d.ntheta = p.theta_bins;
  xlo = std::max(xlo, w.x_min);
  ylo = std::max(ylo, w.y_min);
  xhi = std::min(xhi, w.x_max);
  yhi = std::min(yhi, w.y_max);
  int ix0 = static_cast<int>(std::floor((xlo - w.x_min) / d.res));
  int iy0 = static_cast<int>(std::floor((ylo - w.y_min) / d.res));
  d.x0 = w.x_min + ix0 * d.res;
  d.y0 = w.y_min + iy0 * d.res;
  d.nx = std::max(0, static_cast<int>(std::ceil((xhi - d.x0) / d.res)) + 1);
  d.ny = std::max(0, static_cast<int>(std::ceil((yhi - d.y0) / d.res)) + 1);
  d.w.assign(static_cast<size_t>(d.nx) * d.ny * d.ntheta, 0.0);
  return d;
}

PoseDistribution ground_reachable(const Vec3& target, const WorldState& w, const RobotInfo& robot,
                                  const ReasonerParams& p) {
  PoseDistribution d = make_grid(w, p, target.x() - p.reach_outer - p.grid_res,
                                 target.x() + p.reach_outer + p.grid_res,
                                 target.y() - p.reach_outer - p.grid_res,
                                 target.y() + p.reach_outer + p.grid_res);
  auto shapes = collect_shapes(w);
  for (int ix = 0; ix < d.nx; ++ix)
    for (int iy = 0; iy < d.ny; ++iy) {
      double x = d.x_of(ix), y = d.y_of(iy);
      double dist = std::hypot(target.x() - x, target.y() - y);
      if (dist < p.reach_inner || dist > p.reach_outer) continue;
      if (!base_cell_free(shapes, x, y, robot.base_radius)) continue;
      double bearing = std::atan2(target.y() - y, target.x() - x);
      for (int it = 0; it < d.ntheta; ++it)
        if (std::abs(wrap_angle(d.theta_of(it) - bearing)) <= p.facing_tolerance)
          d.at(ix, iy, it) = 1.0;
    }
  return d;
}

PoseDistribution ground_visible(const Vec3& target, const std::string& target_object,
                                const WorldState& w, const RobotInfo& robot,
                                const ReasonerParams& p) {
  PoseDistribution d = make_grid(w, p, target.x() - p.visible_max, target.x() + p.visible_max,
                                 target.y() - p.visible_max, target.y() + p.visible_max);
  auto shapes = collect_shapes(w);
  for (int ix = 0; ix < d.nx; ++ix)
    for (int iy = 0; iy < d.ny; ++iy) {
      double x = d.x_of(ix), y = d.y_of(iy);
      double dist = std::hypot(target.x() - x, target.y() - y);
      if (dist < p.visible_min || dist > p.visible_max) continue;
      if (!base_cell_free(shapes, x, y, robot.base_radius)) continue;
      Vec3 eye(x, y, p.camera_height);
      Vec3 ray = target - eye;
      double len = ray.norm();
      bool blocked = false;
      for (const WorldShape& ws : shapes) {
        if (ws.owner == WorldShape::Owner::RobotLink) continue;
        if (ws.owner == WorldShape::Owner::Object && ws.name == target_object) continue;
        double t = ray_shape_intersect(ws.shape, ws.pose, eye, ray / len, len - 0.05);
        if (t >= 0.0) {
          blocked = true;
          break;
        }
      }
      if (blocked) continue;
      double bearing = std::atan2(target.y() - y, target.x() - x);
      for (int it = 0; it < d.ntheta; ++it)
        if (std::abs(wrap_angle(d.theta_of(it) - bearing)) <= p.facing_tolerance)
          d.at(ix, iy, it) = 1.0;
    }
  return d;
}

PoseDistribution ground_surface(const std::vector<LinkShape>& link_shapes, const Pose& link_pose,
                                const WorldState& w, const ReasonerParams& p) {
  double xlo = 1e9, xhi = -1e9, ylo = 1e9, yhi = -1e9, top = -1e9;
  for (const LinkShape& ls : link_shapes) {
    Aabb b = world_aabb(ls.shape, link_pose * ls.local);
    xlo = std::min(xlo, b.lo.x());
    xhi = std::max(xhi, b.hi.x());
    ylo = std::min(ylo, b.lo.y());
    yhi = std::max(yhi, b.hi.y());
    top = std::max(top, b.hi.z());
  }
  PoseDistribution d = make_grid(w, p, xlo, xhi, ylo, yhi);
  d.z = top;
  for (int ix = 0; ix < d.nx; ++ix)
    for (int iy = 0; iy < d.ny; ++iy) {
      double x = d.x_of(ix), y = d.y_of(iy);
      if (x < xlo + p.placement_margin || x > xhi - p.placement_margin) continue;
      if (y < ylo + p.placement_margin || y > yhi - p.placement_margin) continue;
      bool occupied = false;
      for (const SceneObject& o : w.objects) {
        if (o.attachment) continue;
        Pose op = w.object_pose(o);
        if (std::hypot(op.t.x() - x, op.t.y() - y) <
            p.occupied_margin + bounding_radius(o.shape) * 0.5)
          occupied = true;
      }
      if (occupied) continue;
      for (int it = 0; it < d.ntheta; ++it) d.at(ix, iy, it) = 1.0;
    }
  return d;
}

}  // namespace

PoseDistribution ground_location(const Designator& location, const WorldState& w,
                                 const RobotInfo& robot, const ReasonerParams& params) {
  PoseDistribution d;
  if (const Value* v = location.find("reachable-for")) {
    d = ground_reachable(resolve_target(*v, w), w, robot, params);
  } else if (const Value* v2 = location.find("visible-for")) {
    std::string obj =
        std::holds_alternative<std::string>(v2->v) && w.has_object(v2->symbol()) ? v2->symbol()
                                                                                 : "";
    d = ground_visible(resolve_target(*v2, w), obj, w, robot, params);
  } else if (const Value* v3 = location.find("on")) {
    const std::string& link = v3->symbol();
    if (!w.environment->has_link(link)) throw FormulaError("unknown surface link " + link);
    Pose lp = w.environment->link_pose(w.environment_config(), link);
    d = ground_surface(w.environment->links()[w.environment->link_index(link)].shapes, lp, w,
                       params);
  } else if (const Value* v4 = location.find("in")) {
    const std::string& cid = v4->symbol();
    if (!w.has_container(cid)) throw FormulaError("unknown container " + cid);
    const ArticulatedContainer& c = w.container(cid);
    Pose lp = w.environment->link_pose(w.environment_config(), c.moving_link);
    d = ground_surface(w.environment->links()[w.environment->link_index(c.moving_link)].shapes,
                       lp, w, params);
  } else {
    throw FormulaError("location designator without a recognized predicate");
  }
  if (d.empty_support())
    throw PlanFailure(FailureCategory::Navigation, "location-unreachable: empty support");
  d.normalize();
  return d;
}

CandidateStream infer(const ParameterQuery& q) {
  if (!q.world || !q.robot) throw std::invalid_argument("infer: query missing world/robot");
  const WorldState& w = *q.world;
  const RobotInfo& robot = *q.robot;
  std::vector<Value> items;

  if (q.parameter == "arm") {
    std::vector<std::string> arms;
    for (const auto& [arm, link] : robot.gripper_link) arms.push_back(arm);
    std::sort(arms.begin(), arms.end());
    if (arms.size() > 1 && q.object && q.object->has("name")) {
      // laterality: object on the robot's left prefers the left arm
      Pose base = w.robot->link_pose(w.robot_config(), robot.base_link);
      Vec3 local = base.inverse().apply(w.object_pose(q.object->get("name").symbol()).t);
      std::sort(arms.begin(), arms.end(), [&](const std::string& a, const std::string& b) {
        auto side = [&](const std::string& arm) {
          return arm == "left" ? (local.y() >= 0 ? 0 : 1) : (local.y() >= 0 ? 1 : 0);
        };
        return side(a) < side(b);
      });
    }
    for (auto& a : arms) items.emplace_back(a);
  } else if (q.parameter == "grasp") {
    if (!q.catalog) throw std::invalid_argument("infer: grasp query without catalog");
    for (const GraspSpec& g : q.catalog->for_type(q.object->get("type").symbol()))
      items.emplace_back(g.id);
  } else if (q.parameter == "base-pose") {
    auto loc = make_designator(DesignatorKind::Location,
                               {{"reachable-for", q.object->get("name").symbol()}});
    PoseDistribution d = ground_location(*loc, w, robot, q.params);
    Rng rng(q.seed);
    Rng stream = rng.derive("base-pose");
    std::vector<int> seen;
    for (int draw = 0; draw < 20 * q.max_candidates &&
                       static_cast<int>(items.size()) < q.max_candidates;
         ++draw) {
      int idx = d.sample_index(stream);
      if (std::find(seen.begin(), seen.end(), idx) != seen.end()) continue;
      seen.push_back(idx);
      int it = idx % d.ntheta;
      int iy = (idx / d.ntheta) % d.ny;
      int ix = idx / (d.ntheta * d.ny);
      items.emplace_back(d.pose_at(ix, iy, it));
    }
  } else if (q.parameter == "gripper-opening") {
    const SceneObject& o = w.object(q.object->get("name").symbol());
    double width = std::visit(
        [](const auto& s) -> double {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Sphere>) return 2.0 * s.radius;
          else if constexpr (std::is_same_v<T, Capsule>) return 2.0 * s.radius;
          else return 2.0 * std::min(s.half_extents.x(), s.half_extents.y());
        },
        o.shape);
    items.emplace_back(std::min(width + 0.02, robot.gripper_max));
  } else if (q.parameter == "grasping-force") {
    items.emplace_back(30.0);
  } else if (q.parameter == "placement-pose") {
    PoseDistribution d = ground_location(*q.object, w, robot, q.params);
    Rng rng(q.seed);
    Rng stream = rng.derive("placement-pose");
    std::vector<int> seen;
    for (int draw = 0; draw < 20 * q.max_candidates &&
                       static_cast<int>(items.size()) < q.max_candidates;
         ++draw) {
      int idx = d.sample_index(stream);
      if (std::find(seen.begin(), seen.end(), idx) != seen.end()) continue;
      seen.push_back(idx);
      int it = idx % d.ntheta;
      int iy = (idx / d.ntheta) % d.ny;
      int ix = idx / (d.ntheta * d.ny);
      Pose p = d.pose_at(ix, iy, it);
      p.t.z() = d.z;
      items.emplace_back(p);
    }
  } else {
    throw std::invalid_argument("infer: unknown parameter " + q.parameter);
  }
  return CandidateStream(std::move(items));
}

Outcome validate_by_projection(const DesignatorPtr& action, const WorldState& world,
                               const RobotInfo& robot,
                               const std::function<void(Interpreter&)>& setup) {
  WorldState clone = world;
  Interpreter in(clone, robot);
  setup(in);
  return in.run([&](Interpreter& i) { i.perform(action); });
}

}  // namespace hsim
