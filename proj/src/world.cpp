#include "hsim/world.hpp"

#include <cmath>
#include <cstring>

namespace hsim {

const char* to_string(FailureCategory c) {
  switch (c) {
    case FailureCategory::Perception: return "perception-failure";
    case FailureCategory::Grasp: return "grasp-failure";
    case FailureCategory::Manipulation: return "manipulation-failure";
    case FailureCategory::EnvManipulation: return "env-manipulation-failure";
    case FailureCategory::Navigation: return "navigation-failure";
    case FailureCategory::Settle: return "settle-failure";
    case FailureCategory::Unrecoverable: return "unrecoverable";
  }
  return "?";
}

FailureCategory failure_category_from_string(const std::string& s) {
  for (FailureCategory c :
       {FailureCategory::Perception, FailureCategory::Grasp, FailureCategory::Manipulation,
        FailureCategory::EnvManipulation, FailureCategory::Navigation, FailureCategory::Settle,
        FailureCategory::Unrecoverable}) {
    if (s == to_string(c)) return c;
  }
  throw std::invalid_argument("unknown failure category: " + s);
}

std::vector<double> WorldState::robot_config() const {
  std::vector<double> q;
  if (!robot) return q;
  q.reserve(robot->dof_count());
  for (const DofInfo& d : robot->dofs()) {
    auto it = joint_positions.find(d.name);
    q.push_back(it == joint_positions.end() ? 0.0 : it->second);
  }
  return q;
}

std::vector<double> WorldState::environment_config() const {
  std::vector<double> q;
  if (!environment) return q;
  q.reserve(environment->dof_count());
  for (const DofInfo& d : environment->dofs()) {
    auto it = joint_positions.find(d.name);
    q.push_back(it == joint_positions.end() ? 0.0 : it->second);
  }
  return q;
}

void WorldState::set_robot_config(std::span<const double> q) {
  const auto& dofs = robot->dofs();
  if (q.size() != dofs.size()) throw std::invalid_argument("robot config size mismatch");
  for (size_t i = 0; i < dofs.size(); ++i) joint_positions[dofs[i].name] = q[i];
}

double WorldState::joint_position(const std::string& dof) const {
  auto it = joint_positions.find(dof);
  return it == joint_positions.end() ? 0.0 : it->second;
}

void WorldState::set_joint_position(const std::string& dof, double value) {
  joint_positions[dof] = value;
}

bool WorldState::has_link(const std::string& link) const {
  return (robot && robot->has_link(link)) || (environment && environment->has_link(link));
}

Pose WorldState::link_pose(const std::string& link) const {
  if (robot && robot->has_link(link)) return robot->link_pose(robot_config(), link);
  if (environment && environment->has_link(link))
    return environment->link_pose(environment_config(), link);
  throw KinematicError("unknown link " + link);
}

Pose WorldState::object_pose(const SceneObject& obj) const {
  if (obj.attachment) return link_pose(*obj.attachment) * obj.pose;
  return obj.pose;
}

Pose WorldState::object_pose(const std::string& id) const { return object_pose(object(id)); }

SceneObject& WorldState::object(const std::string& id) {
  for (SceneObject& o : objects)
    if (o.id == id) return o;
  throw std::invalid_argument("unknown object " + id);
}

const SceneObject& WorldState::object(const std::string& id) const {
  for (const SceneObject& o : objects)
    if (o.id == id) return o;
  throw std::invalid_argument("unknown object " + id);
}

bool WorldState::has_object(const std::string& id) const {
  for (const SceneObject& o : objects)
    if (o.id == id) return true;
  return false;
}

const ArticulatedContainer& WorldState::container(const std::string& id) const {
  for (const ArticulatedContainer& c : containers)
    if (c.id == id) return c;
  throw std::invalid_argument("unknown container " + id);
}

bool WorldState::has_container(const std::string& id) const {
  for (const ArticulatedContainer& c : containers)
    if (c.id == id) return true;
  return false;
}

void WorldState::attach(const std::string& object_id, const std::string& link, double tolerance) {
  SceneObject& obj = object(object_id);
  if (obj.attachment) throw std::logic_error("object " + object_id + " already attached");
  Pose lp = link_pose(link);
  if ((obj.pose.t - lp.t).norm() > tolerance)
    throw PlanFailure(FailureCategory::Grasp,
                      "object " + object_id + " beyond grasp tolerance of link " + link);
  obj.pose = lp.inverse() * obj.pose;
  obj.attachment = link;
}

void WorldState::detach(const std::string& object_id) {
  SceneObject& obj = object(object_id);
  if (!obj.attachment) throw std::logic_error("object " + object_id + " not attached");
  obj.pose = link_pose(*obj.attachment) * obj.pose;
  obj.attachment.reset();
}

namespace {

struct Fnv {
  uint64_t h = 1469598103934665603ull;
  void bytes(const void* p, size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  }
  void d(double v) {
    if (v == 0.0) v = 0.0;  // canonicalize -0.0
    bytes(&v, sizeof v);
  }
  void s(const std::string& v) { bytes(v.data(), v.size()); }
};

}  // namespace

uint64_t WorldState::hash() const {
  Fnv f;
  for (const auto& [k, v] : joint_positions) {
    f.s(k);
    f.d(v);
  }
  for (const SceneObject& o : objects) {
    f.s(o.id);
    f.s(o.type);
    f.s(o.attachment ? *o.attachment : std::string());
    f.d(o.pose.t.x());
    f.d(o.pose.t.y());
    f.d(o.pose.t.z());
    f.d(o.pose.q.w());
    f.d(o.pose.q.x());
    f.d(o.pose.q.y());
    f.d(o.pose.q.z());
  }
  f.d(sim_time);
  return f.h;
}

void WorldState::audit() const {
  auto check_tree = [&](const KinematicTree& t) {
    for (const DofInfo& d : t.dofs()) {
      double v = joint_position(d.name);
      if (v < d.lo - 1e-9 || v > d.hi + 1e-9)
        throw std::logic_error("joint " + d.name + " out of limits: " + std::to_string(v));
    }
  };
  if (robot) check_tree(*robot);
  if (environment) check_tree(*environment);
  for (const SceneObject& o : objects) {
    if (std::abs(o.pose.q.norm() - 1.0) > 1e-9)
      throw std::logic_error("object " + o.id + " quaternion not normalized");
    if (o.attachment && !has_link(*o.attachment))
      throw std::logic_error("object " + o.id + " attached to unknown link " + *o.attachment);
    if (o.mass <= 0.0) throw std::logic_error("object " + o.id + " has non-positive mass");
  }
}

std::vector<WorldShape> collect_shapes(const WorldState& w) {
  std::vector<WorldShape> out;
  if (w.robot) {
    auto q = w.robot_config();
    auto poses = w.robot->fk_all(q);
    for (size_t li = 0; li < w.robot->links().size(); ++li) {
      const Link& l = w.robot->links()[li];
      for (const LinkShape& ls : l.shapes)
        out.push_back({ls.shape, poses[li] * ls.local, WorldShape::Owner::RobotLink, l.name});
    }
  }
  if (w.environment) {
    auto q = w.environment_config();
    auto poses = w.environment->fk_all(q);
    for (size_t li = 0; li < w.environment->links().size(); ++li) {
      const Link& l = w.environment->links()[li];
      for (const LinkShape& ls : l.shapes)
        out.push_back({ls.shape, poses[li] * ls.local, WorldShape::Owner::EnvironmentLink, l.name});
    }
  }
  for (const SceneObject& o : w.objects)
    out.push_back({o.shape, w.object_pose(o), WorldShape::Owner::Object, o.id});
  return out;
}

}  // namespace hsim
