#include "hsim/designator.hpp"

#include <nlohmann/json.hpp>

#include "hsim/collision.hpp"

namespace hsim {

std::string to_string(DesignatorKind k) {
  switch (k) {
    case DesignatorKind::Action: return "action";
    case DesignatorKind::Object: return "object";
    case DesignatorKind::Location: return "location";
    case DesignatorKind::Motion: return "motion";
  }
  return "?";
}

static DesignatorKind kind_from_string(const std::string& s) {
  if (s == "action") return DesignatorKind::Action;
  if (s == "object") return DesignatorKind::Object;
  if (s == "location") return DesignatorKind::Location;
  if (s == "motion") return DesignatorKind::Motion;
  throw std::invalid_argument("unknown designator kind " + s);
}

Designator::Designator(DesignatorKind kind, std::vector<std::pair<std::string, Value>> props)
    : kind_(kind), props_(std::move(props)) {
  for (size_t i = 0; i < props_.size(); ++i)
    for (size_t j = i + 1; j < props_.size(); ++j)
      if (props_[i].first == props_[j].first)
        throw std::invalid_argument("duplicate designator key " + props_[i].first);
  bool needs_type = kind_ == DesignatorKind::Action || kind_ == DesignatorKind::Object ||
                    kind_ == DesignatorKind::Motion;
  if (needs_type && !has("type"))
    throw std::invalid_argument(to_string(kind_) + " designator requires a type");
}

bool Designator::has(const std::string& key) const { return find(key) != nullptr; }

const Value* Designator::find(const std::string& key) const {
  for (const auto& [k, v] : props_)
    if (k == key) return &v;
  return nullptr;
}

const Value& Designator::get(const std::string& key) const {
  const Value* v = find(key);
  if (!v) throw std::out_of_range("designator has no key " + key);
  return *v;
}

DesignatorPtr Designator::with(const std::string& key, Value value) const {
  auto props = props_;
  for (auto& [k, v] : props)
    if (k == key) {
      v = std::move(value);
      return std::make_shared<Designator>(kind_, std::move(props));
    }
  props.emplace_back(key, std::move(value));
  return std::make_shared<Designator>(kind_, std::move(props));
}

DesignatorPtr make_designator(DesignatorKind kind,
                              std::vector<std::pair<std::string, Value>> props) {
  return std::make_shared<Designator>(kind, std::move(props));
}

static nlohmann::json value_to_json(const Value& v) {
  nlohmann::json j;
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::string>) {
          j = x;
        } else if constexpr (std::is_same_v<T, double>) {
          j = x;
        } else if constexpr (std::is_same_v<T, Pose>) {
          j = {{"xyz", {x.t.x(), x.t.y(), x.t.z()}},
               {"quat", {x.q.w(), x.q.x(), x.q.y(), x.q.z()}}};
        } else if constexpr (std::is_same_v<T, DesignatorPtr>) {
          j = x->to_json();
        } else {
          j = nlohmann::json::array();
          for (const Value& e : x) j.push_back(value_to_json(e));
        }
      },
      v.v);
  return j;
}

static Value value_from_json(const nlohmann::json& j) {
  if (j.is_string()) return Value(j.get<std::string>());
  if (j.is_number()) return Value(j.get<double>());
  if (j.is_array()) {
    std::vector<Value> l;
    for (const auto& e : j) l.push_back(value_from_json(e));
    return Value(std::move(l));
  }
  if (j.contains("quat")) {
    Pose p;
    auto& t = j.at("xyz");
    p.t = Vec3(t[0], t[1], t[2]);
    auto& q = j.at("quat");
    p.q = Quat(q[0], q[1], q[2], q[3]);
    return Value(p);
  }
  return Value(Designator::from_json(j));
}

nlohmann::json Designator::to_json() const {
  nlohmann::json props = nlohmann::json::array();
  for (const auto& [k, v] : props_) props.push_back({{"key", k}, {"value", value_to_json(v)}});
  return {{"kind", to_string(kind_)}, {"properties", props}};
}

DesignatorPtr Designator::from_json(const nlohmann::json& j) {
  std::vector<std::pair<std::string, Value>> props;
  for (const auto& p : j.at("properties"))
    props.emplace_back(p.at("key").get<std::string>(), value_from_json(p.at("value")));
  return make_designator(kind_from_string(j.at("kind").get<std::string>()), std::move(props));
}

GoalPtr Goal::object_in_hand(std::string obj, std::string arm) {
  auto g = std::make_shared<Goal>();
  g->kind = Kind::ObjectInHand;
  g->args = {std::move(obj), std::move(arm)};
  return g;
}
GoalPtr Goal::object_at(std::string obj, std::string relation, std::string place) {
  auto g = std::make_shared<Goal>();
  g->kind = Kind::ObjectAt;
  g->args = {std::move(obj), std::move(relation), std::move(place)};
  return g;
}
GoalPtr Goal::container_state(std::string container, std::string state) {
  auto g = std::make_shared<Goal>();
  g->kind = Kind::ContainerState;
  g->args = {std::move(container), std::move(state)};
  return g;
}
GoalPtr Goal::looking_at(std::string link) {
  auto g = std::make_shared<Goal>();
  g->kind = Kind::LookingAt;
  g->args = {std::move(link)};
  return g;
}
GoalPtr Goal::robot_at(Pose p) {
  auto g = std::make_shared<Goal>();
  g->kind = Kind::RobotAt;
  g->pose = p;
  return g;
}
GoalPtr Goal::g_and(std::vector<GoalPtr> cs) {
  auto g = std::make_shared<Goal>();
  g->kind = Kind::And;
  g->children = std::move(cs);
  return g;
}
GoalPtr Goal::g_or(std::vector<GoalPtr> cs) {
  auto g = std::make_shared<Goal>();
  g->kind = Kind::Or;
  g->children = std::move(cs);
  return g;
}
GoalPtr Goal::g_not(GoalPtr c) {
  auto g = std::make_shared<Goal>();
  g->kind = Kind::Not;
  g->children = {std::move(c)};
  return g;
}

std::string Goal::to_text() const {
  switch (kind) {
    case Kind::ObjectInHand:
      return "object-in-hand(" + args[0] + (args[1].empty() ? "" : ", " + args[1]) + ")";
    case Kind::ObjectAt: return "object-at(" + args[0] + ", " + args[1] + "(" + args[2] + "))";
    case Kind::ContainerState: return "container-state(" + args[0] + ", " + args[1] + ")";
    case Kind::LookingAt: return "looking-at(" + args[0] + ")";
    case Kind::RobotAt: return "robot-at(pose)";
    case Kind::And:
    case Kind::Or: {
      std::string s = kind == Kind::And ? "and(" : "or(";
      for (size_t i = 0; i < children.size(); ++i)
        s += (i ? ", " : "") + children[i]->to_text();
      return s + ")";
    }
    case Kind::Not: return "not(" + children[0]->to_text() + ")";
  }
  return "?";
}

std::optional<std::string> supported_by(const WorldState& w, const std::string& object_id) {
  const SceneObject& obj = w.object(object_id);
  if (obj.attachment) return std::nullopt;
  Pose op = w.object_pose(obj);
  std::string best;
  double best_gap = 0.02;  // resting means within 2 cm of touching from above
  for (const WorldShape& ws : collect_shapes(w)) {
    if (ws.owner == WorldShape::Owner::RobotLink) continue;
    if (ws.owner == WorldShape::Owner::Object && ws.name == object_id) continue;
    ClosestPoints cp = closest_points(obj.shape, op, ws.shape, ws.pose);
    if (cp.distance > best_gap) continue;
    if (cp.normal.z() < 0.5) continue;  // contact must push the object up
    best_gap = std::max(cp.distance, -0.001);
    best = ws.name;
  }
  if (!best.empty()) return best;
  // floor slab at z = 0
  double bottom = op.t.z() - bounding_radius(obj.shape);
  if (bottom < 0.05) return std::string("floor");
  return std::nullopt;
}

bool holds(const Goal& goal, const WorldState& w, const RobotInfo& robot) {
  switch (goal.kind) {
    case Goal::Kind::ObjectInHand: {
      if (!w.has_object(goal.args[0]))
        throw FormulaError("unbound object term " + goal.args[0]);
      const SceneObject& o = w.object(goal.args[0]);
      if (!o.attachment) return false;
      if (goal.args[1].empty()) return true;
      auto it = robot.gripper_link.find(goal.args[1]);
      if (it == robot.gripper_link.end()) throw FormulaError("unbound arm term " + goal.args[1]);
      return *o.attachment == it->second;
    }
    case Goal::Kind::ObjectAt: {
      if (!w.has_object(goal.args[0]))
        throw FormulaError("unbound object term " + goal.args[0]);
      const std::string& rel = goal.args[1];
      const std::string& place = goal.args[2];
      if (rel == "on") {
        auto s = supported_by(w, goal.args[0]);
        return s && *s == place;
      }
      if (rel == "in") {
        if (!w.has_container(place)) throw FormulaError("unbound container term " + place);
        const ArticulatedContainer& c = w.container(place);
        Pose link = w.environment->link_pose(w.environment_config(), c.moving_link);
        Vec3 local = link.inverse().apply(w.object_pose(goal.args[0]).t);
        // inside the (slightly inflated) bound of the moving link's shapes
        for (const LinkShape& ls :
             w.environment->links()[w.environment->link_index(c.moving_link)].shapes) {
          Vec3 p = ls.local.inverse().apply(local);
          double r = bounding_radius(ls.shape) + 0.15;
          if (p.norm() < r) return true;
        }
        return false;
      }
      throw FormulaError("unknown relation " + rel);
    }
    case Goal::Kind::ContainerState: {
      if (!w.has_container(goal.args[0]))
        throw FormulaError("unbound container term " + goal.args[0]);
      const ArticulatedContainer& c = w.container(goal.args[0]);
      double q = w.joint_position(c.joint);
      if (goal.args[1] == "open") return std::abs(q - c.open_position) < 0.02;
      if (goal.args[1] == "closed") return std::abs(q - c.closed_position) < 0.02;
      throw FormulaError("unknown container state " + goal.args[1]);
    }
    case Goal::Kind::LookingAt: {
      Pose cam = w.robot->link_pose(w.robot_config(), robot.camera_link);
      Vec3 target;
      if (w.has_object(goal.args[0]))
        target = w.object_pose(goal.args[0]).t;
      else if (w.has_link(goal.args[0]))
        target = w.link_pose(goal.args[0]).t;
      else
        throw FormulaError("unbound looking-at term " + goal.args[0]);
      Vec3 d = cam.q.conjugate() * (target - cam.t);
      if (d.norm() < 1e-9) return true;
      return std::atan2(std::hypot(d.y(), d.z()), d.x()) < 0.1;
    }
    case Goal::Kind::RobotAt: {
      Pose base = w.robot->link_pose(w.robot_config(), robot.base_link);
      return (base.t.head<2>() - goal.pose->t.head<2>()).norm() < 0.05;
    }
    case Goal::Kind::And:
      for (const auto& c : goal.children)
        if (!holds(*c, w, robot)) return false;
      return true;
    case Goal::Kind::Or:
      for (const auto& c : goal.children)
        if (holds(*c, w, robot)) return true;
      return false;
    case Goal::Kind::Not:
      return !holds(*goal.children[0], w, robot);
  }
  throw FormulaError("malformed goal");
}

}  // namespace hsim
