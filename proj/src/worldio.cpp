#include "hsim/worldio.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

namespace hsim {

using nlohmann::json;

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return j;
}

Pose parse_pose(const json& j) {
  Pose p;
  if (j.contains("xyz")) {
    auto v = j.at("xyz");
    p.t = Vec3(v.at(0), v.at(1), v.at(2));
  }
  if (j.contains("rpy")) {
    auto v = j.at("rpy");
    p.q = Quat(Eigen::AngleAxisd(v.at(2).get<double>(), Vec3::UnitZ()) *
               Eigen::AngleAxisd(v.at(1).get<double>(), Vec3::UnitY()) *
               Eigen::AngleAxisd(v.at(0).get<double>(), Vec3::UnitX()));
  }
  if (j.contains("quat")) {  // w x y z
    auto v = j.at("quat");
    p.q = Quat(v.at(0), v.at(1), v.at(2), v.at(3)).normalized();
  }
  return p;
}

Shape parse_shape(const json& j) {
  std::string type = j.at("type");
  if (type == "sphere") return Sphere{j.at("radius")};
  if (type == "capsule") return Capsule{j.at("radius"), j.at("half_length")};
  if (type == "box") {
    auto v = j.at("half_extents");
    return Box{Vec3(v.at(0), v.at(1), v.at(2))};
  }
  throw ConfigError("unknown shape type " + type);
}

std::shared_ptr<KinematicTree> parse_tree(const json& j) {
  auto tree = std::make_shared<KinematicTree>();
  for (const json& lj : j.at("links")) {
    Link l;
    l.name = lj.at("name");
    if (lj.contains("shapes")) {
      for (const json& sj : lj.at("shapes")) {
        LinkShape ls;
        ls.shape = parse_shape(sj);
        if (sj.contains("pose")) ls.local = parse_pose(sj.at("pose"));
        l.shapes.push_back(ls);
      }
    }
    tree->add_link(std::move(l));
  }
  if (j.contains("joints")) {
    for (const json& jj : j.at("joints")) {
      Joint jt;
      jt.name = jj.at("name");
      std::string type = jj.at("type");
      if (type == "fixed")
        jt.type = JointType::Fixed;
      else if (type == "revolute")
        jt.type = JointType::Revolute;
      else if (type == "prismatic")
        jt.type = JointType::Prismatic;
      else if (type == "planar-base")
        jt.type = JointType::PlanarBase;
      else
        throw ConfigError("unknown joint type " + type);
      jt.parent = jj.at("parent");
      jt.child = jj.at("child");
      if (jj.contains("origin")) jt.origin = parse_pose(jj.at("origin"));
      if (jj.contains("axis")) {
        auto v = jj.at("axis");
        jt.axis = Vec3(v.at(0), v.at(1), v.at(2));
      }
      if (jj.contains("limits")) {
        jt.lo = jj.at("limits").at(0);
        jt.hi = jj.at("limits").at(1);
      }
      if (jj.contains("vmax")) jt.vmax = jj.at("vmax");
      tree->add_joint(std::move(jt));
    }
  }
  tree->finalize();
  return tree;
}

RobotInfo load_robot_file(const std::string& path) {
  json j = load_json_file(path);
  if (j.value("format", "") != "hsim-robot-1")
    throw ConfigError(path + ": expected format tag hsim-robot-1");
  RobotInfo info;
  info.tree = parse_tree(j);
  info.base_link = j.at("base_link");
  info.camera_link = j.at("camera_link");
  info.torso_dof = j.value("torso_dof", "");
  if (j.contains("base_radius")) info.base_radius = j.at("base_radius");
  if (j.contains("gripper_range")) {
    info.gripper_min = j.at("gripper_range").at(0);
    info.gripper_max = j.at("gripper_range").at(1);
  }
  for (auto& [arm, aj] : j.at("arms").items()) {
    info.gripper_link[arm] = aj.at("tool_frame");
    info.gripper_dof[arm] = aj.at("gripper_dof");
    for (const json& l : aj.at("links")) info.arm_links[arm].push_back(l.get<std::string>());
    if (aj.contains("hand_links"))
      for (const json& l : aj.at("hand_links")) info.hand_links[arm].push_back(l.get<std::string>());
    if (aj.contains("finger_links"))
      for (const json& l : aj.at("finger_links"))
        info.finger_links[arm].push_back(l.get<std::string>());
  }
  return info;
}

WorldState load_environment_file(const std::string& path) {
  json j = load_json_file(path);
  if (j.value("format", "") != "hsim-env-1")
    throw ConfigError(path + ": expected format tag hsim-env-1");
  WorldState w;
  w.environment = parse_tree(j);
  if (j.contains("workspace")) {
    w.x_min = j.at("workspace").at("x").at(0);
    w.x_max = j.at("workspace").at("x").at(1);
    w.y_min = j.at("workspace").at("y").at(0);
    w.y_max = j.at("workspace").at("y").at(1);
  }
  if (j.contains("joint_positions")) {
    for (auto& [name, v] : j.at("joint_positions").items()) w.joint_positions[name] = v;
  }
  if (j.contains("objects")) {
    for (const json& oj : j.at("objects")) {
      SceneObject o;
      o.id = oj.at("id");
      o.type = oj.at("type");
      o.color = oj.value("color", "");
      o.shape = parse_shape(oj.at("shape"));
      o.pose = parse_pose(oj.at("pose"));
      o.mass = oj.value("mass", 0.2);
      w.objects.push_back(std::move(o));
    }
  }
  if (j.contains("containers")) {
    for (const json& cj : j.at("containers")) {
      ArticulatedContainer c;
      c.id = cj.at("id");
      c.joint = cj.at("joint");
      std::string kind = cj.at("kind");
      if (kind == "drawer")
        c.kind = ContainerKind::Drawer;
      else if (kind == "door")
        c.kind = ContainerKind::Door;
      else if (kind == "dishwasher-door")
        c.kind = ContainerKind::DishwasherDoor;
      else
        throw ConfigError("unknown container kind " + kind);
      c.moving_link = cj.at("moving_link");
      if (cj.contains("handle")) c.handle = parse_pose(cj.at("handle"));
      c.open_position = cj.at("open");
      c.closed_position = cj.at("closed");
      if (c.open_position == c.closed_position)
        throw ConfigError("container " + c.id + ": open == closed");
      w.containers.push_back(std::move(c));
    }
  }
  return w;
}

}  // namespace hsim
