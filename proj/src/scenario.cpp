#include "hsim/scenario.hpp"

#include <filesystem>

#include <nlohmann/json.hpp>

namespace hsim {

using nlohmann::json;

namespace {

void check_prob(double p, const std::string& what) {
  if (p < 0.0 || p > 1.0) throw ConfigError(what + " must be in [0, 1]");
}

std::string location_kind(const std::string& loc) {
  auto colon = loc.find(':');
  if (colon == std::string::npos) throw ConfigError("location must be on:<link> or in:<container>: " + loc);
  std::string kind = loc.substr(0, colon);
  if (kind != "on" && kind != "in") throw ConfigError("unknown location kind in " + loc);
  return kind;
}

void check_location(const std::string& loc, const WorldState& env, const std::string& ctx) {
  std::string kind = location_kind(loc);
  std::string name = loc.substr(loc.find(':') + 1);
  if (kind == "on" && !env.environment->has_link(name))
    throw ConfigError(ctx + ": unknown surface link " + name);
  if (kind == "in" && !env.has_container(name))
    throw ConfigError(ctx + ": unknown container " + name);
}

TransportTask parse_task(const json& j) {
  TransportTask t;
  t.object_id = j.at("object");
  t.destination = j.at("destination");
  t.source_container = j.value("source_container", "");
  t.dest_container = j.value("dest_container", "");
  return t;
}

}  // namespace

void FailureInjectionConfig::check() const {
  for (const auto& [type, p] : perception_miss) check_prob(p, "perception_miss." + type);
  check_prob(default_miss, "default_miss");
  check_prob(grasp_slip_base, "grasp_slip_base");
  for (const auto& [c, p] : handle_slip) check_prob(p, "handle_slip." + c);
  check_prob(handle_slip_default, "handle_slip_default");
  check_prob(carry_drop_prob, "carry_drop_prob");
  check_prob(gripper_jam_prob, "gripper_jam_prob");
  if (base_noise_sigma < 0.0) throw ConfigError("base_noise_sigma must be >= 0");
  if (grasp_slip_thin_scale < 0.0) throw ConfigError("grasp_slip_thin_scale must be >= 0");
}

Scenario Scenario::load(const std::string& path) {
  json j = load_json_file(path);
  if (j.value("format", "") != "hsim-scenario-1")
    throw ConfigError(path + ": expected format tag hsim-scenario-1");
  Scenario sc;
  sc.environment_file =
      (std::filesystem::path(path).parent_path() / j.at("environment").get<std::string>())
          .string();
  WorldState env = load_environment_file(sc.environment_file);

  if (j.contains("robot_home")) {
    auto h = j.at("robot_home");
    sc.robot_home = Vec3(h.at(0), h.at(1), h.at(2));
  }
  for (const json& sj : j.at("spawns")) {
    SpawnRule r;
    r.object_id = sj.at("object");
    r.location = sj.at("location");
    if (!env.has_object(r.object_id))
      throw ConfigError("spawn rule references unknown object " + r.object_id);
    check_location(r.location, env, "spawn " + r.object_id);
    if (sj.contains("anchor")) {
      auto a = sj.at("anchor");
      r.anchor = Vec3(a.at(0), a.at(1), a.at(2));
    } else {
      r.anchor = env.object_pose(r.object_id).t;
    }
    r.jitter_xy = sj.value("jitter_xy", 0.04);
    r.jitter_yaw = sj.value("jitter_yaw", M_PI);
    sc.spawns.push_back(std::move(r));
  }
  for (const json& tj : j.at("setting")) sc.setting.push_back(parse_task(tj));
  for (const json& tj : j.at("cleaning")) sc.cleaning.push_back(parse_task(tj));
  for (const auto& tasks : {sc.setting, sc.cleaning})
    for (const TransportTask& t : tasks) {
      if (!env.has_object(t.object_id))
        throw ConfigError("task references unknown object " + t.object_id);
      check_location(t.destination, env, "task " + t.object_id);
      for (const std::string& c : {t.source_container, t.dest_container})
        if (!c.empty() && !env.has_container(c))
          throw ConfigError("task " + t.object_id + ": unknown container " + c);
    }
  return sc;
}

HarnessConfig HarnessConfig::load(const std::string& path) {
  json j = load_json_file(path);
  if (j.value("format", "") != "hsim-harness-1")
    throw ConfigError(path + ": expected format tag hsim-harness-1");
  auto dir = std::filesystem::path(path).parent_path();
  HarnessConfig c;
  c.scenario_path = (dir / j.at("scenario").get<std::string>()).string();
  c.robot_file = (dir / j.at("robot").get<std::string>()).string();
  c.grasp_file = (dir / j.at("grasps").get<std::string>()).string();
  c.mode = j.value("mode", "heuristic");
  if (c.mode != "heuristic" && c.mode != "specialized")
    throw ConfigError("mode must be heuristic or specialized");
  if (j.contains("seeds")) {
    c.seeds.clear();
    for (const json& s : j.at("seeds")) c.seeds.push_back(s.get<uint64_t>());
  }
  c.runs = j.value("runs", static_cast<int>(c.seeds.size()));
  if (c.runs < 1) throw ConfigError("runs must be >= 1");
  if (static_cast<size_t>(c.runs) != c.seeds.size())
    throw ConfigError("seeds length must equal runs");
  c.output_dir = j.value("output_dir", "out");
  c.models_dir = j.value("models_dir", "");
  if (j.contains("injection")) {
    const json& ij = j.at("injection");
    FailureInjectionConfig& f = c.injection;
    if (ij.contains("perception_miss"))
      for (auto& [type, p] : ij.at("perception_miss").items()) f.perception_miss[type] = p;
    f.default_miss = ij.value("default_miss", 0.0);
    f.grasp_slip_base = ij.value("grasp_slip_base", 0.0);
    f.grasp_slip_thin_scale = ij.value("grasp_slip_thin_scale", 1.0);
    if (ij.contains("handle_slip"))
      for (auto& [cid, p] : ij.at("handle_slip").items()) f.handle_slip[cid] = p;
    f.handle_slip_default = ij.value("handle_slip_default", 0.0);
    f.base_noise_sigma = ij.value("base_noise_sigma", 0.0);
    f.carry_drop_prob = ij.value("carry_drop_prob", 0.0);
    f.gripper_jam_prob = ij.value("gripper_jam_prob", 0.0);
    f.check();
  }
  return c;
}

WorldState spawn_scenario(const Scenario& sc, const RobotInfo& robot, uint64_t seed) {
  WorldState w = load_environment_file(sc.environment_file);
  w.robot = robot.tree;
  for (const DofInfo& d : robot.tree->dofs())
    if (!w.joint_positions.count(d.name)) w.joint_positions[d.name] = 0.0;
  for (const Joint& j : robot.tree->joints())
    if (j.type == JointType::PlanarBase) {
      w.set_joint_position(j.name + "/x", sc.robot_home.x());
      w.set_joint_position(j.name + "/y", sc.robot_home.y());
      w.set_joint_position(j.name + "/theta", sc.robot_home.z());
    }

  Rng rng = Rng(seed).derive("spawn");
  for (const SpawnRule& r : sc.spawns) {
    SceneObject& o = w.object(r.object_id);
    double dx = rng.uniform(-r.jitter_xy, r.jitter_xy);
    double dy = rng.uniform(-r.jitter_xy, r.jitter_xy);
    double yaw = rng.uniform(-r.jitter_yaw, r.jitter_yaw);
    o.pose = Pose::translation(r.anchor.x() + dx, r.anchor.y() + dy, r.anchor.z()) *
             Pose::rot_z(yaw);
    settle(w, r.object_id);
  }
  return w;
}

}  // namespace hsim
