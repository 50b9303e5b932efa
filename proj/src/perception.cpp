#include "hsim/perception.hpp"

namespace hsim {

namespace {

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (char c : s) {
    h ^= static_cast<uint64_t>(static_cast<unsigned char>(c));
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

/// Model clouds are deterministic per type so estimates are reproducible.
std::vector<Vec3> model_cloud_for(const std::string& type, const Shape& shape, int n) {
  Rng rng = Rng(fnv1a(type)).derive("model-cloud");
  return surface_samples(shape, n, rng);
}

DesignatorPtr DetectionResult::to_designator() const {
  return make_designator(DesignatorKind::Object,
                         {{"type", type},
                          {"name", object_id},
                          {"color", color},
                          {"pose", Value(pose)},
                          {"confidence", confidence},
                          {"residual", score},
                          {"corrected-by-physics", corrected_by_physics ? 1.0 : 0.0}});
}

DetectionResult estimate_pose(const std::string& object_type, const PointCloud& cloud,
                              const Pose& camera, const WorldState& w,
                              const PerceptionConfig& cfg) {
  if (cloud.points.empty()) throw std::invalid_argument("estimate_pose: empty cloud");
  const SceneObject* proto = nullptr;
  for (const SceneObject& o : w.objects)
    if (o.type == object_type && (cloud.source_id.empty() || o.id == cloud.source_id)) {
      proto = &o;
      break;
    }
  if (!proto) throw std::invalid_argument("estimate_pose: no model for type " + object_type);

  PointCloud world_cloud;
  world_cloud.points.reserve(cloud.points.size());
  for (const Vec3& p : cloud.points) world_cloud.points.push_back(camera.apply(p));
  PcaResult scene = pca_axes(world_cloud);

  std::vector<Vec3> model = model_cloud_for(object_type, proto->shape, cfg.model_samples);
  PcaResult model_pca = pca_axes(PointCloud{model, ""});

  DetectionResult r;
  r.object_id = proto->id;
  r.type = proto->type;
  r.color = proto->color;

  // the measured (partial) cloud is the ICP source and the full model the
  // target, so hidden-surface model points cannot bias the alignment
  IcpResult best;
  Pose best_pose;
  for (const Quat& c : axis_candidates(cfg.paper12)) {
    Eigen::Matrix3d rot = scene.axes * c.toRotationMatrix() * model_pca.axes.transpose();
    Pose init{scene.centroid - rot * model_pca.centroid, Quat(rot)};
    IcpResult res =
        icp(world_cloud.points, model, init.inverse(), cfg.icp_max_iters, cfg.icp_tol);
    r.candidate_scores.push_back(res.score);
    if (r.candidate_index < 0 || res.score < best.score) {
      best = res;
      best_pose = res.transform.inverse();
      r.candidate_index = static_cast<int>(r.candidate_scores.size()) - 1;
    }
  }
  r.score = best.score;
  double sigma = std::max(cfg.noise_sigma, 1e-6);
  r.confidence = std::exp(-r.score / (sigma * sigma));

  // plausibility: the reported pose must be a settled pose of the object
  WorldState scratch = w;
  SceneObject& target = scratch.object(proto->id);
  if (target.attachment) scratch.detach(proto->id);
  target.pose = best_pose;
  SettleResult settled = settle(scratch, proto->id);
  r.pose = settled.pose;
  r.corrected_by_physics = settled.corrected_significantly;
  return r;
}

DetectionResult detect(const Designator& query, const WorldState& w, const Pose& camera,
                       uint64_t seed, const PerceptionConfig& cfg) {
  std::string type = query.has("type") ? query.get("type").symbol() : "";
  std::string color = query.has("color") ? query.get("color").symbol() : "";
  if (type.empty() && color.empty())
    throw std::invalid_argument("detect: query needs type and/or color");

  Rng miss_rng = Rng(seed).derive("detect-miss");
  for (const SceneObject& o : w.objects) {
    if (!type.empty() && o.type != type) continue;
    if (!color.empty() && o.color != color) continue;
    double p_miss = cfg.default_miss;
    if (auto it = cfg.miss_probability.find(o.type); it != cfg.miss_probability.end())
      p_miss = it->second;
    if (p_miss > 0.0 && miss_rng.bernoulli(p_miss))
      throw PlanFailure(FailureCategory::Perception, "lost sight of " + o.id);
    PointCloud cloud = render_cloud(w, camera, o.id, cfg.noise_sigma, cfg.dropout,
                                    seed ^ fnv1a(o.id), cfg.rays, cfg.fov);
    if (cloud.points.size() < 4) continue;  // occluded or out of view
    return estimate_pose(o.type, cloud, camera, w, cfg);
  }
  throw PlanFailure(FailureCategory::Perception,
                    "no visible object matches (type " + type + ", color " + color + ")");
}

}  // namespace hsim
