#include "hsim/episode.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

namespace hsim {

namespace {
constexpr const char* kSchema = "hsim-episode-1";
}

std::string episode_to_json(const Episode& e) {
  if (e.task_key.empty()) throw EpisodeSchemaError("episode task_key must be nonempty");
  if (!e.success && !e.failure)
    throw EpisodeSchemaError("failed episode must carry a failure category");
  nlohmann::json j;
  j["schema"] = kSchema;
  j["task_key"] = e.task_key;
  j["params"] = e.params;
  j["grasp_id"] = e.grasp_id;
  j["arm"] = e.arm;
  j["outcome"] = e.success ? "success" : "failure";
  if (e.failure) j["failure"] = to_string(*e.failure);
  j["phase_durations"] = e.phase_durations;
  j["run_id"] = e.run_id;
  j["seed"] = e.seed;
  return j.dump();
}

Episode episode_from_json(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& ex) {
    throw EpisodeSchemaError(std::string("bad episode record: ") + ex.what());
  }
  if (j.value("schema", "") != kSchema)
    throw EpisodeSchemaError("unsupported episode schema: " + j.value("schema", "<missing>"));
  Episode e;
  try {
    e.task_key = j.at("task_key").get<std::string>();
    e.params = j.at("params").get<std::vector<double>>();
    e.grasp_id = j.value("grasp_id", "");
    e.arm = j.value("arm", "");
    e.success = j.at("outcome").get<std::string>() == "success";
    if (j.contains("failure"))
      e.failure = failure_category_from_string(j.at("failure").get<std::string>());
    if (j.contains("phase_durations"))
      e.phase_durations = j.at("phase_durations").get<std::map<std::string, double>>();
    e.run_id = j.value("run_id", 0);
    e.seed = j.value("seed", uint64_t{0});
  } catch (const nlohmann::json::exception& ex) {
    throw EpisodeSchemaError(std::string("bad episode record: ") + ex.what());
  }
  if (!e.success && !e.failure)
    throw EpisodeSchemaError("failed episode must carry a failure category");
  return e;
}

void EpisodeLog::append(const Episode& e) {
  std::string line = episode_to_json(e);  // validate before touching the file
  std::ofstream out(path_, std::ios::app);
  if (!out) throw std::runtime_error("cannot open episode log: " + path_);
  out << line << '\n';
}

std::vector<Episode> read_episodes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open episode log: " + path);
  std::vector<Episode> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(episode_from_json(line));
  }
  return out;
}

}  // namespace hsim
