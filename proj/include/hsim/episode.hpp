#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hsim/failure.hpp"

namespace hsim {

/// One logged attempt of a parameterized action. The continuous parameter
/// vector has a fixed layout per task key (base pose is x, y, theta).
struct Episode {
  std::string task_key;          // "<action-type>:<object-or-container-id>"
  std::vector<double> params;
  std::string grasp_id;
  std::string arm;
  bool success = false;
  std::optional<FailureCategory> failure;
  std::map<std::string, double> phase_durations;  // sim seconds per phase
  int run_id = 0;
  uint64_t seed = 0;
};

class EpisodeSchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string episode_to_json(const Episode& e);
Episode episode_from_json(const std::string& line);

/// Append-only NDJSON episode log; one writer per run.
class EpisodeLog {
 public:
  explicit EpisodeLog(std::string path) : path_(std::move(path)) {}
  void append(const Episode& e);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

std::vector<Episode> read_episodes(const std::string& path);

}  // namespace hsim
