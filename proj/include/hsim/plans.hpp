#pragma once

#include <optional>

#include "hsim/control.hpp"
#include "hsim/episode.hpp"
#include "hsim/exec.hpp"
#include "hsim/gaussian.hpp"
#include "hsim/perception.hpp"
#include "hsim/reasoner.hpp"
#include "hsim/scenario.hpp"

namespace hsim {

/// Shared state of the generalized plan library for one run: robot and grasp
/// knowledge, the injection channels, the per-run random streams, and the
/// accounting hooks the harness uses to fill the report cells.
struct PlanContext {
  RobotInfo robot;
  GraspCatalog catalog;
  FailureInjectionConfig injection;
  PerceptionConfig perception;
  ControlParams control;
  ReasonerParams reason;

  std::string mode = "heuristic";  // heuristic | specialized
  std::map<std::string, GaussianModel> models;  // task key -> learned model

  uint64_t seed = 0;  // run seed, drives every stochastic draw of the run
  int run_id = 0;
  std::string phase = "setting";  // setting | cleaning

  Rng inject_rng{0};      // injection draws, one stream per run
  long attempt_serial = 0;  // distinguishes repeated perception calls

  /// Called once per failure, at the point it is raised; the harness maps
  /// (current object, category) to exactly one report cell.
  std::function<void(const std::string& object, FailureCategory)> on_failure;
  std::function<void(const Episode&)> on_episode;

  std::string current_object;
  std::map<std::string, double> phase_durations;  // current transport, sim s
  std::optional<DetectionResult> last_detection;

  /// Record a failure against the current object and throw it.
  [[noreturn]] void fail(FailureCategory cat, const std::string& message);
  /// Advance the interpreter clock and book the time on a phase.
  void spend(Interpreter& it, const std::string& phase_key, double seconds);
};

/// Registers transporting / fetching / delivering / navigating / picking-up /
/// placing / perceiving / opening-container / closing-container.
void register_standard_plans(Interpreter& it, PlanContext& ctx);

/// Action designator for one transport goal, with its goal formula attached
/// by the registered transporting plan.
DesignatorPtr transport_action(const TransportTask& t, const std::string& phase);

/// Base-pose candidates for picking up an object: the reachable-for prior in
/// heuristic mode, the learned x specialized product when a model exists.
std::vector<Pose> base_pose_candidates(const PlanContext& ctx, const WorldState& w,
                                       const std::string& object_id, int n, uint64_t seed);

}  // namespace hsim
