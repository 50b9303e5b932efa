#pragma once

#include <condition_variable>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <thread>

#include "hsim/designator.hpp"
#include "hsim/failure.hpp"

namespace hsim {

/// Timestamped event on the interpreter's bus.
struct Event {
  std::string name;
  std::string payload;
  double time = 0.0;
};

enum class TaskStatus { Created, Running, Succeeded, Failed, Evaporated };
std::string to_string(TaskStatus s);

struct TaskNode {
  int id = -1;
  DesignatorPtr action;
  int parent = -1;
  std::vector<int> children;
  TaskStatus status = TaskStatus::Created;
  double start_time = 0.0;
  double end_time = 0.0;
  std::optional<FailureCategory> failure;
  std::string failure_message;
  int retries = 0;  // retries spent inside this node
};

struct Outcome {
  bool ok = true;
  FailureCategory category = FailureCategory::Unrecoverable;
  std::string message;
  int task_id = -1;

  static Outcome success() { return Outcome{}; }
  static Outcome from(const PlanFailure& f) {
    return Outcome{false, f.category(), f.what(), f.task_id};
  }
  [[noreturn]] void rethrow() const {
    PlanFailure f(category, message);
    f.task_id = task_id;
    throw f;
  }
};

/// Deterministic plan interpreter on a logical simulation clock.
///
/// Concurrency ("parallel threads" of pursue) is cooperative: branches are
/// logical tasks multiplexed over worker threads with a single run token, so
/// exactly one branch executes at any instant and handoff order is a pure
/// function of (wake time, branch id). Identical programs and seeds produce
/// bit-identical task trees and event logs.
class Interpreter {
 public:
  using PlanFn = std::function<void(Interpreter&)>;
  using PlanBody = std::function<void(Interpreter&, const Designator&)>;

  explicit Interpreter(WorldState& world, const RobotInfo& robot);
  ~Interpreter();
  Interpreter(const Interpreter&) = delete;

  WorldState& world() { return *world_; }
  const RobotInfo& robot() const { return robot_; }

  double now() const { return clock_; }
  /// Advance the logical clock for the calling branch (a sleep), yielding to
  /// branches scheduled earlier.
  void advance(double dt);

  void post_event(const std::string& name, const std::string& payload = "");
  /// Block the calling branch until an event with this name is posted.
  Event wait_for(const std::string& name);

  /// Run `branches` in interleaved logical threads; returns the first
  /// finisher's outcome and evaporates the rest at its finish time.
  Outcome pursue(std::vector<PlanFn> branches);

  /// Sequential composition; stops at the first failing step.
  Outcome seq(const std::vector<PlanFn>& steps);

  /// Re-runs body on failure, up to max_retries extra attempts. The retry
  /// count is recorded on the current task node.
  Outcome with_retry(int max_retries, const PlanFn& body,
                     const std::function<void(const PlanFailure&, int attempt)>& on_failure = {});

  /// Scoped task-tree node; use via TaskScope.
  int begin_task(DesignatorPtr action);
  void end_task(int id, const Outcome& outcome);
  int current_task() const;
  void count_retry();

  /// Registered generalized plans, keyed by action type.
  void register_plan(const std::string& action_type, PlanBody body,
                     std::function<GoalPtr(const Designator&)> goal = {});
  bool has_plan(const std::string& action_type) const;

  /// perform: goal short-circuit, then the registered plan body, then goal
  /// monitoring. Throws PlanFailure on failure.
  void perform(const DesignatorPtr& action);

  /// Motion-command counter, bumped by plan bodies whenever they issue one.
  void count_motion_command() { ++motion_commands_; }
  long motion_commands() const { return motion_commands_; }

  /// Top-level entry: runs the root plan, catching failures into an Outcome.
  Outcome run(const PlanFn& root);

  const std::vector<TaskNode>& task_tree() const { return tasks_; }
  const std::vector<Event>& events() const { return events_; }

  /// NDJSON serialization (one record per task node, then per event).
  std::string log_ndjson() const;

 public:
  struct Branch;

 private:
  struct Evaporated {};
  struct PlanEntry {
    PlanBody body;
    std::function<GoalPtr(const Designator&)> goal;
  };

  Branch* current_branch() const;
  void yield_to_scheduler(Branch& self);
  void schedule_next_locked();
  void check_evaporated(Branch& self);

  WorldState* world_;
  RobotInfo robot_;
  double clock_ = 0.0;
  long motion_commands_ = 0;

  std::vector<TaskNode> tasks_;
  std::vector<Event> events_;

  std::map<std::string, PlanEntry> plans_;
  long finish_counter_ = 0;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::unique_ptr<Branch>> branches_;
  int running_branch_ = -1;
};

}  // namespace hsim
