#pragma once

#include <stdexcept>
#include <string>

namespace hsim {

enum class FailureCategory {
  Perception,
  Grasp,
  Manipulation,
  EnvManipulation,
  Navigation,
  Settle,
  Unrecoverable,
};

const char* to_string(FailureCategory c);
FailureCategory failure_category_from_string(const std::string& s);

/// Execution failure flowing through the plan interpreter. Category is fixed
/// at construction; the originating task id is filled in by the interpreter.
class PlanFailure : public std::runtime_error {
 public:
  PlanFailure(FailureCategory category, std::string message)
      : std::runtime_error(std::move(message)), category_(category) {}

  FailureCategory category() const { return category_; }
  int task_id = -1;

 private:
  FailureCategory category_;
};

}  // namespace hsim
