#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hsim/world.hpp"
#include "hsim/worldio.hpp"

namespace hsim {

class Designator;
using DesignatorPtr = std::shared_ptr<const Designator>;

/// Property value: symbol, number, pose, nested designator or list.
struct Value {
  std::variant<std::string, double, Pose, DesignatorPtr, std::vector<Value>> v;

  Value(const char* s) : v(std::string(s)) {}
  Value(std::string s) : v(std::move(s)) {}
  Value(double d) : v(d) {}
  Value(int d) : v(static_cast<double>(d)) {}
  Value(Pose p) : v(std::move(p)) {}
  Value(DesignatorPtr d) : v(std::move(d)) {}
  Value(std::vector<Value> l) : v(std::move(l)) {}

  const std::string& symbol() const { return std::get<std::string>(v); }
  double number() const { return std::get<double>(v); }
  const Pose& pose() const { return std::get<Pose>(v); }
  const DesignatorPtr& designator() const { return std::get<DesignatorPtr>(v); }
  const std::vector<Value>& list() const { return std::get<std::vector<Value>>(v); }
};

enum class DesignatorKind { Action, Object, Location, Motion };
std::string to_string(DesignatorKind k);

/// Immutable symbolic description; mirrors the s-expression style
///   (an action (type picking-up) (object ...) ...)
class Designator {
 public:
  Designator(DesignatorKind kind, std::vector<std::pair<std::string, Value>> props);

  DesignatorKind kind() const { return kind_; }
  const std::vector<std::pair<std::string, Value>>& properties() const { return props_; }

  bool has(const std::string& key) const;
  const Value& get(const std::string& key) const;  // throws std::out_of_range
  const Value* find(const std::string& key) const;

  /// Copy with one property added or replaced.
  DesignatorPtr with(const std::string& key, Value value) const;

  nlohmann::json to_json() const;
  static DesignatorPtr from_json(const nlohmann::json& j);

 private:
  DesignatorKind kind_;
  std::vector<std::pair<std::string, Value>> props_;
};

DesignatorPtr make_designator(DesignatorKind kind,
                              std::vector<std::pair<std::string, Value>> props);

class FormulaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// First-order goal formula over belief-state relations.
class Goal;
using GoalPtr = std::shared_ptr<const Goal>;

class Goal {
 public:
  enum class Kind { ObjectInHand, ObjectAt, ContainerState, LookingAt, RobotAt, And, Or, Not };

  Kind kind;
  std::vector<std::string> args;    // atom arguments (object id, relation, link, state…)
  std::optional<Pose> pose;         // robot-at target
  std::vector<GoalPtr> children;    // connectives

  static GoalPtr object_in_hand(std::string obj, std::string arm = "");
  static GoalPtr object_at(std::string obj, std::string relation, std::string place);
  static GoalPtr container_state(std::string container, std::string state);
  static GoalPtr looking_at(std::string link);
  static GoalPtr robot_at(Pose p);
  static GoalPtr g_and(std::vector<GoalPtr> cs);
  static GoalPtr g_or(std::vector<GoalPtr> cs);
  static GoalPtr g_not(GoalPtr c);

  std::string to_text() const;
};

/// Name of the environment link or object the given object rests on, or
/// nullopt if unsupported ("floor" for ground contact).
std::optional<std::string> supported_by(const WorldState& w, const std::string& object_id);

bool holds(const Goal& goal, const WorldState& w, const RobotInfo& robot);

}  // namespace hsim
