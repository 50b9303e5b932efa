#include "hsim/exec.hpp"

#include <nlohmann/json.hpp>
#include <sstream>

namespace hsim {

std::string to_string(TaskStatus s) {
  switch (s) {
    case TaskStatus::Created: return "created";
    case TaskStatus::Running: return "running";
    case TaskStatus::Succeeded: return "succeeded";
    case TaskStatus::Failed: return "failed";
    case TaskStatus::Evaporated: return "evaporated";
  }
  return "?";
}

struct Interpreter::Branch {
  enum State { Ready, WaitEvent, Blocked, Done };

  int id = 0;
  int parent_branch = -1;
  State state = Ready;
  double wake = 0.0;
  std::string waiting_event;
  Event delivered;
  bool evaporate = false;
  bool finished = false;        // body returned / threw
  bool evaporated_done = false; // finished via evaporation
  long finish_seq = -1;
  std::exception_ptr error;
  std::thread thread;
  std::thread::id tid;
  std::vector<int> task_stack;
  size_t base_depth = 0;  // inherited task-stack entries, never popped here
};

Interpreter::Interpreter(WorldState& world, const RobotInfo& robot)
    : world_(&world), robot_(robot) {
  auto root = std::make_unique<Branch>();
  root->id = 0;
  root->tid = std::this_thread::get_id();
  branches_.push_back(std::move(root));
  running_branch_ = 0;
}

Interpreter::~Interpreter() {
  for (auto& b : branches_)
    if (b->thread.joinable()) b->thread.join();
}

Interpreter::Branch* Interpreter::current_branch() const {
  auto tid = std::this_thread::get_id();
  for (const auto& b : branches_)
    if (b->tid == tid && b->state != Branch::Done) return const_cast<Branch*>(b.get());
  throw std::logic_error("interpreter call from a non-branch thread");
}

void Interpreter::schedule_next_locked() {
  int best = -1;
  for (const auto& b : branches_)
    if (b->state == Branch::Ready && (best < 0 || b->wake < branches_[best]->wake))
      best = b->id;
  if (best < 0) throw std::logic_error("interpreter deadlock: no runnable branch");
  clock_ = std::max(clock_, branches_[best]->wake);
  running_branch_ = best;
  cv_.notify_all();
}

void Interpreter::check_evaporated(Branch& self) {
  if (self.evaporate) throw Evaporated{};
}

void Interpreter::advance(double dt) {
  if (dt < 0) throw std::invalid_argument("advance: negative dt");
  Branch& self = *current_branch();
  {
    std::unique_lock lk(mu_);
    self.wake = clock_ + dt;
    schedule_next_locked();
    cv_.wait(lk, [&] { return running_branch_ == self.id; });
  }
  check_evaporated(self);
}

void Interpreter::post_event(const std::string& name, const std::string& payload) {
  std::unique_lock lk(mu_);
  events_.push_back({name, payload, clock_});
  for (auto& b : branches_)
    if (b->state == Branch::WaitEvent && b->waiting_event == name) {
      b->state = Branch::Ready;
      b->wake = clock_;
      b->delivered = events_.back();
    }
}

Event Interpreter::wait_for(const std::string& name) {
  Branch& self = *current_branch();
  {
    std::unique_lock lk(mu_);
    self.state = Branch::WaitEvent;
    self.waiting_event = name;
    schedule_next_locked();
    cv_.wait(lk, [&] { return running_branch_ == self.id; });
  }
  check_evaporated(self);
  return self.delivered;
}

// close any tasks the evaporated branch still had open
static void close_open_tasks(std::vector<TaskNode>& tasks, std::vector<int>& stack,
                             size_t base_depth, double time) {
  while (stack.size() > base_depth) {
    TaskNode& n = tasks[stack.back()];
    if (n.status == TaskStatus::Running) {
      n.status = TaskStatus::Evaporated;
      n.end_time = time;
    }
    stack.pop_back();
  }
}

Outcome Interpreter::pursue(std::vector<PlanFn> branches) {
  if (branches.size() < 2) throw std::invalid_argument("pursue needs at least 2 branches");
  Branch& self = *current_branch();
  std::vector<Branch*> kids;
  {
    std::unique_lock lk(mu_);
    for (auto& fn : branches) {
      auto b = std::make_unique<Branch>();
      Branch* bp = b.get();
      bp->id = static_cast<int>(branches_.size());
      bp->parent_branch = self.id;
      bp->wake = clock_;
      bp->task_stack = self.task_stack;
      bp->base_depth = bp->task_stack.size();
      branches_.push_back(std::move(b));
      kids.push_back(bp);
      bp->thread = std::thread([this, bp, fn = std::move(fn)] {
        {
          std::unique_lock lk2(mu_);
          bp->tid = std::this_thread::get_id();
          cv_.wait(lk2, [&] { return running_branch_ == bp->id; });
        }
        try {
          check_evaporated(*bp);
          fn(*this);
        } catch (Evaporated&) {
          bp->evaporated_done = true;
          close_open_tasks(tasks_, bp->task_stack, bp->base_depth, clock_);
        } catch (...) {
          bp->error = std::current_exception();
          close_open_tasks(tasks_, bp->task_stack, bp->base_depth, clock_);
        }
        std::unique_lock lk2(mu_);
        bp->state = Branch::Done;
        bp->finished = true;
        bp->finish_seq = ++finish_counter_;
        Branch& par = *branches_[bp->parent_branch];
        if (par.state == Branch::Blocked) {
          par.state = Branch::Ready;
          par.wake = clock_;
        }
        schedule_next_locked();
      });
    }
  }

  auto evaporate_subtree = [&](auto&& rec, Branch& b) -> void {
    b.evaporate = true;
    if (b.state == Branch::WaitEvent || b.state == Branch::Ready) {
      b.state = Branch::Ready;
      b.wake = clock_;  // resume now so the branch unwinds at the evaporation time
    }
    for (auto& c : branches_)
      if (c->parent_branch == b.id && c->state != Branch::Done) rec(rec, *c);
  };

  Branch* finisher = nullptr;
  bool self_evaporated = false;
  while (true) {
    std::unique_lock lk(mu_);
    if (!finisher && !self_evaporated) {
      for (Branch* k : kids)
        if (k->finished && !k->evaporated_done &&
            (!finisher || k->finish_seq < finisher->finish_seq))
          finisher = k;
      if (finisher || self.evaporate) {
        if (self.evaporate) self_evaporated = true;
        for (Branch* k : kids)
          if (k->state != Branch::Done) evaporate_subtree(evaporate_subtree, *k);
      }
    }
    bool all_done = true;
    for (Branch* k : kids) all_done &= (k->state == Branch::Done);
    if (all_done && (finisher || self_evaporated)) break;
    self.state = Branch::Blocked;
    schedule_next_locked();
    cv_.wait(lk, [&] { return running_branch_ == self.id; });
  }
  for (Branch* k : kids)
    if (k->thread.joinable()) k->thread.join();
  if (self_evaporated) throw Evaporated{};
  if (finisher->error) {
    try {
      std::rethrow_exception(finisher->error);
    } catch (const PlanFailure& f) {
      return Outcome::from(f);
    }
    // non-plan exceptions are programming errors and propagate
  }
  return Outcome::success();
}

Outcome Interpreter::seq(const std::vector<PlanFn>& steps) {
  for (const auto& s : steps) {
    try {
      s(*this);
    } catch (const PlanFailure& f) {
      return Outcome::from(f);
    }
  }
  return Outcome::success();
}

Outcome Interpreter::with_retry(
    int max_retries, const PlanFn& body,
    const std::function<void(const PlanFailure&, int attempt)>& on_failure) {
  if (max_retries < 0) throw std::invalid_argument("with_retry: negative cap");
  for (int attempt = 0;; ++attempt) {
    try {
      body(*this);
      return Outcome::success();
    } catch (const PlanFailure& f) {
      if (attempt >= max_retries) return Outcome::from(f);
      count_retry();
      if (on_failure) on_failure(f, attempt);
    }
  }
}

int Interpreter::begin_task(DesignatorPtr action) {
  Branch& self = *current_branch();
  TaskNode n;
  n.id = static_cast<int>(tasks_.size());
  n.action = std::move(action);
  n.parent = self.task_stack.empty() ? -1 : self.task_stack.back();
  n.status = TaskStatus::Running;
  n.start_time = clock_;
  n.end_time = clock_;
  if (n.parent >= 0) tasks_[n.parent].children.push_back(n.id);
  tasks_.push_back(std::move(n));
  self.task_stack.push_back(static_cast<int>(tasks_.size()) - 1);
  return static_cast<int>(tasks_.size()) - 1;
}

void Interpreter::end_task(int id, const Outcome& outcome) {
  Branch& self = *current_branch();
  while (self.task_stack.size() > self.base_depth && self.task_stack.back() != id)
    self.task_stack.pop_back();
  if (self.task_stack.size() > self.base_depth) self.task_stack.pop_back();
  TaskNode& n = tasks_.at(id);
  n.end_time = clock_;
  n.status = outcome.ok ? TaskStatus::Succeeded : TaskStatus::Failed;
  if (!outcome.ok) {
    n.failure = outcome.category;
    n.failure_message = outcome.message;
  }
}

int Interpreter::current_task() const {
  Branch& self = *current_branch();
  return self.task_stack.empty() ? -1 : self.task_stack.back();
}

void Interpreter::count_retry() {
  int id = current_task();
  if (id >= 0) ++tasks_[id].retries;
}

void Interpreter::register_plan(const std::string& action_type, PlanBody body,
                                std::function<GoalPtr(const Designator&)> goal) {
  plans_[action_type] = {std::move(body), std::move(goal)};
}

bool Interpreter::has_plan(const std::string& action_type) const {
  return plans_.count(action_type) > 0;
}

void Interpreter::perform(const DesignatorPtr& action) {
  const std::string& type = action->get("type").symbol();
  auto it = plans_.find(type);
  if (it == plans_.end())
    throw PlanFailure(FailureCategory::Unrecoverable, "no plan registered for action " + type);
  int id = begin_task(action);
  try {
    GoalPtr goal = it->second.goal ? it->second.goal(*action) : nullptr;
    if (goal && holds(*goal, *world_, robot_)) {
      // goal already achieved: executing is omitted
      end_task(id, Outcome::success());
      return;
    }
    it->second.body(*this, *action);
    if (goal && !holds(*goal, *world_, robot_))
      throw PlanFailure(FailureCategory::Manipulation,
                        "goal not achieved after " + type + ": " + goal->to_text());
    end_task(id, Outcome::success());
  } catch (const PlanFailure& f) {
    Outcome o = Outcome::from(f);
    if (o.task_id < 0) o.task_id = id;
    end_task(id, o);
    o.rethrow();
  }
}

Outcome Interpreter::run(const PlanFn& root) {
  branches_[0]->tid = std::this_thread::get_id();
  running_branch_ = 0;
  try {
    root(*this);
    return Outcome::success();
  } catch (const PlanFailure& f) {
    Outcome o = Outcome::from(f);
    close_open_tasks(tasks_, branches_[0]->task_stack, 0, clock_);
    return o;
  }
}

std::string Interpreter::log_ndjson() const {
  std::ostringstream out;
  for (const TaskNode& n : tasks_) {
    nlohmann::json j{{"record", "task"},   {"id", n.id},
                     {"parent", n.parent}, {"status", to_string(n.status)},
                     {"start", n.start_time}, {"end", n.end_time},
                     {"retries", n.retries}};
    if (n.action) j["action"] = n.action->to_json();
    if (n.failure) {
      j["failure"] = to_string(*n.failure);
      j["message"] = n.failure_message;
    }
    out << j.dump() << "\n";
  }
  for (const Event& e : events_) {
    nlohmann::json j{
        {"record", "event"}, {"name", e.name}, {"payload", e.payload}, {"time", e.time}};
    out << j.dump() << "\n";
  }
  return out.str();
}

}  // namespace hsim
