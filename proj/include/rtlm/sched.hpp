#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "error.hpp"
#include "estimator.hpp"
#include "model_profile.hpp"

namespace rtlm::sched {

using estimator::UncertaintyScore;

enum class Policy { kFifo, kEdf, kLuf, kMuf, kSlack, kUp };

inline std::string_view to_string(Policy p) {
  switch (p) {
    case Policy::kFifo: return "FIFO";
    case Policy::kEdf: return "EDF";
    case Policy::kLuf: return "LUF";
    case Policy::kMuf: return "MUF";
    case Policy::kSlack: return "SLACK";
    case Policy::kUp: return "UP";
  }
  return "?";
}

inline Policy parse_policy(std::string_view s) {
  std::string u(s);
  for (auto& c : u) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (u == "FIFO") return Policy::kFifo;
  if (u == "EDF") return Policy::kEdf;
  if (u == "LUF") return Policy::kLuf;
  if (u == "MUF") return Policy::kMuf;
  if (u == "SLACK") return Policy::kSlack;
  if (u == "UP" || u == "EUDF" || u == "RT-LM") return Policy::kUp;
  throw ConfigError("unknown policy '" + std::string(s) + "'");
}

enum class NumeratorMode { kNormalized, kRaw };

struct SchedulerConfig {
  Policy policy = Policy::kUp;
  double alpha = 1.0;
  double lambda = 1.5;
  double b = 1.6;
  double k = 0.9;
  NumeratorMode numerator_mode = NumeratorMode::kNormalized;
  // Unset: on for UP and SLACK, off for the baselines.
  std::optional<bool> consolidation;
  std::optional<bool> offloading;

  bool consolidation_enabled() const {
    return consolidation.value_or(policy == Policy::kUp || policy == Policy::kSlack);
  }
  bool offloading_enabled() const { return offloading.value_or(policy == Policy::kUp || policy == Policy::kSlack); }

  void validate() const {
    if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
    if (!(lambda >= 1.0)) throw ConfigError("lambda must be >= 1");
    if (!(b >= 1.0)) throw ConfigError("b must be >= 1");
    if (!(k > 0.0 && k < 1.0)) throw ConfigError("k must lie in (0, 1)");
  }

  // floor(b * C_f) for consolidating policies, C_f otherwise.
  std::size_t staging_threshold(int batch_size) const {
    if (!consolidation_enabled()) return static_cast<std::size_t>(batch_size);
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(b * batch_size + 1e-9)));
  }
};

enum class TaskState { kQueued, kStaged, kBatchedGpu, kOffloadedCpu, kDone };

// Scheduler-visible task. The trace's true output length is deliberately not a
// member; only the simulator's executor sees it.
struct Task {
  std::uint64_t id = 0;
  std::string text;
  double arrival = 0.0;   // r_J, seconds
  double deadline = 0.0;  // d_J, seconds
  int input_len = 1;      // |J|, tokens
  UncertaintyScore uncertainty;
  double priority = 0.0;
  bool overdue = false;   // estimated slack <= kOverdueSlack
  double slack = 0.0;     // zeta_J; only meaningful for slack-based policies
  double window_close = 0.0;  // end of the task's arrival window
  TaskState state = TaskState::kQueued;
  double start = -1.0;
  double end = -1.0;
};

inline constexpr double kOverdueSlack = 1e-6;

// d_J = r_J + tightness * mu_f * |J|. A deadline supplied with the trace wins.
inline double assign_deadline(double arrival, int input_len, const ModelProfile& profile, double tightness,
                              std::optional<double> user_deadline = std::nullopt) {
  if (user_deadline) return *user_deadline;
  if (input_len < 1) throw Error("input length must be >= 1 to assign a deadline");
  return arrival + tightness * profile.mu * static_cast<double>(input_len);
}

struct PriorityValue {
  double priority = 0.0;
  bool overdue = false;
  double slack = 0.0;
};

inline double estimated_slack(const Task& t, const ModelProfile& profile) {
  return t.deadline - t.arrival - profile.eta * t.uncertainty.value;
}

// p = 1 / zeta, zeta = d - r - eta * u.
inline PriorityValue priority_slack(const Task& t, const ModelProfile& profile) {
  const double zeta = estimated_slack(t, profile);
  return {1.0 / zeta, zeta <= kOverdueSlack, zeta};
}

// p = (1 - alpha * u_term) / zeta.
inline PriorityValue priority_up(const Task& t, const SchedulerConfig& cfg, const ModelProfile& profile) {
  const double zeta = estimated_slack(t, profile);
  const double u_term =
      cfg.numerator_mode == NumeratorMode::kNormalized ? t.uncertainty.normalized : t.uncertainty.value;
  return {(1.0 - cfg.alpha * u_term) / zeta, zeta <= kOverdueSlack, zeta};
}

inline double priority_baseline(const Task& t, Policy policy) {
  switch (policy) {
    case Policy::kFifo: return -t.arrival;
    case Policy::kEdf: return -t.deadline;
    case Policy::kLuf: return -t.uncertainty.value;
    case Policy::kMuf: return t.uncertainty.value;
    default: throw Error("priority_baseline called with a slack-based policy");
  }
}

inline PriorityValue compute_priority(const Task& t, const SchedulerConfig& cfg, const ModelProfile& profile) {
  switch (cfg.policy) {
    case Policy::kSlack: return priority_slack(t, profile);
    case Policy::kUp: return priority_up(t, cfg, profile);
    default: return {priority_baseline(t, cfg.policy), false, 0.0};
  }
}

// True if `a` pops before `b`. Overdue tasks come first, most negative slack
// first; then higher priority; then earlier arrival; then lower id.
inline bool pops_before(const Task& a, const Task& b) {
  if (a.overdue != b.overdue) return a.overdue;
  if (a.overdue && a.slack != b.slack) return a.slack < b.slack;
  if (!a.overdue && a.priority != b.priority) return a.priority > b.priority;
  if (a.arrival != b.arrival) return a.arrival < b.arrival;
  return a.id < b.id;
}

enum class Executor { kGpu, kCpu };

inline std::string_view to_string(Executor e) { return e == Executor::kGpu ? "gpu" : "cpu"; }

struct BatchPlan {
  Executor executor = Executor::kGpu;
  std::vector<std::uint64_t> members;
  double formed_at = 0.0;
};

// CPU iff the estimate is strictly above the threshold.
inline Executor offload_decision(const UncertaintyScore& u, double tau) {
  return u.value > tau ? Executor::kCpu : Executor::kGpu;
}

struct Consolidation {
  std::vector<std::uint64_t> batch;     // ascending uncertainty
  std::vector<std::uint64_t> returned;  // everything else, in input order
};

struct StagedEntry {
  std::uint64_t id;
  double u;
};

// Sorts the staged tasks by ascending uncertainty (stable, so the incoming
// priority order breaks ties) and accepts a prefix while the batch holds fewer
// than `batch_size` tasks and each uncertainty is at most lambda times the
// previous accepted one.
inline Consolidation consolidate(std::vector<StagedEntry> staged, double lambda, int batch_size) {
  Consolidation out;
  if (staged.empty()) return out;
  std::vector<StagedEntry> sorted = staged;
  std::stable_sort(sorted.begin(), sorted.end(), [](const StagedEntry& a, const StagedEntry& b) { return a.u < b.u; });
  std::size_t count = 1;
  double prev = sorted[0].u;
  while (count < sorted.size() && count < static_cast<std::size_t>(batch_size) && sorted[count].u <= lambda * prev) {
    prev = sorted[count].u;
    ++count;
  }
  std::set<std::uint64_t> taken;
  for (std::size_t i = 0; i < count; ++i) {
    out.batch.push_back(sorted[i].id);
    taken.insert(sorted[i].id);
  }
  for (const auto& e : staged) {
    if (!taken.count(e.id)) out.returned.push_back(e.id);
  }
  return out;
}

// Online phase: a priority queue, a staging set feeding consolidation, and the
// CPU offload path. One mutator at a time.
class Scheduler {
 public:
  Scheduler(SchedulerConfig cfg, ModelProfile profile) : cfg_(cfg), profile_(std::move(profile)) {
    cfg_.validate();
    profile_.validate();
  }
  Scheduler(const Scheduler&) = delete;
  Scheduler& operator=(const Scheduler&) = delete;

  const SchedulerConfig& config() const { return cfg_; }
  const ModelProfile& profile() const { return profile_; }

  // Admits a task with its uncertainty already estimated.
  void admit(Task task) {
    const auto pv = compute_priority(task, cfg_, profile_);
    task.priority = pv.priority;
    task.overdue = pv.overdue;
    task.slack = pv.slack;
    task.state = TaskState::kQueued;
    const auto id = task.id;
    auto [it, inserted] = tasks_.emplace(id, std::move(task));
    if (!inserted) throw Error("duplicate task id " + std::to_string(id));
    queue_.insert(id);
  }

  const Task& task(std::uint64_t id) const { return tasks_.at(id); }
  Task& task(std::uint64_t id) { return tasks_.at(id); }

  std::size_t queued() const { return queue_.size(); }
  std::size_t staged() const { return staging_.size(); }
  bool idle() const { return queue_.empty() && staging_.empty(); }
  std::size_t consolidate_calls() const { return consolidate_calls_; }

  // Time at which the staging set may be flushed: the earliest arrival-window
  // close among staged tasks.
  std::optional<double> flush_time() const {
    if (staging_.empty()) return std::nullopt;
    double t = std::numeric_limits<double>::infinity();
    for (auto id : staging_) t = std::min(t, tasks_.at(id).window_close);
    return t;
  }

  // Pops tasks in priority order and returns the batches to start now.
  //  - with offloading, every queued task above tau becomes a CPU plan;
  //  - with an idle GPU, queued tasks move to staging until it holds the
  //    staging threshold, which triggers consolidation (or a plain cut at C_f);
  //  - if the queue drains first, staging is flushed once `now` reaches its
  //    flush time, or right away when no further arrival can join the window
  //    (`next_arrival` unset or later than the flush time).
  std::vector<BatchPlan> schedule_step(double now, bool gpu_idle, std::optional<double> next_arrival = std::nullopt) {
    std::vector<BatchPlan> plans;
    if (cfg_.offloading_enabled()) {
      for (auto it = queue_.begin(); it != queue_.end();) {
        Task& t = tasks_.at(*it);
        if (offload_decision(t.uncertainty, profile_.tau) == Executor::kCpu) {
          t.state = TaskState::kOffloadedCpu;
          plans.push_back({Executor::kCpu, {t.id}, now});
          it = queue_.erase(it);
        } else {
          ++it;
        }
      }
    }
    if (!gpu_idle) return plans;

    const std::size_t threshold = cfg_.staging_threshold(profile_.batch_size);
    while (staging_.size() < threshold && !queue_.empty()) {
      const auto id = *queue_.begin();
      queue_.erase(queue_.begin());
      tasks_.at(id).state = TaskState::kStaged;
      staging_.push_back(id);
    }
    const bool full = staging_.size() >= threshold;
    const auto ft = flush_time();
    const bool window_done = ft && (now >= *ft || !next_arrival || *next_arrival > *ft);
    if (full || (!staging_.empty() && window_done)) {
      plans.push_back(form_gpu_batch(now));
    }
    return plans;
  }

  void mark_started(std::uint64_t id, double start) { tasks_.at(id).start = start; }
  void mark_done(std::uint64_t id, double end) {
    Task& t = tasks_.at(id);
    t.end = end;
    t.state = TaskState::kDone;
  }

 private:
  struct QueueOrder {
    const std::unordered_map<std::uint64_t, Task>* tasks;
    bool operator()(std::uint64_t a, std::uint64_t b) const { return pops_before(tasks->at(a), tasks->at(b)); }
  };

  BatchPlan form_gpu_batch(double now) {
    BatchPlan plan{Executor::kGpu, {}, now};
    std::vector<std::uint64_t> back;
    if (cfg_.consolidation_enabled()) {
      std::vector<StagedEntry> entries;
      entries.reserve(staging_.size());
      for (auto id : staging_) entries.push_back({id, tasks_.at(id).uncertainty.value});
      auto c = consolidate(std::move(entries), cfg_.lambda, profile_.batch_size);
      ++consolidate_calls_;
      plan.members = std::move(c.batch);
      back = std::move(c.returned);
    } else {
      const auto cut = std::min<std::size_t>(staging_.size(), static_cast<std::size_t>(profile_.batch_size));
      plan.members.assign(staging_.begin(), staging_.begin() + static_cast<std::ptrdiff_t>(cut));
      back.assign(staging_.begin() + static_cast<std::ptrdiff_t>(cut), staging_.end());
    }
    for (auto id : plan.members) tasks_.at(id).state = TaskState::kBatchedGpu;
    for (auto id : back) {
      tasks_.at(id).state = TaskState::kQueued;
      queue_.insert(id);
    }
    staging_.clear();
    return plan;
  }

  SchedulerConfig cfg_;
  ModelProfile profile_;
  std::unordered_map<std::uint64_t, Task> tasks_;
  std::set<std::uint64_t, QueueOrder> queue_{QueueOrder{&tasks_}};
  std::vector<std::uint64_t> staging_;  // in pop order
  std::size_t consolidate_calls_ = 0;
};

}  // namespace rtlm::sched
