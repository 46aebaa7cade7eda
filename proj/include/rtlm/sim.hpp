#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <queue>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "error.hpp"
#include "model_profile.hpp"
#include "sched.hpp"
#include "workload.hpp"

namespace rtlm::sim {

using sched::Executor;
using sched::Task;

// Simulated time runs on integer microseconds.
using Micros = std::int64_t;

inline Micros to_us(double seconds) { return static_cast<Micros>(std::llround(seconds * 1e6)); }
inline double to_s(Micros us) { return static_cast<double>(us) / 1e6; }

// Latency model. A batch decodes in lock-step until its longest member ends.
inline double exec_latency_single(int true_output_len, Executor ex, const ModelProfile& p) {
  const double gpu = p.base_latency_gpu + p.eta * static_cast<double>(true_output_len);
  return ex == Executor::kGpu ? gpu : p.cpu_slowdown * gpu;
}

inline double exec_latency_batch(const std::vector<int>& lens, const ModelProfile& p) {
  if (lens.empty()) return 0.0;
  const int longest = *std::max_element(lens.begin(), lens.end());
  return p.batch_setup + exec_latency_single(longest, Executor::kGpu, p);
}

struct SimConfig {
  double xi = 2.0;                 // arrival wait interval, seconds
  int cpu_lanes = 4;
  double decision_overhead = 0.0;  // seconds per scheduled task
  std::optional<double> horizon;   // stop time; unset runs to completion

  void validate() const {
    if (!(xi >= 0.0)) throw ConfigError("xi must be >= 0");
    if (cpu_lanes < 1) throw ConfigError("cpu_lanes must be >= 1");
    if (!(decision_overhead >= 0.0)) throw ConfigError("decision overhead must be >= 0");
    if (horizon && !(*horizon >= 0.0)) throw ConfigError("horizon must be >= 0");
  }
};

// Tasks as the scheduler sees them, plus the hidden ground truth the executor
// needs. true_output_len[i] belongs to tasks[i].
struct SimInput {
  std::vector<Task> tasks;
  std::vector<int> true_output_len;
};

struct TaskLog {
  std::uint64_t id = 0;
  Micros arrival = 0;
  Micros deadline = 0;
  double uncertainty = 0.0;
  double priority = 0.0;
  Executor executor = Executor::kGpu;
  std::int64_t batch_id = -1;  // -1: never dispatched
  Micros start = -1;
  Micros end = -1;             // -1: unfinished at the horizon

  bool done() const { return end >= 0; }
  bool missed() const { return !done() || end > deadline; }
  Micros response() const { return end - arrival; }
};

struct SimResult {
  std::vector<TaskLog> log;  // arrival order
  std::size_t unfinished = 0;
  bool horizon_exceeded = false;
  std::size_t batches = 0;
  std::size_t consolidations = 0;  // consolidate invocations
};

namespace detail {

enum class EventKind : int { kBatchDone = 0, kArrival = 1, kFlush = 2 };

struct Event {
  Micros time;
  EventKind kind;
  std::uint64_t id;
  // Min-heap on (time, kind, id).
  bool operator>(const Event& o) const {
    if (time != o.time) return time > o.time;
    if (kind != o.kind) return static_cast<int>(kind) > static_cast<int>(o.kind);
    return id > o.id;
  }
};

struct RunningBatch {
  Executor executor;
  std::vector<std::size_t> members;  // indices into the input
  int lane = -1;
};

}  // namespace detail

// Runs the online scheduler against the latency model. Tasks must be sorted by
// arrival; each task's window_close is derived here from the wait interval.
inline SimResult run_sim(const SimInput& input, const sched::SchedulerConfig& cfg, const ModelProfile& profile,
                         const SimConfig& sim_cfg = {}) {
  sim_cfg.validate();
  const std::size_t n = input.tasks.size();
  if (input.true_output_len.size() != n) throw Error("run_sim: true lengths do not match the task list");
  std::vector<double> arrivals(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (input.true_output_len[i] < 1) throw InvalidRecord("task " + std::to_string(input.tasks[i].id) +
                                                          ": true output length must be >= 1");
    arrivals[i] = to_s(to_us(input.tasks[i].arrival));
    if (i > 0 && arrivals[i] < arrivals[i - 1]) throw Error("run_sim: arrivals must be non-decreasing");
  }
  std::vector<double> window_close(n);
  for (const auto& e : workload::apply_wait_interval(arrivals, sim_cfg.xi)) {
    for (std::size_t i = e.first; i < e.last; ++i) window_close[i] = e.close;
  }

  sched::Scheduler scheduler(cfg, profile);
  std::unordered_map<std::uint64_t, std::size_t> index;
  index.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!index.emplace(input.tasks[i].id, i).second) {
      throw InvalidRecord("duplicate task id " + std::to_string(input.tasks[i].id));
    }
  }

  SimResult res;
  res.log.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& l = res.log[i];
    l.id = input.tasks[i].id;
    l.arrival = to_us(arrivals[i]);
    l.deadline = to_us(input.tasks[i].deadline);
    l.uncertainty = input.tasks[i].uncertainty.value;
  }

  std::priority_queue<detail::Event, std::vector<detail::Event>, std::greater<>> events;
  for (std::size_t i = 0; i < n; ++i) events.push({to_us(arrivals[i]), detail::EventKind::kArrival, i});

  std::unordered_map<std::uint64_t, detail::RunningBatch> running;
  std::uint64_t next_batch = 0;
  bool gpu_busy = false;
  std::vector<bool> lane_busy(static_cast<std::size_t>(sim_cfg.cpu_lanes), false);
  std::deque<std::size_t> cpu_queue;
  std::optional<Micros> pending_flush;
  std::size_t arrived = 0;
  const Micros horizon = sim_cfg.horizon ? to_us(*sim_cfg.horizon) : std::numeric_limits<Micros>::max();

  auto start_batch = [&](Executor ex, std::vector<std::size_t> members, Micros now, int lane) {
    std::vector<int> lens;
    for (auto i : members) lens.push_back(input.true_output_len[i]);
    double lat = ex == Executor::kGpu ? exec_latency_batch(lens, profile)
                                      : exec_latency_single(lens.front(), Executor::kCpu, profile);
    lat += sim_cfg.decision_overhead * static_cast<double>(members.size());
    const Micros end = now + to_us(lat);
    const auto bid = next_batch++;
    for (auto i : members) {
      auto& l = res.log[i];
      l.executor = ex;
      l.batch_id = static_cast<std::int64_t>(bid);
      l.start = now;
      scheduler.mark_started(l.id, to_s(now));
    }
    running.emplace(bid, detail::RunningBatch{ex, std::move(members), lane});
    events.push({end, detail::EventKind::kBatchDone, bid});
    ++res.batches;
  };

  auto start_cpu = [&](Micros now) {
    for (std::size_t lane = 0; lane < lane_busy.size() && !cpu_queue.empty(); ++lane) {
      if (lane_busy[lane]) continue;
      lane_busy[lane] = true;
      const auto i = cpu_queue.front();
      cpu_queue.pop_front();
      start_batch(Executor::kCpu, {i}, now, static_cast<int>(lane));
    }
  };

  auto dispatch = [&](Micros now) {
    std::optional<double> next;
    if (arrived < n) next = arrivals[arrived];
    for (auto& plan : scheduler.schedule_step(to_s(now), !gpu_busy, next)) {
      std::vector<std::size_t> members;
      for (auto id : plan.members) members.push_back(index.at(id));
      if (plan.executor == Executor::kCpu) {
        for (auto i : members) cpu_queue.push_back(i);
      } else {
        gpu_busy = true;
        start_batch(Executor::kGpu, std::move(members), now, -1);
      }
    }
    start_cpu(now);
    if (!gpu_busy) {
      if (const auto ft = scheduler.flush_time()) {
        const Micros at = std::max(now + 1, to_us(*ft));
        if (!pending_flush || *pending_flush != at) {
          pending_flush = at;
          events.push({at, detail::EventKind::kFlush, 0});
        }
      }
    }
  };

  while (!events.empty() && events.top().time <= horizon) {
    const Micros now = events.top().time;
    while (!events.empty() && events.top().time == now) {
      const auto ev = events.top();
      events.pop();
      switch (ev.kind) {
        case detail::EventKind::kBatchDone: {
          auto node = running.extract(ev.id);
          auto& b = node.mapped();
          for (auto i : b.members) {
            res.log[i].end = now;
            scheduler.mark_done(res.log[i].id, to_s(now));
          }
          if (b.executor == Executor::kGpu) {
            gpu_busy = false;
          } else {
            lane_busy[static_cast<std::size_t>(b.lane)] = false;
          }
          break;
        }
        case detail::EventKind::kArrival: {
          Task t = input.tasks[ev.id];
          t.arrival = arrivals[ev.id];
          t.window_close = window_close[ev.id];
          scheduler.admit(std::move(t));
          ++arrived;
          res.log[ev.id].priority = scheduler.task(res.log[ev.id].id).priority;
          break;
        }
        case detail::EventKind::kFlush:
          if (pending_flush && *pending_flush == now) pending_flush.reset();
          break;
      }
    }
    dispatch(now);
  }

  for (const auto& l : res.log) {
    if (!l.done()) ++res.unfinished;
  }
  res.horizon_exceeded = res.unfinished > 0;
  res.consolidations = scheduler.consolidate_calls();
  return res;
}

// ---------------------------------------------------------------------------
// Per-task log CSV
// ---------------------------------------------------------------------------

inline constexpr std::string_view kLogHeader =
    "task_id,arrival,deadline,uncertainty,priority,executor,batch_id,start,end,response,missed";

namespace detail {

inline std::string fmt6(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::string fmt_us(Micros us) {
  // Exact decimal rendering of an integer microsecond count.
  char buf[48];
  const bool neg = us < 0;
  const auto a = neg ? -us : us;
  std::snprintf(buf, sizeof buf, "%s%lld.%06lld", neg ? "-" : "", static_cast<long long>(a / 1000000),
                static_cast<long long>(a % 1000000));
  return buf;
}

inline Micros parse_us(const std::string& s, std::size_t line) {
  // Fixed-point parse so "12.000001" maps back to exactly 12000001.
  std::size_t pos = 0;
  bool neg = false;
  if (pos < s.size() && (s[pos] == '-' || s[pos] == '+')) neg = s[pos++] == '-';
  Micros whole = 0, frac = 0;
  int digits = 0;
  bool any = false;
  for (; pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos])); ++pos, any = true) {
    whole = whole * 10 + (s[pos] - '0');
  }
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    for (; pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos])); ++pos, any = true) {
      if (digits < 6) {
        frac = frac * 10 + (s[pos] - '0');
        ++digits;
      }
    }
  }
  if (!any || pos != s.size()) throw ParseError(line, "bad time value '" + s + "'");
  while (digits++ < 6) frac *= 10;
  const Micros v = whole * 1000000 + frac;
  return neg ? -v : v;
}

}  // namespace detail

// `comments` become leading '# ' lines (resolved config, seed).
inline void write_task_log(const SimResult& res, std::ostream& out, const std::vector<std::string>& comments = {}) {
  for (const auto& c : comments) out << "# " << c << '\n';
  out << kLogHeader << '\n';
  for (const auto& l : res.log) {
    out << l.id << ',' << detail::fmt_us(l.arrival) << ',' << detail::fmt_us(l.deadline) << ','
        << detail::fmt6(l.uncertainty) << ',' << detail::fmt6(l.priority) << ',';
    if (l.batch_id >= 0) out << sched::to_string(l.executor);
    out << ',' << l.batch_id << ',';
    if (l.start >= 0) out << detail::fmt_us(l.start);
    out << ',';
    if (l.done()) out << detail::fmt_us(l.end) << ',' << detail::fmt_us(l.response());
    else out << ',';
    out << ',' << (l.missed() ? 1 : 0) << '\n';
  }
}

inline std::vector<TaskLog> read_task_log(std::istream& in) {
  std::vector<TaskLog> out;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != kLogHeader) throw ParseError(lineno, "unexpected task log header");
      header = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 11) throw ParseError(lineno, "expected 11 fields, got " + std::to_string(f.size()));
    TaskLog l;
    try {
      l.id = std::stoull(f[0]);
      l.uncertainty = std::stod(f[3]);
      l.priority = std::stod(f[4]);
      l.batch_id = std::stoll(f[6]);
    } catch (const std::exception&) {
      throw ParseError(lineno, "bad numeric field");
    }
    l.arrival = detail::parse_us(f[1], lineno);
    l.deadline = detail::parse_us(f[2], lineno);
    if (f[5] == "cpu") l.executor = Executor::kCpu;
    else if (f[5] == "gpu" || f[5].empty()) l.executor = Executor::kGpu;
    else throw ParseError(lineno, "bad executor '" + f[5] + "'");
    l.start = f[7].empty() ? -1 : detail::parse_us(f[7], lineno);
    l.end = f[8].empty() ? -1 : detail::parse_us(f[8], lineno);
    out.push_back(l);
  }
  if (!header) throw ParseError(lineno, "missing task log header");
  return out;
}

}  // namespace rtlm::sim
