#pragma once

// Small hand-checkable schedules shared by the unit tests and the acceptance
// binary. Each task's uncertainty is its exact output length, every latency
// term other than eta * len is zero, so completion times are integers.

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <rtlm/rng.hpp>
#include <rtlm/sched.hpp>
#include <rtlm/sim.hpp>

namespace rtlm::fixtures {

inline ModelProfile unit_profile(int batch_size, double u_max) {
  ModelProfile p;
  p.name = "unit";
  p.eta = 1.0;
  p.mu = 1.0;
  p.batch_size = batch_size;
  p.tau = 1e9;
  p.u_max = u_max;
  p.base_latency_gpu = 0.0;
  p.batch_setup = 0.0;
  p.cpu_slowdown = 1.0;
  return p;
}

// All tasks released at t = 0, ids 1..n.
inline sim::SimInput simultaneous(const std::vector<int>& lens, const std::vector<int>& deadlines, double u_max) {
  sim::SimInput in;
  for (std::size_t i = 0; i < lens.size(); ++i) {
    sched::Task t;
    t.id = i + 1;
    t.arrival = 0.0;
    t.deadline = deadlines[i];
    t.input_len = 1;
    t.uncertainty = estimator::UncertaintyScore::from_value(lens[i], u_max);
    in.tasks.push_back(t);
    in.true_output_len.push_back(lens[i]);
  }
  return in;
}

inline sched::SchedulerConfig policy_cfg(sched::Policy p, bool consolidation, double b = 1.6) {
  sched::SchedulerConfig c;
  c.policy = p;
  c.alpha = 1.0;
  c.lambda = 1.5;
  c.b = b;
  c.consolidation = consolidation;
  c.offloading = false;
  return c;
}

inline std::size_t count_misses(const sim::SimResult& r) {
  return static_cast<std::size_t>(std::count_if(r.log.begin(), r.log.end(), [](const auto& l) { return l.missed(); }));
}

inline std::size_t sim_misses(const sim::SimInput& in, const sched::SchedulerConfig& cfg, const ModelProfile& p) {
  sim::SimConfig sc;
  sc.xi = 0.0;
  sc.cpu_lanes = 1;
  return count_misses(sim::run_sim(in, cfg, p, sc));
}

// Serial unit batches: misses when tasks run back to back in pop order.
inline std::size_t serial_misses(const std::vector<int>& lens, const std::vector<int>& deadlines,
                                 const sched::SchedulerConfig& cfg, const ModelProfile& p) {
  const auto in = simultaneous(lens, deadlines, p.u_max);
  std::vector<sched::Task> ts = in.tasks;
  for (auto& t : ts) {
    const auto pv = sched::compute_priority(t, cfg, p);
    t.priority = pv.priority;
    t.overdue = pv.overdue;
    t.slack = pv.slack;
  }
  std::sort(ts.begin(), ts.end(), sched::pops_before);
  long clock = 0;
  std::size_t missed = 0;
  for (const auto& t : ts) {
    clock += lens[t.id - 1];
    if (clock > deadlines[t.id - 1]) ++missed;
  }
  return missed;
}

struct Instance {
  std::vector<int> lens;
  std::vector<int> deadlines;
};

// Serial five-task instance with EDF/LUF/UP misses of 2/3/1. Exhaustive in
// lexicographic order over non-decreasing lengths <= 10 and deadlines <= 30;
// the first hit is returned. A deadline at or past the total work is never
// missed, so deadlines above min(30, total) are skipped as duplicates.
inline std::optional<Instance> search_serial_fixture(std::size_t* examined = nullptr) {
  const auto edf = policy_cfg(sched::Policy::kEdf, false);
  const auto luf = policy_cfg(sched::Policy::kLuf, false);
  const auto up = policy_cfg(sched::Policy::kUp, false);
  std::size_t seen = 0;
  std::vector<int> e(5), d(5);
  for (e[0] = 1; e[0] <= 10; ++e[0])
    for (e[1] = e[0]; e[1] <= 10; ++e[1])
      for (e[2] = e[1]; e[2] <= 10; ++e[2])
        for (e[3] = e[2]; e[3] <= 10; ++e[3])
          for (e[4] = e[3]; e[4] <= 10; ++e[4]) {
            const auto p = unit_profile(1, e[4]);
            const int top = std::min(30, e[0] + e[1] + e[2] + e[3] + e[4]);
            for (d[0] = 1; d[0] <= top; ++d[0])
              for (d[1] = 1; d[1] <= top; ++d[1])
                for (d[2] = 1; d[2] <= top; ++d[2])
                  for (d[3] = 1; d[3] <= top; ++d[3])
                    for (d[4] = 1; d[4] <= top; ++d[4]) {
                      ++seen;
                      if (serial_misses(e, d, up, p) != 1) continue;
                      if (serial_misses(e, d, edf, p) != 2) continue;
                      if (serial_misses(e, d, luf, p) != 3) continue;
                      if (examined) *examined = seen;
                      return Instance{e, d};
                    }
          }
  if (examined) *examined = seen;
  return std::nullopt;
}

// Eight simultaneous tasks with C_f = 4: EDF batching with a plain cut misses
// 4, UP with consolidation (b = 2, so all eight are staged) misses 2. Seeded
// random search over lengths <= 10 and deadlines <= 30.
inline std::optional<Instance> search_batch_fixture(std::uint64_t seed = 1, std::size_t budget = 200000,
                                                    std::size_t* examined = nullptr) {
  const auto oblivious = policy_cfg(sched::Policy::kEdf, false);
  const auto aware = policy_cfg(sched::Policy::kUp, true, 2.0);
  Rng rng(seed, "fixture");
  for (std::size_t i = 1; i <= budget; ++i) {
    Instance inst;
    for (int k = 0; k < 8; ++k) {
      inst.lens.push_back(1 + static_cast<int>(rng.below(10)));
      inst.deadlines.push_back(1 + static_cast<int>(rng.below(30)));
    }
    const double u_max = *std::max_element(inst.lens.begin(), inst.lens.end());
    const auto p = unit_profile(4, u_max);
    const auto in = simultaneous(inst.lens, inst.deadlines, u_max);
    if (sim_misses(in, aware, p) != 2) continue;
    if (sim_misses(in, oblivious, p) != 4) continue;
    if (examined) *examined = i;
    return inst;
  }
  if (examined) *examined = budget;
  return std::nullopt;
}

}  // namespace rtlm::fixtures
