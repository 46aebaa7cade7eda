#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "sim.hpp"

namespace rtlm::metrics {

using sim::Micros;
using sim::TaskLog;

struct ResponseStats {
  double mean = 0.0;
  double max = 0.0;
  double p95 = 0.0;
  std::size_t count = 0;
};

// Nearest-rank percentile over integer microseconds: rank = ceil(q * n).
inline Micros nearest_rank(std::vector<Micros> v, double q) {
  if (v.empty()) throw EmptyLog("percentile of an empty sample");
  const auto n = v.size();
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n) - 1e-12));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(rank - 1), v.end());
  return v[rank - 1];
}

inline ResponseStats response_stats(const std::vector<TaskLog>& log) {
  std::vector<Micros> r;
  r.reserve(log.size());
  for (const auto& l : log) {
    if (l.done()) r.push_back(l.response());
  }
  if (r.empty()) throw EmptyLog("no completed tasks in the log");
  ResponseStats s;
  s.count = r.size();
  // Integer sum keeps the mean independent of accumulation order.
  Micros total = 0;
  for (auto x : r) total += x;
  s.mean = static_cast<double>(total) / static_cast<double>(r.size()) / 1e6;
  s.max = sim::to_s(*std::max_element(r.begin(), r.end()));
  s.p95 = sim::to_s(nearest_rank(std::move(r), 0.95));
  return s;
}

// Unfinished tasks count as misses.
inline double miss_ratio(const std::vector<TaskLog>& log) {
  if (log.empty()) return 0.0;
  std::size_t m = 0;
  for (const auto& l : log) m += l.missed() ? 1 : 0;
  return static_cast<double>(m) / static_cast<double>(log.size());
}

struct Throughput {
  double per_minute = 0.0;
  std::vector<std::size_t> series;  // completions in each minute since the first arrival
};

inline Micros first_arrival(const std::vector<TaskLog>& log) {
  Micros t = std::numeric_limits<Micros>::max();
  for (const auto& l : log) t = std::min(t, l.arrival);
  return t;
}

// First arrival to last completion.
inline Micros makespan(const std::vector<TaskLog>& log) {
  if (log.empty()) return 0;
  Micros last = -1;
  for (const auto& l : log) last = std::max(last, l.end);
  if (last < 0) return 0;
  return last - first_arrival(log);
}

inline Throughput throughput(const std::vector<TaskLog>& log) {
  Throughput t;
  const Micros span = makespan(log);
  std::size_t done = 0;
  const Micros t0 = log.empty() ? 0 : first_arrival(log);
  for (const auto& l : log) {
    if (!l.done()) continue;
    ++done;
    const auto minute = static_cast<std::size_t>((l.end - t0) / 60'000'000);
    if (t.series.size() <= minute) t.series.resize(minute + 1, 0);
    ++t.series[minute];
  }
  if (done > 0 && span > 0) t.per_minute = static_cast<double>(done) / (static_cast<double>(span) / 60e6);
  return t;
}

// Length of the union of [start, end) intervals.
inline Micros union_length(std::vector<std::pair<Micros, Micros>> iv) {
  std::sort(iv.begin(), iv.end());
  Micros total = 0, cur_s = 0, cur_e = -1;
  bool open = false;
  for (auto [s, e] : iv) {
    if (!open || s > cur_e) {
      if (open) total += cur_e - cur_s;
      cur_s = s;
      cur_e = e;
      open = true;
    } else {
      cur_e = std::max(cur_e, e);
    }
  }
  if (open) total += cur_e - cur_s;
  return total;
}

struct Utilization {
  double gpu = 0.0;
  double cpu = 0.0;
};

// Busy fraction of the makespan per executor; CPU counts time any lane is busy.
inline Utilization utilization(const std::vector<TaskLog>& log) {
  Utilization u;
  const Micros span = makespan(log);
  if (span <= 0) return u;
  std::map<std::int64_t, std::pair<Micros, Micros>> gpu, cpu;
  for (const auto& l : log) {
    if (!l.done()) continue;
    auto& m = l.executor == sim::Executor::kGpu ? gpu : cpu;
    m[l.batch_id] = {l.start, l.end};
  }
  auto frac = [&](const std::map<std::int64_t, std::pair<Micros, Micros>>& m) {
    std::vector<std::pair<Micros, Micros>> iv;
    for (const auto& [id, p] : m) iv.push_back(p);
    return static_cast<double>(union_length(std::move(iv))) / static_cast<double>(span);
  };
  u.gpu = frac(gpu);
  u.cpu = frac(cpu);
  return u;
}

struct SimReport {
  std::string policy;
  std::uint64_t seed = 0;
  std::string config_fingerprint;
  std::string workload_fingerprint;
  std::size_t tasks = 0;
  std::size_t completed = 0;
  std::size_t unfinished = 0;
  ResponseStats response;
  double miss_ratio = 0.0;
  Throughput throughput;
  Utilization utilization;
  double makespan = 0.0;
  std::vector<double> responses;  // per completed task, log order

  bool operator==(const SimReport& o) const {
    return policy == o.policy && seed == o.seed && config_fingerprint == o.config_fingerprint &&
           workload_fingerprint == o.workload_fingerprint && tasks == o.tasks && completed == o.completed &&
           unfinished == o.unfinished && response.mean == o.response.mean && response.max == o.response.max &&
           response.p95 == o.response.p95 && response.count == o.response.count && miss_ratio == o.miss_ratio &&
           throughput.per_minute == o.throughput.per_minute && throughput.series == o.throughput.series &&
           utilization.gpu == o.utilization.gpu && utilization.cpu == o.utilization.cpu && makespan == o.makespan &&
           responses == o.responses;
  }
};

// Everything except the identifying fields is a pure function of the log.
inline SimReport summarize(const std::vector<TaskLog>& log) {
  SimReport r;
  r.tasks = log.size();
  for (const auto& l : log) {
    if (l.done()) {
      ++r.completed;
      r.responses.push_back(sim::to_s(l.response()));
    }
  }
  r.unfinished = r.tasks - r.completed;
  if (r.completed > 0) r.response = response_stats(log);
  r.miss_ratio = miss_ratio(log);
  r.throughput = throughput(log);
  r.utilization = utilization(log);
  r.makespan = sim::to_s(makespan(log));
  return r;
}

inline nlohmann::ordered_json to_json(const SimReport& r) {
  nlohmann::ordered_json j;
  j["policy"] = r.policy;
  j["seed"] = r.seed;
  j["config_fingerprint"] = r.config_fingerprint;
  j["workload_fingerprint"] = r.workload_fingerprint;
  j["tasks"] = r.tasks;
  j["completed"] = r.completed;
  j["unfinished"] = r.unfinished;
  j["response"] = {{"mean", r.response.mean}, {"max", r.response.max}, {"p95", r.response.p95}};
  j["miss_ratio"] = r.miss_ratio;
  j["throughput_per_minute"] = r.throughput.per_minute;
  j["throughput_series"] = r.throughput.series;
  j["utilization"] = {{"gpu", r.utilization.gpu}, {"cpu", r.utilization.cpu}};
  j["makespan"] = r.makespan;
  j["responses"] = r.responses;
  return j;
}

// ---------------------------------------------------------------------------
// Cross-policy comparison
// ---------------------------------------------------------------------------

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single run
};

inline MeanStd mean_std(const std::vector<double>& v) {
  MeanStd m;
  if (v.empty()) return m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double s = 0.0;
    for (double x : v) s += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(s / static_cast<double>(v.size() - 1));
  }
  return m;
}

struct ComparisonRow {
  std::string policy;
  std::size_t runs = 0;
  MeanStd mean_response, p95_response, max_response, miss_ratio, throughput, gpu_util, cpu_util;
  // Percent change of the run-averaged value against the baseline policy.
  double delta_mean_response = 0.0;
  double delta_p95_response = 0.0;
  double delta_miss_ratio = 0.0;
  double delta_throughput = 0.0;
};

struct Comparison {
  std::string baseline;
  std::vector<ComparisonRow> rows;
};

inline double pct_delta(double x, double base) {
  if (base == 0.0) return x == 0.0 ? 0.0 : std::numeric_limits<double>::quiet_NaN();
  return (x - base) / base * 100.0;
}

using PolicyRuns = std::vector<std::pair<std::string, std::vector<SimReport>>>;

// Rows keep the input order. The baseline is FIFO if present, else the first
// policy. The i-th run of every policy must share one workload fingerprint.
inline Comparison compare_report(const PolicyRuns& runs) {
  Comparison c;
  if (runs.empty()) return c;
  const auto& ref = runs.front().second;
  for (const auto& [name, reports] : runs) {
    if (reports.size() != ref.size()) throw MismatchedWorkloads("policy " + name + " has a different run count");
    for (std::size_t i = 0; i < reports.size(); ++i) {
      if (reports[i].workload_fingerprint != ref[i].workload_fingerprint) {
        throw MismatchedWorkloads("policy " + name + " run " + std::to_string(i) + " used workload " +
                                  reports[i].workload_fingerprint + ", expected " + ref[i].workload_fingerprint);
      }
    }
  }
  for (const auto& [name, reports] : runs) {
    ComparisonRow row;
    row.policy = name;
    row.runs = reports.size();
    std::vector<double> mean, p95, mx, miss, tp, gu, cu;
    for (const auto& r : reports) {
      mean.push_back(r.response.mean);
      p95.push_back(r.response.p95);
      mx.push_back(r.response.max);
      miss.push_back(r.miss_ratio);
      tp.push_back(r.throughput.per_minute);
      gu.push_back(r.utilization.gpu);
      cu.push_back(r.utilization.cpu);
    }
    row.mean_response = mean_std(mean);
    row.p95_response = mean_std(p95);
    row.max_response = mean_std(mx);
    row.miss_ratio = mean_std(miss);
    row.throughput = mean_std(tp);
    row.gpu_util = mean_std(gu);
    row.cpu_util = mean_std(cu);
    c.rows.push_back(row);
  }
  std::size_t base = 0;
  for (std::size_t i = 0; i < c.rows.size(); ++i) {
    if (c.rows[i].policy == "FIFO") {
      base = i;
      break;
    }
  }
  c.baseline = c.rows[base].policy;
  const auto b = c.rows[base];
  for (auto& row : c.rows) {
    row.delta_mean_response = pct_delta(row.mean_response.mean, b.mean_response.mean);
    row.delta_p95_response = pct_delta(row.p95_response.mean, b.p95_response.mean);
    row.delta_miss_ratio = pct_delta(row.miss_ratio.mean, b.miss_ratio.mean);
    row.delta_throughput = pct_delta(row.throughput.mean, b.throughput.mean);
  }
  return c;
}

inline constexpr std::string_view kComparisonHeader =
    "policy,runs,mean_response,mean_response_std,p95_response,max_response,miss_ratio,miss_ratio_std,"
    "throughput_per_min,gpu_util,cpu_util,delta_mean_response_pct,delta_p95_response_pct,delta_miss_ratio_pct,"
    "delta_throughput_pct";

inline void write_comparison_csv(const Comparison& c, std::ostream& out,
                                 const std::vector<std::string>& comments = {}) {
  auto f = [](double v) {
    if (std::isnan(v)) return std::string("nan");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  for (const auto& s : comments) out << "# " << s << '\n';
  out << kComparisonHeader << '\n';
  for (const auto& r : c.rows) {
    out << r.policy << ',' << r.runs << ',' << f(r.mean_response.mean) << ',' << f(r.mean_response.std) << ','
        << f(r.p95_response.mean) << ',' << f(r.max_response.mean) << ',' << f(r.miss_ratio.mean) << ','
        << f(r.miss_ratio.std) << ',' << f(r.throughput.mean) << ',' << f(r.gpu_util.mean) << ','
        << f(r.cpu_util.mean) << ',' << f(r.delta_mean_response) << ',' << f(r.delta_p95_response) << ','
        << f(r.delta_miss_ratio) << ',' << f(r.delta_throughput) << '\n';
  }
}

}  // namespace rtlm::metrics
