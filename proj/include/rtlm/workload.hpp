#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "rng.hpp"

namespace rtlm::workload {

// One (text, observed output length) pair from a trace file.
struct TraceRecord {
  std::uint64_t id = 0;
  std::string text;
  int out_len = 1;
  std::optional<double> deadline;
  bool malicious = false;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

// ---------------------------------------------------------------------------
// Trace files: JSON lines {"id":int,"text":str,"out_len":int,"deadline":float|null,"malicious":bool}
// ---------------------------------------------------------------------------

inline std::string to_jsonl_line(const TraceRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["text"] = r.text;
  j["out_len"] = r.out_len;
  j["deadline"] = r.deadline ? nlohmann::ordered_json(*r.deadline) : nlohmann::ordered_json(nullptr);
  j["malicious"] = r.malicious;
  return j.dump();
}

inline std::vector<TraceRecord> parse_trace(std::istream& in) {
  std::vector<TraceRecord> out;
  std::set<std::uint64_t> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(lineno, e.what());
    }
    TraceRecord r;
    try {
      if (!j.is_object()) throw ParseError(lineno, "expected a JSON object");
      r.id = j.at("id").get<std::uint64_t>();
      r.text = j.at("text").get<std::string>();
      r.out_len = j.at("out_len").get<int>();
      if (j.contains("deadline") && !j["deadline"].is_null()) r.deadline = j["deadline"].get<double>();
      if (j.contains("malicious") && !j["malicious"].is_null()) r.malicious = j["malicious"].get<bool>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(lineno, e.what());
    }
    if (r.out_len < 1) {
      throw InvalidRecord("record " + std::to_string(r.id) + " (line " + std::to_string(lineno) +
                          "): out_len must be >= 1");
    }
    if (!ids.insert(r.id).second) {
      throw InvalidRecord("duplicate id " + std::to_string(r.id) + " (line " + std::to_string(lineno) + ")");
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<TraceRecord> load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trace file: " + path);
  return parse_trace(in);
}

inline void save_trace(const std::vector<TraceRecord>& records, std::ostream& out) {
  for (const auto& r : records) out << to_jsonl_line(r) << '\n';
}

inline void save_trace(const std::vector<TraceRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write trace file: " + path);
  save_trace(records, out);
}

// ---------------------------------------------------------------------------
// Arrivals
// ---------------------------------------------------------------------------

// Per-minute arrival rates (queries per minute), cycled when exhausted.
struct BetaSchedule {
  std::vector<double> per_minute;

  // "60" (constant), "10,20,150" (explicit) or "10:150:10" (inclusive ramp).
  static BetaSchedule parse(const std::string& spec) {
    BetaSchedule s;
    auto num = [&](const std::string& tok) {
      try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
      } catch (const std::exception&) {
        throw ConfigError("bad beta schedule '" + spec + "'");
      }
    };
    if (spec.find(':') != std::string::npos) {
      std::vector<double> parts;
      std::stringstream ss(spec);
      std::string tok;
      while (std::getline(ss, tok, ':')) parts.push_back(num(tok));
      if (parts.size() != 3 || !(parts[2] > 0.0)) throw ConfigError("beta ramp must be lo:hi:step");
      for (double b = parts[0]; b <= parts[1] + 1e-9; b += parts[2]) s.per_minute.push_back(b);
    } else {
      std::stringstream ss(spec);
      std::string tok;
      while (std::getline(ss, tok, ',')) s.per_minute.push_back(num(tok));
    }
    if (s.per_minute.empty()) throw ConfigError("empty beta schedule");
    for (double b : s.per_minute) {
      if (b < 0.0) throw ConfigError("beta must be >= 0");
    }
    if (std::none_of(s.per_minute.begin(), s.per_minute.end(), [](double b) { return b > 0.0; })) {
      throw ConfigError("beta schedule has no positive rate");
    }
    return s;
  }

  double at_minute(std::size_t m) const { return per_minute[m % per_minute.size()]; }
};

inline double quantize_us(double seconds) { return static_cast<double>(std::llround(seconds * 1e6)) / 1e6; }

struct ArrivalPlan {
  std::vector<double> arrivals;      // non-decreasing seconds, quantized to 1 us
  std::vector<std::size_t> order;    // order[i]: index of the record released at arrivals[i]
  BetaSchedule beta;
  std::uint64_t seed = 0;
};

// Piecewise-constant Poisson process. Within minute m gaps are Exp(beta_m / 60 s);
// a gap that crosses a minute boundary restarts at the boundary with the next
// rate, which is exact by memorylessness. Records are shuffled onto the arrivals.
inline ArrivalPlan gen_arrivals(std::size_t n, const BetaSchedule& beta, std::uint64_t seed) {
  if (n < 1) throw Error("gen_arrivals needs n >= 1");
  ArrivalPlan plan;
  plan.beta = beta;
  plan.seed = seed;
  Rng gaps(seed, "arrivals");
  double t = 0.0;
  while (plan.arrivals.size() < n) {
    const auto minute = static_cast<std::size_t>(std::floor(t / 60.0));
    const double boundary = static_cast<double>(minute + 1) * 60.0;
    const double rate = beta.at_minute(minute) / 60.0;
    if (rate <= 0.0) {
      t = boundary;
      continue;
    }
    const double next = t + gaps.exponential(rate);
    if (next >= boundary) {
      t = boundary;
      continue;
    }
    t = next;
    plan.arrivals.push_back(quantize_us(t));
  }
  plan.order.resize(n);
  std::iota(plan.order.begin(), plan.order.end(), std::size_t{0});
  Rng shuffle(seed, "shuffle");
  shuffle.shuffle(plan.order);
  return plan;
}

inline void write_arrivals_csv(const ArrivalPlan& plan, const std::vector<TraceRecord>& records, std::ostream& out) {
  char buf[64];
  out << "task_id,arrival_s\n";
  for (std::size_t i = 0; i < plan.arrivals.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6f", plan.arrivals[i]);
    out << records.at(plan.order[i]).id << ',' << buf << '\n';
  }
}

// Arrival windows of length xi, anchored at the first uncovered arrival. An
// arrival at or before start + xi joins the window.
struct Epoch {
  double start = 0.0;
  double close = 0.0;
  std::size_t first = 0;  // index range into the arrival list, [first, last)
  std::size_t last = 0;
};

inline std::vector<Epoch> apply_wait_interval(const std::vector<double>& arrivals, double xi) {
  std::vector<Epoch> out;
  std::size_t i = 0;
  while (i < arrivals.size()) {
    Epoch e;
    e.start = arrivals[i];
    e.close = quantize_us(e.start + xi);
    e.first = i;
    while (i < arrivals.size() && arrivals[i] <= e.close) ++i;
    e.last = i;
    out.push_back(e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Malicious tasks
// ---------------------------------------------------------------------------

struct InflationConfig {
  double factor = 3.0;
  // Appended to the text so the vague and open-ended rules fire.
  std::string suffix = " Why? Tell me everything about the history of the world and stuff.";
};

inline std::vector<TraceRecord> inject_malicious(std::vector<TraceRecord> records, double ratio,
                                                 const InflationConfig& cfg, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw ConfigError("malicious ratio must lie in [0, 1]");
  const std::size_t n = records.size();
  const auto count = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n) - 1e-9));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed, "malicious");
  rng.shuffle(idx);
  for (std::size_t i = 0; i < count && i < n; ++i) {
    auto& r = records[idx[i]];
    r.out_len = std::max(1, static_cast<int>(std::lround(r.out_len * cfg.factor)));
    r.text += cfg.suffix;
    r.malicious = true;
  }
  return records;
}

// ---------------------------------------------------------------------------
// Variance subsets
// ---------------------------------------------------------------------------

struct VarianceSubsets {
  std::vector<TraceRecord> small;
  std::vector<TraceRecord> normal;
  std::vector<TraceRecord> large;
};

inline double variance(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / static_cast<double>(v.size());
}

using Scorer = std::function<double(const TraceRecord&)>;

// Three equal-size subsets (half the trace each) by estimated uncertainty:
//   small  - the contiguous band of sorted scores with the least variance;
//   normal - a uniform random sample;
//   large  - the j lowest plus (m - j) highest scores, j chosen to maximize variance.
// The small band is the minimum-variance subset of its size and the large one
// the maximum, so the variance ordering holds by construction.
inline VarianceSubsets make_variance_subsets(const std::vector<TraceRecord>& records, const Scorer& scorer,
                                             std::uint64_t seed) {
  if (!scorer) throw EstimatorMissing("variance subsets need a trained estimator");
  const std::size_t n = records.size();
  const std::size_t m = n / 2;
  VarianceSubsets out;
  if (m == 0) return out;

  std::vector<double> score(n);
  for (std::size_t i = 0; i < n; ++i) score[i] = scorer(records[i]);
  std::vector<std::size_t> sorted(n);
  std::iota(sorted.begin(), sorted.end(), std::size_t{0});
  std::stable_sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });

  // Sliding-window variance over sorted scores.
  std::vector<double> prefix(n + 1, 0.0), prefix_sq(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    prefix[i + 1] = prefix[i] + score[sorted[i]];
    prefix_sq[i + 1] = prefix_sq[i] + score[sorted[i]] * score[sorted[i]];
  }
  auto window_var = [&](std::size_t lo, std::size_t hi) {  // [lo, hi)
    const double cnt = static_cast<double>(hi - lo);
    const double mean = (prefix[hi] - prefix[lo]) / cnt;
    return std::max(0.0, (prefix_sq[hi] - prefix_sq[lo]) / cnt - mean * mean);
  };
  std::size_t best_lo = 0;
  double best_var = window_var(0, m);
  for (std::size_t lo = 1; lo + m <= n; ++lo) {
    const double v = window_var(lo, lo + m);
    if (v < best_var) {
      best_var = v;
      best_lo = lo;
    }
  }
  std::vector<std::size_t> small_idx(sorted.begin() + static_cast<std::ptrdiff_t>(best_lo),
                                     sorted.begin() + static_cast<std::ptrdiff_t>(best_lo + m));
  std::sort(small_idx.begin(), small_idx.end());
  for (auto i : small_idx) out.small.push_back(records[i]);

  std::size_t best_j = 0;
  double best_large = -1.0;
  for (std::size_t j = 0; j <= m; ++j) {
    const double s = prefix[j] + (prefix[n] - prefix[n - (m - j)]);
    const double sq = prefix_sq[j] + (prefix_sq[n] - prefix_sq[n - (m - j)]);
    const double mean = s / static_cast<double>(m);
    const double v = sq / static_cast<double>(m) - mean * mean;
    if (v > best_large + 1e-12) {
      best_large = v;
      best_j = j;
    }
  }
  std::vector<std::size_t> large_idx;
  for (std::size_t i = 0; i < best_j; ++i) large_idx.push_back(sorted[i]);
  for (std::size_t i = n - (m - best_j); i < n; ++i) large_idx.push_back(sorted[i]);
  std::sort(large_idx.begin(), large_idx.end());
  for (auto i : large_idx) out.large.push_back(records[i]);

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed, "variance");
  rng.shuffle(idx);
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  for (auto i : idx) out.normal.push_back(records[i]);
  return out;
}

}  // namespace rtlm::workload
