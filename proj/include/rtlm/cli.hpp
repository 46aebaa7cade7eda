#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "estimator.hpp"
#include "hash.hpp"
#include "metrics.hpp"
#include "pipeline.hpp"
#include "profile.hpp"
#include "sched.hpp"
#include "sim.hpp"
#include "synth.hpp"
#include "workload.hpp"

namespace rtlm::cli {

using Json = nlohmann::ordered_json;

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

// Every key can be overridden by a flag or `--set path=value`. Scheduler
// values left null are taken from the profile.
inline Json default_config() {
  return Json::parse(R"({
    "trace": "data/synthetic_test.jsonl",
    "profile": "profiles/demo.json",
    "out": "out",
    "seed": 1,
    "scheduler": {
      "policy": "UP",
      "alpha": null,
      "lambda": null,
      "b": null,
      "k": null,
      "numerator": "normalized",
      "consolidation": null,
      "offloading": null
    },
    "workload": {
      "beta_schedule": "10:150:10",
      "xi": 2.0,
      "deadline_tightness": 1.0,
      "malicious_ratio": 0.0,
      "inflation_factor": 3.0,
      "variance": "all"
    },
    "sim": {
      "cpu_lanes": 4,
      "decision_overhead": 0.0,
      "horizon": null
    },
    "compare": {
      "policies": ["FIFO", "EDF", "LUF", "MUF", "UP"],
      "seeds": [1, 2, 3, 4, 5]
    },
    "sweep": null
  })");
}

// Short sweep names for the common parameters.
inline std::string expand_key(const std::string& key) {
  static const std::map<std::string, std::string> alias = {
      {"alpha", "scheduler.alpha"},        {"lambda", "scheduler.lambda"},
      {"b", "scheduler.b"},                {"k", "scheduler.k"},
      {"policy", "scheduler.policy"},      {"xi", "workload.xi"},
      {"beta_schedule", "workload.beta_schedule"},
      {"malicious_ratio", "workload.malicious_ratio"},
      {"variance", "workload.variance"},   {"cpu_lanes", "sim.cpu_lanes"},
      {"horizon", "sim.horizon"},
  };
  auto it = alias.find(key);
  return it == alias.end() ? key : it->second;
}

inline void set_path(Json& cfg, const std::string& dotted, Json value) {
  Json* node = &cfg;
  std::stringstream ss(expand_key(dotted));
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw ConfigError("bad config path '" + dotted + "'");
    parts.push_back(part);
  }
  if (parts.empty()) throw ConfigError("empty config path");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    auto& child = (*node)[parts[i]];
    if (child.is_null()) child = Json::object();
    if (!child.is_object()) throw ConfigError("config path '" + dotted + "' crosses a non-object");
    node = &child;
  }
  (*node)[parts.back()] = std::move(value);
}

inline const Json& get_path(const Json& cfg, const std::string& dotted) {
  const Json* node = &cfg;
  std::stringstream ss(expand_key(dotted));
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (!node->is_object() || !node->contains(part)) throw ConfigError("unknown config key '" + dotted + "'");
    node = &(*node)[part];
  }
  return *node;
}

// Flag text to a JSON value: numbers, booleans and null parse as such,
// anything else is a string.
inline Json parse_value(const std::string& text) {
  try {
    auto j = Json::parse(text);
    if (j.is_primitive()) return j;
  } catch (const Json::parse_error&) {
  }
  return text;
}

inline void apply_assignment(Json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("expected key=value, got '" + assignment + "'");
  set_path(cfg, assignment.substr(0, eq), parse_value(assignment.substr(eq + 1)));
}

inline Json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  Json file;
  try {
    file = Json::parse(in, nullptr, true, true);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  if (!file.is_object()) throw ConfigError("config " + path + " must be a JSON object");
  Json cfg = default_config();
  cfg.merge_patch(file);
  return cfg;
}

// ---------------------------------------------------------------------------
// Resolution
// ---------------------------------------------------------------------------

struct Sweep {
  std::string key;  // dotted path
  std::vector<double> values;

  // "param:lo:hi:step", inclusive of hi up to rounding.
  static Sweep parse(const std::string& spec) {
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ':')) parts.push_back(tok);
    if (parts.size() != 4) throw ConfigError("sweep must be param:lo:hi:step, got '" + spec + "'");
    Sweep s;
    s.key = expand_key(parts[0]);
    double lo, hi, step;
    try {
      lo = std::stod(parts[1]);
      hi = std::stod(parts[2]);
      step = std::stod(parts[3]);
    } catch (const std::exception&) {
      throw ConfigError("sweep bounds must be numbers: '" + spec + "'");
    }
    if (!(step > 0.0) || hi < lo) throw ConfigError("sweep needs lo <= hi and step > 0");
    const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
    for (long i = 0; i <= n; ++i) {
      // Round to 12 significant decimals so 0.1 steps print cleanly.
      const double v = lo + static_cast<double>(i) * step;
      s.values.push_back(std::round(v * 1e12) / 1e12);
    }
    return s;
  }
};

struct RunConfig {
  std::string trace;
  std::string profile_path;
  std::string out;
  std::uint64_t seed = 1;
  ProfileArtifact profile;
  sched::SchedulerConfig scheduler;
  pipeline::WorkloadConfig workload;
  sim::SimConfig sim;
  std::vector<sched::Policy> policies;
  std::vector<std::uint64_t> seeds;
  std::optional<Sweep> sweep;
  Json resolved;  // the effective configuration, echoed into every output
};

namespace detail {

template <class T>
T get_as(const Json& cfg, const std::string& key) {
  const auto& v = get_path(cfg, key);
  try {
    return v.get<T>();
  } catch (const Json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

inline std::optional<double> opt_double(const Json& cfg, const std::string& key) {
  const auto& v = get_path(cfg, key);
  if (v.is_null()) return std::nullopt;
  if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
  return v.get<double>();
}

inline std::optional<bool> opt_bool(const Json& cfg, const std::string& key) {
  const auto& v = get_path(cfg, key);
  if (v.is_null()) return std::nullopt;
  if (!v.is_boolean()) throw ConfigError("config key '" + key + "' must be true, false or null");
  return v.get<bool>();
}

inline void require_file(const std::string& path, const std::string& what) {
  if (!std::filesystem::is_regular_file(path)) throw ConfigError(what + " not found: " + path);
}

}  // namespace detail

// Validates the configuration and loads the profile. Throws ConfigError.
inline RunConfig resolve(const Json& cfg_in) {
  Json cfg = cfg_in;
  RunConfig rc;
  rc.trace = detail::get_as<std::string>(cfg, "trace");
  rc.profile_path = detail::get_as<std::string>(cfg, "profile");
  rc.out = detail::get_as<std::string>(cfg, "out");
  rc.seed = detail::get_as<std::uint64_t>(cfg, "seed");
  detail::require_file(rc.trace, "trace file");
  detail::require_file(rc.profile_path, "profile");
  try {
    rc.profile = load_profile(rc.profile_path);
  } catch (const HashMismatch& e) {
    throw ConfigError(e.what());
  }

  auto& s = rc.scheduler;
  s.policy = sched::parse_policy(detail::get_as<std::string>(cfg, "scheduler.policy"));
  const auto& d = rc.profile.scheduler;
  s.alpha = detail::opt_double(cfg, "scheduler.alpha").value_or(d.alpha);
  s.lambda = detail::opt_double(cfg, "scheduler.lambda").value_or(d.lambda);
  s.b = detail::opt_double(cfg, "scheduler.b").value_or(d.b);
  s.k = detail::opt_double(cfg, "scheduler.k").value_or(d.k);
  const auto num = detail::get_as<std::string>(cfg, "scheduler.numerator");
  if (num == "normalized") s.numerator_mode = sched::NumeratorMode::kNormalized;
  else if (num == "raw") s.numerator_mode = sched::NumeratorMode::kRaw;
  else throw ConfigError("scheduler.numerator must be 'normalized' or 'raw'");
  s.consolidation = detail::opt_bool(cfg, "scheduler.consolidation");
  s.offloading = detail::opt_bool(cfg, "scheduler.offloading");
  s.validate();
  // A different k moves the malicious threshold along the training scores.
  if (s.k != d.k) {
    if (rc.profile.train_scores.empty()) {
      throw ConfigError("profile has no training scores, so k cannot be changed from " + std::to_string(d.k));
    }
    rc.profile.model.tau = estimator::quantile_threshold(rc.profile.train_scores, s.k);
  }

  auto& w = rc.workload;
  w.beta_schedule = detail::get_as<std::string>(cfg, "workload.beta_schedule");
  (void)workload::BetaSchedule::parse(w.beta_schedule);
  w.deadline_tightness = detail::get_as<double>(cfg, "workload.deadline_tightness");
  if (!(w.deadline_tightness > 0.0)) throw ConfigError("workload.deadline_tightness must be > 0");
  w.malicious_ratio = detail::get_as<double>(cfg, "workload.malicious_ratio");
  if (!(w.malicious_ratio >= 0.0 && w.malicious_ratio <= 1.0)) {
    throw ConfigError("workload.malicious_ratio must lie in [0, 1]");
  }
  w.inflation.factor = detail::get_as<double>(cfg, "workload.inflation_factor");
  if (!(w.inflation.factor >= 1.0)) throw ConfigError("workload.inflation_factor must be >= 1");
  w.variance = pipeline::parse_variance(detail::get_as<std::string>(cfg, "workload.variance"));

  rc.sim.xi = detail::get_as<double>(cfg, "workload.xi");
  rc.sim.cpu_lanes = detail::get_as<int>(cfg, "sim.cpu_lanes");
  rc.sim.decision_overhead = detail::get_as<double>(cfg, "sim.decision_overhead");
  rc.sim.horizon = detail::opt_double(cfg, "sim.horizon");
  rc.sim.validate();

  for (const auto& p : detail::get_as<std::vector<std::string>>(cfg, "compare.policies")) {
    rc.policies.push_back(sched::parse_policy(p));
  }
  rc.seeds = detail::get_as<std::vector<std::uint64_t>>(cfg, "compare.seeds");
  if (rc.policies.empty() || rc.seeds.empty()) throw ConfigError("compare needs at least one policy and one seed");

  const auto& sw = get_path(cfg, "sweep");
  if (!sw.is_null()) {
    if (!sw.is_string()) throw ConfigError("sweep must be a 'param:lo:hi:step' string");
    rc.sweep = Sweep::parse(sw.get<std::string>());
    (void)get_path(cfg, rc.sweep->key);
  }
  rc.resolved = cfg;
  return rc;
}

inline std::string config_fingerprint(const Json& resolved) { return content_hash(resolved.dump()); }

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct RunFiles {
  std::string tasks_csv;
  std::string summary_json;
  metrics::SimReport report;
  bool unfinished_warning = false;
};

inline std::vector<std::string> header_comments(const RunConfig& rc, const std::string& what) {
  return {"rtlm " + what, "seed: " + std::to_string(rc.seed), "config: " + rc.resolved.dump(),
          "config_fingerprint: " + config_fingerprint(rc.resolved)};
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory " + dir + ": " + ec.message());
}

inline RunFiles cmd_run(const Json& cfg, std::ostream& log) {
  const auto rc = resolve(cfg);
  const auto trace = workload::load_trace(rc.trace);
  const auto w = pipeline::prepare_workload(trace, rc.profile, rc.workload, rc.seed);
  auto run = pipeline::run_prepared(w, rc.scheduler, rc.profile.model, rc.sim, rc.seed,
                                    config_fingerprint(rc.resolved));
  ensure_dir(rc.out);
  RunFiles files;
  files.tasks_csv = (std::filesystem::path(rc.out) / "tasks.csv").string();
  files.summary_json = (std::filesystem::path(rc.out) / "summary.json").string();
  {
    std::ofstream out(files.tasks_csv);
    if (!out) throw Error("cannot write " + files.tasks_csv);
    sim::write_task_log(run.result, out, header_comments(rc, "run"));
  }
  Json summary;
  summary["report"] = metrics::to_json(run.report);
  summary["horizon_exceeded"] = run.result.horizon_exceeded;
  summary["batches"] = run.result.batches;
  summary["consolidations"] = run.result.consolidations;
  summary["config"] = rc.resolved;
  {
    std::ofstream out(files.summary_json);
    if (!out) throw Error("cannot write " + files.summary_json);
    out << summary.dump(2) << '\n';
  }
  files.report = run.report;
  const auto& r = run.report;
  log << "policy " << r.policy << ", seed " << r.seed << ": " << r.completed << "/" << r.tasks
      << " tasks done, mean response " << r.response.mean << " s, p95 " << r.response.p95 << " s, miss ratio "
      << r.miss_ratio << "\n";
  if (run.result.horizon_exceeded) {
    files.unfinished_warning = true;
    log << "warning: " << run.result.unfinished << " tasks unfinished at the horizon (counted as misses)\n";
  }
  log << "wrote " << files.tasks_csv << " and " << files.summary_json << "\n";
  return files;
}

struct CompareResult {
  std::string csv_path;
  std::size_t runs = 0;
  std::size_t rows = 0;
};

// One comparison per sweep value (or one overall), every (policy, seed) run on
// the workload that seed produces.
inline CompareResult cmd_compare(const Json& cfg, std::ostream& log) {
  const auto rc0 = resolve(cfg);
  const auto trace = workload::load_trace(rc0.trace);
  std::vector<std::optional<double>> values = {std::nullopt};
  if (rc0.sweep) values.assign(rc0.sweep->values.begin(), rc0.sweep->values.end());

  ensure_dir(rc0.out);
  CompareResult res;
  res.csv_path = (std::filesystem::path(rc0.out) / (rc0.sweep ? "sweep.csv" : "compare.csv")).string();
  std::ofstream out(res.csv_path);
  if (!out) throw Error("cannot write " + res.csv_path);
  for (const auto& c : header_comments(rc0, rc0.sweep ? "compare --sweep" : "compare")) out << "# " << c << '\n';
  out << "# seeds:";
  for (auto s : rc0.seeds) out << ' ' << s;
  out << '\n';
  if (rc0.sweep) out << "sweep_param,sweep_value,";
  out << metrics::kComparisonHeader << '\n';

  for (const auto& v : values) {
    Json c = cfg;
    if (v) set_path(c, rc0.sweep->key, *v);
    const auto rc = v ? resolve(c) : rc0;
    metrics::PolicyRuns runs;
    for (auto p : rc.policies) runs.emplace_back(std::string(sched::to_string(p)), std::vector<metrics::SimReport>{});
    for (auto seed : rc.seeds) {
      const auto w = pipeline::prepare_workload(trace, rc.profile, rc.workload, seed);
      for (std::size_t i = 0; i < rc.policies.size(); ++i) {
        auto scfg = rc.scheduler;
        scfg.policy = rc.policies[i];
        auto run = pipeline::run_prepared(w, scfg, rc.profile.model, rc.sim, seed, config_fingerprint(rc.resolved));
        runs[i].second.push_back(std::move(run.report));
        ++res.runs;
      }
    }
    const auto table = metrics::compare_report(runs);
    std::ostringstream body;
    metrics::write_comparison_csv(table, body);
    std::istringstream lines(body.str());
    std::string line;
    std::getline(lines, line);  // header already written
    while (std::getline(lines, line)) {
      if (rc0.sweep) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6g", *v);
        out << rc0.sweep->key << ',' << buf << ',';
      }
      out << line << '\n';
      ++res.rows;
    }
    for (const auto& row : table.rows) {
      log << (v ? rc0.sweep->key + "=" + std::to_string(*v) + " " : std::string()) << row.policy
          << ": mean response " << row.mean_response.mean << " +- " << row.mean_response.std << " s ("
          << row.delta_mean_response << "% vs " << table.baseline << "), miss ratio " << row.miss_ratio.mean << "\n";
    }
  }
  log << res.runs << " runs, " << res.rows << " rows written to " << res.csv_path << "\n";
  return res;
}

struct ProfileArgs {
  std::string trace;
  std::string model = "dialogpt";
  std::string out = "profile.json";
  double k = 0.9;
  std::uint64_t seed = 1;
  int epochs = 100;
  double learning_rate = 1e-4;
  int batch_size = 16;
  std::vector<int> hidden = {100, 200, 200, 100};
  bool include_input_length = false;
};

inline ProfileArtifact cmd_profile(const ProfileArgs& a, std::ostream& log) {
  detail::require_file(a.trace, "trace file");
  if (!(a.k > 0.0 && a.k < 1.0)) throw ConfigError("k must lie in (0, 1)");
  if (a.epochs < 1 || a.batch_size < 1) throw ConfigError("epochs and batch size must be >= 1");
  for (int h : a.hidden) {
    if (h < 1) throw ConfigError("hidden layer sizes must be >= 1");
  }
  const auto trace = workload::load_trace(a.trace);
  if (trace.empty()) throw ConfigError("training trace is empty: " + a.trace);
  const auto records = pipeline::train_records(trace);

  estimator::ModelConfig mc;
  mc.layer_dims = {static_cast<int>(textfeat::kNumFeatures)};
  mc.layer_dims.insert(mc.layer_dims.end(), a.hidden.begin(), a.hidden.end());
  mc.layer_dims.push_back(1);
  mc.train.epochs = a.epochs;
  mc.train.learning_rate = a.learning_rate;
  mc.train.batch_size = a.batch_size;
  mc.train.seed = a.seed;
  mc.train.include_input_length = a.include_input_length;

  SchedulerDefaults sd;
  sd.k = a.k;
  auto artifact = build_profile(reference_model(a.model), sd, records, mc);
  if (!a.out.empty()) {
    const auto parent = std::filesystem::path(a.out).parent_path();
    if (!parent.empty()) ensure_dir(parent.string());
    save_profile(artifact, a.out);
  }
  log << "tau " << artifact.model.tau << ", u_max " << artifact.model.u_max << ", final loss "
      << artifact.estimator->final_loss << " (" << artifact.estimator->attempts << " attempt"
      << (artifact.estimator->attempts == 1 ? "" : "s") << ")\n";
  log << "content hash " << artifact.content_hash << "\n";
  return artifact;
}

// Recomputes the metrics of a per-task log.
inline metrics::SimReport cmd_report(const std::string& log_path, std::ostream& log) {
  detail::require_file(log_path, "task log");
  std::ifstream in(log_path);
  const auto entries = sim::read_task_log(in);
  auto r = metrics::summarize(entries);
  log << r.completed << "/" << r.tasks << " tasks done";
  if (r.unfinished) log << " (" << r.unfinished << " unfinished)";
  log << "\nmean response " << r.response.mean << " s, p95 " << r.response.p95 << " s, max " << r.response.max
      << " s\nmiss ratio " << r.miss_ratio << "\nthroughput " << r.throughput.per_minute
      << " tasks/min\nutilization gpu " << r.utilization.gpu << ", cpu " << r.utilization.cpu << "\n";
  return r;
}

}  // namespace rtlm::cli
