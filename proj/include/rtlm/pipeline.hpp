#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "estimator.hpp"
#include "hash.hpp"
#include "metrics.hpp"
#include "profile.hpp"
#include "sched.hpp"
#include "sim.hpp"
#include "textfeat.hpp"
#include "workload.hpp"

namespace rtlm::pipeline {

enum class VarianceSubset { kAll, kSmall, kNormal, kLarge };

inline VarianceSubset parse_variance(const std::string& s) {
  if (s.empty() || s == "all" || s == "none") return VarianceSubset::kAll;
  if (s == "small") return VarianceSubset::kSmall;
  if (s == "normal") return VarianceSubset::kNormal;
  if (s == "large") return VarianceSubset::kLarge;
  throw ConfigError("variance must be one of small, normal, large (got '" + s + "')");
}

inline std::string to_string(VarianceSubset v) {
  switch (v) {
    case VarianceSubset::kSmall: return "small";
    case VarianceSubset::kNormal: return "normal";
    case VarianceSubset::kLarge: return "large";
    default: return "all";
  }
}

struct WorkloadConfig {
  std::string beta_schedule = "10:150:10";
  double deadline_tightness = 1.0;  // 1 = tight, 2 = loose
  double malicious_ratio = 0.0;
  workload::InflationConfig inflation;
  VarianceSubset variance = VarianceSubset::kAll;
};

// A record with everything the scheduler may see precomputed.
struct ScoredRecord {
  workload::TraceRecord record;
  int input_len = 1;
  textfeat::FeatureVector features;
  estimator::UncertaintyScore uncertainty;
};

inline int input_length(const std::vector<textfeat::Token>& tokens) {
  return std::max<int>(1, static_cast<int>(tokens.size()));
}

inline estimator::TrainRecord train_record(const workload::TraceRecord& r,
                                           const textfeat::Lexicon& lex = textfeat::default_lexicon()) {
  const auto tokens = textfeat::tokenize(r.text, lex);
  estimator::TrainRecord t;
  t.features = textfeat::rule_gen_tokens(tokens, textfeat::kUnitWeights, lex);
  t.target_len = r.out_len;
  t.input_len = input_length(tokens);
  return t;
}

inline std::vector<estimator::TrainRecord> train_records(const std::vector<workload::TraceRecord>& records,
                                                         const textfeat::Lexicon& lex = textfeat::default_lexicon()) {
  std::vector<estimator::TrainRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(train_record(r, lex));
  return out;
}

// u_J = m_theta(RuleGen(J)).
inline ScoredRecord score_record(const workload::TraceRecord& r, const ProfileArtifact& profile,
                                 const textfeat::Lexicon& lex = textfeat::default_lexicon()) {
  if (!profile.estimator) throw EstimatorMissing("profile '" + profile.model.name + "' carries no trained estimator");
  const auto tokens = textfeat::tokenize(r.text, lex);
  ScoredRecord s;
  s.record = r;
  s.input_len = input_length(tokens);
  s.features = textfeat::rule_gen_tokens(tokens, textfeat::kUnitWeights, lex);
  const auto& e = *profile.estimator;
  s.uncertainty = estimator::mlp_predict(e.model, s.features, profile.model.u_max, e.include_input_length,
                                         static_cast<double>(s.input_len));
  return s;
}

inline std::vector<ScoredRecord> score_records(const std::vector<workload::TraceRecord>& records,
                                               const ProfileArtifact& profile,
                                               const textfeat::Lexicon& lex = textfeat::default_lexicon()) {
  std::vector<ScoredRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(score_record(r, profile, lex));
  return out;
}

inline workload::Scorer estimator_scorer(const ProfileArtifact& profile) {
  if (!profile.estimator) return {};
  return [&profile](const workload::TraceRecord& r) { return score_record(r, profile).uncertainty.value; };
}

inline std::vector<workload::TraceRecord> select_variance(const std::vector<workload::TraceRecord>& records,
                                                          VarianceSubset v, const ProfileArtifact& profile,
                                                          std::uint64_t seed) {
  if (v == VarianceSubset::kAll) return records;
  auto subsets = workload::make_variance_subsets(records, estimator_scorer(profile), seed);
  switch (v) {
    case VarianceSubset::kSmall: return subsets.small;
    case VarianceSubset::kNormal: return subsets.normal;
    default: return subsets.large;
  }
}

// Maps records onto a seeded arrival plan and tags deadlines.
inline sim::SimInput build_sim_input(const std::vector<ScoredRecord>& scored, const workload::ArrivalPlan& plan,
                                     const ModelProfile& model, double tightness) {
  if (plan.arrivals.size() != scored.size()) throw Error("arrival plan size does not match the workload");
  sim::SimInput in;
  in.tasks.reserve(scored.size());
  in.true_output_len.reserve(scored.size());
  for (std::size_t i = 0; i < plan.arrivals.size(); ++i) {
    const auto& s = scored.at(plan.order[i]);
    sched::Task t;
    t.id = s.record.id;
    t.text = s.record.text;
    t.arrival = plan.arrivals[i];
    t.input_len = s.input_len;
    t.uncertainty = s.uncertainty;
    t.deadline = workload::quantize_us(
        sched::assign_deadline(t.arrival, t.input_len, model, tightness, s.record.deadline));
    in.tasks.push_back(std::move(t));
    in.true_output_len.push_back(s.record.out_len);
  }
  return in;
}

// Identifies the released workload: ids, texts, arrivals, deadlines, lengths.
inline std::string workload_fingerprint(const sim::SimInput& in) {
  std::uint64_t h = fnv1a64("");
  for (std::size_t i = 0; i < in.tasks.size(); ++i) {
    const auto& t = in.tasks[i];
    const std::string row = std::to_string(t.id) + ',' + hex64(fnv1a64(t.text)) + ',' +
                            std::to_string(sim::to_us(t.arrival)) + ',' + std::to_string(sim::to_us(t.deadline)) +
                            ',' + std::to_string(t.input_len) + ',' + std::to_string(in.true_output_len[i]) + '\n';
    h = fnv1a64(row, h);
  }
  return "fnv1a64:" + hex64(h);
}

// Records after the variance subset and malicious injection, scored once.
struct PreparedWorkload {
  std::vector<ScoredRecord> scored;
  workload::ArrivalPlan plan;
  sim::SimInput input;
  std::string fingerprint;
};

inline PreparedWorkload prepare_workload(const std::vector<workload::TraceRecord>& trace,
                                         const ProfileArtifact& profile, const WorkloadConfig& wl,
                                         std::uint64_t seed) {
  if (trace.empty()) throw ConfigError("trace is empty");
  auto records = select_variance(trace, wl.variance, profile, seed);
  records = workload::inject_malicious(std::move(records), wl.malicious_ratio, wl.inflation, seed);
  PreparedWorkload p;
  p.scored = score_records(records, profile);
  p.plan = workload::gen_arrivals(p.scored.size(), workload::BetaSchedule::parse(wl.beta_schedule), seed);
  p.input = build_sim_input(p.scored, p.plan, profile.model, wl.deadline_tightness);
  p.fingerprint = workload_fingerprint(p.input);
  return p;
}

struct RunOutput {
  sim::SimResult result;
  metrics::SimReport report;
};

inline RunOutput run_prepared(const PreparedWorkload& w, const sched::SchedulerConfig& cfg,
                              const ModelProfile& model, const sim::SimConfig& sim_cfg, std::uint64_t seed,
                              const std::string& config_fingerprint = {}) {
  RunOutput out;
  out.result = sim::run_sim(w.input, cfg, model, sim_cfg);
  out.report = metrics::summarize(out.result.log);
  out.report.policy = std::string(sched::to_string(cfg.policy));
  out.report.seed = seed;
  out.report.workload_fingerprint = w.fingerprint;
  out.report.config_fingerprint = config_fingerprint;
  return out;
}

}  // namespace rtlm::pipeline
