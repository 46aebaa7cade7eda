#pragma once

#include <array>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "estimator.hpp"
#include "hash.hpp"
#include "model_profile.hpp"
#include "sched.hpp"
#include "textfeat.hpp"

namespace rtlm {

inline constexpr std::string_view kProfileFormat = "rtlm-profile/1";

struct SchedulerDefaults {
  double alpha = 1.0;
  double lambda = 1.5;
  double b = 1.6;
  double k = 0.9;
  friend bool operator==(const SchedulerDefaults&, const SchedulerDefaults&) = default;
};

struct EstimatorArtifact {
  estimator::MlpRegressor model;
  bool include_input_length = false;
  double final_loss = 0.0;
  int attempts = 0;
};

// Everything the online phase needs for one LM.
struct ProfileArtifact {
  ModelProfile model;
  SchedulerDefaults scheduler;
  std::optional<EstimatorArtifact> estimator;
  std::vector<double> train_scores;  // lets tau be recomputed for another k
  std::string lexicon_version;
  std::string content_hash;
};

// Calibrations for the four reference LMs. u_max stays 0 until profiling.
inline ModelProfile reference_model(std::string_view name) {
  ModelProfile p;
  p.name = std::string(name);
  if (name == "dialogpt") {
    p.eta = 0.05, p.mu = 0.08, p.batch_size = 11, p.tau = 35;
  } else if (name == "blenderbot") {
    p.eta = 0.1, p.mu = 0.13, p.batch_size = 33, p.tau = 29;
  } else if (name == "bart") {
    p.eta = 0.05, p.mu = 0.08, p.batch_size = 11, p.tau = 26;
  } else if (name == "t5") {
    p.eta = 0.04, p.mu = 0.07, p.batch_size = 33, p.tau = 22;
  } else {
    throw ConfigError("unknown reference model '" + std::string(name) + "'");
  }
  return p;
}

inline constexpr std::array<std::string_view, 4> kReferenceModels = {"dialogpt", "blenderbot", "bart", "t5"};

namespace detail {

inline nlohmann::ordered_json matrix_json(const estimator::RowMatrix& m) {
  std::vector<double> flat(m.data(), m.data() + m.size());
  return flat;
}

inline nlohmann::ordered_json body_json(const ProfileArtifact& a) {
  nlohmann::ordered_json j;
  j["format"] = kProfileFormat;
  const auto& m = a.model;
  j["model"] = {{"name", m.name},
                {"eta", m.eta},
                {"mu", m.mu},
                {"batch_size", m.batch_size},
                {"tau", m.tau},
                {"u_max", m.u_max},
                {"base_latency_gpu", m.base_latency_gpu},
                {"batch_setup", m.batch_setup},
                {"cpu_slowdown", m.cpu_slowdown}};
  j["scheduler"] = {{"alpha", a.scheduler.alpha},
                    {"lambda", a.scheduler.lambda},
                    {"b", a.scheduler.b},
                    {"k", a.scheduler.k}};
  if (a.estimator) {
    const auto& e = *a.estimator;
    nlohmann::ordered_json ej;
    ej["layer_dims"] = e.model.layer_dims;
    ej["include_input_length"] = e.include_input_length;
    ej["rng_seed"] = e.model.rng_seed;
    ej["final_loss"] = e.final_loss;
    ej["attempts"] = e.attempts;
    auto& w = ej["weights"] = nlohmann::ordered_json::array();
    for (const auto& x : e.model.weights) w.push_back(matrix_json(x));
    auto& b = ej["biases"] = nlohmann::ordered_json::array();
    for (const auto& x : e.model.biases) b.push_back(std::vector<double>(x.data(), x.data() + x.size()));
    j["estimator"] = std::move(ej);
  } else {
    j["estimator"] = nullptr;
  }
  j["train_scores"] = a.train_scores;
  j["lexicon_version"] = a.lexicon_version;
  return j;
}

}  // namespace detail

// Hash over the compact dump of everything except the hash itself.
inline std::string profile_hash(const ProfileArtifact& a) { return content_hash(detail::body_json(a).dump()); }

inline nlohmann::ordered_json profile_to_json(const ProfileArtifact& a) {
  auto j = detail::body_json(a);
  j["content_hash"] = profile_hash(a);
  return j;
}

inline std::string dump_profile(const ProfileArtifact& a) { return profile_to_json(a).dump(2) + "\n"; }

inline ProfileArtifact profile_from_json(const nlohmann::json& j) {
  ProfileArtifact a;
  try {
    if (j.at("format").get<std::string>() != kProfileFormat) throw ConfigError("unsupported profile format");
    const auto& m = j.at("model");
    a.model.name = m.at("name").get<std::string>();
    a.model.eta = m.at("eta").get<double>();
    a.model.mu = m.at("mu").get<double>();
    a.model.batch_size = m.at("batch_size").get<int>();
    a.model.tau = m.at("tau").get<double>();
    a.model.u_max = m.at("u_max").get<double>();
    a.model.base_latency_gpu = m.at("base_latency_gpu").get<double>();
    a.model.batch_setup = m.at("batch_setup").get<double>();
    a.model.cpu_slowdown = m.at("cpu_slowdown").get<double>();
    const auto& s = j.at("scheduler");
    a.scheduler.alpha = s.at("alpha").get<double>();
    a.scheduler.lambda = s.at("lambda").get<double>();
    a.scheduler.b = s.at("b").get<double>();
    a.scheduler.k = s.at("k").get<double>();
    if (j.contains("estimator") && !j["estimator"].is_null()) {
      const auto& e = j["estimator"];
      EstimatorArtifact ea;
      ea.model.layer_dims = e.at("layer_dims").get<std::vector<int>>();
      ea.model.rng_seed = e.at("rng_seed").get<std::uint64_t>();
      ea.include_input_length = e.at("include_input_length").get<bool>();
      ea.final_loss = e.at("final_loss").get<double>();
      ea.attempts = e.at("attempts").get<int>();
      const auto& dims = ea.model.layer_dims;
      const auto& ws = e.at("weights");
      const auto& bs = e.at("biases");
      if (dims.size() < 2 || ws.size() != dims.size() - 1 || bs.size() != dims.size() - 1) {
        throw ConfigError("estimator layer count mismatch");
      }
      for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const auto w = ws[l].get<std::vector<double>>();
        const auto b = bs[l].get<std::vector<double>>();
        if (w.size() != static_cast<std::size_t>(dims[l + 1]) * static_cast<std::size_t>(dims[l]) ||
            b.size() != static_cast<std::size_t>(dims[l + 1])) {
          throw ConfigError("estimator layer " + std::to_string(l) + " has the wrong shape");
        }
        ea.model.weights.push_back(Eigen::Map<const estimator::RowMatrix>(w.data(), dims[l + 1], dims[l]));
        ea.model.biases.push_back(Eigen::Map<const Eigen::VectorXd>(b.data(), dims[l + 1]));
      }
      a.estimator = std::move(ea);
    }
    a.train_scores = j.at("train_scores").get<std::vector<double>>();
    a.lexicon_version = j.at("lexicon_version").get<std::string>();
    a.content_hash = j.at("content_hash").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed profile: ") + e.what());
  }
  a.model.validate();
  const auto expect = profile_hash(a);
  if (a.content_hash != expect) {
    throw HashMismatch("profile content hash " + a.content_hash + " does not match its contents (" + expect + ")");
  }
  return a;
}

inline ProfileArtifact load_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open profile: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("profile " + path + ": " + e.what());
  }
  return profile_from_json(j);
}

inline void save_profile(ProfileArtifact& a, const std::string& path) {
  a.content_hash = profile_hash(a);
  std::ofstream out(path);
  if (!out) throw Error("cannot write profile: " + path);
  out << dump_profile(a);
}

inline ProfileArtifact reference_profile(std::string_view name) {
  ProfileArtifact a;
  a.model = reference_model(name);
  a.lexicon_version = textfeat::default_lexicon().version;
  a.content_hash = profile_hash(a);
  return a;
}

// Offline phase: fit the estimator on a trace and fill tau and u_max.
// The reference tau is replaced by the k-quantile of the training predictions.
inline ProfileArtifact build_profile(ModelProfile model, const SchedulerDefaults& sched_defaults,
                                     std::span<const estimator::TrainRecord> records,
                                     const estimator::ModelConfig& cfg) {
  const auto off = estimator::profile_offline(records, sched_defaults.k, cfg);
  ProfileArtifact a;
  model.tau = off.tau;
  model.u_max = off.u_max;
  a.model = std::move(model);
  a.scheduler = sched_defaults;
  EstimatorArtifact ea;
  ea.model = off.model;
  ea.include_input_length = off.include_input_length;
  ea.final_loss = off.training.epoch_losses.empty() ? 0.0 : off.training.epoch_losses.back();
  ea.attempts = off.training.attempts;
  a.estimator = std::move(ea);
  a.train_scores = off.train_scores;
  a.lexicon_version = textfeat::default_lexicon().version;
  a.content_hash = profile_hash(a);
  return a;
}

}  // namespace rtlm
