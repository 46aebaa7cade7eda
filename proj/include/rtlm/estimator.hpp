#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "rng.hpp"
#include "textfeat.hpp"

namespace rtlm::estimator {

using textfeat::FeatureVector;
using textfeat::kNumFeatures;

struct TrainRecord {
  FeatureVector features;
  int target_len = 1;  // |y_J|, tokens
  double input_len = 0.0;  // only read when the optional length feature is on
};

// Predicted output length in tokens plus its position under the profile's
// normalization ceiling.
struct UncertaintyScore {
  double value = 0.0;
  double normalized = 0.0;

  static UncertaintyScore from_value(double value, double u_max) {
    value = std::max(0.0, value);
    return {value, u_max > 0.0 ? std::min(1.0, value / u_max) : 0.0};
  }
};

// ---------------------------------------------------------------------------
// Weighted rule: linear regression over the six rule scores
// ---------------------------------------------------------------------------

struct WeightedRule {
  std::array<double, kNumFeatures> coefficients{};
  double intercept = 0.0;

  double predict(const FeatureVector& f) const {
    double y = intercept;
    for (std::size_t i = 0; i < kNumFeatures; ++i) y += coefficients[i] * f.scores[i];
    return y;
  }
};

inline constexpr double kRidgeDamping = 1e-8;
inline constexpr double kMaxConditionNumber = 1e12;

// Ordinary least squares through the damped normal equations
//   (X^T X + 1e-8 I) beta = X^T y
// with an intercept column. Feature columns that are identically zero get a
// zero coefficient and are left out of the condition estimate.
inline WeightedRule fit_weighted_rule(std::span<const TrainRecord> records) {
  if (records.size() < kNumFeatures + 1) {
    throw DegenerateDesign("weighted rule needs at least 7 records, got " + std::to_string(records.size()));
  }
  std::vector<std::size_t> active;
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    for (const auto& r : records) {
      if (r.features.scores[j] != 0.0) {
        active.push_back(j);
        break;
      }
    }
  }
  if (active.empty()) throw DegenerateDesign("feature matrix is all zero");

  const auto n = static_cast<Eigen::Index>(records.size());
  const auto p = static_cast<Eigen::Index>(active.size()) + 1;
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    for (Eigen::Index k = 0; k + 1 < p; ++k) X(i, k) = r.features.scores[active[static_cast<std::size_t>(k)]];
    X(i, p - 1) = 1.0;
    y(i) = r.target_len;
  }
  Eigen::MatrixXd A = X.transpose() * X;
  A.diagonal().array() += kRidgeDamping;
  const Eigen::VectorXd rhs = X.transpose() * y;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > kMaxConditionNumber) {
    throw DegenerateDesign("damped normal matrix is numerically singular (condition estimate " +
                           std::to_string(lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity()) + ")");
  }
  const Eigen::VectorXd beta = A.ldlt().solve(rhs);

  WeightedRule rule;
  for (std::size_t k = 0; k < active.size(); ++k) rule.coefficients[active[k]] = beta(static_cast<Eigen::Index>(k));
  rule.intercept = beta(p - 1);
  return rule;
}

// ---------------------------------------------------------------------------
// Lightweight MLP regressor
// ---------------------------------------------------------------------------

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline const std::vector<int> kDefaultLayerDims = {6, 100, 200, 200, 100, 1};

// Fully connected network, ReLU on hidden layers, identity output.
// weights[l] is (dims[l+1] x dims[l]), stored row-major.
struct MlpRegressor {
  std::vector<int> layer_dims;
  std::vector<RowMatrix> weights;
  std::vector<Eigen::VectorXd> biases;
  std::uint64_t rng_seed = 0;

  std::size_t num_layers() const { return weights.size(); }
  int input_dim() const { return layer_dims.front(); }

  // Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  static MlpRegressor init(std::vector<int> dims, std::uint64_t seed) {
    if (dims.size() < 2 || dims.back() != 1) throw Error("MLP needs >= 2 layers and a scalar output");
    for (int d : dims) {
      if (d < 1) throw Error("MLP layer dims must be positive");
    }
    MlpRegressor m;
    m.layer_dims = std::move(dims);
    m.rng_seed = seed;
    Rng rng(seed, "init");
    for (std::size_t l = 0; l + 1 < m.layer_dims.size(); ++l) {
      const int in = m.layer_dims[l];
      const int out = m.layer_dims[l + 1];
      const double limit = std::sqrt(6.0 / (in + out));
      RowMatrix w(out, in);
      for (int r = 0; r < out; ++r) {
        for (int c = 0; c < in; ++c) w(r, c) = rng.uniform(-limit, limit);
      }
      m.weights.push_back(std::move(w));
      m.biases.push_back(Eigen::VectorXd::Zero(out));
    }
    return m;
  }

  static MlpRegressor zeros(std::vector<int> dims) {
    MlpRegressor m = init(std::move(dims), 0);
    for (auto& w : m.weights) w.setZero();
    return m;
  }

  bool dims_consistent() const {
    if (layer_dims.size() != weights.size() + 1 || biases.size() != weights.size()) return false;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (weights[l].rows() != layer_dims[l + 1] || weights[l].cols() != layer_dims[l]) return false;
      if (biases[l].size() != layer_dims[l + 1]) return false;
    }
    return true;
  }

  // Raw network output.
  double forward(std::span<const double> x) const {
    Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    for (std::size_t l = 0; l < weights.size(); ++l) {
      Eigen::VectorXd z = weights[l] * a + biases[l];
      if (l + 1 < weights.size()) z = z.cwiseMax(0.0);
      a = std::move(z);
    }
    return a(0);
  }
};

// Model input for one text: the six scores, optionally followed by the input
// length in tokens.
inline std::vector<double> model_input(const FeatureVector& f, bool include_input_length, double input_len) {
  std::vector<double> x(f.scores.begin(), f.scores.end());
  if (include_input_length) x.push_back(input_len);
  return x;
}

inline UncertaintyScore mlp_predict(const MlpRegressor& model, const FeatureVector& f, double u_max,
                                    bool include_input_length = false, double input_len = 0.0) {
  const auto x = model_input(f, include_input_length, input_len);
  return UncertaintyScore::from_value(model.forward(x), u_max);
}

// Parameter gradients, same shapes as the model.
struct MlpGradients {
  std::vector<RowMatrix> weights;
  std::vector<Eigen::VectorXd> biases;
};

// Mean squared error over the columns of X (one sample per column) and its
// gradient with respect to every parameter.
inline double mlp_loss_and_gradient(const MlpRegressor& m, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                    MlpGradients* grad) {
  const std::size_t L = m.weights.size();
  const auto batch = X.cols();
  std::vector<Eigen::MatrixXd> acts;  // acts[l] is the input to layer l
  acts.reserve(L + 1);
  acts.push_back(X);
  for (std::size_t l = 0; l < L; ++l) {
    Eigen::MatrixXd z = m.weights[l] * acts[l];
    z.colwise() += m.biases[l];
    if (l + 1 < L) z = z.cwiseMax(0.0);
    acts.push_back(std::move(z));
  }
  const Eigen::RowVectorXd err = acts[L].row(0) - y.transpose();
  const double loss = err.squaredNorm() / static_cast<double>(batch);
  if (!grad) return loss;

  grad->weights.resize(L);
  grad->biases.resize(L);
  Eigen::MatrixXd delta = (2.0 / static_cast<double>(batch)) * err;  // 1 x batch
  for (std::size_t l = L; l-- > 0;) {
    grad->weights[l] = delta * acts[l].transpose();
    grad->biases[l] = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd back = m.weights[l].transpose() * delta;
    // ReLU derivative: the stored activation is positive exactly where z > 0.
    delta = back.cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
  }
  return loss;
}

enum class Optimizer { kAdam, kSgd };

struct TrainConfig {
  int epochs = 100;
  double learning_rate = 1e-4;
  int batch_size = 16;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool include_input_length = false;
  // Fresh-seed retries when the final epoch loss ends above the first.
  int max_reseeds = 3;
};

struct TrainResult {
  std::vector<double> epoch_losses;
  int attempts = 1;
  bool final_below_first = true;
};

namespace detail {

inline void build_batch(std::span<const TrainRecord> records, std::span<const std::size_t> idx,
                        bool include_len, Eigen::MatrixXd& X, Eigen::VectorXd& y) {
  const auto dim = static_cast<Eigen::Index>(kNumFeatures + (include_len ? 1 : 0));
  X.resize(dim, static_cast<Eigen::Index>(idx.size()));
  y.resize(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t c = 0; c < idx.size(); ++c) {
    const auto& r = records[idx[c]];
    const auto col = static_cast<Eigen::Index>(c);
    for (std::size_t j = 0; j < kNumFeatures; ++j) X(static_cast<Eigen::Index>(j), col) = r.features.scores[j];
    if (include_len) X(dim - 1, col) = r.input_len;
    y(col) = r.target_len;
  }
}

inline TrainResult train_once(MlpRegressor& model, std::span<const TrainRecord> records, const TrainConfig& cfg,
                              std::uint64_t shuffle_seed) {
  TrainResult result;
  const std::size_t L = model.weights.size();
  std::vector<RowMatrix> mw, vw;
  std::vector<Eigen::VectorXd> mb, vb;
  for (std::size_t l = 0; l < L; ++l) {
    mw.push_back(RowMatrix::Zero(model.weights[l].rows(), model.weights[l].cols()));
    vw.push_back(mw.back());
    mb.push_back(Eigen::VectorXd::Zero(model.biases[l].size()));
    vb.push_back(mb.back());
  }
  Rng rng(shuffle_seed, "shuffle");
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const std::size_t bs = static_cast<std::size_t>(std::max(1, cfg.batch_size));
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  MlpGradients g;
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t count = std::min(bs, order.size() - start);
      build_batch(records, std::span(order).subspan(start, count), cfg.include_input_length, X, y);
      const double loss = mlp_loss_and_gradient(model, X, y, &g);
      if (!std::isfinite(loss)) {
        throw NonFiniteLoss("training loss became non-finite at epoch " + std::to_string(epoch));
      }
      sum += loss * static_cast<double>(count);
      ++step;
      if (cfg.optimizer == Optimizer::kSgd) {
        for (std::size_t l = 0; l < L; ++l) {
          model.weights[l] -= cfg.learning_rate * g.weights[l];
          model.biases[l] -= cfg.learning_rate * g.biases[l];
        }
        continue;
      }
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      for (std::size_t l = 0; l < L; ++l) {
        mw[l] = cfg.beta1 * mw[l] + (1.0 - cfg.beta1) * g.weights[l];
        vw[l] = cfg.beta2 * vw[l] + (1.0 - cfg.beta2) * g.weights[l].cwiseAbs2();
        model.weights[l].array() -=
            cfg.learning_rate * (mw[l].array() / c1) / ((vw[l].array() / c2).sqrt() + cfg.epsilon);
        mb[l] = cfg.beta1 * mb[l] + (1.0 - cfg.beta1) * g.biases[l];
        vb[l] = cfg.beta2 * vb[l] + (1.0 - cfg.beta2) * g.biases[l].cwiseAbs2();
        model.biases[l].array() -=
            cfg.learning_rate * (mb[l].array() / c1) / ((vb[l].array() / c2).sqrt() + cfg.epsilon);
      }
    }
    const double epoch_loss = sum / static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss)) throw NonFiniteLoss("non-finite epoch loss");
    result.epoch_losses.push_back(epoch_loss);
  }
  if (!result.epoch_losses.empty()) {
    result.final_below_first = result.epoch_losses.back() <= result.epoch_losses.front();
  }
  return result;
}

}  // namespace detail

// Mini-batch training on mean squared error. With >= 32 records the final
// epoch loss must not exceed the first; otherwise the model is re-initialized
// from a fresh seed, up to `max_reseeds` times.
inline TrainResult mlp_train(MlpRegressor& model, std::span<const TrainRecord> records, const TrainConfig& cfg) {
  if (records.empty()) throw Error("mlp_train needs at least one record");
  const std::vector<int> dims = model.layer_dims;
  std::uint64_t seed = cfg.seed;
  TrainResult result;
  for (int attempt = 1;; ++attempt) {
    result = detail::train_once(model, records, cfg, seed);
    result.attempts = attempt;
    if (records.size() < 32 || result.final_below_first || attempt > cfg.max_reseeds) break;
    seed = splitmix64(seed + 0x5eedULL);
    model = MlpRegressor::init(dims, seed);
  }
  return result;
}

inline double mlp_mse(const MlpRegressor& m, std::span<const TrainRecord> records, bool include_len = false) {
  double sum = 0.0;
  for (const auto& r : records) {
    const auto x = model_input(r.features, include_len, r.input_len);
    const double e = m.forward(x) - r.target_len;
    sum += e * e;
  }
  return records.empty() ? 0.0 : sum / static_cast<double>(records.size());
}

// ---------------------------------------------------------------------------
// Malicious threshold
// ---------------------------------------------------------------------------

// Nearest-rank quantile: the element at index ceil(k * n) - 1 of the sorted scores.
inline double quantile_threshold(std::vector<double> scores, double k) {
  if (scores.empty()) throw EmptyScores("quantile of an empty score set");
  if (!(k > 0.0 && k < 1.0)) throw Error("quantile level k must lie in (0, 1)");
  const auto n = scores.size();
  auto rank = static_cast<std::size_t>(std::ceil(k * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(rank - 1), scores.end());
  return scores[rank - 1];
}

// ---------------------------------------------------------------------------
// Offline profiling
// ---------------------------------------------------------------------------

struct ModelConfig {
  std::vector<int> layer_dims = kDefaultLayerDims;
  TrainConfig train;
};

struct OfflineProfile {
  MlpRegressor model;
  double tau = 0.0;
  double u_max = 0.0;
  double k = 0.9;
  bool include_input_length = false;
  std::vector<double> train_scores;  // the model's predictions on its own training set
  TrainResult training;
};

inline OfflineProfile profile_offline(std::span<const TrainRecord> records, double k, const ModelConfig& cfg) {
  if (records.empty()) throw Error("profile_offline needs training records");
  std::vector<int> dims = cfg.layer_dims;
  dims.front() = static_cast<int>(kNumFeatures) + (cfg.train.include_input_length ? 1 : 0);

  OfflineProfile out;
  out.k = k;
  out.include_input_length = cfg.train.include_input_length;
  out.model = MlpRegressor::init(dims, cfg.train.seed);
  out.training = mlp_train(out.model, records, cfg.train);

  out.train_scores.reserve(records.size());
  for (const auto& r : records) {
    const auto x = model_input(r.features, out.include_input_length, r.input_len);
    out.train_scores.push_back(std::max(0.0, out.model.forward(x)));
  }
  out.u_max = *std::max_element(out.train_scores.begin(), out.train_scores.end());
  if (!(out.u_max > 0.0)) throw DegenerateDesign("all training-set predictions are zero");
  out.tau = quantile_threshold(out.train_scores, k);
  return out;
}

}  // namespace rtlm::estimator
