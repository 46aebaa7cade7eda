#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include <rtlm/estimator.hpp>
#include <rtlm/pipeline.hpp>
#include <rtlm/profile.hpp>
#include <rtlm/rng.hpp>
#include <rtlm/synth.hpp>

using namespace rtlm;
using namespace rtlm::estimator;

namespace {

TrainRecord rec(std::array<double, 6> f, int target) {
  TrainRecord r;
  r.features.scores = f;
  r.target_len = target;
  return r;
}

// target = 2 * vague + 5, every other feature zero.
std::vector<TrainRecord> exact_linear(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TrainRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = static_cast<double>(rng.below(6));
    out.push_back(rec({0, 0, 0, v, 0, 0}, static_cast<int>(2 * v + 5)));
  }
  return out;
}

double rss(const WeightedRule& w, const std::vector<TrainRecord>& rs) {
  double s = 0.0;
  for (const auto& r : rs) s += std::pow(w.predict(r.features) - r.target_len, 2);
  return s;
}

double sort_oracle(std::vector<double> v, double k) {
  std::sort(v.begin(), v.end());
  const auto idx = static_cast<std::size_t>(std::ceil(k * static_cast<double>(v.size()))) - 1;
  return v[idx];
}

}  // namespace

TEST(WeightedRule, RecoversExactLinearTarget) {
  const auto rs = exact_linear(200, 1);
  const auto w = fit_weighted_rule(rs);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(w.coefficients[i], i == 3 ? 2.0 : 0.0, 1e-6);
  EXPECT_NEAR(w.intercept, 5.0, 1e-6);
}

TEST(WeightedRule, ConstantTargetGivesInterceptOnly) {
  Rng rng(2);
  std::vector<TrainRecord> rs;
  for (int i = 0; i < 100; ++i) {
    rs.push_back(rec({rng.uniform(0, 3), rng.uniform(0, 3), 0, rng.uniform(0, 3), 0, 0}, 17));
  }
  const auto w = fit_weighted_rule(rs);
  EXPECT_NEAR(w.intercept, 17.0, 1e-6);
  for (double c : w.coefficients) EXPECT_NEAR(c, 0.0, 1e-6);
}

TEST(WeightedRule, NeverWorseThanSingleCoefficientModels) {
  const auto trace = synth::synthesize_trace(500, 4);
  const auto rs = pipeline::train_records(trace);
  const auto w = fit_weighted_rule(rs);
  const double full = rss(w, rs);
  EXPECT_LE(full, rss(WeightedRule{}, rs));
  for (std::size_t j = 0; j < 6; ++j) {
    std::vector<TrainRecord> one = rs;
    for (auto& r : one) {
      for (std::size_t i = 0; i < 6; ++i) {
        if (i != j) r.features.scores[i] = 0.0;
      }
    }
    bool any = false;
    for (const auto& r : one) any = any || r.features.scores[j] != 0.0;
    if (!any) continue;
    const auto single = fit_weighted_rule(one);
    EXPECT_LE(full, rss(single, one) * (1 + 1e-9));
  }
}

TEST(WeightedRule, RejectsDegenerateDesigns) {
  std::vector<TrainRecord> few(6, rec({1, 0, 0, 0, 0, 0}, 3));
  EXPECT_THROW(fit_weighted_rule(few), DegenerateDesign);
  std::vector<TrainRecord> zero(20, rec({0, 0, 0, 0, 0, 0}, 3));
  EXPECT_THROW(fit_weighted_rule(zero), DegenerateDesign);
}

TEST(WeightedRule, DampingSplitsWeightAcrossIdenticalColumns) {
  std::vector<TrainRecord> dup;
  for (int i = 0; i < 20; ++i) dup.push_back(rec({double(i), double(i), 0, 0, 0, 0}, i));
  const auto w = fit_weighted_rule(dup);
  EXPECT_NEAR(w.coefficients[0], w.coefficients[1], 1e-9);
  for (const auto& r : dup) EXPECT_NEAR(w.predict(r.features), r.target_len, 1e-6);
}

TEST(Mlp, ZeroNetworkPredictsZero) {
  const auto m = MlpRegressor::zeros(kDefaultLayerDims);
  FeatureVector f;
  f.scores = {1, 2, 3, 4, 5, 6};
  EXPECT_EQ(mlp_predict(m, f, 10.0).value, 0.0);
}

TEST(Mlp, HandBuiltPathRoutesOneFeature) {
  // 6 -> 2 -> 1, hidden unit 0 copies feature 4, output scales it by g.
  auto m = MlpRegressor::zeros({6, 2, 1});
  const double g = 3.5;
  m.weights[0](0, 4) = 1.0;
  m.weights[1](0, 0) = g;
  FeatureVector f;
  f.scores = {9, 9, 9, 9, 2.0, 9};
  EXPECT_DOUBLE_EQ(mlp_predict(m, f, 100.0).value, g * 2.0);
  EXPECT_DOUBLE_EQ(mlp_predict(m, f, 100.0).value, mlp_predict(m, f, 100.0).value);
}

TEST(Mlp, NegativeOutputClampsAndNormalizedStaysInUnitInterval) {
  auto m = MlpRegressor::zeros({6, 1});
  m.biases[0](0) = -4.0;
  FeatureVector f;
  EXPECT_EQ(mlp_predict(m, f, 10.0).value, 0.0);
  m.biases[0](0) = 40.0;
  EXPECT_EQ(mlp_predict(m, f, 10.0).normalized, 1.0);
  EXPECT_DOUBLE_EQ(mlp_predict(m, f, 80.0).normalized, 0.5);
}

TEST(Mlp, InitIsSeededAndDimensionallyConsistent) {
  const auto a = MlpRegressor::init(kDefaultLayerDims, 3);
  const auto b = MlpRegressor::init(kDefaultLayerDims, 3);
  EXPECT_TRUE(a.dims_consistent());
  for (std::size_t l = 0; l < a.num_layers(); ++l) EXPECT_EQ(a.weights[l], b.weights[l]);
  const double limit = std::sqrt(6.0 / (6 + 100));
  EXPECT_LE(a.weights[0].cwiseAbs().maxCoeff(), limit);
}

TEST(Mlp, GradientMatchesCentralDifferences) {
  Rng rng(77);
  const double h = 1e-4;
  double worst = 0.0;
  for (int probe = 0; probe < 100; ++probe) {
    auto m = MlpRegressor::init({6, 3, 1}, 1000 + probe);
    for (auto& b : m.biases) {
      for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = rng.uniform(-0.5, 0.5);
    }
    Eigen::MatrixXd X(6, 4);
    Eigen::VectorXd y(4);
    for (Eigen::Index c = 0; c < 4; ++c) {
      for (Eigen::Index r = 0; r < 6; ++r) X(r, c) = rng.uniform(0, 3);
      y(c) = rng.uniform(0, 10);
    }
    MlpGradients g;
    mlp_loss_and_gradient(m, X, y, &g);
    // One random weight or bias per probe.
    const auto l = static_cast<std::size_t>(rng.below(2));
    const bool bias = rng.bernoulli(0.3);
    double* p;
    double analytic;
    if (bias) {
      const auto i = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(m.biases[l].size())));
      p = &m.biases[l](i);
      analytic = g.biases[l](i);
    } else {
      const auto r = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(m.weights[l].rows())));
      const auto c = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(m.weights[l].cols())));
      p = &m.weights[l](r, c);
      analytic = g.weights[l](r, c);
    }
    const double saved = *p;
    *p = saved + h;
    const double up = mlp_loss_and_gradient(m, X, y, nullptr);
    *p = saved - h;
    const double down = mlp_loss_and_gradient(m, X, y, nullptr);
    *p = saved;
    const double numeric = (up - down) / (2 * h);
    const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    worst = std::max(worst, rel);
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Train, MemorizesASingleRepeatedRecord) {
  std::vector<TrainRecord> rs(8, rec({1, 0, 2, 1, 0, 1}, 30));
  auto m = MlpRegressor::init({6, 16, 16, 1}, 5);
  const double before = std::abs(m.forward(model_input(rs[0].features, false, 0)) - 30);
  TrainConfig cfg;
  cfg.epochs = 300;
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 4;
  mlp_train(m, rs, cfg);
  const double after = std::abs(m.forward(model_input(rs[0].features, false, 0)) - 30);
  EXPECT_LE(after * 10, before);
}

TEST(Train, ZeroEpochsLeavesWeightsAlone) {
  auto m = MlpRegressor::init({6, 4, 1}, 9);
  const auto copy = m;
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto res = mlp_train(m, exact_linear(40, 1), cfg);
  EXPECT_TRUE(res.epoch_losses.empty());
  for (std::size_t l = 0; l < m.num_layers(); ++l) EXPECT_EQ(m.weights[l], copy.weights[l]);
}

TEST(Train, LossCurveIsFiniteAndEndsBelowItsStart) {
  auto m = MlpRegressor::init({6, 32, 32, 1}, 2);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.learning_rate = 1e-3;
  const auto res = mlp_train(m, exact_linear(128, 3), cfg);
  ASSERT_EQ(res.epoch_losses.size(), 30u);
  for (double l : res.epoch_losses) EXPECT_TRUE(std::isfinite(l));
  EXPECT_LE(res.epoch_losses.back(), res.epoch_losses.front());
}

TEST(Train, DivergenceRaisesNonFiniteLoss) {
  auto m = MlpRegressor::init({6, 8, 1}, 2);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.learning_rate = 1e6;
  cfg.optimizer = Optimizer::kSgd;
  std::vector<TrainRecord> rs(40, rec({50, 50, 50, 50, 50, 50}, 1000));
  EXPECT_THROW(mlp_train(m, rs, cfg), NonFiniteLoss);
}

TEST(Train, RescaledTargetScalesPredictions) {
  // Fitting 2x the targets with the same seed roughly doubles the predictions
  // on the exact-linear data.
  const auto rs = exact_linear(256, 9);
  auto doubled = rs;
  for (auto& r : doubled) r.target_len *= 2;
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.learning_rate = 3e-3;
  auto a = MlpRegressor::init({6, 16, 1}, 4);
  auto b = MlpRegressor::init({6, 16, 1}, 4);
  mlp_train(a, rs, cfg);
  mlp_train(b, doubled, cfg);
  for (int v = 0; v <= 5; ++v) {
    FeatureVector f;
    f.scores[3] = v;
    const double pa = a.forward(model_input(f, false, 0));
    const double pb = b.forward(model_input(f, false, 0));
    EXPECT_NEAR(pb, 2 * pa, 0.1 * (2 * pa) + 0.5) << v;
  }
}

TEST(Quantile, NearestRank) {
  std::vector<double> s;
  for (int i = 1; i <= 10; ++i) s.push_back(i);
  EXPECT_EQ(quantile_threshold(s, 0.9), 9.0);
  EXPECT_EQ(quantile_threshold({5.0}, 0.01), 5.0);
  EXPECT_EQ(quantile_threshold({5.0}, 0.99), 5.0);
  EXPECT_THROW(quantile_threshold({}, 0.5), EmptyScores);
  EXPECT_THROW(quantile_threshold({1.0}, 1.0), Error);
}

TEST(Quantile, MatchesSortOracleAndIsMonotoneInK) {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(1 + rng.below(1000));
    for (auto& x : s) x = rng.uniform(0, 100);
    const double k1 = rng.uniform(0.01, 0.99);
    const double k2 = rng.uniform(0.01, 0.99);
    EXPECT_EQ(quantile_threshold(s, k1), sort_oracle(s, k1));
    EXPECT_EQ(quantile_threshold(s, std::min(k1, k2)) <= quantile_threshold(s, std::max(k1, k2)), true);
  }
}

TEST(Quantile, OffloadCountMatchesSortAndCount) {
  Rng rng(8);
  std::vector<double> s(1000);
  for (auto& x : s) x = rng.uniform(0, 60);
  const double tau = quantile_threshold(s, 0.9);
  const auto above = std::count_if(s.begin(), s.end(), [&](double x) { return x > tau; });
  auto sorted = s;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(above, static_cast<long>(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), tau)));
  EXPECT_EQ(above, 100);
}

TEST(ProfileOffline, TauIsTheQuantileOfTrainingPredictions) {
  const auto trace = synth::synthesize_trace(300, 1);
  const auto rs = pipeline::train_records(trace);
  ModelConfig cfg;
  cfg.layer_dims = {6, 16, 16, 1};
  cfg.train.epochs = 20;
  cfg.train.learning_rate = 1e-3;
  cfg.train.seed = 3;
  const auto off = profile_offline(rs, 0.9, cfg);
  std::vector<double> preds;
  for (const auto& r : rs) preds.push_back(std::max(0.0, off.model.forward(model_input(r.features, false, 0))));
  EXPECT_EQ(off.tau, sort_oracle(preds, 0.9));
  EXPECT_EQ(off.u_max, *std::max_element(preds.begin(), preds.end()));
  EXPECT_GT(off.u_max, 0.0);
}

TEST(ProfileOffline, InputLengthFeatureWidensTheInput) {
  const auto trace = synth::synthesize_trace(100, 1);
  const auto rs = pipeline::train_records(trace);
  ModelConfig cfg;
  cfg.layer_dims = {6, 16, 1};
  cfg.train.epochs = 20;
  cfg.train.learning_rate = 1e-3;
  cfg.train.include_input_length = true;
  const auto off = profile_offline(rs, 0.9, cfg);
  EXPECT_EQ(off.model.input_dim(), 7);
  EXPECT_TRUE(off.include_input_length);
}

TEST(ProfileArtifact, RoundTripPredictsBitIdentically) {
  const auto trace = synth::synthesize_trace(120, 6);
  const auto rs = pipeline::train_records(trace);
  estimator::ModelConfig cfg;
  cfg.layer_dims = {6, 12, 12, 1};
  cfg.train.epochs = 5;
  cfg.train.seed = 2;
  const auto a = build_profile(reference_model("bart"), SchedulerDefaults{}, rs, cfg);
  const auto b = profile_from_json(nlohmann::json::parse(dump_profile(a)));
  EXPECT_EQ(b.content_hash, a.content_hash);
  EXPECT_EQ(b.model, a.model);
  EXPECT_EQ(b.train_scores, a.train_scores);
  for (const auto& r : rs) {
    const auto x = model_input(r.features, false, 0);
    EXPECT_EQ(a.estimator->model.forward(x), b.estimator->model.forward(x));
  }
}

TEST(ProfileArtifact, LoaderRejectsTamperedContent) {
  auto j = nlohmann::json::parse(dump_profile(reference_profile("t5")));
  j["model"]["tau"] = 23.0;
  EXPECT_THROW(profile_from_json(j), HashMismatch);
  auto k = nlohmann::json::parse(dump_profile(reference_profile("t5")));
  k.erase("model");
  EXPECT_THROW(profile_from_json(k), ConfigError);
}
