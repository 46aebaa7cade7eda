#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include <rtlm/pipeline.hpp>
#include <rtlm/profile.hpp>
#include <rtlm/synth.hpp>
#include <rtlm/workload.hpp>

using namespace rtlm;
using namespace rtlm::workload;

namespace {

std::vector<TraceRecord> numbered(std::size_t n) {
  std::vector<TraceRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    TraceRecord r;
    r.id = 500 + i;
    r.text = "question " + std::to_string(i);
    r.out_len = 1 + static_cast<int>(i % 37);
    out.push_back(r);
  }
  return out;
}

std::vector<double> gaps(const std::vector<double>& arrivals) {
  std::vector<double> g;
  for (std::size_t i = 1; i < arrivals.size(); ++i) g.push_back(arrivals[i] - arrivals[i - 1]);
  return g;
}

// Kolmogorov-Smirnov distance between a sample and Exp(rate).
double ks_exponential(std::vector<double> x, double rate) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double cdf = 1.0 - std::exp(-rate * x[i]);
    d = std::max({d, cdf - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - cdf});
  }
  return d;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Trace, ParsesRecords) {
  std::istringstream in(
      R"({"id":1,"text":"a","out_len":3,"deadline":null,"malicious":false})"
      "\n\n"
      R"({"id":2,"text":"b","out_len":4,"deadline":7.5})"
      "\n"
      R"({"id":3,"text":"c","out_len":1,"malicious":true})"
      "\r\n");
  const auto t = parse_trace(in);
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(t[1].out_len, 4);
  EXPECT_EQ(t[1].deadline, 7.5);
  EXPECT_FALSE(t[0].deadline);
  EXPECT_TRUE(t[2].malicious);
}

TEST(Trace, BadLinesReportTheirNumber) {
  std::istringstream in(R"({"id":1,"text":"a","out_len":3})"
                        "\n\n"
                        R"({"id":2,"text":"b"})"
                        "\n");
  try {
    parse_trace(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  std::istringstream garbage("{not json\n");
  EXPECT_THROW(parse_trace(garbage), ParseError);
}

TEST(Trace, RejectsInvalidRecords) {
  std::istringstream dup(R"({"id":1,"text":"a","out_len":3})"
                         "\n"
                         R"({"id":1,"text":"b","out_len":3})"
                         "\n");
  EXPECT_THROW(parse_trace(dup), InvalidRecord);
  std::istringstream zero(R"({"id":1,"text":"a","out_len":0})"
                          "\n");
  EXPECT_THROW(parse_trace(zero), InvalidRecord);
  EXPECT_THROW(load_trace("/nonexistent/trace.jsonl"), Error);
}

TEST(Trace, SaveLoadRoundTrip) {
  auto records = synth::synthesize_trace(100, 4);
  records[3].deadline = 12.25;
  records[7].malicious = true;
  std::ostringstream out;
  save_trace(records, out);
  std::istringstream in(out.str());
  EXPECT_EQ(parse_trace(in), records);
}

TEST(Trace, PackagedSyntheticFilesMatchTheGenerator) {
  std::ostringstream train, test;
  save_trace(synth::synthesize_trace(2000, 1), train);
  save_trace(synth::synthesize_trace(4000, 2, {}, 100000), test);
  EXPECT_EQ(slurp(std::string(RTLM_SOURCE_DIR) + "/data/synthetic_train.jsonl"), train.str());
  EXPECT_EQ(slurp(std::string(RTLM_SOURCE_DIR) + "/data/synthetic_test.jsonl"), test.str());
}

TEST(Beta, ParsesScheduleForms) {
  EXPECT_EQ(BetaSchedule::parse("60").per_minute, std::vector<double>{60});
  EXPECT_EQ(BetaSchedule::parse("10,0,30").per_minute, (std::vector<double>{10, 0, 30}));
  const auto ramp = BetaSchedule::parse("10:150:10");
  ASSERT_EQ(ramp.per_minute.size(), 15u);
  EXPECT_DOUBLE_EQ(ramp.per_minute.back(), 150.0);
  EXPECT_DOUBLE_EQ(ramp.at_minute(15), 10.0);
  for (const char* bad : {"", "x", "10:20", "10:20:0", "-5", "0,0"}) {
    EXPECT_THROW(BetaSchedule::parse(bad), ConfigError) << bad;
  }
}

TEST(Arrivals, ConstantRateMeanGap) {
  const std::size_t n = 10000;
  const auto plan = gen_arrivals(n, BetaSchedule::parse("60"), 7);
  const auto g = gaps(plan.arrivals);
  double mean = 0.0;
  for (double x : g) mean += x;
  mean /= static_cast<double>(g.size());
  // Exp(1): standard error of the mean is 1/sqrt(n).
  EXPECT_NEAR(mean, 1.0, 3.0 / std::sqrt(static_cast<double>(g.size())));
}

TEST(Arrivals, GapsFollowTheExponentialLaw) {
  for (double beta : {10.0, 60.0, 150.0}) {
    const auto plan = gen_arrivals(5000, BetaSchedule::parse(std::to_string(beta)), 3);
    const auto g = gaps(plan.arrivals);
    EXPECT_LT(ks_exponential(g, beta / 60.0), 1.628 / std::sqrt(static_cast<double>(g.size()))) << beta;
  }
}

TEST(Arrivals, SortedQuantizedAndSeeded) {
  const auto beta = BetaSchedule::parse("10:150:10");
  const auto a = gen_arrivals(500, beta, 11);
  const auto b = gen_arrivals(500, beta, 11);
  EXPECT_EQ(a.arrivals, b.arrivals);
  EXPECT_EQ(a.order, b.order);
  EXPECT_NE(gen_arrivals(500, beta, 12).arrivals, a.arrivals);
  EXPECT_TRUE(std::is_sorted(a.arrivals.begin(), a.arrivals.end()));
  for (double t : a.arrivals) EXPECT_EQ(t, quantize_us(t));
  auto order = a.order;
  std::sort(order.begin(), order.end());
  for (std::size_t i = 0; i < order.size(); ++i) EXPECT_EQ(order[i], i);
  EXPECT_THROW(gen_arrivals(0, beta, 1), Error);
}

TEST(Arrivals, RampRaisesTheSecondMinute) {
  const auto beta = BetaSchedule::parse("10:150:10");
  int higher = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto plan = gen_arrivals(200, beta, seed);
    int m0 = 0, m1 = 0;
    for (double t : plan.arrivals) {
      m0 += t < 60.0;
      m1 += t >= 60.0 && t < 120.0;
    }
    higher += m1 > m0;
  }
  EXPECT_GE(higher, 45);
}

TEST(Arrivals, ZeroRateMinutesStaySilent) {
  const auto plan = gen_arrivals(300, BetaSchedule::parse("60,0"), 5);
  for (double t : plan.arrivals) {
    EXPECT_EQ(static_cast<int>(std::floor(t / 60.0)) % 2, 0) << t;
  }
}

TEST(WaitInterval, GroupsArrivalsIntoWindows) {
  const auto e = apply_wait_interval({0.0, 1.0, 2.5, 3.0, 10.0}, 2.0);
  ASSERT_EQ(e.size(), 3u);
  EXPECT_EQ(e[0].last - e[0].first, 2u);
  EXPECT_DOUBLE_EQ(e[0].close, 2.0);
  EXPECT_DOUBLE_EQ(e[1].start, 2.5);
  EXPECT_DOUBLE_EQ(e[1].close, 4.5);
  EXPECT_EQ(e[2].first, 4u);
  // An arrival exactly at the close still joins.
  EXPECT_EQ(apply_wait_interval({0.0, 2.0}, 2.0).size(), 1u);
  EXPECT_EQ(apply_wait_interval({0.0, 0.0, 1.0}, 0.0).size(), 2u);
  EXPECT_TRUE(apply_wait_interval({}, 2.0).empty());
}

TEST(Malicious, RatioControlsTheCount) {
  const auto base = numbered(100);
  const InflationConfig inf;
  auto count = [](const std::vector<TraceRecord>& r) {
    return std::count_if(r.begin(), r.end(), [](const TraceRecord& x) { return x.malicious; });
  };
  EXPECT_EQ(count(inject_malicious(base, 0.0, inf, 1)), 0);
  EXPECT_EQ(inject_malicious(base, 0.0, inf, 1), base);
  const auto all = inject_malicious(base, 1.0, inf, 1);
  EXPECT_EQ(count(all), 100);
  for (std::size_t i = 0; i < base.size(); ++i) {
    EXPECT_EQ(all[i].id, base[i].id);
    EXPECT_EQ(all[i].out_len, 3 * base[i].out_len);
    EXPECT_EQ(all[i].text, base[i].text + inf.suffix);
  }
  const auto some = inject_malicious(base, 0.3, inf, 9);
  EXPECT_EQ(count(some), 30);
  EXPECT_EQ(some, inject_malicious(base, 0.3, inf, 9));
  EXPECT_THROW(inject_malicious(base, 1.5, inf, 1), ConfigError);
}

TEST(Malicious, InflatedTextRaisesTheRuleScores) {
  for (const auto& r : synth::synthesize_trace(50, 6)) {
    const auto before = textfeat::rule_gen(r.text);
    const auto after = textfeat::rule_gen(r.text + InflationConfig{}.suffix);
    EXPECT_GT(after[textfeat::Feature::kVague], before[textfeat::Feature::kVague]);
    EXPECT_GT(after[textfeat::Feature::kOpenEnded], before[textfeat::Feature::kOpenEnded]);
  }
}

TEST(VarianceSubsets, OrderedBySpread) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto records = synth::synthesize_trace(401, seed);
    const Scorer by_len = [](const TraceRecord& r) { return static_cast<double>(r.out_len); };
    const auto s = make_variance_subsets(records, by_len, seed);
    ASSERT_EQ(s.small.size(), 200u);
    ASSERT_EQ(s.normal.size(), 200u);
    ASSERT_EQ(s.large.size(), 200u);
    auto var = [&](const std::vector<TraceRecord>& v) {
      std::vector<double> x;
      for (const auto& r : v) x.push_back(by_len(r));
      return variance(x);
    };
    EXPECT_LE(var(s.small), var(s.normal));
    EXPECT_LE(var(s.normal), var(s.large));
    std::set<std::uint64_t> ids;
    for (const auto& r : s.large) ids.insert(r.id);
    EXPECT_EQ(ids.size(), 200u);
  }
}

TEST(VarianceSubsets, IdenticalScoresAreHarmless) {
  const Scorer flat = [](const TraceRecord&) { return 4.0; };
  const auto s = make_variance_subsets(numbered(10), flat, 1);
  EXPECT_EQ(s.small.size(), 5u);
  EXPECT_EQ(s.large.size(), 5u);
  EXPECT_TRUE(make_variance_subsets(numbered(1), flat, 1).small.empty());
}

TEST(VarianceSubsets, NeedAnEstimator) {
  EXPECT_THROW(make_variance_subsets(numbered(10), Scorer{}, 1), EstimatorMissing);
  const auto ref = reference_profile("dialogpt");
  EXPECT_THROW(pipeline::select_variance(numbered(10), pipeline::VarianceSubset::kLarge, ref, 1), EstimatorMissing);
  EXPECT_EQ(pipeline::select_variance(numbered(10), pipeline::VarianceSubset::kAll, ref, 1).size(), 10u);
}

TEST(Pipeline, PreparedWorkloadIsSeeded) {
  const auto trace = synth::synthesize_trace(300, 2);
  estimator::ModelConfig mc;
  mc.layer_dims = {6, 8, 1};
  mc.train.epochs = 3;
  const auto records = pipeline::train_records(trace);
  const auto profile = build_profile(reference_model("dialogpt"), {}, records, mc);
  EXPECT_THROW(pipeline::prepare_workload(trace, reference_profile("dialogpt"), {}, 1), EstimatorMissing);
  pipeline::WorkloadConfig wl;
  wl.malicious_ratio = 0.2;
  const auto a = pipeline::prepare_workload(trace, profile, wl, 4);
  const auto b = pipeline::prepare_workload(trace, profile, wl, 4);
  EXPECT_EQ(a.fingerprint, b.fingerprint);
  EXPECT_NE(a.fingerprint, pipeline::prepare_workload(trace, profile, wl, 5).fingerprint);
  ASSERT_EQ(a.input.tasks.size(), 300u);
  for (std::size_t i = 0; i < a.input.tasks.size(); ++i) {
    const auto& t = a.input.tasks[i];
    EXPECT_DOUBLE_EQ(t.arrival, a.plan.arrivals[i]);
    EXPECT_GT(t.deadline, t.arrival);
    EXPECT_GE(a.input.true_output_len[i], 1);
  }
  EXPECT_THROW(pipeline::prepare_workload({}, profile, wl, 1), ConfigError);
}
