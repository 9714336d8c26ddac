#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "vsmooth/metrics.hpp"

using namespace vsmooth;

TEST(Variability, ConstantIsZero) {
  const std::vector<double> r(7, 3.5e5);
  EXPECT_EQ(variability(r), 0.0);
}

TEST(Variability, PopulationDeviation) {
  const std::vector<double> r{1, 3};
  EXPECT_DOUBLE_EQ(variability(r), 0.5);
}

TEST(Variability, Undefined) {
  EXPECT_THROW(variability(std::vector<double>{}), ValidationError);
  EXPECT_THROW(variability(std::vector<double>{0, 0}), ValidationError);
  EXPECT_THROW(variability(std::vector<double>{-1, 1}), ValidationError);
}

TEST(BaselineRates, PerFrame) {
  FrameTrace t;
  t.frames = {{0, FrameKind::I, 1000}, {1, FrameKind::B, 100}};
  EXPECT_EQ(baseline_rates(t), (std::vector<double>{240000, 24000}));
}

TEST(BaselineRates, UniformFrames) {
  const auto t = synth_trace("P", {0, 1000, 0}, {0, 0, 0}, 12, 1);
  for (double r : baseline_rates(t)) EXPECT_EQ(r, 240000.0);
}

TEST(BaselineRates, SmoothingLowersVariability) {
  const auto t = synth_trace("G16B3", {10000, 4000, 1000}, {0.3, 0.3, 0.3}, 960, 42);
  const auto c = make_config(trace_stats(t), 0.0);
  const auto r = run(t, c);
  const auto m = run_metrics(r.log, r.bill, c);
  EXPECT_LT(m.variability, variability(baseline_rates(t)));
}

TEST(RunMetrics, AllCerLog) {
  SmootherConfig c;
  c.alpha = 0.02;
  c.cer_t = 1.02e5;
  TransmissionLog log;
  for (int k = 0; k < 4; ++k) log.records.push_back({k * 0.03, c.cer_t, 382, 500 + k, 118 + k, RateState::CER, 0, 0});
  const auto m = run_metrics(log, billing(log), c);
  EXPECT_EQ(m.p_r1, 0.0);
  EXPECT_EQ(m.p_cer, 1.0);
  EXPECT_EQ(m.p_r2, 0.0);
  EXPECT_DOUBLE_EQ(m.cer_t_obtained_ratio, 1.02);
  EXPECT_EQ(m.max_buffer, 503);
  EXPECT_EQ(m.variability, 0.0);
  EXPECT_EQ(m.underflows, 0);
}

TEST(RunMetrics, SharesAndUnderflowCount) {
  SmootherConfig c;
  c.cer_t = 100;
  TransmissionLog log;
  log.records = {{0.00, 50, 1, 1, 0, RateState::R1, 0, 0},
                 {0.03, 100, 1, 1, 0, RateState::CER, 0, 0},
                 {0.06, 150, 9, 2, -7, RateState::R2, 0, 0}};
  const auto m = run_metrics(log, billing(log), c);
  EXPECT_DOUBLE_EQ(m.p_r1, 1.0 / 3);
  EXPECT_DOUBLE_EQ(m.p_r2, 1.0 / 3);
  EXPECT_EQ(m.underflows, 1);
  EXPECT_DOUBLE_EQ(m.cer_t_obtained_ratio, 1.0);
}

TEST(RunMetrics, CsvRow) {
  RunMetrics m{0.25, 0.1, 0.8, 0.1, 24986, 124.7, 0, 0, 1.0149};
  EXPECT_EQ(metrics_csv_row(m), "124.7000,10.0000,80.0000,10.0000,24986,1.014900,0.250000,0,0");
  EXPECT_EQ(metrics_csv_header(),
            "net_bytes_per_second,pct_r1,pct_cer,pct_r2,max_buffer_bytes,cer_t_obtained_over_cer,variability,"
            "overflows,underflows");
}

TEST(Improvement, Percent) {
  EXPECT_DOUBLE_EQ(improvement_pct(1.8, 1.4), 100.0 * 0.4 / 1.8);
  EXPECT_EQ(improvement_pct(0.0, 1.0), 0.0);
  EXPECT_EQ(improvement_pct(2.0, 2.0), 0.0);
}

TEST(MetricsProperty, ScaleInvariant) {
  std::mt19937_64 rng(3);
  std::lognormal_distribution<double> draw(10.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> r(5 + rep);
    for (auto& x : r) x = draw(rng);
    const double v = variability(r);
    for (double c : {1e-3, 0.7, 42.0, 1e6}) {
      auto s = r;
      for (auto& x : s) x *= c;
      EXPECT_NEAR(variability(s), v, 1e-12 * std::max(1.0, v));
    }
  }
}

TEST(MetricsProperty, SharesSumToOneExactly) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto t = synth_trace("IBBPBB", {9000, 3000, 700}, {1.0, 1.0, 1.0}, 300 + seed, seed);
    const auto c = make_config(trace_stats(t), 0.0);
    const auto r = run(t, c);
    const auto m = run_metrics(r.log, r.bill, c);
    std::size_t n1 = 0, nc = 0, n2 = 0;
    for (const auto& rec : r.log.records)
      (rec.label == RateState::R1 ? n1 : rec.label == RateState::CER ? nc : n2)++;
    EXPECT_EQ(n1 + nc + n2, r.log.records.size());
    EXPECT_DOUBLE_EQ(m.p_r1 + m.p_cer + m.p_r2, 1.0);
    EXPECT_EQ(m.underflows, 0);
  }
}
