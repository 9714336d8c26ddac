#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "vsmooth/channel.hpp"

using namespace vsmooth;

namespace {

ChannelTrace constant(double bps, std::size_t n, double tti = 0.001) {
  ChannelTrace ct;
  ct.tti = tti;
  ct.tti_rates.assign(n, bps);
  return ct;
}

}  // namespace

TEST(Aggregate, OnePrbEveryFourTtis) {
  const auto feed = aggregate_feedback(constant(320000, 300), 0.030, {1, 4}, {9});
  ASSERT_EQ(feed.windows.size(), 10u);
  for (const auto& w : feed.windows) EXPECT_DOUBLE_EQ(w.r_c, 80000.0);
}

TEST(Aggregate, NinePrbsPerTti) {
  const auto feed = aggregate_feedback(constant(320000, 300), 0.030, {1, 4}, {9});
  for (const auto& w : feed.windows) EXPECT_DOUBLE_EQ(w.r_max, 2880000.0);
}

TEST(Aggregate, AllZero) {
  const auto feed = aggregate_feedback(constant(0.0, 90), 0.030);
  ASSERT_EQ(feed.windows.size(), 3u);
  for (const auto& w : feed.windows) {
    EXPECT_EQ(w.r_c, 0.0);
    EXPECT_EQ(w.r_max, 0.0);
  }
}

TEST(Aggregate, WindowMeans) {
  ChannelTrace ct;
  for (int k = 0; k < 6; ++k) ct.tti_rates.push_back(k);  // windows {0,1,2}, {3,4,5}
  const auto feed = aggregate_feedback(ct, 0.003, {2, 1}, {3});
  ASSERT_EQ(feed.windows.size(), 2u);
  EXPECT_DOUBLE_EQ(feed.windows[0].r_c, 2.0);
  EXPECT_DOUBLE_EQ(feed.windows[1].r_c, 8.0);
  EXPECT_DOUBLE_EQ(feed.windows[1].r_max, 12.0);
}

TEST(Aggregate, TrailingPartialWindowDropped) {
  const auto feed = aggregate_feedback(constant(1.0, 59), 0.030);
  EXPECT_EQ(feed.windows.size(), 1u);
}

TEST(Aggregate, RejectsNonMultiple) {
  EXPECT_THROW(aggregate_feedback(constant(1.0, 100), 0.0305), ValidationError);
  EXPECT_THROW(aggregate_feedback(constant(1.0, 100), 0.030, {0, 4}), ValidationError);
  EXPECT_THROW(aggregate_feedback(constant(-1.0, 100), 0.030), ValidationError);
}

TEST(Freeze, HoldsRunMeans) {
  ChannelFeed feed;
  feed.windows = {{1.0, 10.0}, {3.0, 30.0}};
  const auto f = freeze(feed);
  for (const auto& w : f.windows) {
    EXPECT_DOUBLE_EQ(w.r_c, 2.0);
    EXPECT_DOUBLE_EQ(w.r_max, 20.0);
  }
}

TEST(SynthChannel, ZeroSpreadIsConstant) {
  const auto ct = synth_channel(320000, 0.0, 500, 3);
  for (double r : ct.tti_rates) EXPECT_EQ(r, 320000.0);
}

TEST(SynthChannel, SeedRepeatable) {
  EXPECT_EQ(synth_channel(320000, 0.2, 1000, 8).tti_rates, synth_channel(320000, 0.2, 1000, 8).tti_rates);
  EXPECT_NE(synth_channel(320000, 0.2, 1000, 8).tti_rates, synth_channel(320000, 0.2, 1000, 9).tti_rates);
}

TEST(SynthChannel, SampleMean) {
  const auto ct = synth_channel(320000, 0.2, 10000, 17);
  const double mean = std::accumulate(ct.tti_rates.begin(), ct.tti_rates.end(), 0.0) / 10000.0;
  EXPECT_NEAR(mean, 320000.0, 0.02 * 320000.0);
}

TEST(SynthChannel, ClampedAtZero) {
  const auto ct = synth_channel(100, 3.0, 5000, 2);
  for (double r : ct.tti_rates) EXPECT_GE(r, 0.0);
}

TEST(ChannelFile, RoundTrip) {
  const auto ct = synth_channel(320000, 0.3, 120, 4, 0.0005);
  const auto back = parse_channel_trace(serialize_csv(ct));
  EXPECT_EQ(back.tti, ct.tti);
  EXPECT_EQ(back.tti_rates, ct.tti_rates);
}

TEST(ChannelFile, Errors) {
  EXPECT_THROW(parse_channel_trace(""), ParseError);
  EXPECT_THROW(parse_channel_trace("tti_index,prb_bps\n0,1\n2,1\n"), ParseError);
  EXPECT_THROW(parse_channel_trace("#tti_seconds=0\n0,1\n"), ParseError);
  EXPECT_THROW(parse_channel_trace("0,-5\n"), ValidationError);
}

// ---- properties -------------------------------------------------------------

TEST(ChannelProperty, WindowCount) {
  for (std::size_t n : {0u, 1u, 29u, 30u, 31u, 299u, 1000u}) {
    for (double tti : {0.001, 0.0005}) {
      const auto feed = aggregate_feedback(constant(1.0, n, tti), 0.030);
      EXPECT_EQ(feed.windows.size(), static_cast<std::size_t>(std::floor(n * tti / 0.030 + 1e-9)))
          << n << " ttis of " << tti;
    }
  }
}

TEST(ChannelProperty, AverageNeverAboveMax) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto feed = aggregate_feedback(synth_channel(1e5, 0.5, 600, seed), 0.030, {1 + int(seed % 3), 4},
                                         {1 + int(seed % 9)});
    for (const auto& w : feed.windows) EXPECT_LE(w.r_c, w.r_max);
  }
}

TEST(ChannelProperty, LinearInTrace) {
  const auto base = synth_channel(320000, 0.4, 900, 12);
  for (double c : {0.5, 3.0, 17.25}) {
    auto scaled = base;
    for (auto& r : scaled.tti_rates) r *= c;
    const auto a = aggregate_feedback(base, 0.030);
    const auto b = aggregate_feedback(scaled, 0.030);
    ASSERT_EQ(a.windows.size(), b.windows.size());
    for (std::size_t w = 0; w < a.windows.size(); ++w) {
      EXPECT_NEAR(b.windows[w].r_c, c * a.windows[w].r_c, 1e-9 * c * a.windows[w].r_c);
      EXPECT_NEAR(b.windows[w].r_max, c * a.windows[w].r_max, 1e-9 * c * a.windows[w].r_max);
    }
  }
}
