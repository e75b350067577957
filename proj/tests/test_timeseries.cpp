#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace periop;

namespace {

TimeSeriesChannel channel(std::vector<std::pair<double, double>> tv) {
  TimeSeriesChannel c{"hr", {}};
  for (auto [t, v] : tv) c.samples.push_back({t, v});
  return c;
}

// Integrates the LOCF step function on a half-second grid.
double band_oracle(const TimeSeriesChannel& c, Range band) {
  const auto hold = holding_times(c.samples);
  const double end = c.samples.back().time_s + hold.back();
  double inside = 0, total = 0;
  std::size_t k = 0;
  for (double t = c.samples.front().time_s; t < end; t += 0.5) {
    while (k + 1 < c.samples.size() && c.samples[k + 1].time_s <= t) ++k;
    total += 1;
    if (band.contains(c.samples[k].value)) inside += 1;
  }
  return inside / total;
}

}  // namespace

TEST(CleanTimeseries, OutOfRangeRemoved) {
  const auto r = clean_timeseries_detailed(channel({{0, 80}, {60, 350}, {120, 82}}), {0, 300});
  EXPECT_EQ(r.out_of_range, 1u);
  EXPECT_EQ(r.channel.samples, channel({{0, 80}, {120, 82}}).samples);
}

TEST(CleanTimeseries, DuplicateTimesAveraged) {
  const auto r = clean_timeseries_detailed(channel({{0, 71}, {60, 70}, {60, 74}, {120, 73}}), {0, 300});
  ASSERT_EQ(r.channel.samples.size(), 3u);
  EXPECT_EQ(r.channel.samples[1].time_s, 60);
  EXPECT_DOUBLE_EQ(r.channel.samples[1].value, 72);
  EXPECT_EQ(r.duplicates_merged, 1u);
}

TEST(CleanTimeseries, ConstantUnchanged) {
  const auto c = channel({{0, 5}, {60, 5}, {120, 5}, {180, 5}, {240, 5}});
  EXPECT_EQ(clean_timeseries(c, {0, 300}), c);
}

TEST(CleanTimeseries, SpikeReplacedByMedian) {
  std::vector<std::pair<double, double>> tv;
  for (int i = 0; i < 40; ++i) tv.push_back({60.0 * i, 70.0 + (i % 5)});
  tv[20].second = 250;
  const auto r = clean_timeseries_detailed(channel(tv), {0, 300});
  EXPECT_EQ(r.spikes_replaced, 1u);
  EXPECT_DOUBLE_EQ(r.channel.samples[20].value, 72.0);
}

TEST(CleanTimeseries, IdempotentOnRandomSeries) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::pair<double, double>> tv;
    const std::size_t n = 1 + uniform_index(rng, 60);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = 60.0 * static_cast<double>(uniform_index(rng, n));
      double v = 80 + 10 * standard_normal(rng);
      if (uniform01(rng) < 0.1) v = 80 + 200 * uniform01(rng) - 100;
      if (uniform01(rng) < 0.05) v = 400;
      tv.push_back({t, v});
    }
    const auto once = clean_timeseries(channel(tv), {0, 300});
    EXPECT_EQ(clean_timeseries(once, {0, 300}), once);
    for (std::size_t i = 1; i < once.samples.size(); ++i) EXPECT_LT(once.samples[i - 1].time_s, once.samples[i].time_s);
    for (const auto& s : once.samples) EXPECT_TRUE(Range({0, 300}).contains(s.value));
  }
}

TEST(TimeseriesFeatures, ConstantSeries) {
  const auto f = extract_ts_features(channel({{0, 5}, {60, 5}, {120, 5}}), {});
  EXPECT_EQ(f.min, 5);
  EXPECT_EQ(f.max, 5);
  EXPECT_EQ(f.mean, 5);
  EXPECT_EQ(f.sd, 0);
  EXPECT_EQ(f.short_term_var, 0);
  EXPECT_EQ(f.long_term_var, 0);
}

TEST(TimeseriesFeatures, ThreePointHandOracle) {
  const auto c = channel({{0, 1}, {60, 2}, {120, 3}});
  const auto f = extract_ts_features(c, {{0, 2}});
  EXPECT_DOUBLE_EQ(f.mean, 2);
  EXPECT_EQ(f.min, 1);
  EXPECT_EQ(f.max, 3);
  EXPECT_DOUBLE_EQ(f.short_term_var, 1.0);
  EXPECT_DOUBLE_EQ(f.sd, std::sqrt(2.0 / 3.0));
  ASSERT_EQ(f.band_fraction.size(), 1u);
  EXPECT_DOUBLE_EQ(f.band_fraction[0], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(f.band_fraction[0], band_oracle(c, {0, 2}));
}

TEST(TimeseriesFeatures, LongTermVarianceOfWindowMeans) {
  // Window 0 holds {1,3}, window 1 holds {10}: means 2 and 10, variance 16.
  const auto f = extract_ts_features(channel({{0, 1}, {120, 3}, {300, 10}}), {});
  EXPECT_DOUBLE_EQ(f.long_term_var, 16.0);
}

TEST(TimeseriesFeatures, BandFractionMatchesIntegrationOracle) {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::pair<double, double>> tv;
    double t = 0;
    const std::size_t n = 2 + uniform_index(rng, 30);
    for (std::size_t i = 0; i < n; ++i) {
      tv.push_back({t, std::round(100 * uniform01(rng))});
      t += 1 + static_cast<double>(uniform_index(rng, 120));
    }
    const auto c = channel(tv);
    const std::vector<Range> bands = {{0, 30}, {50, 100}};
    const auto f = extract_ts_features(c, bands);
    for (std::size_t b = 0; b < bands.size(); ++b) EXPECT_NEAR(f.band_fraction[b], band_oracle(c, bands[b]), 1e-12);
  }
}

TEST(TimeseriesFeatures, EmptyChannelIsMissing) {
  const auto f = extract_ts_features(TimeSeriesChannel{"hr", {}}, {{0, 1}});
  EXPECT_TRUE(is_missing(f.mean));
  EXPECT_TRUE(is_missing(f.band_fraction[0]));
  EXPECT_EQ(timeseries_feature_names("hr", {{0, 60}}).size(), 7u);
}
