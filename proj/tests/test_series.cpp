#include <gtest/gtest.h>

#include <cmath>

#include "xrcast/error.hpp"
#include "xrcast/random.hpp"
#include "xrcast/series.hpp"
#include "xrcast/synthetic.hpp"

using namespace xrcast;
using namespace xrcast::series;

namespace {

TimeSeries make(std::vector<double> v) { return {std::move(v), Feature::f_s}; }

std::vector<double> random_values(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal(50.0, 10.0);
  return v;
}

}  // namespace

TEST(FeatureSeries, PicksColumnsAndImputesIat) {
  std::vector<viewframe::SegmentFeatures> f(4);
  f[0] = {0, 0, 0, std::nullopt};
  f[1] = {1, 3, 300, 0.2};
  f[2] = {2, 1, 100, std::nullopt};
  f[3] = {3, 2, 250, 0.4};
  EXPECT_EQ(feature_series(f, Feature::f_c).values, (std::vector<double>{0, 3, 1, 2}));
  EXPECT_EQ(feature_series(f, Feature::f_s).values, (std::vector<double>{0, 300, 100, 250}));
  EXPECT_EQ(feature_series(f, Feature::f_iat).values, (std::vector<double>{0.2, 0.2, 0.2, 0.4}));
  std::vector<viewframe::SegmentFeatures> none(3);
  EXPECT_THROW(feature_series(none, Feature::f_iat), Error);
}

TEST(FeatureName, RoundTrip) {
  for (auto f : {Feature::f_c, Feature::f_s, Feature::f_iat}) EXPECT_EQ(parse_feature(to_string(f)), f);
  EXPECT_THROW(parse_feature("f_x"), Error);
}

TEST(Segment, Examples) {
  auto s = segment(make(std::vector<double>(10, 1.0)), 4);
  EXPECT_EQ(s.count(), 2u);
  EXPECT_EQ(s.dropped, 2u);
  s = segment(make(std::vector<double>(8, 1.0)), 8);
  EXPECT_EQ(s.count(), 1u);
  EXPECT_EQ(s.dropped, 0u);
  synthetic::SeriesSpec spec;
  spec.length = 2000;
  s = segment(synthetic::gen_series(spec).series, 500);
  EXPECT_EQ(s.count(), 4u);
  EXPECT_THROW(segment(make({1, 2, 3}), 4), Error);
}

TEST(Segment, ChunksAreContiguous) {
  std::vector<double> v(23);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
  const auto s = segment(make(v), 5);
  ASSERT_EQ(s.count(), 4u);
  for (std::size_t k = 0; k < 4; ++k) {
    ASSERT_EQ(s.segments[k].values.size(), 5u);
    for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(s.segments[k].values[j], static_cast<double>(5 * k + j));
  }
}

TEST(Split, Examples) {
  std::vector<double> v(100);
  auto p = split(v, {}, 8);
  EXPECT_EQ(p.train.size(), 40u);
  EXPECT_EQ(p.val.size(), 10u);
  EXPECT_EQ(p.test.size(), 50u);
  std::vector<double> w(500);
  p = split(w, {}, 32);
  EXPECT_EQ(p.train.size(), 200u);
  EXPECT_EQ(p.val.size(), 50u);
  EXPECT_EQ(p.test.size(), 250u);
  std::vector<double> small(20);
  try {
    split(small, {0.9, 0.2}, 8);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SplitTooSmall);
  }
  EXPECT_THROW(split(v, {1.0, 0.2}, 8), Error);
}

TEST(Split, PartsAreChronologicalAndCoverTheSegment) {
  for (std::size_t n : {60u, 101u, 257u, 500u}) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(i);
    const auto p = split(v, {}, 4);
    EXPECT_EQ(p.train.size() + p.val.size() + p.test.size(), n);
    EXPECT_EQ(p.train.front(), 0.0);
    EXPECT_EQ(p.val.front(), p.train.back() + 1);
    EXPECT_EQ(p.test.front(), p.val.back() + 1);
  }
}

TEST(RollingMean, Examples) {
  const std::vector<double> v{1, 2, 3, 4};
  EXPECT_EQ(rolling_mean(v, 2), (std::vector<double>{1.5, 2.5, 3.5}));
  const std::vector<double> c(30, 7.0);
  const auto m = rolling_mean(c, 20);
  ASSERT_EQ(m.size(), 11u);
  for (double x : m) EXPECT_DOUBLE_EQ(x, 7.0);
  EXPECT_THROW(rolling_mean(v, 5), Error);
}

TEST(RollingMean, MatchesNaiveWindowedMean) {
  const auto v = random_values(17, 1000);
  const auto m = rolling_mean(v, 20);
  ASSERT_EQ(m.size(), v.size() - 19);
  for (std::size_t i = 0; i < m.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = i; j < i + 20; ++j) s += v[j];
    EXPECT_NEAR(m[i], s / 20.0, 1e-12);
  }
}

TEST(RunsTest, AlternatingSequence) {
  std::vector<double> v;
  for (int i = 0; i < 30; ++i) v.push_back(i % 2 == 0 ? 1.0 : -1.0);
  const auto r = runs_test(v);
  EXPECT_EQ(r.n_runs, 30u);
  // n1 = n2 = 15: mu = 16, var = 2*225*420 / (900*29).
  const double z = (30.0 - 16.0) / std::sqrt(2.0 * 225.0 * 420.0 / (900.0 * 29.0));
  EXPECT_NEAR(r.z, z, 1e-12);
  EXPECT_GT(r.z, 0.0);
  EXPECT_LT(r.p_value, 0.01);
}

TEST(RunsTest, TwoBlocks) {
  const std::vector<double> v{1, 1, 1, 2, 2, 2};
  const auto r = runs_test(v, 6);
  EXPECT_EQ(r.n_runs, 2u);
  // n1 = n2 = 3: mu = 4, var = 2*9*12 / (36*5) = 1.2.
  EXPECT_NEAR(r.z, (2.0 - 4.0) / std::sqrt(1.2), 1e-12);
  EXPECT_LT(r.z, 0.0);
}

TEST(RunsTest, Degenerate) {
  EXPECT_THROW(runs_test(std::vector<double>(50, 3.0)), Error);
  EXPECT_THROW(runs_test(std::vector<double>{1, 2, 3}), Error);
}

TEST(RunsTest, PValueInUnitInterval) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto r = runs_test(random_values(seed, 200));
    EXPECT_GE(r.p_value, 0.0);
    EXPECT_LE(r.p_value, 1.0);
    EXPECT_EQ(r.n_above + r.n_below, 200u);
  }
}

TEST(Scaler, Examples) {
  const std::vector<double> v{0, 5, 10};
  const auto s = fit_minmax(v);
  EXPECT_EQ(scale(v, s), (std::vector<double>{0, 0.5, 1}));
  const auto c = fit_minmax(std::vector<double>(5, 4.0));
  EXPECT_TRUE(c.identity);
  EXPECT_THROW(fit_minmax({}), Error);
}

TEST(Scaler, InverseRoundTrip) {
  const auto v = random_values(2, 500);
  const auto s = fit_minmax(v);
  const auto back = inverse_scale(scale(v, s), s);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(back[i], v[i], 1e-12);
  for (double x : scale(v, s)) {
    EXPECT_GE(x, 0.0);
    EXPECT_LE(x, 1.0);
  }
}

TEST(Windows, Examples) {
  const std::vector<double> v{1, 2, 3, 4};
  const auto w = make_windows(v, 2);
  EXPECT_EQ(w.inputs, (std::vector<double>{1, 2, 2, 3}));
  EXPECT_EQ(w.targets, (std::vector<double>{3, 4}));
  EXPECT_EQ(make_windows(std::vector<double>(100), 32).count(), 68u);
  EXPECT_THROW(make_windows(v, 4), Error);
}

TEST(Windows, RampHasIdenticalDifferences) {
  std::vector<double> v(50);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 3.0 + 0.5 * static_cast<double>(i);
  const auto w = make_windows(v, 6);
  for (std::size_t i = 0; i < w.count(); ++i) {
    const auto row = w.window(i);
    for (std::size_t j = 1; j < row.size(); ++j) EXPECT_DOUBLE_EQ(row[j] - row[j - 1], 0.5);
    EXPECT_DOUBLE_EQ(w.targets[i] - row.back(), 0.5);
  }
}

TEST(Windows, FromOffsetDrawsHistoryFromEarlierPart) {
  std::vector<double> v(20);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
  const auto w = make_windows_from(v, 4, 15);
  ASSERT_EQ(w.count(), 5u);
  EXPECT_EQ(w.targets.front(), 15.0);
  EXPECT_EQ(w.window(0)[0], 11.0);
}
