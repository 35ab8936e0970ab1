#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xrcast/viewframe.hpp"

namespace xrcast::series {

enum class Feature { f_c, f_s, f_iat };

std::string to_string(Feature f);
Feature parse_feature(const std::string& name);

struct TimeSeries {
  std::vector<double> values;
  Feature feature = Feature::f_s;
};

struct SegmentedSeries {
  std::vector<TimeSeries> segments;
  std::size_t segment_size = 0;
  std::size_t dropped = 0;

  std::size_t count() const { return segments.size(); }
};

struct SplitSpec {
  double train_ratio = 0.5;
  double val_ratio_within_train = 0.2;
};

/// Chronological train/val/test parts of one segment.
struct Split {
  std::vector<double> train;
  std::vector<double> val;
  std::vector<double> test;
};

struct RunsTestResult {
  std::size_t n_runs = 0;
  std::size_t n_above = 0;
  std::size_t n_below = 0;
  double z = 0.0;
  double p_value = 1.0;
};

struct MinMaxScaler {
  double min = 0.0;
  double max = 1.0;
  /// Set when the fitted data was constant; transform is then the identity.
  bool identity = false;

  double transform(double v) const { return identity ? v : (v - min) / (max - min); }
  double inverse(double v) const { return identity ? v : v * (max - min) + min; }
};

struct Windows {
  /// Row-major, count x width.
  std::vector<double> inputs;
  std::vector<double> targets;
  std::size_t width = 0;

  std::size_t count() const { return targets.size(); }
  std::span<const double> window(std::size_t i) const { return {inputs.data() + i * width, width}; }
};

/// Pulls one feature column out of VF output. Absent f_iat values take the
/// previous valid value; leading absences take the first valid one.
TimeSeries feature_series(std::span<const viewframe::SegmentFeatures> features, Feature feature);

SegmentedSeries segment(const TimeSeries& series, std::size_t segment_size);

/// Chronological split. The train part must hold at least 2*lookback+1
/// points, val and test at least one each (their windows reach back into the
/// preceding part for history).
Split split(std::span<const double> values, const SplitSpec& spec, std::size_t lookback);

std::vector<double> rolling_mean(std::span<const double> values, std::size_t window = 20);

/// Wald-Wolfowitz runs test about the median; values equal to the median are
/// dropped.
RunsTestResult runs_test(std::span<const double> values, std::size_t min_points = 20);

/// Fits on `values`; constant input yields the flagged identity scaler.
MinMaxScaler fit_minmax(std::span<const double> values);
std::vector<double> scale(std::span<const double> values, const MinMaxScaler& scaler);
std::vector<double> inverse_scale(std::span<const double> values, const MinMaxScaler& scaler);

/// inputs[i] = values[i .. i+width-1], targets[i] = values[i+width].
Windows make_windows(std::span<const double> values, std::size_t width);

/// Windows whose targets are `values[first_target ..]`, drawing history from
/// the points before `first_target`.
Windows make_windows_from(std::span<const double> values, std::size_t width, std::size_t first_target);

}  // namespace xrcast::series
