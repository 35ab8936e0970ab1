#include "xrcast/series.hpp"

#include <algorithm>
#include <cmath>

#include "xrcast/error.hpp"

namespace xrcast::series {

namespace {

constexpr std::string_view kModule = "series-prep";

std::size_t fraction_of(std::size_t n, double ratio) {
  // The small bias keeps e.g. 50 * 0.2 at 10 despite binary rounding.
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratio + 1e-9));
}

}  // namespace

std::string to_string(Feature f) {
  switch (f) {
    case Feature::f_c: return "f_c";
    case Feature::f_s: return "f_s";
    case Feature::f_iat: return "f_iat";
  }
  return "?";
}

Feature parse_feature(const std::string& name) {
  if (name == "f_c") return Feature::f_c;
  if (name == "f_s") return Feature::f_s;
  if (name == "f_iat") return Feature::f_iat;
  throw Error(ErrorCode::BadArgument, kModule, "unknown feature '" + name + "'");
}

TimeSeries feature_series(std::span<const viewframe::SegmentFeatures> features, Feature feature) {
  TimeSeries out;
  out.feature = feature;
  out.values.reserve(features.size());
  if (feature != Feature::f_iat) {
    for (const auto& f : features) {
      out.values.push_back(static_cast<double>(feature == Feature::f_c ? f.f_c : f.f_s));
    }
    return out;
  }
  auto first = std::find_if(features.begin(), features.end(), [](const auto& f) { return f.f_iat.has_value(); });
  if (first == features.end()) {
    throw Error(ErrorCode::DegenerateSeries, kModule, "f_iat is absent in every segment");
  }
  double last = *first->f_iat;
  for (const auto& f : features) {
    if (f.f_iat) last = *f.f_iat;
    out.values.push_back(last);
  }
  return out;
}

SegmentedSeries segment(const TimeSeries& series, std::size_t segment_size) {
  if (segment_size < 1) throw Error(ErrorCode::BadArgument, kModule, "segment size must be >= 1");
  if (series.values.size() < segment_size) {
    throw Error(ErrorCode::SeriesTooShort, kModule,
                std::to_string(series.values.size()) + " values, segment size " + std::to_string(segment_size));
  }
  SegmentedSeries out;
  out.segment_size = segment_size;
  const std::size_t count = series.values.size() / segment_size;
  out.dropped = series.values.size() - count * segment_size;
  for (std::size_t i = 0; i < count; ++i) {
    const auto begin = series.values.begin() + static_cast<std::ptrdiff_t>(i * segment_size);
    out.segments.push_back({std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(segment_size)),
                            series.feature});
  }
  return out;
}

Split split(std::span<const double> values, const SplitSpec& spec, std::size_t lookback) {
  if (!(spec.train_ratio > 0.0 && spec.train_ratio < 1.0) ||
      !(spec.val_ratio_within_train > 0.0 && spec.val_ratio_within_train < 1.0)) {
    throw Error(ErrorCode::BadArgument, kModule, "split ratios must lie in (0, 1)");
  }
  const std::size_t pool = fraction_of(values.size(), spec.train_ratio);
  const std::size_t val = fraction_of(pool, spec.val_ratio_within_train);
  const std::size_t train = pool - val;
  const std::size_t test = values.size() - pool;
  if (train < 2 * lookback + 1 || val < 1 || test < 1) {
    throw Error(ErrorCode::SplitTooSmall, kModule,
                "train/val/test = " + std::to_string(train) + "/" + std::to_string(val) + "/" +
                    std::to_string(test) + " with lookback " + std::to_string(lookback));
  }
  Split out;
  out.train.assign(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(train));
  out.val.assign(values.begin() + static_cast<std::ptrdiff_t>(train),
                 values.begin() + static_cast<std::ptrdiff_t>(pool));
  out.test.assign(values.begin() + static_cast<std::ptrdiff_t>(pool), values.end());
  return out;
}

std::vector<double> rolling_mean(std::span<const double> values, std::size_t window) {
  if (window < 1) throw Error(ErrorCode::BadArgument, kModule, "window must be >= 1");
  if (values.size() < window) {
    throw Error(ErrorCode::SeriesTooShort, kModule, "series shorter than rolling window");
  }
  std::vector<double> out;
  out.reserve(values.size() - window + 1);
  const double w = static_cast<double>(window);
  double sum = 0.0;
  for (std::size_t i = 0; i < window; ++i) sum += values[i];
  out.push_back(sum / w);
  for (std::size_t i = window; i < values.size(); ++i) {
    sum += values[i] - values[i - window];
    out.push_back(sum / w);
  }
  return out;
}

RunsTestResult runs_test(std::span<const double> values, std::size_t min_points) {
  if (values.size() < min_points) {
    throw Error(ErrorCode::DegenerateSeries, kModule,
                "runs test needs at least " + std::to_string(min_points) + " points");
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

  RunsTestResult r;
  int prev = 0;
  for (double v : values) {
    if (v == median) continue;
    const int sym = v > median ? 1 : -1;
    (sym > 0 ? r.n_above : r.n_below)++;
    if (sym != prev) ++r.n_runs;
    prev = sym;
  }
  if (r.n_above == 0 || r.n_below == 0) {
    throw Error(ErrorCode::DegenerateSeries, kModule, "all values on one side of the median");
  }
  const double n1 = static_cast<double>(r.n_above);
  const double n2 = static_cast<double>(r.n_below);
  const double total = n1 + n2;
  const double mu = 2.0 * n1 * n2 / total + 1.0;
  const double var = 2.0 * n1 * n2 * (2.0 * n1 * n2 - n1 - n2) / (total * total * (total - 1.0));
  if (!(var > 0.0)) throw Error(ErrorCode::DegenerateSeries, kModule, "zero runs variance");
  r.z = (static_cast<double>(r.n_runs) - mu) / std::sqrt(var);
  r.p_value = std::erfc(std::abs(r.z) / std::sqrt(2.0));
  return r;
}

MinMaxScaler fit_minmax(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::Empty, kModule, "cannot fit scaler on empty series");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  MinMaxScaler s;
  s.min = *lo;
  s.max = *hi;
  s.identity = !(*hi > *lo);
  return s;
}

std::vector<double> scale(std::span<const double> values, const MinMaxScaler& scaler) {
  std::vector<double> out(values.size());
  std::transform(values.begin(), values.end(), out.begin(), [&](double v) { return scaler.transform(v); });
  return out;
}

std::vector<double> inverse_scale(std::span<const double> values, const MinMaxScaler& scaler) {
  std::vector<double> out(values.size());
  std::transform(values.begin(), values.end(), out.begin(), [&](double v) { return scaler.inverse(v); });
  return out;
}

Windows make_windows(std::span<const double> values, std::size_t width) {
  return make_windows_from(values, width, width);
}

Windows make_windows_from(std::span<const double> values, std::size_t width, std::size_t first_target) {
  if (width < 1) throw Error(ErrorCode::BadArgument, kModule, "window width must be >= 1");
  if (first_target < width || values.size() <= first_target) {
    throw Error(ErrorCode::SeriesTooShort, kModule,
                std::to_string(values.size()) + " values cannot form windows of width " + std::to_string(width));
  }
  Windows w;
  w.width = width;
  const std::size_t count = values.size() - first_target;
  w.inputs.reserve(count * width);
  w.targets.reserve(count);
  for (std::size_t t = first_target; t < values.size(); ++t) {
    w.inputs.insert(w.inputs.end(), values.begin() + static_cast<std::ptrdiff_t>(t - width),
                    values.begin() + static_cast<std::ptrdiff_t>(t));
    w.targets.push_back(values[t]);
  }
  return w;
}

}  // namespace xrcast::series
