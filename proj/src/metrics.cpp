#include "xrcast/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "xrcast/error.hpp"

namespace xrcast::metrics {

namespace {

constexpr std::string_view kModule = "metrics-report";

void check_lengths(std::span<const double> a, std::span<const double> p) {
  if (a.size() != p.size()) {
    throw Error(ErrorCode::LengthMismatch, kModule,
                "actual has " + std::to_string(a.size()) + " values, predicted " + std::to_string(p.size()));
  }
  if (a.empty()) throw Error(ErrorCode::Empty, kModule, "no values");
}

template <typename Term, typename Denominator>
PercentageError mean_ratio(std::span<const double> actual, std::span<const double> predicted, double eps,
                           Denominator denominator, Term numerator, const char* name) {
  check_lengths(actual, predicted);
  PercentageError out;
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double d = denominator(actual[i], predicted[i]);
    if (!(d > eps)) {
      ++out.n_skipped;
      continue;
    }
    sum += numerator(actual[i], predicted[i]) / d;
    ++out.n_used;
  }
  if (out.n_used == 0) {
    throw Error(ErrorCode::AllTermsSkipped, kModule, std::string(name) + ": every denominator is zero");
  }
  out.value = sum / static_cast<double>(out.n_used);
  return out;
}

}  // namespace

double rmse(std::span<const double> actual, std::span<const double> predicted) {
  check_lengths(actual, predicted);
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double d = predicted[i] - actual[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(actual.size()));
}

PercentageError mape(std::span<const double> actual, std::span<const double> predicted, double eps) {
  return mean_ratio(
      actual, predicted, eps, [](double y, double) { return std::abs(y); },
      [](double y, double yhat) { return std::abs(y - yhat); }, "mape");
}

PercentageError smape(std::span<const double> actual, std::span<const double> predicted, double eps) {
  return mean_ratio(
      actual, predicted, eps, [](double y, double yhat) { return (std::abs(yhat) + std::abs(y)) / 2.0; },
      [](double y, double yhat) { return std::abs(yhat - y); }, "smape");
}

MetricsResult evaluate(std::span<const double> actual, std::span<const double> predicted) {
  MetricsResult r;
  r.rmse = rmse(actual, predicted);
  try {
    const auto m = mape(actual, predicted);
    r.mape = m.value;
    r.n_used = m.n_used;
    r.n_skipped_zero_denominator = m.n_skipped;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::AllTermsSkipped) throw;
    r.n_skipped_zero_denominator = actual.size();
  }
  try {
    r.smape = smape(actual, predicted).value;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::AllTermsSkipped) throw;
  }
  return r;
}

double smape_improvement(double base_smape, double reslearn_smape) {
  if (!(base_smape > 0.0)) throw Error(ErrorCode::ZeroBase, kModule, "base SMAPE must be positive");
  return 100.0 * (base_smape - reslearn_smape) / base_smape;
}

double upper_quantile_mae(std::span<const double> actual, std::span<const double> predicted, double quantile) {
  check_lengths(actual, predicted);
  std::vector<double> sorted(actual.begin(), actual.end());
  std::sort(sorted.begin(), sorted.end());
  const auto idx = static_cast<std::size_t>(std::floor(quantile * static_cast<double>(sorted.size() - 1)));
  const double cut = sorted[idx];
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] >= cut) {
      sum += std::abs(predicted[i] - actual[i]);
      ++n;
    }
  }
  return sum / static_cast<double>(n);
}

}  // namespace xrcast::metrics
