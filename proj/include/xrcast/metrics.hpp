#pragma once

#include <cstddef>
#include <span>

namespace xrcast::metrics {

/// A percentage-type error with its zero-denominator bookkeeping.
struct PercentageError {
  double value = 0.0;
  std::size_t n_used = 0;
  std::size_t n_skipped = 0;
};

struct MetricsResult {
  double rmse = 0.0;
  double mape = 0.0;   // fraction
  double smape = 0.0;  // in [0, 2]
  std::size_t n_used = 0;
  std::size_t n_skipped_zero_denominator = 0;
};

double rmse(std::span<const double> actual, std::span<const double> predicted);

/// Mean of |y - yhat| / |y| over terms with |y| > eps, as a fraction.
PercentageError mape(std::span<const double> actual, std::span<const double> predicted, double eps = 1e-12);

/// Mean of |yhat - y| / ((|yhat| + |y|) / 2) over terms whose denominator exceeds eps.
PercentageError smape(std::span<const double> actual, std::span<const double> predicted, double eps = 1e-12);

/// All three metrics. MAPE and SMAPE fall back to 0 with every term counted
/// as skipped when no term has a usable denominator. `n_used` and
/// `n_skipped_zero_denominator` follow the MAPE denominator rule.
MetricsResult evaluate(std::span<const double> actual, std::span<const double> predicted);

/// 100 * (base - improved) / base.
double smape_improvement(double base_smape, double reslearn_smape);

/// Mean absolute error restricted to points whose actual value is at or
/// above the given quantile of `actual` (0.9 = top decile).
double upper_quantile_mae(std::span<const double> actual, std::span<const double> predicted, double quantile = 0.9);

}  // namespace xrcast::metrics
