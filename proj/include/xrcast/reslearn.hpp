#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xrcast/metrics.hpp"
#include "xrcast/predictors.hpp"
#include "xrcast/series.hpp"

namespace xrcast::reslearn {

struct ResidualTargets {
  std::vector<double> residuals;  // targets - base predictions
  double res_b = 0.0;             // |min(residuals)|
  std::vector<double> shifted;    // residuals + res_b
};

ResidualTargets residual_targets(std::span<const double> train_targets, std::span<const double> base_predictions);

/// Base predictor plus a residual learner trained on bias-shifted residuals.
/// Both models see min-max scaled windows; the scaler was fitted on the
/// segment's training part.
class ResLearnModel {
 public:
  ResLearnModel(std::unique_ptr<predictors::Predictor> base, std::unique_ptr<predictors::Predictor> residual,
                double res_b, series::MinMaxScaler scaler, bool keep_bias_in_combine = false);

  /// base + residual - res_b on scaled windows. With keep_bias_in_combine
  /// the bias is left in.
  std::vector<double> predict_scaled(std::span<const double> scaled_inputs) const;
  /// Physical-unit windows in, physical-unit predictions out.
  std::vector<double> predict_combined(std::span<const double> inputs) const;
  std::vector<double> predict_base(std::span<const double> inputs) const;

  const predictors::Predictor& base() const { return *base_; }
  const predictors::Predictor& residual() const { return *residual_; }
  double res_b() const { return res_b_; }
  const series::MinMaxScaler& scaler() const { return scaler_; }
  bool keep_bias_in_combine() const { return keep_bias_; }

 private:
  std::unique_ptr<predictors::Predictor> base_;
  std::unique_ptr<predictors::Predictor> residual_;
  double res_b_;
  series::MinMaxScaler scaler_;
  bool keep_bias_;
};

void save_bundle(std::ostream& out, const ResLearnModel& model);
ResLearnModel load_bundle(std::istream& in);

struct SegmentReport {
  std::size_t segment_index = 0;
  predictors::ModelKind base_kind = predictors::ModelKind::transformer;
  bool ok = true;
  std::string error;
  bool has_reslearn = true;

  metrics::MetricsResult base_val;
  metrics::MetricsResult base_test;
  metrics::MetricsResult combined_val;
  metrics::MetricsResult combined_test;
  double res_b = 0.0;  // scaled units
  std::size_t base_epochs = 0;
  std::size_t residual_epochs = 0;

  // Physical-unit series behind the metrics, for plot data.
  std::vector<double> val_actual, val_base, val_combined;
  std::vector<double> test_actual, test_base, test_combined;
};

struct ResLearnOptions {
  series::SplitSpec split;
  bool train_residual = true;
  bool keep_bias_in_combine = false;
};

struct SegmentOutcome {
  SegmentReport report;
  /// Absent when the segment failed or only the base model was trained.
  std::optional<ResLearnModel> model;
  std::unique_ptr<predictors::Predictor> base_only;
};

/// One pass of the per-segment loop: split, scale on train, fit the base,
/// fit the residual learner on shifted residuals, evaluate on val and test.
/// Errors are caught and reported in the returned report.
SegmentOutcome train_segment(std::span<const double> values, std::size_t segment_index,
                             const predictors::PredictorConfig& base_config,
                             const predictors::PredictorConfig& residual_config, const ResLearnOptions& options);

struct ResLearnRun {
  std::vector<SegmentOutcome> segments;
};

/// Runs train_segment over every segment; `jobs` > 1 trains segments on
/// worker threads. Results are in segment order regardless of scheduling.
ResLearnRun train_reslearn(const series::SegmentedSeries& segments, const predictors::PredictorConfig& base_config,
                           const predictors::PredictorConfig& residual_config, const ResLearnOptions& options,
                           std::size_t jobs = 1);

/// Seeds for segment i: model configs get seeds derived from their base seed
/// so every segment starts from fresh, reproducible parameters.
predictors::PredictorConfig segment_config(const predictors::PredictorConfig& config, std::size_t segment_index);

}  // namespace xrcast::reslearn
