#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "xrcast/predictors.hpp"
#include "xrcast/reslearn.hpp"
#include "xrcast/series.hpp"
#include "xrcast/synthetic.hpp"
#include "xrcast/viewframe.hpp"

namespace xrcast::experiment {

enum class InputKind { pcap, packet_csv, feature_csv, series_csv, synthetic_trace, synthetic_series };

struct ModelEntry {
  predictors::ModelKind kind = predictors::ModelKind::transformer;
  bool reslearn = true;
};

struct ExperimentConfig {
  InputKind input = InputKind::synthetic_series;
  std::string input_path;
  std::string server_address = "10.0.0.1";
  std::optional<int> server_port;
  series::Feature feature = series::Feature::f_s;
  viewframe::ViewFrameConfig viewframe;
  std::size_t segment_size = 500;
  std::size_t lookback = 32;
  series::SplitSpec split;
  std::vector<ModelEntry> models = {{predictors::ModelKind::transformer, true},
                                    {predictors::ModelKind::lstm, true},
                                    {predictors::ModelKind::gru, true},
                                    {predictors::ModelKind::stacked_lstm, true}};
  predictors::PredictorConfig base;
  predictors::PredictorConfig residual;
  bool keep_bias_in_combine = false;
  std::size_t eda_window = 20;
  synthetic::TraceSpec trace_spec;
  synthetic::SeriesSpec series_spec;
  std::uint64_t seed = 7;
  std::size_t jobs = 1;
  std::string out_dir;

  ExperimentConfig();
};

/// Flat `key = value` document; `#` starts a comment. Unknown keys, bad
/// values and duplicate keys throw ConfigError. Relative input paths resolve
/// against `base_dir`.
ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every recognised key with its description, for `--help-config`.
std::string config_schema();

/// Default output directory: $XRCAST_OUT_DIR, else "xrcast-out".
std::string default_out_dir();

enum ExitCode : int { kOk = 0, kConfigError = 1, kDataError = 2, kTrainingFailure = 3 };

struct RunOptions {
  bool save_models = false;
};

struct RunResult {
  int exit_code = kOk;
  std::vector<std::filesystem::path> files;
  std::vector<reslearn::SegmentReport> reports;
  std::string message;
};

/// ingest -> VF (trace inputs) -> series prep -> model matrix -> reports.
/// Writes into config.out_dir; on a data error only run.log is written.
RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Reloads bundles written by a `save_models` run and scores them on the
/// test part of each segment; writes evaluate.csv.
RunResult evaluate_models(const ExperimentConfig& config, const std::filesystem::path& models_dir);

struct LoadedInput {
  series::TimeSeries series;
  /// Present for trace inputs.
  std::optional<viewframe::ViewFrameResult> viewframe;
  std::vector<std::string> log;
};

/// The series the config describes, after ingest, VF and imputation.
LoadedInput load_input(const ExperimentConfig& config);

}  // namespace xrcast::experiment
