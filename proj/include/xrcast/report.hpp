#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xrcast/reslearn.hpp"

namespace xrcast::report {

enum class ReportFormat { csv, json, plotdata };

/// Fixed-width rendering used by every report: 6 significant digits.
std::string format_number(double v);

/// Per-segment metrics, one row per (segment, model, stage). Stages are
/// base-val, base-test, reslearn-val, reslearn-test. MAPE is a fraction and
/// SMAPE is shown x100, as in the published comparison tables.
std::string render_segments_csv(std::span<const reslearn::SegmentReport> reports);
std::string render_segments_json(std::span<const reslearn::SegmentReport> reports);

/// One file per (segment, model): index,split,actual,base,reslearn.
struct PlotFile {
  std::string name;
  std::string content;
};
std::vector<PlotFile> render_plotdata(std::span<const reslearn::SegmentReport> reports);

struct ComparisonRow {
  predictors::ModelKind kind = predictors::ModelKind::transformer;
  bool reslearn = false;
  metrics::MetricsResult val;   // mean over successful segments
  metrics::MetricsResult test;
  std::optional<double> smape_improvement;  // reslearn rows, from val SMAPE
  std::size_t segments = 0;
};

/// Base and ResLearn rows per model kind, in first-seen kind order.
std::vector<ComparisonRow> comparison_table(std::span<const reslearn::SegmentReport> reports);
std::string render_comparison_csv(std::span<const ComparisonRow> rows);

/// Writes the rendering for `format` under `dir` and returns the paths
/// written. Throws IoError.
std::vector<std::filesystem::path> emit_report(std::span<const reslearn::SegmentReport> reports, ReportFormat format,
                                               const std::filesystem::path& dir);

void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace xrcast::report
