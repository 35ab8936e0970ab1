#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "xrcast/error.hpp"
#include "xrcast/report.hpp"

using namespace xrcast;
using namespace xrcast::report;
using reslearn::SegmentReport;

namespace {

metrics::MetricsResult m(double rmse, double mape, double smape) {
  metrics::MetricsResult r;
  r.rmse = rmse;
  r.mape = mape;
  r.smape = smape;
  return r;
}

SegmentReport sample(std::size_t seg, predictors::ModelKind kind, double scale = 1.0) {
  SegmentReport r;
  r.segment_index = seg;
  r.base_kind = kind;
  r.base_val = m(12.3456789 * scale, 0.0123456789, 0.0234567891 * scale);
  r.base_test = m(11.0, 0.011, 0.021);
  r.combined_val = m(3.21, 0.0031, 0.0061 * scale);
  r.combined_test = m(3.5, 0.0035, 0.0072);
  r.res_b = 0.125;
  r.base_epochs = 40;
  r.residual_epochs = 25;
  r.val_actual = {10, 20};
  r.val_base = {11, 18};
  r.val_combined = {10.5, 19.5};
  r.test_actual = {30};
  r.test_base = {28};
  r.test_combined = {29.9};
  return r;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST(FormatNumber, SixSignificantDigits) {
  EXPECT_EQ(format_number(12.3456789), "12.3457");
  EXPECT_EQ(format_number(0.0), "0");
  EXPECT_EQ(format_number(1234567.0), "1.23457e+06");
  EXPECT_EQ(format_number(std::nan("")), "NA");
}

TEST(SegmentsCsv, OneSegmentHasFourStages) {
  const std::vector<SegmentReport> reports{sample(0, predictors::ModelKind::transformer)};
  const auto rows = parse_csv(render_segments_csv(reports));
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"segment", "model", "stage", "rmse", "mape", "smape", "res_b", "epochs"}));
  EXPECT_EQ(rows[1][2], "base-val");
  EXPECT_EQ(rows[2][2], "base-test");
  EXPECT_EQ(rows[3][2], "reslearn-val");
  EXPECT_EQ(rows[4][2], "reslearn-test");
  EXPECT_EQ(rows[1][3], "12.3457");
  EXPECT_EQ(rows[1][4], "0.0123457");
  EXPECT_EQ(rows[1][5], "2.34568");  // SMAPE shown x100
  EXPECT_EQ(rows[1][6], "NA");
  EXPECT_EQ(rows[3][6], "0.125");
  EXPECT_EQ(rows[3][7], "25");
}

TEST(SegmentsCsv, FailedAndBaseOnlySegments) {
  auto failed = sample(1, predictors::ModelKind::gru);
  failed.ok = false;
  failed.error = "SplitTooSmall";
  auto base_only = sample(2, predictors::ModelKind::gru);
  base_only.has_reslearn = false;
  const std::vector<SegmentReport> reports{failed, base_only};
  const auto rows = parse_csv(render_segments_csv(reports));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[1][2], "failed");
  EXPECT_EQ(rows[1][3], "NA");
  EXPECT_EQ(rows[3][2], "base-test");
  EXPECT_THROW(render_segments_csv({}), Error);
}

TEST(SegmentsJson, NumbersMatchCsv) {
  const std::vector<SegmentReport> reports{sample(0, predictors::ModelKind::lstm),
                                           sample(1, predictors::ModelKind::lstm, 3.0)};
  const auto rows = parse_csv(render_segments_csv(reports));
  const auto j = nlohmann::json::parse(render_segments_json(reports));
  const auto& segs = j["segments"];
  ASSERT_EQ(segs.size() + 1, rows.size());
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const auto& row = rows[i + 1];
    EXPECT_EQ(segs[i]["stage"].get<std::string>(), row[2]);
    EXPECT_EQ(segs[i]["rmse"].get<double>(), std::stod(row[3]));
    EXPECT_EQ(segs[i]["mape"].get<double>(), std::stod(row[4]));
    EXPECT_EQ(segs[i]["smape"].get<double>(), std::stod(row[5]));
  }
}

TEST(Plotdata, OneFilePerSegmentModel) {
  const std::vector<SegmentReport> reports{sample(0, predictors::ModelKind::lstm),
                                           sample(3, predictors::ModelKind::transformer)};
  const auto files = render_plotdata(reports);
  ASSERT_EQ(files.size(), 2u);
  EXPECT_EQ(files[0].name, "plot_seg0_lstm.csv");
  EXPECT_EQ(files[1].name, "plot_seg3_transformer.csv");
  const auto rows = parse_csv(files[0].content);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[1], (std::vector<std::string>{"0", "val", "10", "11", "10.5"}));
  EXPECT_EQ(rows[3], (std::vector<std::string>{"2", "test", "30", "28", "29.9"}));
}

TEST(Comparison, MeanOverSegmentsAndImprovement) {
  const std::vector<SegmentReport> reports{sample(0, predictors::ModelKind::gru),
                                           sample(1, predictors::ModelKind::gru, 3.0)};
  const auto table = comparison_table(reports);
  ASSERT_EQ(table.size(), 2u);
  EXPECT_FALSE(table[0].reslearn);
  EXPECT_TRUE(table[1].reslearn);
  const double base = (0.0234567891 + 3 * 0.0234567891) / 2;
  const double rl = (0.0061 + 3 * 0.0061) / 2;
  EXPECT_NEAR(table[0].val.smape, base, 1e-15);
  EXPECT_NEAR(table[1].val.smape, rl, 1e-15);
  ASSERT_TRUE(table[1].smape_improvement);
  EXPECT_NEAR(*table[1].smape_improvement, 100 * (base - rl) / base, 1e-9);
  EXPECT_EQ(table[0].segments, 2u);
  const auto rows = parse_csv(render_comparison_csv(table));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1][9], "2");
  EXPECT_EQ(rows[1][8], "NA");
}

TEST(EmitReport, WritesFilesDeterministically) {
  const auto dir = std::filesystem::temp_directory_path() / "xrcast_report_test";
  std::filesystem::remove_all(dir);
  const std::vector<SegmentReport> reports{sample(0, predictors::ModelKind::lstm)};
  const auto a = emit_report(reports, ReportFormat::csv, dir);
  ASSERT_EQ(a.size(), 1u);
  std::ifstream in(a[0]);
  std::stringstream got;
  got << in.rdbuf();
  EXPECT_EQ(got.str(), render_segments_csv(reports));
  EXPECT_EQ(emit_report(reports, ReportFormat::plotdata, dir).size(), 1u);
  EXPECT_TRUE(std::filesystem::exists(dir / "plotdata" / "plot_seg0_lstm.csv"));
  std::filesystem::remove_all(dir);
}

TEST(EmitReport, UnwritableDirectory) {
  const std::vector<SegmentReport> reports{sample(0, predictors::ModelKind::lstm)};
  try {
    emit_report(reports, ReportFormat::csv, "/proc/xrcast-no-such-dir");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoError);
  }
}
