#include "xrcast/report.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "xrcast/error.hpp"

namespace xrcast::report {

namespace {

constexpr std::string_view kModule = "metrics-report";
constexpr double kSmapeDisplayScale = 100.0;

struct Row {
  std::size_t segment;
  std::string model;
  std::string stage;
  const metrics::MetricsResult* m;
  std::optional<double> res_b;
  std::size_t epochs;
};

std::vector<Row> rows_of(std::span<const reslearn::SegmentReport> reports) {
  if (reports.empty()) throw Error(ErrorCode::Empty, kModule, "no segment reports");
  std::vector<Row> rows;
  for (const auto& r : reports) {
    const std::string model(predictors::to_string(r.base_kind));
    if (!r.ok) {
      rows.push_back({r.segment_index, model, "failed", nullptr, std::nullopt, 0});
      continue;
    }
    rows.push_back({r.segment_index, model, "base-val", &r.base_val, std::nullopt, r.base_epochs});
    rows.push_back({r.segment_index, model, "base-test", &r.base_test, std::nullopt, r.base_epochs});
    if (r.has_reslearn) {
      rows.push_back({r.segment_index, model, "reslearn-val", &r.combined_val, r.res_b, r.residual_epochs});
      rows.push_back({r.segment_index, model, "reslearn-test", &r.combined_test, r.res_b, r.residual_epochs});
    }
  }
  return rows;
}

// Rounds through the text rendering so CSV and JSON carry the same numbers.
double displayed(double v) { return std::strtod(format_number(v).c_str(), nullptr); }

metrics::MetricsResult mean_of(const std::vector<const metrics::MetricsResult*>& items) {
  metrics::MetricsResult m;
  if (items.empty()) return m;
  for (const auto* x : items) {
    m.rmse += x->rmse;
    m.mape += x->mape;
    m.smape += x->smape;
    m.n_used += x->n_used;
    m.n_skipped_zero_denominator += x->n_skipped_zero_denominator;
  }
  const double n = static_cast<double>(items.size());
  m.rmse /= n;
  m.mape /= n;
  m.smape /= n;
  return m;
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string render_segments_csv(std::span<const reslearn::SegmentReport> reports) {
  std::ostringstream out;
  out << "segment,model,stage,rmse,mape,smape,res_b,epochs\n";
  for (const auto& row : rows_of(reports)) {
    out << row.segment << ',' << row.model << ',' << row.stage << ',';
    if (!row.m) {
      out << "NA,NA,NA,NA,NA\n";
      continue;
    }
    out << format_number(row.m->rmse) << ',' << format_number(row.m->mape) << ','
        << format_number(row.m->smape * kSmapeDisplayScale) << ','
        << (row.res_b ? format_number(*row.res_b) : std::string("NA")) << ',' << row.epochs << '\n';
  }
  return out.str();
}

std::string render_segments_json(std::span<const reslearn::SegmentReport> reports) {
  nlohmann::ordered_json j;
  j["units"] = {{"mape", "fraction"}, {"smape", "percent (x100 of the [0,2] value)"}, {"res_b", "scaled"}};
  auto arr = nlohmann::ordered_json::array();
  for (const auto& row : rows_of(reports)) {
    nlohmann::ordered_json r;
    r["segment"] = row.segment;
    r["model"] = row.model;
    r["stage"] = row.stage;
    if (row.m) {
      r["rmse"] = displayed(row.m->rmse);
      r["mape"] = displayed(row.m->mape);
      r["smape"] = displayed(row.m->smape * kSmapeDisplayScale);
      r["res_b"] = row.res_b ? nlohmann::ordered_json(displayed(*row.res_b)) : nlohmann::ordered_json(nullptr);
      r["epochs"] = row.epochs;
    }
    arr.push_back(std::move(r));
  }
  j["segments"] = std::move(arr);
  return j.dump(2) + "\n";
}

std::vector<PlotFile> render_plotdata(std::span<const reslearn::SegmentReport> reports) {
  if (reports.empty()) throw Error(ErrorCode::Empty, kModule, "no segment reports");
  std::vector<PlotFile> files;
  for (const auto& r : reports) {
    if (!r.ok) continue;
    std::ostringstream out;
    out << "index,split,actual,base,reslearn\n";
    std::size_t idx = 0;
    auto emit = [&](const char* split, const std::vector<double>& actual, const std::vector<double>& base,
                    const std::vector<double>& combined) {
      for (std::size_t i = 0; i < actual.size(); ++i, ++idx) {
        out << idx << ',' << split << ',' << format_number(actual[i]) << ',' << format_number(base[i]) << ','
            << (combined.empty() ? std::string("NA") : format_number(combined[i])) << '\n';
      }
    };
    emit("val", r.val_actual, r.val_base, r.val_combined);
    emit("test", r.test_actual, r.test_base, r.test_combined);
    files.push_back({"plot_seg" + std::to_string(r.segment_index) + "_" +
                         std::string(predictors::to_string(r.base_kind)) + ".csv",
                     out.str()});
  }
  return files;
}

std::vector<ComparisonRow> comparison_table(std::span<const reslearn::SegmentReport> reports) {
  std::vector<predictors::ModelKind> kinds;
  std::map<predictors::ModelKind, std::vector<const reslearn::SegmentReport*>> by_kind;
  for (const auto& r : reports) {
    if (!by_kind.count(r.base_kind)) kinds.push_back(r.base_kind);
    auto& v = by_kind[r.base_kind];
    if (r.ok) v.push_back(&r);
  }
  std::vector<ComparisonRow> rows;
  for (auto kind : kinds) {
    const auto& segs = by_kind[kind];
    std::vector<const metrics::MetricsResult*> bv, bt, cv, ct;
    bool any_reslearn = false;
    for (const auto* r : segs) {
      bv.push_back(&r->base_val);
      bt.push_back(&r->base_test);
      if (r->has_reslearn) {
        any_reslearn = true;
        cv.push_back(&r->combined_val);
        ct.push_back(&r->combined_test);
      }
    }
    ComparisonRow base{kind, false, mean_of(bv), mean_of(bt), std::nullopt, segs.size()};
    rows.push_back(base);
    if (any_reslearn) {
      ComparisonRow rl{kind, true, mean_of(cv), mean_of(ct), std::nullopt, cv.size()};
      if (base.val.smape > 0.0) rl.smape_improvement = metrics::smape_improvement(base.val.smape, rl.val.smape);
      rows.push_back(rl);
    }
  }
  return rows;
}

std::string render_comparison_csv(std::span<const ComparisonRow> rows) {
  std::ostringstream out;
  out << "model,variant,val_rmse,val_mape,val_smape,test_rmse,test_mape,test_smape,smape_improvement_pct,segments\n";
  for (const auto& r : rows) {
    out << predictors::to_string(r.kind) << ',' << (r.reslearn ? "reslearn" : "base") << ','
        << format_number(r.val.rmse) << ',' << format_number(r.val.mape) << ','
        << format_number(r.val.smape * kSmapeDisplayScale) << ',' << format_number(r.test.rmse) << ','
        << format_number(r.test.mape) << ',' << format_number(r.test.smape * kSmapeDisplayScale) << ','
        << (r.smape_improvement ? format_number(*r.smape_improvement) : std::string("NA")) << ',' << r.segments
        << '\n';
  }
  return out.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, kModule, "cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw Error(ErrorCode::IoError, kModule, "write failed for '" + path.string() + "'");
}

std::vector<std::filesystem::path> emit_report(std::span<const reslearn::SegmentReport> reports, ReportFormat format,
                                               const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, kModule, "cannot create '" + dir.string() + "': " + ec.message());
  std::vector<std::filesystem::path> written;
  switch (format) {
    case ReportFormat::csv:
      written.push_back(dir / "segments.csv");
      write_file(written.back(), render_segments_csv(reports));
      break;
    case ReportFormat::json:
      written.push_back(dir / "segments.json");
      write_file(written.back(), render_segments_json(reports));
      break;
    case ReportFormat::plotdata: {
      const auto plot_dir = dir / "plotdata";
      std::filesystem::create_directories(plot_dir, ec);
      if (ec) throw Error(ErrorCode::IoError, kModule, "cannot create '" + plot_dir.string() + "'");
      for (const auto& f : render_plotdata(reports)) {
        written.push_back(plot_dir / f.name);
        write_file(written.back(), f.content);
      }
      break;
    }
  }
  return written;
}

}  // namespace xrcast::report
