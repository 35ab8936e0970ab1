// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "xrcast/error.hpp"
#include "xrcast/metrics.hpp"
#include "xrcast/predictors.hpp"
#include "xrcast/random.hpp"
#include "xrcast/report.hpp"
#include "xrcast/reslearn.hpp"
#include "xrcast/series.hpp"
#include "xrcast/synthetic.hpp"
#include "xrcast/viewframe.hpp"

using namespace xrcast;
using predictors::ModelKind;
using predictors::PredictorConfig;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), format, a, b, c);
  return buf;
}

// ---- 1. metric oracles ----------------------------------------------------

struct MetricFixture {
  std::vector<double> actual, predicted;
  double rmse, mape, smape;
};

Outcome metric_oracles() {
  const std::vector<MetricFixture> fixtures = {
      {{1, 2, 3}, {1, 2, 3}, 0.0, 0.0, 0.0},
      {{2, 4}, {1, 5}, 1.0, 0.375, 4.0 / 9.0},
      {{10}, {12}, 2.0, 0.2, 2.0 / 11.0},
      {{1}, {-1}, 2.0, 2.0, 2.0},
      {{100, 200, 300, 400},
       {110, 190, 330, 360},
       std::sqrt(675.0),
       0.0875,
       (10.0 / 105 + 10.0 / 195 + 30.0 / 315 + 40.0 / 380) / 4},
      {{5, 5, 5}, {4, 6, 5}, std::sqrt(2.0 / 3.0), 2.0 / 15.0, (1 / 4.5 + 1 / 5.5) / 3},
      {{-2, 2}, {-1, 3}, 1.0, 0.5, (2.0 / 3.0 + 0.4) / 2},
      {{0, 4}, {1, 4}, std::sqrt(0.5), 0.0, 1.0},
      {{3}, {0}, 3.0, 1.0, 2.0},
      {{1, 2, 4, 8}, {2, 4, 8, 16}, std::sqrt(85.0 / 4), 1.0, 2.0 / 3.0},
      {{0.5}, {0.25}, 0.25, 0.5, 2.0 / 3.0},
  };
  double worst = 0.0;
  for (const auto& f : fixtures) {
    worst = std::max(worst, std::abs(metrics::rmse(f.actual, f.predicted) - f.rmse));
    worst = std::max(worst, std::abs(metrics::mape(f.actual, f.predicted).value - f.mape));
    worst = std::max(worst, std::abs(metrics::smape(f.actual, f.predicted).value - f.smape));
  }
  Rng rng(2024);
  std::size_t violations = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 1 + rng.below(20);
    std::vector<double> a(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng.uniform(-1000.0, 1000.0);
      p[i] = rng.below(4) == 0 ? a[i] : rng.uniform(-1000.0, 1000.0);
    }
    const double s = metrics::smape(a, p).value;
    if (std::abs(s - metrics::smape(p, a).value) > 1e-12 || s < 0.0 || s > 2.0) ++violations;
  }
  return {worst <= 1e-9 && violations == 0,
          std::to_string(fixtures.size()) + " fixtures, worst error " + fmt("%.2e", worst) + ", " +
              std::to_string(violations) + "/10000 property violations"};
}

// ---- 2. improvement arithmetic -------------------------------------------

Outcome improvement_arithmetic() {
  struct Row {
    double base, improved, printed, tol;
  };
  // Exact rows must round to the printed two decimals.
  const Row rows[] = {{404.05, 0.36, 99.91, 0.005}, {285.29, 1.01, 99.65, 0.02}, {371.82, 0.15, 99.96, 0.02},
                      {562.87, 0.45, 99.92, 0.005}, {404.41, 0.69, 99.83, 0.02}, {0.78, 0.24, 68.87, 1.0}};
  bool ok = true;
  std::string detail;
  for (const auto& r : rows) {
    const double v = metrics::smape_improvement(r.base, r.improved);
    ok = ok && std::abs(v - r.printed) <= r.tol;
    detail += fmt("%.2f ", v);
  }
  return {ok, detail + "(% improvement)"};
}

// ---- 3. gradient checks ---------------------------------------------------

std::vector<double> uniform_values(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform();
  return v;
}

Outcome gradient_checks() {
  constexpr double eps = 1e-4;
  const auto x = uniform_values(2, 4 * 6);
  const auto y = uniform_values(102, 4);
  double worst_overall = 0.0;
  std::string detail;
  for (auto kind : {ModelKind::transformer, ModelKind::lstm, ModelKind::gru, ModelKind::stacked_lstm,
                    ModelKind::fcnn}) {
    PredictorConfig c;
    c.kind = kind;
    c.lookback = 6;
    c.d_model = 8;
    c.n_heads = 2;
    c.n_layers = 2;
    c.ffn_width = 16;
    c.hidden_width = 6;
    c.seed = 42;
    auto model = predictors::build_predictor(c);
    std::vector<nn::Matrix> grads;
    model->loss_and_gradients(x, y, grads);
    double worst = 0.0;
    for (std::size_t k = 0; k < model->parameters().size(); ++k) {
      auto& value = model->parameters()[k].value;
      for (Eigen::Index i = 0; i < value.size(); ++i) {
        const double orig = value.data()[i];
        value.data()[i] = orig + eps;
        const double up = model->loss(x, y);
        value.data()[i] = orig - eps;
        const double down = model->loss(x, y);
        value.data()[i] = orig;
        const double numeric = (up - down) / (2 * eps);
        const double analytic = grads[k].data()[i];
        const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
        worst = std::max(worst, std::abs(numeric - analytic) / scale);
      }
    }
    worst_overall = std::max(worst_overall, worst);
    detail += std::string(predictors::to_string(kind)) + fmt("=%.1e ", worst);
  }
  return {worst_overall < 1e-3, detail};
}

// ---- 4. ResLearn identity -------------------------------------------------

class PerfectResidual : public predictors::Predictor {
 public:
  PerfectResidual(std::size_t lookback, std::map<std::vector<double>, double> table)
      : Predictor(make_config(lookback)), table_(std::move(table)) {}

 protected:
  nn::Tape::Var forward(nn::Tape& tape, const nn::Matrix& inputs, predictors::ForwardProbe*) const override {
    nn::Matrix out(inputs.rows(), 1);
    for (Eigen::Index r = 0; r < inputs.rows(); ++r) {
      std::vector<double> key(static_cast<std::size_t>(inputs.cols()));
      for (Eigen::Index c = 0; c < inputs.cols(); ++c) key[static_cast<std::size_t>(c)] = inputs(r, c);
      out(r, 0) = table_.at(key);
    }
    return tape.constant(out);
  }

 private:
  static PredictorConfig make_config(std::size_t lookback) {
    PredictorConfig c;
    c.kind = ModelKind::fcnn;
    c.lookback = lookback;
    return c;
  }
  std::map<std::vector<double>, double> table_;
};

Outcome reslearn_identity() {
  const std::size_t w = 8;
  synthetic::SeriesSpec spec;
  spec.length = 200;
  spec.spike_rate = 0.05;
  const auto values = synthetic::gen_series(spec).series.values;
  const auto scaler = series::fit_minmax(values);
  const auto physical = series::make_windows(values, w);
  const auto scaled = series::make_windows(series::scale(values, scaler), w);

  double worst = 0.0;
  std::string detail;
  for (auto kind : {ModelKind::transformer, ModelKind::lstm, ModelKind::gru, ModelKind::stacked_lstm}) {
    PredictorConfig c;
    c.kind = kind;
    c.lookback = w;
    c.d_model = 8;
    c.n_layers = 1;
    c.ffn_width = 16;
    c.hidden_width = 8;
    c.seed = 3;
    auto base = predictors::build_predictor(c);
    const auto rt = reslearn::residual_targets(scaled.targets, base->predict(scaled.inputs));
    std::map<std::vector<double>, double> table;
    for (std::size_t i = 0; i < scaled.count(); ++i) {
      const auto win = scaled.window(i);
      table[std::vector<double>(win.begin(), win.end())] = rt.shifted[i];
    }
    reslearn::ResLearnModel model(std::move(base), std::make_unique<PerfectResidual>(w, std::move(table)), rt.res_b,
                                  scaler);
    const auto combined = model.predict_combined(physical.inputs);
    double err = 0.0;
    for (std::size_t i = 0; i < combined.size(); ++i) err = std::max(err, std::abs(combined[i] - physical.targets[i]));
    worst = std::max(worst, err);
    detail += std::string(predictors::to_string(kind)) + fmt("=%.1e ", err);
  }
  return {worst <= 1e-9, detail};
}

// ---- 5. ViewFrame recovery ------------------------------------------------

Outcome viewframe_recovery() {
  bool exact = true, separated = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    synthetic::TraceSpec spec;
    spec.seed = seed;
    const auto g = synthetic::gen_trace(spec);
    const auto r = viewframe::extract_features(g.packets);
    const double dur_th = r.report.thresholds.dur_th;
    for (std::size_t i = 1; i < g.frames.size(); ++i) {
      if (g.frames[i].start_ts - g.frames[i - 1].end_ts < 3 * dur_th) separated = false;
    }
    if (spec.intra_frame_spacing > dur_th / 3) separated = false;
    std::uint64_t planted = 0, found = 0;
    for (const auto& f : g.frames) planted += f.size;
    for (const auto& f : r.frames) found += f.size;
    if (r.frames.size() != g.frames.size() || found != planted) exact = false;
  }
  double worst_jitter = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    synthetic::TraceSpec spec;
    spec.seed = seed;
    spec.spacing_jitter_std = 0.2 * spec.intra_frame_spacing;
    const auto g = synthetic::gen_trace(spec);
    const auto r = viewframe::extract_features(g.packets);
    const double err = std::abs(static_cast<double>(r.frames.size()) - static_cast<double>(g.frames.size())) /
                       static_cast<double>(g.frames.size());
    worst_jitter = std::max(worst_jitter, err);
  }
  return {exact && separated && worst_jitter <= 0.01,
          std::string("exact recovery ") + (exact ? "yes" : "no") + ", gap/spacing separation " +
              (separated ? "holds" : "violated") + ", worst jittered count error " +
              fmt("%.3f%%", 100 * worst_jitter)};
}

// ---- 6. directional reproduction ------------------------------------------

Outcome peaky_reproduction() {
  const auto values = synthetic::gen_series(synthetic::peaky_fixture()).series;
  const auto segs = series::segment(values, 500);
  PredictorConfig base;
  base.kind = ModelKind::transformer;
  base.lookback = 32;
  base.d_model = 16;
  base.n_heads = 2;
  base.n_layers = 1;
  base.ffn_width = 32;
  base.epochs = 60;
  base.seed = derive_seed(7, 100);
  PredictorConfig residual = base;
  residual.kind = ModelKind::fcnn;
  residual.hidden_width = 64;
  residual.epochs = 200;
  residual.early_stop_patience = 20;
  residual.seed = derive_seed(7, 200);
  const auto run = reslearn::train_reslearn(segs, base, residual, {});

  std::vector<reslearn::SegmentReport> reports;
  std::vector<double> actual, base_pred, combined_pred;
  for (const auto& s : run.segments) {
    if (!s.report.ok) return {false, "segment " + std::to_string(s.report.segment_index) + ": " + s.report.error};
    reports.push_back(s.report);
    actual.insert(actual.end(), s.report.val_actual.begin(), s.report.val_actual.end());
    base_pred.insert(base_pred.end(), s.report.val_base.begin(), s.report.val_base.end());
    combined_pred.insert(combined_pred.end(), s.report.val_combined.begin(), s.report.val_combined.end());
  }
  const auto rows = report::comparison_table(reports);
  const double b = rows.at(0).val.smape, r = rows.at(1).val.smape;
  const double improvement = metrics::smape_improvement(b, r);
  const double peak_base = metrics::upper_quantile_mae(actual, base_pred);
  const double peak_combined = metrics::upper_quantile_mae(actual, combined_pred);
  return {segs.count() == 4 && r < b && improvement >= 30.0 && peak_combined < peak_base,
          fmt("val SMAPE %.4f -> %.4f", b, r) + fmt(" (%.1f%% better), top-decile MAE %.2f", improvement, peak_base) +
              fmt(" -> %.2f", peak_combined)};
}

// ---- 7. runs test ---------------------------------------------------------

Outcome runs_test_property() {
  int noise_ok = 0, trend_ok = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    synthetic::SeriesSpec noise;
    noise.level = 0.0;
    noise.amplitude = 0.0;
    noise.noise_std = 1.0;
    noise.length = 500;
    noise.seed = seed;
    if (series::runs_test(synthetic::gen_series(noise).series.values).p_value > 0.05) ++noise_ok;

    synthetic::SeriesSpec trending;
    trending.length = 500;
    trending.trend_slope = 0.02;
    trending.seed = 1000 + seed;
    const auto smooth = series::rolling_mean(synthetic::gen_series(trending).series.values, 20);
    if (series::runs_test(smooth).p_value < 0.01) ++trend_ok;
  }
  return {noise_ok >= 90 && trend_ok >= 90, "noise p>0.05 in " + std::to_string(noise_ok) +
                                                "/100, smoothed trend p<0.01 in " + std::to_string(trend_ok) + "/100"};
}

// ---- 8. determinism -------------------------------------------------------

std::map<std::string, std::string> read_tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    files[fs::relative(e.path(), dir).string()] = s.str();
  }
  return files;
}

Outcome determinism() {
  const auto root = fs::temp_directory_path() / "xrcast_acceptance";
  fs::remove_all(root);
  const std::string config = (fs::path(XRCAST_TEST_DIR) / "fixtures" / "fixture.cfg").string();
  std::vector<std::map<std::string, std::string>> trees;
  int run_no = 0;
  for (int jobs : {1, 1, 4, 4}) {
    const auto out = root / ("run" + std::to_string(run_no++));
    const std::string cmd = std::string(XRCAST_CLI) + " run --config " + config + " --seed 7 --jobs " +
                            std::to_string(jobs) + " --out " + out.string() + " >/dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0) return {false, "run failed: " + cmd};
    trees.push_back(read_tree(out));
  }
  for (std::size_t i = 1; i < trees.size(); ++i) {
    if (trees[i] != trees[0]) return {false, "run " + std::to_string(i) + " differs from run 0"};
  }
  fs::remove_all(root);
  return {true, std::to_string(trees[0].size()) + " files identical across 2 single-threaded and 2 four-job runs"};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"metric oracles", metric_oracles},
      {"improvement arithmetic", improvement_arithmetic},
      {"gradient checks", gradient_checks},
      {"reslearn identity", reslearn_identity},
      {"viewframe recovery", viewframe_recovery},
      {"peaky fixture reproduction", peaky_reproduction},
      {"runs test property", runs_test_property},
      {"determinism", determinism},
  };
  int failures = 0, index = 0;
  for (const auto& [name, check] : criteria) {
    ++index;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::printf("%s [%d] %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", index, name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
