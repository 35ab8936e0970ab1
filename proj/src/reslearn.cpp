#include "xrcast/reslearn.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "xrcast/error.hpp"
#include "xrcast/parallel.hpp"
#include "xrcast/random.hpp"

namespace xrcast::reslearn {

namespace {

constexpr std::string_view kModule = "reslearn";
constexpr std::string_view kBundleMagic = "xrcast-reslearn";
constexpr int kBundleVersion = 1;

std::vector<double> scale_inputs(std::span<const double> inputs, const series::MinMaxScaler& s) {
  return series::scale(inputs, s);
}

}  // namespace

ResidualTargets residual_targets(std::span<const double> train_targets, std::span<const double> base_predictions) {
  if (train_targets.size() != base_predictions.size()) {
    throw Error(ErrorCode::LengthMismatch, kModule,
                std::to_string(train_targets.size()) + " targets vs " + std::to_string(base_predictions.size()) +
                    " predictions");
  }
  if (train_targets.empty()) throw Error(ErrorCode::LengthMismatch, kModule, "no training targets");
  ResidualTargets r;
  r.residuals.resize(train_targets.size());
  for (std::size_t i = 0; i < train_targets.size(); ++i) r.residuals[i] = train_targets[i] - base_predictions[i];
  r.res_b = std::abs(*std::min_element(r.residuals.begin(), r.residuals.end()));
  r.shifted.resize(r.residuals.size());
  for (std::size_t i = 0; i < r.residuals.size(); ++i) r.shifted[i] = r.residuals[i] + r.res_b;
  return r;
}

ResLearnModel::ResLearnModel(std::unique_ptr<predictors::Predictor> base,
                             std::unique_ptr<predictors::Predictor> residual, double res_b,
                             series::MinMaxScaler scaler, bool keep_bias_in_combine)
    : base_(std::move(base)),
      residual_(std::move(residual)),
      res_b_(res_b),
      scaler_(scaler),
      keep_bias_(keep_bias_in_combine) {
  if (!base_ || !residual_) throw Error(ErrorCode::BadConfig, kModule, "both models are required");
  if (base_->config().lookback != residual_->config().lookback) {
    throw Error(ErrorCode::ShapeMismatch, kModule, "base and residual lookback differ");
  }
}

std::vector<double> ResLearnModel::predict_scaled(std::span<const double> scaled_inputs) const {
  auto out = base_->predict(scaled_inputs);
  const auto res = residual_->predict(scaled_inputs);
  const double shift = keep_bias_ ? 0.0 : res_b_;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] + res[i] - shift;
  return out;
}

std::vector<double> ResLearnModel::predict_combined(std::span<const double> inputs) const {
  return series::inverse_scale(predict_scaled(scale_inputs(inputs, scaler_)), scaler_);
}

std::vector<double> ResLearnModel::predict_base(std::span<const double> inputs) const {
  return series::inverse_scale(base_->predict(scale_inputs(inputs, scaler_)), scaler_);
}

void save_bundle(std::ostream& out, const ResLearnModel& model) {
  out << kBundleMagic << ' ' << kBundleVersion << '\n';
  out.precision(17);
  out << "res_b " << model.res_b() << '\n';
  out << "scaler " << model.scaler().min << ' ' << model.scaler().max << ' ' << (model.scaler().identity ? 1 : 0)
      << '\n';
  out << "keep_bias_in_combine " << (model.keep_bias_in_combine() ? 1 : 0) << '\n';
  out << "base\n";
  predictors::save_checkpoint(out, model.base());
  out << "residual\n";
  predictors::save_checkpoint(out, model.residual());
}

ResLearnModel load_bundle(std::istream& in) {
  auto fail = [](const std::string& what) -> void { throw Error(ErrorCode::BadCheckpoint, kModule, what); };
  std::string magic, tag;
  int version = 0;
  if (!(in >> magic >> version) || magic != kBundleMagic) fail("not a ResLearn bundle");
  if (version != kBundleVersion) fail("bundle version " + std::to_string(version) + " not supported");
  double res_b = 0;
  series::MinMaxScaler scaler;
  int identity = 0, literal = 0;
  if (!(in >> tag >> res_b) || tag != "res_b") fail("missing res_b");
  if (!(in >> tag >> scaler.min >> scaler.max >> identity) || tag != "scaler") fail("missing scaler");
  scaler.identity = identity != 0;
  if (!(in >> tag >> literal) || tag != "keep_bias_in_combine") fail("missing combine flag");
  if (!(in >> tag) || tag != "base") fail("missing base model");
  auto base = predictors::load_checkpoint(in);
  if (!(in >> tag) || tag != "residual") fail("missing residual model");
  auto residual = predictors::load_checkpoint(in);
  return ResLearnModel(std::move(base), std::move(residual), res_b, scaler, literal != 0);
}

predictors::PredictorConfig segment_config(const predictors::PredictorConfig& config, std::size_t segment_index) {
  auto c = config;
  c.seed = derive_seed(config.seed, segment_index);
  return c;
}

SegmentOutcome train_segment(std::span<const double> values, std::size_t segment_index,
                             const predictors::PredictorConfig& base_config,
                             const predictors::PredictorConfig& residual_config, const ResLearnOptions& options) {
  SegmentOutcome outcome;
  SegmentReport& rep = outcome.report;
  rep.segment_index = segment_index;
  rep.base_kind = base_config.kind;
  rep.has_reslearn = options.train_residual;
  try {
    const std::size_t w = base_config.lookback;
    const auto parts = series::split(values, options.split, w);
    const std::size_t n_train = parts.train.size();
    const std::size_t n_pool = n_train + parts.val.size();

    const auto scaler = series::fit_minmax(parts.train);
    const auto scaled = series::scale(values, scaler);
    const std::span<const double> all(scaled);
    const auto train = series::make_windows(all.first(n_train), w);
    const auto val = series::make_windows_from(all.first(n_pool), w, n_train);
    const auto test = series::make_windows_from(all, w, n_pool);

    auto base = predictors::build_predictor(segment_config(base_config, 2 * segment_index));
    rep.base_epochs = base->fit(train.inputs, train.targets, val.inputs, val.targets).epochs.size();

    auto physical = [&](const std::vector<double>& v) { return series::inverse_scale(v, scaler); };
    rep.val_actual = physical(val.targets);
    rep.test_actual = physical(test.targets);
    rep.val_base = physical(base->predict(val.inputs));
    rep.test_base = physical(base->predict(test.inputs));
    rep.base_val = metrics::evaluate(rep.val_actual, rep.val_base);
    rep.base_test = metrics::evaluate(rep.test_actual, rep.test_base);

    if (!options.train_residual) {
      outcome.base_only = std::move(base);
      return outcome;
    }

    const auto train_pred = base->predict(train.inputs);
    const auto rt = residual_targets(train.targets, train_pred);
    rep.res_b = rt.res_b;

    const auto val_pred = base->predict(val.inputs);
    std::vector<double> val_shifted(val.targets.size());
    for (std::size_t i = 0; i < val_shifted.size(); ++i) val_shifted[i] = val.targets[i] - val_pred[i] + rt.res_b;

    auto res_cfg = residual_config;
    res_cfg.kind = predictors::ModelKind::fcnn;
    res_cfg.lookback = w;
    auto residual = predictors::build_predictor(segment_config(res_cfg, 2 * segment_index + 1));
    rep.residual_epochs = residual->fit(train.inputs, rt.shifted, val.inputs, val_shifted).epochs.size();

    ResLearnModel model(std::move(base), std::move(residual), rt.res_b, scaler, options.keep_bias_in_combine);
    rep.val_combined = physical(model.predict_scaled(val.inputs));
    rep.test_combined = physical(model.predict_scaled(test.inputs));
    rep.combined_val = metrics::evaluate(rep.val_actual, rep.val_combined);
    rep.combined_test = metrics::evaluate(rep.test_actual, rep.test_combined);
    outcome.model.emplace(std::move(model));
  } catch (const Error& e) {
    rep.ok = false;
    rep.error = e.what();
    outcome.model.reset();
    outcome.base_only.reset();
  }
  return outcome;
}

ResLearnRun train_reslearn(const series::SegmentedSeries& segments, const predictors::PredictorConfig& base_config,
                           const predictors::PredictorConfig& residual_config, const ResLearnOptions& options,
                           std::size_t jobs) {
  ResLearnRun run;
  run.segments.resize(segments.count());
  parallel_for(segments.count(), jobs, [&](std::size_t i) {
    run.segments[i] = train_segment(segments.segments[i].values, i, base_config, residual_config, options);
  });
  return run;
}

}  // namespace xrcast::reslearn
