#include "xrcast/predictors.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "xrcast/error.hpp"

namespace xrcast::predictors {

namespace {

constexpr std::string_view kModule = "predictors";
constexpr std::string_view kCheckpointMagic = "xrcast-checkpoint";
constexpr int kCheckpointVersion = 1;

[[noreturn]] void bad_config(const std::string& what) { throw Error(ErrorCode::BadConfig, kModule, what); }

[[noreturn]] void bad_checkpoint(const std::string& what) {
  throw Error(ErrorCode::BadCheckpoint, kModule, what);
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

struct Adam {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::size_t step = 0;

  explicit Adam(std::span<const Parameter> params) {
    for (const auto& p : params) {
      m.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
      v.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    }
  }

  void update(std::span<Parameter> params, const std::vector<Matrix>& grads, double lr) {
    ++step;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i].cwiseAbs2();
      params[i].value.array() -= lr * (m[i].array() / c1) / ((v[i].array() / c2).sqrt() + eps);
    }
  }
};

}  // namespace

std::string_view to_string(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::transformer: return "transformer";
    case ModelKind::lstm: return "lstm";
    case ModelKind::gru: return "gru";
    case ModelKind::stacked_lstm: return "stacked_lstm";
    case ModelKind::fcnn: return "fcnn";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  for (auto k : {ModelKind::transformer, ModelKind::lstm, ModelKind::gru, ModelKind::stacked_lstm,
                 ModelKind::fcnn}) {
    if (to_string(k) == name) return k;
  }
  bad_config("unknown model kind '" + std::string(name) + "'");
}

void PredictorConfig::validate() const {
  if (lookback < 1) bad_config("lookback must be >= 1");
  if (hidden_width < 1 || d_model < 1 || n_heads < 1 || n_layers < 1 || ffn_width < 1) {
    bad_config("all widths must be >= 1");
  }
  if (d_model % n_heads != 0) {
    bad_config("d_model " + std::to_string(d_model) + " not divisible by n_heads " + std::to_string(n_heads));
  }
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) bad_config("learning_rate must be positive");
  if (batch_size < 1) bad_config("batch_size must be >= 1");
  if (early_stop_min_delta < 0.0) bad_config("early_stop_min_delta must be >= 0");
}

Predictor::Predictor(PredictorConfig config)
    : config_(std::move(config)), init_rng_(derive_seed(config_.seed, 0)) {
  config_.validate();
}

std::size_t Predictor::parameter_count() const {
  return std::accumulate(params_.begin(), params_.end(), std::size_t{0},
                         [](std::size_t acc, const Parameter& p) { return acc + static_cast<std::size_t>(p.value.size()); });
}

std::size_t Predictor::add_parameter(std::string name, Eigen::Index rows, Eigen::Index cols, std::size_t fan_in,
                                     double fill) {
  Matrix value(rows, cols);
  if (fan_in == 0) {
    value.setConstant(fill);
  } else {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    // Column-major fill order keeps the draw sequence independent of Eigen internals.
    for (Eigen::Index c = 0; c < cols; ++c) {
      for (Eigen::Index r = 0; r < rows; ++r) value(r, c) = init_rng_.uniform(-bound, bound);
    }
  }
  params_.push_back({std::move(name), std::move(value)});
  return params_.size() - 1;
}

Matrix Predictor::to_matrix(std::span<const double> inputs) const {
  const std::size_t w = config_.lookback;
  if (inputs.size() % w != 0) {
    throw Error(ErrorCode::ShapeMismatch, kModule,
                std::to_string(inputs.size()) + " input values do not form windows of width " + std::to_string(w));
  }
  const auto rows = static_cast<Eigen::Index>(inputs.size() / w);
  Matrix m(rows, static_cast<Eigen::Index>(w));
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = inputs[static_cast<std::size_t>(r) * w + c];
  }
  return m;
}

std::vector<double> Predictor::predict(std::span<const double> inputs) const {
  const Matrix x = to_matrix(inputs);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(x.rows()));
  constexpr Eigen::Index kChunk = 256;
  for (Eigen::Index start = 0; start < x.rows(); start += kChunk) {
    const Eigen::Index n = std::min(kChunk, x.rows() - start);
    nn::Tape tape;
    const auto y = forward(tape, x.middleRows(start, n), nullptr);
    for (Eigen::Index i = 0; i < n; ++i) out.push_back(tape.value(y)(i, 0));
  }
  return out;
}

std::vector<double> Predictor::probe(std::span<const double> inputs, ForwardProbe& out) const {
  nn::Tape tape;
  const auto y = forward(tape, to_matrix(inputs), &out);
  const Matrix& v = tape.value(y);
  return std::vector<double>(v.data(), v.data() + v.size());
}

double Predictor::loss_and_gradients(std::span<const double> inputs, std::span<const double> targets,
                                     std::vector<Matrix>& grads) const {
  const Matrix x = to_matrix(inputs);
  if (static_cast<std::size_t>(x.rows()) != targets.size()) {
    throw Error(ErrorCode::ShapeMismatch, kModule, "window count differs from target count");
  }
  grads.clear();
  for (const auto& p : params_) grads.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  nn::Tape tape(&grads);
  const auto y = forward(tape, x, nullptr);
  const Matrix t = Eigen::Map<const Eigen::VectorXd>(targets.data(), static_cast<Eigen::Index>(targets.size()));
  const auto loss = tape.mse(y, t);
  tape.backward(loss);
  return tape.value(loss)(0, 0);
}

double Predictor::loss(std::span<const double> inputs, std::span<const double> targets) const {
  const auto pred = predict(inputs);
  if (pred.size() != targets.size()) {
    throw Error(ErrorCode::ShapeMismatch, kModule, "window count differs from target count");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += (pred[i] - targets[i]) * (pred[i] - targets[i]);
  return sum / static_cast<double>(pred.size());
}

std::uint64_t Predictor::training_work(std::span<const double> inputs, std::span<const double> targets) const {
  std::vector<Matrix> grads;
  for (const auto& p : params_) grads.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  nn::Tape tape(&grads);
  const auto y = forward(tape, to_matrix(inputs), nullptr);
  const Matrix t = Eigen::Map<const Eigen::VectorXd>(targets.data(), static_cast<Eigen::Index>(targets.size()));
  tape.backward(tape.mse(y, t));
  return tape.multiply_adds();
}

TrainTrace Predictor::fit(std::span<const double> inputs, std::span<const double> targets,
                          std::span<const double> val_inputs, std::span<const double> val_targets) {
  TrainTrace trace;
  const std::size_t w = config_.lookback;
  if (targets.empty()) throw Error(ErrorCode::ShapeMismatch, kModule, "no training pairs");
  if (inputs.size() != targets.size() * w || val_inputs.size() != val_targets.size() * w) {
    throw Error(ErrorCode::ShapeMismatch, kModule, "inputs do not match targets x lookback");
  }
  if (config_.epochs == 0) return trace;

  Rng rng(derive_seed(config_.seed, 1));
  Adam adam(params_);
  std::vector<std::size_t> order(targets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> batch_x;
  std::vector<double> batch_y;
  std::vector<Matrix> grads;

  std::vector<Parameter> best = params_;
  double best_seen = std::numeric_limits<double>::infinity();
  double patience_ref = std::numeric_limits<double>::infinity();
  std::size_t waited = 0;

  for (std::size_t epoch = 0; epoch < config_.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
      const std::size_t end = std::min(order.size(), start + config_.batch_size);
      batch_x.clear();
      batch_y.clear();
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        batch_x.insert(batch_x.end(), inputs.begin() + static_cast<std::ptrdiff_t>(i * w),
                       inputs.begin() + static_cast<std::ptrdiff_t>((i + 1) * w));
        batch_y.push_back(targets[i]);
      }
      const double l = loss_and_gradients(batch_x, batch_y, grads);
      if (!std::isfinite(l)) {
        params_ = best;
        throw Error(ErrorCode::NonFiniteLoss, kModule,
                    "loss diverged in epoch " + std::to_string(epoch) + "; last finite epoch " +
                        (epoch == 0 ? std::string("none") : std::to_string(epoch - 1)));
      }
      sum += l * static_cast<double>(end - start);
      adam.update(params_, grads, config_.learning_rate);
    }
    EpochLoss e;
    e.train = sum / static_cast<double>(order.size());
    e.val = val_targets.empty() ? e.train : loss(val_inputs, val_targets);
    if (!std::isfinite(e.val)) {
      params_ = best;
      throw Error(ErrorCode::NonFiniteLoss, kModule,
                  "validation loss diverged in epoch " + std::to_string(epoch));
    }
    trace.epochs.push_back(e);

    if (e.val < best_seen) {
      best_seen = e.val;
      best = params_;
      trace.best_epoch = epoch;
    }
    if (e.val < patience_ref - config_.early_stop_min_delta) {
      patience_ref = e.val;
      waited = 0;
    } else if (++waited >= config_.early_stop_patience) {
      trace.early_stopped = true;
      break;
    }
  }
  params_ = std::move(best);
  return trace;
}

std::unique_ptr<Predictor> build_predictor(const PredictorConfig& config) {
  switch (config.kind) {
    case ModelKind::transformer: return build_transformer(config);
    case ModelKind::lstm:
    case ModelKind::gru:
    case ModelKind::stacked_lstm: return build_recurrent(config);
    case ModelKind::fcnn: return build_fcnn(config);
  }
  bad_config("unknown model kind");
}

void write_config(std::ostream& out, const PredictorConfig& c, std::string_view prefix) {
  auto line = [&](std::string_view key, const std::string& v) { out << prefix << key << ' ' << v << '\n'; };
  line("kind", std::string(to_string(c.kind)));
  line("lookback", std::to_string(c.lookback));
  line("epochs", std::to_string(c.epochs));
  line("hidden_width", std::to_string(c.hidden_width));
  line("d_model", std::to_string(c.d_model));
  line("n_heads", std::to_string(c.n_heads));
  line("n_layers", std::to_string(c.n_layers));
  line("ffn_width", std::to_string(c.ffn_width));
  line("learning_rate", format_double(c.learning_rate));
  line("batch_size", std::to_string(c.batch_size));
  line("early_stop_patience", std::to_string(c.early_stop_patience));
  line("early_stop_min_delta", format_double(c.early_stop_min_delta));
  line("seed", std::to_string(c.seed));
  line("zero_init_output", c.zero_init_output ? "1" : "0");
}

void save_checkpoint(std::ostream& out, const Predictor& model) {
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  write_config(out, model.config());
  out << "params " << model.parameters().size() << '\n';
  for (const auto& p : model.parameters()) {
    out << "param " << p.name << ' ' << p.value.rows() << ' ' << p.value.cols() << '\n';
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      out << (i == 0 ? "" : " ") << format_double(p.value.data()[i]);
    }
    out << '\n';
  }
  out << "end\n";
}

std::unique_ptr<Predictor> load_checkpoint(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kCheckpointMagic) bad_checkpoint("not a model checkpoint");
  if (version != kCheckpointVersion) {
    bad_checkpoint("checkpoint version " + std::to_string(version) + ", expected " +
                   std::to_string(kCheckpointVersion));
  }
  std::map<std::string, std::string> fields;
  std::string key;
  while (in >> key && key != "params") {
    std::string v;
    if (!(in >> v)) bad_checkpoint("truncated config");
    fields[key] = v;
  }
  auto get = [&](const std::string& k) {
    auto it = fields.find(k);
    if (it == fields.end()) bad_checkpoint("missing config field '" + k + "'");
    return it->second;
  };
  auto get_size = [&](const std::string& k) {
    std::size_t v = 0;
    const std::string s = get(k);
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) bad_checkpoint("bad value for '" + k + "'");
    return v;
  };
  auto get_double = [&](const std::string& k) {
    double v = 0;
    const std::string s = get(k);
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) bad_checkpoint("bad value for '" + k + "'");
    return v;
  };
  PredictorConfig c;
  try {
    c.kind = parse_model_kind(get("kind"));
  } catch (const Error&) {
    bad_checkpoint("unknown model kind '" + get("kind") + "'");
  }
  c.lookback = get_size("lookback");
  c.epochs = get_size("epochs");
  c.hidden_width = get_size("hidden_width");
  c.d_model = get_size("d_model");
  c.n_heads = get_size("n_heads");
  c.n_layers = get_size("n_layers");
  c.ffn_width = get_size("ffn_width");
  c.learning_rate = get_double("learning_rate");
  c.batch_size = get_size("batch_size");
  c.early_stop_patience = get_size("early_stop_patience");
  c.early_stop_min_delta = get_double("early_stop_min_delta");
  c.seed = get_size("seed");
  c.zero_init_output = get_size("zero_init_output") != 0;

  auto model = build_predictor(c);
  std::size_t count = 0;
  if (!(in >> count) || count != model->parameters().size()) {
    bad_checkpoint("parameter count does not match the model architecture");
  }
  for (auto& p : model->parameters()) {
    std::string tag, name;
    Eigen::Index rows = 0, cols = 0;
    if (!(in >> tag >> name >> rows >> cols) || tag != "param") bad_checkpoint("malformed parameter header");
    if (name != p.name || rows != p.value.rows() || cols != p.value.cols()) {
      bad_checkpoint("parameter '" + name + "' " + std::to_string(rows) + "x" + std::to_string(cols) +
                     " does not match '" + p.name + "' " + std::to_string(p.value.rows()) + "x" +
                     std::to_string(p.value.cols()));
    }
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      std::string tok;
      if (!(in >> tok)) bad_checkpoint("truncated values for '" + name + "'");
      double v = 0;
      auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (r.ec != std::errc{} || r.ptr != tok.data() + tok.size()) bad_checkpoint("bad value in '" + name + "'");
      p.value.data()[i] = v;
    }
  }
  std::string end;
  if (!(in >> end) || end != "end") bad_checkpoint("missing end marker");
  return model;
}

}  // namespace xrcast::predictors
