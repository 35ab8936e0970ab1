#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xrcast/nn/tape.hpp"
#include "xrcast/random.hpp"

namespace xrcast::predictors {

using nn::Matrix;
using nn::Parameter;

enum class ModelKind { transformer, lstm, gru, stacked_lstm, fcnn };

std::string_view to_string(ModelKind kind) noexcept;
ModelKind parse_model_kind(std::string_view name);

struct PredictorConfig {
  ModelKind kind = ModelKind::transformer;
  std::size_t lookback = 32;
  std::size_t epochs = 300;
  /// Recurrent hidden state and FCNN hidden layer width.
  std::size_t hidden_width = 64;
  std::size_t d_model = 64;
  std::size_t n_heads = 2;
  std::size_t n_layers = 2;
  std::size_t ffn_width = 128;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t early_stop_patience = 10;
  double early_stop_min_delta = 1e-4;
  std::uint64_t seed = 0;
  /// Start the output layer at zero weights (FCNN only).
  bool zero_init_output = false;

  /// Throws BadConfig.
  void validate() const;
};

struct EpochLoss {
  double train = 0.0;
  double val = 0.0;
};

struct TrainTrace {
  std::vector<EpochLoss> epochs;
  std::size_t best_epoch = 0;
  bool early_stopped = false;
};

/// Values captured during a forward pass, for inspection in tests and tools.
struct ForwardProbe {
  std::vector<Matrix> attention;     // one W x W matrix per sample, layer and head
  std::vector<double> gate_values;   // every sigmoid gate activation
};

/// A sequence model mapping a window of `lookback` values to the next value.
class Predictor {
 public:
  virtual ~Predictor() = default;
  Predictor(const Predictor&) = delete;
  Predictor& operator=(const Predictor&) = delete;

  const PredictorConfig& config() const { return config_; }
  std::span<Parameter> parameters() { return params_; }
  std::span<const Parameter> parameters() const { return params_; }
  std::size_t parameter_count() const;

  /// Mini-batch Adam on MSE with early stopping on the validation loss; the
  /// best-validation parameters are restored on return. `inputs` is
  /// row-major count x lookback. Empty validation data falls back to the
  /// training loss.
  TrainTrace fit(std::span<const double> inputs, std::span<const double> targets,
                 std::span<const double> val_inputs, std::span<const double> val_targets);

  std::vector<double> predict(std::span<const double> inputs) const;

  /// MSE over the batch and its gradient, one matrix per parameter.
  double loss_and_gradients(std::span<const double> inputs, std::span<const double> targets,
                            std::vector<Matrix>& grads) const;
  double loss(std::span<const double> inputs, std::span<const double> targets) const;

  /// Runs one forward pass recording attention weights / gate activations.
  std::vector<double> probe(std::span<const double> inputs, ForwardProbe& out) const;

  /// Matrix multiply-adds spent on one forward+backward pass over the batch.
  std::uint64_t training_work(std::span<const double> inputs, std::span<const double> targets) const;

 protected:
  explicit Predictor(PredictorConfig config);

  /// inputs: batch x lookback. Returns a batch x 1 node.
  virtual nn::Tape::Var forward(nn::Tape& tape, const Matrix& inputs, ForwardProbe* probe) const = 0;

  /// Registers a parameter initialised uniform in +-1/sqrt(fan_in), or with
  /// `fill` when fan_in is 0.
  std::size_t add_parameter(std::string name, Eigen::Index rows, Eigen::Index cols, std::size_t fan_in,
                            double fill = 0.0);
  nn::Tape::Var bind(nn::Tape& tape, std::size_t id) const { return tape.param(params_[id], id); }

  PredictorConfig config_;
  std::vector<Parameter> params_;

 private:
  Matrix to_matrix(std::span<const double> inputs) const;
  Rng init_rng_;
};

std::unique_ptr<Predictor> build_transformer(const PredictorConfig& config);
std::unique_ptr<Predictor> build_recurrent(const PredictorConfig& config);
std::unique_ptr<Predictor> build_fcnn(const PredictorConfig& config);
/// Dispatches on config.kind.
std::unique_ptr<Predictor> build_predictor(const PredictorConfig& config);

/// Text container: version line, config, then each parameter as
/// `param <name> <rows> <cols>` followed by its values.
void save_checkpoint(std::ostream& out, const Predictor& model);
/// Rejects a different version or any parameter name/shape mismatch.
std::unique_ptr<Predictor> load_checkpoint(std::istream& in);

void write_config(std::ostream& out, const PredictorConfig& config, std::string_view prefix = "");

}  // namespace xrcast::predictors
