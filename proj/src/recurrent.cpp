#include "xrcast/error.hpp"
#include "xrcast/predictors.hpp"

namespace xrcast::predictors {

namespace {

// LSTM, GRU and two-layer stacked LSTM over the window; the final hidden
// state feeds a linear head. Gate weights are packed per layer:
// LSTM columns [input | forget | cell | output], GRU [reset | update | new].
class RecurrentPredictor final : public Predictor {
 public:
  explicit RecurrentPredictor(const PredictorConfig& config) : Predictor(config) {
    const auto hidden = static_cast<Eigen::Index>(config_.hidden_width);
    const std::size_t layers = config_.kind == ModelKind::stacked_lstm ? 2 : 1;
    const Eigen::Index gates = config_.kind == ModelKind::gru ? 3 : 4;
    for (std::size_t l = 0; l < layers; ++l) {
      const std::string p = "rnn" + std::to_string(l) + ".";
      const Eigen::Index in = l == 0 ? 1 : hidden;
      Cell cell;
      cell.wx = add_parameter(p + "input.weight", in, gates * hidden, static_cast<std::size_t>(in));
      cell.wh = add_parameter(p + "hidden.weight", hidden, gates * hidden, config_.hidden_width);
      cell.bx = add_parameter(p + "input.bias", 1, gates * hidden, 0);
      if (config_.kind == ModelKind::gru) cell.bh = add_parameter(p + "hidden.bias", 1, gates * hidden, 0);
      cells_.push_back(cell);
    }
    head_w_ = add_parameter("head.weight", hidden, 1, config_.hidden_width);
    head_b_ = add_parameter("head.bias", 1, 1, 0);
  }

 protected:
  nn::Tape::Var forward(nn::Tape& tape, const Matrix& inputs, ForwardProbe* probe) const override {
    const Eigen::Index batch = inputs.rows();
    std::vector<nn::Tape::Var> sequence;
    for (Eigen::Index t = 0; t < inputs.cols(); ++t) sequence.push_back(tape.constant(inputs.col(t)));
    for (const auto& cell : cells_) {
      sequence = config_.kind == ModelKind::gru ? run_gru(tape, cell, sequence, batch, probe)
                                                : run_lstm(tape, cell, sequence, batch, probe);
    }
    return tape.add_row(tape.matmul(sequence.back(), bind(tape, head_w_)), bind(tape, head_b_));
  }

 private:
  struct Cell {
    std::size_t wx = 0, wh = 0, bx = 0, bh = 0;
  };

  static void record(nn::Tape& tape, nn::Tape::Var gate, ForwardProbe* probe) {
    if (!probe) return;
    const Matrix& v = tape.value(gate);
    probe->gate_values.insert(probe->gate_values.end(), v.data(), v.data() + v.size());
  }

  std::vector<nn::Tape::Var> run_lstm(nn::Tape& tape, const Cell& cell, const std::vector<nn::Tape::Var>& xs,
                                      Eigen::Index batch, ForwardProbe* probe) const {
    const auto d = static_cast<Eigen::Index>(config_.hidden_width);
    const auto wx = bind(tape, cell.wx);
    const auto wh = bind(tape, cell.wh);
    const auto bx = bind(tape, cell.bx);
    auto h = tape.constant(Matrix::Zero(batch, d));
    auto c = tape.constant(Matrix::Zero(batch, d));
    std::vector<nn::Tape::Var> out;
    out.reserve(xs.size());
    for (const auto x : xs) {
      const auto g = tape.add_row(tape.add(tape.matmul(x, wx), tape.matmul(h, wh)), bx);
      const auto in = tape.sigmoid(tape.block(g, 0, 0, batch, d));
      const auto forget = tape.sigmoid(tape.block(g, 0, d, batch, d));
      const auto cand = tape.tanh(tape.block(g, 0, 2 * d, batch, d));
      const auto gate_out = tape.sigmoid(tape.block(g, 0, 3 * d, batch, d));
      record(tape, in, probe);
      record(tape, forget, probe);
      record(tape, gate_out, probe);
      c = tape.add(tape.mul(forget, c), tape.mul(in, cand));
      h = tape.mul(gate_out, tape.tanh(c));
      out.push_back(h);
    }
    return out;
  }

  std::vector<nn::Tape::Var> run_gru(nn::Tape& tape, const Cell& cell, const std::vector<nn::Tape::Var>& xs,
                                     Eigen::Index batch, ForwardProbe* probe) const {
    const auto d = static_cast<Eigen::Index>(config_.hidden_width);
    const auto wx = bind(tape, cell.wx);
    const auto wh = bind(tape, cell.wh);
    const auto bx = bind(tape, cell.bx);
    const auto bh = bind(tape, cell.bh);
    auto h = tape.constant(Matrix::Zero(batch, d));
    std::vector<nn::Tape::Var> out;
    out.reserve(xs.size());
    for (const auto x : xs) {
      const auto gx = tape.add_row(tape.matmul(x, wx), bx);
      const auto gh = tape.add_row(tape.matmul(h, wh), bh);
      const auto reset = tape.sigmoid(tape.add(tape.block(gx, 0, 0, batch, d), tape.block(gh, 0, 0, batch, d)));
      const auto update = tape.sigmoid(tape.add(tape.block(gx, 0, d, batch, d), tape.block(gh, 0, d, batch, d)));
      record(tape, reset, probe);
      record(tape, update, probe);
      const auto cand = tape.tanh(
          tape.add(tape.block(gx, 0, 2 * d, batch, d), tape.mul(reset, tape.block(gh, 0, 2 * d, batch, d))));
      // h' = (1 - z) * n + z * h = n + z * (h - n)
      h = tape.add(cand, tape.mul(update, tape.sub(h, cand)));
      out.push_back(h);
    }
    return out;
  }

  std::vector<Cell> cells_;
  std::size_t head_w_ = 0, head_b_ = 0;
};

}  // namespace

std::unique_ptr<Predictor> build_recurrent(const PredictorConfig& config) {
  if (config.kind != ModelKind::lstm && config.kind != ModelKind::gru && config.kind != ModelKind::stacked_lstm) {
    throw Error(ErrorCode::BadConfig, "predictors", "build_recurrent needs kind lstm, gru or stacked_lstm");
  }
  return std::make_unique<RecurrentPredictor>(config);
}

}  // namespace xrcast::predictors
