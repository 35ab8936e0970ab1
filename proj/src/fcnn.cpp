#include "xrcast/error.hpp"
#include "xrcast/predictors.hpp"

namespace xrcast::predictors {

namespace {

class FcnnPredictor final : public Predictor {
 public:
  explicit FcnnPredictor(const PredictorConfig& config) : Predictor(config) {
    const auto w = static_cast<Eigen::Index>(config_.lookback);
    const auto d = static_cast<Eigen::Index>(config_.hidden_width);
    w1_ = add_parameter("fc1.weight", w, d, config_.lookback);
    b1_ = add_parameter("fc1.bias", 1, d, 0);
    w2_ = add_parameter("fc2.weight", d, d, config_.hidden_width);
    b2_ = add_parameter("fc2.bias", 1, d, 0);
    w3_ = config_.zero_init_output ? add_parameter("out.weight", d, 1, 0)
                                   : add_parameter("out.weight", d, 1, config_.hidden_width);
    b3_ = add_parameter("out.bias", 1, 1, 0);
  }

 protected:
  nn::Tape::Var forward(nn::Tape& tape, const Matrix& inputs, ForwardProbe*) const override {
    const auto x = tape.constant(inputs);
    const auto h1 = tape.relu(tape.add_row(tape.matmul(x, bind(tape, w1_)), bind(tape, b1_)));
    const auto h2 = tape.relu(tape.add_row(tape.matmul(h1, bind(tape, w2_)), bind(tape, b2_)));
    return tape.add_row(tape.matmul(h2, bind(tape, w3_)), bind(tape, b3_));
  }

 private:
  std::size_t w1_, b1_, w2_, b2_, w3_, b3_;
};

}  // namespace

std::unique_ptr<Predictor> build_fcnn(const PredictorConfig& config) {
  if (config.kind != ModelKind::fcnn) {
    throw Error(ErrorCode::BadConfig, "predictors", "build_fcnn needs kind=fcnn");
  }
  return std::make_unique<FcnnPredictor>(config);
}

}  // namespace xrcast::predictors
