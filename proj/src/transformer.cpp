#include <cmath>

#include "xrcast/error.hpp"
#include "xrcast/predictors.hpp"

namespace xrcast::predictors {

namespace {

// Encoder-only transformer: scalar input projection, sinusoidal positions,
// post-norm encoder blocks, mean pooling over positions, linear head.
class TransformerPredictor final : public Predictor {
 public:
  explicit TransformerPredictor(const PredictorConfig& config) : Predictor(config) {
    const auto d = static_cast<Eigen::Index>(config_.d_model);
    const auto ffn = static_cast<Eigen::Index>(config_.ffn_width);
    const auto w = static_cast<Eigen::Index>(config_.lookback);

    in_w_ = add_parameter("input.weight", 1, d, 1);
    in_b_ = add_parameter("input.bias", 1, d, 0);
    for (std::size_t l = 0; l < config_.n_layers; ++l) {
      const std::string p = "layer" + std::to_string(l) + ".";
      Layer layer;
      layer.qkv_w = add_parameter(p + "qkv.weight", d, 3 * d, config_.d_model);
      layer.qkv_b = add_parameter(p + "qkv.bias", 1, 3 * d, 0);
      layer.out_w = add_parameter(p + "attn_out.weight", d, d, config_.d_model);
      layer.out_b = add_parameter(p + "attn_out.bias", 1, d, 0);
      layer.norm1_g = add_parameter(p + "norm1.gamma", 1, d, 0, 1.0);
      layer.norm1_b = add_parameter(p + "norm1.beta", 1, d, 0);
      layer.ffn1_w = add_parameter(p + "ffn1.weight", d, ffn, config_.d_model);
      layer.ffn1_b = add_parameter(p + "ffn1.bias", 1, ffn, 0);
      layer.ffn2_w = add_parameter(p + "ffn2.weight", ffn, d, config_.ffn_width);
      layer.ffn2_b = add_parameter(p + "ffn2.bias", 1, d, 0);
      layer.norm2_g = add_parameter(p + "norm2.gamma", 1, d, 0, 1.0);
      layer.norm2_b = add_parameter(p + "norm2.beta", 1, d, 0);
      layers_.push_back(layer);
    }
    head_w_ = add_parameter("head.weight", d, 1, config_.d_model);
    head_b_ = add_parameter("head.bias", 1, 1, 0);

    positions_.resize(w, d);
    for (Eigen::Index pos = 0; pos < w; ++pos) {
      for (Eigen::Index i = 0; i < d; ++i) {
        const double rate = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(d));
        positions_(pos, i) = i % 2 == 0 ? std::sin(pos * rate) : std::cos(pos * rate);
      }
    }
  }

 protected:
  nn::Tape::Var forward(nn::Tape& tape, const Matrix& inputs, ForwardProbe* probe) const override {
    const Eigen::Index batch = inputs.rows();
    const Eigen::Index w = inputs.cols();
    const auto d = static_cast<Eigen::Index>(config_.d_model);
    const auto heads = static_cast<Eigen::Index>(config_.n_heads);
    const Eigen::Index dh = d / heads;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    // Stack the windows into one (batch*w) x 1 column so projections run as one product.
    Matrix column(batch * w, 1);
    Matrix pos(batch * w, d);
    for (Eigen::Index b = 0; b < batch; ++b) {
      column.middleRows(b * w, w) = inputs.row(b).transpose();
      pos.middleRows(b * w, w) = positions_;
    }
    auto h = tape.add_row(tape.matmul(tape.constant(std::move(column)), bind(tape, in_w_)), bind(tape, in_b_));
    h = tape.add(h, tape.constant(std::move(pos)));

    for (const auto& layer : layers_) {
      const auto qkv = tape.add_row(tape.matmul(h, bind(tape, layer.qkv_w)), bind(tape, layer.qkv_b));
      std::vector<nn::Tape::Var> samples;
      samples.reserve(static_cast<std::size_t>(batch));
      for (Eigen::Index b = 0; b < batch; ++b) {
        std::vector<nn::Tape::Var> head_out;
        for (Eigen::Index k = 0; k < heads; ++k) {
          const auto q = tape.block(qkv, b * w, k * dh, w, dh);
          const auto key = tape.block(qkv, b * w, d + k * dh, w, dh);
          const auto v = tape.block(qkv, b * w, 2 * d + k * dh, w, dh);
          const auto attn = tape.softmax_rows(tape.scale(tape.matmul_nt(q, key), inv_sqrt_dh));
          if (probe) probe->attention.push_back(tape.value(attn));
          head_out.push_back(tape.matmul(attn, v));
        }
        samples.push_back(heads == 1 ? head_out.front() : tape.hconcat(head_out));
      }
      const auto mixed = tape.add_row(tape.matmul(tape.vconcat(samples), bind(tape, layer.out_w)),
                                      bind(tape, layer.out_b));
      h = tape.layer_norm_rows(tape.add(h, mixed), bind(tape, layer.norm1_g), bind(tape, layer.norm1_b));
      const auto inner = tape.relu(tape.add_row(tape.matmul(h, bind(tape, layer.ffn1_w)), bind(tape, layer.ffn1_b)));
      const auto ffn = tape.add_row(tape.matmul(inner, bind(tape, layer.ffn2_w)), bind(tape, layer.ffn2_b));
      h = tape.layer_norm_rows(tape.add(h, ffn), bind(tape, layer.norm2_g), bind(tape, layer.norm2_b));
    }

    Matrix pool = Matrix::Zero(batch, batch * w);
    for (Eigen::Index b = 0; b < batch; ++b) pool.block(b, b * w, 1, w).setConstant(1.0 / static_cast<double>(w));
    const auto pooled = tape.matmul(tape.constant(std::move(pool)), h);
    return tape.add_row(tape.matmul(pooled, bind(tape, head_w_)), bind(tape, head_b_));
  }

 private:
  struct Layer {
    std::size_t qkv_w, qkv_b, out_w, out_b, norm1_g, norm1_b;
    std::size_t ffn1_w, ffn1_b, ffn2_w, ffn2_b, norm2_g, norm2_b;
  };

  std::size_t in_w_, in_b_, head_w_, head_b_;
  std::vector<Layer> layers_;
  Matrix positions_;
};

}  // namespace

std::unique_ptr<Predictor> build_transformer(const PredictorConfig& config) {
  if (config.kind != ModelKind::transformer) {
    throw Error(ErrorCode::BadConfig, "predictors", "build_transformer needs kind=transformer");
  }
  return std::make_unique<TransformerPredictor>(config);
}

}  // namespace xrcast::predictors
