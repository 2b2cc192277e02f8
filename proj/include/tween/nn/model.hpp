#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "tween/nn/tape.hpp"

namespace tween::nn {

struct ModelConfig {
  int layers = 2;
  int heads = 4;
  int d_model = 64;
  int d_ff = 256;
  int max_rel_dist = 32;
  double dropout = 0.0;
  bool pre_norm = true;
  bool key_pos_embedding = false;
  int d_in = 0;
  int d_out = 0;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

ModelConfig tiny_preset(int d_in, int d_out);
ModelConfig paper_preset(int d_in, int d_out);

template <typename S>
struct LayerParams {
  Matrix<S> ln1_gain, ln1_bias;
  Matrix<S> wq, bq, wk, bk, wv, bv, wo, bo;
  Matrix<S> ln2_gain, ln2_bias;
  Matrix<S> w1, b1, w2, b2;
};

// Weights are stored input-major (x * W), biases as 1 x n rows.
template <typename S>
struct ModelParams {
  Matrix<S> w_in, b_in;
  Matrix<S> rel_bias;  // heads x (2 * max_rel_dist + 1)
  Matrix<S> key_pos;   // (max_rel_dist + 1) x d_model, empty when disabled
  std::vector<LayerParams<S>> layers;
  Matrix<S> lnf_gain, lnf_bias;
  Matrix<S> w_out, b_out;

  // Visits every tensor with a stable dotted name.
  template <typename F>
  void for_each(F&& f) {
    visit(*this, f);
  }
  template <typename F>
  void for_each(F&& f) const {
    visit(*this, f);
  }

  std::size_t parameter_count() const;
  ModelParams zeros_like() const;
  void set_zero();

  template <typename T>
  ModelParams<T> cast() const;

 private:
  template <typename Self, typename F>
  static void visit(Self& self, F& f) {
    f("input.weight", self.w_in);
    f("input.bias", self.b_in);
    f("rel_bias", self.rel_bias);
    if (self.key_pos.size() > 0) f("key_pos", self.key_pos);
    for (std::size_t l = 0; l < self.layers.size(); ++l) {
      auto& p = self.layers[l];
      const std::string pre = "layer" + std::to_string(l) + ".";
      f(pre + "ln1.gain", p.ln1_gain);
      f(pre + "ln1.bias", p.ln1_bias);
      f(pre + "attn.wq", p.wq);
      f(pre + "attn.bq", p.bq);
      f(pre + "attn.wk", p.wk);
      f(pre + "attn.bk", p.bk);
      f(pre + "attn.wv", p.wv);
      f(pre + "attn.bv", p.bv);
      f(pre + "attn.wo", p.wo);
      f(pre + "attn.bo", p.bo);
      f(pre + "ln2.gain", p.ln2_gain);
      f(pre + "ln2.bias", p.ln2_bias);
      f(pre + "ff.w1", p.w1);
      f(pre + "ff.b1", p.b1);
      f(pre + "ff.w2", p.w2);
      f(pre + "ff.b2", p.b2);
    }
    f("final_ln.gain", self.lnf_gain);
    f("final_ln.bias", self.lnf_bias);
    f("output.weight", self.w_out);
    f("output.bias", self.b_out);
  }
};

template <typename S>
std::size_t ModelParams<S>::parameter_count() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const Matrix<S>& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

template <typename S>
ModelParams<S> ModelParams<S>::zeros_like() const {
  ModelParams out = *this;
  out.set_zero();
  return out;
}

template <typename S>
void ModelParams<S>::set_zero() {
  for_each([](const std::string&, Matrix<S>& m) { m.setZero(); });
}

template <typename S>
template <typename T>
ModelParams<T> ModelParams<S>::cast() const {
  ModelParams<T> out;
  out.layers.resize(layers.size());
  std::vector<const Matrix<S>*> src;
  for_each([&](const std::string&, const Matrix<S>& m) { src.push_back(&m); });
  if (key_pos.size() > 0) out.key_pos.resize(1, 1);  // keeps the visit order aligned
  std::size_t k = 0;
  out.for_each([&](const std::string&, Matrix<T>& m) { m = src[k++]->template cast<T>(); });
  return out;
}

// Glorot-uniform projections, unit/zero norms, zero relative-bias table.
// The output projection starts at zero unless `zero_output` is false.
template <typename S>
ModelParams<S> init_params(const ModelConfig& cfg, std::uint64_t seed, bool zero_output = true);

// heads x L x L additive logits: table[h][clamp(j - i) + max_rel_dist].
template <typename S>
std::vector<Matrix<S>> relative_bias(int length, const ModelConfig& cfg, const ModelParams<S>& p);

// Row r gets the embedding for min(distance to the last context frame or
// the target frame, max_rel_dist).
std::vector<int> key_position_indices(int length, int context, int missing, int max_rel_dist);

// Additive key-position signal (L x d_model). Throws when the config does
// not enable key-position embeddings.
template <typename S>
Matrix<S> key_position_embedding(int length, int context, int missing, const ModelConfig& cfg,
                                 const ModelParams<S>& p);

struct SequenceLayout {
  int context = 0;
  int missing = 0;
};

template <typename S>
struct ForwardPass {
  std::unique_ptr<Tape<S>> tape;
  typename Tape<S>::Var output;

  const Matrix<S>& value() const { return tape->value(output); }
};

// input projection -> [+ key-position embedding] -> pre-norm blocks
// (norm, attention, residual; norm, ReLU feed-forward, residual) -> final
// norm -> output projection. Gradients flow into `grads` when non-null.
// Dropout is active only when `dropout_rng` is non-null and cfg.dropout > 0.
template <typename S>
ForwardPass<S> encoder_forward(const Matrix<S>& features, const SequenceLayout& layout,
                               const ModelConfig& cfg, const ModelParams<S>& params,
                               ModelParams<S>* grads = nullptr,
                               std::mt19937_64* dropout_rng = nullptr);

// Reverse sweep of a forward pass; accumulates into the gradient sink given
// to encoder_forward.
template <typename S>
void backward(ForwardPass<S>& pass, const Matrix<S>& loss_grad);

}  // namespace tween::nn
