#include "tween/nn/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace tween::nn {

void ModelConfig::validate() const {
  if (layers < 1) throw NnError("model needs at least one layer");
  if (heads < 1 || d_model < 1 || d_model % heads != 0) {
    throw NnError("d_model " + std::to_string(d_model) + " is not divisible by heads " +
                  std::to_string(heads));
  }
  if (d_ff < 1) throw NnError("d_ff must be positive");
  if (max_rel_dist < 1) throw NnError("max_rel_dist must be at least 1");
  if (dropout < 0.0 || dropout >= 1.0) throw NnError("dropout must lie in [0, 1)");
  if (!pre_norm) throw NnError("only pre-norm encoder blocks are supported");
  if (d_in < 1 || d_out < 1) throw NnError("d_in and d_out must be set");
}

ModelConfig tiny_preset(int d_in, int d_out) {
  ModelConfig c;
  c.layers = 2;
  c.heads = 4;
  c.d_model = 64;
  c.d_ff = 256;
  c.max_rel_dist = 32;
  c.dropout = 0.0;
  c.d_in = d_in;
  c.d_out = d_out;
  return c;
}

ModelConfig paper_preset(int d_in, int d_out) {
  ModelConfig c;
  c.layers = 6;
  c.heads = 8;
  c.d_model = 1024;
  c.d_ff = 4096;
  c.max_rel_dist = 32;
  c.dropout = 0.1;
  c.d_in = d_in;
  c.d_out = d_out;
  return c;
}

namespace {

template <typename S>
Matrix<S> glorot(long rows, long cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> u(-limit, limit);
  Matrix<S> m(rows, cols);
  for (long k = 0; k < m.size(); ++k) m.data()[k] = static_cast<S>(u(rng));
  return m;
}

template <typename S>
Matrix<S> row_of(long cols, S value) {
  return Matrix<S>::Constant(1, cols, value);
}

}  // namespace

template <typename S>
ModelParams<S> init_params(const ModelConfig& cfg, std::uint64_t seed, bool zero_output) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  const long d = cfg.d_model;
  ModelParams<S> p;
  p.w_in = glorot<S>(cfg.d_in, d, rng);
  p.b_in = row_of<S>(d, S(0));
  p.rel_bias = Matrix<S>::Zero(cfg.heads, 2 * cfg.max_rel_dist + 1);
  if (cfg.key_pos_embedding) p.key_pos = Matrix<S>::Zero(cfg.max_rel_dist + 1, d);
  p.layers.resize(static_cast<std::size_t>(cfg.layers));
  for (auto& l : p.layers) {
    l.ln1_gain = row_of<S>(d, S(1));
    l.ln1_bias = row_of<S>(d, S(0));
    l.wq = glorot<S>(d, d, rng);
    l.bq = row_of<S>(d, S(0));
    l.wk = glorot<S>(d, d, rng);
    l.bk = row_of<S>(d, S(0));
    l.wv = glorot<S>(d, d, rng);
    l.bv = row_of<S>(d, S(0));
    l.wo = glorot<S>(d, d, rng);
    l.bo = row_of<S>(d, S(0));
    l.ln2_gain = row_of<S>(d, S(1));
    l.ln2_bias = row_of<S>(d, S(0));
    l.w1 = glorot<S>(d, cfg.d_ff, rng);
    l.b1 = row_of<S>(cfg.d_ff, S(0));
    l.w2 = glorot<S>(cfg.d_ff, d, rng);
    l.b2 = row_of<S>(d, S(0));
  }
  p.lnf_gain = row_of<S>(d, S(1));
  p.lnf_bias = row_of<S>(d, S(0));
  p.w_out = zero_output ? Matrix<S>::Zero(d, cfg.d_out) : glorot<S>(d, cfg.d_out, rng);
  p.b_out = row_of<S>(cfg.d_out, S(0));
  return p;
}

template <typename S>
std::vector<Matrix<S>> relative_bias(int length, const ModelConfig& cfg, const ModelParams<S>& p) {
  std::vector<Matrix<S>> out(static_cast<std::size_t>(cfg.heads));
  for (int h = 0; h < cfg.heads; ++h) {
    auto& m = out[static_cast<std::size_t>(h)];
    m.resize(length, length);
    for (long i = 0; i < length; ++i) {
      for (long j = 0; j < length; ++j) m(i, j) = p.rel_bias(h, relative_bucket(i, j, cfg.max_rel_dist));
    }
  }
  return out;
}

std::vector<int> key_position_indices(int length, int context, int missing, int max_rel_dist) {
  if (context < 1 || missing < 0 || length != context + missing + 1) {
    throw NnError("key positions need length = context + missing + 1");
  }
  const int last_context = context - 1;
  const int target = context + missing;
  std::vector<int> idx(static_cast<std::size_t>(length));
  for (int r = 0; r < length; ++r) {
    const int d = std::min(std::abs(r - last_context), std::abs(r - target));
    idx[static_cast<std::size_t>(r)] = std::min(d, max_rel_dist);
  }
  return idx;
}

template <typename S>
Matrix<S> key_position_embedding(int length, int context, int missing, const ModelConfig& cfg,
                                 const ModelParams<S>& p) {
  if (!cfg.key_pos_embedding || p.key_pos.size() == 0) {
    throw NnError("key-position embeddings are disabled in this model");
  }
  const auto idx = key_position_indices(length, context, missing, cfg.max_rel_dist);
  Matrix<S> out(length, p.key_pos.cols());
  for (int r = 0; r < length; ++r) out.row(r) = p.key_pos.row(idx[static_cast<std::size_t>(r)]);
  return out;
}

template <typename S>
ForwardPass<S> encoder_forward(const Matrix<S>& features, const SequenceLayout& layout,
                               const ModelConfig& cfg, const ModelParams<S>& params,
                               ModelParams<S>* grads, std::mt19937_64* dropout_rng) {
  if (features.cols() != cfg.d_in) {
    throw NnError("encoder input has " + std::to_string(features.cols()) + " columns, model expects " +
                  std::to_string(cfg.d_in));
  }
  if (features.rows() < 1) throw NnError("encoder input has no frames");
  ForwardPass<S> pass;
  pass.tape = std::make_unique<Tape<S>>();
  Tape<S>& t = *pass.tape;
  using Var = typename Tape<S>::Var;

  auto param = [&](const Matrix<S>& value, Matrix<S>* sink) { return t.parameter(value, sink); };
  auto sink = [&](auto member) -> Matrix<S>* { return grads != nullptr ? &(grads->*member) : nullptr; };
  const bool drop = dropout_rng != nullptr && cfg.dropout > 0.0;

  Var h = t.linear(t.constant(features), param(params.w_in, sink(&ModelParams<S>::w_in)),
                   param(params.b_in, sink(&ModelParams<S>::b_in)));
  if (cfg.key_pos_embedding) {
    const int length = static_cast<int>(features.rows());
    auto idx = key_position_indices(length, layout.context, layout.missing, cfg.max_rel_dist);
    Var table = param(params.key_pos, sink(&ModelParams<S>::key_pos));
    h = t.add(h, t.gather_rows(table, std::move(idx)));
  }
  const Var rel = param(params.rel_bias, sink(&ModelParams<S>::rel_bias));

  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& p = params.layers[l];
    LayerParams<S>* g = grads != nullptr ? &grads->layers[l] : nullptr;
    auto lp = [&](const Matrix<S>& value, Matrix<S> LayerParams<S>::*member) {
      return t.parameter(value, g != nullptr ? &(g->*member) : nullptr);
    };
    using LP = LayerParams<S>;

    Var a = t.layer_norm(h, lp(p.ln1_gain, &LP::ln1_gain), lp(p.ln1_bias, &LP::ln1_bias));
    Var q = t.linear(a, lp(p.wq, &LP::wq), lp(p.bq, &LP::bq));
    Var k = t.linear(a, lp(p.wk, &LP::wk), lp(p.bk, &LP::bk));
    Var v = t.linear(a, lp(p.wv, &LP::wv), lp(p.bv, &LP::bv));
    Var att = t.attention(q, k, v, rel, cfg.heads, cfg.max_rel_dist, static_cast<int>(l));
    Var o = t.linear(att, lp(p.wo, &LP::wo), lp(p.bo, &LP::bo));
    if (drop) o = t.dropout(o, cfg.dropout, *dropout_rng);
    h = t.add(h, o);

    Var f = t.layer_norm(h, lp(p.ln2_gain, &LP::ln2_gain), lp(p.ln2_bias, &LP::ln2_bias));
    f = t.relu(t.linear(f, lp(p.w1, &LP::w1), lp(p.b1, &LP::b1)));
    f = t.linear(f, lp(p.w2, &LP::w2), lp(p.b2, &LP::b2));
    if (drop) f = t.dropout(f, cfg.dropout, *dropout_rng);
    h = t.add(h, f);
  }
  h = t.layer_norm(h, param(params.lnf_gain, sink(&ModelParams<S>::lnf_gain)),
                   param(params.lnf_bias, sink(&ModelParams<S>::lnf_bias)));
  pass.output = t.linear(h, param(params.w_out, sink(&ModelParams<S>::w_out)),
                         param(params.b_out, sink(&ModelParams<S>::b_out)));
  return pass;
}

template <typename S>
void backward(ForwardPass<S>& pass, const Matrix<S>& loss_grad) {
  if (!pass.tape) throw NnError("backward on an empty forward pass");
  pass.tape->backward(pass.output, loss_grad);
}

#define TWEEN_INSTANTIATE(S)                                                                   \
  template ModelParams<S> init_params<S>(const ModelConfig&, std::uint64_t, bool);            \
  template std::vector<Matrix<S>> relative_bias<S>(int, const ModelConfig&,                   \
                                                   const ModelParams<S>&);                    \
  template Matrix<S> key_position_embedding<S>(int, int, int, const ModelConfig&,             \
                                               const ModelParams<S>&);                        \
  template ForwardPass<S> encoder_forward<S>(const Matrix<S>&, const SequenceLayout&,         \
                                             const ModelConfig&, const ModelParams<S>&,       \
                                             ModelParams<S>*, std::mt19937_64*);              \
  template void backward<S>(ForwardPass<S>&, const Matrix<S>&);

TWEEN_INSTANTIATE(float)
TWEEN_INSTANTIATE(double)

#undef TWEEN_INSTANTIATE

}  // namespace tween::nn
