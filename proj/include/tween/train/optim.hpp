#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "tween/nn/model.hpp"

namespace tween::train {

using nn::Matrix;
using nn::ModelParams;

class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename S>
struct L1Result {
  double loss = 0.0;
  Matrix<S> grad;
};

// Mean absolute error over the selected rows (all rows when `rows` is
// null). The gradient is sign(pred - target) / count with 0 at ties.
template <typename S>
L1Result<S> l1_loss(const Matrix<S>& pred, const Matrix<S>& target, const std::vector<bool>* rows = nullptr) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw TrainError("l1_loss shape mismatch: " + std::to_string(pred.rows()) + "x" +
                     std::to_string(pred.cols()) + " vs " + std::to_string(target.rows()) + "x" +
                     std::to_string(target.cols()));
  }
  if (rows != nullptr && rows->size() != static_cast<std::size_t>(pred.rows())) {
    throw TrainError("l1_loss row mask has the wrong length");
  }
  L1Result<S> out;
  out.grad = Matrix<S>::Zero(pred.rows(), pred.cols());
  long used = 0;
  for (long r = 0; r < pred.rows(); ++r) {
    if (rows == nullptr || (*rows)[static_cast<std::size_t>(r)]) used += 1;
  }
  if (used == 0) return out;
  const double count = static_cast<double>(used * pred.cols());
  double sum = 0.0;
  for (long r = 0; r < pred.rows(); ++r) {
    if (rows != nullptr && !(*rows)[static_cast<std::size_t>(r)]) continue;
    for (long c = 0; c < pred.cols(); ++c) {
      const double d = static_cast<double>(pred(r, c)) - static_cast<double>(target(r, c));
      sum += std::abs(d);
      if (d > 0) out.grad(r, c) = static_cast<S>(1.0 / count);
      if (d < 0) out.grad(r, c) = static_cast<S>(-1.0 / count);
    }
  }
  out.loss = sum / count;
  return out;
}

// d_model^-0.5 * min(step^-0.5, step * warmup^-1.5), step >= 1.
double noam_lr(long step, int d_model, int warmup);

// Inclusive uniform integer in [m_min, m_max].
int sample_transition_length(std::mt19937_64& rng, int m_min, int m_max);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
  double weight_decay = 0.01;
  // Extra step-size factor for the position tables (rel_bias, key_pos).
  double position_lr_scale = 1.0;
};

struct OptimizerState {
  ModelParams<float> m;
  ModelParams<float> v;
  long step = 0;

  static OptimizerState for_params(const ModelParams<float>& p);
};

// One bias-corrected Adam update plus decoupled decay p -= lr * wd * p.
// Throws naming the first parameter whose gradient is not finite; params
// and state are untouched in that case.
void adamw_step(ModelParams<float>& params, const ModelParams<float>& grads, OptimizerState& state,
                double lr, const AdamWConfig& cfg);

// Scales grads so their global L2 norm is at most max_norm; returns the
// norm before scaling.
double clip_grad_norm(ModelParams<float>& grads, double max_norm);

}  // namespace tween::train
