#include "tween/train/optim.hpp"

#include <algorithm>

namespace tween::train {

double noam_lr(long step, int d_model, int warmup) {
  if (step < 1) throw TrainError("noam_lr: step must be at least 1, got " + std::to_string(step));
  if (d_model < 1 || warmup < 1) throw TrainError("noam_lr: d_model and warmup must be positive");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(warmup);
  // s * w^-1.5 written as (s / w) * w^-0.5 so both branches agree bit for bit at s = w.
  return std::pow(static_cast<double>(d_model), -0.5) * std::min(std::pow(s, -0.5), (s / w) * std::pow(w, -0.5));
}

int sample_transition_length(std::mt19937_64& rng, int m_min, int m_max) {
  if (m_min > m_max) throw TrainError("sample_transition_length: M_min > M_max");
  return std::uniform_int_distribution<int>(m_min, m_max)(rng);
}

OptimizerState OptimizerState::for_params(const ModelParams<float>& p) {
  OptimizerState s;
  s.m = p.zeros_like();
  s.v = p.zeros_like();
  return s;
}

void adamw_step(ModelParams<float>& params, const ModelParams<float>& grads, OptimizerState& state,
                double lr, const AdamWConfig& cfg) {
  std::vector<const Matrix<float>*> g;
  grads.for_each([&](const std::string& name, const Matrix<float>& m) {
    if (!m.allFinite()) throw TrainError("non-finite gradient in parameter " + name);
    g.push_back(&m);
  });
  std::vector<Matrix<float>*> m1, m2;
  state.m.for_each([&](const std::string&, Matrix<float>& m) { m1.push_back(&m); });
  state.v.for_each([&](const std::string&, Matrix<float>& m) { m2.push_back(&m); });
  if (m1.size() != g.size() || m2.size() != g.size()) throw TrainError("optimizer state does not match parameters");

  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const float b1 = static_cast<float>(cfg.beta1);
  const float b2 = static_cast<float>(cfg.beta2);
  const double decay = 1.0 - lr * cfg.weight_decay;
  std::size_t k = 0;
  params.for_each([&](const std::string& name, Matrix<float>& p) {
    const double step_lr = name == "rel_bias" || name == "key_pos" ? lr * cfg.position_lr_scale : lr;
    const Matrix<float>& gk = *g[k];
    if (gk.rows() != p.rows() || gk.cols() != p.cols()) throw TrainError("gradient shape mismatch in " + name);
    Matrix<float>& mk = *m1[k];
    Matrix<float>& vk = *m2[k];
    mk = b1 * mk + (1.0f - b1) * gk;
    vk = b2 * vk + (1.0f - b2) * gk.cwiseProduct(gk);
    for (long i = 0; i < p.size(); ++i) {
      const double mhat = mk.data()[i] / bc1;
      const double vhat = vk.data()[i] / bc2;
      const double update = step_lr * mhat / (std::sqrt(vhat) + cfg.eps);
      p.data()[i] = static_cast<float>(p.data()[i] * decay - update);
    }
    ++k;
  });
}

double clip_grad_norm(ModelParams<float>& grads, double max_norm) {
  double sq = 0.0;
  grads.for_each([&](const std::string&, const Matrix<float>& m) { sq += m.cast<double>().squaredNorm(); });
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const float scale = static_cast<float>(max_norm / norm);
    grads.for_each([&](const std::string&, Matrix<float>& m) { m *= scale; });
  }
  return norm;
}

}  // namespace tween::train
