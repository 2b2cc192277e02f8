#include "tween/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace tween::nn {

namespace {

using Mat = Matrix<double>;

Mat random_matrix(long rows, long cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat m(rows, cols);
  for (long k = 0; k < m.size(); ++k) m.data()[k] = n(rng);
  return m;
}

double linear_loss(const Mat& x, const Mat& r, ModelParams<double>& p, ModelParams<double>* g) {
  Tape<double> t;
  auto sink = [&](Mat ModelParams<double>::*member) { return g != nullptr ? &(g->*member) : nullptr; };
  auto h = t.linear(t.constant(x), t.parameter(p.w_in, sink(&ModelParams<double>::w_in)),
                    t.parameter(p.b_in, sink(&ModelParams<double>::b_in)));
  auto out = t.linear(h, t.parameter(p.w_out, sink(&ModelParams<double>::w_out)),
                      t.parameter(p.b_out, sink(&ModelParams<double>::b_out)));
  const double value = t.value(out).cwiseProduct(r).sum();
  if (g != nullptr) t.backward(out, r);
  return value;
}

}  // namespace

GradCheckReport grad_check(const ModelConfig& cfg, std::uint64_t seed, const GradCheckOptions& opt) {
  cfg.validate();
  if (opt.context < 1 || opt.length < opt.context + 1) throw NnError("grad_check: bad sequence layout");
  std::mt19937_64 rng(seed);
  ModelParams<double> params = init_params<double>(cfg, seed, false);
  // Nonzero tables so their gradients pass through non-trivial paths.
  params.rel_bias = random_matrix(params.rel_bias.rows(), params.rel_bias.cols(), rng) * 0.5;
  if (params.key_pos.size() > 0) {
    params.key_pos = random_matrix(params.key_pos.rows(), params.key_pos.cols(), rng) * 0.5;
  }
  const Mat x = random_matrix(opt.length, cfg.d_in, rng);
  const Mat r = random_matrix(opt.length, cfg.d_out, rng);
  const SequenceLayout layout{opt.context, opt.length - opt.context - 1};

  auto loss = [&](ModelParams<double>& p, ModelParams<double>* g) {
    if (opt.linear_only) return linear_loss(x, r, p, g);
    auto pass = encoder_forward<double>(x, layout, cfg, p, g);
    const double value = pass.value().cwiseProduct(r).sum();
    if (g != nullptr) backward<double>(pass, r);
    return value;
  };

  ModelParams<double> grads = params.zeros_like();
  loss(params, &grads);

  std::vector<std::pair<std::string, Mat*>> values;
  std::vector<const Mat*> analytic;
  params.for_each([&](const std::string& name, Mat& m) { values.emplace_back(name, &m); });
  grads.for_each([&](const std::string&, const Mat& m) { analytic.push_back(&m); });

  GradCheckReport report;
  for (std::size_t t = 0; t < values.size(); ++t) {
    const std::string& name = values[t].first;
    if (opt.linear_only && name.rfind("input.", 0) != 0 && name.rfind("output.", 0) != 0) continue;
    Mat& m = *values[t].second;
    std::uniform_int_distribution<long> pick(0, m.size() - 1);
    const int samples = static_cast<int>(std::min<long>(opt.samples_per_tensor, m.size()));
    for (int s = 0; s < samples; ++s) {
      const long idx = pick(rng);
      const double saved = m.data()[idx];
      m.data()[idx] = saved + opt.eps;
      const double up = loss(params, nullptr);
      m.data()[idx] = saved - opt.eps;
      const double down = loss(params, nullptr);
      m.data()[idx] = saved;
      const double numeric = (up - down) / (2.0 * opt.eps);
      const double a = analytic[t]->data()[idx];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      ++report.checked;
      if (err >= report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_param = name;
        report.worst_index = idx;
      }
    }
  }
  return report;
}

}  // namespace tween::nn
