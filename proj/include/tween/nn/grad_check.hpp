#pragma once

#include <cstdint>
#include <string>

#include "tween/nn/model.hpp"

namespace tween::nn {

struct GradCheckOptions {
  int length = 6;
  int context = 2;
  double eps = 1e-4;
  int samples_per_tensor = 6;
  // Only the input and output projections: out = (x W_in + b_in) W_out + b_out.
  bool linear_only = false;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  long worst_index = -1;
  int checked = 0;
};

// Compares analytic gradients of loss = sum(output .* R) (R random) with
// central differences, in double precision. Error per entry is
// |analytic - numeric| / max(1, |analytic|).
GradCheckReport grad_check(const ModelConfig& cfg, std::uint64_t seed, const GradCheckOptions& opt = {});

}  // namespace tween::nn
