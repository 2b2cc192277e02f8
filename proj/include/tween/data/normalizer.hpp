#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "tween/data/features.hpp"

namespace tween::data {

// Per-column standardization. Statistics come from context and target rows
// only; missing rows never contribute.
struct Normalizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
  double epsilon = 1e-8;

  static Normalizer fit(std::span<const FeatureMatrix> inputs, double epsilon = 1e-8);
  static Normalizer identity(std::size_t dim);

  std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd invert(const Eigen::MatrixXd& x) const;

  // Column subset, e.g. the pose columns for the output side.
  Normalizer select(const std::vector<std::size_t>& columns) const;

  // Standardizes real rows in place, then writes zeros into zero-filled
  // missing rows and into the target row's velocity channels.
  void apply_input(FeatureMatrix& m, const FeatureLayout& layout) const;
};

}  // namespace tween::data
