#include "tween/data/normalizer.hpp"

#include <cmath>

namespace tween::data {

Normalizer Normalizer::fit(std::span<const FeatureMatrix> inputs, double epsilon) {
  if (inputs.empty()) throw DataError("fit_normalizer: empty input collection");
  const long cols = inputs.front().values.cols();
  // Welford updates: bit-identical rows give an exact mean and zero spread.
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(cols);
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(cols);
  std::size_t count = 0;
  for (const auto& m : inputs) {
    if (m.values.cols() != cols) throw DataError("fit_normalizer: column count mismatch");
    for (long r = 0; r < m.values.rows(); ++r) {
      if (m.rows[static_cast<std::size_t>(r)] == RowKind::missing) continue;
      ++count;
      const Eigen::VectorXd x = m.values.row(r).transpose();
      const Eigen::VectorXd delta = x - mean;
      mean += delta / static_cast<double>(count);
      m2 += delta.cwiseProduct(x - mean);
    }
  }
  if (count == 0) throw DataError("fit_normalizer: no context or target rows");
  Normalizer n;
  n.epsilon = epsilon;
  n.mean = mean;
  n.std = (m2 / static_cast<double>(count)).array().max(0.0).sqrt().max(epsilon).matrix();
  return n;
}

Normalizer Normalizer::identity(std::size_t dim) {
  Normalizer n;
  n.mean = Eigen::VectorXd::Zero(static_cast<long>(dim));
  n.std = Eigen::VectorXd::Ones(static_cast<long>(dim));
  return n;
}

Eigen::MatrixXd Normalizer::apply(const Eigen::MatrixXd& x) const {
  if (static_cast<std::size_t>(x.cols()) != dim()) {
    throw DataError("normalizer: expected " + std::to_string(dim()) + " columns, got " +
                    std::to_string(x.cols()));
  }
  return (x.rowwise() - mean.transpose()).array().rowwise() / std.transpose().array();
}

Eigen::MatrixXd Normalizer::invert(const Eigen::MatrixXd& x) const {
  if (static_cast<std::size_t>(x.cols()) != dim()) {
    throw DataError("normalizer: expected " + std::to_string(dim()) + " columns, got " +
                    std::to_string(x.cols()));
  }
  return (x.array().rowwise() * std.transpose().array()).matrix().rowwise() + mean.transpose();
}

Normalizer Normalizer::select(const std::vector<std::size_t>& columns) const {
  Normalizer out;
  out.epsilon = epsilon;
  out.mean.resize(static_cast<long>(columns.size()));
  out.std.resize(static_cast<long>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) {
    if (columns[k] >= dim()) throw DataError("normalizer: column index out of range");
    out.mean[static_cast<long>(k)] = mean[static_cast<long>(columns[k])];
    out.std[static_cast<long>(k)] = std[static_cast<long>(columns[k])];
  }
  return out;
}

void Normalizer::apply_input(FeatureMatrix& m, const FeatureLayout& layout) const {
  m.values = apply(m.values);
  const auto vel_cols = layout.velocity_columns();
  for (long r = 0; r < m.values.rows(); ++r) {
    const RowKind kind = m.rows[static_cast<std::size_t>(r)];
    if (kind == RowKind::missing && m.fill == FillMode::zeros) {
      m.values.row(r).setZero();
    } else if (kind == RowKind::target) {
      for (const auto c : vel_cols) m.values(r, static_cast<long>(c)) = 0.0;
    }
  }
}

}  // namespace tween::data
