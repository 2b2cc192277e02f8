#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace tween::nn {

template <typename S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class NnError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bucket index of the relative distance j - i, clamped to +-max_rel.
inline int relative_bucket(long i, long j, int max_rel) {
  long d = j - i;
  if (d < -max_rel) d = -max_rel;
  if (d > max_rel) d = max_rel;
  return static_cast<int>(d + max_rel);
}

// Reverse-mode tape over matrix-valued nodes. Nodes are appended in
// evaluation order, so walking them backwards is a reverse topological
// order. Parameters are leaves whose gradients are accumulated into an
// external sink after the sweep.
template <typename S>
class Tape {
 public:
  using Mat = Matrix<S>;
  struct Var {
    std::size_t id = 0;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var constant(Mat value) {
    Node n;
    n.value = std::move(value);
    return push(std::move(n));
  }

  // Leaf referencing parameter storage; `grad_sink` may be null for
  // inference-only passes. The referenced matrices must outlive the tape.
  Var parameter(const Mat& value, Mat* grad_sink) {
    Node n;
    n.external = &value;
    n.sink = grad_sink;
    n.requires_grad = grad_sink != nullptr;
    return push(std::move(n));
  }

  const Mat& value(Var v) const { return nodes_[v.id].get(); }
  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  Var matmul(Var a, Var b) {
    const Mat& A = value(a);
    const Mat& B = value(b);
    if (A.cols() != B.rows()) {
      throw NnError("matmul shape mismatch: " + shape(A) + " x " + shape(B));
    }
    return record(A * B, {a, b}, [a, b](Tape& t, const Mat& g) {
      if (t.wants(a)) t.grad(a).noalias() += g * t.value(b).transpose();
      if (t.wants(b)) t.grad(b).noalias() += t.value(a).transpose() * g;
    });
  }

  Var add(Var a, Var b) {
    if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols()) {
      throw NnError("add shape mismatch: " + shape(value(a)) + " + " + shape(value(b)));
    }
    return record(value(a) + value(b), {a, b}, [a, b](Tape& t, const Mat& g) {
      if (t.wants(a)) t.grad(a) += g;
      if (t.wants(b)) t.grad(b) += g;
    });
  }

  // a (L x n) + row (1 x n) broadcast over rows.
  Var add_row(Var a, Var row) {
    const Mat& A = value(a);
    const Mat& R = value(row);
    if (R.rows() != 1 || R.cols() != A.cols()) {
      throw NnError("add_row shape mismatch: " + shape(A) + " + " + shape(R));
    }
    Mat out = A.rowwise() + R.row(0);
    return record(std::move(out), {a, row}, [a, row](Tape& t, const Mat& g) {
      if (t.wants(a)) t.grad(a) += g;
      if (t.wants(row)) t.grad(row) += g.colwise().sum();
    });
  }

  Var linear(Var x, Var weight, Var bias) { return add_row(matmul(x, weight), bias); }

  Var relu(Var a) {
    Mat out = value(a).cwiseMax(S(0));
    return record(std::move(out), {a}, [a](Tape& t, const Mat& g) {
      if (!t.wants(a)) return;
      t.grad(a) += (t.value(a).array() > S(0)).select(g.array(), S(0)).matrix();
    });
  }

  // Inverted dropout with a mask drawn from `rng`.
  Var dropout(Var a, double p, std::mt19937_64& rng) {
    if (p <= 0.0) return a;
    const Mat& A = value(a);
    std::bernoulli_distribution keep(1.0 - p);
    Mat mask(A.rows(), A.cols());
    const S scale = S(1.0 / (1.0 - p));
    for (long k = 0; k < mask.size(); ++k) mask.data()[k] = keep(rng) ? scale : S(0);
    Mat out = A.cwiseProduct(mask);
    return record(std::move(out), {a}, [a, mask = std::move(mask)](Tape& t, const Mat& g) {
      if (t.wants(a)) t.grad(a) += g.cwiseProduct(mask);
    });
  }

  // Row-wise layer normalization with learned scale (1 x n) and offset.
  Var layer_norm(Var a, Var gain, Var offset, S eps = S(1e-5)) {
    const Mat& X = value(a);
    const long n = X.cols();
    Mat xhat(X.rows(), n);
    Eigen::Matrix<S, Eigen::Dynamic, 1> inv_std(X.rows());
    for (long r = 0; r < X.rows(); ++r) {
      const S mu = X.row(r).mean();
      const S var = (X.row(r).array() - mu).square().mean();
      inv_std[r] = S(1) / std::sqrt(var + eps);
      xhat.row(r) = (X.row(r).array() - mu) * inv_std[r];
    }
    Mat out = (xhat.array().rowwise() * value(gain).row(0).array()).matrix();
    out.rowwise() += value(offset).row(0);
    return record(std::move(out), {a, gain, offset},
                  [a, gain, offset, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                      Tape& t, const Mat& g) {
                    if (t.wants(gain)) t.grad(gain) += g.cwiseProduct(xhat).colwise().sum();
                    if (t.wants(offset)) t.grad(offset) += g.colwise().sum();
                    if (!t.wants(a)) return;
                    const Mat dxhat = (g.array().rowwise() * t.value(gain).row(0).array()).matrix();
                    Mat& ga = t.grad(a);
                    const S inv_n = S(1) / static_cast<S>(xhat.cols());
                    for (long r = 0; r < dxhat.rows(); ++r) {
                      const S m1 = dxhat.row(r).sum() * inv_n;
                      const S m2 = dxhat.row(r).dot(xhat.row(r)) * inv_n;
                      ga.row(r).array() +=
                          inv_std[r] * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
                    }
                  });
  }

  // Multi-head scaled dot-product attention over all frames (no mask) with
  // an additive logit bias bias_table(h, relative_bucket(i, j)). `layer` is
  // used in error messages only.
  Var attention(Var q, Var k, Var v, Var bias_table, int heads, int max_rel, int layer) {
    const Mat& Q = value(q);
    const Mat& K = value(k);
    const Mat& V = value(v);
    const Mat& B = value(bias_table);
    const long L = Q.rows();
    const long d = Q.cols();
    if (K.rows() != L || V.rows() != L || K.cols() != d || V.cols() != d || d % heads != 0) {
      throw NnError("attention shape mismatch at layer " + std::to_string(layer));
    }
    if (B.rows() != heads || B.cols() != 2 * max_rel + 1) {
      throw NnError("relative bias table has shape " + shape(B));
    }
    const long dh = d / heads;
    const S scale = S(1) / std::sqrt(static_cast<S>(dh));
    std::vector<Mat> probs(static_cast<std::size_t>(heads));
    Mat out(L, d);
    for (int h = 0; h < heads; ++h) {
      Mat logits = (Q.middleCols(h * dh, dh) * K.middleCols(h * dh, dh).transpose()) * scale;
      for (long i = 0; i < L; ++i) {
        for (long j = 0; j < L; ++j) logits(i, j) += B(h, relative_bucket(i, j, max_rel));
      }
      if (!logits.allFinite()) {
        throw NnError("non-finite attention logits at layer " + std::to_string(layer) +
                      ", head " + std::to_string(h));
      }
      Mat& P = probs[static_cast<std::size_t>(h)];
      P = (logits.colwise() - logits.rowwise().maxCoeff()).array().exp().matrix();
      P.array().colwise() /= P.rowwise().sum().array();
      out.middleCols(h * dh, dh).noalias() = P * V.middleCols(h * dh, dh);
    }
    return record(
        std::move(out), {q, k, v, bias_table},
        [q, k, v, bias_table, heads, max_rel, dh, scale, probs = std::move(probs)](Tape& t,
                                                                                   const Mat& g) {
          const Mat& Qv = t.value(q);
          const Mat& Kv = t.value(k);
          const Mat& Vv = t.value(v);
          const long L = Qv.rows();
          for (int h = 0; h < heads; ++h) {
            const Mat& P = probs[static_cast<std::size_t>(h)];
            const auto gh = g.middleCols(h * dh, dh);
            if (t.wants(v)) t.grad(v).middleCols(h * dh, dh).noalias() += P.transpose() * gh;
            const Mat dP = gh * Vv.middleCols(h * dh, dh).transpose();
            Mat dlogits = P.cwiseProduct(dP);
            const auto row_sum = dlogits.rowwise().sum().eval();
            dlogits -= (P.array().colwise() * row_sum.array()).matrix();
            if (t.wants(bias_table)) {
              Mat& gb = t.grad(bias_table);
              for (long i = 0; i < L; ++i) {
                for (long j = 0; j < L; ++j) gb(h, relative_bucket(i, j, max_rel)) += dlogits(i, j);
              }
            }
            if (t.wants(q)) {
              t.grad(q).middleCols(h * dh, dh).noalias() +=
                  (dlogits * Kv.middleCols(h * dh, dh)) * scale;
            }
            if (t.wants(k)) {
              t.grad(k).middleCols(h * dh, dh).noalias() +=
                  (dlogits.transpose() * Qv.middleCols(h * dh, dh)) * scale;
            }
          }
        });
  }

  // out.row(r) = table.row(index[r]).
  Var gather_rows(Var table, std::vector<int> index) {
    const Mat& T = value(table);
    Mat out(static_cast<long>(index.size()), T.cols());
    for (std::size_t r = 0; r < index.size(); ++r) {
      if (index[r] < 0 || index[r] >= T.rows()) throw NnError("gather_rows index out of range");
      out.row(static_cast<long>(r)) = T.row(index[r]);
    }
    return record(std::move(out), {table}, [table, index = std::move(index)](Tape& t, const Mat& g) {
      if (!t.wants(table)) return;
      Mat& gt = t.grad(table);
      for (std::size_t r = 0; r < index.size(); ++r) gt.row(index[r]) += g.row(static_cast<long>(r));
    });
  }

  // Single reverse sweep seeded with d(loss)/d(output). A tape can be swept
  // once; parameter gradients are added to their sinks.
  void backward(Var output, const Mat& seed) {
    if (consumed_) throw NnError("tape already consumed by a backward pass");
    consumed_ = true;
    const Mat& out = value(output);
    if (seed.rows() != out.rows() || seed.cols() != out.cols()) {
      throw NnError("backward seed shape " + shape(seed) + " does not match output " + shape(out));
    }
    if (!nodes_[output.id].requires_grad) return;
    grad(output) += seed;
    for (std::size_t id = output.id + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (n.grad.size() == 0) continue;
      if (n.backward) n.backward(*this, n.grad);
      if (n.sink != nullptr) *n.sink += n.grad;
      n.grad.resize(0, 0);
    }
  }

 private:
  using Backward = std::function<void(Tape&, const Mat&)>;

  struct Node {
    Mat value;
    const Mat* external = nullptr;
    Mat* sink = nullptr;
    bool requires_grad = false;
    Mat grad;
    Backward backward;

    const Mat& get() const { return external != nullptr ? *external : value; }
  };

  static std::string shape(const Mat& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
  }

  Var push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
  }

  Var record(Mat value, std::initializer_list<Var> inputs, Backward backward) {
    Node n;
    n.value = std::move(value);
    for (const Var in : inputs) n.requires_grad = n.requires_grad || nodes_[in.id].requires_grad;
    if (n.requires_grad) n.backward = std::move(backward);
    return push(std::move(n));
  }

  bool wants(Var v) const { return nodes_[v.id].requires_grad; }

  Mat& grad(Var v) {
    Node& n = nodes_[v.id];
    if (n.grad.size() == 0) {
      const Mat& val = n.get();
      n.grad = Mat::Zero(val.rows(), val.cols());
    }
    return n.grad;
  }

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

}  // namespace tween::nn
