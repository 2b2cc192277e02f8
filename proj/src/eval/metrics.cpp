#include "tween/eval/metrics.hpp"

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <numbers>

#include "tween/data/features.hpp"

namespace tween::eval {

namespace {

void check_inputs(const Skeleton& s, const std::vector<LocalPose>& pred, const std::vector<LocalPose>& gt,
                  const Gap& gap) {
  if (pred.size() != gt.size()) {
    throw EvalError("prediction has " + std::to_string(pred.size()) + " frames, ground truth " +
                    std::to_string(gt.size()));
  }
  if (gap.context < 1 || gap.missing < 1 ||
      static_cast<std::size_t>(gap.context + gap.missing + 1) > gt.size()) {
    throw EvalError("gap does not fit inside the window");
  }
  for (std::size_t f = 0; f < gt.size(); ++f) {
    if (pred[f].local_rot.size() != s.joint_count() || gt[f].local_rot.size() != s.joint_count()) {
      throw EvalError("pose joint count does not match the skeleton");
    }
  }
}

}  // namespace

std::string PositionStats::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](const Eigen::VectorXd& v) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(v.data());
    for (std::size_t k = 0; k < static_cast<std::size_t>(v.size()) * sizeof(double); ++k) {
      h ^= bytes[k];
      h *= 1099511628211ull;
    }
  };
  mix(mean);
  mix(std);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Eigen::VectorXd world_positions(const Skeleton& s, const LocalPose& p) {
  const auto w = motion::forward_kinematics(s, p);
  Eigen::VectorXd out(3 * static_cast<long>(w.pos.size()));
  for (std::size_t j = 0; j < w.pos.size(); ++j) out.segment<3>(3 * static_cast<long>(j)) = w.pos[j];
  return out;
}

Eigen::VectorXd world_quaternions(const Skeleton& s, const LocalPose& p) {
  const auto w = motion::forward_kinematics(s, p);
  Eigen::VectorXd out(4 * static_cast<long>(w.rot.size()));
  for (std::size_t j = 0; j < w.rot.size(); ++j) {
    out.segment<4>(4 * static_cast<long>(j)) << w.rot[j].w(), w.rot[j].x(), w.rot[j].y(), w.rot[j].z();
  }
  return out;
}

PositionStats fit_position_stats(const std::vector<data::AnimationClip>& clips,
                                 const std::vector<data::Window>& windows, double epsilon) {
  if (windows.empty()) throw EvalError("position statistics need at least one window");
  Eigen::VectorXd mean, m2;
  std::size_t count = 0;
  for (const auto& w : windows) {
    const auto& clip = clips.at(w.clip);
    for (const auto& pose : data::window_poses(clip, w)) {
      const Eigen::VectorXd x = world_positions(clip.skeleton, pose);
      if (count == 0) {
        mean = Eigen::VectorXd::Zero(x.size());
        m2 = Eigen::VectorXd::Zero(x.size());
      }
      if (x.size() != mean.size()) throw EvalError("position statistics over mixed skeletons");
      ++count;
      const Eigen::VectorXd delta = x - mean;
      mean += delta / static_cast<double>(count);
      m2 += delta.cwiseProduct(x - mean);
    }
  }
  PositionStats st;
  st.mean = mean;
  st.std = (m2 / static_cast<double>(count)).array().max(0.0).sqrt().max(epsilon).matrix();
  return st;
}

double l2p(const Skeleton& s, const std::vector<LocalPose>& pred, const std::vector<LocalPose>& gt,
           const Gap& gap, const PositionStats& stats) {
  if (stats.empty()) throw EvalError("l2p needs position statistics");
  if (static_cast<std::size_t>(stats.mean.size()) != 3 * s.joint_count()) {
    throw EvalError("position statistics do not match the skeleton");
  }
  check_inputs(s, pred, gt, gap);
  double total = 0.0;
  for (int k = 0; k < gap.missing; ++k) {
    const std::size_t f = static_cast<std::size_t>(gap.context + k);
    const Eigen::VectorXd d = (world_positions(s, pred[f]) - world_positions(s, gt[f])).cwiseQuotient(stats.std);
    total += d.norm();
  }
  return total / gap.missing;
}

double l2q(const Skeleton& s, const std::vector<LocalPose>& pred, const std::vector<LocalPose>& gt,
           const Gap& gap) {
  check_inputs(s, pred, gt, gap);
  double total = 0.0;
  for (int k = 0; k < gap.missing; ++k) {
    const std::size_t f = static_cast<std::size_t>(gap.context + k);
    Eigen::VectorXd p = world_quaternions(s, pred[f]);
    const Eigen::VectorXd g = world_quaternions(s, gt[f]);
    for (long j = 0; j < p.size() / 4; ++j) {
      if (p.segment<4>(4 * j).dot(g.segment<4>(4 * j)) < 0.0) p.segment<4>(4 * j) *= -1.0;
    }
    total += (p - g).norm();
  }
  return total / gap.missing;
}

void npss_signals(const Skeleton& s, const std::vector<LocalPose>& pred, const std::vector<LocalPose>& gt,
                  const Gap& gap, Eigen::MatrixXd& pred_out, Eigen::MatrixXd& gt_out) {
  check_inputs(s, pred, gt, gap);
  const long frames = gap.missing + 2;
  const long cols = 4 * static_cast<long>(s.joint_count());
  pred_out.resize(frames, cols);
  gt_out.resize(frames, cols);
  for (long t = 0; t < frames; ++t) {
    const std::size_t f = static_cast<std::size_t>(gap.context - 1 + t);
    Eigen::VectorXd g = world_quaternions(s, gt[f]);
    Eigen::VectorXd p = world_quaternions(s, pred[f]);
    for (long j = 0; j < cols / 4; ++j) {
      if (t > 0 && g.segment<4>(4 * j).dot(gt_out.row(t - 1).segment<4>(4 * j).transpose()) < 0.0) {
        g.segment<4>(4 * j) *= -1.0;
      }
      if (p.segment<4>(4 * j).dot(g.segment<4>(4 * j)) < 0.0) p.segment<4>(4 * j) *= -1.0;
    }
    gt_out.row(t) = g.transpose();
    pred_out.row(t) = p.transpose();
  }
}

namespace {

// |DFT|^2 of one column over all T bins.
Eigen::VectorXd power_spectrum(const Eigen::MatrixXd& x, long col) {
  const long n = x.rows();
  Eigen::VectorXd power(n);
  for (long k = 0; k < n; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (long t = 0; t < n; ++t) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>(k * t % n) / static_cast<double>(n);
      acc += x(t, col) * std::complex<double>(std::cos(angle), std::sin(angle));
    }
    power[k] = std::norm(acc);
  }
  return power;
}

}  // namespace

double npss(const std::vector<Eigen::MatrixXd>& pred, const std::vector<Eigen::MatrixXd>& gt) {
  if (pred.size() != gt.size() || gt.empty()) throw EvalError("npss needs matching, non-empty inputs");
  double weighted = 0.0;
  double weight_sum = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (pred[i].rows() != gt[i].rows() || pred[i].cols() != gt[i].cols()) {
      throw EvalError("npss shape mismatch in sequence " + std::to_string(i));
    }
    for (long c = 0; c < gt[i].cols(); ++c) {
      const Eigen::VectorXd pg = power_spectrum(gt[i], c);
      const double gt_power = pg.sum();
      if (gt_power <= 0.0) continue;
      const Eigen::VectorXd pp = power_spectrum(pred[i], c);
      const double pred_power = pp.sum();
      const Eigen::VectorXd ng = pg / gt_power;
      const Eigen::VectorXd np = pred_power > 0.0 ? Eigen::VectorXd(pp / pred_power) : Eigen::VectorXd::Zero(pp.size());
      double cum = 0.0;
      double emd = 0.0;
      for (long k = 0; k < ng.size(); ++k) {
        cum += ng[k] - np[k];
        emd += std::abs(cum);
      }
      weighted += gt_power * emd;
      weight_sum += gt_power;
    }
  }
  if (weight_sum <= 0.0) throw EvalError("npss undefined: ground truth has zero power everywhere");
  return weighted / weight_sum;
}

double npss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt) {
  return npss(std::vector<Eigen::MatrixXd>{pred}, std::vector<Eigen::MatrixXd>{gt});
}

}  // namespace tween::eval
