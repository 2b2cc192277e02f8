#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tween/data/clip.hpp"
#include "tween/data/windows.hpp"

namespace tween::eval {

using motion::LocalPose;
using motion::Skeleton;

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Gap inside a window: rows [context, context + missing) are scored.
struct Gap {
  int context = 10;
  int missing = 30;
};

// Per-dimension statistics of world joint positions (3J values per frame).
struct PositionStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  bool empty() const { return mean.size() == 0; }
  // Hex digest of the raw statistics, used to pair checkpoints with data.
  std::string hash() const;
};

// Statistics over every frame of the given windows, in each window's
// anchor frame (the frame the model sees and predicts in).
PositionStats fit_position_stats(const std::vector<data::AnimationClip>& clips,
                                 const std::vector<data::Window>& windows, double epsilon = 1e-8);

// Frame-major world positions (3J) and quaternions (4J, w x y z).
Eigen::VectorXd world_positions(const Skeleton& s, const LocalPose& p);
Eigen::VectorXd world_quaternions(const Skeleton& s, const LocalPose& p);

// Mean over missing frames of the L2 norm of standardized world position
// differences.
double l2p(const Skeleton& s, const std::vector<LocalPose>& pred, const std::vector<LocalPose>& gt,
           const Gap& gap, const PositionStats& stats);

// Mean over missing frames of the L2 norm of world quaternion differences,
// each predicted quaternion taken on the ground truth's hemisphere.
double l2q(const Skeleton& s, const std::vector<LocalPose>& pred, const std::vector<LocalPose>& gt,
           const Gap& gap);

// Power-spectrum similarity of T x F signals. For every (sequence, feature)
// pair: |DFT|^2 over all T bins, normalized to unit sum (an all-zero
// prediction spectrum stays all-zero), earth mover's distance as the sum of
// absolute cumulative differences. Pairs are averaged with weights equal to
// the ground-truth total power; zero-power ground-truth features carry no
// weight. Throws when every ground-truth feature has zero power.
double npss(const std::vector<Eigen::MatrixXd>& pred, const std::vector<Eigen::MatrixXd>& gt);
double npss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt);

// NPSS signal of a window: world quaternion channels over the gap plus its
// two boundary keyframes (M + 2 frames). Ground-truth quaternions are made
// sign-continuous in time; predictions take the ground truth's hemisphere.
void npss_signals(const Skeleton& s, const std::vector<LocalPose>& pred, const std::vector<LocalPose>& gt,
                  const Gap& gap, Eigen::MatrixXd& pred_out, Eigen::MatrixXd& gt_out);

}  // namespace tween::eval
