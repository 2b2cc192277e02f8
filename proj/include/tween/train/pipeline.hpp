#pragma once

#include <map>
#include <string>
#include <vector>

#include "tween/data/clip.hpp"
#include "tween/data/features.hpp"
#include "tween/data/normalizer.hpp"
#include "tween/data/windows.hpp"
#include "tween/eval/metrics.hpp"
#include "tween/nn/checkpoint.hpp"
#include "tween/nn/model.hpp"

namespace tween::train {

using data::AnimationClip;
using data::Window;
using motion::LocalPose;

// Everything needed to run a trained model on new windows.
struct ModelBundle {
  nn::ModelConfig model;
  nn::ModelParams<float> params;
  data::FeatureOptions features;
  int context = 10;
  data::Normalizer input_norm;   // input layout
  data::Normalizer output_norm;  // output layout
  eval::PositionStats position_stats;
  std::map<std::string, std::string> metadata;

  data::FeatureLayout layout(std::size_t joints) const { return {joints, features.use_velocity}; }
};

nn::Checkpoint to_checkpoint(const ModelBundle& b);
ModelBundle from_checkpoint(const nn::Checkpoint& ck);

// Statistics are rounded to single precision so a bundle behaves the same
// before and after a checkpoint round trip.
void round_to_float(data::Normalizer& n);
void round_to_float(eval::PositionStats& s);

// Input normalizer over context and target rows of `windows`, or the
// identity when `enabled` is false.
data::Normalizer fit_input_normalizer(const std::vector<AnimationClip>& clips, const std::vector<Window>& windows,
                                      const data::FeatureOptions& options, bool enabled);

struct Sample {
  nn::Matrix<float> input;   // normalized, L x d_in
  nn::Matrix<float> target;  // normalized, L x d_out
  std::vector<bool> missing;
};

Sample prepare_sample(const ModelBundle& b, const AnimationClip& clip, const Window& w);

// Anchor-frame poses for every frame of `w`: ground truth on context and
// target rows, decoded model output on missing rows.
std::vector<LocalPose> predict_window(const ModelBundle& b, const AnimationClip& clip, const Window& w);

// Same layout with the missing rows interpolated (the SLERP baseline).
std::vector<LocalPose> slerp_window(const AnimationClip& clip, const Window& w);

}  // namespace tween::train
