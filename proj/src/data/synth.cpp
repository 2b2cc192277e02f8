#include "tween/data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace tween::data {
namespace {

using motion::Quat;
using motion::Vec3;

constexpr double kPi = std::numbers::pi;
constexpr double kHipHeight = 90.0;

enum class Chain { left_leg, right_leg, spine };

struct JointInfo {
  Chain chain;
  int depth;
};

std::vector<std::size_t> chain_sizes(std::size_t joints) {
  const std::size_t rest = joints - 1;
  return {(rest + 2) / 3, (rest + 1) / 3, rest / 3};
}

std::vector<JointInfo> joint_infos(std::size_t joints) {
  std::vector<JointInfo> info(joints, JointInfo{Chain::spine, -1});
  const auto sizes = chain_sizes(joints);
  std::size_t next = 1;
  for (int c = 0; c < 3; ++c) {
    for (std::size_t d = 0; d < sizes[static_cast<std::size_t>(c)]; ++d) {
      info[next++] = JointInfo{static_cast<Chain>(c), static_cast<int>(d)};
    }
  }
  return info;
}

double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

// Piecewise-constant signal with smoothstep transitions between segments.
class PiecewiseSignal {
 public:
  PiecewiseSignal(std::mt19937_64& rng, std::size_t frames, double lo, double hi) {
    std::uniform_real_distribution<double> value(lo, hi);
    std::uniform_int_distribution<int> length(30, 70);
    values_.push_back(value(rng));
    starts_.push_back(0);
    std::size_t t = 0;
    while (t < frames) {
      t += static_cast<std::size_t>(length(rng));
      starts_.push_back(t);
      values_.push_back(value(rng));
    }
  }

  double at(std::size_t t) const {
    std::size_t k = 0;
    while (k + 1 < starts_.size() && starts_[k + 1] <= t) ++k;
    if (k == 0) return values_[0];
    const double blend = smoothstep(static_cast<double>(t - starts_[k]) / kBlendFrames);
    return values_[k - 1] + (values_[k] - values_[k - 1]) * blend;
  }

 private:
  static constexpr double kBlendFrames = 12.0;
  std::vector<std::size_t> starts_;
  std::vector<double> values_;
};

Quat axis(double angle, const Vec3& a) { return Quat(Eigen::AngleAxisd(angle, a)); }

double swing_amplitude(int depth) {
  switch (depth) {
    case 0: return 0.45;
    case 1: return 0.5;
    case 2: return 0.3;
    default: return 0.2;
  }
}

}  // namespace

SynthStyle synth_style_from_string(const std::string& s) {
  if (s == "walk-cycle" || s == "walk_cycle") return SynthStyle::walk_cycle;
  if (s == "pendulum") return SynthStyle::pendulum;
  if (s == "turn") return SynthStyle::turn;
  throw DataError("unknown synthetic style '" + s + "'");
}

std::string to_string(SynthStyle s) {
  switch (s) {
    case SynthStyle::walk_cycle: return "walk-cycle";
    case SynthStyle::pendulum: return "pendulum";
    case SynthStyle::turn: return "turn";
  }
  return "unknown";
}

Skeleton synth_skeleton(std::size_t joints) {
  if (joints < 2) throw DataError("synthetic skeleton needs at least 2 joints");
  const auto info = joint_infos(joints);
  Skeleton s;
  s.joint_names.resize(joints);
  s.parents.resize(joints);
  s.rest_offsets.resize(joints);
  s.joint_names[0] = "Hips";
  s.parents[0] = -1;
  s.rest_offsets[0] = Vec3(0.0, kHipHeight, 0.0);
  for (std::size_t i = 1; i < joints; ++i) {
    const auto& ji = info[i];
    s.parents[i] = ji.depth == 0 ? 0 : static_cast<int>(i - 1);
    switch (ji.chain) {
      case Chain::left_leg:
      case Chain::right_leg: {
        const double side = ji.chain == Chain::left_leg ? 1.0 : -1.0;
        s.rest_offsets[i] = ji.depth == 0 ? Vec3(9.0 * side, -5.0, 0.0)
                                          : Vec3(0.0, -40.0 / (1.0 + 0.35 * (ji.depth - 1)), 0.0);
        s.joint_names[i] = std::string(side > 0 ? "LeftLeg" : "RightLeg") + std::to_string(ji.depth);
        break;
      }
      case Chain::spine:
        s.rest_offsets[i] = Vec3(0.0, ji.depth == 0 ? 10.0 : 15.0, 0.0);
        s.joint_names[i] = "Spine" + std::to_string(ji.depth);
        break;
    }
  }
  return s;
}

AnimationClip synth_clip(std::uint64_t seed, std::size_t joints, std::size_t frames,
                         SynthStyle style, double fps) {
  if (frames < 2) throw DataError("synthetic clip needs at least 2 frames");
  AnimationClip clip;
  clip.skeleton = synth_skeleton(joints);
  clip.fps = fps;
  clip.name = to_string(style) + "_" + std::to_string(seed);
  const auto info = joint_infos(joints);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double period = 26.0 + 14.0 * unit(rng);
  const double omega = 2.0 * kPi / period;
  const double phase0 = 2.0 * kPi * unit(rng);
  const double amp = 0.6 + 0.4 * unit(rng);
  const double heading0 = 2.0 * kPi * unit(rng);
  const Vec3 start(400.0 * (unit(rng) - 0.5), 0.0, 400.0 * (unit(rng) - 0.5));
  const double max_turn = style == SynthStyle::turn ? 0.05 : 0.01;
  const PiecewiseSignal turn_rate(rng, frames, -max_turn, max_turn);
  const PiecewiseSignal speed(rng, frames, 0.8, 2.6);

  clip.frames.resize(frames);
  double heading = heading0;
  Vec3 ground = start;
  for (std::size_t t = 0; t < frames; ++t) {
    auto& pose = clip.frames[t];
    pose.local_rot.assign(joints, Quat::Identity());
    const double phase = omega * static_cast<double>(t) + phase0;

    if (style == SynthStyle::pendulum) {
      pose.root_world_pos = Vec3(0.0, kHipHeight, 0.0);
      pose.local_rot[1] = axis(0.5 * amp * std::sin(phase), Vec3::UnitX());
      continue;
    }

    if (t > 0) {
      heading += turn_rate.at(t);
      const double v = speed.at(t) * (1.0 + 0.15 * std::sin(2.0 * phase));
      ground += v * Vec3(std::sin(heading), 0.0, std::cos(heading));
    }
    pose.root_world_pos = ground + Vec3(0.0, kHipHeight + 2.0 * amp * std::cos(2.0 * phase), 0.0);
    pose.local_rot[0] = axis(heading + 0.08 * amp * std::sin(phase), Vec3::UnitY()) *
                        axis(0.05 * std::sin(2.0 * phase), Vec3::UnitX());

    for (std::size_t i = 1; i < joints; ++i) {
      const auto& ji = info[i];
      const double d = ji.depth;
      if (ji.chain == Chain::spine) {
        pose.local_rot[i] = axis(0.12 * amp * std::sin(phase + 0.5 * d), Vec3::UnitY()) *
                            axis(0.08 * std::sin(2.0 * phase + d), Vec3::UnitX());
        continue;
      }
      const double p = phase + (ji.chain == Chain::right_leg ? kPi : 0.0);
      const double a = swing_amplitude(ji.depth) * amp;
      const double swing = a * (std::sin(p + 0.6 * d) + 0.3 * std::sin(2.0 * p + 0.3 * d));
      const double side = 0.1 * amp * std::sin(p + 1.0 + d);
      pose.local_rot[i] = axis(swing, Vec3::UnitX()) * axis(side, Vec3::UnitZ());
    }
  }
  return clip;
}

std::vector<AnimationClip> synth_corpus(const SynthCorpusSpec& spec) {
  if (spec.styles.empty()) throw DataError("synthetic corpus needs at least one style");
  std::vector<AnimationClip> clips;
  clips.reserve(spec.clips);
  for (std::size_t k = 0; k < spec.clips; ++k) {
    const std::uint64_t seed = spec.seed * 1000003ULL + k;
    clips.push_back(synth_clip(seed, spec.joints, spec.frames, spec.styles[k % spec.styles.size()],
                               spec.fps));
  }
  return clips;
}

}  // namespace tween::data
