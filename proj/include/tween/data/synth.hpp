#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tween/data/clip.hpp"

namespace tween::data {

enum class SynthStyle { walk_cycle, pendulum, turn };

SynthStyle synth_style_from_string(const std::string& s);
std::string to_string(SynthStyle s);

// Procedural biped-like tree with J joints laid out chain by chain
// (left leg, right leg, spine), so joint order is depth-first.
Skeleton synth_skeleton(std::size_t joints);

// Deterministic per seed. Joint rotations are sums of sinusoids at a
// per-clip gait frequency; the root follows a heading whose turn rate is
// piecewise constant with smoothstep blends, so the motion is C1.
AnimationClip synth_clip(std::uint64_t seed, std::size_t joints, std::size_t frames,
                         SynthStyle style, double fps = 30.0);

struct SynthCorpusSpec {
  std::size_t clips = 50;
  std::size_t joints = 8;
  std::size_t frames = 240;
  std::uint64_t seed = 1;
  std::vector<SynthStyle> styles = {SynthStyle::walk_cycle, SynthStyle::turn};
  double fps = 30.0;
};

// Clip k uses seed (spec.seed * 1000003 + k) and style styles[k % size].
std::vector<AnimationClip> synth_corpus(const SynthCorpusSpec& spec);

}  // namespace tween::data
