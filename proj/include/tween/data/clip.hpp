#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "tween/motion/kinematics.hpp"

namespace tween::data {

using motion::LocalPose;
using motion::Skeleton;

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AnimationClip {
  Skeleton skeleton;
  std::vector<LocalPose> frames;
  double fps = 30.0;
  std::string name;

  std::size_t frame_count() const { return frames.size(); }
  void validate() const;
};

// A contiguous sub-range [begin, end) of a clip.
AnimationClip subclip(const AnimationClip& clip, std::size_t begin, std::size_t end);

}  // namespace tween::data
