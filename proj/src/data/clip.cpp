#include "tween/data/clip.hpp"

namespace tween::data {

void AnimationClip::validate() const {
  skeleton.validate();
  if (frames.size() < 2) {
    throw DataError("clip '" + name + "' has " + std::to_string(frames.size()) +
                    " frames, need at least 2");
  }
  const std::size_t j = skeleton.joint_count();
  for (std::size_t f = 0; f < frames.size(); ++f) {
    if (frames[f].local_rot.size() != j) {
      throw DataError("clip '" + name + "' frame " + std::to_string(f) +
                      " does not match the skeleton joint count");
    }
  }
  if (!(fps > 0.0)) throw DataError("clip '" + name + "' has non-positive fps");
}

AnimationClip subclip(const AnimationClip& clip, std::size_t begin, std::size_t end) {
  if (begin > end || end > clip.frames.size()) {
    throw DataError("subclip range out of bounds");
  }
  AnimationClip out;
  out.skeleton = clip.skeleton;
  out.fps = clip.fps;
  out.name = clip.name;
  out.frames.assign(clip.frames.begin() + static_cast<long>(begin),
                    clip.frames.begin() + static_cast<long>(end));
  return out;
}

}  // namespace tween::data
