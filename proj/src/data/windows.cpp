#include "tween/data/windows.hpp"

namespace tween::data {

Window Window::truncated(int new_missing) const {
  if (new_missing < 1 || new_missing > missing) {
    throw DataError("cannot truncate a window with " + std::to_string(missing) +
                    " missing frames to " + std::to_string(new_missing));
  }
  Window w = *this;
  w.missing = new_missing;
  return w;
}

void Window::validate(std::size_t clip_frames) const {
  if (context < 1) throw DataError("window needs at least one context frame");
  if (missing < 1) throw DataError("window needs at least one missing frame");
  if (start + length() > clip_frames) {
    throw DataError("window [" + std::to_string(start) + ", " + std::to_string(start + length()) +
                    ") exceeds clip length " + std::to_string(clip_frames));
  }
}

std::size_t window_count(std::size_t frames, std::size_t length, std::size_t offset) {
  if (offset == 0) throw DataError("window offset must be at least 1");
  if (length > frames) return 0;
  return (frames - length) / offset + 1;
}

std::vector<Window> slice_windows(const AnimationClip& clip, std::size_t length, std::size_t offset,
                                  int context, std::size_t clip_index) {
  if (offset == 0) throw DataError("window offset must be at least 1");
  if (context < 1 || length < static_cast<std::size_t>(context) + 2) {
    throw DataError("window length " + std::to_string(length) + " leaves no missing frame after " +
                    std::to_string(context) + " context frames");
  }
  std::vector<Window> out;
  const std::size_t n = clip.frame_count();
  for (std::size_t start = 0; start + length <= n; start += offset) {
    out.push_back(Window{clip_index, start, context,
                         static_cast<int>(length) - context - 1});
  }
  return out;
}

std::vector<Window> slice_corpus(const std::vector<AnimationClip>& clips, std::size_t length,
                                 std::size_t offset, int context) {
  std::vector<Window> out;
  for (std::size_t c = 0; c < clips.size(); ++c) {
    auto w = slice_windows(clips[c], length, offset, context, c);
    out.insert(out.end(), w.begin(), w.end());
  }
  return out;
}

}  // namespace tween::data
