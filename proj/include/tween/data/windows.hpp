#pragma once

#include <cstddef>
#include <vector>

#include "tween/data/clip.hpp"

namespace tween::data {

// C context frames, M missing frames and one target frame, starting at
// `start` inside clip number `clip` of a corpus.
struct Window {
  std::size_t clip = 0;
  std::size_t start = 0;
  int context = 10;
  int missing = 30;

  std::size_t length() const { return static_cast<std::size_t>(context + missing + 1); }
  std::size_t last_context() const { return static_cast<std::size_t>(context - 1); }
  std::size_t target_row() const { return static_cast<std::size_t>(context + missing); }

  // Same start, shorter gap: keeps the first C + missing + 1 frames.
  Window truncated(int new_missing) const;
  void validate(std::size_t clip_frames) const;
};

// floor((n - L) / offset) + 1 windows when L <= n, else none.
std::size_t window_count(std::size_t frames, std::size_t length, std::size_t offset);

// Windows of `length` frames at starts 0, offset, 2*offset, ...; the gap
// length is length - context - 1.
std::vector<Window> slice_windows(const AnimationClip& clip, std::size_t length, std::size_t offset,
                                  int context, std::size_t clip_index = 0);

std::vector<Window> slice_corpus(const std::vector<AnimationClip>& clips, std::size_t length,
                                 std::size_t offset, int context);

}  // namespace tween::data
