#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "tween/data/clip.hpp"

namespace tween::data {

class BvhError : public DataError {
 public:
  BvhError(const std::string& message, std::size_t line)
      : DataError("bvh line " + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct BvhOptions {
  // Multiplier taking the file's length unit to centimeters.
  double unit_scale = 1.0;
};

// Parses HIERARCHY/MOTION text. Every joint needs exactly three rotation
// channels in any axis order; position channels on non-root joints are
// accepted and ignored (the rest offset is kept).
AnimationClip parse_bvh(std::string_view text, const std::string& name = "clip",
                        const BvhOptions& options = {});
AnimationClip load_bvh(const std::filesystem::path& path, const BvhOptions& options = {});

// Root: 6 channels (XYZ position, ZYX rotation); joints: ZYX rotation.
std::string write_bvh(const AnimationClip& clip);
void save_bvh(const AnimationClip& clip, const std::filesystem::path& path);

}  // namespace tween::data
