#pragma once

#include <cstdint>
#include <filesystem>

#include <Eigen/Core>

namespace tween::data {

// Binary feature cache, little-endian:
//   char[4] "TWFC" | u32 version (1) | u32 joints | u32 frames | f32 fps |
//   u32 columns | frames x columns f32, frame-major
struct FeatureCache {
  static constexpr std::uint32_t kVersion = 1;

  std::uint32_t joints = 0;
  float fps = 30.0f;
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> features;
};

void write_feature_cache(const std::filesystem::path& path, const FeatureCache& cache);
FeatureCache read_feature_cache(const std::filesystem::path& path);

}  // namespace tween::data
