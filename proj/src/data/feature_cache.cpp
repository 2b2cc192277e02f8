#include "tween/data/feature_cache.hpp"

#include <fstream>

#include "tween/data/clip.hpp"
#include "tween/util/binary_io.hpp"

namespace tween::data {

void write_feature_cache(const std::filesystem::path& path, const FeatureCache& cache) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write feature cache " + path.string());
  util::write_magic(out, "TWFC");
  util::write_le<std::uint32_t>(out, FeatureCache::kVersion);
  util::write_le<std::uint32_t>(out, cache.joints);
  util::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(cache.features.rows()));
  util::write_le<float>(out, cache.fps);
  util::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(cache.features.cols()));
  out.write(reinterpret_cast<const char*>(cache.features.data()),
            static_cast<std::streamsize>(cache.features.size() * sizeof(float)));
}

FeatureCache read_feature_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open feature cache " + path.string());
  util::expect_magic(in, "TWFC", "feature cache");
  const auto version = util::read_le<std::uint32_t>(in);
  if (version != FeatureCache::kVersion) {
    throw DataError("unsupported feature cache version " + std::to_string(version));
  }
  FeatureCache cache;
  cache.joints = util::read_le<std::uint32_t>(in);
  const auto frames = util::read_le<std::uint32_t>(in);
  cache.fps = util::read_le<float>(in);
  const auto cols = util::read_le<std::uint32_t>(in);
  cache.features.resize(frames, cols);
  in.read(reinterpret_cast<char*>(cache.features.data()),
          static_cast<std::streamsize>(cache.features.size() * sizeof(float)));
  if (!in) throw DataError("feature cache " + path.string() + " is truncated");
  return cache;
}

}  // namespace tween::data
