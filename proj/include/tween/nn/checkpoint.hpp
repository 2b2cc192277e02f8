#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "tween/nn/model.hpp"

namespace tween::nn {

// Checkpoint file, little-endian throughout:
//   char[4] "TWCK" | u32 version (1)
//   config:  u32 layers | u32 heads | u32 d_model | u32 d_ff | u32 max_rel_dist |
//            f64 dropout | u8 pre_norm | u8 key_pos_embedding | u32 d_in | u32 d_out
//   u32 n_meta,   n_meta x (string key | string value)
//   u32 n_params, n_params x blob     (ModelParams::for_each order)
//   u32 n_extra,  n_extra x blob
// string = u32 byte length | bytes
// blob   = string name | u32 rows | u32 cols | rows x cols f32, row-major
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  ModelConfig config;
  std::map<std::string, std::string> metadata;
  ModelParams<float> params;
  std::map<std::string, Matrix<float>> extras;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tween::nn
