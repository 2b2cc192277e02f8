#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tween/data/synth.hpp"
#include "tween/eval/benchmark.hpp"
#include "tween/train/trainer.hpp"

namespace tween::cli {

// Bad or unknown configuration; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataConfig {
  std::string source = "synthetic";  // "synthetic" or "bvh"
  data::SynthCorpusSpec synthetic;
  std::size_t test_clips = 10;
  std::uint64_t test_seed = 1001;
  std::size_t val_clips = 5;
  std::uint64_t val_seed = 2001;
  std::filesystem::path train_dir;
  std::filesystem::path test_dir;
  std::filesystem::path val_dir;  // optional for bvh
  double unit_scale = 1.0;
};

struct RunConfig {
  std::string preset = "tiny";
  nn::ModelConfig model;
  train::TrainConfig train;
  data::FeatureOptions features;
  DataConfig data;
  eval::BenchmarkConfig eval;
  std::filesystem::path output_dir = "runs";
};

// Preset defaults: "tiny" (desk scale) or "paper" (batch 64, warmup 4000).
RunConfig preset_config(const std::string& preset);

// Applies a JSON tree on top of `base`. Every key must be known; the error
// names the offending dotted key.
RunConfig apply_json(RunConfig base, const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

// Fully explicit tree of every setting.
nlohmann::json to_json(const RunConfig& c);
// FNV-1a digest of the canonical dump of to_json(c).
std::string config_hash(const RunConfig& c);

struct Datasets {
  std::vector<data::AnimationClip> train;
  std::vector<data::AnimationClip> val;
  std::vector<data::AnimationClip> test;
};

// Synthetic corpora from the corpus settings, or BVH files (sorted by name) from the
// configured directories. Missing directories raise ConfigError.
Datasets load_datasets(const DataConfig& d, bool need_train = true, bool need_test = true);

}  // namespace tween::cli
