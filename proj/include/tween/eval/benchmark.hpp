#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tween/eval/metrics.hpp"
#include "tween/train/trainer.hpp"

namespace tween::eval {

struct BenchmarkConfig {
  std::vector<int> lengths = {5, 15, 30, 45};
  int context = 10;
  std::size_t offset = 40;
};

struct MethodScores {
  double l2p = 0.0;
  double l2q = 0.0;
  double npss = 0.0;
};

struct LengthResult {
  int missing = 0;
  std::size_t windows = 0;
  MethodScores slerp;
  std::optional<MethodScores> model;
};

struct BenchmarkReport {
  std::vector<LengthResult> rows;
  std::map<std::string, std::string> metadata;

  const LengthResult& at(int missing) const;
};

// Slices windows of C + M + 1 frames at `offset` for every length, runs the
// model (when given) and the SLERP baseline, and scores the missing frames.
// L2P uses `stats`; NPSS pools all windows of a length.
BenchmarkReport run_benchmark(const train::ModelBundle* model, const std::vector<data::AnimationClip>& clips,
                              const BenchmarkConfig& cfg, const PositionStats& stats);

// Columns: method,length,windows,l2p,l2q,npss.
void write_report_csv(std::ostream& out, const BenchmarkReport& r);
// Methods as rows, metric x length as columns.
void write_report_table(std::ostream& out, const BenchmarkReport& r);

enum class AblationAxis {
  offset5_vs_20,
  root_vs_local,
  velocity_on_off,
  zeros_vs_slerp,
  keypos_on_off,
  normalizer_on_off,
  loss_all_vs_missing,
};

AblationAxis ablation_axis_from_string(const std::string& s);  // throws EvalError listing valid axes
std::string to_string(AblationAxis a);
std::vector<std::string> ablation_axis_names();

struct ArmConfig {
  std::string label;
  train::TrainConfig train;
  nn::ModelConfig model;
  data::FeatureOptions features;
};

// Arm A is the first-named setting of the axis, arm B the second; every
// other field is copied from the base.
std::pair<ArmConfig, ArmConfig> ablation_arms(AblationAxis axis, const ArmConfig& base);

struct AblationSpec {
  AblationAxis axis = AblationAxis::zeros_vs_slerp;
  ArmConfig base;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  BenchmarkConfig bench;
};

struct AblationRun {
  std::uint64_t seed = 0;
  BenchmarkReport a;
  BenchmarkReport b;
};

struct AblationResult {
  AblationAxis axis = AblationAxis::zeros_vs_slerp;
  std::string label_a;
  std::string label_b;
  std::size_t windows_a = 0;
  std::size_t windows_b = 0;
  std::vector<AblationRun> runs;
  // keypos_on_off only: mean L2P of arm A (embeddings on) exceeds arm B at
  // some evaluated length beyond the training maximum.
  std::optional<bool> extrapolation_degraded;
};

// Trains and benchmarks both arms for each seed. Both arms are scored with
// the position statistics of the base configuration so their L2P values
// are comparable.
AblationResult run_ablation(const AblationSpec& spec, const std::vector<data::AnimationClip>& train_clips,
                            const std::vector<data::AnimationClip>& test_clips, std::ostream* log = nullptr);

// Columns: seed,length,metric,a,b,delta with delta = b - a, followed by
// per-length sign counts; the offset axis adds a window-count line.
void write_ablation_csv(std::ostream& out, const AblationResult& r);

}  // namespace tween::eval
