#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tween/train/optim.hpp"
#include "tween/train/pipeline.hpp"

namespace tween::train {

struct TrainConfig {
  int batch_size = 16;
  int warmup = 200;
  long max_steps = 20000;
  int m_min = 5;
  int m_max = 30;
  int context = 10;
  std::size_t window_offset = 5;
  AdamWConfig adamw{.position_lr_scale = 10.0};
  double lr_scale = 1.0;  // multiplies the noam schedule
  double grad_clip = 1.0;
  std::uint64_t seed = 1;
  long checkpoint_every = 1000;
  int keep_checkpoints = 3;
  bool missing_only_loss = false;
  bool normalize = true;
  int val_missing = 30;
  std::size_t val_offset = 40;

  void validate() const;
  std::size_t window_length() const { return static_cast<std::size_t>(context + m_max + 1); }
};

struct LossRecord {
  long step = 0;
  double lr = 0.0;
  double train_l1 = 0.0;
  std::optional<double> val_l2p;
};

// Thrown when the loss or a gradient stops being finite.
class TrainingAborted : public TrainError {
 public:
  TrainingAborted(const std::string& what, long step, std::filesystem::path last_good)
      : TrainError(what), step(step), last_good(std::move(last_good)) {}
  long step;
  std::filesystem::path last_good;
};

struct TrainIO {
  std::filesystem::path run_dir;  // empty: nothing is written
  std::ostream* log = nullptr;
  long log_every = 500;
};

struct TrainResult {
  ModelBundle bundle;
  std::vector<LossRecord> curve;
  std::size_t window_count = 0;
  std::filesystem::path final_checkpoint;
  std::filesystem::path best_checkpoint;
  std::optional<double> best_val_l2p;
};

// Builds normalizers and L2P statistics from `train_clips`, then optimizes
// with one transition length per batch. `model.d_in` / `model.d_out` are
// filled from the feature layout. Validation L2P (gap val_missing, windows
// at val_offset) is computed at every checkpoint when `val_clips` is set.
TrainResult train(const TrainConfig& cfg, nn::ModelConfig model, const data::FeatureOptions& features,
                  const std::vector<AnimationClip>& train_clips, const std::vector<AnimationClip>* val_clips,
                  const TrainIO& io = {});

// Model bundle with fresh weights and statistics fitted on the windows.
ModelBundle make_bundle(const TrainConfig& cfg, nn::ModelConfig model, const data::FeatureOptions& features,
                        const std::vector<AnimationClip>& clips, const std::vector<Window>& windows);

// One optimizer step worth of gradients: returns the mean L1 over the batch
// and accumulates mean gradients into `grads`.
double batch_gradients(const ModelBundle& b, const std::vector<AnimationClip>& clips,
                       const std::vector<Window>& batch, bool missing_only, nn::ModelParams<float>& grads,
                       std::mt19937_64* dropout_rng);

double mean_l2p(const ModelBundle& b, const std::vector<AnimationClip>& clips, const std::vector<Window>& windows);

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& curve);
std::string format_loss_row(const LossRecord& r);

}  // namespace tween::train
