#include "tween/train/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <fstream>
#include <numeric>
#include <ostream>

namespace tween::train {

void TrainConfig::validate() const {
  if (batch_size < 1) throw TrainError("batch_size must be at least 1");
  if (m_min < 1 || m_min > m_max) throw TrainError("transition lengths need 1 <= m_min <= m_max");
  if (context < 1) throw TrainError("context must be at least 1");
  if (warmup < 1) throw TrainError("warmup must be at least 1");
  if (max_steps < 1) throw TrainError("max_steps must be at least 1");
  if (window_offset < 1 || val_offset < 1) throw TrainError("window offsets must be positive");
  if (val_missing < 1) throw TrainError("val_missing must be at least 1");
  if (checkpoint_every < 1 || keep_checkpoints < 1) throw TrainError("checkpoint cadence must be positive");
}

ModelBundle make_bundle(const TrainConfig& cfg, nn::ModelConfig model, const data::FeatureOptions& features,
                        const std::vector<AnimationClip>& clips, const std::vector<Window>& windows) {
  if (windows.empty()) throw TrainError("dataset yields no training windows of length " +
                                        std::to_string(cfg.window_length()));
  const std::size_t joints = clips.at(windows.front().clip).skeleton.joint_count();
  const data::FeatureLayout layout{joints, features.use_velocity};
  model.d_in = static_cast<int>(layout.input_dim());
  model.d_out = static_cast<int>(layout.output_dim());
  model.validate();

  ModelBundle b;
  b.model = model;
  b.features = features;
  b.context = cfg.context;
  b.params = nn::init_params<float>(model, cfg.seed);
  b.input_norm = fit_input_normalizer(clips, windows, features, cfg.normalize);
  b.output_norm = b.input_norm.select(layout.pose_columns());
  b.position_stats = eval::fit_position_stats(clips, windows);
  round_to_float(b.input_norm);
  round_to_float(b.output_norm);
  round_to_float(b.position_stats);
  return b;
}

double batch_gradients(const ModelBundle& b, const std::vector<AnimationClip>& clips,
                       const std::vector<Window>& batch, bool missing_only, nn::ModelParams<float>& grads,
                       std::mt19937_64* dropout_rng) {
  double total = 0.0;
  const float scale = 1.0f / static_cast<float>(batch.size());
  for (const auto& w : batch) {
    const Sample s = prepare_sample(b, clips.at(w.clip), w);
    auto pass = nn::encoder_forward<float>(s.input, {w.context, w.missing}, b.model, b.params, &grads, dropout_rng);
    auto l1 = l1_loss<float>(pass.value(), s.target, missing_only ? &s.missing : nullptr);
    total += l1.loss;
    l1.grad *= scale;
    nn::backward<float>(pass, l1.grad);
  }
  return total / static_cast<double>(batch.size());
}

double mean_l2p(const ModelBundle& b, const std::vector<AnimationClip>& clips, const std::vector<Window>& windows) {
  if (windows.empty()) throw TrainError("no validation windows");
  double sum = 0.0;
  for (const auto& w : windows) {
    const auto& clip = clips.at(w.clip);
    const auto pred = predict_window(b, clip, w);
    const auto gt = data::window_poses(clip, w);
    sum += eval::l2p(clip.skeleton, pred, gt, {w.context, w.missing}, b.position_stats);
  }
  return sum / static_cast<double>(windows.size());
}

std::string format_loss_row(const LossRecord& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%ld,%.9g,%.9g,", r.step, r.lr, r.train_l1);
  std::string out = buf;
  if (r.val_l2p) {
    std::snprintf(buf, sizeof buf, "%.9g", *r.val_l2p);
    out += buf;
  }
  return out;
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& curve) {
  std::ofstream out(path);
  if (!out) throw TrainError("cannot write " + path.string());
  out << "step,lr,train_l1,val_l2p\n";
  for (const auto& r : curve) out << format_loss_row(r) << '\n';
}

namespace {

std::filesystem::path checkpoint_name(const std::filesystem::path& dir, long step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%07ld.ckpt", step);
  return dir / buf;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, nn::ModelConfig model, const data::FeatureOptions& features,
                  const std::vector<AnimationClip>& train_clips, const std::vector<AnimationClip>* val_clips,
                  const TrainIO& io) {
  cfg.validate();
  if (train_clips.empty()) throw TrainError("training set is empty");
  const auto windows = data::slice_corpus(train_clips, cfg.window_length(), cfg.window_offset, cfg.context);

  TrainResult result;
  result.window_count = windows.size();
  ModelBundle b = make_bundle(cfg, model, features, train_clips, windows);
  b.metadata["seed"] = std::to_string(cfg.seed);
  b.metadata["window_offset"] = std::to_string(cfg.window_offset);
  b.metadata["m_max"] = std::to_string(cfg.m_max);

  std::vector<Window> val_windows;
  if (val_clips != nullptr) {
    const std::size_t len = static_cast<std::size_t>(cfg.context + cfg.val_missing + 1);
    val_windows = data::slice_corpus(*val_clips, len, cfg.val_offset, cfg.context);
  }

  const bool write = !io.run_dir.empty();
  const auto ckpt_dir = io.run_dir / "checkpoints";
  if (write) std::filesystem::create_directories(ckpt_dir);
  if (io.log != nullptr) {
    *io.log << "windows: " << windows.size() << " (length " << cfg.window_length() << ", offset "
            << cfg.window_offset << ")\n";
  }

  std::mt19937_64 rng(cfg.seed);
  std::mt19937_64 dropout_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  // Shuffled passes over the windows; a batch may straddle two passes.
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();
  OptimizerState opt = OptimizerState::for_params(b.params);
  nn::ModelParams<float> grads = b.params.zeros_like();
  std::deque<std::filesystem::path> kept;
  std::filesystem::path last_good;
  std::vector<Window> batch(static_cast<std::size_t>(cfg.batch_size));

  auto save = [&](const std::filesystem::path& path, long step) {
    ModelBundle snapshot = b;
    snapshot.metadata["step"] = std::to_string(step);
    nn::save_checkpoint(path, to_checkpoint(snapshot));
  };

  for (long step = 1; step <= cfg.max_steps; ++step) {
    const int m = sample_transition_length(rng, cfg.m_min, cfg.m_max);
    for (auto& w : batch) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      w = windows[order[cursor++]].truncated(m);
    }
    grads.set_zero();
    double loss = 0.0;
    try {
      loss = batch_gradients(b, train_clips, batch, cfg.missing_only_loss, grads, &dropout_rng);
    } catch (const nn::NnError& e) {
      throw TrainingAborted(std::string(e.what()) + " at step " + std::to_string(step), step, last_good);
    }
    const double lr = cfg.lr_scale * noam_lr(step, b.model.d_model, cfg.warmup);
    if (!std::isfinite(loss)) {
      throw TrainingAborted("loss became non-finite at step " + std::to_string(step), step, last_good);
    }
    try {
      if (cfg.grad_clip > 0.0) clip_grad_norm(grads, cfg.grad_clip);
      adamw_step(b.params, grads, opt, lr, cfg.adamw);
    } catch (const TrainError& e) {
      throw TrainingAborted(std::string(e.what()) + " at step " + std::to_string(step), step, last_good);
    }

    LossRecord rec{step, lr, loss, std::nullopt};
    const bool at_checkpoint = step % cfg.checkpoint_every == 0 || step == cfg.max_steps;
    if (at_checkpoint && !val_windows.empty()) rec.val_l2p = mean_l2p(b, *val_clips, val_windows);
    result.curve.push_back(rec);
    if (io.log != nullptr && (step % io.log_every == 0 || step == cfg.max_steps)) {
      *io.log << "step " << step << " lr " << lr << " l1 " << loss;
      if (rec.val_l2p) *io.log << " val_l2p " << *rec.val_l2p;
      *io.log << '\n';
    }
    if (rec.val_l2p && (!result.best_val_l2p || *rec.val_l2p < *result.best_val_l2p)) {
      result.best_val_l2p = rec.val_l2p;
      if (write) {
        result.best_checkpoint = ckpt_dir / "best.ckpt";
        save(result.best_checkpoint, step);
      }
    }
    if (write && at_checkpoint) {
      const auto path = checkpoint_name(ckpt_dir, step);
      save(path, step);
      last_good = path;
      kept.push_back(path);
      while (kept.size() > static_cast<std::size_t>(cfg.keep_checkpoints)) {
        std::filesystem::remove(kept.front());
        kept.pop_front();
      }
    }
  }

  b.metadata["step"] = std::to_string(cfg.max_steps);
  if (write) {
    result.final_checkpoint = io.run_dir / "final.ckpt";
    nn::save_checkpoint(result.final_checkpoint, to_checkpoint(b));
    write_loss_csv(io.run_dir / "loss.csv", result.curve);
  }
  result.bundle = std::move(b);
  return result;
}

}  // namespace tween::train
