#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "tween/data/synth.hpp"
#include "tween/train/trainer.hpp"

using namespace tween;
using namespace tween::train;
using Mat = nn::Matrix<double>;

namespace {

std::vector<data::AnimationClip> small_corpus(std::size_t clips, std::size_t frames, std::uint64_t seed = 1) {
  data::SynthCorpusSpec spec;
  spec.clips = clips;
  spec.frames = frames;
  spec.joints = 5;
  spec.seed = seed;
  return data::synth_corpus(spec);
}

nn::ModelConfig micro_model() {
  nn::ModelConfig m;
  m.layers = 1;
  m.heads = 2;
  m.d_model = 16;
  m.d_ff = 32;
  m.max_rel_dist = 8;
  return m;
}

TrainConfig quick_config(long steps) {
  TrainConfig c;
  c.max_steps = steps;
  c.batch_size = 2;
  c.warmup = 10;
  c.checkpoint_every = 5;
  return c;
}

}  // namespace

TEST_CASE("l1 loss values and subgradient") {
  Mat pred(2, 2), target(2, 2);
  pred << 0, 2, 1, 1;
  target << 1, 2, 1, 3;
  const auto r = l1_loss<double>(pred, target);
  CHECK(r.loss == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(r.grad(0, 0) == -0.25);
  CHECK(r.grad(0, 1) == 0.0);
  CHECK(r.grad(1, 0) == 0.0);
  CHECK(r.grad(1, 1) == -0.25);

  CHECK(l1_loss<double>(target, target).loss == 0.0);
  CHECK(l1_loss<double>((target.array() + 1.0).matrix(), target).loss == doctest::Approx(1.0));
  CHECK_THROWS_AS(l1_loss<double>(Mat::Zero(2, 3), target), TrainError);

  const std::vector<bool> second_only{false, true};
  const auto masked = l1_loss<double>(pred, target, &second_only);
  CHECK(masked.loss == doctest::Approx(1.0));
  CHECK(masked.grad.row(0).cwiseAbs().sum() == 0.0);
}

TEST_CASE("noam schedule") {
  CHECK_THROWS_AS(noam_lr(0, 1024, 4000), TrainError);
  CHECK(noam_lr(1, 1024, 4000) == doctest::Approx((1.0 / 32.0) * std::pow(4000.0, -1.5)).epsilon(1e-12));
  CHECK(noam_lr(1, 1024, 4000) == doctest::Approx(1.235e-7).epsilon(1e-3));
  CHECK(noam_lr(4000, 1024, 4000) == doctest::Approx(std::pow(1024.0, -0.5) * std::pow(4000.0, -0.5)).epsilon(1e-14));
  for (int warmup : {1, 7, 200, 4000}) {
    CHECK(noam_lr(warmup, 64, warmup) == std::pow(64.0, -0.5) * std::pow(static_cast<double>(warmup), -0.5));
  }
  for (long s = 1; s < 200; ++s) CHECK(noam_lr(s + 1, 64, 200) >= noam_lr(s, 64, 200));
  for (long s = 200; s < 2000; s += 7) CHECK(noam_lr(s + 1, 64, 200) <= noam_lr(s, 64, 200));
}

namespace {

nn::ModelParams<float> scalar_params(float value) {
  nn::ModelParams<float> p;
  p.b_out = nn::Matrix<float>::Constant(1, 1, value);
  return p;
}

}  // namespace

TEST_CASE("adamw step") {
  AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  auto p = scalar_params(0.5f);
  auto state = OptimizerState::for_params(p);
  adamw_step(p, scalar_params(0.0f), state, 0.1, cfg);
  CHECK(p.b_out(0, 0) == 0.5f);

  cfg.beta1 = 0.9;
  cfg.beta2 = 0.999;
  cfg.eps = 0.0;
  p = scalar_params(0.5f);
  state = OptimizerState::for_params(p);
  adamw_step(p, scalar_params(1.0f), state, 0.01, cfg);
  CHECK(p.b_out(0, 0) == doctest::Approx(0.49).epsilon(1e-6));

  AdamWConfig decay;
  decay.weight_decay = 0.1;
  p = scalar_params(2.0f);
  state = OptimizerState::for_params(p);
  for (int k = 0; k < 3; ++k) adamw_step(p, scalar_params(0.0f), state, 0.5, decay);
  CHECK(p.b_out(0, 0) == doctest::Approx(2.0 * std::pow(1.0 - 0.05, 3)).epsilon(1e-6));

  auto bad = scalar_params(std::numeric_limits<float>::quiet_NaN());
  p = scalar_params(1.0f);
  state = OptimizerState::for_params(p);
  CHECK_THROWS_WITH_AS(adamw_step(p, bad, state, 0.1, cfg), "non-finite gradient in parameter output.bias",
                       TrainError);
  CHECK(p.b_out(0, 0) == 1.0f);
  CHECK(state.step == 0);
}

TEST_CASE("position tables take a scaled step") {
  AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  cfg.eps = 0.0;
  cfg.position_lr_scale = 10.0;
  auto p = scalar_params(0.0f);
  p.rel_bias = nn::Matrix<float>::Zero(1, 1);
  p.key_pos = nn::Matrix<float>::Zero(1, 1);
  auto g = p.zeros_like();
  g.for_each([](const std::string&, nn::Matrix<float>& m) { m.setOnes(); });
  auto state = OptimizerState::for_params(p);
  adamw_step(p, g, state, 0.01, cfg);
  CHECK(p.b_out(0, 0) == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(p.rel_bias(0, 0) == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(p.key_pos(0, 0) == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(AdamWConfig{}.position_lr_scale == 1.0);
  CHECK(TrainConfig{}.adamw.position_lr_scale == 10.0);
}

TEST_CASE("one adamw step reduces a toy l1 loss") {
  auto p = scalar_params(0.0f);
  auto state = OptimizerState::for_params(p);
  const nn::Matrix<float> target = nn::Matrix<float>::Constant(1, 1, 1.0f);
  const auto before = l1_loss<float>(p.b_out, target);
  auto g = scalar_params(0.0f);
  g.b_out = before.grad;
  adamw_step(p, g, state, 1e-3, AdamWConfig{});
  CHECK(l1_loss<float>(p.b_out, target).loss < before.loss);
}

TEST_CASE("gradient clipping") {
  auto g = scalar_params(3.0f);
  g.w_out = nn::Matrix<float>::Constant(1, 1, 4.0f);
  CHECK(clip_grad_norm(g, 1.0) == doctest::Approx(5.0));
  CHECK(g.b_out(0, 0) == doctest::Approx(0.6f));
  CHECK(g.w_out(0, 0) == doctest::Approx(0.8f));
  CHECK(clip_grad_norm(g, 10.0) == doctest::Approx(1.0));
  CHECK(g.w_out(0, 0) == doctest::Approx(0.8f));
}

TEST_CASE("transition length sampling") {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 100; ++k) CHECK(sample_transition_length(rng, 5, 5) == 5);
  CHECK_THROWS_AS(sample_transition_length(rng, 6, 5), TrainError);

  const int draws = 1000000;
  std::vector<int> counts(26, 0);
  for (int k = 0; k < draws; ++k) {
    const int m = sample_transition_length(rng, 5, 30);
    REQUIRE(m >= 5);
    REQUIRE(m <= 30);
    ++counts[static_cast<std::size_t>(m - 5)];
  }
  const double p = 1.0 / 26.0;
  const double expected = draws * p;
  const double sigma = std::sqrt(draws * p * (1.0 - p));
  double chi2 = 0.0;
  for (int c : counts) {
    CHECK(std::abs(c - expected) < 3.0 * sigma + 1.0);
    chi2 += (c - expected) * (c - expected) / expected;
  }
  CHECK(chi2 < 60.0);  // 25 degrees of freedom, far beyond the 0.999 quantile

  std::mt19937_64 a(42), b(42);
  for (int k = 0; k < 50; ++k) CHECK(sample_transition_length(a, 5, 30) == sample_transition_length(b, 5, 30));

  std::mt19937_64 cover(7);
  std::vector<bool> seen(26, false);
  for (int k = 0; k < 1000; ++k) seen[static_cast<std::size_t>(sample_transition_length(cover, 5, 30) - 5)] = true;
  CHECK(std::all_of(seen.begin(), seen.end(), [](bool s) { return s; }));
}

TEST_CASE("first training loss equals mean absolute normalized target") {
  const auto clips = small_corpus(2, 60);
  TrainConfig cfg = quick_config(1);
  cfg.batch_size = 1;
  cfg.m_min = cfg.m_max = 12;
  const auto windows = data::slice_corpus(clips, cfg.window_length(), cfg.window_offset, cfg.context);
  const ModelBundle b = make_bundle(cfg, micro_model(), {}, clips, windows);
  for (const auto& w : windows) {
    const Sample s = prepare_sample(b, clips[w.clip], w);
    auto g = b.params.zeros_like();
    const double loss = batch_gradients(b, clips, {w}, false, g, nullptr);
    CHECK(loss == doctest::Approx(s.target.cast<double>().cwiseAbs().mean()).epsilon(1e-6));
  }
}

TEST_CASE("training is deterministic and writes its artifacts") {
  const auto clips = small_corpus(3, 70);
  const auto val = small_corpus(1, 90, 99);
  const auto dir = std::filesystem::temp_directory_path() / "tween_test_train";
  std::filesystem::remove_all(dir);
  TrainIO io;
  io.run_dir = dir / "a";
  const TrainConfig cfg = quick_config(20);
  const auto a = train::train(cfg, micro_model(), {}, clips, &val, io);
  io.run_dir = dir / "b";
  const auto b = train::train(cfg, micro_model(), {}, clips, &val, io);

  REQUIRE(a.curve.size() == 20);
  for (std::size_t k = 0; k < a.curve.size(); ++k) {
    CHECK(a.curve[k].train_l1 == b.curve[k].train_l1);
    CHECK(a.curve[k].lr == b.curve[k].lr);
    CHECK(std::isfinite(a.curve[k].train_l1));
  }
  CHECK(a.curve[4].val_l2p.has_value());
  CHECK(!a.curve[3].val_l2p.has_value());

  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const std::string csv = slurp(dir / "a" / "loss.csv");
  CHECK(csv == slurp(dir / "b" / "loss.csv"));
  CHECK(csv.rfind("step,lr,train_l1,val_l2p\n", 0) == 0);
  CHECK(slurp(dir / "a" / "final.ckpt") == slurp(dir / "b" / "final.ckpt"));

  std::size_t steps = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "a" / "checkpoints")) {
    if (e.path().filename().string().rfind("step_", 0) == 0) ++steps;
  }
  CHECK(steps == 3);
  CHECK(std::filesystem::exists(dir / "a" / "checkpoints" / "best.ckpt"));
  CHECK(std::filesystem::exists(dir / "a" / "checkpoints" / "step_0000020.ckpt"));
  CHECK(!std::filesystem::exists(dir / "a" / "checkpoints" / "step_0000005.ckpt"));

  const ModelBundle back = from_checkpoint(nn::load_checkpoint(dir / "a" / "final.ckpt"));
  const auto w = data::slice_windows(val[0], 41, 40, 10).front();
  const auto p1 = predict_window(a.bundle, val[0], w);
  const auto p2 = predict_window(back, val[0], w);
  for (std::size_t f = 0; f < p1.size(); ++f) {
    CHECK(p1[f].root_world_pos == p2[f].root_world_pos);
    for (std::size_t j = 0; j < p1[f].local_rot.size(); ++j) CHECK(p1[f].local_rot[j].coeffs() == p2[f].local_rot[j].coeffs());
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("divergence aborts with the last good checkpoint") {
  const auto clips = small_corpus(2, 60);
  const auto dir = std::filesystem::temp_directory_path() / "tween_test_abort";
  std::filesystem::remove_all(dir);
  TrainConfig cfg = quick_config(200);
  cfg.checkpoint_every = 1;
  cfg.grad_clip = 0.0;
  cfg.lr_scale = 1e36;
  TrainIO io;
  io.run_dir = dir;
  try {
    train::train(cfg, micro_model(), {}, clips, nullptr, io);
    FAIL("expected divergence");
  } catch (const TrainingAborted& e) {
    CHECK(e.step > 1);
    CHECK(std::filesystem::exists(e.last_good));
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("predicted windows keep the known frames") {
  const auto clips = small_corpus(2, 60);
  TrainConfig cfg = quick_config(1);
  const auto windows = data::slice_corpus(clips, cfg.window_length(), cfg.window_offset, cfg.context);
  const ModelBundle b = make_bundle(cfg, micro_model(), {}, clips, windows);
  const auto w = windows.front().truncated(7);
  const auto pred = predict_window(b, clips[w.clip], w);
  const auto gt = data::window_poses(clips[w.clip], w);
  REQUIRE(pred.size() == gt.size());
  for (std::size_t f : {std::size_t{0}, w.last_context(), w.target_row()}) {
    CHECK(pred[f].root_world_pos == gt[f].root_world_pos);
  }
  // Untrained output path is zero, so missing rows decode the normalizer mean.
  for (std::size_t f = w.last_context() + 1; f < w.target_row(); ++f) {
    CHECK((pred[f].root_world_pos - pred[w.last_context() + 1].root_world_pos).norm() < 1e-9);
  }
}
