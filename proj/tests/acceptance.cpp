// Acceptance runs. Usage: acceptance [--out DIR] [criterion numbers...]
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "test_support.hpp"
#include "tween/cli/commands.hpp"
#include "tween/cli/config.hpp"
#include "tween/data/synth.hpp"
#include "tween/data/windows.hpp"
#include "tween/eval/benchmark.hpp"
#include "tween/motion/root_space.hpp"
#include "tween/nn/grad_check.hpp"
#include "tween/train/trainer.hpp"

using namespace tween;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path g_out = "acceptance_out";

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

Outcome gradient_fidelity() {
  const data::FeatureLayout layout{8, true};
  const auto cfg = nn::tiny_preset(static_cast<int>(layout.input_dim()), static_cast<int>(layout.output_dim()));
  double worst = 0.0;
  for (std::uint64_t seed : {1u, 2u, 3u}) worst = std::max(worst, nn::grad_check(cfg, seed).max_rel_error);
  nn::GradCheckOptions lin;
  lin.linear_only = true;
  const double linear = nn::grad_check(cfg, 4, lin).max_rel_error;
  return {worst < 1e-4 && linear < 1e-8, "max rel error " + fmt(worst) + ", linear " + fmt(linear)};
}

Outcome kinematics_round_trip() {
  std::mt19937_64 rng(7);
  double worst = 0.0;
  for (std::size_t joints : {2u, 5u, 22u}) {
    const auto s = testing::random_skeleton(rng, joints);
    for (int k = 0; k < 1000; ++k) {
      const auto p = testing::random_pose(rng, s);
      const auto back = motion::root_space_to_local(s, motion::to_root_space(s, motion::forward_kinematics(s, p)));
      worst = std::max(worst, testing::pose_distance(p, back));
    }
  }
  return {worst < 1e-6, "max abs error " + fmt(worst)};
}

// Budget for the 8-window smoke.
train::TrainConfig overfit_config() {
  train::TrainConfig c;
  c.max_steps = 2000;
  c.batch_size = 32;
  c.warmup = 20;
  c.lr_scale = 0.5;
  return c;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome overfit_smoke() {
  data::SynthCorpusSpec spec;
  spec.clips = 8;
  spec.frames = 41;
  const auto clips = data::synth_corpus(spec);
  const auto cfg = overfit_config();
  const auto r = train::train(cfg, nn::tiny_preset(0, 0), {}, clips, nullptr, {g_out / "overfit", nullptr});

  // Full pass over the training set: every window at every trained gap.
  const auto windows = data::slice_corpus(clips, cfg.window_length(), cfg.window_offset, cfg.context);
  double total = 0.0;
  long n = 0;
  for (int m = cfg.m_min; m <= cfg.m_max; ++m) {
    for (const auto& w0 : windows) {
      const auto w = w0.truncated(m);
      const auto s = train::prepare_sample(r.bundle, clips[w.clip], w);
      const auto pass = nn::encoder_forward<float>(s.input, {w.context, w.missing}, r.bundle.model, r.bundle.params);
      total += static_cast<double>((pass.value() - s.target).cwiseAbs().mean());
      ++n;
    }
  }
  const double l1 = total / static_cast<double>(n);

  std::vector<double> medians;
  for (std::size_t b = 0; b + 200 <= r.curve.size(); b += 200) {
    std::vector<double> block;
    for (std::size_t k = b; k < b + 200; ++k) block.push_back(r.curve[k].train_l1);
    medians.push_back(median(block));
  }
  bool monotone = true;
  for (std::size_t k = 1; k < medians.size(); ++k) monotone = monotone && medians[k] <= medians[k - 1];
  std::string trace;
  for (const double m : medians) trace += (trace.empty() ? "" : " ") + fmt(m);
  return {windows.size() == 8 && l1 < 1e-2 && monotone,
          std::to_string(windows.size()) + " windows, training L1 " + fmt(l1) + ", 200-step medians [" + trace + "]"};
}

struct Trained {
  train::TrainResult result;
  eval::BenchmarkReport report;
};

// Criteria 4 and 5 share one 20k-step model.
const Trained& beats_interpolation_run() {
  static std::optional<Trained> cached;
  if (cached) return *cached;
  const auto config = cli::preset_config("tiny");
  const auto ds = cli::load_datasets(config.data);
  std::cout << "  training " << config.train.max_steps << " steps on " << ds.train.size() << " clips\n" << std::flush;
  auto result = train::train(config.train, config.model, config.features, ds.train, &ds.val,
                             {g_out / "interpolation", &std::cout, 2000});
  eval::BenchmarkConfig bench;
  bench.lengths = {5, 15, 30, 45};
  auto report = eval::run_benchmark(&result.bundle, ds.test, bench, result.bundle.position_stats);
  std::ofstream csv(g_out / "interpolation" / "report.csv");
  eval::write_report_csv(csv, report);
  eval::write_report_table(std::cout, report);
  cached = Trained{std::move(result), std::move(report)};
  return *cached;
}

Outcome beats_interpolation() {
  const auto& row = beats_interpolation_run().report.at(30);
  const auto& m = *row.model;
  const double rp = m.l2p / row.slerp.l2p;
  const double rq = m.l2q / row.slerp.l2q;
  return {rp <= 0.8 && rq <= 0.8, "length 30 over " + std::to_string(row.windows) + " windows: L2P " + fmt(m.l2p) +
                                      " vs " + fmt(row.slerp.l2p) + " (ratio " + fmt(rp) + "), L2Q " + fmt(m.l2q) +
                                      " vs " + fmt(row.slerp.l2q) + " (ratio " + fmt(rq) + ")"};
}

Outcome extrapolation() {
  const auto& report = beats_interpolation_run().report;
  const auto& m30 = *report.at(30).model;
  const auto& m45 = *report.at(45).model;
  const bool finite = std::isfinite(m45.l2p) && std::isfinite(m45.l2q) && std::isfinite(m45.npss);
  const double ratio = m45.l2p / m30.l2p;
  return {finite && ratio <= 2.5, "L2P(45) " + fmt(m45.l2p) + ", L2P(30) " + fmt(m30.l2p) + ", ratio " + fmt(ratio) +
                                      ", L2Q(45) " + fmt(m45.l2q) + ", NPSS(45) " + fmt(m45.npss)};
}

Outcome dataset_slicing() {
  const auto clips = data::synth_corpus({});
  const std::size_t length = 41;
  bool exact = true;
  std::size_t n5 = 0, n20 = 0;
  for (const auto& clip : clips) {
    const std::size_t n = clip.frame_count();
    for (std::size_t offset : {5u, 20u}) {
      const std::size_t expected = n < length ? 0 : (n - length) / offset + 1;
      const auto got = data::slice_windows(clip, length, offset, 10);
      exact = exact && got.size() == expected;
      for (std::size_t k = 0; k < got.size(); ++k) exact = exact && got[k].start == k * offset;
    }
  }
  n5 = data::slice_corpus(clips, length, 5, 10).size();
  n20 = data::slice_corpus(clips, length, 20, 10).size();
  const double ratio = static_cast<double>(n5) / static_cast<double>(n20);
  return {exact && ratio >= 3.5 && ratio <= 4.2, std::to_string(n5) + " vs " + std::to_string(n20) +
                                                     " windows, ratio " + fmt(ratio) +
                                                     (exact ? ", per-clip counts exact" : ", per-clip count mismatch")};
}

Outcome npss_oracle() {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_int_distribution<int> frames(2, 48), features(1, 6);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const long t = frames(rng), f = features(rng);
    Eigen::MatrixXd g(t, f), p(t, f);
    for (long i = 0; i < g.size(); ++i) g.data()[i] = n(rng);
    for (long i = 0; i < p.size(); ++i) p.data()[i] = n(rng);
    worst = std::max(worst, std::abs(eval::npss(p, g) - testing::npss_oracle({p}, {g})));
  }
  return {worst < 1e-9, "100 pairs, max abs difference " + fmt(worst)};
}

// Shared reduced budget for the ablation criteria.
eval::AblationSpec ablation_spec(eval::AblationAxis axis) {
  const auto config = cli::preset_config("tiny");
  eval::AblationSpec spec;
  spec.axis = axis;
  spec.base.label = "base";
  spec.base.train = config.train;
  spec.base.train.max_steps = 1000;
  spec.base.model = config.model;
  spec.base.features = config.features;
  spec.bench = config.eval;
  return spec;
}

std::vector<data::AnimationClip> ablation_train_clips() {
  data::SynthCorpusSpec s;
  s.clips = 20;
  return data::synth_corpus(s);
}

std::vector<data::AnimationClip> ablation_test_clips() {
  const auto config = cli::preset_config("tiny");
  return cli::load_datasets(config.data, false, true).test;
}

Outcome zero_fill_contrast() {
  const auto spec = ablation_spec(eval::AblationAxis::zeros_vs_slerp);
  const auto r = eval::run_ablation(spec, ablation_train_clips(), ablation_test_clips());
  std::ostringstream csv;
  eval::write_ablation_csv(csv, r);
  std::ofstream(g_out / "ablation_zeros_vs_slerp.csv") << csv.str();
  std::cout << csv.str();
  std::set<std::uint64_t> seeds;
  bool complete = r.runs.size() == 3;
  for (const auto& run : r.runs) {
    seeds.insert(run.seed);
    complete = complete && run.a.at(30).model && run.b.at(30).model;
  }
  for (const std::uint64_t s : seeds) {
    const std::string prefix = "\n" + std::to_string(s) + ",30,l2p,";
    complete = complete && csv.str().find(prefix) != std::string::npos;
  }
  std::string sign;
  for (const auto& run : r.runs) {
    const double d = run.b.at(30).model->l2p - run.a.at(30).model->l2p;
    sign += (sign.empty() ? "" : ", ") + std::string("seed ") + std::to_string(run.seed) + " dL2P(30) " + fmt(d);
  }
  return {complete && seeds.size() == 3, r.label_a + " vs " + r.label_b + ": " + sign};
}

Outcome keypos_flag() {
  auto spec = ablation_spec(eval::AblationAxis::keypos_on_off);
  spec.seeds = {1};
  spec.bench.lengths = {30, 45};
  const auto r = eval::run_ablation(spec, ablation_train_clips(), ablation_test_clips());
  std::ostringstream csv;
  eval::write_ablation_csv(csv, r);
  std::ofstream(g_out / "ablation_keypos_on_off.csv") << csv.str();
  std::cout << csv.str();
  const bool row = csv.str().find("\n1,45,l2p,") != std::string::npos;
  const auto& run = r.runs.front();
  const bool complete = run.a.at(45).model && run.b.at(45).model && r.extrapolation_degraded.has_value();
  if (!complete) return {false, "missing arm results"};
  return {row, "L2P(45) on " + fmt(run.a.at(45).model->l2p) + ", off " + fmt(run.b.at(45).model->l2p) +
                   ", degraded beyond training lengths: " + (*r.extrapolation_degraded ? "yes" : "no")};
}

Outcome reproducibility() {
  const fs::path dir = g_out / "repro";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path config = dir / "config.json";
  std::ofstream(config) << R"({"train": {"max_steps": 300, "checkpoint_every": 100},
  "data": {"synthetic": {"clips": 10}}})";
  std::ostringstream sink;
  auto cli = [&](std::vector<std::string> args) { return tween::cli::run(args, sink, sink); };
  for (const char* run : {"a", "b"}) {
    if (cli({"train", "--config", config.string(), "--run-dir", (dir / run).string()}) != 0) {
      return {false, "train failed: " + sink.str()};
    }
    if (cli({"eval", "--checkpoint", (dir / run / "final.ckpt").string(), "--out", (dir / run / "eval").string()}) !=
        0) {
      return {false, "eval failed: " + sink.str()};
    }
  }
  const bool loss = slurp(dir / "a" / "loss.csv") == slurp(dir / "b" / "loss.csv");
  const bool bench = slurp(dir / "a" / "eval" / "report.csv") == slurp(dir / "b" / "eval" / "report.csv");
  const bool nonempty = !slurp(dir / "a" / "loss.csv").empty() && !slurp(dir / "a" / "eval" / "report.csv").empty();
  return {loss && bench && nonempty,
          std::string("loss.csv ") + (loss ? "identical" : "differs") + ", report.csv " + (bench ? "identical" : "differs")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient fidelity", gradient_fidelity},
      {"kinematics round trip", kinematics_round_trip},
      {"overfit smoke", overfit_smoke},
      {"beats interpolation", beats_interpolation},
      {"extrapolation to length 45", extrapolation},
      {"dataset slicing", dataset_slicing},
      {"npss oracle", npss_oracle},
      {"zero-fill contrast", zero_fill_contrast},
      {"key-position flag", keypos_flag},
      {"reproducibility", reproducibility},
  };
  std::set<int> selected;
  for (int k = 1; k < argc; ++k) {
    const std::string a = argv[k];
    if (a == "--out" && k + 1 < argc) {
      g_out = argv[++k];
    } else {
      selected.insert(std::stoi(a));
    }
  }
  fs::create_directories(g_out);

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.contains(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failed;
    std::cout << "criterion " << id << " " << criteria[i].first << ": " << (o.pass ? "PASS" : "FAIL") << " ("
              << o.detail << "; " << fmt(secs) << " s)\n"
              << std::flush;
  }
  return failed == 0 ? 0 : 1;
}
