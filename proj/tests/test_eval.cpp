#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "test_support.hpp"
#include "tween/data/synth.hpp"
#include "tween/eval/benchmark.hpp"

using namespace tween;
using namespace tween::eval;
using tween::testing::npss_oracle;
using motion::Quat;
using motion::Vec3;

namespace {

Eigen::MatrixXd random_signal(long frames, long features, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(frames, features);
  for (long k = 0; k < m.size(); ++k) m.data()[k] = n(rng);
  return m;
}

motion::Skeleton one_joint() {
  motion::Skeleton s;
  s.parents = {-1};
  s.rest_offsets = {Vec3::Zero()};
  s.joint_names = {"root"};
  return s;
}

std::vector<motion::LocalPose> constant_poses(const motion::Skeleton& s, std::size_t n) {
  return std::vector<motion::LocalPose>(n, motion::identity_pose(s));
}

}  // namespace

TEST_CASE("npss matches a brute-force oracle") {
  std::mt19937_64 rng(2024);
  for (int seed = 0; seed < 100; ++seed) {
    const auto g = random_signal(32, 2, rng);
    const auto p = random_signal(32, 2, rng);
    CHECK(std::abs(npss(p, g) - npss_oracle({p}, {g})) < 1e-9);
  }
  std::vector<Eigen::MatrixXd> ps, gs;
  for (int k = 0; k < 5; ++k) {
    gs.push_back(random_signal(7 + k, 3, rng));
    ps.push_back(random_signal(7 + k, 3, rng));
  }
  CHECK(std::abs(npss(ps, gs) - npss_oracle(ps, gs)) < 1e-9);
}

TEST_CASE("npss properties") {
  std::mt19937_64 rng(5);
  const auto g = random_signal(20, 3, rng);
  CHECK(npss(g, g) < 1e-12);

  Eigen::MatrixXd shifted(20, 3);
  for (long t = 0; t < 20; ++t) shifted.row(t) = g.row((t + 7) % 20);
  CHECK(npss(shifted, g) < 1e-12);

  // Pure tones at neighbouring frequencies.
  const long n = 16;
  Eigen::MatrixXd a(n, 1), b(n, 1);
  for (long t = 0; t < n; ++t) {
    a(t, 0) = std::cos(2.0 * std::numbers::pi * 3 * t / n);
    b(t, 0) = std::cos(2.0 * std::numbers::pi * 4 * t / n);
  }
  CHECK(npss(b, a) == doctest::Approx(npss_oracle({b}, {a})).epsilon(1e-12));
  CHECK(npss(b, a) > 0.0);

  Eigen::MatrixXd zero_pred = Eigen::MatrixXd::Zero(n, 1);
  CHECK(npss(zero_pred, a) == doctest::Approx(npss_oracle({zero_pred}, {a})));
  CHECK_THROWS_AS(npss(a, Eigen::MatrixXd::Zero(n, 1)), EvalError);
  CHECK_THROWS_AS(npss(a, Eigen::MatrixXd::Zero(n + 1, 1)), EvalError);
}

TEST_CASE("l2q examples") {
  const auto s = one_joint();
  auto gt = constant_poses(s, 3);
  auto pred = gt;
  const Gap gap{1, 1};
  CHECK(l2q(s, pred, gt, gap) == 0.0);
  pred[1].local_rot[0] = Quat(Eigen::AngleAxisd(std::numbers::pi / 2, Vec3::UnitY()));
  CHECK(l2q(s, pred, gt, gap) == doctest::Approx(0.7654).epsilon(1e-4));
  CHECK(l2q(s, pred, gt, gap) == doctest::Approx(std::sqrt(2.0 - std::sqrt(2.0))).epsilon(1e-12));

  std::mt19937_64 rng(3);
  const auto sk = testing::random_skeleton(rng, 6);
  std::vector<motion::LocalPose> g, p;
  for (int f = 0; f < 5; ++f) g.push_back(testing::random_pose(rng, sk));
  p = g;
  for (auto& pose : p) {
    for (auto& q : pose.local_rot) q.coeffs() *= -1.0;
  }
  CHECK(l2q(sk, p, g, {2, 2}) < 1e-12);
}

TEST_CASE("l2p examples") {
  const auto s = one_joint();
  auto gt = constant_poses(s, 4);
  PositionStats stats;
  stats.mean = Eigen::Vector3d::Zero();
  stats.std = Eigen::Vector3d(2.0, 3.0, 4.0);
  CHECK(l2p(s, gt, gt, {1, 2}, stats) == 0.0);
  auto pred = gt;
  for (auto& p : pred) p.root_world_pos.y() += 3.0;
  CHECK(l2p(s, pred, gt, {1, 2}, stats) == doctest::Approx(1.0));
  PositionStats doubled = stats;
  doubled.std *= 2.0;
  CHECK(l2p(s, pred, gt, {1, 2}, doubled) == doctest::Approx(0.5));
  CHECK_THROWS_AS(l2p(s, pred, gt, {1, 2}, PositionStats{}), EvalError);
}

TEST_CASE("metrics ignore context frames and see every missing frame") {
  std::mt19937_64 rng(8);
  const auto sk = testing::random_skeleton(rng, 5);
  std::vector<motion::LocalPose> gt;
  for (int f = 0; f < 12; ++f) gt.push_back(testing::random_pose(rng, sk));
  PositionStats stats;
  stats.mean = Eigen::VectorXd::Zero(15);
  stats.std = Eigen::VectorXd::Constant(15, 10.0);
  const Gap gap{4, 7};
  auto pred = gt;
  pred[5] = testing::random_pose(rng, sk);
  const double p0 = l2p(sk, pred, gt, gap, stats);
  const double q0 = l2q(sk, pred, gt, gap);
  Eigen::MatrixXd sp, sg;
  npss_signals(sk, pred, gt, gap, sp, sg);
  const double n0 = npss(sp, sg);
  CHECK(p0 > 0.0);
  CHECK(q0 > 0.0);
  CHECK(n0 > 0.0);

  auto perturbed = pred;
  for (int f = 0; f < 3; ++f) perturbed[static_cast<std::size_t>(f)] = testing::random_pose(rng, sk);
  CHECK(l2p(sk, perturbed, gt, gap, stats) == p0);
  CHECK(l2q(sk, perturbed, gt, gap) == q0);
  npss_signals(sk, perturbed, gt, gap, sp, sg);
  CHECK(npss(sp, sg) == n0);
}

TEST_CASE("slerp baseline") {
  data::AnimationClip clip;
  clip.skeleton = one_joint();
  clip.frames = constant_poses(clip.skeleton, 12);
  clip.frames.back().local_rot[0] = Quat(Eigen::AngleAxisd(std::numbers::pi / 2, Vec3::UnitX()));
  data::Window w{0, 0, 10, 1};
  const auto poses = train::slerp_window(clip, w);
  const double angle = Eigen::AngleAxisd(poses[10].local_rot[0]).angle();
  CHECK(angle == doctest::Approx(std::numbers::pi / 4));

  data::AnimationClip still;
  still.skeleton = one_joint();
  still.frames = constant_poses(still.skeleton, 20);
  data::Window sw{0, 0, 10, 9};
  for (const auto& p : train::slerp_window(still, sw)) {
    CHECK(p.root_world_pos.norm() < 1e-12);
    CHECK(std::abs(std::abs(p.local_rot[0].w()) - 1.0) < 1e-12);
  }
}

TEST_CASE("slerp benchmark grows with the gap on turning clips") {
  data::SynthCorpusSpec spec;
  spec.clips = 6;
  spec.frames = 200;
  spec.styles = {data::SynthStyle::turn};
  const auto clips = data::synth_corpus(spec);
  const auto windows = data::slice_corpus(clips, 41, 5, 10);
  const auto stats = fit_position_stats(clips, windows);
  BenchmarkConfig cfg;
  const auto report = run_benchmark(nullptr, clips, cfg, stats);
  REQUIRE(report.rows.size() == 4);
  for (std::size_t k = 1; k < report.rows.size(); ++k) {
    CHECK(report.rows[k].slerp.l2p > report.rows[k - 1].slerp.l2p);
  }
  // Limb swings are periodic, so the rotation error saturates once the gap
  // spans whole gait cycles; it still grows up to 30 frames.
  CHECK(report.at(15).slerp.l2q > report.at(5).slerp.l2q);
  CHECK(report.at(30).slerp.l2q > report.at(15).slerp.l2q);
  std::ostringstream csv, table;
  write_report_csv(csv, report);
  write_report_table(table, report);
  CHECK(csv.str().rfind("method,length,windows,l2p,l2q,npss\nslerp,5,", 0) == 0);
  CHECK(table.str().find("SLERP") != std::string::npos);
  CHECK(table.str().find("Model") == std::string::npos);
}

TEST_CASE("benchmark with a model is deterministic") {
  data::SynthCorpusSpec spec;
  spec.clips = 3;
  spec.frames = 90;
  spec.joints = 5;
  const auto clips = data::synth_corpus(spec);
  train::TrainConfig tc;
  tc.max_steps = 3;
  tc.batch_size = 2;
  nn::ModelConfig mc;
  mc.layers = 1;
  mc.heads = 2;
  mc.d_model = 8;
  mc.d_ff = 16;
  const auto trained = train::train(tc, mc, {}, clips, nullptr);
  BenchmarkConfig cfg;
  cfg.lengths = {5, 45};
  const auto a = run_benchmark(&trained.bundle, clips, cfg, trained.bundle.position_stats);
  const auto b = run_benchmark(&trained.bundle, clips, cfg, trained.bundle.position_stats);
  std::ostringstream ca, cb;
  write_report_csv(ca, a);
  write_report_csv(cb, b);
  CHECK(ca.str() == cb.str());
  REQUIRE(a.rows.size() == 2);
  for (const auto& row : a.rows) {
    REQUIRE(row.model.has_value());
    CHECK(std::isfinite(row.model->l2p));
    CHECK(row.model->l2q >= 0.0);
  }
  std::ostringstream table;
  write_report_table(table, a);
  CHECK(table.str().find("Model") != std::string::npos);

  BenchmarkConfig wrong = cfg;
  wrong.context = 8;
  CHECK_THROWS_AS(run_benchmark(&trained.bundle, clips, wrong, trained.bundle.position_stats), EvalError);
}

TEST_CASE("ablation axes") {
  CHECK(ablation_axis_names().size() == 7);
  for (const auto& name : ablation_axis_names()) CHECK(to_string(ablation_axis_from_string(name)) == name);
  try {
    ablation_axis_from_string("dropout");
    FAIL("expected an error");
  } catch (const EvalError& e) {
    CHECK(std::string(e.what()).find("zeros_vs_slerp") != std::string::npos);
  }
  ArmConfig base;
  const auto [a, b] = ablation_arms(AblationAxis::zeros_vs_slerp, base);
  CHECK(a.features.fill == data::FillMode::zeros);
  CHECK(b.features.fill == data::FillMode::slerp);
  CHECK(a.features.use_velocity == b.features.use_velocity);
  const auto [ka, kb] = ablation_arms(AblationAxis::keypos_on_off, base);
  CHECK(ka.model.key_pos_embedding);
  CHECK(!kb.model.key_pos_embedding);
  const auto [oa, ob] = ablation_arms(AblationAxis::offset5_vs_20, base);
  CHECK(oa.train.window_offset == 5);
  CHECK(ob.train.window_offset == 20);
}

TEST_CASE("ablation run reports every seed") {
  data::SynthCorpusSpec spec;
  spec.clips = 3;
  spec.frames = 100;
  spec.joints = 4;
  const auto clips = data::synth_corpus(spec);
  AblationSpec ab;
  ab.axis = AblationAxis::offset5_vs_20;
  ab.base.model.layers = 1;
  ab.base.model.heads = 2;
  ab.base.model.d_model = 8;
  ab.base.model.d_ff = 16;
  ab.base.train.max_steps = 2;
  ab.base.train.batch_size = 1;
  ab.seeds = {1, 2};
  ab.bench.lengths = {5};
  const auto r = run_ablation(ab, clips, clips);
  REQUIRE(r.runs.size() == 2);
  CHECK(r.windows_a == 3 * data::window_count(100, 41, 5));
  CHECK(r.windows_b == 3 * data::window_count(100, 41, 20));
  std::ostringstream csv;
  write_ablation_csv(csv, r);
  CHECK(csv.str().find("windows,36,9,4") != std::string::npos);
  CHECK(csv.str().find("\n2,5,npss,") != std::string::npos);
}
