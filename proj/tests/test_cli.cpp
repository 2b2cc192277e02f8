#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "tween/cli/commands.hpp"
#include "tween/cli/config.hpp"
#include "tween/data/bvh.hpp"
#include "tween/data/synth.hpp"

using namespace tween;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / name) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
};

// Small enough to train in a fraction of a second.
std::string small_config(const fs::path& dir, const std::string& extra_train = "", std::uint64_t data_seed = 1) {
  const fs::path path = dir / ("config_" + std::to_string(data_seed) + ".json");
  std::ofstream out(path);
  out << R"({
  "model": {"layers": 1, "heads": 2, "d_model": 16, "d_ff": 32, "max_rel_dist": 16},
  "train": {"batch_size": 2, "max_steps": 4, "checkpoint_every": 2)" << extra_train << R"(},
  "data": {"source": "synthetic", "test_clips": 2, "val_clips": 1,
           "synthetic": {"clips": 3, "joints": 5, "frames": 100, "seed": )" << data_seed << R"(}},
  "eval": {"offset": 40},
  "output_dir": ")" << (dir / "runs").string() << R"("
})";
  return path.string();
}

}  // namespace

TEST_CASE("config keys are validated") {
  Scratch s("tween_cli_config");
  const auto path = s.dir / "bad.json";
  std::ofstream(path) << R"({"train": {"adamw": {"beta3": 0.5}}})";
  const auto r = run({"train", "--config", path.string()});
  CHECK(r.code == cli::kUsage);
  CHECK(r.err.find("train.adamw.beta3") != std::string::npos);

  std::ofstream(s.dir / "type.json") << R"({"model": {"layers": "two"}})";
  CHECK(run({"train", "--config", (s.dir / "type.json").string()}).code == cli::kUsage);
  std::ofstream(s.dir / "heads.json") << R"({"model": {"heads": 5}})";
  CHECK(run({"train", "--config", (s.dir / "heads.json").string()}).code == cli::kUsage);

  const auto c = cli::preset_config("tiny");
  const auto back = cli::apply_json(cli::preset_config("paper"), cli::to_json(c));
  CHECK(cli::to_json(back) == cli::to_json(c));
  CHECK(cli::config_hash(back) == cli::config_hash(c));
  CHECK(cli::preset_config("paper").train.batch_size == 64);
  CHECK_THROWS_AS(cli::preset_config("huge"), cli::ConfigError);
}

TEST_CASE("usage errors") {
  CHECK(run({}).code == cli::kUsage);
  CHECK(run({"fly"}).code == cli::kUsage);
  CHECK(run({"--help"}).code == cli::kOk);
  const auto missing = run({"train", "--data-dir", "/nonexistent/tween"});
  CHECK(missing.code == cli::kUsage);
  CHECK(missing.err.find("/nonexistent/tween") != std::string::npos);
  const auto axis = run({"ablate", "sideways"});
  CHECK(axis.code == cli::kUsage);
  CHECK(axis.err.find("offset5_vs_20") != std::string::npos);
  CHECK(axis.err.find("keypos_on_off") != std::string::npos);
}

TEST_CASE("inspect-dataset reports window counts") {
  const auto r = run({"inspect-dataset", "--synthetic"});
  REQUIRE(r.code == cli::kOk);
  CHECK(r.out.find("windows (length 41, offset 5): 2000") != std::string::npos);
  CHECK(r.out.find("windows (length 41, offset 20): 500") != std::string::npos);
  CHECK(r.out.find("features: input 152, output 76") != std::string::npos);
}

TEST_CASE("train, eval and generate") {
  Scratch s("tween_cli_run");
  const auto cfg = small_config(s.dir);
  const auto run_a = s.dir / "a";
  const auto run_b = s.dir / "b";
  auto ra = run({"train", "--config", cfg, "--run-dir", run_a.string()});
  REQUIRE(ra.code == cli::kOk);
  CHECK(ra.out.find("windows: ") != std::string::npos);
  REQUIRE(run({"train", "--config", cfg, "--run-dir", run_b.string()}).code == cli::kOk);
  CHECK(fs::exists(run_a / "final.ckpt"));
  CHECK(slurp(run_a / "loss.csv") == slurp(run_b / "loss.csv"));
  const std::string manifest = slurp(run_a / "manifest.txt");
  CHECK(manifest.find("version " + cli::version()) != std::string::npos);
  CHECK(manifest.find("config_hash ") != std::string::npos);
  const auto resolved = nlohmann::json::parse(slurp(run_a / "config.json"));
  CHECK(resolved["train"]["adamw"]["beta2"] == 0.98);
  CHECK(resolved["model"]["d_model"] == 16);

  // Re-running from the recorded config reproduces the loss curve.
  const auto run_c = s.dir / "c";
  REQUIRE(run({"train", "--config", (run_a / "config.json").string(), "--run-dir", run_c.string()}).code == cli::kOk);
  CHECK(slurp(run_a / "loss.csv") == slurp(run_c / "loss.csv"));

  const auto ckpt = (run_a / "final.ckpt").string();
  const auto e1 = run({"eval", "--checkpoint", ckpt, "--out", (s.dir / "e1").string()});
  REQUIRE(e1.code == cli::kOk);
  const auto csv = slurp(s.dir / "e1" / "report.csv");
  for (const char* len : {",5,", ",15,", ",30,", ",45,"}) {
    CHECK(csv.find(std::string("slerp") + len) != std::string::npos);
    CHECK(csv.find(std::string("model") + len) != std::string::npos);
  }
  CHECK(e1.out.find("SLERP") != std::string::npos);
  REQUIRE(run({"eval", "--checkpoint", ckpt, "--out", (s.dir / "e2").string()}).code == cli::kOk);
  CHECK(slurp(s.dir / "e2" / "report.csv") == csv);

  REQUIRE(run({"eval", "--checkpoint", ckpt, "--lengths", "45", "--out", (s.dir / "e3").string()}).code == cli::kOk);
  const auto single = slurp(s.dir / "e3" / "report.csv");
  CHECK(single.find(",45,") != std::string::npos);
  CHECK(single.find(",30,") == std::string::npos);

  const auto other = small_config(s.dir, "", 7);
  const auto mismatch = run({"eval", "--checkpoint", ckpt, "--config", other, "--out", (s.dir / "e4").string()});
  CHECK(mismatch.code == cli::kMismatch);

  data::AnimationClip clip = data::synth_clip(5, 5, 60, data::SynthStyle::turn);
  const auto bvh = s.dir / "ctx.bvh";
  data::save_bvh(clip, bvh);
  const auto out_bvh = s.dir / "gen.bvh";
  CHECK(run({"generate", "--checkpoint", ckpt, "--context", bvh.string(), "--missing", "0", "--out", out_bvh.string()})
            .code == cli::kUsage);
  const auto g = run({"generate", "--checkpoint", ckpt, "--context", bvh.string(), "--context-start", "3",
                      "--target-frame", "50", "--missing", "12", "--out", out_bvh.string()});
  REQUIRE(g.code == cli::kOk);
  const auto back = data::load_bvh(out_bvh);
  CHECK(back.frame_count() == 10 + 12 + 1);
  CHECK(back.skeleton.joint_count() == 5);
  const std::string text = slurp(out_bvh);
  CHECK(text.find("CHANNELS 6") != std::string::npos);
  CHECK(text.find("Frames: 23") != std::string::npos);
  // Context frames are copied through unchanged.
  CHECK((back.frames[0].root_world_pos - clip.frames[3].root_world_pos).norm() < 1e-5);
  CHECK((back.frames[22].root_world_pos - clip.frames[50].root_world_pos).norm() < 1e-5);

  const auto far = run({"generate", "--checkpoint", ckpt, "--context", bvh.string(), "--missing", "40", "--target-frame",
                        "55", "--out", out_bvh.string()});
  CHECK(far.code == cli::kOk);
  CHECK(far.err.find("warning") != std::string::npos);
}

TEST_CASE("divergent training exits with the numeric-abort code") {
  Scratch s("tween_cli_abort");
  const auto cfg = small_config(s.dir, R"(, "lr_scale": 1e36, "grad_clip": 0, "max_steps": 200, "checkpoint_every": 1)");
  const auto r = run({"train", "--config", cfg, "--run-dir", (s.dir / "run").string()});
  CHECK(r.code == cli::kNumericAbort);
  CHECK(r.err.find("last good checkpoint") != std::string::npos);
}

TEST_CASE("ablate writes paired reports for every seed") {
  Scratch s("tween_cli_ablate");
  const auto cfg = small_config(s.dir, R"(, "max_steps": 2)");
  const auto out = s.dir / "ab";
  const auto r = run({"ablate", "offset5_vs_20", "--config", cfg, "--out", out.string()});
  REQUIRE(r.code == cli::kOk);
  const std::string csv = slurp(out / "ablation.csv");
  for (const char* seed : {"\n1,5,l2p,", "\n2,5,l2p,", "\n3,5,l2p,"}) CHECK(csv.find(seed) != std::string::npos);
  CHECK(csv.find("windows,36,9,4") != std::string::npos);
  CHECK(fs::exists(out / "report_offset20_seed3.csv"));
}
