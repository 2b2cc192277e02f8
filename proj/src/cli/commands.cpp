#include "tween/cli/commands.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "tween/cli/config.hpp"
#include "tween/data/bvh.hpp"

#ifndef TWEEN_VERSION
#define TWEEN_VERSION "unknown"
#endif

namespace tween::cli {

std::string version() { return TWEEN_VERSION; }

namespace {

struct MismatchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flags shared by the data-consuming verbs.
struct CommonFlags {
  std::string config;
  std::string preset;
  bool synthetic = false;
  std::string data_dir;
  std::string test_dir;
  std::optional<long> steps;
  std::optional<std::size_t> offset;
  std::optional<std::uint64_t> seed;
  std::optional<int> batch;
  std::string out;

  void add_to(CLI::App* app, bool training) {
    app->add_option("--config", config, "JSON config file");
    app->add_option("--preset", preset, "tiny or paper");
    app->add_flag("--synthetic", synthetic, "use the procedural corpus");
    app->add_option("--data-dir", data_dir, "directory of training BVH files");
    app->add_option("--test-dir", test_dir, "directory of held-out BVH files");
    app->add_option("--out", out, "output directory");
    if (training) {
      app->add_option("--steps", steps, "optimizer steps");
      app->add_option("--offset", offset, "training window offset in frames");
      app->add_option("--seed", seed, "random seed");
      app->add_option("--batch", batch, "batch size");
    }
  }

  RunConfig resolve() const {
    RunConfig c = preset_config(preset.empty() ? "tiny" : preset);
    if (!config.empty()) {
      std::ifstream in(config);
      if (!in) throw ConfigError("cannot read config " + config);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in, nullptr, true, true);
      } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config " + config + " is not valid JSON: " + e.what());
      }
      c = apply_json(c, j);
    }
    if (synthetic) c.data.source = "synthetic";
    if (!data_dir.empty()) {
      c.data.source = "bvh";
      c.data.train_dir = data_dir;
    }
    if (!test_dir.empty()) {
      c.data.source = "bvh";
      c.data.test_dir = test_dir;
    }
    if (steps) c.train.max_steps = *steps;
    if (offset) c.train.window_offset = *offset;
    if (seed) c.train.seed = *seed;
    if (batch) c.train.batch_size = *batch;
    try {
      c.train.validate();
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
    return c;
  }
};

std::string timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return buf;
}

std::filesystem::path fresh_dir(const std::filesystem::path& parent, const std::string& stem) {
  const std::string base = stem + "-" + timestamp();
  std::filesystem::path p = parent / base;
  for (int k = 2; std::filesystem::exists(p); ++k) p = parent / (base + "-" + std::to_string(k));
  std::filesystem::create_directories(p);
  return p;
}

std::filesystem::path output_dir(const std::string& explicit_dir, const RunConfig& c, const std::string& stem) {
  if (!explicit_dir.empty()) {
    std::filesystem::create_directories(explicit_dir);
    return explicit_dir;
  }
  return fresh_dir(c.output_dir, stem);
}

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << s;
}

void write_run_record(const std::filesystem::path& dir, const RunConfig& c, const std::string& command,
                      const std::vector<std::pair<std::string, std::string>>& extra) {
  write_text(dir / "config.json", to_json(c).dump(2) + "\n");
  std::ostringstream m;
  m << "version " << version() << "\n";
  m << "command " << command << "\n";
  m << "config_hash " << config_hash(c) << "\n";
  for (const auto& [k, v] : extra) m << k << " " << v << "\n";
  write_text(dir / "manifest.txt", m.str());
}

std::vector<int> parse_lengths(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size() || v < 1) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("--lengths expects positive integers separated by commas, got '" + s + "'");
    }
  }
  if (out.empty()) throw ConfigError("--lengths is empty");
  return out;
}

// Training windows and position statistics as the checkpoint saw them.
eval::PositionStats training_stats(const train::ModelBundle& b, const std::vector<data::AnimationClip>& clips) {
  auto number = [&](const char* key) -> std::size_t {
    const auto it = b.metadata.find(key);
    if (it == b.metadata.end()) throw MismatchError(std::string("checkpoint metadata lacks ") + key);
    return static_cast<std::size_t>(std::stoul(it->second));
  };
  const std::size_t len = static_cast<std::size_t>(b.context) + number("m_max") + 1;
  const auto windows = data::slice_corpus(clips, len, number("window_offset"), b.context);
  if (windows.empty()) throw MismatchError("training data yields no windows for this checkpoint");
  auto stats = eval::fit_position_stats(clips, windows);
  train::round_to_float(stats);
  return stats;
}

// config.json of the run a checkpoint belongs to: run/final.ckpt or
// run/checkpoints/step_N.ckpt.
std::filesystem::path find_config_near(const std::filesystem::path& ckpt) {
  auto dir = ckpt.parent_path();
  if (dir.filename() == "checkpoints") dir = dir.parent_path();
  const auto candidate = dir / "config.json";
  return std::filesystem::exists(candidate) ? candidate : std::filesystem::path{};
}

int cmd_train(const CommonFlags& f, const std::string& run_dir, std::ostream& out, std::ostream& err) {
  const RunConfig c = f.resolve();
  const Datasets ds = load_datasets(c.data, true, false);
  const auto windows = data::slice_corpus(ds.train, c.train.window_length(), c.train.window_offset, c.train.context);
  const auto dir = output_dir(run_dir, c, "train");
  write_run_record(dir, c, "train", {{"windows", std::to_string(windows.size())}});
  out << "run directory: " << dir.string() << "\n";
  train::TrainIO io;
  io.run_dir = dir;
  io.log = &out;
  try {
    const auto r = train::train(c.train, c.model, c.features, ds.train, ds.val.empty() ? nullptr : &ds.val, io);
    std::ofstream m(dir / "manifest.txt", std::ios::app);
    m << "final_checkpoint " << r.final_checkpoint.string() << "\n";
    if (r.best_val_l2p) m << "best_val_l2p " << *r.best_val_l2p << "\n";
    out << "final checkpoint: " << r.final_checkpoint.string() << "\n";
  } catch (const train::TrainingAborted& e) {
    err << "training aborted: " << e.what() << "\n";
    err << "last good checkpoint: " << (e.last_good.empty() ? "(none)" : e.last_good.string()) << "\n";
    return kNumericAbort;
  }
  return kOk;
}

int cmd_eval(CommonFlags f, const std::string& checkpoint, const std::string& lengths, std::optional<std::size_t> eval_offset,
             std::ostream& out) {
  if (f.config.empty()) f.config = find_config_near(checkpoint).string();
  RunConfig c = f.resolve();
  if (!lengths.empty()) c.eval.lengths = parse_lengths(lengths);
  if (eval_offset) c.eval.offset = *eval_offset;
  if (!std::filesystem::exists(checkpoint)) throw ConfigError("checkpoint " + checkpoint + " does not exist");
  train::ModelBundle b;
  try {
    b = train::from_checkpoint(nn::load_checkpoint(checkpoint));
  } catch (const std::exception& e) {
    throw MismatchError(std::string("cannot use checkpoint: ") + e.what());
  }
  const Datasets ds = load_datasets(c.data, true, true);
  const auto stats = training_stats(b, ds.train);
  if (stats.hash() != b.position_stats.hash()) {
    throw MismatchError("checkpoint statistics hash " + b.position_stats.hash() +
                        " does not match the configured training data (" + stats.hash() + ")");
  }
  c.eval.context = b.context;
  eval::BenchmarkReport report;
  try {
    report = eval::run_benchmark(&b, ds.test, c.eval, b.position_stats);
  } catch (const eval::EvalError& e) {
    throw MismatchError(e.what());
  } catch (const data::DataError& e) {
    throw MismatchError(e.what());
  }
  report.metadata["checkpoint"] = checkpoint;
  const auto dir = output_dir(f.out, c, "eval");
  std::ostringstream csv, table;
  eval::write_report_csv(csv, report);
  eval::write_report_table(table, report);
  write_text(dir / "report.csv", csv.str());
  write_text(dir / "report.txt", table.str());
  write_run_record(dir, c, "eval", {{"checkpoint", checkpoint}, {"position_stats_hash", stats.hash()}});
  out << table.str();
  out << "report: " << (dir / "report.csv").string() << "\n";
  return kOk;
}

int cmd_generate(const std::string& checkpoint, const std::string& context_path, std::size_t context_start,
                 std::string target_path, long target_frame, int missing, const std::string& out_path,
                 std::ostream& out, std::ostream& err) {
  if (missing < 1) throw ConfigError("--missing must be at least 1");
  if (target_path.empty()) target_path = context_path;
  train::ModelBundle b;
  try {
    b = train::from_checkpoint(nn::load_checkpoint(checkpoint));
  } catch (const std::exception& e) {
    throw MismatchError(std::string("cannot use checkpoint: ") + e.what());
  }
  const auto ctx = data::load_bvh(context_path);
  const auto tgt = target_path == context_path ? ctx : data::load_bvh(target_path);
  if (!ctx.skeleton.same_topology(tgt.skeleton)) throw MismatchError("context and target skeletons differ");
  if (b.layout(ctx.skeleton.joint_count()).input_dim() != static_cast<std::size_t>(b.model.d_in)) {
    throw MismatchError("checkpoint expects a different skeleton than " + context_path);
  }
  const std::size_t c = static_cast<std::size_t>(b.context);
  if (context_start + c > ctx.frame_count()) {
    throw ConfigError("context clip needs " + std::to_string(c) + " frames from frame " + std::to_string(context_start));
  }
  const std::size_t tf = target_frame < 0 ? tgt.frame_count() - 1 : static_cast<std::size_t>(target_frame);
  if (tf >= tgt.frame_count()) throw ConfigError("--target-frame is past the end of " + target_path);

  const auto trained_max = b.metadata.count("m_max") ? std::stoi(b.metadata.at("m_max")) : 0;
  if (missing > trained_max) {
    err << "warning: " << missing << " missing frames exceeds the trained maximum of " << trained_max
        << "; relying on relative-position extrapolation\n";
  }
  if (missing + 1 > b.model.max_rel_dist) {
    err << "warning: gap spans more than the " << b.model.max_rel_dist << "-frame relative-position range\n";
  }

  data::AnimationClip work;
  work.skeleton = ctx.skeleton;
  work.fps = ctx.fps;
  work.name = "generated";
  const std::size_t extra = context_start > 0 ? 1 : 0;
  for (std::size_t k = context_start - extra; k < context_start + c; ++k) work.frames.push_back(ctx.frames[k]);
  for (int k = 0; k < missing; ++k) work.frames.push_back(ctx.frames[context_start + c - 1]);
  work.frames.push_back(tgt.frames[tf]);
  const data::Window w{0, extra, b.context, missing};
  const auto anchor = data::window_anchor(work, w);
  const auto poses = train::predict_window(b, work, w);

  data::AnimationClip result;
  result.skeleton = ctx.skeleton;
  result.fps = ctx.fps;
  result.name = "generated";
  for (const auto& p : poses) result.frames.push_back(data::from_anchor_frame(p, anchor));
  data::save_bvh(result, out_path);
  out << "wrote " << result.frame_count() << " frames (" << c << " context, " << missing << " generated, 1 target) to "
      << out_path << "\n";
  return kOk;
}

int cmd_ablate(const CommonFlags& f, const std::string& axis_name, int seeds, std::ostream& out) {
  eval::AblationAxis axis;
  try {
    axis = eval::ablation_axis_from_string(axis_name);
  } catch (const eval::EvalError& e) {
    throw ConfigError(e.what());
  }
  if (seeds < 1) throw ConfigError("--seeds must be at least 1");
  const RunConfig c = f.resolve();
  const Datasets ds = load_datasets(c.data, true, true);
  eval::AblationSpec spec;
  spec.axis = axis;
  spec.base = {"base", c.train, c.model, c.features};
  spec.bench = c.eval;
  spec.seeds.clear();
  for (int k = 0; k < seeds; ++k) spec.seeds.push_back(c.train.seed + static_cast<std::uint64_t>(k));
  const auto dir = output_dir(f.out, c, "ablate-" + axis_name);
  const auto result = eval::run_ablation(spec, ds.train, ds.test, &out);
  std::ostringstream csv;
  eval::write_ablation_csv(csv, result);
  write_text(dir / "ablation.csv", csv.str());
  for (const auto& run : result.runs) {
    for (const auto* rep : {&run.a, &run.b}) {
      std::ostringstream r;
      eval::write_report_csv(r, *rep);
      write_text(dir / ("report_" + rep->metadata.at("arm") + "_seed" + std::to_string(run.seed) + ".csv"), r.str());
    }
  }
  write_run_record(dir, c, "ablate " + axis_name, {{"seeds", std::to_string(seeds)}});
  out << csv.str();
  return kOk;
}

int cmd_inspect(const CommonFlags& f, std::ostream& out) {
  const RunConfig c = f.resolve();
  const Datasets ds = load_datasets(c.data, true, true);
  auto describe = [&](const char* name, const std::vector<data::AnimationClip>& clips) {
    std::size_t frames = 0;
    for (const auto& clip : clips) frames += clip.frame_count();
    out << name << ": " << clips.size() << " clips, " << frames << " frames\n";
  };
  describe("train", ds.train);
  describe("val", ds.val);
  describe("test", ds.test);
  if (ds.train.empty()) return kOk;
  const auto& s = ds.train.front().skeleton;
  const data::FeatureLayout layout{s.joint_count(), c.features.use_velocity};
  out << "joints: " << s.joint_count() << ", fps: " << ds.train.front().fps << "\n";
  out << "features: input " << layout.input_dim() << ", output " << layout.output_dim() << "\n";
  const std::size_t len = c.train.window_length();
  for (const std::size_t off : {c.train.window_offset, std::size_t{5}, std::size_t{20}}) {
    out << "windows (length " << len << ", offset " << off << "): "
        << data::slice_corpus(ds.train, len, off, c.train.context).size() << "\n";
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Transformer motion in-betweening toolkit", "tween"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version());

  CommonFlags train_flags, eval_flags, ablate_flags, inspect_flags;
  std::string run_dir;
  auto* train_cmd = app.add_subcommand("train", "train a model");
  train_flags.add_to(train_cmd, true);
  train_cmd->add_option("--run-dir", run_dir, "exact run directory (default: timestamped under output_dir)");

  std::string checkpoint, lengths;
  std::optional<std::size_t> eval_offset;
  auto* eval_cmd = app.add_subcommand("eval", "benchmark a checkpoint against SLERP");
  eval_flags.add_to(eval_cmd, false);
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--lengths", lengths, "comma-separated transition lengths");
  eval_cmd->add_option("--eval-offset", eval_offset, "offset between evaluation windows");

  std::string gen_ckpt, context_path, target_path, gen_out;
  std::size_t context_start = 0;
  long target_frame = -1;
  int missing = 0;
  auto* gen_cmd = app.add_subcommand("generate", "fill a gap between context frames and a target pose");
  gen_cmd->add_option("--checkpoint", gen_ckpt, "checkpoint file")->required();
  gen_cmd->add_option("--context", context_path, "BVH with the context frames")->required();
  gen_cmd->add_option("--context-start", context_start, "first context frame");
  gen_cmd->add_option("--target", target_path, "BVH holding the target pose (default: context file)");
  gen_cmd->add_option("--target-frame", target_frame, "target frame index (default: last)");
  gen_cmd->add_option("--missing", missing, "number of frames to generate")->required();
  gen_cmd->add_option("--out", gen_out, "output BVH")->required();

  std::string axis;
  int seeds = 3;
  auto* ablate_cmd = app.add_subcommand("ablate", "paired training runs along one ablation axis");
  ablate_flags.add_to(ablate_cmd, true);
  ablate_cmd->add_option("axis", axis, "ablation axis")->required();
  ablate_cmd->add_option("--seeds", seeds, "number of seeds");

  auto* inspect_cmd = app.add_subcommand("inspect-dataset", "summarize a dataset and its windows");
  inspect_flags.add_to(inspect_cmd, true);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << version() << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    if (dynamic_cast<const CLI::CallForHelp*>(&e) == nullptr) err << "error: " << e.what() << "\n";
    err << sub->help();
    return kUsage;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_flags, run_dir, out, err);
    if (eval_cmd->parsed()) return cmd_eval(eval_flags, checkpoint, lengths, eval_offset, out);
    if (gen_cmd->parsed()) {
      return cmd_generate(gen_ckpt, context_path, context_start, target_path, target_frame, missing, gen_out, out, err);
    }
    if (ablate_cmd->parsed()) return cmd_ablate(ablate_flags, axis, seeds, out);
    if (inspect_cmd->parsed()) return cmd_inspect(inspect_flags, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const data::BvhError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const MismatchError& e) {
    err << "error: " << e.what() << "\n";
    return kMismatch;
  } catch (const train::TrainError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}

}  // namespace tween::cli
