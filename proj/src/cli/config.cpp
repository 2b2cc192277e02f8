#include "tween/cli/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "tween/data/bvh.hpp"

namespace tween::cli {

using nlohmann::json;

RunConfig preset_config(const std::string& preset) {
  RunConfig c;
  c.preset = preset;
  if (preset == "tiny") {
    c.model = nn::tiny_preset(0, 0);
  } else if (preset == "paper") {
    c.model = nn::paper_preset(0, 0);
    c.train.batch_size = 64;
    c.train.warmup = 4000;
  } else {
    throw ConfigError("unknown preset '" + preset + "' (valid: tiny, paper)");
  }
  return c;
}

namespace {

// Walks one JSON object, handing each key to `visit`; unknown keys throw.
class Reader {
 public:
  Reader(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) throw ConfigError("config key '" + name("") + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.push_back(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + name(key) + "' has the wrong type");
    }
  }

  void path(const char* key, std::filesystem::path& out) {
    std::string s = out.string();
    get(key, s);
    out = s;
  }

  template <typename F>
  void object(const char* key, F&& f) {
    seen_.push_back(key);
    if (!j_.contains(key)) return;
    Reader sub(j_.at(key), name(key));
    f(sub);
    sub.finish();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end()) {
        throw ConfigError("unknown config key '" + name(it.key()) + "'");
      }
    }
  }

 private:
  std::string name(const std::string& key) const {
    if (prefix_.empty()) return key;
    return key.empty() ? prefix_ : prefix_ + "." + key;
  }

  const json& j_;
  std::string prefix_;
  std::vector<std::string> seen_;
};

}  // namespace

RunConfig apply_json(RunConfig c, const json& j) {
  Reader root(j, "");
  if (j.is_object() && j.contains("preset")) {
    std::string preset;
    root.get("preset", preset);
    const RunConfig fresh = preset_config(preset);
    c.preset = preset;
    c.model = fresh.model;
    c.train.batch_size = fresh.train.batch_size;
    c.train.warmup = fresh.train.warmup;
  } else {
    root.get("preset", c.preset);
  }
  root.object("model", [&](Reader& r) {
    r.get("layers", c.model.layers);
    r.get("heads", c.model.heads);
    r.get("d_model", c.model.d_model);
    r.get("d_ff", c.model.d_ff);
    r.get("max_rel_dist", c.model.max_rel_dist);
    r.get("dropout", c.model.dropout);
    r.get("pre_norm", c.model.pre_norm);
    r.get("key_pos_embedding", c.model.key_pos_embedding);
  });
  root.object("train", [&](Reader& r) {
    auto& t = c.train;
    r.get("batch_size", t.batch_size);
    r.get("warmup", t.warmup);
    r.get("max_steps", t.max_steps);
    r.get("m_min", t.m_min);
    r.get("m_max", t.m_max);
    r.get("context", t.context);
    r.get("window_offset", t.window_offset);
    r.get("lr_scale", t.lr_scale);
    r.get("grad_clip", t.grad_clip);
    r.get("seed", t.seed);
    r.get("checkpoint_every", t.checkpoint_every);
    r.get("keep_checkpoints", t.keep_checkpoints);
    r.get("missing_only_loss", t.missing_only_loss);
    r.get("normalize", t.normalize);
    r.get("val_missing", t.val_missing);
    r.get("val_offset", t.val_offset);
    r.object("adamw", [&](Reader& a) {
      a.get("beta1", t.adamw.beta1);
      a.get("beta2", t.adamw.beta2);
      a.get("eps", t.adamw.eps);
      a.get("weight_decay", t.adamw.weight_decay);
      a.get("position_lr_scale", t.adamw.position_lr_scale);
    });
  });
  root.object("features", [&](Reader& r) {
    std::string fill = data::to_string(c.features.fill);
    std::string space = data::to_string(c.features.pose_space);
    r.get("fill", fill);
    r.get("pose_space", space);
    r.get("use_velocity", c.features.use_velocity);
    try {
      c.features.fill = data::fill_mode_from_string(fill);
      c.features.pose_space = data::pose_space_from_string(space);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  });
  root.object("data", [&](Reader& r) {
    auto& d = c.data;
    r.get("source", d.source);
    r.get("test_clips", d.test_clips);
    r.get("test_seed", d.test_seed);
    r.get("val_clips", d.val_clips);
    r.get("val_seed", d.val_seed);
    r.path("train_dir", d.train_dir);
    r.path("test_dir", d.test_dir);
    r.path("val_dir", d.val_dir);
    r.get("unit_scale", d.unit_scale);
    r.object("synthetic", [&](Reader& s) {
      auto& sp = d.synthetic;
      s.get("clips", sp.clips);
      s.get("joints", sp.joints);
      s.get("frames", sp.frames);
      s.get("seed", sp.seed);
      s.get("fps", sp.fps);
      std::vector<std::string> styles;
      for (auto st : sp.styles) styles.push_back(data::to_string(st));
      s.get("styles", styles);
      sp.styles.clear();
      try {
        for (const auto& st : styles) sp.styles.push_back(data::synth_style_from_string(st));
      } catch (const std::exception& e) {
        throw ConfigError(e.what());
      }
    });
  });
  root.object("eval", [&](Reader& r) {
    r.get("lengths", c.eval.lengths);
    r.get("offset", c.eval.offset);
  });
  root.path("output_dir", c.output_dir);
  root.finish();

  if (c.data.source != "synthetic" && c.data.source != "bvh") {
    throw ConfigError("config key 'data.source' must be \"synthetic\" or \"bvh\"");
  }
  c.eval.context = c.train.context;
  try {
    nn::ModelConfig probe = c.model;
    probe.d_in = probe.d_out = 1;
    probe.validate();
    c.train.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return apply_json(preset_config("tiny"), j);
}

json to_json(const RunConfig& c) {
  json j;
  j["preset"] = c.preset;
  j["model"] = {{"layers", c.model.layers},
                {"heads", c.model.heads},
                {"d_model", c.model.d_model},
                {"d_ff", c.model.d_ff},
                {"max_rel_dist", c.model.max_rel_dist},
                {"dropout", c.model.dropout},
                {"pre_norm", c.model.pre_norm},
                {"key_pos_embedding", c.model.key_pos_embedding}};
  const auto& t = c.train;
  j["train"] = {{"batch_size", t.batch_size},
                {"warmup", t.warmup},
                {"max_steps", t.max_steps},
                {"m_min", t.m_min},
                {"m_max", t.m_max},
                {"context", t.context},
                {"window_offset", t.window_offset},
                {"lr_scale", t.lr_scale},
                {"grad_clip", t.grad_clip},
                {"seed", t.seed},
                {"checkpoint_every", t.checkpoint_every},
                {"keep_checkpoints", t.keep_checkpoints},
                {"missing_only_loss", t.missing_only_loss},
                {"normalize", t.normalize},
                {"val_missing", t.val_missing},
                {"val_offset", t.val_offset},
                {"adamw",
                 {{"beta1", t.adamw.beta1},
                  {"beta2", t.adamw.beta2},
                  {"eps", t.adamw.eps},
                  {"weight_decay", t.adamw.weight_decay},
                  {"position_lr_scale", t.adamw.position_lr_scale}}}};
  j["features"] = {{"fill", data::to_string(c.features.fill)},
                   {"pose_space", data::to_string(c.features.pose_space)},
                   {"use_velocity", c.features.use_velocity}};
  std::vector<std::string> styles;
  for (auto st : c.data.synthetic.styles) styles.push_back(data::to_string(st));
  const auto& d = c.data;
  j["data"] = {{"source", d.source},
               {"test_clips", d.test_clips},
               {"test_seed", d.test_seed},
               {"val_clips", d.val_clips},
               {"val_seed", d.val_seed},
               {"train_dir", d.train_dir.string()},
               {"test_dir", d.test_dir.string()},
               {"val_dir", d.val_dir.string()},
               {"unit_scale", d.unit_scale},
               {"synthetic",
                {{"clips", d.synthetic.clips},
                 {"joints", d.synthetic.joints},
                 {"frames", d.synthetic.frames},
                 {"seed", d.synthetic.seed},
                 {"fps", d.synthetic.fps},
                 {"styles", styles}}}};
  j["eval"] = {{"lengths", c.eval.lengths}, {"offset", c.eval.offset}};
  j["output_dir"] = c.output_dir.string();
  return j;
}

std::string config_hash(const RunConfig& c) {
  const std::string s = to_json(c).dump();
  std::uint64_t h = 1469598103934665603ull;
  for (const unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::vector<data::AnimationClip> load_dir(const std::filesystem::path& dir, double unit_scale, const char* what) {
  if (dir.empty()) throw ConfigError(std::string("no ") + what + " directory configured (data." + what + "_dir)");
  if (!std::filesystem::is_directory(dir)) {
    throw ConfigError(std::string(what) + " directory " + dir.string() + " does not exist");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".bvh") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError(std::string(what) + " directory " + dir.string() + " has no .bvh files");
  std::vector<data::AnimationClip> clips;
  data::BvhOptions opt;
  opt.unit_scale = unit_scale;
  for (const auto& f : files) clips.push_back(data::load_bvh(f, opt));
  return clips;
}

}  // namespace

Datasets load_datasets(const DataConfig& d, bool need_train, bool need_test) {
  Datasets out;
  if (d.source == "synthetic") {
    if (need_train) {
      out.train = data::synth_corpus(d.synthetic);
      if (d.val_clips > 0) {
        auto spec = d.synthetic;
        spec.clips = d.val_clips;
        spec.seed = d.val_seed;
        out.val = data::synth_corpus(spec);
      }
    }
    if (need_test) {
      auto spec = d.synthetic;
      spec.clips = d.test_clips;
      spec.seed = d.test_seed;
      out.test = data::synth_corpus(spec);
    }
    return out;
  }
  if (need_train) {
    out.train = load_dir(d.train_dir, d.unit_scale, "train");
    if (!d.val_dir.empty()) out.val = load_dir(d.val_dir, d.unit_scale, "val");
  }
  if (need_test) out.test = load_dir(d.test_dir, d.unit_scale, "test");
  return out;
}

}  // namespace tween::cli
