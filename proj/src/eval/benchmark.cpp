#include "tween/eval/benchmark.hpp"

#include <cstdio>
#include <ostream>

namespace tween::eval {

const LengthResult& BenchmarkReport::at(int missing) const {
  for (const auto& r : rows) {
    if (r.missing == missing) return r;
  }
  throw EvalError("report has no row for length " + std::to_string(missing));
}

BenchmarkReport run_benchmark(const train::ModelBundle* model, const std::vector<data::AnimationClip>& clips,
                              const BenchmarkConfig& cfg, const PositionStats& stats) {
  if (clips.empty()) throw EvalError("benchmark set is empty");
  if (cfg.lengths.empty()) throw EvalError("no transition lengths to evaluate");
  const std::size_t joints = clips.front().skeleton.joint_count();
  if (model != nullptr) {
    if (model->layout(joints).input_dim() != static_cast<std::size_t>(model->model.d_in)) {
      throw EvalError("checkpoint expects a different skeleton than the benchmark set");
    }
    if (model->context != cfg.context) {
      throw EvalError("checkpoint was trained with " + std::to_string(model->context) + " context frames, benchmark uses " +
                      std::to_string(cfg.context));
    }
  }
  BenchmarkReport report;
  report.metadata["offset"] = std::to_string(cfg.offset);
  report.metadata["context"] = std::to_string(cfg.context);
  report.metadata["position_stats_hash"] = stats.hash();

  for (const int m : cfg.lengths) {
    if (m < 1) throw EvalError("transition length must be at least 1");
    const std::size_t len = static_cast<std::size_t>(cfg.context + m + 1);
    const auto windows = data::slice_corpus(clips, len, cfg.offset, cfg.context);
    if (windows.empty()) {
      throw EvalError("no benchmark windows of length " + std::to_string(len) + " (clips too short)");
    }
    LengthResult row;
    row.missing = m;
    row.windows = windows.size();
    MethodScores slerp, learned;
    std::vector<Eigen::MatrixXd> sp, mp, gts;
    for (const auto& w : windows) {
      const auto& clip = clips[w.clip];
      const Gap gap{w.context, w.missing};
      const auto gt = data::window_poses(clip, w);
      const auto base = train::slerp_window(clip, w);
      Eigen::MatrixXd ps, pg;
      slerp.l2p += l2p(clip.skeleton, base, gt, gap, stats);
      slerp.l2q += l2q(clip.skeleton, base, gt, gap);
      npss_signals(clip.skeleton, base, gt, gap, ps, pg);
      sp.push_back(ps);
      gts.push_back(pg);
      if (model != nullptr) {
        const auto pred = train::predict_window(*model, clip, w);
        learned.l2p += l2p(clip.skeleton, pred, gt, gap, stats);
        learned.l2q += l2q(clip.skeleton, pred, gt, gap);
        Eigen::MatrixXd pm, unused;
        npss_signals(clip.skeleton, pred, gt, gap, pm, unused);
        mp.push_back(pm);
      }
    }
    const double n = static_cast<double>(windows.size());
    slerp.l2p /= n;
    slerp.l2q /= n;
    slerp.npss = npss(sp, gts);
    row.slerp = slerp;
    if (model != nullptr) {
      learned.l2p /= n;
      learned.l2q /= n;
      learned.npss = npss(mp, gts);
      row.model = learned;
    }
    report.rows.push_back(row);
  }
  return report;
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string fixed(double v, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%*.4f", width, v);
  return buf;
}

}  // namespace

void write_report_csv(std::ostream& out, const BenchmarkReport& r) {
  out << "method,length,windows,l2p,l2q,npss\n";
  auto line = [&](const char* method, const LengthResult& row, const MethodScores& s) {
    out << method << ',' << row.missing << ',' << row.windows << ',' << num(s.l2p) << ',' << num(s.l2q) << ','
        << num(s.npss) << '\n';
  };
  for (const auto& row : r.rows) line("slerp", row, row.slerp);
  for (const auto& row : r.rows) {
    if (row.model) line("model", row, *row.model);
  }
}

void write_report_table(std::ostream& out, const BenchmarkReport& r) {
  const int w = 9;
  out << "        ";
  for (const char* metric : {"L2Q", "L2P", "NPSS"}) {
    out << " | " << metric << std::string(static_cast<std::size_t>(w) * r.rows.size() - std::char_traits<char>::length(metric), ' ');
  }
  out << "\nlength  ";
  for (int k = 0; k < 3; ++k) {
    out << " | ";
    for (const auto& row : r.rows) {
      char buf[16];
      std::snprintf(buf, sizeof buf, "%*d", w, row.missing);
      out << buf;
    }
  }
  out << '\n';
  auto line = [&](const char* name, auto get) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%-8s", name);
    out << buf;
    for (int metric = 0; metric < 3; ++metric) {
      out << " | ";
      for (const auto& row : r.rows) {
        const MethodScores* s = get(row);
        const double v = s == nullptr ? 0.0 : metric == 0 ? s->l2q : metric == 1 ? s->l2p : s->npss;
        out << (s == nullptr ? std::string(static_cast<std::size_t>(w - 1), ' ') + "-" : fixed(v, w));
      }
    }
    out << '\n';
  };
  line("SLERP", [](const LengthResult& row) -> const MethodScores* { return &row.slerp; });
  bool any_model = false;
  for (const auto& row : r.rows) any_model = any_model || row.model.has_value();
  if (any_model) {
    line("Model", [](const LengthResult& row) -> const MethodScores* { return row.model ? &*row.model : nullptr; });
  }
}

namespace {

const std::vector<std::pair<AblationAxis, std::string>>& axis_table() {
  static const std::vector<std::pair<AblationAxis, std::string>> t = {
      {AblationAxis::offset5_vs_20, "offset5_vs_20"},
      {AblationAxis::root_vs_local, "root_vs_local"},
      {AblationAxis::velocity_on_off, "velocity_on_off"},
      {AblationAxis::zeros_vs_slerp, "zeros_vs_slerp"},
      {AblationAxis::keypos_on_off, "keypos_on_off"},
      {AblationAxis::normalizer_on_off, "normalizer_on_off"},
      {AblationAxis::loss_all_vs_missing, "loss_all_vs_missing"},
  };
  return t;
}

}  // namespace

std::vector<std::string> ablation_axis_names() {
  std::vector<std::string> out;
  for (const auto& [axis, name] : axis_table()) out.push_back(name);
  return out;
}

AblationAxis ablation_axis_from_string(const std::string& s) {
  for (const auto& [axis, name] : axis_table()) {
    if (name == s) return axis;
  }
  std::string valid;
  for (const auto& n : ablation_axis_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw EvalError("unknown ablation axis '" + s + "' (valid: " + valid + ")");
}

std::string to_string(AblationAxis a) {
  for (const auto& [axis, name] : axis_table()) {
    if (axis == a) return name;
  }
  return "unknown";
}

std::pair<ArmConfig, ArmConfig> ablation_arms(AblationAxis axis, const ArmConfig& base) {
  ArmConfig a = base, b = base;
  switch (axis) {
    case AblationAxis::offset5_vs_20:
      a.train.window_offset = 5;
      b.train.window_offset = 20;
      a.label = "offset5";
      b.label = "offset20";
      break;
    case AblationAxis::root_vs_local:
      a.features.pose_space = data::PoseSpace::root;
      b.features.pose_space = data::PoseSpace::local;
      a.label = "root";
      b.label = "local";
      break;
    case AblationAxis::velocity_on_off:
      a.features.use_velocity = true;
      b.features.use_velocity = false;
      a.label = "velocity_on";
      b.label = "velocity_off";
      break;
    case AblationAxis::zeros_vs_slerp:
      a.features.fill = data::FillMode::zeros;
      b.features.fill = data::FillMode::slerp;
      a.label = "zeros";
      b.label = "slerp";
      break;
    case AblationAxis::keypos_on_off:
      a.features.fill = b.features.fill = data::FillMode::zeros;
      a.model.key_pos_embedding = true;
      b.model.key_pos_embedding = false;
      a.label = "keypos_on";
      b.label = "keypos_off";
      break;
    case AblationAxis::normalizer_on_off:
      a.train.normalize = true;
      b.train.normalize = false;
      a.label = "normalizer_on";
      b.label = "normalizer_off";
      break;
    case AblationAxis::loss_all_vs_missing:
      a.train.missing_only_loss = false;
      b.train.missing_only_loss = true;
      a.label = "loss_all";
      b.label = "loss_missing";
      break;
  }
  return {a, b};
}

AblationResult run_ablation(const AblationSpec& spec, const std::vector<data::AnimationClip>& train_clips,
                            const std::vector<data::AnimationClip>& test_clips, std::ostream* log) {
  if (spec.seeds.empty()) throw EvalError("ablation needs at least one seed");
  auto [arm_a, arm_b] = ablation_arms(spec.axis, spec.base);
  AblationResult result;
  result.axis = spec.axis;
  result.label_a = arm_a.label;
  result.label_b = arm_b.label;

  const auto& bt = spec.base.train;
  const auto base_windows = data::slice_corpus(train_clips, bt.window_length(), bt.window_offset, bt.context);
  if (base_windows.empty()) throw EvalError("ablation base configuration yields no windows");
  PositionStats stats = fit_position_stats(train_clips, base_windows);
  train::round_to_float(stats);

  for (const auto seed : spec.seeds) {
    AblationRun run;
    run.seed = seed;
    for (ArmConfig* arm : {&arm_a, &arm_b}) {
      arm->train.seed = seed;
      if (log != nullptr) *log << "ablation " << to_string(spec.axis) << " arm " << arm->label << " seed " << seed << '\n';
      const auto trained = train::train(arm->train, arm->model, arm->features, train_clips, nullptr);
      auto report = run_benchmark(&trained.bundle, test_clips, spec.bench, stats);
      report.metadata["arm"] = arm->label;
      report.metadata["windows"] = std::to_string(trained.window_count);
      (arm == &arm_a ? result.windows_a : result.windows_b) = trained.window_count;
      (arm == &arm_a ? run.a : run.b) = std::move(report);
    }
    result.runs.push_back(std::move(run));
  }

  if (spec.axis == AblationAxis::keypos_on_off) {
    bool degraded = false;
    for (const int m : spec.bench.lengths) {
      if (m <= spec.base.train.m_max) continue;
      double on = 0.0, off = 0.0;
      for (const auto& run : result.runs) {
        on += run.a.at(m).model->l2p;
        off += run.b.at(m).model->l2p;
      }
      degraded = degraded || on > off;
    }
    result.extrapolation_degraded = degraded;
  }
  return result;
}

void write_ablation_csv(std::ostream& out, const AblationResult& r) {
  out << "# axis " << to_string(r.axis) << ": a = " << r.label_a << ", b = " << r.label_b << '\n';
  out << "seed,length,metric,a,b,delta\n";
  struct Metric {
    const char* name;
    double MethodScores::*field;
  };
  const Metric metrics[] = {{"l2p", &MethodScores::l2p}, {"l2q", &MethodScores::l2q}, {"npss", &MethodScores::npss}};
  for (const auto& run : r.runs) {
    for (const auto& row : run.a.rows) {
      const auto& other = run.b.at(row.missing);
      for (const auto& m : metrics) {
        const double a = (*row.model).*(m.field);
        const double b = (*other.model).*(m.field);
        out << run.seed << ',' << row.missing << ',' << m.name << ',' << num(a) << ',' << num(b) << ',' << num(b - a)
            << '\n';
      }
    }
  }
  if (!r.runs.empty()) {
    out << "# sign counts over " << r.runs.size() << " seeds (delta > 0 / delta < 0)\n";
    out << "length,metric,positive,negative\n";
    for (const auto& row : r.runs.front().a.rows) {
      for (const auto& m : metrics) {
        int pos = 0, neg = 0;
        for (const auto& run : r.runs) {
          const double d = (*run.b.at(row.missing).model).*(m.field) - (*run.a.at(row.missing).model).*(m.field);
          pos += d > 0 ? 1 : 0;
          neg += d < 0 ? 1 : 0;
        }
        out << row.missing << ',' << m.name << ',' << pos << ',' << neg << '\n';
      }
    }
  }
  if (r.axis == AblationAxis::offset5_vs_20) {
    out << "windows," << r.windows_a << ',' << r.windows_b << ','
        << num(r.windows_b == 0 ? 0.0 : static_cast<double>(r.windows_a) / static_cast<double>(r.windows_b)) << '\n';
  }
  if (r.extrapolation_degraded) {
    out << "extrapolation_degraded," << (*r.extrapolation_degraded ? "true" : "false") << '\n';
  }
}

}  // namespace tween::eval
