#include "tween/train/pipeline.hpp"

namespace tween::train {

namespace {

nn::Matrix<float> row_blob(const Eigen::VectorXd& v) { return v.transpose().cast<float>(); }

Eigen::VectorXd from_blob(const std::map<std::string, nn::Matrix<float>>& extras, const std::string& name) {
  const auto it = extras.find(name);
  if (it == extras.end()) throw nn::NnError("checkpoint is missing " + name);
  return it->second.row(0).transpose().cast<double>();
}

const std::string& meta(const std::map<std::string, std::string>& m, const std::string& key) {
  const auto it = m.find(key);
  if (it == m.end()) throw nn::NnError("checkpoint metadata lacks " + key);
  return it->second;
}

}  // namespace

void round_to_float(data::Normalizer& n) {
  n.mean = n.mean.cast<float>().cast<double>();
  n.std = n.std.cast<float>().cast<double>();
}

void round_to_float(eval::PositionStats& s) {
  s.mean = s.mean.cast<float>().cast<double>();
  s.std = s.std.cast<float>().cast<double>();
}

nn::Checkpoint to_checkpoint(const ModelBundle& b) {
  nn::Checkpoint ck;
  ck.config = b.model;
  ck.params = b.params;
  ck.metadata = b.metadata;
  ck.metadata["fill"] = data::to_string(b.features.fill);
  ck.metadata["pose_space"] = data::to_string(b.features.pose_space);
  ck.metadata["use_velocity"] = b.features.use_velocity ? "true" : "false";
  ck.metadata["context"] = std::to_string(b.context);
  ck.metadata["position_stats_hash"] = b.position_stats.hash();
  ck.extras["input_norm.mean"] = row_blob(b.input_norm.mean);
  ck.extras["input_norm.std"] = row_blob(b.input_norm.std);
  ck.extras["output_norm.mean"] = row_blob(b.output_norm.mean);
  ck.extras["output_norm.std"] = row_blob(b.output_norm.std);
  ck.extras["position_stats.mean"] = row_blob(b.position_stats.mean);
  ck.extras["position_stats.std"] = row_blob(b.position_stats.std);
  return ck;
}

ModelBundle from_checkpoint(const nn::Checkpoint& ck) {
  ModelBundle b;
  b.model = ck.config;
  b.params = ck.params;
  b.metadata = ck.metadata;
  b.features.fill = data::fill_mode_from_string(meta(ck.metadata, "fill"));
  b.features.pose_space = data::pose_space_from_string(meta(ck.metadata, "pose_space"));
  b.features.use_velocity = meta(ck.metadata, "use_velocity") == "true";
  b.context = std::stoi(meta(ck.metadata, "context"));
  b.input_norm.mean = from_blob(ck.extras, "input_norm.mean");
  b.input_norm.std = from_blob(ck.extras, "input_norm.std");
  b.output_norm.mean = from_blob(ck.extras, "output_norm.mean");
  b.output_norm.std = from_blob(ck.extras, "output_norm.std");
  b.position_stats.mean = from_blob(ck.extras, "position_stats.mean");
  b.position_stats.std = from_blob(ck.extras, "position_stats.std");
  if (b.position_stats.hash() != meta(ck.metadata, "position_stats_hash")) {
    throw nn::NnError("checkpoint position statistics do not match their recorded hash");
  }
  if (b.input_norm.dim() != static_cast<std::size_t>(b.model.d_in) ||
      b.output_norm.dim() != static_cast<std::size_t>(b.model.d_out)) {
    throw nn::NnError("checkpoint normalizers do not match the model widths");
  }
  return b;
}

data::Normalizer fit_input_normalizer(const std::vector<AnimationClip>& clips, const std::vector<Window>& windows,
                                      const data::FeatureOptions& options, bool enabled) {
  if (windows.empty()) throw data::DataError("no training windows");
  const auto& s = clips.at(windows.front().clip).skeleton;
  const data::FeatureLayout layout{s.joint_count(), options.use_velocity};
  if (!enabled) return data::Normalizer::identity(layout.input_dim());
  std::vector<data::FeatureMatrix> inputs;
  inputs.reserve(windows.size());
  for (const auto& w : windows) inputs.push_back(data::assemble_input(w, clips.at(w.clip), options));
  return data::Normalizer::fit(inputs);
}

Sample prepare_sample(const ModelBundle& b, const AnimationClip& clip, const Window& w) {
  const auto layout = b.layout(clip.skeleton.joint_count());
  if (layout.input_dim() != static_cast<std::size_t>(b.model.d_in)) {
    throw data::DataError("skeleton with " + std::to_string(clip.skeleton.joint_count()) +
                          " joints does not match the model input width");
  }
  auto input = data::assemble_input(w, clip, b.features);
  b.input_norm.apply_input(input, layout);
  const auto target = data::assemble_target(w, clip, b.features.pose_space);
  Sample s;
  s.input = input.values.cast<float>();
  s.target = b.output_norm.apply(target.values).cast<float>();
  s.missing.resize(w.length());
  for (std::size_t r = 0; r < w.length(); ++r) s.missing[r] = input.rows[r] == data::RowKind::missing;
  return s;
}

std::vector<LocalPose> predict_window(const ModelBundle& b, const AnimationClip& clip, const Window& w) {
  const Sample s = prepare_sample(b, clip, w);
  const auto pass = nn::encoder_forward<float>(s.input, {w.context, w.missing}, b.model, b.params);
  const Eigen::MatrixXd out = b.output_norm.invert(pass.value().cast<double>());
  auto poses = data::window_poses(clip, w);
  const std::size_t joints = clip.skeleton.joint_count();
  for (int k = 0; k < w.missing; ++k) {
    const long r = w.context + k;
    const Eigen::RowVectorXd row = out.row(r);
    const auto rs = data::read_output_row(row.data(), joints);
    poses[static_cast<std::size_t>(r)] = data::decode_pose(clip.skeleton, rs, b.features.pose_space);
  }
  return poses;
}

std::vector<LocalPose> slerp_window(const AnimationClip& clip, const Window& w) {
  auto poses = data::window_poses(clip, w);
  const auto interior = data::slerp_frames(poses[w.last_context()], poses[w.target_row()], w.missing);
  for (int k = 0; k < w.missing; ++k) poses[static_cast<std::size_t>(w.context + k)] = interior[static_cast<std::size_t>(k)];
  return poses;
}

}  // namespace tween::train
