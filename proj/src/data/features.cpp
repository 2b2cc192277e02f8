#include "tween/data/features.hpp"

#include <algorithm>
#include <cmath>

namespace tween::data {

using motion::Quat;
using motion::Vec3;

FillMode fill_mode_from_string(const std::string& s) {
  if (s == "zeros") return FillMode::zeros;
  if (s == "slerp") return FillMode::slerp;
  throw DataError("unknown fill mode '" + s + "' (expected zeros or slerp)");
}

PoseSpace pose_space_from_string(const std::string& s) {
  if (s == "root") return PoseSpace::root;
  if (s == "local") return PoseSpace::local;
  throw DataError("unknown pose space '" + s + "' (expected root or local)");
}

std::string to_string(FillMode m) { return m == FillMode::zeros ? "zeros" : "slerp"; }
std::string to_string(PoseSpace p) { return p == PoseSpace::root ? "root" : "local"; }

std::vector<std::size_t> FeatureLayout::pose_columns() const {
  std::vector<std::size_t> cols;
  cols.reserve(output_dim());
  for (std::size_t c = 0; c < 4; ++c) cols.push_back(c);
  for (std::size_t c = 0; c < 9 * joints; ++c) cols.push_back(joint_pos() + c);
  return cols;
}

std::vector<std::size_t> FeatureLayout::velocity_columns() const {
  std::vector<std::size_t> cols;
  if (!velocity) return cols;
  for (std::size_t c = 4; c < 8; ++c) cols.push_back(c);
  for (std::size_t c = 0; c < 9 * joints; ++c) cols.push_back(joint_lin_vel() + c);
  return cols;
}

RootSpacePose pose_features(const Skeleton& s, const LocalPose& p, PoseSpace space, long frame) {
  RootSpacePose r = motion::root_space_from_local(s, p, frame);
  if (space == PoseSpace::local) {
    r.joint_pos = s.rest_offsets;
    r.joint_pos[0] = p.root_world_pos;
    for (std::size_t i = 0; i < s.joint_count(); ++i) {
      r.joint_rot[i] = motion::rot6d_from_quat(p.local_rot[i].normalized());
    }
  }
  return r;
}

LocalPose decode_pose(const Skeleton& s, const RootSpacePose& r, PoseSpace space) {
  if (space == PoseSpace::root) return motion::root_space_to_local(s, r);
  const std::size_t j = s.joint_count();
  if (r.joint_pos.size() != j || r.joint_rot.size() != j) {
    throw DataError("decode_pose: joint count mismatch");
  }
  LocalPose p;
  p.root_world_pos = r.joint_pos[0];
  p.local_rot.resize(j);
  for (std::size_t i = 0; i < j; ++i) {
    p.local_rot[i] = Quat(motion::rot6d_to_matrix(r.joint_rot[i])).normalized();
  }
  return p;
}

void write_pose(const RootSpacePose& r, const FeatureLayout& layout, double* row) {
  row[0] = r.root_pos_xz.x();
  row[1] = r.root_pos_xz.y();
  row[2] = r.root_yaw_cs.x();
  row[3] = r.root_yaw_cs.y();
  double* pos = row + layout.joint_pos();
  double* rot = row + layout.joint_rot();
  for (std::size_t i = 0; i < layout.joints; ++i) {
    for (int k = 0; k < 3; ++k) pos[3 * i + k] = r.joint_pos[i][k];
    motion::write_rot6d(r.joint_rot[i], rot + 6 * i);
  }
}

void write_velocity(const VelocityFeatures& v, const FeatureLayout& layout, double* row) {
  if (!layout.velocity) return;
  row[4] = v.root_lin.x();
  row[5] = v.root_lin.y();
  row[6] = v.root_ang.x();
  row[7] = v.root_ang.y();
  double* lin = row + layout.joint_lin_vel();
  double* ang = row + layout.joint_ang_vel();
  for (std::size_t i = 0; i < layout.joints; ++i) {
    for (int k = 0; k < 3; ++k) lin[3 * i + k] = v.joint_lin[i][k];
    motion::write_rot6d(v.joint_ang[i], ang + 6 * i);
  }
}

RootSpacePose read_output_row(const double* row, std::size_t joints) {
  RootSpacePose r;
  r.root_pos_xz = motion::Vec2(row[0], row[1]);
  r.root_yaw_cs = motion::Vec2(row[2], row[3]);
  r.joint_pos.resize(joints);
  r.joint_rot.resize(joints);
  const double* pos = row + 4;
  const double* rot = row + 4 + 3 * joints;
  for (std::size_t i = 0; i < joints; ++i) {
    r.joint_pos[i] = Vec3(pos[3 * i], pos[3 * i + 1], pos[3 * i + 2]);
    r.joint_rot[i] = motion::read_rot6d(rot + 6 * i);
  }
  return r;
}

Anchor window_anchor(const AnimationClip& clip, const Window& w) {
  const std::size_t f = w.start + w.last_context();
  const auto r = motion::root_space_from_local(clip.skeleton, clip.frames.at(f),
                                               static_cast<long>(f));
  return Anchor{r.root_pos_xz, std::atan2(r.root_yaw_cs.y(), r.root_yaw_cs.x())};
}

LocalPose to_anchor_frame(const LocalPose& p, const Anchor& a) {
  LocalPose out = p;
  const Vec3 origin(a.pos_xz.x(), 0.0, a.pos_xz.y());
  out.root_world_pos = motion::yaw_matrix(-a.yaw) * (p.root_world_pos - origin);
  out.local_rot[0] = (motion::quat_from_yaw(-a.yaw) * p.local_rot[0]).normalized();
  return out;
}

LocalPose from_anchor_frame(const LocalPose& p, const Anchor& a) {
  LocalPose out = p;
  const Vec3 origin(a.pos_xz.x(), 0.0, a.pos_xz.y());
  out.root_world_pos = motion::yaw_matrix(a.yaw) * p.root_world_pos + origin;
  out.local_rot[0] = (motion::quat_from_yaw(a.yaw) * p.local_rot[0]).normalized();
  return out;
}

std::vector<LocalPose> window_poses(const AnimationClip& clip, const Window& w,
                                    std::size_t extra_before) {
  w.validate(clip.frame_count());
  if (extra_before > w.start) throw DataError("window_poses: not enough frames before window");
  const Anchor a = window_anchor(clip, w);
  std::vector<LocalPose> out;
  out.reserve(w.length() + extra_before);
  for (std::size_t f = w.start - extra_before; f < w.start + w.length(); ++f) {
    out.push_back(to_anchor_frame(clip.frames[f], a));
  }
  return out;
}

std::vector<LocalPose> slerp_frames(const LocalPose& from, const LocalPose& to, int missing) {
  if (from.local_rot.size() != to.local_rot.size()) {
    throw DataError("slerp_frames: joint count mismatch");
  }
  std::vector<LocalPose> out(static_cast<std::size_t>(std::max(missing, 0)));
  for (int k = 0; k < missing; ++k) {
    const double t = static_cast<double>(k + 1) / static_cast<double>(missing + 1);
    auto& p = out[static_cast<std::size_t>(k)];
    p.root_world_pos = (1.0 - t) * from.root_world_pos + t * to.root_world_pos;
    p.local_rot.resize(from.local_rot.size());
    for (std::size_t i = 0; i < from.local_rot.size(); ++i) {
      p.local_rot[i] = motion::quat_slerp(from.local_rot[i], to.local_rot[i], t);
    }
  }
  return out;
}

FeatureMatrix assemble_input(const Window& w, const AnimationClip& clip,
                             const FeatureOptions& options) {
  const Skeleton& s = clip.skeleton;
  const FeatureLayout layout{s.joint_count(), options.use_velocity};
  const std::size_t extra = w.start > 0 ? 1 : 0;
  const auto poses = window_poses(clip, w, extra);

  std::vector<RootSpacePose> feats;
  feats.reserve(poses.size());
  for (std::size_t f = 0; f < poses.size(); ++f) {
    feats.push_back(pose_features(s, poses[f], options.pose_space,
                                  static_cast<long>(w.start - extra + f)));
  }
  const auto vel = motion::finite_velocities(feats, clip.fps);

  FeatureMatrix m;
  m.fill = options.fill;
  m.values = Eigen::MatrixXd::Zero(static_cast<long>(w.length()),
                                   static_cast<long>(layout.input_dim()));
  m.rows.assign(w.length(), RowKind::missing);
  std::vector<double> row(layout.input_dim());

  auto emit = [&](std::size_t r, const RootSpacePose& pose, const VelocityFeatures* v) {
    std::fill(row.begin(), row.end(), 0.0);
    write_pose(pose, layout, row.data());
    if (v != nullptr) write_velocity(*v, layout, row.data());
    m.values.row(static_cast<long>(r)) =
        Eigen::Map<const Eigen::RowVectorXd>(row.data(), static_cast<long>(row.size()));
  };

  for (std::size_t r = 0; r < static_cast<std::size_t>(w.context); ++r) {
    emit(r, feats[r + extra], &vel[r + extra]);
    m.rows[r] = RowKind::context;
  }
  const std::size_t target = w.target_row();
  emit(target, feats[target + extra], nullptr);  // velocity channels stay zero
  m.rows[target] = RowKind::target;

  if (options.fill == FillMode::slerp) {
    const LocalPose& from = poses[w.last_context() + extra];
    const LocalPose& to = poses[target + extra];
    const auto interior = slerp_frames(from, to, w.missing);
    std::vector<RootSpacePose> seq;
    seq.reserve(interior.size() + 2);
    seq.push_back(feats[w.last_context() + extra]);
    for (std::size_t k = 0; k < interior.size(); ++k) {
      seq.push_back(pose_features(s, interior[k], options.pose_space));
    }
    seq.push_back(feats[target + extra]);
    const auto interp_vel = motion::finite_velocities(seq, clip.fps);
    for (std::size_t k = 0; k < interior.size(); ++k) {
      emit(static_cast<std::size_t>(w.context) + k, seq[k + 1], &interp_vel[k + 1]);
    }
  }
  return m;
}

FeatureMatrix assemble_target(const Window& w, const AnimationClip& clip, PoseSpace space) {
  const Skeleton& s = clip.skeleton;
  const FeatureLayout layout{s.joint_count(), false};
  const auto poses = window_poses(clip, w);
  FeatureMatrix m;
  m.values.resize(static_cast<long>(w.length()), static_cast<long>(layout.output_dim()));
  m.rows.assign(w.length(), RowKind::missing);
  std::vector<double> row(layout.output_dim());
  for (std::size_t f = 0; f < poses.size(); ++f) {
    write_pose(pose_features(s, poses[f], space, static_cast<long>(w.start + f)), layout,
               row.data());
    m.values.row(static_cast<long>(f)) =
        Eigen::Map<const Eigen::RowVectorXd>(row.data(), static_cast<long>(row.size()));
  }
  for (std::size_t r = 0; r < static_cast<std::size_t>(w.context); ++r) m.rows[r] = RowKind::context;
  m.rows[w.target_row()] = RowKind::target;
  return m;
}

Eigen::MatrixXd clip_features(const AnimationClip& clip, PoseSpace space) {
  clip.validate();
  const FeatureLayout layout{clip.skeleton.joint_count(), true};
  std::vector<RootSpacePose> feats;
  feats.reserve(clip.frame_count());
  for (std::size_t f = 0; f < clip.frame_count(); ++f) {
    feats.push_back(pose_features(clip.skeleton, clip.frames[f], space, static_cast<long>(f)));
  }
  const auto vel = motion::finite_velocities(feats, clip.fps);
  Eigen::MatrixXd out =
      Eigen::MatrixXd::Zero(static_cast<long>(feats.size()), static_cast<long>(layout.input_dim()));
  std::vector<double> row(layout.input_dim());
  for (std::size_t f = 0; f < feats.size(); ++f) {
    write_pose(feats[f], layout, row.data());
    write_velocity(vel[f], layout, row.data());
    out.row(static_cast<long>(f)) =
        Eigen::Map<const Eigen::RowVectorXd>(row.data(), static_cast<long>(row.size()));
  }
  return out;
}

}  // namespace tween::data
