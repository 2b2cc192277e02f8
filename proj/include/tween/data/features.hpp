#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tween/data/clip.hpp"
#include "tween/data/windows.hpp"
#include "tween/motion/root_space.hpp"

namespace tween::data {

using motion::RootSpacePose;
using motion::VelocityFeatures;

enum class FillMode { zeros, slerp };
enum class PoseSpace { root, local };
enum class RowKind : std::uint8_t { context, missing, target };

FillMode fill_mode_from_string(const std::string& s);
PoseSpace pose_space_from_string(const std::string& s);
std::string to_string(FillMode m);
std::string to_string(PoseSpace p);

struct FeatureOptions {
  FillMode fill = FillMode::zeros;
  bool use_velocity = true;
  PoseSpace pose_space = PoseSpace::root;
};

// Column layout of a frame:
//   root_pos(2) | root_yaw_cs(2) | [root_lin_vel(2) | root_ang_vel(2)] |
//   joint_pos(3J) | joint_rot(6J) | [joint_lin_vel(3J) | joint_ang_vel(6J)]
// The bracketed velocity blocks exist only in inputs with velocities, so
// input_dim() is 18J+8 with velocities and 9J+4 without; output_dim() is
// always 9J+4.
struct FeatureLayout {
  std::size_t joints = 0;
  bool velocity = true;

  std::size_t input_dim() const { return velocity ? 18 * joints + 8 : 9 * joints + 4; }
  std::size_t output_dim() const { return 9 * joints + 4; }

  std::size_t root_pos() const { return 0; }
  std::size_t root_yaw() const { return 2; }
  std::size_t root_lin_vel() const { return 4; }
  std::size_t root_ang_vel() const { return 6; }
  std::size_t joint_pos() const { return velocity ? 8 : 4; }
  std::size_t joint_rot() const { return joint_pos() + 3 * joints; }
  std::size_t joint_lin_vel() const { return joint_rot() + 6 * joints; }
  std::size_t joint_ang_vel() const { return joint_lin_vel() + 3 * joints; }

  // Input-layout indices of the output (pose) columns, in output order.
  std::vector<std::size_t> pose_columns() const;
  std::vector<std::size_t> velocity_columns() const;
};

struct FeatureMatrix {
  Eigen::MatrixXd values;
  std::vector<RowKind> rows;
  FillMode fill = FillMode::zeros;

  std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }
};

// Pose features of one frame in the chosen space. Local space stores the
// hip world position in joint_pos[0], rest offsets for the other joints and
// local-to-parent rotations, next to the same root trajectory channels.
RootSpacePose pose_features(const Skeleton& s, const LocalPose& p, PoseSpace space, long frame = -1);
LocalPose decode_pose(const Skeleton& s, const RootSpacePose& r, PoseSpace space);

void write_pose(const RootSpacePose& r, const FeatureLayout& layout, double* row);
void write_velocity(const VelocityFeatures& v, const FeatureLayout& layout, double* row);
// Reads a row in output layout (9J+4 columns).
RootSpacePose read_output_row(const double* row, std::size_t joints);

// Ground-plane frame of a window: the projected root of its last context
// frame. Windows are expressed in this frame so the last context frame sits
// at the origin facing +z.
struct Anchor {
  motion::Vec2 pos_xz = motion::Vec2::Zero();
  double yaw = 0.0;
};

Anchor window_anchor(const AnimationClip& clip, const Window& w);
LocalPose to_anchor_frame(const LocalPose& p, const Anchor& a);
LocalPose from_anchor_frame(const LocalPose& p, const Anchor& a);

// Frames [w.start - extra_before, w.start + w.length()) in the anchor frame.
std::vector<LocalPose> window_poses(const AnimationClip& clip, const Window& w,
                                    std::size_t extra_before = 0);

// Interior frames between `from` and `to`: frame k uses t = (k+1)/(M+1),
// root position interpolated linearly, rotations with quat_slerp.
std::vector<LocalPose> slerp_frames(const LocalPose& from, const LocalPose& to, int missing);

// Input matrix for a window: real features on context rows, the target
// frame with zeroed velocity channels, and missing rows filled per
// options.fill.
FeatureMatrix assemble_input(const Window& w, const AnimationClip& clip,
                             const FeatureOptions& options);

// Ground-truth output features (9J+4 columns) for every frame of a window.
FeatureMatrix assemble_target(const Window& w, const AnimationClip& clip,
                              PoseSpace space = PoseSpace::root);

// Whole-clip world-frame features in input layout with velocities.
Eigen::MatrixXd clip_features(const AnimationClip& clip, PoseSpace space = PoseSpace::root);

}  // namespace tween::data
