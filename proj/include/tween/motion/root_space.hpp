#pragma once

#include <vector>

#include "tween/motion/kinematics.hpp"

namespace tween::motion {

// Pose expressed relative to a ground-projected, yaw-only root derived from
// the hip. The hip keeps its height inside joint_pos[0] = (0, h, 0), which
// makes the representation lossless.
struct RootSpacePose {
  Vec2 root_pos_xz = Vec2::Zero();
  Vec2 root_yaw_cs = Vec2(1.0, 0.0);  // (cos yaw, sin yaw)
  std::vector<Vec3> joint_pos;
  std::vector<Rot6D> joint_rot;
};

// Heading of the hip joint projected onto the ground. Throws MotionError
// naming `frame` when the projected heading is shorter than 1e-6.
double hip_yaw(const Skeleton& s, const Quat& hip_world_rot, long frame = -1);

RootSpacePose to_root_space(const Skeleton& s, const WorldPose& world, long frame = -1);

// Rebuilds world transforms from the root transform and recovers the
// local-to-parent rotations. The yaw channel is renormalized; joint_rot
// columns go through Gram-Schmidt.
LocalPose root_space_to_local(const Skeleton& s, const RootSpacePose& r);

// Root-space pose straight from a local pose (FK + projection).
RootSpacePose root_space_from_local(const Skeleton& s, const LocalPose& p, long frame = -1);

// Per-frame velocity channels of a pose sequence.
struct VelocityFeatures {
  Vec2 root_lin = Vec2::Zero();
  Vec2 root_ang = Vec2(1.0, 0.0);
  std::vector<Vec3> joint_lin;
  std::vector<Rot6D> joint_ang;
};

// Backward differences (linear parts scaled by fps), cosine-sine yaw deltas
// and relative joint rotations rot_t * inv(rot_{t-1}). Frame 0 copies
// frame 1. Throws MotionError for sequences shorter than 2.
std::vector<VelocityFeatures> finite_velocities(const std::vector<RootSpacePose>& seq, double fps);

// Velocity of `current` relative to `previous`.
VelocityFeatures velocity_between(const RootSpacePose& previous, const RootSpacePose& current,
                                  double fps);

}  // namespace tween::motion
