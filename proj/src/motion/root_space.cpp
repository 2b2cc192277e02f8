#include "tween/motion/root_space.hpp"

#include <cmath>

namespace tween::motion {

double hip_yaw(const Skeleton& s, const Quat& hip_world_rot, long frame) {
  const Vec3 forward = hip_world_rot * s.forward_axis.normalized();
  const double fx = forward.x();
  const double fz = forward.z();
  if (std::hypot(fx, fz) < 1e-6) {
    throw MotionError("hip heading is vertical, yaw undefined at frame " + std::to_string(frame));
  }
  return std::atan2(fx, fz);
}

RootSpacePose to_root_space(const Skeleton& s, const WorldPose& world, long frame) {
  const std::size_t j = s.joint_count();
  if (world.pos.size() != j || world.rot.size() != j) {
    throw MotionError("to_root_space: joint count mismatch");
  }
  for (std::size_t i = 0; i < j; ++i) {
    if (!world.pos[i].allFinite() || !is_finite(world.rot[i])) {
      throw MotionError("to_root_space: non-finite transform at frame " + std::to_string(frame));
    }
  }
  const double yaw = hip_yaw(s, world.rot[0], frame);
  const Mat3 inv_yaw = yaw_matrix(-yaw);
  const Vec3 root(world.pos[0].x(), 0.0, world.pos[0].z());

  RootSpacePose r;
  r.root_pos_xz = Vec2(root.x(), root.z());
  r.root_yaw_cs = Vec2(std::cos(yaw), std::sin(yaw));
  r.joint_pos.resize(j);
  r.joint_rot.resize(j);
  for (std::size_t i = 0; i < j; ++i) {
    r.joint_pos[i] = inv_yaw * (world.pos[i] - root);
    r.joint_rot[i] = rot6d_from_matrix(inv_yaw * world.rot[i].toRotationMatrix());
  }
  // The hip sits exactly above the projected root.
  r.joint_pos[0].x() = 0.0;
  r.joint_pos[0].z() = 0.0;
  return r;
}

LocalPose root_space_to_local(const Skeleton& s, const RootSpacePose& r) {
  const std::size_t j = s.joint_count();
  if (r.joint_pos.size() != j || r.joint_rot.size() != j) {
    throw MotionError("root_space_to_local: joint count mismatch");
  }
  const double yn = r.root_yaw_cs.norm();
  if (!(yn > 1e-9)) {
    throw MotionError("root_space_to_local: degenerate yaw channel");
  }
  const double yaw = std::atan2(r.root_yaw_cs.y() / yn, r.root_yaw_cs.x() / yn);
  const Mat3 rot = yaw_matrix(yaw);
  const Vec3 root(r.root_pos_xz.x(), 0.0, r.root_pos_xz.y());

  WorldPose world;
  world.pos.resize(j);
  world.rot.resize(j);
  for (std::size_t i = 0; i < j; ++i) {
    const Mat3 m = rot * rot6d_to_matrix(r.joint_rot[i]);
    const double ortho = (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (!(ortho < 1e-6) || std::abs(m.determinant() - 1.0) > 1e-6) {
      throw MotionError("root_space_to_local: joint " + std::to_string(i) +
                        " rotation is not orthonormal after reconstruction");
    }
    world.rot[i] = Quat(m).normalized();
    world.pos[i] = rot * r.joint_pos[i] + root;
  }
  return local_from_world(s, world);
}

RootSpacePose root_space_from_local(const Skeleton& s, const LocalPose& p, long frame) {
  return to_root_space(s, forward_kinematics(s, p), frame);
}

VelocityFeatures velocity_between(const RootSpacePose& previous, const RootSpacePose& current,
                                  double fps) {
  const std::size_t j = current.joint_pos.size();
  if (previous.joint_pos.size() != j || current.joint_rot.size() != j ||
      previous.joint_rot.size() != j) {
    throw MotionError("velocity_between: joint count mismatch");
  }
  VelocityFeatures v;
  v.root_lin = (current.root_pos_xz - previous.root_pos_xz) * fps;
  const Vec2& a = previous.root_yaw_cs;
  const Vec2& b = current.root_yaw_cs;
  // cos/sin of (yaw_b - yaw_a)
  v.root_ang = Vec2(b.x() * a.x() + b.y() * a.y(), b.y() * a.x() - b.x() * a.y());
  v.joint_lin.resize(j);
  v.joint_ang.resize(j);
  for (std::size_t i = 0; i < j; ++i) {
    v.joint_lin[i] = (current.joint_pos[i] - previous.joint_pos[i]) * fps;
    const Mat3 r0 = rot6d_to_matrix(previous.joint_rot[i]);
    const Mat3 r1 = rot6d_to_matrix(current.joint_rot[i]);
    v.joint_ang[i] = rot6d_from_matrix(r1 * r0.transpose());
  }
  return v;
}

std::vector<VelocityFeatures> finite_velocities(const std::vector<RootSpacePose>& seq, double fps) {
  if (seq.size() < 2) {
    throw MotionError("finite_velocities: need at least 2 frames, got " +
                      std::to_string(seq.size()));
  }
  std::vector<VelocityFeatures> out(seq.size());
  for (std::size_t t = 1; t < seq.size(); ++t) {
    out[t] = velocity_between(seq[t - 1], seq[t], fps);
  }
  out[0] = out[1];
  return out;
}

}  // namespace tween::motion
