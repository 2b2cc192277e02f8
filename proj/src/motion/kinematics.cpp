#include "tween/motion/kinematics.hpp"

namespace tween::motion {

void Skeleton::validate() const {
  const std::size_t j = parents.size();
  if (j < 2) {
    throw MotionError("skeleton needs at least 2 joints, got " + std::to_string(j));
  }
  if (rest_offsets.size() != j || (!joint_names.empty() && joint_names.size() != j)) {
    throw MotionError("skeleton field sizes disagree");
  }
  if (parents[0] != -1) {
    throw MotionError("skeleton joint 0 must be the root (parent -1)");
  }
  for (std::size_t i = 1; i < j; ++i) {
    if (parents[i] < 0 || parents[i] >= static_cast<int>(i)) {
      throw MotionError("skeleton joint " + std::to_string(i) + " has invalid parent " +
                        std::to_string(parents[i]));
    }
  }
  for (const auto& o : rest_offsets) {
    if (!o.allFinite()) throw MotionError("skeleton rest offset is not finite");
  }
  if (!forward_axis.allFinite() || forward_axis.norm() < 1e-9) {
    throw MotionError("skeleton forward axis is degenerate");
  }
}

bool Skeleton::same_topology(const Skeleton& other) const {
  return parents == other.parents;
}

LocalPose identity_pose(const Skeleton& s) {
  LocalPose p;
  p.root_world_pos = s.rest_offsets[0];
  p.local_rot.assign(s.joint_count(), Quat::Identity());
  return p;
}

WorldPose forward_kinematics(const Skeleton& s, const LocalPose& p) {
  const std::size_t j = s.joint_count();
  if (p.local_rot.size() != j) {
    throw MotionError("forward_kinematics: pose has " + std::to_string(p.local_rot.size()) +
                      " rotations, skeleton has " + std::to_string(j) + " joints");
  }
  WorldPose w;
  w.pos.resize(j);
  w.rot.resize(j);
  w.pos[0] = p.root_world_pos;
  w.rot[0] = p.local_rot[0];
  for (std::size_t i = 1; i < j; ++i) {
    const auto parent = static_cast<std::size_t>(s.parents[i]);
    w.rot[i] = w.rot[parent] * p.local_rot[i];
    w.pos[i] = w.pos[parent] + w.rot[parent] * s.rest_offsets[i];
  }
  return w;
}

LocalPose local_from_world(const Skeleton& s, const WorldPose& world) {
  const std::size_t j = s.joint_count();
  if (world.rot.size() != j || world.pos.size() != j) {
    throw MotionError("local_from_world: joint count mismatch");
  }
  LocalPose p;
  p.root_world_pos = world.pos[0];
  p.local_rot.resize(j);
  p.local_rot[0] = world.rot[0].normalized();
  for (std::size_t i = 1; i < j; ++i) {
    const auto parent = static_cast<std::size_t>(s.parents[i]);
    p.local_rot[i] = (world.rot[parent].conjugate() * world.rot[i]).normalized();
  }
  return p;
}

}  // namespace tween::motion
