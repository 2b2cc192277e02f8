#pragma once

#include <string>
#include <vector>

#include "tween/motion/rotation.hpp"

namespace tween::motion {

// Joint hierarchy. Joint 0 is the hip; parents[i] < i for every other joint.
// Offsets are in centimeters.
struct Skeleton {
  std::vector<std::string> joint_names;
  std::vector<int> parents;
  std::vector<Vec3> rest_offsets;
  // Hip-local axis whose ground projection defines the character heading.
  Vec3 forward_axis = Vec3::UnitZ();

  std::size_t joint_count() const { return parents.size(); }

  // Throws MotionError when the tree invariants do not hold.
  void validate() const;

  bool same_topology(const Skeleton& other) const;
};

// Local-to-parent pose. The root position is the hip's world position.
struct LocalPose {
  Vec3 root_world_pos = Vec3::Zero();
  std::vector<Quat> local_rot;
};

struct WorldPose {
  std::vector<Vec3> pos;
  std::vector<Quat> rot;
};

LocalPose identity_pose(const Skeleton& s);

WorldPose forward_kinematics(const Skeleton& s, const LocalPose& p);

// Inverse of forward_kinematics for rotations: local = inv(parent world) * world.
LocalPose local_from_world(const Skeleton& s, const WorldPose& world);

}  // namespace tween::motion
