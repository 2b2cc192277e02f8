#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace tween::motion {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

// Raised for invalid rotations, degenerate kinematic states and shape
// mismatches in the motion layer.
class MotionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Continuous 6D rotation: the first two columns of a rotation matrix.
struct Rot6D {
  Vec3 a1 = Vec3::UnitX();
  Vec3 a2 = Vec3::UnitY();
};

inline constexpr double kUnitNormTolerance = 1e-6;

Rot6D rot6d_from_quat(const Quat& q);
Rot6D rot6d_from_matrix(const Mat3& m);

// Gram-Schmidt reconstruction. Throws MotionError naming the offending
// column when a1 is zero or a2 is (numerically) parallel to a1.
Mat3 rot6d_to_matrix(const Rot6D& r);

// Shorter-arc spherical interpolation; t = 0 and t = 1 return the inputs
// unchanged.
Quat quat_slerp(const Quat& q0, const Quat& q1, double t);

// Rotation about +y by `yaw` radians.
Quat quat_from_yaw(double yaw);
Mat3 yaw_matrix(double yaw);

// Flips q onto the hemisphere of `reference`.
Quat align_hemisphere(const Quat& q, const Quat& reference);

bool is_finite(const Quat& q);
void require_unit(const Quat& q, const char* what);

// Flattened accessors used by the feature layouts.
inline void write_rot6d(const Rot6D& r, double* out) {
  out[0] = r.a1.x();
  out[1] = r.a1.y();
  out[2] = r.a1.z();
  out[3] = r.a2.x();
  out[4] = r.a2.y();
  out[5] = r.a2.z();
}

inline Rot6D read_rot6d(const double* in) {
  return Rot6D{Vec3(in[0], in[1], in[2]), Vec3(in[3], in[4], in[5])};
}

}  // namespace tween::motion
