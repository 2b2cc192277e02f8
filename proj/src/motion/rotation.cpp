#include "tween/motion/rotation.hpp"

#include <cmath>

namespace tween::motion {

bool is_finite(const Quat& q) {
  return std::isfinite(q.w()) && std::isfinite(q.x()) && std::isfinite(q.y()) &&
         std::isfinite(q.z());
}

void require_unit(const Quat& q, const char* what) {
  if (!is_finite(q)) {
    throw MotionError(std::string(what) + ": non-finite quaternion");
  }
  if (std::abs(q.norm() - 1.0) > kUnitNormTolerance) {
    throw MotionError(std::string(what) + ": quaternion is not unit norm (|q| = " +
                      std::to_string(q.norm()) + ")");
  }
}

Rot6D rot6d_from_matrix(const Mat3& m) {
  return Rot6D{m.col(0), m.col(1)};
}

Rot6D rot6d_from_quat(const Quat& q) {
  require_unit(q, "rot6d_from_quat");
  return rot6d_from_matrix(q.toRotationMatrix());
}

Mat3 rot6d_to_matrix(const Rot6D& r) {
  if (!r.a1.allFinite() || !r.a2.allFinite()) {
    throw MotionError("rot6d_to_matrix: non-finite column");
  }
  const double n1 = r.a1.norm();
  if (n1 < 1e-12) {
    throw MotionError("rot6d_to_matrix: column a1 is zero");
  }
  const Vec3 b1 = r.a1 / n1;
  const Vec3 u2 = r.a2 - b1.dot(r.a2) * b1;
  const double n2 = u2.norm();
  if (n2 < 1e-9 * std::max(1.0, r.a2.norm())) {
    throw MotionError("rot6d_to_matrix: column a2 is zero or parallel to a1");
  }
  const Vec3 b2 = u2 / n2;
  Mat3 m;
  m.col(0) = b1;
  m.col(1) = b2;
  m.col(2) = b1.cross(b2);
  return m;
}

Quat quat_slerp(const Quat& q0, const Quat& q1, double t) {
  if (!is_finite(q0) || !is_finite(q1) || !std::isfinite(t)) {
    throw MotionError("quat_slerp: non-finite input");
  }
  if (t <= 0.0) return q0;
  if (t >= 1.0) return q1;

  Eigen::Vector4d a = q0.coeffs();
  Eigen::Vector4d b = q1.coeffs();
  double dot = a.dot(b);
  if (dot < 0.0) {
    b = -b;
    dot = -dot;
  }
  Eigen::Vector4d out;
  if (dot > 0.9995) {
    out = (1.0 - t) * a + t * b;
  } else {
    const double theta = std::acos(std::min(dot, 1.0));
    const double s = std::sin(theta);
    out = (std::sin((1.0 - t) * theta) / s) * a + (std::sin(t * theta) / s) * b;
  }
  out.normalize();
  Quat q;
  q.coeffs() = out;
  return q;
}

Quat quat_from_yaw(double yaw) {
  return Quat(Eigen::AngleAxisd(yaw, Vec3::UnitY()));
}

Mat3 yaw_matrix(double yaw) {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  Mat3 m;
  m << c, 0, s,
       0, 1, 0,
      -s, 0, c;
  return m;
}

Quat align_hemisphere(const Quat& q, const Quat& reference) {
  if (q.coeffs().dot(reference.coeffs()) < 0.0) {
    Quat flipped;
    flipped.coeffs() = -q.coeffs();
    return flipped;
  }
  return q;
}

}  // namespace tween::motion
