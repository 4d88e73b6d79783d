#pragma once

#include <Eigen/Dense>

namespace leap {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Quat = Eigen::Quaterniond;

// Spatial (Plucker) vectors are stacked angular-first: [omega; v] for motion,
// [moment; force] for wrenches.

inline Mat3 skew(const Vec3& a) {
  Mat3 s;
  s << 0, -a.z(), a.y(), a.z(), 0, -a.x(), -a.y(), a.x(), 0;
  return s;
}

inline Vec6 spatial(const Vec3& ang, const Vec3& lin) {
  Vec6 out;
  out << ang, lin;
  return out;
}

// Motion-vector cross product: crm(v) m = v x m.
inline Vec6 cross_motion(const Vec6& v, const Vec6& m) {
  Vec3 w = v.head<3>(), u = v.tail<3>();
  return spatial(w.cross(m.head<3>()), w.cross(m.tail<3>()) + u.cross(m.head<3>()));
}

// Force-vector cross product: crf(v) f = v x* f.
inline Vec6 cross_force(const Vec6& v, const Vec6& f) {
  Vec3 w = v.head<3>(), u = v.tail<3>();
  return spatial(w.cross(f.head<3>()) + u.cross(f.tail<3>()), w.cross(f.tail<3>()));
}

// Coordinate transform between frames: maps A-frame coordinates to B-frame
// coordinates, where E rotates A-coordinates into B-coordinates and r is the
// position of B's origin expressed in A.
struct Transform {
  Mat3 E = Mat3::Identity();
  Vec3 r = Vec3::Zero();

  static Transform identity() { return {}; }

  Vec6 apply(const Vec6& m) const {
    Vec3 w = m.head<3>(), v = m.tail<3>();
    return spatial(E * w, E * (v - r.cross(w)));
  }
  // Inverse motion transform (B-coordinates back to A).
  Vec6 apply_inverse(const Vec6& m) const {
    Vec3 w = E.transpose() * m.head<3>();
    return spatial(w, E.transpose() * m.tail<3>() + r.cross(w));
  }
  Vec6 apply_force(const Vec6& f) const {
    Vec3 n = f.head<3>(), fl = f.tail<3>();
    return spatial(E * (n - r.cross(fl)), E * fl);
  }
  Vec6 apply_inverse_force(const Vec6& f) const {
    Vec3 fl = E.transpose() * f.tail<3>();
    return spatial(E.transpose() * f.head<3>() + r.cross(fl), fl);
  }

  // Composition: (X2 * X1) maps A -> C when X1 maps A -> B and X2 maps B -> C.
  friend Transform operator*(const Transform& x2, const Transform& x1) {
    Transform out;
    out.E = x2.E * x1.E;
    out.r = x1.r + x1.E.transpose() * x2.r;
    return out;
  }

  Transform inverse() const { return {E.transpose(), -(E * r)}; }

  Mat6 to_matrix() const {
    Mat6 x = Mat6::Zero();
    x.topLeftCorner<3, 3>() = E;
    x.bottomRightCorner<3, 3>() = E;
    x.bottomLeftCorner<3, 3>() = -E * skew(r);
    return x;
  }
};

// Rigid-body spatial inertia expressed at the body frame origin,
// parameterized by mass, first moment h = m*c, and rotational inertia about
// the frame origin.
struct SpatialInertia {
  double mass = 0.0;
  Vec3 h = Vec3::Zero();
  Mat3 I = Mat3::Zero();

  static SpatialInertia from_com(double mass, const Vec3& com, const Mat3& inertia_com) {
    SpatialInertia si;
    si.mass = mass;
    si.h = mass * com;
    Mat3 cx = skew(com);
    si.I = inertia_com - mass * cx * cx;
    return si;
  }

  Vec6 apply(const Vec6& m) const {
    Vec3 w = m.head<3>(), v = m.tail<3>();
    return spatial(I * w + h.cross(v), mass * v - h.cross(w));
  }

  Mat6 to_matrix() const {
    Mat6 out;
    out.topLeftCorner<3, 3>() = I;
    out.topRightCorner<3, 3>() = skew(h);
    out.bottomLeftCorner<3, 3>() = -skew(h);
    out.bottomRightCorner<3, 3>() = mass * Mat3::Identity();
    return out;
  }

  static SpatialInertia from_matrix(const Mat6& m) {
    SpatialInertia si;
    si.mass = m(5, 5);
    Mat3 hx = m.topRightCorner<3, 3>();
    si.h = Vec3(hx(2, 1), hx(0, 2), hx(1, 0));
    si.I = m.topLeftCorner<3, 3>();
    return si;
  }

  friend SpatialInertia operator+(const SpatialInertia& a, const SpatialInertia& b) {
    SpatialInertia out;
    out.mass = a.mass + b.mass;
    out.h = a.h + b.h;
    out.I = a.I + b.I;
    return out;
  }

  // Express this inertia (given in frame B) in frame A, where x maps A -> B.
  SpatialInertia transform_up(const Transform& x) const {
    Mat6 xm = x.to_matrix();
    return from_matrix(xm.transpose() * to_matrix() * xm);
  }
};

inline Mat3 rot_x(double a) {
  double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}
inline Mat3 rot_y(double a) {
  double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}
inline Mat3 rot_z(double a) {
  double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

// Z-Y-X convention: R = Rz(yaw) * Ry(pitch) * Rx(roll), rpy = (roll, pitch, yaw).
inline Mat3 rpy_to_rotation(const Vec3& rpy) {
  return rot_z(rpy.z()) * rot_y(rpy.y()) * rot_x(rpy.x());
}

inline Vec3 rotation_to_rpy(const Mat3& r) {
  double pitch = std::atan2(-r(2, 0), std::hypot(r(0, 0), r(1, 0)));
  double roll, yaw;
  if (std::abs(std::cos(pitch)) < 1e-10) {
    // Gimbal lock: fold yaw into roll.
    yaw = 0.0;
    roll = std::atan2(r(0, 1), r(1, 1)) * (pitch > 0 ? -1.0 : 1.0);
  } else {
    yaw = std::atan2(r(1, 0), r(0, 0));
    roll = std::atan2(r(2, 1), r(2, 2));
  }
  return {roll, pitch, yaw};
}

// Maps Z-Y-X Euler rates to world-frame angular velocity: w = E(rpy) * rpy_dot.
inline Mat3 euler_rate_to_omega_world(const Vec3& rpy) {
  Mat3 e;
  e.col(0) = rot_z(rpy.z()) * rot_y(rpy.y()) * Vec3::UnitX();
  e.col(1) = rot_z(rpy.z()) * Vec3::UnitY();
  e.col(2) = Vec3::UnitZ();
  return e;
}

inline Quat quat_exp(const Vec3& w_half) {
  double angle = w_half.norm();
  if (angle < 1e-12) return Quat(1.0, w_half.x(), w_half.y(), w_half.z()).normalized();
  Vec3 axis = w_half / angle;
  double s = std::sin(angle);
  return Quat(std::cos(angle), s * axis.x(), s * axis.y(), s * axis.z());
}

// Rotation axis-angle rotation about a unit axis.
inline Mat3 axis_rotation(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

// Log map of a rotation, as a 3-vector (axis * angle).
inline Vec3 rotation_log(const Mat3& r) {
  Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

}  // namespace leap
