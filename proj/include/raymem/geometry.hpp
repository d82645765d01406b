#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace raymem {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Unit-norm direction vector. Normalized at construction; rejects
/// near-zero input so downstream dot products stay meaningful.
class UnitDir {
 public:
  UnitDir() : v_(1.0, 0.0, 0.0) {}
  explicit UnitDir(const Vec3& v);

  const Vec3& vec() const { return v_; }
  double dot(const UnitDir& other) const { return v_.dot(other.v_); }

 private:
  Vec3 v_;
};

/// se(3) tangent coordinates: rho = translational part, phi = rotational
/// part in radians.
struct Twist {
  Vec3 rho{Vec3::Zero()};
  Vec3 phi{Vec3::Zero()};
};

/// Rigid-body transform. Rotation is kept as a unit quaternion and
/// renormalized on composition, so long pose chains do not drift off
/// the SO(3) manifold.
class Pose {
 public:
  Pose() : q_(Eigen::Quaterniond::Identity()), t_(Vec3::Zero()) {}
  Pose(const Eigen::Quaterniond& q, const Vec3& t);

  /// Builds from a rotation matrix; the matrix must be orthonormal with
  /// det +1 within 1e-9.
  static Pose from_matrix(const Mat3& rotation, const Vec3& translation);
  static Pose from_translation(const Vec3& t) { return Pose(Eigen::Quaterniond::Identity(), t); }
  static Pose rotation_z(double angle_rad);
  static Pose rotation_axis(const Vec3& axis, double angle_rad);

  const Eigen::Quaterniond& rotation() const { return q_; }
  Mat3 rotation_matrix() const { return q_.toRotationMatrix(); }
  const Vec3& translation() const { return t_; }

  /// Rotation angle in [0, pi].
  double rotation_angle() const;

 private:
  Eigen::Quaterniond q_;
  Vec3 t_;
};

/// a then-applied-after b: (a∘b)(x) = a(b(x)).
Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& p);
Vec3 transform_point(const Pose& p, const Vec3& x);
UnitDir rotate_dir(const Pose& p, const UnitDir& r);

/// Throws if the rotation angle is within 1e-6 of pi (log singularity).
Twist log_map(const Pose& p);
Pose exp_map(const Twist& t);

/// Closed-form least-squares rigid alignment (SVD of the cross-covariance
/// with determinant sign fix, no scale). Returns the pose P minimizing
/// sum ||P*src[i] - dst[i]||^2. Throws on fewer than 3 points or a
/// rank-deficient correspondence set.
Pose rigid_align(std::span<const Vec3> src, std::span<const Vec3> dst);

Mat3 skew(const Vec3& v);

/// Adjoint of SE(3) in [rho, phi] ordering: [[R, skew(t)R], [0, R]].
Mat6 adjoint(const Pose& p);

/// Inverse right Jacobian of SE(3) at xi = [rho, phi], via the Bernoulli
/// series in ad(xi). Accurate to ~1e-9 for |xi| up to ~1.5.
Mat6 se3_right_jacobian_inverse(const Vec6& xi);

inline Vec6 twist_to_vec(const Twist& t) {
  Vec6 v;
  v << t.rho, t.phi;
  return v;
}

inline Twist vec_to_twist(const Vec6& v) {
  return Twist{v.head<3>(), v.tail<3>()};
}

}  // namespace raymem
