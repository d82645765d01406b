#include "raymem/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace raymem {

namespace {

constexpr double kSmallAngle = 1e-10;

// Rodrigues formula for SO(3).
Mat3 so3_exp(const Vec3& phi) {
  const double theta = phi.norm();
  if (theta < kSmallAngle) {
    return Mat3::Identity() + skew(phi);
  }
  const Mat3 K = skew(phi / theta);
  return Mat3::Identity() + std::sin(theta) * K + (1.0 - std::cos(theta)) * K * K;
}

// V matrix of the SE(3) exponential: t = V * rho.
Mat3 se3_left_v(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 K = skew(phi);
  if (theta < kSmallAngle) {
    return Mat3::Identity() + 0.5 * K;
  }
  const double t2 = theta * theta;
  return Mat3::Identity() + (1.0 - std::cos(theta)) / t2 * K +
         (theta - std::sin(theta)) / (t2 * theta) * K * K;
}

Mat3 se3_left_v_inverse(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 K = skew(phi);
  if (theta < kSmallAngle) {
    return Mat3::Identity() - 0.5 * K;
  }
  const double t2 = theta * theta;
  const double coeff = 1.0 / t2 - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  return Mat3::Identity() - 0.5 * K + coeff * K * K;
}

}  // namespace

UnitDir::UnitDir(const Vec3& v) {
  const double n = v.norm();
  if (!(n > 1e-12) || !std::isfinite(n)) {
    throw std::invalid_argument("UnitDir: zero or non-finite direction");
  }
  v_ = v / n;
}

Pose::Pose(const Eigen::Quaterniond& q, const Vec3& t) : q_(q.normalized()), t_(t) {}

Pose Pose::from_matrix(const Mat3& rotation, const Vec3& translation) {
  const double ortho_err = (rotation.transpose() * rotation - Mat3::Identity()).norm();
  if (ortho_err > 1e-6 || rotation.determinant() < 0.0) {
    throw std::invalid_argument("Pose: rotation matrix not orthonormal with det +1");
  }
  return Pose(Eigen::Quaterniond(rotation), translation);
}

Pose Pose::rotation_z(double angle_rad) {
  return Pose(Eigen::Quaterniond(Eigen::AngleAxisd(angle_rad, Vec3::UnitZ())), Vec3::Zero());
}

Pose Pose::rotation_axis(const Vec3& axis, double angle_rad) {
  return Pose(Eigen::Quaterniond(Eigen::AngleAxisd(angle_rad, axis.normalized())), Vec3::Zero());
}

double Pose::rotation_angle() const {
  const double w = std::abs(q_.w());
  const double v = q_.vec().norm();
  return 2.0 * std::atan2(v, w);
}

Pose compose(const Pose& a, const Pose& b) {
  // Quaternion product is renormalized inside the Pose constructor.
  return Pose(a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation());
}

Pose inverse(const Pose& p) {
  const Eigen::Quaterniond qi = p.rotation().conjugate();
  return Pose(qi, -(qi * p.translation()));
}

Vec3 transform_point(const Pose& p, const Vec3& x) {
  return p.rotation() * x + p.translation();
}

UnitDir rotate_dir(const Pose& p, const UnitDir& r) {
  return UnitDir(p.rotation() * r.vec());
}

Twist log_map(const Pose& p) {
  const double angle = p.rotation_angle();
  if (angle > M_PI - 1e-6) {
    throw std::domain_error("log_map: rotation near log singularity");
  }
  Eigen::AngleAxisd aa(p.rotation());
  const Vec3 phi = aa.angle() * aa.axis();
  return Twist{se3_left_v_inverse(phi) * p.translation(), phi};
}

Pose exp_map(const Twist& t) {
  const Mat3 R = so3_exp(t.phi);
  return Pose(Eigen::Quaterniond(R), se3_left_v(t.phi) * t.rho);
}

Pose rigid_align(std::span<const Vec3> src, std::span<const Vec3> dst) {
  if (src.size() != dst.size()) {
    throw std::invalid_argument("rigid_align: size mismatch");
  }
  if (src.size() < 3) {
    throw std::invalid_argument("rigid_align: degenerate correspondence set");
  }
  const double n = static_cast<double>(src.size());
  Vec3 c_src = Vec3::Zero();
  Vec3 c_dst = Vec3::Zero();
  for (size_t i = 0; i < src.size(); ++i) {
    c_src += src[i];
    c_dst += dst[i];
  }
  c_src /= n;
  c_dst /= n;

  Mat3 cross = Mat3::Zero();
  for (size_t i = 0; i < src.size(); ++i) {
    cross += (src[i] - c_src) * (dst[i] - c_dst).transpose();
  }

  Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  // Rank must be at least 2, otherwise rotation about the point line is
  // unobservable.
  if (sv(1) < 1e-9 * std::max(1.0, sv(0))) {
    throw std::invalid_argument("rigid_align: degenerate correspondence set");
  }
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  const Mat3 R = svd.matrixV() * d * svd.matrixU().transpose();
  return Pose(Eigen::Quaterniond(R), c_dst - R * c_src);
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

Mat6 adjoint(const Pose& p) {
  const Mat3 R = p.rotation_matrix();
  Mat6 ad = Mat6::Zero();
  ad.block<3, 3>(0, 0) = R;
  ad.block<3, 3>(0, 3) = skew(p.translation()) * R;
  ad.block<3, 3>(3, 3) = R;
  return ad;
}

Mat6 se3_right_jacobian_inverse(const Vec6& xi) {
  Mat6 ad = Mat6::Zero();
  const Mat3 phi_hat = skew(xi.tail<3>());
  ad.block<3, 3>(0, 0) = phi_hat;
  ad.block<3, 3>(0, 3) = skew(xi.head<3>());
  ad.block<3, 3>(3, 3) = phi_hat;

  // Jr^{-1}(xi) = Jl^{-1}(-xi) = sum_n (B_n/n!) (-ad(-xi))^n expanded with
  // Bernoulli numbers; odd terms beyond n=1 vanish.
  const Mat6 ad2 = ad * ad;
  const Mat6 ad4 = ad2 * ad2;
  const Mat6 ad6 = ad4 * ad2;
  const Mat6 ad8 = ad4 * ad4;
  return Mat6::Identity() + 0.5 * ad + (1.0 / 12.0) * ad2 - (1.0 / 720.0) * ad4 +
         (1.0 / 30240.0) * ad6 - (1.0 / 1209600.0) * ad8;
}

}  // namespace raymem
