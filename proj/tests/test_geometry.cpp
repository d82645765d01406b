#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "raymem/geometry.hpp"
#include "raymem/rng.hpp"

#include <cmath>
#include <vector>

using namespace raymem;

namespace {

Pose random_pose(SplitMix64& rng, double max_angle = 3.0, double max_trans = 5.0) {
  const Vec3 axis(rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian());
  const double angle = rng.next_double() * max_angle;
  const Vec3 t((2.0 * rng.next_double() - 1.0) * max_trans,
               (2.0 * rng.next_double() - 1.0) * max_trans,
               (2.0 * rng.next_double() - 1.0) * max_trans);
  return Pose(Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis.normalized())), t);
}

double pose_distance(const Pose& a, const Pose& b) {
  const Pose d = compose(inverse(a), b);
  return d.translation().norm() + d.rotation_angle();
}

}  // namespace

TEST_CASE("unit direction normalizes and rejects zero") {
  const UnitDir d(Vec3(3.0, 0.0, 0.0));
  CHECK(d.vec().norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(UnitDir(Vec3::Zero()), std::invalid_argument);

  SplitMix64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const UnitDir r(Vec3(rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian()));
    CHECK(std::abs(r.vec().norm() - 1.0) < 1e-9);
    const UnitDir rotated = rotate_dir(random_pose(rng), r);
    CHECK(std::abs(rotated.vec().norm() - 1.0) < 1e-9);
  }
}

TEST_CASE("compose identity and inverse cases") {
  SplitMix64 rng(12);
  const Pose p = random_pose(rng);
  CHECK(pose_distance(compose(Pose(), p), p) < 1e-12);
  CHECK(pose_distance(compose(p, inverse(p)), Pose()) < 1e-9);
}

TEST_CASE("compose matches hand-multiplied matrices") {
  const Pose a(Eigen::Quaterniond(Eigen::AngleAxisd(M_PI / 2.0, Vec3::UnitZ())),
               Vec3(1.0, 0.0, 0.0));
  const Pose b = Pose::rotation_z(M_PI / 2.0);
  const Pose c = compose(a, b);
  CHECK(pose_distance(c, Pose(Eigen::Quaterniond(Eigen::AngleAxisd(M_PI, Vec3::UnitZ())),
                              Vec3(1.0, 0.0, 0.0))) < 1e-12);
}

TEST_CASE("compose is associative on random triples") {
  SplitMix64 rng(13);
  for (int i = 0; i < 300; ++i) {
    const Pose a = random_pose(rng), b = random_pose(rng), c = random_pose(rng);
    CHECK(pose_distance(compose(compose(a, b), c), compose(a, compose(b, c))) < 1e-9);
  }
}

TEST_CASE("inverse of elementary poses") {
  CHECK(pose_distance(inverse(Pose()), Pose()) < 1e-15);
  CHECK(pose_distance(inverse(Pose::from_translation(Vec3(1, 2, 3))),
                      Pose::from_translation(Vec3(-1, -2, -3))) < 1e-15);
  CHECK(pose_distance(inverse(Pose::rotation_z(M_PI / 2.0)), Pose::rotation_z(-M_PI / 2.0)) <
        1e-12);
}

TEST_CASE("transform_point basics") {
  CHECK((transform_point(Pose(), Vec3(1, 2, 3)) - Vec3(1, 2, 3)).norm() == 0.0);
  CHECK((transform_point(Pose::from_translation(Vec3(0, 0, 5)), Vec3(1, 1, 1)) - Vec3(1, 1, 6))
            .norm() < 1e-15);
  CHECK((transform_point(Pose::rotation_z(M_PI / 2.0), Vec3(1, 0, 0)) - Vec3(0, 1, 0)).norm() <
        1e-9);
}

TEST_CASE("rotate_dir basics") {
  const UnitDir x(Vec3(1, 0, 0));
  CHECK((rotate_dir(Pose(), x).vec() - x.vec()).norm() == 0.0);
  CHECK((rotate_dir(Pose::rotation_z(M_PI / 2.0), x).vec() - Vec3(0, 1, 0)).norm() < 1e-12);
  CHECK((rotate_dir(Pose::rotation_z(M_PI), UnitDir(Vec3(0, 1, 0))).vec() - Vec3(0, -1, 0))
            .norm() < 1e-12);
}

TEST_CASE("log and exp map basics") {
  const Twist zero = log_map(Pose());
  CHECK(zero.rho.norm() == doctest::Approx(0.0));
  CHECK(zero.phi.norm() == doctest::Approx(0.0));

  const Pose p = exp_map(Twist{Vec3(1, 0, 0), Vec3::Zero()});
  CHECK(pose_distance(p, Pose::from_translation(Vec3(1, 0, 0))) < 1e-15);

  CHECK_THROWS_WITH_AS(log_map(Pose::rotation_z(M_PI - 1e-9)),
                       doctest::Contains("log singularity"), std::domain_error);
}

TEST_CASE("exp/log round-trip on 1000 random poses") {
  SplitMix64 rng(14);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Pose p = random_pose(rng, 3.0);
    worst = std::max(worst, pose_distance(exp_map(log_map(p)), p));
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("rigid_align recovers exact transforms") {
  const std::vector<Vec3> cube = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};

  SUBCASE("src equals dst") {
    CHECK(pose_distance(rigid_align(cube, cube), Pose()) < 1e-9);
  }
  SUBCASE("rotation plus translation, noiseless") {
    const Pose truth(Eigen::Quaterniond(Eigen::AngleAxisd(M_PI / 2.0, Vec3::UnitZ())),
                     Vec3(1, 0, 0));
    std::vector<Vec3> dst;
    for (const Vec3& p : cube) dst.push_back(transform_point(truth, p));
    CHECK(pose_distance(rigid_align(cube, dst), truth) < 1e-9);
  }
}

TEST_CASE("rigid_align on noisy correspondences, seeded") {
  SplitMix64 rng(4242);
  const Pose truth = random_pose(rng, 1.0, 2.0);
  std::vector<Vec3> src, dst;
  for (int i = 0; i < 100; ++i) {
    const Vec3 p(rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian());
    src.push_back(p);
    dst.push_back(transform_point(truth, p) +
                  0.01 * Vec3(rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian()));
  }
  const Pose fit = rigid_align(src, dst);
  CHECK((fit.translation() - truth.translation()).norm() < 0.01);
}

TEST_CASE("rigid_align rejects degenerate sets") {
  const std::vector<Vec3> two = {{0, 0, 0}, {1, 0, 0}};
  CHECK_THROWS_WITH_AS(rigid_align(two, two), doctest::Contains("degenerate"),
                       std::invalid_argument);
  const std::vector<Vec3> collinear = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
  CHECK_THROWS_WITH_AS(rigid_align(collinear, collinear), doctest::Contains("degenerate"),
                       std::invalid_argument);
}

TEST_CASE("rigid_align is inverse-consistent on noiseless data") {
  SplitMix64 rng(15);
  for (int trial = 0; trial < 50; ++trial) {
    const Pose truth = random_pose(rng, 2.0, 3.0);
    std::vector<Vec3> src, dst;
    for (int i = 0; i < 12; ++i) {
      const Vec3 p(rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian());
      src.push_back(p);
      dst.push_back(transform_point(truth, p));
    }
    const Pose fwd = rigid_align(src, dst);
    const Pose bwd = rigid_align(dst, src);
    CHECK(pose_distance(bwd, inverse(fwd)) < 1e-8);
  }
}

TEST_CASE("se3 right jacobian inverse matches finite differences") {
  SplitMix64 rng(16);
  for (int trial = 0; trial < 40; ++trial) {
    Vec6 xi;
    for (int i = 0; i < 6; ++i) xi(i) = 0.3 * rng.next_gaussian();
    const Pose base = exp_map(vec_to_twist(xi));
    const Mat6 analytic = se3_right_jacobian_inverse(xi);

    const double eps = 1e-6;
    for (int col = 0; col < 6; ++col) {
      Vec6 delta = Vec6::Zero();
      delta(col) = eps;
      const Vec6 plus = twist_to_vec(log_map(compose(base, exp_map(vec_to_twist(delta)))));
      const Vec6 minus = twist_to_vec(log_map(compose(base, exp_map(vec_to_twist(-delta)))));
      const Vec6 numeric = (plus - minus) / (2.0 * eps);
      CHECK((numeric - analytic.col(col)).norm() < 1e-5);
    }
  }
}
