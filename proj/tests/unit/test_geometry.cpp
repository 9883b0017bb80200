#include <gtest/gtest.h>

#include <Eigen/Geometry>
#include <cmath>
#include <numbers>
#include <sstream>

#include "vsvio/errors.hpp"
#include "vsvio/geometry.hpp"
#include "vsvio/random.hpp"

using namespace vsvio;
using namespace vsvio::geo;

namespace {

// ZYX from Eigen's axis-angle products, independent of euler_to_rot.
Mat3 zyx(double roll, double pitch, double yaw) {
  return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
          Eigen::AngleAxisd(roll, Vec3::UnitX()))
      .toRotationMatrix();
}

Trajectory straight(std::size_t n, double step, double dt = 0.1) {
  Trajectory t;
  for (std::size_t i = 0; i < n; ++i) {
    Pose p;
    p.translation = Vec3(step * static_cast<double>(i), 0, 0);
    t.poses.push_back(p);
    t.timestamps.push_back(dt * static_cast<double>(i));
  }
  return t;
}

}  // namespace

TEST(Euler, MatchesAxisAngleProduct) {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    Vec3 phi(rng.uniform(-3, 3), rng.uniform(-1.5, 1.5), rng.uniform(-3, 3));
    EXPECT_LT((euler_to_rot(phi) - zyx(phi.x(), phi.y(), phi.z())).cwiseAbs().maxCoeff(), 1e-14);
    const Vec3 back = rot_to_euler(euler_to_rot(phi));
    EXPECT_LT((euler_to_rot(back) - euler_to_rot(phi)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Euler, GimbalLockIsADomainError) {
  EXPECT_THROW(rot_to_euler(zyx(0.1, std::numbers::pi / 2, 0.2)), DomainError);
}

TEST(Pose, ComposeAndRelativeAreInverse) {
  Rng rng(2);
  Pose a;
  a.rotation = zyx(0.1, -0.2, 0.3);
  a.translation = Vec3(1, 2, 3);
  RelPose t;
  t.phi = Vec3(0.01, 0.02, -0.3);
  t.v = Vec3(0.5, -0.1, 0.2);
  const Pose b = compose(a, t);
  // by hand: R' = R R_T, t' = t + R v
  EXPECT_LT((b.rotation - a.rotation * zyx(0.01, 0.02, -0.3)).norm(), 1e-14);
  EXPECT_LT((b.translation - (a.translation + a.rotation * t.v)).norm(), 1e-14);
  const RelPose r = relative(a, b);
  EXPECT_LT((r.phi - t.phi).norm(), 1e-12);
  EXPECT_LT((r.v - t.v).norm(), 1e-12);
}

TEST(Pose, AccumulateDecomposeRoundTrip) {
  Rng rng(3);
  std::vector<RelPose> rels(50);
  for (auto& r : rels) {
    r.phi = Vec3(rng.normal(0, 0.01), rng.normal(0, 0.01), rng.normal(0, 0.1));
    r.v = Vec3(rng.uniform(0, 2), rng.normal(0, 0.1), rng.normal(0, 0.01));
  }
  auto traj = accumulate(Pose::identity(), rels, 0.1);
  ASSERT_EQ(traj.poses.size(), 51u);
  EXPECT_NEAR(traj.timestamps[50], 5.0, 1e-12);
  auto back = decompose(traj);
  for (std::size_t i = 0; i < rels.size(); ++i) {
    EXPECT_LT((back[i].phi - rels[i].phi).norm(), 1e-10);
    EXPECT_LT((back[i].v - rels[i].v).norm(), 1e-10);
  }
}

TEST(Rotation, ProjectionAndOrthonormality) {
  Mat3 r = zyx(0.3, 0.2, 0.1);
  Mat3 noisy = r;
  noisy(0, 1) += 1e-4;
  EXPECT_GT(orthonormality_error(noisy), 5e-5);
  Mat3 p = project_to_rotation(noisy);
  EXPECT_LT(orthonormality_error(p), 1e-14);
  EXPECT_NEAR(p.determinant(), 1.0, 1e-14);
  EXPECT_NEAR(rotation_angle(zyx(0, 0, 0.7)), 0.7, 1e-12);
}

TEST(Rmse, ByHand) {
  std::vector<RelPose> gt(2), pred(2);
  pred[0].v = Vec3(1, 1, 1);  // sum sq 3 over 3*2 entries
  pred[1].phi = Vec3(0, 0, 0.6);
  auto r = rmse(pred, gt);
  EXPECT_NEAR(r.translation, std::sqrt(3.0 / 6.0), 1e-15);
  EXPECT_NEAR(r.rotation, std::sqrt(0.36 / 6.0), 1e-15);
}

TEST(RelErrors, ScaledStraightPathGivesTheScaleError) {
  auto gt = straight(1001, 1.0);
  auto pred = straight(1001, 1.05);
  auto e = kitti_rel_errors(pred, gt);
  ASSERT_TRUE(e);
  EXPECT_NEAR(e->t_rel, 5.0, 1e-9);
  EXPECT_NEAR(e->r_rel, 0.0, 1e-12);
  // start frames every 10, lengths 100..800 inside 1000 m
  std::size_t expected = 0;
  for (std::size_t f = 0; f <= 1000; f += 10)
    for (double len : kSegmentLengths) expected += (f + len <= 1000.0);
  EXPECT_EQ(e->segments.size(), expected);
}

TEST(RelErrors, ConstantYawBias) {
  // per-frame yaw bias b on 1 m steps: n b rad over an n-metre segment
  const double b = 1e-4;
  auto gt = straight(901, 1.0);
  std::vector<RelPose> rels(900);
  for (auto& r : rels) {
    r.v = Vec3(1, 0, 0);
    r.phi = Vec3(0, 0, b);
  }
  auto pred = accumulate(Pose::identity(), rels);
  auto e = kitti_rel_errors(pred, gt);
  ASSERT_TRUE(e);
  EXPECT_NEAR(e->r_rel, b * 180.0 / std::numbers::pi * 100.0, 1e-9);
}

TEST(RelErrors, ShortPathHasNoSegments) {
  auto gt = straight(50, 1.0);
  EXPECT_FALSE(kitti_rel_errors(gt, gt));
}

TEST(Kitti, WriteParseKeepsNineDigits) {
  Rng rng(9);
  Trajectory t;
  for (int i = 0; i < 20; ++i) {
    Pose p;
    p.rotation = zyx(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-3, 3));
    p.translation = Vec3(rng.uniform(-500, 500), rng.uniform(-500, 500), rng.uniform(-5, 5));
    t.poses.push_back(p);
    t.timestamps.push_back(0.1 * i);
  }
  auto back = parse_kitti_poses(write_kitti_poses(t));
  ASSERT_EQ(back.poses.size(), t.poses.size());
  for (std::size_t i = 0; i < t.poses.size(); ++i)
    for (int k = 0; k < 3; ++k) {
      const double x = t.poses[i].translation[k], y = back.poses[i].translation[k];
      EXPECT_LE(std::abs(x - y), 5e-9 * std::abs(x) + 1e-300);
      for (int c = 0; c < 3; ++c)
        EXPECT_LE(std::abs(t.poses[i].rotation(k, c) - back.poses[i].rotation(k, c)),
                  5e-9 * std::abs(t.poses[i].rotation(k, c)) + 1e-12);
    }
}

TEST(Kitti, ParserRejectsBadLinesWithLineNumbers) {
  try {
    parse_kitti_poses("1 0 0 0 0 1 0 0 0 0 1 0\n1 0 0 0\n");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos);
  }
  EXPECT_THROW(parse_kitti_poses("1 0 0 0 0 1 0 0 0 0 1 x\n"), FormatError);
  EXPECT_THROW(parse_kitti_poses("2 0 0 0 0 1 0 0 0 0 1 0\n"), FormatError);
}

TEST(Kitti, SegmentCsvHeader) {
  std::ostringstream os;
  write_segment_csv(os, std::vector<SegmentError>{{0, 100, 1.5, 0.2}});
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "start_frame,length_m,t_err_pct,r_err_deg_per_100m");
}
