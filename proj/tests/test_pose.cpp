#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace twin_ident;
using testing_support::random_pose;

TEST(Pose, QuaternionStaysUnitUnderComposition) {
  Rng rng(11);
  Pose acc;
  for (int i = 0; i < 2000; ++i) {
    acc = acc * random_pose(rng);
    ASSERT_NEAR(acc.rotation().norm(), 1.0, 1e-9);
  }
}

TEST(Pose, ComposeWithInverseIsIdentity) {
  Rng rng(12);
  for (int i = 0; i < 1000; ++i) {
    const Pose p = random_pose(rng, 5.0);
    const Pose id = p * p.inverse();
    EXPECT_LT(rotation_angle_between(id, Pose::identity()), 1e-9);
    EXPECT_LT(id.translation().norm(), 1e-9);
  }
}

TEST(Pose, CanonicalSignHasNonNegativeW) {
  const Pose p(Quat(-0.5, 0.5, 0.5, 0.5), Vec3::Zero());
  EXPECT_EQ(p.rotation().w(), 0.5);
  EXPECT_EQ(p.rotation().x(), -0.5);
  // w == 0: the first non-zero of x, y, z decides
  const Pose q(Quat(0.0, -1.0, 0.0, 0.0), Vec3::Zero());
  EXPECT_EQ(q.rotation().x(), 1.0);
  EXPECT_EQ(p, Pose(Quat(0.5, -0.5, -0.5, -0.5), Vec3::Zero()));
}

TEST(Pose, NormalizesAndRejectsBadInput) {
  const Pose p(Quat(2.0, 0.0, 0.0, 0.0), Vec3(1, 2, 3));
  EXPECT_EQ(p.rotation().w(), 1.0);
  EXPECT_THROW(Pose(Quat(0, 0, 0, 0), Vec3::Zero()), InvalidInput);
  EXPECT_THROW(Pose(Quat::Identity(), Vec3(std::nan(""), 0, 0)), InvalidInput);
}

TEST(Pose, PlanarYawRotatesAboutZ) {
  const Pose p = Pose::planar(1.0, 2.0, std::numbers::pi / 2, 0.3);
  const Vec3 x = p * Vec3(1, 0, 0);
  EXPECT_NEAR(x.x(), 1.0, 1e-15);
  EXPECT_NEAR(x.y(), 3.0, 1e-15);
  EXPECT_NEAR(x.z(), 0.3, 1e-15);
}

TEST(Pose, RotationVectorRoundTrip) {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const Pose p = random_pose(rng);
    const Pose q = Pose::from_rotation_vector(p.rotation_vector(), p.translation());
    EXPECT_LT(rotation_angle_between(p, q), 1e-9);
  }
}

TEST(Pose, WrapAngle) {
  EXPECT_DOUBLE_EQ(wrap_angle(std::numbers::pi), std::numbers::pi);
  EXPECT_DOUBLE_EQ(wrap_angle(-std::numbers::pi), std::numbers::pi);
  EXPECT_NEAR(wrap_angle(3 * std::numbers::pi / 2), -std::numbers::pi / 2, 1e-15);
  EXPECT_NEAR(wrap_angle(0.25), 0.25, 0.0);
}

TEST(PoseTrajectory, RequiresIncreasingTimes) {
  EXPECT_THROW(PoseTrajectory({}), InvalidInput);
  EXPECT_THROW(PoseTrajectory({{0.0, Pose()}, {0.0, Pose()}}), InvalidInput);
  EXPECT_THROW(PoseTrajectory({{0.1, Pose()}, {0.0, Pose()}}), InvalidInput);
  EXPECT_NO_THROW(PoseTrajectory({{0.0, Pose()}}));
}

TEST(PoseTrajectory, ResampleNearestPrefersEarlierOnTies) {
  const PoseTrajectory src({{0.0, Pose::from_translation({0, 0, 0})},
                            {1.0, Pose::from_translation({1, 0, 0})},
                            {2.0, Pose::from_translation({2, 0, 0})}});
  const std::vector<double> times = {-1.0, 0.4, 0.5, 0.6, 1.5, 7.0};
  const auto out = resample_nearest(src, times);
  ASSERT_EQ(out.size(), times.size());
  const double expected[] = {0, 0, 0, 1, 1, 2};
  for (std::size_t i = 0; i < times.size(); ++i) {
    EXPECT_EQ(out[i].time, times[i]);
    EXPECT_EQ(out[i].pose.translation().x(), expected[i]) << i;
  }
}
