#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace twin_ident;

namespace {

const TriMesh& box_mesh() {
  static const TriMesh m = make_box({0.12, 0.08, 0.05});
  return m;
}

const PDParams& unit_pd() {
  static const PDParams p{VecX::Ones(1), VecX::Ones(1), VecX::Ones(1)};
  return p;
}

Scenario slide_scenario(Rng& rng) {
  Scenario sc;
  sc.control.dt = 1e-3;
  sc.control.initial_positions = VecX::Zero(1);
  sc.control.initial_velocities = VecX::Zero(1);
  sc.control.targets.assign(20, VecX::Zero(1));
  sc.hit_step = 20;
  sc.hit.contact_point = Vec2(-0.06, uniform(rng, -0.02, 0.02));
  sc.hit.direction = Vec2::UnitX();
  sc.hit.ee_speed = uniform(rng, 0.8, 2.0);
  sc.hit.ee_effective_mass = 2.0;
  sc.object_initial = {uniform(rng, -0.2, 0.2), uniform(rng, -0.2, 0.2), uniform(rng, -3, 3)};
  sc.max_duration = 0.5;
  sc.object_stride = 20;
  return sc;
}

std::vector<ObjectEpisode> make_episodes(const ObjectPhysics& truth, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ObjectEpisode> eps;
  for (std::size_t i = 0; i < n; ++i) {
    const Scenario sc = slide_scenario(rng);
    eps.push_back({simulate_episode(sc, unit_pd(), truth, box_mesh()).object, sc});
  }
  return eps;
}

SwarmConfig small_swarm(std::uint64_t seed) {
  SwarmConfig cfg;
  cfg.particles = 24;
  cfg.iterations = 80;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST(IdentifyObject, RecoversSyntheticGroundTruth) {
  const ObjectPhysics truth{0.3, 0.5, Vec2(0.01, -0.02)};
  const auto eps = make_episodes(truth, 4, 11);
  const PointCloud pts = sample_surface(box_mesh(), 128, 0);
  const ObjectModel model(box_mesh());
  const auto id = identify_object(eps, box_mesh(), pts, unit_pd(), default_object_bounds(model), small_swarm(1));
  EXPECT_LT(id.trace.best_loss, 1e-3);
  EXPECT_NEAR(id.physics.friction / truth.friction, 1.0, 0.05);
  EXPECT_LT((id.physics.com_offset - truth.com_offset).norm(), 5e-3);
  for (std::size_t i = 1; i < id.trace.history.size(); ++i) ASSERT_LE(id.trace.history[i], id.trace.history[i - 1]);
}

TEST(IdentifyObject, TightBoxBeatsGrid) {
  const ObjectPhysics truth{0.3, 0.5, Vec2(0.01, -0.02)};
  auto eps = make_episodes(truth, 2, 12);
  Rng noise(3);
  for (auto& ep : eps) {
    ep.real = cli::add_pose_noise(ep.real, 2e-3, 0.0, noise);
  }
  const PointCloud pts = sample_surface(box_mesh(), 64, 0);
  const ParamBounds box({0.28, 0.45, 0.005, -0.025}, {0.33, 0.55, 0.015, -0.015});
  const auto id = identify_object(eps, box_mesh(), pts, unit_pd(), box, small_swarm(2));

  const ObjectObjective objective(eps, box_mesh(), pts, unit_pd());
  double grid_best = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c)
        for (int d = 0; d < 3; ++d) {
          const int idx[4] = {a, b, c, d};
          std::vector<double> x(4);
          for (int k = 0; k < 4; ++k) x[k] = box.lower[k] + 0.5 * idx[k] * box.range(k);
          grid_best = std::min(grid_best, objective(x));
        }
  EXPECT_LE(id.trace.best_loss, grid_best);
  EXPECT_TRUE(box.contains(id.trace.best_params));
}

TEST(IdentifyObject, SelfIdentificationAtBoxCenter) {
  const ParamBounds box({0.2, 0.4, -0.01, -0.01}, {0.6, 1.2, 0.01, 0.01});
  const auto c = box.center();
  const auto eps = make_episodes(object_physics_from(c), 3, 13);
  SwarmConfig cfg = small_swarm(4);
  cfg.iterations = 5;
  const auto id = identify_object(eps, box_mesh(), sample_surface(box_mesh(), 256, 1), unit_pd(), box, cfg);
  EXPECT_LE(id.trace.best_loss, 1e-9);
}

TEST(IdentifyObject, Errors) {
  const auto eps = make_episodes({0.3, 0.5, Vec2::Zero()}, 1, 14);
  const PointCloud pts = sample_surface(box_mesh(), 32, 0);
  const SwarmConfig cfg = small_swarm(0);
  EXPECT_THROW(identify_object(eps, box_mesh(), pts, unit_pd(), ParamBounds({{0.1, 0.5}, {0.1, 1.0}}), cfg),
               InvalidInput);
  EXPECT_THROW(identify_object(eps, box_mesh(), pts, unit_pd(),
                               ParamBounds({0.1, 0.1, -0.2, 0.0}, {0.5, 1.0, 0.2, 0.0}), cfg),
               InvalidInput);
  EXPECT_THROW(identify_object({}, box_mesh(), pts, unit_pd(), default_object_bounds(ObjectModel(box_mesh())), cfg),
               InvalidInput);
  EXPECT_THROW(identify_object(eps, box_mesh(), {}, unit_pd(), default_object_bounds(ObjectModel(box_mesh())), cfg),
               InvalidInput);
}

TEST(ObjectObjective, SumsEpisodes) {
  const ObjectPhysics truth{0.3, 0.5, Vec2::Zero()};
  const auto eps = make_episodes(truth, 3, 15);
  const PointCloud pts = sample_surface(box_mesh(), 64, 0);
  const ObjectObjective all(eps, box_mesh(), pts, unit_pd());
  const ObjectPhysics guess{0.4, 0.6, Vec2(0.01, 0.0)};
  double sum = 0.0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const ObjectObjective one(std::span<const ObjectEpisode>(eps).subspan(i, 1), box_mesh(), pts, unit_pd());
    sum += one.loss(guess);
  }
  EXPECT_EQ(all.loss(guess), sum);
  EXPECT_EQ(all.loss(truth), 0.0);
}

// --- Robot -----------------------------------------------------------------

namespace {

ControlSequence robot_control(std::size_t joints, std::uint64_t seed, std::size_t steps = 400) {
  Rng rng(seed);
  ControlSequence c;
  c.dt = 1e-3;
  c.initial_positions = VecX::Zero(static_cast<Eigen::Index>(joints));
  c.initial_velocities = VecX::Zero(static_cast<Eigen::Index>(joints));
  VecX target = VecX::Zero(static_cast<Eigen::Index>(joints));
  for (std::size_t i = 0; i < steps; ++i) {
    if (i % 100 == 0) {
      for (Eigen::Index j = 0; j < target.size(); ++j) target[j] = uniform(rng, -1.0, 1.0);
    }
    c.targets.push_back(target);
  }
  return c;
}

PDParams robot_truth(std::size_t joints) {
  const auto n = static_cast<Eigen::Index>(joints);
  return {VecX::Constant(n, 80.0), VecX::Constant(n, 12.0), VecX::Constant(n, 0.9)};
}

ParamBounds pinned_inertia_bounds() { return ParamBounds({1.0, 0.1, 0.9}, {500.0, 100.0, 0.9}); }

}  // namespace

TEST(IdentifyRobot, RecoversGainsWithPinnedInertia) {
  std::vector<RobotEpisode> eps;
  for (std::uint64_t s = 0; s < 2; ++s) {
    const auto c = robot_control(2, s);
    eps.push_back({simulate_pd(robot_truth(2), c), c});
  }
  SwarmConfig cfg;
  cfg.seed = 7;
  const auto id = identify_robot(eps, pinned_inertia_bounds(), cfg);
  for (Eigen::Index j = 0; j < 2; ++j) {
    EXPECT_NEAR(id.params.kp[j] / 80.0, 1.0, 0.02);
    EXPECT_NEAR(id.params.kd[j] / 12.0, 1.0, 0.02);
    EXPECT_EQ(id.params.inertia[j], 0.9);
  }
  EXPECT_LT(id.loss, 1e-6);
  EXPECT_EQ(id.per_joint.size(), 2u);
}

TEST(IdentifyRobot, NoiseFloorBound) {
  const auto c = robot_control(1, 5);
  const auto clean = simulate_pd(robot_truth(1), c);
  Rng rng(8);
  std::vector<JointSample> noisy;
  for (const auto& s : clean) noisy.push_back({s.time, s.positions + VecX::Constant(1, 1e-3 * standard_normal(rng)), s.velocities});
  const std::vector<RobotEpisode> eps{{JointTrajectory(noisy), c}};
  SwarmConfig cfg;
  cfg.seed = 9;
  const auto id = identify_robot(eps, pinned_inertia_bounds(), cfg);
  EXPECT_LE(id.loss, robot_loss(robot_truth(1), c, eps[0].real) + 1e-3);
}

TEST(IdentifyRobot, DegenerateBoxReturnsThePoint) {
  const auto c = robot_control(1, 6, 200);
  const std::vector<RobotEpisode> eps{{simulate_pd(robot_truth(1), c), c}};
  SwarmConfig cfg;
  cfg.particles = 4;
  cfg.iterations = 3;
  const PDParams p{VecX::Constant(1, 50.0), VecX::Constant(1, 5.0), VecX::Constant(1, 1.2)};
  const auto id = identify_robot(eps, ParamBounds({50.0, 5.0, 1.2}, {50.0, 5.0, 1.2}), cfg);
  EXPECT_EQ(id.params, p);
  EXPECT_EQ(id.loss, robot_loss(p, c, eps[0].real));
}

TEST(IdentifyRobot, Errors) {
  const auto c1 = robot_control(1, 1, 100);
  const auto c2 = robot_control(2, 1, 100);
  const std::vector<RobotEpisode> mixed{{simulate_pd(robot_truth(1), c1), c1}, {simulate_pd(robot_truth(2), c2), c2}};
  EXPECT_THROW(identify_robot(mixed, pinned_inertia_bounds(), SwarmConfig{}), InvalidInput);
  const std::vector<RobotEpisode> two{{simulate_pd(robot_truth(2), c2), c2}};
  EXPECT_THROW(identify_robot(two, ParamBounds({1, 1, 1, 1}, {2, 2, 2, 2}), SwarmConfig{}), InvalidInput);
  EXPECT_THROW(identify_robot(two, ParamBounds({0, 1, 1}, {2, 2, 2}), SwarmConfig{}), InvalidInput);
  EXPECT_THROW(identify_robot({}, pinned_inertia_bounds(), SwarmConfig{}), InvalidInput);
  const std::vector<RobotEpisode> short_real{{simulate_pd(robot_truth(1), robot_control(1, 1, 90)), c1}};
  EXPECT_THROW(identify_robot(short_real, pinned_inertia_bounds(), SwarmConfig{}), InvalidInput);
}
