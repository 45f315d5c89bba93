#pragma once

// Simulator-in-the-loop identification of object physics and robot PD
// parameters against recorded trajectories.

#include <span>
#include <string>
#include <vector>

#include "twin_ident/dynamics.hpp"
#include "twin_ident/metrics.hpp"
#include "twin_ident/pso.hpp"

namespace twin_ident {

/// One recorded episode: observed object poses plus the scenario that produced them.
struct ObjectEpisode {
  PoseTrajectory real;
  Scenario scenario;
};

struct ObjectIdentification {
  ObjectPhysics physics;
  OptResult trace;
  std::vector<double> curvature;  // d^2 loss / d param^2 at the optimum
};

/// Parameter vector layout: friction, mass, com_offset x, com_offset y.
inline constexpr std::size_t kObjectParams = 4;

inline ObjectPhysics object_physics_from(std::span<const double> x) {
  return {x[0], x[1], Vec2(x[2], x[3])};
}

/// Bounds covering the whole planar bounding box for the COM offset.
inline ParamBounds default_object_bounds(const ObjectModel& model) {
  const Vec2 c = model.centroid();
  return {{0.0, 1.5},
          {0.05, 5.0},
          {model.bounds.min().x() - c.x(), model.bounds.max().x() - c.x()},
          {model.bounds.min().y() - c.y(), model.bounds.max().y() - c.y()}};
}

/// Sum over episodes of the ADD + ADD-S trajectory loss for one candidate.
class ObjectObjective {
 public:
  ObjectObjective(std::span<const ObjectEpisode> episodes, const TriMesh& mesh, PointCloud points,
                  const PDParams& pd, const EpisodeOptions& options = {})
      : episodes_(episodes.begin(), episodes.end()), model_(mesh), points_(std::move(points)), index_(checked(points_)) {
    if (episodes_.empty()) throw InvalidInput("identify_object: no episodes");
    hits_.reserve(episodes_.size());
    for (const auto& ep : episodes_) {
      ep.scenario.validate();
      HitSpec hit = ep.scenario.hit;
      if (options.ee_speed_from_joints) {
        // joint stage does not depend on object parameters; run it once
        const auto joints = simulate_pd(pd, ep.scenario.control);
        hit.ee_speed = options.ee_speed_from_joints(joints, ep.scenario.hit_step);
      }
      hits_.push_back(hit);
    }
  }

  double operator()(std::span<const double> x) const { return loss(object_physics_from(x)); }

  double loss(const ObjectPhysics& physics) const {
    double total = 0.0;
    for (std::size_t i = 0; i < episodes_.size(); ++i) total += episode_loss(i, physics);
    return total;
  }

  double episode_loss(std::size_t i, const ObjectPhysics& physics) const {
    return trajectory_loss(episodes_[i].real, simulate(i, physics), points_, index_);
  }

  PoseTrajectory simulate(std::size_t i, const ObjectPhysics& physics) const {
    model_.check(physics);
    return simulate_object_stage(episodes_[i].scenario, physics, model_, hits_[i]);
  }

  const ObjectModel& model() const noexcept { return model_; }
  const PointCloud& points() const noexcept { return points_; }
  const PointIndex& index() const noexcept { return index_; }
  std::size_t episodes() const noexcept { return episodes_.size(); }

 private:
  static const PointCloud& checked(const PointCloud& points) {
    if (points.empty()) throw InvalidInput("identify_object: empty model point cloud");
    return points;
  }

  std::vector<ObjectEpisode> episodes_;
  ObjectModel model_;
  PointCloud points_;
  PointIndex index_;
  std::vector<HitSpec> hits_;
};

inline void check_object_bounds(const ParamBounds& bounds, const ObjectModel& model) {
  bounds.require_arity(kObjectParams, "identify_object");
  if (bounds.lower[0] < 0.0) throw InvalidInput("identify_object: friction lower bound must be >= 0");
  if (!(bounds.lower[1] > 0.0)) throw InvalidInput("identify_object: mass lower bound must be > 0");
  const Vec2 c = model.centroid();
  const double eps = 1e-12;
  if (c.x() + bounds.lower[2] < model.bounds.min().x() - eps || c.x() + bounds.upper[2] > model.bounds.max().x() + eps ||
      c.y() + bounds.lower[3] < model.bounds.min().y() - eps || c.y() + bounds.upper[3] > model.bounds.max().y() + eps) {
    throw InvalidInput("identify_object: com_offset bounds leave the mesh's planar bounding box");
  }
}

/// Minimize the summed trajectory loss over (friction, mass, com_offset).
/// `pd` is only used when `options` configures a forward-kinematics hook.
inline ObjectIdentification identify_object(std::span<const ObjectEpisode> episodes, const TriMesh& mesh,
                                            const PointCloud& points, const PDParams& pd, const ParamBounds& bounds,
                                            const SwarmConfig& config, const EpisodeOptions& options = {}) {
  const ObjectObjective objective(episodes, mesh, points, pd, options);
  check_object_bounds(bounds, objective.model());
  ObjectIdentification out;
  // one particle starts at the center of the box, the nominal guess
  out.trace = pso_minimize(objective, bounds, config, {}, bounds.center());
  out.physics = object_physics_from(out.trace.best_params);
  out.curvature = loss_curvature(objective, out.trace.best_params, bounds);
  return out;
}

// ---------------------------------------------------------------------------

struct RobotEpisode {
  JointTrajectory real;
  ControlSequence control;
};

struct RobotIdentification {
  PDParams params;
  std::vector<OptResult> per_joint;  // one swarm run per joint (kp, kd, inertia)
  double loss = 0.0;                 // mean robot_loss over episodes at the optimum
};

/// Single-joint slice of a control sequence.
inline ControlSequence joint_slice(const ControlSequence& control, std::size_t j) {
  ControlSequence out;
  out.dt = control.dt;
  out.initial_positions = VecX::Constant(1, control.initial_positions[static_cast<Eigen::Index>(j)]);
  out.initial_velocities = VecX::Constant(1, control.initial_velocities[static_cast<Eigen::Index>(j)]);
  out.targets.reserve(control.targets.size());
  for (const auto& u : control.targets) out.targets.push_back(VecX::Constant(1, u[static_cast<Eigen::Index>(j)]));
  return out;
}

/// Fit per-joint (kp, kd, inertia). The decoupled model lets every joint be
/// optimized on its own; each joint's objective is the summed per-episode
/// mean absolute position error. `bounds` holds either 3 dimensions shared
/// by all joints or 3 per joint (joint-major).
///
/// The model is invariant to scaling kp, kd and inertia together, so
/// absolute gains are only recoverable when the inertia range is pinned.
inline RobotIdentification identify_robot(std::span<const RobotEpisode> episodes, const ParamBounds& bounds,
                                          const SwarmConfig& config) {
  if (episodes.empty()) throw InvalidInput("identify_robot: no episodes");
  const std::size_t joints = episodes.front().control.joints();
  for (const auto& ep : episodes) {
    ep.control.validate();
    if (ep.control.joints() != joints || ep.real.joints() != joints) {
      throw InvalidInput("identify_robot: joint count differs between episodes");
    }
    if (ep.real.size() != ep.control.steps()) throw InvalidInput("identify_robot: step count mismatch");
  }
  bounds.validate();
  if (bounds.size() != 3 && bounds.size() != 3 * joints) {
    throw InvalidInput("identify_robot: expected 3 or " + std::to_string(3 * joints) + " bound dimensions");
  }
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    if (!(bounds.lower[i] > 0.0)) throw InvalidInput("identify_robot: lower bounds must be > 0");
  }

  RobotIdentification out;
  out.params.kp = VecX::Zero(static_cast<Eigen::Index>(joints));
  out.params.kd = out.params.kp;
  out.params.inertia = out.params.kp;
  for (std::size_t j = 0; j < joints; ++j) {
    std::vector<ControlSequence> controls;
    std::vector<std::vector<double>> real;
    for (const auto& ep : episodes) {
      controls.push_back(joint_slice(ep.control, j));
      std::vector<double> q;
      q.reserve(ep.real.size());
      for (const auto& s : ep.real) q.push_back(s.positions[static_cast<Eigen::Index>(j)]);
      real.push_back(std::move(q));
    }
    auto objective = [&](std::span<const double> x) {
      const PDParams p{VecX::Constant(1, x[0]), VecX::Constant(1, x[1]), VecX::Constant(1, x[2])};
      double total = 0.0;
      for (std::size_t e = 0; e < controls.size(); ++e) {
        const auto sim = simulate_pd(p, controls[e]);
        double sum = 0.0;
        for (std::size_t i = 0; i < sim.size(); ++i) sum += std::abs(sim[i].positions[0] - real[e][i]);
        total += sum / static_cast<double>(sim.size());
      }
      return total;
    };
    const std::size_t off = bounds.size() == 3 ? 0 : 3 * j;
    const ParamBounds jb({bounds.lower[off], bounds.lower[off + 1], bounds.lower[off + 2]},
                         {bounds.upper[off], bounds.upper[off + 1], bounds.upper[off + 2]});
    SwarmConfig jc = config;
    jc.seed = mix_seed(config.seed, j);
    OptResult r = pso_minimize(objective, jb, jc);
    const auto idx = static_cast<Eigen::Index>(j);
    out.params.kp[idx] = r.best_params[0];
    out.params.kd[idx] = r.best_params[1];
    out.params.inertia[idx] = r.best_params[2];
    out.per_joint.push_back(std::move(r));
  }
  double total = 0.0;
  for (const auto& ep : episodes) total += robot_loss(out.params, ep.control, ep.real);
  out.loss = total / static_cast<double>(episodes.size());
  return out;
}

}  // namespace twin_ident
