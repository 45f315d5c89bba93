#pragma once

// Control-Hit-Slide simulator: PD-controlled joints, a point-contact impulse
// at the hit, then planar sliding of the object under Coulomb friction.

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "twin_ident/error.hpp"
#include "twin_ident/mesh.hpp"
#include "twin_ident/pose.hpp"

namespace twin_ident {

using VecX = Eigen::VectorXd;

inline constexpr double kStandardGravity = 9.81;

// ---------------------------------------------------------------------------
// Robot (Control stage)

/// Per-joint stiffness (N m/rad), damping (N m s/rad) and reflected inertia (kg m^2).
struct PDParams {
  VecX kp;
  VecX kd;
  VecX inertia;

  std::size_t joints() const { return static_cast<std::size_t>(kp.size()); }

  void validate() const {
    if (kp.size() == 0 || kd.size() != kp.size() || inertia.size() != kp.size()) {
      throw InvalidInput("PDParams: kp, kd and inertia must be non-empty with equal length");
    }
    if (!((kp.array() > 0).all() && (kd.array() > 0).all() && (inertia.array() > 0).all()) ||
        !kp.allFinite() || !kd.allFinite() || !inertia.allFinite()) {
      throw InvalidInput("PDParams: all entries must be finite and > 0");
    }
  }

  friend bool operator==(const PDParams& a, const PDParams& b) {
    return a.kp == b.kp && a.kd == b.kd && a.inertia == b.inertia;
  }
};

struct JointSample {
  double time = 0.0;
  VecX positions;
  VecX velocities;

  friend bool operator==(const JointSample& a, const JointSample& b) {
    return a.time == b.time && a.positions == b.positions && a.velocities == b.velocities;
  }
};

class JointTrajectory {
 public:
  explicit JointTrajectory(std::vector<JointSample> samples) : samples_(std::move(samples)) {
    if (samples_.empty()) throw InvalidInput("JointTrajectory: needs at least one sample");
    const auto n = samples_.front().positions.size();
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      const auto& s = samples_[i];
      if (s.positions.size() != n || s.velocities.size() != n || n == 0) {
        throw InvalidInput("JointTrajectory: inconsistent joint count at sample " + std::to_string(i));
      }
      if (i > 0 && !(s.time > samples_[i - 1].time)) {
        throw InvalidInput("JointTrajectory: times must be strictly increasing (sample " + std::to_string(i) + ")");
      }
    }
  }

  std::size_t size() const noexcept { return samples_.size(); }
  std::size_t joints() const { return static_cast<std::size_t>(samples_.front().positions.size()); }
  const JointSample& operator[](std::size_t i) const { return samples_[i]; }
  std::span<const JointSample> samples() const noexcept { return samples_; }
  auto begin() const noexcept { return samples_.begin(); }
  auto end() const noexcept { return samples_.end(); }

  friend bool operator==(const JointTrajectory&, const JointTrajectory&) = default;

 private:
  std::vector<JointSample> samples_;
};

/// Joint targets u_1..u_K replayed from an initial state at a fixed step.
struct ControlSequence {
  std::vector<VecX> targets;
  VecX initial_positions;
  VecX initial_velocities;
  double dt = 1e-3;

  std::size_t steps() const noexcept { return targets.size(); }
  std::size_t joints() const { return static_cast<std::size_t>(initial_positions.size()); }

  void validate() const {
    if (targets.empty()) throw InvalidInput("ControlSequence: needs at least one control step");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidInput("ControlSequence: dt must be > 0");
    const auto n = initial_positions.size();
    if (n == 0 || initial_velocities.size() != n) {
      throw InvalidInput("ControlSequence: initial positions/velocities must have equal non-zero length");
    }
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (targets[i].size() != n) {
        throw InvalidInput("ControlSequence: target " + std::to_string(i) + " has wrong joint count");
      }
    }
  }

  friend bool operator==(const ControlSequence& a, const ControlSequence& b) {
    return a.targets == b.targets && a.initial_positions == b.initial_positions &&
           a.initial_velocities == b.initial_velocities && a.dt == b.dt;
  }
};

/// inertia * qdd = kp (u_i - q) - kd qd per joint, semi-implicit Euler, one
/// sample per control step at t = (i + 1) dt.
inline JointTrajectory simulate_pd(const PDParams& params, const ControlSequence& control) {
  params.validate();
  control.validate();
  if (params.joints() != control.joints()) throw InvalidInput("simulate_pd: joint count mismatch");

  VecX q = control.initial_positions;
  VecX qd = control.initial_velocities;
  std::vector<JointSample> out;
  out.reserve(control.steps());
  for (std::size_t i = 0; i < control.steps(); ++i) {
    const VecX accel =
        (params.kp.cwiseProduct(control.targets[i] - q) - params.kd.cwiseProduct(qd)).cwiseQuotient(params.inertia);
    qd += control.dt * accel;
    q += control.dt * qd;
    if (!q.allFinite() || !qd.allFinite()) {
      throw NumericError("simulate_pd: state diverged at step " + std::to_string(i));
    }
    out.push_back({static_cast<double>(i + 1) * control.dt, q, qd});
  }
  return JointTrajectory(std::move(out));
}

/// Mean over steps of the Euclidean joint-position error.
inline double robot_loss(const JointTrajectory& sim, const JointTrajectory& real) {
  if (sim.size() != real.size()) {
    throw InvalidInput("robot_loss: step count mismatch (" + std::to_string(sim.size()) + " vs " +
                       std::to_string(real.size()) + ")");
  }
  if (sim.joints() != real.joints()) throw InvalidInput("robot_loss: joint count mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < sim.size(); ++i) sum += (sim[i].positions - real[i].positions).norm();
  return sum / static_cast<double>(sim.size());
}

inline double robot_loss(const PDParams& params, const ControlSequence& control, const JointTrajectory& real) {
  return robot_loss(simulate_pd(params, control), real);
}

// ---------------------------------------------------------------------------
// Object (Hit and Slide stages)

/// Identified object parameters: Coulomb friction coefficient, mass (kg) and
/// planar center-of-mass offset from the mesh centroid (m, body frame).
struct ObjectPhysics {
  double friction = 0.0;
  double mass = 1.0;
  Vec2 com_offset = Vec2::Zero();

  void validate() const {
    if (!(friction >= 0.0) || !std::isfinite(friction)) throw InvalidInput("ObjectPhysics: friction must be >= 0");
    if (!(mass > 0.0) || !std::isfinite(mass)) throw InvalidInput("ObjectPhysics: mass must be > 0");
    if (!com_offset.allFinite()) throw InvalidInput("ObjectPhysics: com_offset must be finite");
  }

  friend bool operator==(const ObjectPhysics& a, const ObjectPhysics& b) {
    return a.friction == b.friction && a.mass == b.mass && a.com_offset == b.com_offset;
  }
};

/// Geometry-derived quantities the slide model needs from the mesh.
struct ObjectModel {
  MassProperties mass_properties;
  Eigen::AlignedBox3d bounds;

  explicit ObjectModel(const TriMesh& mesh) : mass_properties(twin_ident::mass_properties(mesh)), bounds(mesh.bounds()) {}

  Vec2 centroid() const { return mass_properties.centroid.head<2>(); }

  /// COM in the body frame (planar).
  Vec2 center_of_mass(const ObjectPhysics& physics) const { return centroid() + physics.com_offset; }

  /// Yaw inertia about the shifted COM: mass * (I_zz/m about centroid + |offset|^2).
  double yaw_inertia(const ObjectPhysics& physics) const {
    return physics.mass * (mass_properties.unit_inertia(2, 2) + physics.com_offset.squaredNorm());
  }

  void check(const ObjectPhysics& physics) const {
    physics.validate();
    const Vec2 com = center_of_mass(physics);
    const double eps = 1e-12;
    if (com.x() < bounds.min().x() - eps || com.x() > bounds.max().x() + eps || com.y() < bounds.min().y() - eps ||
        com.y() > bounds.max().y() + eps) {
      throw InvalidInput("ObjectPhysics: center of mass lies outside the mesh's planar bounding box");
    }
  }
};

struct HitSpec {
  Vec2 contact_point = Vec2::Zero();  // body frame, m
  Vec2 direction = Vec2::UnitX();     // world frame, unit
  double ee_speed = 0.0;              // m/s
  double ee_effective_mass = 1.0;     // kg

  void validate() const {
    if (!contact_point.allFinite()) throw InvalidInput("HitSpec: contact_point must be finite");
    if (std::abs(direction.norm() - 1.0) > 1e-9) throw InvalidInput("HitSpec: direction must be a unit vector");
    if (!(ee_speed >= 0.0) || !std::isfinite(ee_speed)) throw InvalidInput("HitSpec: ee_speed must be >= 0");
    if (!(ee_effective_mass > 0.0) || !std::isfinite(ee_effective_mass)) {
      throw InvalidInput("HitSpec: ee_effective_mass must be > 0");
    }
  }

  friend bool operator==(const HitSpec& a, const HitSpec& b) {
    return a.contact_point == b.contact_point && a.direction == b.direction && a.ee_speed == b.ee_speed &&
           a.ee_effective_mass == b.ee_effective_mass;
  }
};

enum class FrictionDirection { velocity, hit_axis };

struct SlideConfig {
  double rest_threshold = 1e-3;  // m/s
  FrictionDirection friction_direction = FrictionDirection::velocity;
  double restitution = 0.0;
  double table_height = 0.0;  // z of the body frame while sliding

  friend bool operator==(const SlideConfig&, const SlideConfig&) = default;
};

/// Planar pose of the body frame, COM linear velocity and yaw rate.
struct SlideState {
  Vec2 position = Vec2::Zero();
  double yaw = 0.0;
  Vec2 velocity = Vec2::Zero();
  double angular_velocity = 0.0;

  bool at_rest() const { return velocity.isZero(0.0) && angular_velocity == 0.0; }
  bool finite() const {
    return position.allFinite() && std::isfinite(yaw) && velocity.allFinite() && std::isfinite(angular_velocity);
  }
  Pose pose(double height) const { return Pose::planar(position.x(), position.y(), yaw, height); }

  friend bool operator==(const SlideState& a, const SlideState& b) {
    return a.position == b.position && a.yaw == b.yaw && a.velocity == b.velocity &&
           a.angular_velocity == b.angular_velocity;
  }
};

/// Vector from the hit position to the center of mass, world frame at `yaw`.
inline Vec2 lever_arm(const HitSpec& hit, const ObjectPhysics& physics, const ObjectModel& model, double yaw) {
  return rotate2(model.center_of_mass(physics) - hit.contact_point, yaw);
}

/// Point-contact normal impulse with restitution:
/// lambda = (1 + rho) v / (1/m_ee + 1/m + (r x e)^2 / I_z), returned as lambda * e.
inline Vec2 hit_impulse(const HitSpec& hit, const ObjectPhysics& physics, const ObjectModel& model, double yaw,
                        double restitution = 0.0) {
  hit.validate();
  model.check(physics);
  const double rxe = cross2(lever_arm(hit, physics, model, yaw), hit.direction);
  const double denom = 1.0 / hit.ee_effective_mass + 1.0 / physics.mass + rxe * rxe / model.yaw_inertia(physics);
  const double lambda = (1.0 + restitution) * hit.ee_speed / denom;
  return lambda * hit.direction;
}

/// v += J / m, omega += (r x J) / I_z with r the hit-to-COM lever arm.
inline SlideState apply_impulse(SlideState state, const Vec2& impulse, const HitSpec& hit,
                                const ObjectPhysics& physics, const ObjectModel& model) {
  if (!impulse.allFinite()) throw InvalidInput("apply_impulse: impulse must be finite");
  const Vec2 r = lever_arm(hit, physics, model, state.yaw);
  state.velocity += impulse / physics.mass;
  state.angular_velocity += cross2(r, impulse) / model.yaw_inertia(physics);
  return state;
}

/// Everything the slide integrator needs, precomputed once per episode.
struct SlideBody {
  double mass = 1.0;
  double yaw_inertia = 1.0;
  Vec2 com_body = Vec2::Zero();    // COM in the body frame
  Vec2 lever_body = Vec2::Zero();  // hit position -> COM, body frame
  double friction = 0.0;

  static SlideBody make(const HitSpec& hit, const ObjectPhysics& physics, const ObjectModel& model) {
    return {physics.mass, model.yaw_inertia(physics), model.center_of_mass(physics),
            model.center_of_mass(physics) - hit.contact_point, physics.friction};
  }
};

struct SlideStep {
  SlideState state;
  double moving_time = 0.0;  // seconds of the step spent in motion (may exceed dt on a rest snap)
  bool stopped = false;      // came to rest during this step
};

/// One step of
///   dv/dt = -mu g e,   I_z domega/dt = r x (-mu m g e).
/// Velocity and yaw rate are updated first; the COM advances with the mean
/// of the old and new velocity and yaw with the new rate. A step whose
/// deceleration would reverse the motion stops at the zero crossing; below
/// the rest threshold the remaining constant-deceleration travel and turn are
/// taken analytically and the body is put at rest.
inline SlideStep step_slide(const SlideState& state, const SlideBody& body, const Vec2& hit_direction,
                            double gravity, double dt, const SlideConfig& config = {}) {
  if (!(dt > 0.0)) throw InvalidInput("step_slide: dt must be > 0");
  SlideStep out{state, 0.0, false};
  const double speed = state.velocity.norm();
  if (speed == 0.0) {
    out.state.velocity.setZero();
    out.state.angular_velocity = 0.0;
    out.stopped = state.angular_velocity != 0.0;
    return out;
  }

  Vec2 e = hit_direction;
  double along = state.velocity.dot(hit_direction);  // speed along the friction axis
  if (config.friction_direction == FrictionDirection::velocity) {
    e = state.velocity / speed;
    along = speed;
  }
  const double decel = body.friction * gravity;

  double move = dt;
  Vec2 v_new = state.velocity - decel * dt * e;
  if (decel > 0.0 && along <= decel * dt) {
    move = along / decel;  // zero crossing inside the step
    v_new = state.velocity - along * e;
    out.stopped = true;
  }

  const Vec2 r = rotate2(body.lever_body, state.yaw);
  const double torque = cross2(r, -body.friction * body.mass * gravity * e);
  double omega_new = state.angular_velocity + torque / body.yaw_inertia * move;

  const Vec2 com = state.position + rotate2(body.com_body, state.yaw);
  Vec2 com_new = com + 0.5 * (state.velocity + v_new) * move;
  double yaw_new = state.yaw + omega_new * move;
  out.moving_time = move;

  if (!out.stopped && v_new.norm() < config.rest_threshold) {
    const double residual = v_new.norm();
    if (decel > 0.0) {
      const double tail = residual / decel;
      com_new += v_new * (0.5 * tail);
      yaw_new += (omega_new + 0.5 * torque / body.yaw_inertia * tail) * tail;
      out.moving_time += tail;
    }
    out.stopped = true;
  }
  if (out.stopped) {
    v_new.setZero();
    omega_new = 0.0;
  }

  out.state.velocity = v_new;
  out.state.angular_velocity = omega_new;
  out.state.yaw = wrap_angle(yaw_new);
  out.state.position = com_new - rotate2(body.com_body, out.state.yaw);
  return out;
}

struct SlideResult {
  PoseTrajectory trajectory;   // sample 0 at the hit, then one per step until rest
  SlideState final_state;
  Vec2 impulse = Vec2::Zero();
  bool came_to_rest = false;
  double stop_time = std::numeric_limits<double>::infinity();  // seconds after the hit
};

/// Apply the hit impulse to a resting object and integrate the slide until
/// it stops or `max_duration` elapses. Sample times start at `start_time`.
inline SlideResult simulate_slide(const SlideState& initial, const ObjectPhysics& physics, const ObjectModel& model,
                                  const HitSpec& hit, double gravity, double dt, double max_duration,
                                  const SlideConfig& config = {}, double start_time = 0.0) {
  if (!(dt > 0.0)) throw InvalidInput("simulate_slide: dt must be > 0");
  if (!(max_duration >= 0.0)) throw InvalidInput("simulate_slide: max_duration must be >= 0");
  const Vec2 impulse = hit_impulse(hit, physics, model, initial.yaw, config.restitution);
  SlideState state = apply_impulse(initial, impulse, hit, physics, model);
  const SlideBody body = SlideBody::make(hit, physics, model);

  std::vector<PoseSample> samples;
  samples.push_back({start_time, state.pose(config.table_height)});
  const auto steps = static_cast<std::size_t>(std::llround(max_duration / dt));
  bool rest = state.velocity.isZero(0.0);
  double stop_time = rest ? 0.0 : std::numeric_limits<double>::infinity();
  if (rest) state.angular_velocity = 0.0;
  for (std::size_t i = 0; i < steps && !rest; ++i) {
    const SlideStep step = step_slide(state, body, hit.direction, gravity, dt, config);
    if (!step.state.finite()) throw NumericError("simulate_slide: state diverged at step " + std::to_string(i));
    state = step.state;
    samples.push_back({start_time + static_cast<double>(i + 1) * dt, state.pose(config.table_height)});
    if (step.stopped) {
      rest = true;
      stop_time = static_cast<double>(i) * dt + step.moving_time;
    }
  }
  return {PoseTrajectory(std::move(samples)), state, impulse, rest, stop_time};
}

// ---------------------------------------------------------------------------
// Full episode

struct PlanarPose {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;

  friend bool operator==(const PlanarPose&, const PlanarPose&) = default;
};

struct Scenario {
  ControlSequence control;
  std::size_t hit_step = 0;  // the hit happens after this many control steps
  HitSpec hit;
  PlanarPose object_initial;
  double gravity = kStandardGravity;
  double max_duration = 1.0;      // slide duration after the hit, s
  std::size_t object_stride = 1;  // record the object every n integration steps
  SlideConfig slide;

  double dt() const { return control.dt; }
  double hit_time() const { return static_cast<double>(hit_step) * control.dt; }

  void validate() const {
    control.validate();
    hit.validate();
    if (hit_step > control.steps()) throw InvalidInput("Scenario: hit_step exceeds control step count");
    if (!(gravity > 0.0) || !std::isfinite(gravity)) throw InvalidInput("Scenario: gravity must be > 0");
    if (!(max_duration >= 0.0) || !std::isfinite(max_duration)) throw InvalidInput("Scenario: max_duration must be >= 0");
    if (object_stride == 0) throw InvalidInput("Scenario: object_stride must be >= 1");
    if (!(slide.rest_threshold >= 0.0)) throw InvalidInput("Scenario: rest_threshold must be >= 0");
    if (!(slide.restitution >= 0.0 && slide.restitution <= 1.0)) {
      throw InvalidInput("Scenario: restitution must lie in [0, 1]");
    }
  }

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

struct EpisodeOptions {
  /// Optional forward-kinematics hook: end-effector speed at the hit from
  /// the simulated joints. Unset means the HitSpec speed is used verbatim.
  std::function<double(const JointTrajectory&, std::size_t hit_step)> ee_speed_from_joints;
};

struct Episode {
  JointTrajectory joints;
  PoseTrajectory object;
};

/// Object trajectory recorded every `object_stride` steps from the hit until
/// hit_time + max_duration; the rest pose is held once the object stops.
inline PoseTrajectory simulate_object_stage(const Scenario& scenario, const ObjectPhysics& physics,
                                            const ObjectModel& model, const HitSpec& hit) {
  const SlideState initial{{scenario.object_initial.x, scenario.object_initial.y},
                           wrap_angle(scenario.object_initial.yaw), Vec2::Zero(), 0.0};
  const double t0 = scenario.hit_time();
  const SlideResult slide = simulate_slide(initial, physics, model, hit, scenario.gravity, scenario.dt(),
                                           scenario.max_duration, scenario.slide, t0);
  const auto steps = static_cast<std::size_t>(std::llround(scenario.max_duration / scenario.dt()));
  std::vector<PoseSample> out;
  out.reserve(steps / scenario.object_stride + 1);
  for (std::size_t i = 0; i <= steps; i += scenario.object_stride) {
    const auto& src = slide.trajectory[std::min(i, slide.trajectory.size() - 1)];
    out.push_back({t0 + static_cast<double>(i) * scenario.dt(), src.pose});
  }
  return PoseTrajectory(std::move(out));
}

inline Episode simulate_episode(const Scenario& scenario, const PDParams& pd, const ObjectPhysics& physics,
                                const ObjectModel& model, const EpisodeOptions& options = {}) {
  scenario.validate();
  model.check(physics);
  JointTrajectory joints = simulate_pd(pd, scenario.control);
  HitSpec hit = scenario.hit;
  if (options.ee_speed_from_joints) hit.ee_speed = options.ee_speed_from_joints(joints, scenario.hit_step);
  PoseTrajectory object = simulate_object_stage(scenario, physics, model, hit);
  return {std::move(joints), std::move(object)};
}

inline Episode simulate_episode(const Scenario& scenario, const PDParams& pd, const ObjectPhysics& physics,
                                const TriMesh& mesh, const EpisodeOptions& options = {}) {
  return simulate_episode(scenario, pd, physics, ObjectModel(mesh), options);
}

}  // namespace twin_ident
