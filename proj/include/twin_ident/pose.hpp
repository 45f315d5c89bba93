#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Geometry>

#include "twin_ident/error.hpp"

namespace twin_ident {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

/// 2-D cross product (z component).
inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

inline Vec2 rotate2(const Vec2& v, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::remainder(a, two_pi);  // [-pi, pi]
  if (a <= -std::numbers::pi) a += two_pi;
  return a;
}

/// Rigid transform x -> R x + t. The quaternion is kept unit-norm with
/// w >= 0 (ties broken on x, y, z) so equal rotations serialize identically.
class Pose {
 public:
  Pose() = default;

  Pose(const Quat& rotation, const Vec3& translation) : q_(rotation), t_(translation) {
    const double n = q_.norm();
    if (!std::isfinite(n) || n == 0.0 || !t_.allFinite()) {
      throw InvalidInput("Pose: rotation must be a finite non-zero quaternion and translation finite");
    }
    // already-unit input is kept as is, so write/read round trips are exact
    if (std::abs(n - 1.0) > 4.0 * std::numeric_limits<double>::epsilon()) q_.coeffs() /= n;
    canonicalize();
  }

  static Pose identity() { return {}; }

  static Pose from_translation(const Vec3& t) { return {Quat::Identity(), t}; }

  /// Rotation given as a rotation vector (axis * angle, rad).
  static Pose from_rotation_vector(const Vec3& rotvec, const Vec3& t = Vec3::Zero()) {
    const double angle = rotvec.norm();
    if (angle == 0.0) return {Quat::Identity(), t};
    return {Quat(Eigen::AngleAxisd(angle, rotvec / angle)), t};
  }

  /// Pose on a horizontal plane: yaw about +z, z fixed at `height`.
  static Pose planar(double x, double y, double yaw, double height = 0.0) {
    return {Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ())), Vec3(x, y, height)};
  }

  const Quat& rotation() const noexcept { return q_; }
  const Vec3& translation() const noexcept { return t_; }
  Mat3 rotation_matrix() const { return q_.toRotationMatrix(); }

  Pose operator*(const Pose& other) const { return {q_ * other.q_, t_ + q_ * other.t_}; }

  Vec3 operator*(const Vec3& point) const { return q_ * point + t_; }

  Pose inverse() const {
    const Quat qi = q_.conjugate();
    return {qi, -(qi * t_)};
  }

  /// Rotation vector (axis * angle) of the rotation part, angle in [0, pi].
  Vec3 rotation_vector() const {
    const Eigen::AngleAxisd aa(q_);
    return aa.axis() * aa.angle();
  }

  friend bool operator==(const Pose& a, const Pose& b) {
    return a.q_.coeffs() == b.q_.coeffs() && a.t_ == b.t_;
  }

 private:
  void canonicalize() {
    auto& c = q_.coeffs();  // x, y, z, w
    const double lead[] = {c.w(), c.x(), c.y(), c.z()};
    for (double v : lead) {
      if (v > 0.0) return;
      if (v < 0.0) {
        c = -c;
        return;
      }
    }
  }

  Quat q_ = Quat::Identity();
  Vec3 t_ = Vec3::Zero();
};

/// Geodesic angle (rad) between the rotations of two poses.
inline double rotation_angle_between(const Pose& a, const Pose& b) {
  // atan2 form stays accurate near zero, where acos of the dot product does not
  const Quat d = a.rotation().conjugate() * b.rotation();
  return 2.0 * std::atan2(d.vec().norm(), std::abs(d.w()));
}

inline double translation_distance(const Pose& a, const Pose& b) {
  return (a.translation() - b.translation()).norm();
}

struct PoseSample {
  double time = 0.0;
  Pose pose;

  friend bool operator==(const PoseSample&, const PoseSample&) = default;
};

/// Time-stamped pose sequence; times strictly increasing, at least one sample.
class PoseTrajectory {
 public:
  explicit PoseTrajectory(std::vector<PoseSample> samples) : samples_(std::move(samples)) {
    if (samples_.empty()) throw InvalidInput("PoseTrajectory: needs at least one sample");
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      if (!std::isfinite(samples_[i].time)) throw InvalidInput("PoseTrajectory: non-finite time");
      if (i > 0 && !(samples_[i].time > samples_[i - 1].time)) {
        throw InvalidInput("PoseTrajectory: times must be strictly increasing (sample " +
                           std::to_string(i) + ")");
      }
    }
  }

  std::size_t size() const noexcept { return samples_.size(); }
  const PoseSample& operator[](std::size_t i) const { return samples_[i]; }
  const PoseSample& front() const { return samples_.front(); }
  const PoseSample& back() const { return samples_.back(); }
  std::span<const PoseSample> samples() const noexcept { return samples_; }
  auto begin() const noexcept { return samples_.begin(); }
  auto end() const noexcept { return samples_.end(); }

  std::vector<double> times() const {
    std::vector<double> out;
    out.reserve(samples_.size());
    for (const auto& s : samples_) out.push_back(s.time);
    return out;
  }

  friend bool operator==(const PoseTrajectory&, const PoseTrajectory&) = default;

 private:
  std::vector<PoseSample> samples_;
};

/// Pick, for every requested time, the sample with the nearest timestamp
/// (earlier sample on ties). No interpolation.
inline PoseTrajectory resample_nearest(const PoseTrajectory& source, std::span<const double> times) {
  std::vector<PoseSample> out;
  out.reserve(times.size());
  const auto samples = source.samples();
  for (double t : times) {
    auto it = std::lower_bound(samples.begin(), samples.end(), t,
                               [](const PoseSample& s, double v) { return s.time < v; });
    std::size_t idx;
    if (it == samples.end()) {
      idx = samples.size() - 1;
    } else if (it == samples.begin()) {
      idx = 0;
    } else {
      idx = static_cast<std::size_t>(it - samples.begin());
      if (t - samples[idx - 1].time <= it->time - t) --idx;
    }
    out.push_back({t, samples[idx].pose});
  }
  return PoseTrajectory(std::move(out));
}

}  // namespace twin_ident
