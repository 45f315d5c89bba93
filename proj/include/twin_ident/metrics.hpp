#pragma once

// ADD / ADD-S pose-distance metrics over a model point cloud and the
// trajectory objective built from them.

#include <algorithm>
#include <array>
#include <cstdint>
#include <utility>
#include <cmath>
#include <limits>
#include <vector>

#include "twin_ident/error.hpp"
#include "twin_ident/mesh.hpp"
#include "twin_ident/pose.hpp"

namespace twin_ident {

/// ADD-S switches from brute force to the grid above this many points.
inline constexpr std::size_t kAddsGridThreshold = 256;

/// Timestamps of paired samples must agree to this many seconds.
inline constexpr double kTimestampTolerance = 1e-6;

enum class NearestSearch { automatic, brute_force, grid };

namespace detail {

inline void require_points(const PointCloud& points, const char* who) {
  if (points.empty()) throw InvalidInput(std::string(who) + ": empty point cloud");
}

inline std::vector<Vec3> transformed(const Pose& pose, const PointCloud& cloud) {
  std::vector<Vec3> out;
  out.reserve(cloud.size());
  for (const auto& p : cloud.points) out.push_back(pose * p);
  return out;
}

/// Static k-d tree over a point set in its own (model) frame.
class KdTree {
 public:
  static constexpr std::size_t kLeafSize = 8;

  explicit KdTree(const std::vector<Vec3>& points) : points_(points), order_(points.size()) {
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    nodes_.reserve(2 * points.size() / kLeafSize + 1);
    build(0, order_.size());
  }

  /// Visits every point whose distance to `q` may be within `slack` of the
  /// nearest one. `visit(index, distance)` returns the best distance so far,
  /// which is used for pruning.
  template <class Visit>
  void search(const Vec3& q, double slack, Visit&& visit) const {
    double best = std::numeric_limits<double>::infinity();
    std::array<std::pair<std::uint32_t, double>, 64> stack;
    std::size_t top = 0;
    stack[top++] = {0, 0.0};
    while (top > 0) {
      const auto [n, box_dist2] = stack[--top];
      if (box_dist2 > (best + slack) * (best + slack)) continue;
      const Node& node = nodes_[n];
      if (node.left == 0) {
        double limit = (best + slack) * (best + slack);
        for (std::size_t k = node.begin; k < node.end; ++k) {
          const std::size_t i = order_[k];
          const double d2 = (q - points_[i]).squaredNorm();
          if (d2 <= limit) {
            best = std::min(best, visit(i, std::sqrt(d2)));
            limit = (best + slack) * (best + slack);
          }
        }
        continue;
      }
      const double dl = nodes_[node.left].box_distance2(q);
      const double dr = nodes_[node.right].box_distance2(q);
      // push the farther child first so the nearer one is searched first
      if (dl <= dr) {
        stack[top++] = {node.right, dr};
        stack[top++] = {node.left, dl};
      } else {
        stack[top++] = {node.left, dl};
        stack[top++] = {node.right, dr};
      }
    }
  }

 private:
  struct Node {
    Vec3 lo, hi;
    std::size_t begin = 0, end = 0;
    std::uint32_t left = 0, right = 0;  // 0 for leaves

    double box_distance2(const Vec3& q) const {
      return (q.cwiseMax(lo).cwiseMin(hi) - q).squaredNorm();
    }
  };

  std::uint32_t build(std::size_t begin, std::size_t end) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back({});
    Eigen::AlignedBox3d box;
    for (std::size_t k = begin; k < end; ++k) box.extend(points_[order_[k]]);
    nodes_[id].lo = box.min();
    nodes_[id].hi = box.max();
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    if (end - begin <= kLeafSize) return id;
    int axis;
    box.sizes().maxCoeff(&axis);
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid), order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
    const auto left = build(begin, mid);
    const auto right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  std::vector<Vec3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace detail

/// Mean distance between corresponding model points under two poses.
inline double add_metric(const Pose& pose, const Pose& other, const PointCloud& points) {
  detail::require_points(points, "add_metric");
  double sum = 0.0;
  for (const auto& x : points.points) sum += ((pose * x) - (other * x)).norm();
  return sum / static_cast<double>(points.size());
}

/// Reusable nearest-neighbour index over a model cloud for ADD-S: a k-d
/// tree plus, per point, its closest neighbours. When the query lands close
/// to point i, the triangle inequality often proves the answer is in i's
/// neighbour list and the tree is skipped.
class PointIndex {
 public:
  static constexpr std::size_t kNeighbours = 16;

  explicit PointIndex(const PointCloud& cloud) : tree_(cloud.points) {
    const auto& pts = cloud.points;
    const std::size_t k = std::min(kNeighbours, pts.size());
    neighbours_.resize(pts.size());
    radius_.resize(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      std::vector<std::pair<double, std::size_t>> d(pts.size());
      for (std::size_t j = 0; j < pts.size(); ++j) d[j] = {(pts[i] - pts[j]).norm(), j};
      const std::size_t sorted = std::min(k + 1, pts.size());
      std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(sorted), d.end());
      for (std::size_t m = 0; m < k; ++m) neighbours_[i].push_back(d[m].second);
      // every point outside the list is at least this far from point i
      radius_[i] = k < pts.size() ? d[k].first : std::numeric_limits<double>::infinity();
    }
  }

  const detail::KdTree& tree() const noexcept { return tree_; }
  const std::vector<std::size_t>& neighbours(std::size_t i) const { return neighbours_[i]; }
  double radius(std::size_t i) const { return radius_[i]; }

 private:
  detail::KdTree tree_;
  std::vector<std::vector<std::size_t>> neighbours_;
  std::vector<double> radius_;
};

namespace detail {

inline double nearest_brute_force(const Vec3& q, const std::vector<Vec3>& targets) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& y : targets) best = std::min(best, (q - y).norm());
  return best;
}

inline double adds_brute_force(const Pose& pose, const Pose& other, const PointCloud& points) {
  const auto queries = transformed(pose, points);
  const auto targets = transformed(other, points);
  double sum = 0.0;
  for (const auto& q : queries) sum += nearest_brute_force(q, targets);
  return sum;
}

// Nearest neighbours are searched in the model frame of `other`. Every
// candidate within a rounding slack of the model-frame nearest is re-scored
// with the world-frame expression brute force uses, so both paths agree
// exactly.
inline double adds_indexed(const Pose& pose, const Pose& other, const PointCloud& points, const PointIndex& index) {
  const Pose relative = other.inverse() * pose;
  const Mat3 rel_r = relative.rotation_matrix();
  const auto queries = transformed(pose, points);
  const auto targets = transformed(other, points);
  const auto& model = points.points;
  double sum = 0.0;
  for (std::size_t i = 0; i < model.size(); ++i) {
    const Vec3& q = queries[i];
    const Vec3 qm = rel_r * model[i] + relative.translation();
    const double slack = 1e-9 * (1.0 + q.norm());
    // fast path: nearest among the neighbours of the query's own point
    const double delta = (qm - model[i]).norm();
    const auto& near = index.neighbours(i);
    std::array<double, PointIndex::kNeighbours> d2{};
    double local2 = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < near.size(); ++m) {
      d2[m] = (qm - model[near[m]]).squaredNorm();
      local2 = std::min(local2, d2[m]);
    }
    const double local = std::sqrt(local2);
    double best = std::numeric_limits<double>::infinity();
    if (local + 2.0 * slack <= index.radius(i) - delta) {
      const double limit = (local + slack) * (local + slack);
      for (std::size_t m = 0; m < near.size(); ++m) {
        if (d2[m] <= limit) best = std::min(best, (q - targets[near[m]]).norm());
      }
    } else {
      index.tree().search(qm, slack, [&](std::size_t j, double d) {
        best = std::min(best, (q - targets[j]).norm());
        return d;
      });
    }
    sum += best;
  }
  return sum;
}

}  // namespace detail

/// Symmetric variant: each point under `pose` is matched to the closest
/// point of the cloud under `other`.
inline double adds_metric(const Pose& pose, const Pose& other, const PointCloud& points,
                          NearestSearch search = NearestSearch::automatic) {
  detail::require_points(points, "adds_metric");
  const bool use_grid = search == NearestSearch::grid ||
                        (search == NearestSearch::automatic && points.size() > kAddsGridThreshold);
  const double sum = use_grid ? detail::adds_indexed(pose, other, points, PointIndex(points))
                              : detail::adds_brute_force(pose, other, points);
  return sum / static_cast<double>(points.size());
}

/// Same as above with a prebuilt index over `points`.
inline double adds_metric(const Pose& pose, const Pose& other, const PointCloud& points, const PointIndex& index) {
  detail::require_points(points, "adds_metric");
  const double sum = points.size() > kAddsGridThreshold ? detail::adds_indexed(pose, other, points, index)
                                                        : detail::adds_brute_force(pose, other, points);
  return sum / static_cast<double>(points.size());
}

struct StepMetrics {
  double time = 0.0;
  double add = 0.0;
  double adds = 0.0;
};

inline void require_matching_clocks(const PoseTrajectory& real, const PoseTrajectory& sim) {
  if (real.size() != sim.size()) {
    throw InvalidInput("trajectory length mismatch: " + std::to_string(real.size()) + " vs " +
                       std::to_string(sim.size()));
  }
  for (std::size_t i = 0; i < real.size(); ++i) {
    if (std::abs(real[i].time - sim[i].time) > kTimestampTolerance) {
      throw InvalidInput("trajectory timestamp mismatch at sample " + std::to_string(i));
    }
  }
}

/// Per-sample ADD / ADD-S. Consecutive repeats of the same pose pair (an
/// object at rest in both trajectories) reuse the previous result.
inline std::vector<StepMetrics> trajectory_metrics(const PoseTrajectory& real, const PoseTrajectory& sim,
                                                   const PointCloud& points, const PointIndex& index) {
  require_matching_clocks(real, sim);
  detail::require_points(points, "trajectory_metrics");
  std::vector<StepMetrics> out;
  out.reserve(real.size());
  for (std::size_t i = 0; i < real.size(); ++i) {
    if (i > 0 && real[i].pose == real[i - 1].pose && sim[i].pose == sim[i - 1].pose) {
      out.push_back({real[i].time, out.back().add, out.back().adds});
      continue;
    }
    out.push_back({real[i].time, add_metric(real[i].pose, sim[i].pose, points),
                   adds_metric(real[i].pose, sim[i].pose, points, index)});
  }
  return out;
}

inline std::vector<StepMetrics> trajectory_metrics(const PoseTrajectory& real, const PoseTrajectory& sim,
                                                   const PointCloud& points) {
  detail::require_points(points, "trajectory_metrics");
  return trajectory_metrics(real, sim, points, PointIndex(points));
}

/// Object-dynamics objective: mean over all K paired samples of ADD + ADD-S.
inline double trajectory_loss(const PoseTrajectory& real, const PoseTrajectory& sim, const PointCloud& points,
                              const PointIndex& index) {
  double sum = 0.0;
  for (const auto& m : trajectory_metrics(real, sim, points, index)) sum += m.add + m.adds;
  return sum / static_cast<double>(real.size());
}

inline double trajectory_loss(const PoseTrajectory& real, const PoseTrajectory& sim, const PointCloud& points) {
  detail::require_points(points, "trajectory_loss");
  return trajectory_loss(real, sim, points, PointIndex(points));
}

}  // namespace twin_ident
