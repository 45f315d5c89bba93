#pragma once

// Silhouette rendering under a pinhole camera, BCE mask matching and
// camera-pose refinement by particle swarm search.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include <Eigen/Core>

#include "twin_ident/error.hpp"
#include "twin_ident/mesh.hpp"
#include "twin_ident/pose.hpp"
#include "twin_ident/pso.hpp"

namespace twin_ident {

/// Pinhole intrinsics. Camera frame: x right, y down, z forward; pixel
/// (u, v) covers [u, u+1) x [v, v+1) and a point projects to
/// (fx x/z + cx, fy y/z + cy).
struct CameraIntrinsics {
  double fx = 300.0;
  double fy = 300.0;
  double cx = 160.0;
  double cy = 120.0;
  int width = 320;
  int height = 240;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidInput("CameraIntrinsics: fx and fy must be > 0");
    if (width <= 0 || height <= 0) throw InvalidInput("CameraIntrinsics: width and height must be > 0");
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
      throw InvalidInput("CameraIntrinsics: principal point must lie inside the image");
    }
  }

  /// Intrinsics for an image downsampled by an integer factor.
  CameraIntrinsics downsampled(int factor) const {
    return {fx / factor, fy / factor, cx / factor, cy / factor, width / factor, height / factor};
  }

  friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;
};

/// Row-major per-pixel coverage in [0, 1].
class SilhouetteMask {
 public:
  SilhouetteMask() = default;
  SilhouetteMask(int width, int height, std::vector<double> coverage)
      : width_(width), height_(height), coverage_(std::move(coverage)) {
    if (width <= 0 || height <= 0) throw InvalidInput("SilhouetteMask: dimensions must be > 0");
    if (coverage_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw InvalidInput("SilhouetteMask: coverage size does not match dimensions");
    }
    for (auto& c : coverage_) c = std::isnan(c) ? 0.0 : std::clamp(c, 0.0, 1.0);
  }
  SilhouetteMask(int width, int height) : SilhouetteMask(width, height, std::vector<double>(static_cast<std::size_t>(width) * height, 0.0)) {}

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  double at(int x, int y) const { return coverage_[static_cast<std::size_t>(y) * width_ + x]; }
  const std::vector<double>& coverage() const noexcept { return coverage_; }

  /// Coverage-weighted centroid in pixel coordinates (pixel centers at +0.5).
  Vec2 centroid() const {
    double sum = 0.0;
    Vec2 acc = Vec2::Zero();
    for (int y = 0; y < height_; ++y) {
      for (int x = 0; x < width_; ++x) {
        const double c = at(x, y);
        sum += c;
        acc += c * Vec2(x + 0.5, y + 0.5);
      }
    }
    return sum > 0.0 ? Vec2(acc / sum) : Vec2(Vec2::Constant(std::numeric_limits<double>::quiet_NaN()));
  }

  double area() const {
    double sum = 0.0;
    for (double c : coverage_) sum += c;
    return sum;
  }

  /// Box-filter downsample by an integer factor (trailing partial blocks dropped).
  SilhouetteMask downsampled(int factor) const {
    if (factor <= 1) return *this;
    const int w = width_ / factor, h = height_ / factor;
    std::vector<double> out(static_cast<std::size_t>(w) * h, 0.0);
    const double norm = 1.0 / (factor * factor);
    for (int y = 0; y < h * factor; ++y) {
      for (int x = 0; x < w * factor; ++x) out[static_cast<std::size_t>(y / factor) * w + x / factor] += at(x, y) * norm;
    }
    return {w, h, std::move(out)};
  }

  friend bool operator==(const SilhouetteMask&, const SilhouetteMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> coverage_;
};

inline constexpr int kSupersample = 4;  // samples per pixel along each axis
inline constexpr double kNearPlane = 1e-3;  // m

namespace detail {

/// Clip a camera-frame polygon against z >= near.
inline std::vector<Vec3> clip_near(const std::array<Vec3, 3>& tri) {
  std::vector<Vec3> out;
  for (int i = 0; i < 3; ++i) {
    const Vec3& a = tri[i];
    const Vec3& b = tri[(i + 1) % 3];
    const bool ina = a.z() >= kNearPlane, inb = b.z() >= kNearPlane;
    if (ina) out.push_back(a);
    if (ina != inb) {
      const double s = (kNearPlane - a.z()) / (b.z() - a.z());
      out.push_back(a + s * (b - a));
    }
  }
  return out;
}

/// Fill the supersample grid with the union of one projected triangle.
/// Sample (i, j) sits at ((i + 0.5) / S, (j + 0.5) / S) in pixel units.
inline void fill_triangle(std::vector<std::uint8_t>& samples, int sw, int sh, const Vec2& p0, const Vec2& p1,
                          const Vec2& p2) {
  constexpr double S = kSupersample;
  std::array<Vec2, 3> p = {p0 * S, p1 * S, p2 * S};  // sample units
  const double area = cross2(p[1] - p[0], p[2] - p[0]);
  if (area == 0.0 || !std::isfinite(area)) return;
  if (area < 0.0) std::swap(p[1], p[2]);
  const double ymin = std::min({p[0].y(), p[1].y(), p[2].y()});
  const double ymax = std::max({p[0].y(), p[1].y(), p[2].y()});
  const int j0 = std::max(0, static_cast<int>(std::ceil(ymin - 0.5)));
  const int j1 = std::min(sh - 1, static_cast<int>(std::floor(ymax - 0.5)));
  for (int j = j0; j <= j1; ++j) {
    const double y = j + 0.5;
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool empty = false;
    for (int k = 0; k < 3; ++k) {
      const Vec2& a = p[k];
      const Vec2& b = p[(k + 1) % 3];
      // inside: (b - a) x (q - a) >= 0  <=>  ex (qy - ay) - ey (qx - ax) >= 0
      const double ex = b.x() - a.x(), ey = b.y() - a.y();
      const double rhs = ex * (y - a.y());
      if (ey > 0.0) {
        hi = std::min(hi, a.x() + rhs / ey);
      } else if (ey < 0.0) {
        lo = std::max(lo, a.x() + rhs / ey);
      } else if (rhs < 0.0) {
        empty = true;
      }
    }
    if (empty) continue;
    const int i0 = std::max(0, static_cast<int>(std::ceil(lo - 0.5)));
    const int i1 = std::min(sw - 1, static_cast<int>(std::floor(hi - 0.5)));
    if (i1 >= i0) std::fill(samples.begin() + static_cast<std::ptrdiff_t>(j) * sw + i0,
                            samples.begin() + static_cast<std::ptrdiff_t>(j) * sw + i1 + 1, std::uint8_t{1});
  }
}

/// Covered-sample count (0..S*S) per pixel.
inline std::vector<std::uint8_t> render_counts(const TriMesh& mesh, const Pose& object_pose,
                                               const CameraIntrinsics& camera) {
  camera.validate();
  const int sw = camera.width * kSupersample, sh = camera.height * kSupersample;
  std::vector<std::uint8_t> samples(static_cast<std::size_t>(sw) * sh, 0);
  std::vector<Vec3> cam;
  cam.reserve(mesh.vertices().size());
  for (const auto& v : mesh.vertices()) cam.push_back(object_pose * v);
  auto project = [&](const Vec3& x) { return Vec2(camera.fx * x.x() / x.z() + camera.cx, camera.fy * x.y() / x.z() + camera.cy); };
  for (const auto& f : mesh.faces()) {
    const std::array<Vec3, 3> tri = {cam[f[0]], cam[f[1]], cam[f[2]]};
    if (tri[0].z() >= kNearPlane && tri[1].z() >= kNearPlane && tri[2].z() >= kNearPlane) {
      fill_triangle(samples, sw, sh, project(tri[0]), project(tri[1]), project(tri[2]));
      continue;
    }
    const auto poly = clip_near(tri);
    for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
      fill_triangle(samples, sw, sh, project(poly[0]), project(poly[k]), project(poly[k + 1]));
    }
  }
  std::vector<std::uint8_t> counts(static_cast<std::size_t>(camera.width) * camera.height, 0);
  for (int j = 0; j < sh; ++j) {
    const auto* row = samples.data() + static_cast<std::size_t>(j) * sw;
    auto* out = counts.data() + static_cast<std::size_t>(j / kSupersample) * camera.width;
    for (int i = 0; i < sw; ++i) out[i / kSupersample] += row[i];
  }
  return counts;
}

}  // namespace detail

/// Soft silhouette: fraction of the 4x4 supersamples per pixel covered by
/// the union of the mesh's projected triangles (near-plane clipped).
inline SilhouetteMask render_silhouette(const TriMesh& mesh, const Pose& object_pose, const CameraIntrinsics& camera) {
  const auto counts = detail::render_counts(mesh, object_pose, camera);
  std::vector<double> coverage(counts.size());
  constexpr double inv = 1.0 / (kSupersample * kSupersample);
  for (std::size_t i = 0; i < counts.size(); ++i) coverage[i] = counts[i] * inv;
  return {camera.width, camera.height, std::move(coverage)};
}

inline constexpr double kBceClamp = 1e-4;

inline double bce_term(bool reference_on, double predicted) {
  const double p = std::clamp(predicted, kBceClamp, 1.0 - kBceClamp);
  return reference_on ? -std::log(p) : -std::log(1.0 - p);
}

/// Mean per-pixel binary cross-entropy (nats). Reference is binarized at 0.5.
inline double bce_mask_loss(const SilhouetteMask& reference, const SilhouetteMask& rendered) {
  if (reference.width() != rendered.width() || reference.height() != rendered.height()) {
    throw InvalidInput("bce_mask_loss: mask dimensions differ");
  }
  double sum = 0.0;
  const auto& ref = reference.coverage();
  const auto& ren = rendered.coverage();
  for (std::size_t i = 0; i < ref.size(); ++i) sum += bce_term(ref[i] >= 0.5, ren[i]);
  return sum / static_cast<double>(ref.size());
}

/// 6-vector: rotation vector (rad) then translation (m), applied on the left.
using PoseDelta = Eigen::Matrix<double, 6, 1>;

inline Pose apply_delta(const PoseDelta& delta, const Pose& base) {
  return Pose::from_rotation_vector(delta.head<3>(), delta.tail<3>()) * base;
}

/// +-rotation_deg about each axis and +-translation_m along each axis.
inline ParamBounds viewpoint_bounds(double rotation_deg = 10.0, double translation_m = 0.05) {
  const double r = rotation_deg * std::numbers::pi / 180.0;
  return {{-r, r}, {-r, r}, {-r, r}, {-translation_m, translation_m}, {-translation_m, translation_m},
          {-translation_m, translation_m}};
}

/// A reference silhouette and the mesh's pose in the base (robot) frame
/// when it was captured. The camera sees the mesh at camera_pose * model_pose.
struct ViewReference {
  SilhouetteMask mask;
  Pose model_pose;
};

struct ViewpointOptions {
  int max_width = 320;  // references wider than this are box-downsampled for the search
  int stages = 3;       // coarse-to-fine passes; each earlier pass runs at half the width of the next
  double shrink = 0.35;  // refinement box half-width relative to the previous pass
};

struct ViewpointAlignment {
  Pose fine;
  PoseDelta delta = PoseDelta::Zero();
  OptResult trace;                   // last pass
  std::vector<OptResult> stages;     // every pass, coarsest first
  std::vector<double> final_losses;  // per reference, at native resolution
};

/// Mean BCE over references for a candidate camera pose, rendered at the
/// (possibly downsampled) optimization resolution.
class ViewpointObjective {
 public:
  ViewpointObjective(std::span<const ViewReference> references, const TriMesh& mesh, const Pose& coarse,
                     const CameraIntrinsics& camera, const ViewpointOptions& options = {})
      : mesh_(mesh), coarse_(coarse) {
    if (references.empty()) throw InvalidInput("align_viewpoint: at least one reference mask is required");
    camera.validate();
    factor_ = std::max(1, camera.width / std::max(1, options.max_width));
    camera_ = camera.downsampled(factor_);
    for (const auto& ref : references) {
      if (ref.mask.width() != camera.width || ref.mask.height() != camera.height) {
        throw InvalidInput("align_viewpoint: reference mask is " + std::to_string(ref.mask.width()) + "x" +
                           std::to_string(ref.mask.height()) + " but the camera is " + std::to_string(camera.width) +
                           "x" + std::to_string(camera.height));
      }
      const SilhouetteMask m = ref.mask.downsampled(factor_);
      std::vector<std::uint8_t> on(m.coverage().size());
      for (std::size_t i = 0; i < on.size(); ++i) on[i] = m.coverage()[i] >= 0.5;
      binarized_.push_back(std::move(on));
      model_poses_.push_back(ref.model_pose);
    }
    constexpr int levels = kSupersample * kSupersample;
    for (int c = 0; c <= levels; ++c) {
      const double p = static_cast<double>(c) / levels;
      table_[0][c] = bce_term(false, p);
      table_[1][c] = bce_term(true, p);
    }
  }

  double operator()(std::span<const double> x) const {
    PoseDelta d;
    for (int k = 0; k < 6; ++k) d[k] = x[static_cast<std::size_t>(k)];
    return loss(apply_delta(d, coarse_));
  }

  double loss(const Pose& camera_pose) const {
    double total = 0.0;
    for (std::size_t r = 0; r < binarized_.size(); ++r) {
      const auto counts = detail::render_counts(mesh_, camera_pose * model_poses_[r], camera_);
      const auto& on = binarized_[r];
      double sum = 0.0;
      for (std::size_t i = 0; i < counts.size(); ++i) sum += table_[on[i]][counts[i]];
      total += sum / static_cast<double>(counts.size());
    }
    return total / static_cast<double>(binarized_.size());
  }

  int factor() const noexcept { return factor_; }

 private:
  const TriMesh& mesh_;
  Pose coarse_;
  CameraIntrinsics camera_;
  int factor_ = 1;
  std::vector<std::vector<std::uint8_t>> binarized_;
  std::vector<Pose> model_poses_;
  std::array<std::array<double, kSupersample * kSupersample + 1>, 2> table_{};
};

/// Refine a coarse camera pose (base frame -> camera frame) so the rendered
/// mesh silhouettes match the reference masks.
///
/// The first pass searches the whole box at low resolution. Later passes
/// search a shrinking box around the best delta at increasing resolution,
/// with the rotation taken about the scene center instead of the camera
/// origin: a small camera rotation about its own origin mostly shifts the
/// image, which a translation undoes, and that coupling leaves a long
/// narrow valley in the raw parameters. Candidates whose delta leaves
/// `bounds` score +inf, so the result always lies inside them.
inline ViewpointAlignment align_viewpoint(std::span<const ViewReference> references, const TriMesh& mesh,
                                          const Pose& coarse, const CameraIntrinsics& camera,
                                          const ParamBounds& bounds, const SwarmConfig& config,
                                          const ViewpointOptions& options = {}) {
  bounds.require_arity(6, "align_viewpoint");
  if (options.stages < 1) throw InvalidInput("align_viewpoint: stages must be >= 1");
  if (!(options.shrink > 0.0 && options.shrink <= 1.0)) throw InvalidInput("align_viewpoint: shrink must lie in (0, 1]");
  if (references.empty()) throw InvalidInput("align_viewpoint: at least one reference mask is required");

  const Vec3 pivot = coarse * (references.front().model_pose * mesh.bounds().center());
  auto rotation_of = [](std::span<const double> x) {
    return Pose::from_rotation_vector(Vec3(x[0], x[1], x[2])).rotation();
  };
  auto to_delta = [&](std::span<const double> x) {
    const Vec3 t = pivot - rotation_of(x) * pivot + Vec3(x[3], x[4], x[5]);
    return std::vector<double>{x[0], x[1], x[2], t.x(), t.y(), t.z()};
  };
  auto from_delta = [&](std::span<const double> d) {
    const Vec3 s = Vec3(d[3], d[4], d[5]) - pivot + rotation_of(d) * pivot;
    return std::vector<double>{d[0], d[1], d[2], s.x(), s.y(), s.z()};
  };
  bool pivoted = true;  // a pinned translation cannot be expressed about the pivot
  for (std::size_t k = 3; k < 6; ++k) pivoted = pivoted && bounds.range(k) > 0.0;

  ViewpointAlignment out;
  std::vector<double> best(6, 0.0);  // raw delta
  if (!bounds.contains(best)) best = bounds.center();
  double half = 0.5;
  for (int stage = 0; stage < options.stages; ++stage) {
    ViewpointOptions stage_opts = options;
    stage_opts.max_width = std::max(1, options.max_width >> (options.stages - 1 - stage));
    const ViewpointObjective objective(references, mesh, coarse, camera, stage_opts);
    SwarmConfig cfg = config;
    if (stage > 0) cfg.seed = mix_seed(config.seed, static_cast<std::uint64_t>(stage));

    OptResult r;
    if (stage == 0) {
      // one particle starts at the zero delta, i.e. the coarse pose itself
      r = pso_minimize(objective, bounds, cfg, {}, best);
    } else {
      half *= options.shrink;
      const bool about_pivot = pivoted;
      const std::vector<double> center = about_pivot ? from_delta(best) : best;
      std::vector<double> lo(6), hi(6);
      for (std::size_t k = 0; k < 6; ++k) {
        lo[k] = center[k] - half * bounds.range(k);
        hi[k] = center[k] + half * bounds.range(k);
      }
      auto search = [&](std::span<const double> x) {
        const std::vector<double> d = about_pivot ? to_delta(x) : std::vector<double>(x.begin(), x.end());
        if (!bounds.contains(d)) return std::numeric_limits<double>::infinity();
        return objective(d);
      };
      r = pso_minimize(search, ParamBounds(lo, hi), cfg, {}, center);
      if (about_pivot) {
        for (auto& p : r.best_params_history) p = to_delta(p);
        r.best_params = to_delta(r.best_params);
      }
    }
    best = r.best_params;
    out.stages.push_back(std::move(r));
  }
  out.trace = out.stages.back();
  for (int k = 0; k < 6; ++k) out.delta[k] = best[static_cast<std::size_t>(k)];
  out.fine = apply_delta(out.delta, coarse);
  for (const auto& ref : references) {
    out.final_losses.push_back(bce_mask_loss(ref.mask, render_silhouette(mesh, out.fine * ref.model_pose, camera)));
  }
  return out;
}

}  // namespace twin_ident
