#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Geometry>

#include "twin_ident/error.hpp"
#include "twin_ident/pose.hpp"
#include "twin_ident/random.hpp"

namespace twin_ident {

using Face = std::array<std::uint32_t, 3>;

/// Triangle mesh in meters. Indices are validated and degenerate faces
/// rejected at construction; watertightness is computed once.
class TriMesh {
 public:
  TriMesh(std::vector<Vec3> vertices, std::vector<Face> faces)
      : vertices_(std::move(vertices)), faces_(std::move(faces)) {
    if (vertices_.empty() || faces_.empty()) throw InvalidInput("TriMesh: empty mesh");
    for (const auto& v : vertices_) {
      if (!v.allFinite()) throw InvalidInput("TriMesh: non-finite vertex");
    }
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      for (auto idx : faces_[f]) {
        if (idx >= vertices_.size()) {
          throw InvalidInput("TriMesh: face " + std::to_string(f) + " index " + std::to_string(idx) +
                             " out of range");
        }
      }
      if (!(face_area(f) > 0.0)) throw InvalidInput("TriMesh: face " + std::to_string(f) + " is degenerate");
    }
    watertight_ = compute_watertight();
  }

  const std::vector<Vec3>& vertices() const noexcept { return vertices_; }
  const std::vector<Face>& faces() const noexcept { return faces_; }
  bool watertight() const noexcept { return watertight_; }

  std::array<Vec3, 3> triangle(std::size_t f) const {
    const auto& face = faces_[f];
    return {vertices_[face[0]], vertices_[face[1]], vertices_[face[2]]};
  }

  double face_area(std::size_t f) const {
    const auto [a, b, c] = triangle(f);
    return 0.5 * (b - a).cross(c - a).norm();
  }

  Eigen::AlignedBox3d bounds() const {
    Eigen::AlignedBox3d box;
    for (const auto& v : vertices_) box.extend(v);
    return box;
  }

 private:
  bool compute_watertight() const {
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> edges;
    for (const auto& f : faces_) {
      for (int k = 0; k < 3; ++k) {
        auto a = f[k], b = f[(k + 1) % 3];
        if (a > b) std::swap(a, b);
        ++edges[{a, b}];
      }
    }
    for (const auto& [edge, count] : edges) {
      if (count != 2) return false;
    }
    return true;
  }

  std::vector<Vec3> vertices_;
  std::vector<Face> faces_;
  bool watertight_ = false;
};

namespace detail {

inline bool parse_double(std::string_view s, double& out) {
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

}  // namespace detail

/// Parse a Wavefront OBJ stream. Only `v` and `f` records are interpreted;
/// polygons are fan-triangulated and exactly-degenerate fan triangles dropped.
inline TriMesh parse_obj(std::istream& in, const std::string& source = "<obj>") {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto tokens = detail::split_ws(line);
    if (tokens.empty()) continue;
    if (tokens[0] == "v") {
      if (tokens.size() < 4) throw ParseError(source, line_no, "vertex needs 3 coordinates");
      Vec3 v;
      for (int k = 0; k < 3; ++k) {
        if (!detail::parse_double(tokens[1 + k], v[k])) {
          throw ParseError(source, line_no, "bad vertex coordinate '" + std::string(tokens[1 + k]) + "'");
        }
      }
      vertices.push_back(v);
    } else if (tokens[0] == "f") {
      if (tokens.size() < 4) throw ParseError(source, line_no, "face needs at least 3 vertices");
      std::vector<std::uint32_t> poly;
      for (std::size_t k = 1; k < tokens.size(); ++k) {
        const auto ref = tokens[k].substr(0, tokens[k].find('/'));
        long long idx = 0;
        auto [ptr, ec] = std::from_chars(ref.data(), ref.data() + ref.size(), idx);
        if (ec != std::errc() || ptr != ref.data() + ref.size() || idx == 0) {
          throw ParseError(source, line_no, "bad face index '" + std::string(tokens[k]) + "'");
        }
        const long long n = static_cast<long long>(vertices.size());
        const long long zero_based = idx > 0 ? idx - 1 : n + idx;
        if (zero_based < 0 || zero_based >= n) {
          throw ParseError(source, line_no,
                           "face index " + std::to_string(idx) + " out of range (" + std::to_string(n) +
                               " vertices defined)");
        }
        poly.push_back(static_cast<std::uint32_t>(zero_based));
      }
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
        const Face f{poly[0], poly[k], poly[k + 1]};
        const Vec3& a = vertices[f[0]];
        const Vec3& b = vertices[f[1]];
        const Vec3& c = vertices[f[2]];
        if ((b - a).cross(c - a).squaredNorm() > 0.0) faces.push_back(f);
      }
    }
  }
  if (vertices.empty() || faces.empty()) {
    throw ParseError(source, line_no, "empty mesh (no vertices or no non-degenerate faces)");
  }
  return TriMesh(std::move(vertices), std::move(faces));
}

inline TriMesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open mesh file " + path.string());
  return parse_obj(in, path.string());
}

inline void write_obj(std::ostream& out, const TriMesh& mesh) {
  out.precision(17);
  for (const auto& v : mesh.vertices()) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& f : mesh.faces()) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

/// Axis-aligned box centered at `center`, outward-facing triangles.
inline TriMesh make_box(const Vec3& size, const Vec3& center = Vec3::Zero()) {
  const Vec3 h = 0.5 * size;
  std::vector<Vec3> v;
  for (int i = 0; i < 8; ++i) {
    v.push_back(center + Vec3((i & 1) ? h.x() : -h.x(), (i & 2) ? h.y() : -h.y(), (i & 4) ? h.z() : -h.z()));
  }
  std::vector<Face> f = {
      {0, 2, 1}, {1, 2, 3},  // -z
      {4, 5, 6}, {5, 7, 6},  // +z
      {0, 1, 4}, {1, 5, 4},  // -y
      {2, 6, 3}, {3, 6, 7},  // +y
      {0, 4, 2}, {2, 4, 6},  // -x
      {1, 3, 5}, {3, 7, 5},  // +x
  };
  return TriMesh(std::move(v), std::move(f));
}

/// Concatenate meshes (vertex sets kept separate).
inline TriMesh merge_meshes(std::span<const TriMesh> parts) {
  std::vector<Vec3> v;
  std::vector<Face> f;
  for (const auto& m : parts) {
    const auto base = static_cast<std::uint32_t>(v.size());
    v.insert(v.end(), m.vertices().begin(), m.vertices().end());
    for (const auto& face : m.faces()) f.push_back({face[0] + base, face[1] + base, face[2] + base});
  }
  return TriMesh(std::move(v), std::move(f));
}

inline TriMesh transform_mesh(const TriMesh& mesh, const Pose& pose) {
  std::vector<Vec3> v;
  v.reserve(mesh.vertices().size());
  for (const auto& p : mesh.vertices()) v.push_back(pose * p);
  return TriMesh(std::move(v), mesh.faces());
}

struct PointCloud {
  std::vector<Vec3> points;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
};

/// Default number of model points used by the pose metrics.
inline constexpr std::size_t kDefaultModelPoints = 512;

/// Area-weighted uniform surface samples. Per-triangle counts are drawn by
/// systematic sampling over the cumulative area, so each triangle receives
/// n * area / total points up to +-1; positions inside a triangle are uniform.
inline PointCloud sample_surface(const TriMesh& mesh, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw InvalidInput("sample_surface: n must be >= 1");
  const auto nf = mesh.faces().size();
  std::vector<double> cumulative(nf);
  double total = 0.0;
  for (std::size_t f = 0; f < nf; ++f) {
    total += mesh.face_area(f);
    cumulative[f] = total;
  }
  if (!(total > 0.0)) throw InvalidInput("sample_surface: mesh has zero area");

  Rng rng(seed);
  const double offset = uniform01(rng);
  PointCloud cloud;
  cloud.points.reserve(n);
  std::size_t face = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double target = (static_cast<double>(k) + offset) / static_cast<double>(n) * total;
    while (face + 1 < nf && cumulative[face] <= target) ++face;
    const auto [a, b, c] = mesh.triangle(face);
    const double s = std::sqrt(uniform01(rng));
    const double r = uniform01(rng);
    cloud.points.push_back((1.0 - s) * a + s * (1.0 - r) * b + s * r * c);
  }
  return cloud;
}

/// Volume, centroid and inertia per unit mass (about the centroid) of a
/// solid with uniform density.
struct MassProperties {
  double volume = 0.0;
  Vec3 centroid = Vec3::Zero();
  Mat3 unit_inertia = Mat3::Zero();
};

/// Signed-tetrahedron decomposition: each face forms a tetrahedron with the
/// origin; volumes and second moments are summed (divergence theorem).
inline MassProperties mass_properties(const TriMesh& mesh) {
  if (!mesh.watertight()) throw InvalidInput("mass_properties: mesh is not watertight");

  // Second moment of the canonical tetrahedron (0, e1, e2, e3) scaled by det.
  Mat3 canonical;
  canonical << 2, 1, 1, 1, 2, 1, 1, 1, 2;
  canonical /= 120.0;

  double volume = 0.0;
  Vec3 first_moment = Vec3::Zero();
  Mat3 covariance = Mat3::Zero();  // integral of x x^T over the solid, about the origin
  for (std::size_t f = 0; f < mesh.faces().size(); ++f) {
    const auto [a, b, c] = mesh.triangle(f);
    Mat3 A;
    A.col(0) = a;
    A.col(1) = b;
    A.col(2) = c;
    const double det = A.determinant();
    volume += det / 6.0;
    first_moment += det / 24.0 * (a + b + c);
    covariance += det * A * canonical * A.transpose();
  }
  if (volume < 0.0) {  // inward-facing winding
    volume = -volume;
    first_moment = -first_moment;
    covariance = -covariance;
  }
  if (!(volume > 0.0)) throw InvalidInput("mass_properties: mesh encloses no volume");

  MassProperties out;
  out.volume = volume;
  out.centroid = first_moment / volume;
  const Mat3 central = covariance - volume * out.centroid * out.centroid.transpose();
  Mat3 inertia = central.trace() * Mat3::Identity() - central;
  inertia = 0.5 * (inertia + inertia.transpose());
  out.unit_inertia = inertia / volume;
  return out;
}

}  // namespace twin_ident
