#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "twin_ident.hpp"

namespace testing_support {

namespace fs = std::filesystem;
using namespace twin_ident;

/// Fresh per-test scratch directory under the build tree.
inline fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::path(TWIN_IDENT_TEST_TMP) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline Pose random_pose(Rng& rng, double max_translation = 0.5) {
  Vec3 axis(standard_normal(rng), standard_normal(rng), standard_normal(rng));
  axis.normalize();
  const double angle = uniform(rng, 0.0, std::numbers::pi);
  return Pose::from_rotation_vector(axis * angle, Vec3(uniform(rng, -max_translation, max_translation),
                                                       uniform(rng, -max_translation, max_translation),
                                                       uniform(rng, -max_translation, max_translation)));
}

inline PointCloud random_cloud(Rng& rng, std::size_t n, double extent = 0.1) {
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) {
    c.points.emplace_back(uniform(rng, -extent, extent), uniform(rng, -extent, extent), uniform(rng, -extent, extent));
  }
  return c;
}

/// Exhaustive nearest-neighbour ADD-S, written independently of the library.
inline double adds_oracle(const Pose& a, const Pose& b, const PointCloud& cloud) {
  double sum = 0.0;
  for (const auto& x : cloud.points) {
    const Vec3 p = a * x;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& y : cloud.points) {
      const Vec3 q = b * y;
      best = std::min(best, (p - q).norm());
    }
    sum += best;
  }
  return sum / static_cast<double>(cloud.size());
}

inline std::string cube_obj() {
  return "# unit cube\n"
         "v -0.5 -0.5 -0.5\nv 0.5 -0.5 -0.5\nv 0.5 0.5 -0.5\nv -0.5 0.5 -0.5\n"
         "v -0.5 -0.5 0.5\nv 0.5 -0.5 0.5\nv 0.5 0.5 0.5\nv -0.5 0.5 0.5\n"
         "f 1 3 2\nf 1 4 3\nf 5 6 7\nf 5 7 8\nf 1 2 6\nf 1 6 5\n"
         "f 2 3 7\nf 2 7 6\nf 3 4 8\nf 3 8 7\nf 4 1 5\nf 4 5 8\n";
}

inline std::string quad_cube_obj() {
  return "v -0.5 -0.5 -0.5\nv 0.5 -0.5 -0.5\nv 0.5 0.5 -0.5\nv -0.5 0.5 -0.5\n"
         "v -0.5 -0.5 0.5\nv 0.5 -0.5 0.5\nv 0.5 0.5 0.5\nv -0.5 0.5 0.5\n"
         "f 1 4 3 2\nf 5 6 7 8\nf 1 2 6 5\nf 2 3 7 6\nf 3 4 8 7\nf 4 1 5 8\n";
}

}  // namespace testing_support
