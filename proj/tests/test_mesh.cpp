#include <gtest/gtest.h>

#include <sstream>

#include <Eigen/Eigenvalues>

#include "test_support.hpp"

using namespace twin_ident;

namespace {

TriMesh parse(const std::string& text) {
  std::istringstream in(text);
  return parse_obj(in, "test.obj");
}

// Closed forms for a solid box: I/m = (b^2 + c^2)/12 etc.
Vec3 box_unit_inertia(const Vec3& s) {
  return {(s.y() * s.y() + s.z() * s.z()) / 12.0, (s.x() * s.x() + s.z() * s.z()) / 12.0,
          (s.x() * s.x() + s.y() * s.y()) / 12.0};
}

}  // namespace

TEST(LoadMesh, UnitCube) {
  const TriMesh m = parse(testing_support::cube_obj());
  EXPECT_EQ(m.vertices().size(), 8u);
  EXPECT_EQ(m.faces().size(), 12u);
  EXPECT_TRUE(m.watertight());
}

TEST(LoadMesh, IndexOutOfRangeReportsLine) {
  std::string text = testing_support::cube_obj();
  text += "f 1 2 9\n";
  try {
    parse(text);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 22u);
    EXPECT_NE(std::string(e.what()).find("9"), std::string::npos);
  }
}

TEST(LoadMesh, QuadsAreFanSplit) {
  const TriMesh m = parse(testing_support::quad_cube_obj());
  EXPECT_EQ(m.faces().size(), 12u);
  EXPECT_TRUE(m.watertight());
}

TEST(LoadMesh, SlashFormsAndNegativeIndices) {
  const TriMesh m = parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvn 0 0 1\nf 1/1/1 2//1 -1/1\n");
  ASSERT_EQ(m.faces().size(), 1u);
  EXPECT_EQ(m.faces()[0], (Face{0, 1, 2}));
  EXPECT_FALSE(m.watertight());
}

TEST(LoadMesh, Errors) {
  EXPECT_THROW(parse(""), ParseError);
  EXPECT_THROW(parse("v 0 0 0\n"), ParseError);
  EXPECT_THROW(parse("v 0 0\nf 1 1 1\n"), ParseError);
  EXPECT_THROW(parse("v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n"), InvalidInput);  // collinear: zero area
  EXPECT_THROW(parse("v 0 0 x\n"), ParseError);
  EXPECT_THROW(load_mesh("/nonexistent/mesh.obj"), InvalidInput);
}

TEST(LoadMesh, WriteReadRoundTrip) {
  const TriMesh box = make_box({0.1, 0.2, 0.3}, {0.01, -0.02, 0.03});
  std::stringstream ss;
  write_obj(ss, box);
  const TriMesh back = parse_obj(ss);
  EXPECT_EQ(back.vertices(), box.vertices());
  EXPECT_EQ(back.faces(), box.faces());
}

TEST(SampleSurface, AreaWeightedOnCubeFaces) {
  const TriMesh cube = make_box({1, 1, 1});
  const PointCloud c = sample_surface(cube, 6000, 0);
  ASSERT_EQ(c.size(), 6000u);
  // each of the three face pairs holds one third of the area
  std::array<int, 3> counts{};
  for (const auto& p : c.points) {
    int axis;
    p.cwiseAbs().maxCoeff(&axis);
    EXPECT_NEAR(std::abs(p[axis]), 0.5, 1e-12);
    ++counts[static_cast<std::size_t>(axis)];
  }
  // six faces: 1000 per face, so 2000 per face pair
  for (int n : counts) EXPECT_NEAR(n / 2.0, 1000.0, 50.0);
}

TEST(SampleSurface, SingleTriangleContainment) {
  const TriMesh tri({{0, 0, 0}, {1, 0, 0}, {0, 2, 0}}, {{0, 1, 2}});
  const PointCloud c = sample_surface(tri, 3, 7);
  ASSERT_EQ(c.size(), 3u);
  for (const auto& p : c.points) {
    // barycentric coordinates w.r.t. (0,0), (1,0), (0,2)
    const double b1 = p.x(), b2 = p.y() / 2.0, b0 = 1.0 - b1 - b2;
    EXPECT_GE(b0, -1e-12);
    EXPECT_GE(b1, -1e-12);
    EXPECT_GE(b2, -1e-12);
    EXPECT_EQ(p.z(), 0.0);
  }
}

TEST(SampleSurface, DeterministicPerSeed) {
  const TriMesh m = make_box({0.2, 0.1, 0.05});
  const auto a = sample_surface(m, 777, 42);
  const auto b = sample_surface(m, 777, 42);
  const auto c = sample_surface(m, 777, 43);
  EXPECT_EQ(a.points, b.points);
  EXPECT_NE(a.points, c.points);
  EXPECT_THROW(sample_surface(m, 0, 1), InvalidInput);
}

TEST(MassProperties, UnitCube) {
  const auto mp = mass_properties(parse(testing_support::cube_obj()));
  EXPECT_NEAR(mp.volume, 1.0, 1e-12);
  EXPECT_LT(mp.centroid.norm(), 1e-12);
  const Mat3 expected = Mat3::Identity() / 6.0;
  EXPECT_LT((mp.unit_inertia - expected).norm(), 1e-12);
}

TEST(MassProperties, ScaledAndTranslatedCube) {
  EXPECT_NEAR(mass_properties(make_box({2, 2, 2})).volume, 8.0, 1e-12);
  const auto moved = mass_properties(make_box({1, 1, 1}, {0.5, 0, 0}));
  EXPECT_LT((moved.centroid - Vec3(0.5, 0, 0)).norm(), 1e-12);
  EXPECT_LT((moved.unit_inertia - Mat3::Identity() / 6.0).norm(), 1e-12);
}

TEST(MassProperties, BoxClosedForm) {
  const Vec3 size(0.3, 0.12, 0.07);
  const auto mp = mass_properties(make_box(size, {1.0, -2.0, 0.5}));
  EXPECT_NEAR(mp.volume / size.prod(), 1.0, 1e-9);
  const Vec3 expected = box_unit_inertia(size);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(mp.unit_inertia(k, k) / expected[k], 1.0, 1e-9);
  EXPECT_NEAR(mp.unit_inertia(0, 1), 0.0, 1e-12);
}

TEST(MassProperties, RegularTetrahedron) {
  // edge a = 2 sqrt(2): volume a^3 / (6 sqrt 2), I/m = a^2 / 20 about any centroidal axis
  const TriMesh tet({{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}}, {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}});
  ASSERT_TRUE(tet.watertight());
  const double a = 2.0 * std::sqrt(2.0);
  const auto mp = mass_properties(tet);
  EXPECT_NEAR(mp.volume / (a * a * a / (6.0 * std::sqrt(2.0))), 1.0, 1e-9);
  EXPECT_LT(mp.centroid.norm(), 1e-12);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(mp.unit_inertia(k, k) / (a * a / 20.0), 1.0, 1e-9);
}

TEST(MassProperties, InwardWindingAndOpenMeshes) {
  std::vector<Face> flipped;
  const TriMesh box = make_box({1, 2, 3});
  for (auto f : box.faces()) flipped.push_back({f[0], f[2], f[1]});
  const auto mp = mass_properties(TriMesh(box.vertices(), flipped));
  EXPECT_NEAR(mp.volume, 6.0, 1e-12);
  const TriMesh open({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}});
  EXPECT_THROW(mass_properties(open), InvalidInput);
}

TEST(MassProperties, InertiaSymmetricPositiveDefinite) {
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    const TriMesh m = transform_mesh(make_box({uniform(rng, 0.01, 1), uniform(rng, 0.01, 1), uniform(rng, 0.01, 1)}),
                                     testing_support::random_pose(rng));
    const auto mp = mass_properties(m);
    EXPECT_LT((mp.unit_inertia - mp.unit_inertia.transpose()).norm(), 1e-9 * mp.unit_inertia.norm());
    const Eigen::SelfAdjointEigenSolver<Mat3> es(mp.unit_inertia);
    EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
  }
}

TEST(Mesh, Validation) {
  EXPECT_THROW(TriMesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 3}}), InvalidInput);
  EXPECT_THROW(TriMesh({}, {}), InvalidInput);
}
