#include "dnmap/mesh_io.hpp"
#include "dnmap/meshing.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <sstream>

namespace {

using namespace dnmap;

ScalarField sphere_field(const Vec3& c, double r) {
  return [c, r](const Vec3& x) -> std::optional<double> { return (x - c).norm() - r; };
}

TriangleMesh sphere_mesh(double cell, const Vec3& c = Vec3::Zero(), int threads = 1) {
  auto grid = make_grid(c - Vec3::Constant(1.3), c + Vec3::Constant(1.3), cell);
  fill_grid(grid, sphere_field(c, 1.0), threads);
  return marching_cubes(grid, 0.0, threads);
}

std::map<std::pair<std::uint32_t, std::uint32_t>, int> edge_use(const TriangleMesh& m) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> edges;
  for (const auto& f : m.faces) {
    for (int k = 0; k < 3; ++k) {
      auto a = f[k], b = f[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      ++edges[{a, b}];
    }
  }
  return edges;
}

TEST(Meshing, GridIsAlignedToCellMultiples) {
  const auto g = make_grid(Vec3(-0.33, 0.01, 2.0), Vec3(0.4, 0.5, 2.2), 0.1);
  for (int a = 0; a < 3; ++a) {
    const double k = g.origin[a] / 0.1;
    EXPECT_NEAR(k, std::round(k), 1e-9);
  }
  EXPECT_LE(g.origin.x(), -0.33);
  EXPECT_GE(g.position(g.dims[0] - 1, 0, 0).x(), 0.4 - 1e-12);
}

TEST(Meshing, SphereVerticesWithinOneCell) {
  const auto mesh = sphere_mesh(0.05);
  ASSERT_FALSE(mesh.empty());
  for (const auto& v : mesh.vertices) ASSERT_LT(std::abs(v.norm() - 1.0), 0.05);
}

TEST(Meshing, SphereIsClosedGenusZero) {
  const auto mesh = sphere_mesh(0.05);
  const auto edges = edge_use(mesh);
  for (const auto& [e, n] : edges) ASSERT_EQ(n, 2) << e.first << "-" << e.second;
  const long long chi = static_cast<long long>(mesh.vertices.size()) -
                        static_cast<long long>(edges.size()) +
                        static_cast<long long>(mesh.faces.size());
  EXPECT_EQ(chi, 2);
}

TEST(Meshing, TrianglesFaceTheOutside) {
  const auto mesh = sphere_mesh(0.1);
  for (const auto& f : mesh.faces) {
    const Vec3 a = mesh.vertices[f[0]], b = mesh.vertices[f[1]], c = mesh.vertices[f[2]];
    const Vec3 n = (b - a).cross(c - a);
    if (n.norm() < 1e-12) continue;  // collapsed at an exact zero crossing
    ASSERT_GT(n.dot((a + b + c) / 3.0), 0.0);
  }
}

TEST(Meshing, AreaApproachesSphereArea) {
  const auto mesh = sphere_mesh(0.05);
  EXPECT_NEAR(mesh.area(), 4 * std::numbers::pi, 0.05 * 4 * std::numbers::pi);
}

TEST(Meshing, PlaneIsReproducedExactly) {
  auto grid = make_grid(Vec3(-1, -1, -1), Vec3(1, 1, 1), 0.1);
  fill_grid(grid, [](const Vec3& x) -> std::optional<double> { return 0.3 * x.x() + 0.2 * x.y() - x.z() + 0.137; });
  const auto mesh = marching_cubes(grid);
  ASSERT_FALSE(mesh.empty());
  for (const auto& v : mesh.vertices) ASSERT_NEAR(0.3 * v.x() + 0.2 * v.y() - v.z() + 0.137, 0.0, 1e-6);
}

TEST(Meshing, NoCrossingGivesEmptyMesh) {
  auto grid = make_grid(Vec3(-1, -1, -1), Vec3(1, 1, 1), 0.25);
  fill_grid(grid, [](const Vec3&) -> std::optional<double> { return 1.0; });
  EXPECT_TRUE(marching_cubes(grid).empty());
  fill_grid(grid, [](const Vec3&) -> std::optional<double> { return std::nullopt; });
  EXPECT_TRUE(marching_cubes(grid).empty());
}

TEST(Meshing, InvalidVerticesSkipTheirCells) {
  auto grid = make_grid(Vec3::Constant(-1.3), Vec3::Constant(1.3), 0.1);
  fill_grid(grid, [](const Vec3& x) -> std::optional<double> {
    if (x.x() > 0.55) return std::nullopt;
    return x.norm() - 1.0;
  });
  const auto mesh = marching_cubes(grid);
  ASSERT_FALSE(mesh.empty());
  for (const auto& v : mesh.vertices) ASSERT_LE(v.x(), 0.55 + 1e-9);
}

TEST(Meshing, TranslationByWholeCellsIsInvariant) {
  const double cell = 0.1;
  const Vec3 shift(3 * cell, -2 * cell, 5 * cell);
  const auto a = sphere_mesh(cell);
  const auto b = sphere_mesh(cell, shift);
  ASSERT_EQ(a.vertices.size(), b.vertices.size());
  ASSERT_EQ(a.faces.size(), b.faces.size());
  auto key = [](const Vec3& v) { return std::array<long long, 3>{std::llround(v.x() * 1e5), std::llround(v.y() * 1e5), std::llround(v.z() * 1e5)}; };
  std::set<std::array<long long, 3>> sa, sb;
  for (const auto& v : a.vertices) sa.insert(key(v));
  for (const auto& v : b.vertices) sb.insert(key(v - shift));
  EXPECT_EQ(sa, sb);
}

TEST(Meshing, ParallelMatchesSerial) {
  const auto serial = sphere_mesh(0.08, Vec3::Zero(), 1);
  const auto parallel = sphere_mesh(0.08, Vec3::Zero(), 4);
  EXPECT_EQ(serial.vertices, parallel.vertices);
  EXPECT_EQ(serial.faces, parallel.faces);
}

TEST(Meshing, IcosphereIsClosedAndOnSphere) {
  const auto ico = make_icosphere(2.0, 3, Vec3(1, 0, 0));
  EXPECT_EQ(ico.faces.size(), 20u * 64);
  for (const auto& v : ico.vertices) ASSERT_NEAR((v - Vec3(1, 0, 0)).norm(), 2.0, 1e-12);
  for (const auto& [e, n] : edge_use(ico)) ASSERT_EQ(n, 2);
  for (const auto& f : ico.faces) {
    const Vec3 a = ico.vertices[f[0]] - Vec3(1, 0, 0), b = ico.vertices[f[1]] - Vec3(1, 0, 0),
               c = ico.vertices[f[2]] - Vec3(1, 0, 0);
    ASSERT_GT((b - a).cross(c - a).dot(a + b + c), 0.0);
  }
}

// Single-level continuous map whose corner features hold the sphere SDF and a
// decoder that passes feature 0 through: Phi is the trilinear interpolant.
TEST(Meshing, SampledMapGridMatchesAnalyticField) {
  MapConfig mc;
  mc.octree.levels = 1;
  mc.octree.leaf_voxel_size = 0.1;
  mc.mode = FeatureMode::continuous;
  mc.dim = 2;
  std::vector<Vec3> shell;
  for (const auto& v : make_icosphere(1.0, 4).vertices) shell.push_back(v);
  NeuralMap<double> map(mc, SparseOctree::build(shell, mc.octree));
  const auto codes = map.tree().corner_codes_in_slot_order(0);
  auto& e = map.features().embeddings(0).value;
  for (std::size_t s = 0; s < codes.size(); ++s) {
    e[2 * s] = map.tree().voxel_min_corner(0, codes[s]).norm() - 1.0;
    e[2 * s + 1] = 0.0;
  }
  auto& th = map.decoder().params().value;
  std::fill(th.begin(), th.end(), 0.0);
  const std::size_t H = 32, D = 2, w2 = H * D + H, w3 = w2 + H * H + H;
  th[0] = 1.0;
  th[D] = -1.0;
  th[w2] = 1.0;
  th[w2 + H + 1] = 1.0;
  th[w3] = 1.0;
  th[w3 + 1] = -1.0;
  ++map.decoder().params().version;

  const auto grid = sample_grid(map, 0.05);
  std::size_t valid = 0;
  for (int k = 0; k < grid.dims[2]; ++k) {
    for (int j = 0; j < grid.dims[1]; ++j) {
      for (int i = 0; i < grid.dims[0]; ++i) {
        const auto idx = grid.index(i, j, k);
        if (!grid.valid[idx]) continue;
        ++valid;
        const Vec3 x = grid.position(i, j, k);
        // Trilinear interpolation of a unit-curvature field: error <= 3 h^2 / 8 per unit curvature.
        ASSERT_NEAR(grid.values[idx], x.norm() - 1.0, 3 * 0.1 * 0.1 / 8 / 0.8);
      }
    }
  }
  EXPECT_GT(valid, 1000u);
  EXPECT_EQ(sample_grid(map, 0.05, 3).values, grid.values);
  const auto mesh = marching_cubes(grid);
  for (const auto& v : mesh.vertices) ASSERT_LT(std::abs(v.norm() - 1.0), 0.05);
}

TEST(MeshIo, PlyRoundTripIsBitExact) {
  testutil::TempDir dir("meshply");
  auto mesh = make_icosphere(1.0, 2);
  for (auto& v : mesh.vertices) v = v.cast<float>().cast<double>();
  write_mesh(mesh, dir / "m.ply");
  const auto back = read_mesh(dir / "m.ply");
  EXPECT_EQ(back.vertices, mesh.vertices);
  EXPECT_EQ(back.faces, mesh.faces);
}

TEST(MeshIo, ObjUsesOneBasedIndices) {
  testutil::TempDir dir("meshobj");
  TriangleMesh tri;
  tri.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  tri.faces = {{0, 1, 2}};
  write_mesh(tri, dir / "t.obj");
  std::ifstream in(dir / "t.obj");
  std::string line, face;
  while (std::getline(in, line)) {
    if (line.rfind("f ", 0) == 0) face = line;
  }
  EXPECT_EQ(face, "f 1 2 3");
  const auto back = read_mesh(dir / "t.obj");
  EXPECT_EQ(back.faces, tri.faces);
  EXPECT_EQ(back.vertices, tri.vertices);
}

TEST(MeshIo, EmptyMeshWritesValidFile) {
  testutil::TempDir dir("meshempty");
  const TriangleMesh empty;
  write_mesh(empty, dir / "e.ply");
  write_mesh(empty, dir / "e.obj");
  EXPECT_TRUE(read_mesh(dir / "e.ply").empty());
  EXPECT_TRUE(read_mesh(dir / "e.obj").vertices.empty());
  EXPECT_THROW(write_mesh(empty, dir / "e.stl"), InputError);
  EXPECT_THROW(write_mesh(empty, dir / "no" / "such" / "dir.ply"), InputError);
}

}  // namespace
