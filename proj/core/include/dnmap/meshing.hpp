#pragma once

#include "dnmap/neural_map.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace dnmap {

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> faces;

  bool empty() const noexcept { return faces.empty(); }
  double area() const;
  double triangle_area(std::size_t face) const;
};

/// Regular lattice of field samples. Vertex (i, j, k) sits at
/// origin + cell * (i, j, k); invalid vertices lie outside the map.
struct MeshGrid {
  Vec3 origin = Vec3::Zero();
  double cell = 0.1;
  std::array<int, 3> dims{0, 0, 0};  // vertex counts per axis
  std::vector<double> values;
  std::vector<std::uint8_t> valid;

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * static_cast<std::size_t>(dims[1]) +
            static_cast<std::size_t>(j)) * static_cast<std::size_t>(dims[0]) +
           static_cast<std::size_t>(i);
  }
  Vec3 position(int i, int j, int k) const { return origin + cell * Vec3(i, j, k); }
  std::size_t vertex_count() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
  }
};

using ScalarField = std::function<std::optional<double>(const Vec3&)>;

/// Lattice aligned to multiples of `cell` covering [lo, hi].
MeshGrid make_grid(const Vec3& lo, const Vec3& hi, double cell);

/// Evaluates `field` at every vertex; nullopt marks the vertex invalid.
/// `field` must be safe to call concurrently.
void fill_grid(MeshGrid& grid, const ScalarField& field, int threads = 1);

/// Phi on a lattice covering the map's level-0 extent. A vertex is valid when
/// any octree level hits.
template <class T>
MeshGrid sample_grid(const NeuralMap<T>& map, double cell, int threads = 1);

/// 256-case marching cubes with linear edge interpolation. Cells touching an
/// invalid vertex are skipped and shared edge vertices are merged. A grid
/// value exactly at `iso` yields zero-area triangles; they are kept so the
/// surface stays closed. Triangles wind counter-clockwise seen from the side
/// where the field exceeds `iso`.
TriangleMesh marching_cubes(const MeshGrid& grid, double iso = 0.0, int threads = 1);

/// Subdivided icosahedron projected onto a sphere.
TriangleMesh make_icosphere(double radius, int subdivisions, const Vec3& center = Vec3::Zero());

extern template MeshGrid sample_grid<float>(const NeuralMap<float>&, double, int);
extern template MeshGrid sample_grid<double>(const NeuralMap<double>&, double, int);

}  // namespace dnmap
