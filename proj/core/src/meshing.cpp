#include "dnmap/meshing.hpp"

#include "dnmap/parallel.hpp"
#include "marching_cubes_tables.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <unordered_map>

namespace dnmap {

double TriangleMesh::triangle_area(std::size_t f) const {
  const auto& t = faces[f];
  return 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
}

double TriangleMesh::area() const {
  double a = 0;
  for (std::size_t f = 0; f < faces.size(); ++f) a += triangle_area(f);
  return a;
}

MeshGrid make_grid(const Vec3& lo, const Vec3& hi, double cell) {
  if (!(cell > 0)) throw std::invalid_argument("grid cell size must be positive");
  if ((hi.array() < lo.array()).any()) throw std::invalid_argument("grid bounds are inverted");
  MeshGrid g;
  g.cell = cell;
  Vec3 start, stop;
  for (int a = 0; a < 3; ++a) {
    start[a] = std::floor(lo[a] / cell);
    stop[a] = std::ceil(hi[a] / cell);
    g.dims[static_cast<std::size_t>(a)] = static_cast<int>(stop[a] - start[a]) + 1;
  }
  g.origin = start * cell;
  g.values.assign(g.vertex_count(), 0.0);
  g.valid.assign(g.vertex_count(), 0);
  return g;
}

void fill_grid(MeshGrid& g, const ScalarField& field, int threads) {
  const auto nz = static_cast<std::size_t>(g.dims[2]);
  parallel_chunks(nz, resolve_threads(threads), [&](std::size_t, std::size_t kb, std::size_t ke) {
    for (std::size_t k = kb; k < ke; ++k) {
      for (int j = 0; j < g.dims[1]; ++j) {
        for (int i = 0; i < g.dims[0]; ++i) {
          const int kk = static_cast<int>(k);
          const auto v = field(g.position(i, j, kk));
          const std::size_t idx = g.index(i, j, kk);
          g.valid[idx] = v.has_value() ? 1 : 0;
          g.values[idx] = v.value_or(0.0);
        }
      }
    }
  });
}

template <class T>
MeshGrid sample_grid(const NeuralMap<T>& map, double cell, int threads) {
  if (map.tree().empty()) {
    MeshGrid g;
    g.cell = cell;
    return g;
  }
  const auto [lo, hi] = map.tree().bounds();
  MeshGrid g = make_grid(lo, hi, cell);
  fill_grid(g, [&](const Vec3& x) -> std::optional<double> {
    const auto v = map.sdf(x, Pass::infer, QueryPath::efficient);
    if (!v) return std::nullopt;
    return static_cast<double>(*v);
  }, threads);
  return g;
}

namespace {

// Cube corner offsets and edge endpoints in the table's vertex numbering.
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdge[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                              {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

struct EdgeVertex {
  std::uint64_t key;
  Vec3 position;
};

struct ChunkOutput {
  std::vector<EdgeVertex> vertices;                 // first occurrence order within chunk
  std::vector<std::array<std::uint64_t, 3>> tris;   // edge keys
};

}  // namespace

TriangleMesh marching_cubes(const MeshGrid& g, double iso, int threads) {
  TriangleMesh mesh;
  if (g.dims[0] < 2 || g.dims[1] < 2 || g.dims[2] < 2) return mesh;
  const auto nx = static_cast<std::uint64_t>(g.dims[0]);
  const auto ny = static_cast<std::uint64_t>(g.dims[1]);
  const std::size_t cells_z = static_cast<std::size_t>(g.dims[2] - 1);
  const int nt = resolve_threads(threads);
  std::vector<ChunkOutput> parts(chunk_count(cells_z, nt));

  parallel_chunks(cells_z, nt, [&](std::size_t chunk, std::size_t kb, std::size_t ke) {
    ChunkOutput& out = parts[chunk];
    std::unordered_map<std::uint64_t, bool> seen;
    for (std::size_t kz = kb; kz < ke; ++kz) {
      const int k = static_cast<int>(kz);
      for (int j = 0; j + 1 < g.dims[1]; ++j) {
        for (int i = 0; i + 1 < g.dims[0]; ++i) {
          double val[8];
          bool ok = true;
          int cube = 0;
          for (int c = 0; c < 8; ++c) {
            const std::size_t idx = g.index(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2]);
            if (!g.valid[idx]) {
              ok = false;
              break;
            }
            val[c] = g.values[idx];
            if (val[c] < iso) cube |= 1 << c;
          }
          if (!ok || detail::kMcEdgeTable[static_cast<std::size_t>(cube)] == 0) continue;

          std::uint64_t keys[12];
          for (int e = 0; e < 12; ++e) {
            if (!(detail::kMcEdgeTable[static_cast<std::size_t>(cube)] & (1 << e))) continue;
            int a = kEdge[e][0], b = kEdge[e][1];
            int axis = 0;
            while (kCorner[a][axis] == kCorner[b][axis]) ++axis;
            if (kCorner[a][axis] > kCorner[b][axis]) std::swap(a, b);
            const std::uint64_t vi = static_cast<std::uint64_t>(i + kCorner[a][0]);
            const std::uint64_t vj = static_cast<std::uint64_t>(j + kCorner[a][1]);
            const std::uint64_t vk = static_cast<std::uint64_t>(k + kCorner[a][2]);
            const std::uint64_t key = 3 * ((vk * ny + vj) * nx + vi) + static_cast<std::uint64_t>(axis);
            keys[e] = key;
            if (seen.emplace(key, true).second) {
              const double t = (iso - val[a]) / (val[b] - val[a]);
              Vec3 p = g.position(static_cast<int>(vi), static_cast<int>(vj), static_cast<int>(vk));
              p[axis] += t * g.cell;
              out.vertices.push_back({key, p});
            }
          }
          const auto& tri = detail::kMcTriTable[static_cast<std::size_t>(cube)];
          for (int t = 0; t < 16 && tri[static_cast<std::size_t>(t)] >= 0; t += 3) {
            out.tris.push_back({keys[tri[static_cast<std::size_t>(t)]],
                                keys[tri[static_cast<std::size_t>(t + 2)]],
                                keys[tri[static_cast<std::size_t>(t + 1)]]});
          }
        }
      }
    }
  });

  std::unordered_map<std::uint64_t, std::uint32_t> index;
  for (const auto& part : parts) {
    for (const auto& v : part.vertices) {
      if (index.emplace(v.key, static_cast<std::uint32_t>(mesh.vertices.size())).second) {
        mesh.vertices.push_back(v.position);
      }
    }
  }
  for (const auto& part : parts) {
    for (const auto& t : part.tris) {
      mesh.faces.push_back({index.at(t[0]), index.at(t[1]), index.at(t[2])});
    }
  }
  return mesh;
}

TriangleMesh make_icosphere(double radius, int subdivisions, const Vec3& center) {
  if (!(radius > 0) || subdivisions < 0) throw std::invalid_argument("invalid icosphere parameters");
  const double p = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, p, 0}, {1, p, 0}, {-1, -p, 0}, {1, -p, 0}, {0, -1, p}, {0, 1, p},
                         {0, -1, -p}, {0, 1, -p}, {p, 0, -1}, {p, 0, 1}, {-p, 0, -1}, {-p, 0, 1}};
  for (auto& x : v) x.normalize();
  std::vector<std::array<std::uint32_t, 3>> f = {
      {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
      {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> mid;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const auto id = static_cast<std::uint32_t>(v.size() - 1);
      mid.emplace(key, id);
      return id;
    };
    std::vector<std::array<std::uint32_t, 3>> next;
    next.reserve(f.size() * 4);
    for (const auto& t : f) {
      const auto a = midpoint(t[0], t[1]);
      const auto b = midpoint(t[1], t[2]);
      const auto c = midpoint(t[2], t[0]);
      next.push_back({t[0], a, c});
      next.push_back({t[1], b, a});
      next.push_back({t[2], c, b});
      next.push_back({a, b, c});
    }
    f.swap(next);
  }
  TriangleMesh m;
  m.vertices.reserve(v.size());
  for (const auto& x : v) m.vertices.push_back(center + radius * x);
  m.faces = std::move(f);
  return m;
}

template MeshGrid sample_grid<float>(const NeuralMap<float>&, double, int);
template MeshGrid sample_grid<double>(const NeuralMap<double>&, double, int);

}  // namespace dnmap
