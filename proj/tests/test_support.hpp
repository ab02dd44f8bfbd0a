#pragma once

#include "dnmap/loss.hpp"
#include "dnmap/neural_map.hpp"
#include "dnmap/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace dnmap::testutil {

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("dnmap_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Vec3 random_point(std::mt19937_64& rng, const Vec3& lo, const Vec3& hi) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return Vec3(lo.x() + u(rng) * (hi.x() - lo.x()), lo.y() + u(rng) * (hi.y() - lo.y()),
              lo.z() + u(rng) * (hi.z() - lo.z()));
}

/// Points scattered in a cube, for building small random maps.
inline std::vector<Vec3> random_cloud(std::size_t n, double half, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Vec3> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) pts.push_back(random_point(rng, Vec3::Constant(-half), Vec3::Constant(half)));
  return pts;
}

/// Two face-adjacent leaf voxels along +x (leaf size 1, two levels).
inline SparseOctree two_voxel_tree(int levels = 2) {
  OctreeConfig oc;
  oc.levels = levels;
  oc.leaf_voxel_size = 1.0;
  const std::vector<Vec3> pts{Vec3(0.5, 0.5, 0.5), Vec3(1.5, 0.5, 0.5)};
  return SparseOctree::build(pts, oc);
}

/// Fills every block with uniform(-a, a) noise; indicators are pushed at
/// least 0.3 away from zero so their signs are stable under small steps.
template <class T>
void randomize(const std::vector<Parameter<T>*>& params, std::uint64_t seed, double a = 0.5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-a, a);
  for (auto* p : params) {
    const bool indicator = p->name.rfind("indicators", 0) == 0;
    for (auto& v : p->value) {
      double x = u(rng);
      if (indicator) x += x >= 0 ? 0.3 : -0.3;
      v = static_cast<T>(x);
    }
    ++p->version;
  }
}

template <class T>
void randomize(NeuralMap<T>& map, std::uint64_t seed, double a = 0.5) {
  randomize(map.parameters(), seed, a);
}

/// Unit sphere observed from `count` orbit poses.
inline std::vector<PosedScan> sphere_scans(int count, int rays_per_axis, double fov = 0.8,
                                           double distance = 3.0) {
  const auto scene = AnalyticScene::named("sphere");
  const auto dirs = grid_directions(rays_per_axis, rays_per_axis, fov, fov);
  std::vector<PosedScan> scans;
  for (const auto& pose : orbit_poses(count, distance)) scans.push_back(virtual_lidar(scene, pose, dirs, 10.0));
  return scans;
}

inline double relative_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

struct SweepResult {
  std::size_t checked = 0;
  double worst = 0;          // largest relative error seen
  std::string worst_name;    // parameter block and index of the worst entry
  double worst_analytic = 0;
  double worst_fd = 0;
  std::size_t skipped = 0;   // scalars whose perturbation crosses a ReLU kink
};

/// Calls fn(a) for every decoder pre-activation over all loss evaluations of
/// `batch` (each sample and its six Eikonal probes).
template <class Fn>
void for_each_preactivation(const NeuralMap<double>& map, const std::vector<TrainingSample>& batch,
                            const LossConfig& cfg, Fn&& fn) {
  const double eps = cfg.step_for(map.config().octree);
  std::vector<double> z(static_cast<std::size_t>(map.config().dim));
  Decoder<double>::Cache cache;
  for (const auto& s : batch) {
    for (int k = 0; k < 7; ++k) {
      Vec3 x = s.x;
      if (k > 0) x[(k - 1) / 2] += (k % 2 == 1 ? eps : -eps);
      const auto st = map.tree().query(x);
      if (!st.any_hit()) continue;
      std::fill(z.begin(), z.end(), 0.0);
      map.features().query(st, z, Pass::train, QueryPath::efficient);
      map.decoder().forward(std::span<const double>(z), cache);
      for (double a : cache.a1) fn(a);
      for (double a : cache.a2) fn(a);
    }
  }
}

inline std::vector<std::uint8_t> activation_signature(const NeuralMap<double>& map,
                                                      const std::vector<TrainingSample>& batch,
                                                      const LossConfig& cfg) {
  std::vector<std::uint8_t> sig;
  for_each_preactivation(map, batch, cfg, [&](double a) { sig.push_back(a > 0); });
  return sig;
}

inline double min_abs_preactivation(const NeuralMap<double>& map, const std::vector<TrainingSample>& batch,
                                    const LossConfig& cfg) {
  double m = std::numeric_limits<double>::infinity();
  for_each_preactivation(map, batch, cfg, [&](double a) { m = std::min(m, std::abs(a)); });
  return m;
}

/// Randomizes `map` with the first seed from `seed` whose state makes the
/// loss differentiable around it: every decoder pre-activation is at least
/// `margin` from its ReLU kink and every sample logit is inside the clamp
/// band, where the saturated surrogate slope takes over. Returns the seed.
inline std::uint64_t randomize_differentiable(NeuralMap<double>& map, const std::vector<TrainingSample>& batch,
                                              const LossConfig& cfg, std::uint64_t seed, double margin = 1e-3) {
  auto in_band = [&] {
    for (const auto& s : batch) {
      const auto phi = map.sdf(s.x, Pass::train);
      if (phi && std::abs(*phi / cfg.sigma) > kLogitClamp - 1.0) return false;
    }
    return true;
  };
  for (std::uint64_t s = seed; s < seed + 1000; ++s) {
    randomize(map, s);
    if (min_abs_preactivation(map, batch, cfg) >= margin && in_band()) return s;
  }
  throw std::runtime_error("no differentiable random state found");
}

/// Compares the analytic gradient of total_loss against central finite
/// differences for every trainable scalar. Indicator relaxations are frozen
/// so the straight-through surrogate becomes the true derivative.
/// Errors are |a - f| / max(|a|, |f|, floor); the floor keeps finite
/// difference round-off (about 1e-8 at the default step) from dominating
/// near-zero gradients. Scalars whose +-step
/// perturbation flips a ReLU somewhere are counted in `skipped`, since the
/// loss is not differentiable across that interval.
inline SweepResult gradient_sweep(NeuralMap<double>& map, const std::vector<TrainingSample>& batch,
                                  const LossConfig& cfg, QueryPath path, double step = 1e-5,
                                  double floor = 1e-5) {
  map.features().freeze_straight_through();
  map.zero_grad();
  total_loss(map, std::span<const TrainingSample>(batch), cfg, path, 1, true);
  SweepResult out;
  for (auto* p : map.parameters()) {
    const std::vector<double> analytic = p->grad;
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double keep = p->value[i];
      p->value[i] = keep + step;
      ++p->version;
      const double up = total_loss(map, std::span<const TrainingSample>(batch), cfg, path, 1, false).total;
      const auto sig_up = activation_signature(map, batch, cfg);
      p->value[i] = keep - step;
      ++p->version;
      const double down = total_loss(map, std::span<const TrainingSample>(batch), cfg, path, 1, false).total;
      const auto sig_down = activation_signature(map, batch, cfg);
      p->value[i] = keep;
      ++p->version;
      if (sig_up != sig_down) {
        ++out.skipped;
        continue;
      }
      const double fd = (up - down) / (2 * step);
      const double err = relative_error(analytic[i], fd, floor);
      ++out.checked;
      if (err > out.worst) {
        out.worst = err;
        out.worst_name = p->name + "[" + std::to_string(i) + "]";
        out.worst_analytic = analytic[i];
        out.worst_fd = fd;
      }
    }
  }
  map.features().release_straight_through();
  return out;
}

/// Samples inside the two-voxel map, labels within the truncation band.
inline std::vector<TrainingSample> two_voxel_batch(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> label(-0.1, 0.1);
  std::vector<TrainingSample> batch;
  for (std::size_t i = 0; i < n; ++i) {
    TrainingSample s;
    s.x = random_point(rng, Vec3(0.1, 0.1, 0.1), Vec3(1.9, 0.9, 0.9));
    s.label = label(rng);
    batch.push_back(s);
  }
  return batch;
}

}  // namespace dnmap::testutil
