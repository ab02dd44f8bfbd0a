#pragma once

#include "dnmap/scene.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace dnmap {

enum class SampleClass : std::uint8_t { free_space, near_surface };

/// A query point with its projective signed distance to the ray endpoint.
struct TrainingSample {
  Vec3 x = Vec3::Zero();
  double label = 0;  // meters, positive in front of the surface
  SampleClass cls = SampleClass::near_surface;
};

struct SamplingConfig {
  int free_samples = 6;     // N_F per ray
  int surface_samples = 3;  // N_S per ray
  double sigma = 0.05;      // s, meters; truncation band is +-3s

  void validate() const;
};

/// N_F samples at t ~ U(0, r - 3s) and N_S at t ~ U(r - 3s, r + 3s), labelled
/// r - t. Rays with r <= 3s yield nothing.
std::vector<TrainingSample> sample_ray(const Vec3& origin, const Vec3& endpoint, int free_samples,
                                       int surface_samples, double sigma, std::mt19937_64& rng);

/// Independent stream for one ray, a pure function of (seed, scan, ray).
std::mt19937_64 ray_rng(std::uint64_t seed, std::uint64_t scan_index, std::uint64_t ray_index);

/// Samples every ray of `scan` in ray order. The output does not depend on
/// the thread count.
std::vector<TrainingSample> sample_scan(const PosedScan& scan, const SamplingConfig& config,
                                        std::uint64_t seed, std::uint64_t scan_index,
                                        int threads = 1);

std::vector<TrainingSample> sample_scans(std::span<const PosedScan> scans,
                                         const SamplingConfig& config, std::uint64_t seed,
                                         int threads = 1);

}  // namespace dnmap
