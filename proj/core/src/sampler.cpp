#include "dnmap/sampler.hpp"

#include "dnmap/parallel.hpp"

#include <stdexcept>

namespace dnmap {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

void SamplingConfig::validate() const {
  if (free_samples < 0 || surface_samples < 0) {
    throw std::invalid_argument("per-ray sample counts must be non-negative");
  }
  if (!(sigma > 0)) throw std::invalid_argument("sigma must be positive");
}

std::vector<TrainingSample> sample_ray(const Vec3& origin, const Vec3& endpoint, int free_samples,
                                       int surface_samples, double sigma, std::mt19937_64& rng) {
  std::vector<TrainingSample> out;
  const Vec3 ray = endpoint - origin;
  const double r = ray.norm();
  const double band = 3.0 * sigma;
  if (!(r > band)) return out;
  const Vec3 dir = ray / r;
  out.reserve(static_cast<std::size_t>(free_samples + surface_samples));
  std::uniform_real_distribution<double> free_t(0.0, r - band);
  std::uniform_real_distribution<double> surf_t(r - band, r + band);
  for (int i = 0; i < free_samples; ++i) {
    const double t = free_t(rng);
    out.push_back({origin + t * dir, r - t, SampleClass::free_space});
  }
  for (int i = 0; i < surface_samples; ++i) {
    const double t = surf_t(rng);
    out.push_back({origin + t * dir, r - t, SampleClass::near_surface});
  }
  return out;
}

std::mt19937_64 ray_rng(std::uint64_t seed, std::uint64_t scan_index, std::uint64_t ray_index) {
  const std::uint64_t h = splitmix64(splitmix64(splitmix64(seed) ^ scan_index) ^ ray_index);
  return std::mt19937_64(h);
}

std::vector<TrainingSample> sample_scan(const PosedScan& scan, const SamplingConfig& config,
                                        std::uint64_t seed, std::uint64_t scan_index,
                                        int threads) {
  config.validate();
  const std::size_t n = scan.endpoints.size();
  const int nt = resolve_threads(threads);
  std::vector<std::vector<TrainingSample>> parts(chunk_count(n, nt));
  parallel_chunks(n, nt, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    auto& part = parts[chunk];
    for (std::size_t i = begin; i < end; ++i) {
      auto rng = ray_rng(seed, scan_index, i);
      auto s = sample_ray(scan.origin, scan.endpoints[i], config.free_samples,
                          config.surface_samples, config.sigma, rng);
      part.insert(part.end(), s.begin(), s.end());
    }
  });
  std::vector<TrainingSample> out;
  for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::vector<TrainingSample> sample_scans(std::span<const PosedScan> scans,
                                         const SamplingConfig& config, std::uint64_t seed,
                                         int threads) {
  std::vector<TrainingSample> out;
  for (std::size_t i = 0; i < scans.size(); ++i) {
    auto s = sample_scan(scans[i], config, seed, i, threads);
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

}  // namespace dnmap
