#pragma once

#include "dnmap/meshing.hpp"
#include "dnmap/storage.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace dnmap {

struct MetricReport {
  double accuracy_cm = 0;     // mean recon -> gt nearest distance
  double completion_cm = 0;   // mean gt -> recon nearest distance
  double chamfer_l1_cm = 0;   // (accuracy + completion) / 2
  double precision = 0;       // fraction of recon samples closer than the threshold
  double recall = 0;          // fraction of gt samples closer than the threshold
  double f_score_percent = 0;
  double threshold_cm = 10;
  std::size_t n_samples = 0;
  std::optional<StorageReport> storage;
};

/// `n` points uniformly distributed over the mesh surface (area-weighted
/// triangle choice, uniform barycentric). Throws EvalError on an empty mesh.
std::vector<Vec3> sample_surface(const TriangleMesh& mesh, std::size_t n, std::mt19937_64& rng);

/// Metrics between point samples. Distances within the threshold use a strict
/// less-than. Throws EvalError on an empty set.
MetricReport compute_point_metrics(std::span<const Vec3> recon, std::span<const Vec3> gt,
                                   double threshold_cm, int threads = 1);

/// Samples n points on each mesh with a seeded generator, then compute_point_metrics.
MetricReport compute_metrics(const TriangleMesh& recon, const TriangleMesh& gt,
                             double threshold_cm = 10.0, std::size_t n = 1000000,
                             std::uint64_t seed = 0, int threads = 1);

/// Column order: Acc., Com., C-l1, F-score, then storage Rep./Total in kB.
std::string report_csv_header();
std::string report_csv_row(const MetricReport& r);
std::string report_table(const MetricReport& r);

}  // namespace dnmap
