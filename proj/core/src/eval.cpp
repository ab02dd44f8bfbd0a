#include "dnmap/eval.hpp"

#include "dnmap/kdtree.hpp"
#include "dnmap/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace dnmap {

std::vector<Vec3> sample_surface(const TriangleMesh& mesh, std::size_t n, std::mt19937_64& rng) {
  if (mesh.faces.empty()) throw EvalError("cannot sample the surface of an empty mesh");
  std::vector<double> cdf(mesh.faces.size());
  double total = 0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    total += mesh.triangle_area(f);
    cdf[f] = total;
  }
  if (!(total > 0)) throw EvalError("mesh has zero surface area");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec3> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = u(rng) * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), r);
    if (it == cdf.end()) --it;
    const auto& t = mesh.faces[static_cast<std::size_t>(it - cdf.begin())];
    const double s = std::sqrt(u(rng));
    const double b = u(rng);
    const Vec3& a = mesh.vertices[t[0]];
    const Vec3& bb = mesh.vertices[t[1]];
    const Vec3& c = mesh.vertices[t[2]];
    pts.push_back((1 - s) * a + s * (1 - b) * bb + s * b * c);
  }
  return pts;
}

namespace {

struct Directional {
  double mean_cm = 0;
  double within = 0;  // fraction strictly below threshold
};

Directional directional(std::span<const Vec3> from, const KdTree& to, double threshold_cm, int threads) {
  // Distances are reduced serially so the result does not depend on threads.
  std::vector<double> dist(from.size());
  parallel_chunks(from.size(), resolve_threads(threads), [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) dist[i] = std::sqrt(to.nearest(from[i]).squared_distance);
  });
  const double thr_m = threshold_cm / 100.0;
  double sum = 0;
  std::size_t hit = 0;
  for (const double d : dist) {
    sum += d;
    if (d < thr_m) ++hit;
  }
  Directional out;
  out.mean_cm = 100.0 * sum / static_cast<double>(from.size());
  out.within = static_cast<double>(hit) / static_cast<double>(from.size());
  return out;
}

}  // namespace

MetricReport compute_point_metrics(std::span<const Vec3> recon, std::span<const Vec3> gt,
                                   double threshold_cm, int threads) {
  if (recon.empty() || gt.empty()) throw EvalError("metric point sets must be nonempty");
  if (!(threshold_cm > 0)) throw EvalError("F-score threshold must be positive");
  const KdTree gt_tree(gt);
  const KdTree recon_tree(recon);
  const Directional acc = directional(recon, gt_tree, threshold_cm, threads);
  const Directional com = directional(gt, recon_tree, threshold_cm, threads);
  MetricReport r;
  r.accuracy_cm = acc.mean_cm;
  r.completion_cm = com.mean_cm;
  r.chamfer_l1_cm = 0.5 * (acc.mean_cm + com.mean_cm);
  r.precision = acc.within;
  r.recall = com.within;
  const double pr = r.precision + r.recall;
  r.f_score_percent = pr > 0 ? 100.0 * 2.0 * r.precision * r.recall / pr : 0.0;
  r.threshold_cm = threshold_cm;
  r.n_samples = std::max(recon.size(), gt.size());
  return r;
}

MetricReport compute_metrics(const TriangleMesh& recon, const TriangleMesh& gt, double threshold_cm,
                             std::size_t n, std::uint64_t seed, int threads) {
  if (recon.empty()) throw EvalError("reconstructed mesh is empty");
  if (gt.empty()) throw EvalError("ground-truth mesh is empty");
  std::mt19937_64 rng_r(seed);
  std::mt19937_64 rng_g(seed + 1);
  const auto pr = sample_surface(recon, n, rng_r);
  const auto pg = sample_surface(gt, n, rng_g);
  MetricReport r = compute_point_metrics(pr, pg, threshold_cm, threads);
  r.n_samples = n;
  return r;
}

std::string report_csv_header() {
  return "accuracy_cm,completion_cm,chamfer_l1_cm,f_score,threshold_cm,n_samples,rep_kb,total_kb";
}

std::string report_csv_row(const MetricReport& r) {
  return fmt::format("{:.4f},{:.4f},{:.4f},{:.4f},{},{},{},{}", r.accuracy_cm, r.completion_cm,
                     r.chamfer_l1_cm, r.f_score_percent, r.threshold_cm, r.n_samples,
                     r.storage ? fmt::format("{:.3f}", r.storage->rep_kb()) : std::string(),
                     r.storage ? fmt::format("{:.3f}", r.storage->total_kb()) : std::string());
}

std::string report_table(const MetricReport& r) {
  std::string s = fmt::format("{:>10} {:>10} {:>10} {:>9} {:>12} {:>12}\n", "Acc.(cm)", "Com.(cm)",
                              "C-l1(cm)", "F-score", "Rep.(kB)", "Total(kB)");
  s += fmt::format("{:>10.3f} {:>10.3f} {:>10.3f} {:>9.2f} {:>12} {:>12}\n", r.accuracy_cm,
                   r.completion_cm, r.chamfer_l1_cm, r.f_score_percent,
                   r.storage ? fmt::format("{:.1f}", r.storage->rep_kb()) : std::string("-"),
                   r.storage ? fmt::format("{:.1f}", r.storage->total_kb()) : std::string("-"));
  return s;
}

}  // namespace dnmap
