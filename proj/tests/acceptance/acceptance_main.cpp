// Acceptance suite: runs every criterion at its stated tolerance and prints
// one [PASS]/[FAIL] line per criterion. Exit status is non-zero if any fail.
//
// Usage: dnmap_acceptance [criterion ids...]   (default: all)

#include "dnmap/checkpoint.hpp"
#include "dnmap/eval.hpp"
#include "dnmap/loss.hpp"
#include "dnmap/meshing.hpp"
#include "dnmap/trainer.hpp"
#include "test_support.hpp"

#include <fmt/core.h>

#include <chrono>
#include <cstring>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace {

using namespace dnmap;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt_mode(FeatureMode m) { return std::string(to_string(m)); }

// ---------------------------------------------------------------------------
// 1. Basic and efficient query paths agree.

Outcome path_equivalence() {
  const auto t0 = Clock::now();
  OctreeConfig oc;
  oc.levels = 3;
  oc.leaf_voxel_size = 0.2;
  auto tree = SparseOctree::build(testutil::random_cloud(2000, 2.0, 101), oc);
  tree.finalize();
  std::mt19937_64 rng(102);
  std::vector<Stencil> queries;
  while (queries.size() < 10000) {
    auto st = tree.query(testutil::random_point(rng, Vec3::Constant(-2.2), Vec3::Constant(2.2)));
    if (st.any_hit()) queries.push_back(st);
  }
  double worst = 0;
  std::string where;
  for (auto mode : {FeatureMode::indexing, FeatureMode::decomposition_naive,
                    FeatureMode::decomposition_discrete_only, FeatureMode::decomposition}) {
    FeatureField<float> f(mode, 8, 8, tree, 103);
    testutil::randomize(f.parameters(), 104);
    std::vector<float> a(8), b(8);
    for (Pass pass : {Pass::train, Pass::infer}) {
      f.prepare_basic(pass);
      for (const auto& st : queries) {
        std::fill(a.begin(), a.end(), 0.0f);
        std::fill(b.begin(), b.end(), 0.0f);
        f.query(st, a, pass, QueryPath::efficient);
        f.query(st, b, pass, QueryPath::basic);
        for (int d = 0; d < 8; ++d) {
          const double diff = std::abs(static_cast<double>(a[d]) - b[d]);
          if (diff > worst) {
            worst = diff;
            where = fmt_mode(mode) + (pass == Pass::train ? "/train" : "/infer");
          }
        }
      }
    }
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-5 && t < 10.0,
          fmt::format("max |z_eff - z_basic| = {:.3g} at {} (tol 1e-5), {:.1f} s (limit 10 s)", worst,
                      where.empty() ? "-" : where, t)};
}

// ---------------------------------------------------------------------------
// 2. Composition with paired offsets equals the bias-plus-delta form.

Outcome reparameterization() {
  std::mt19937_64 rng(201);
  std::uniform_int_distribution<int> pick_b(1, 16);
  std::bernoulli_distribution coin(0.5);
  double worst = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const int B = pick_b(rng), D = 8;
    const auto comps = ComponentVectorSet<double>::random(D, B, rng, 1.0);
    std::vector<double> bits(static_cast<std::size_t>(B));
    for (auto& b : bits) b = coin(rng) ? 1.0 : 0.0;
    const auto e = compose<double>(bits, comps.view());
    const auto& w = comps.data;
    for (int d = 0; d < D; ++d) {
      double eb = w[d];
      for (int j = 0; j < B; ++j) eb += w[D + j * D + d];
      double ref = eb;
      for (int j = 0; j < B; ++j) ref += bits[j] * (w[D + B * D + j * D + d] - w[D + j * D + d]);
      worst = std::max(worst, std::abs(ref - e[d]));
    }
  }
  return {worst <= 1e-12, fmt::format("max |e - e_ref| = {:.3g} over 10^4 draws (tol 1e-12)", worst)};
}

// ---------------------------------------------------------------------------
// 3. Every trainable scalar's gradient matches central finite differences.

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  double worst = 0;
  std::size_t checked = 0, skipped = 0;
  std::string where;
  for (auto mode : {FeatureMode::continuous, FeatureMode::indexing, FeatureMode::decomposition_naive,
                    FeatureMode::decomposition_discrete_only, FeatureMode::decomposition}) {
    for (auto path : {QueryPath::efficient, QueryPath::basic}) {
      MapConfig mc;
      mc.octree.levels = 2;
      mc.octree.leaf_voxel_size = 1.0;
      mc.mode = mode;
      mc.dim = 4;
      mc.bitwidth = 3;
      mc.hidden = 8;
      mc.seed = 301;
      NeuralMap<double> map(mc, testutil::two_voxel_tree());
      const auto batch = testutil::two_voxel_batch(24, 303);
      testutil::randomize_differentiable(map, batch, LossConfig{}, 302);
      const auto r = testutil::gradient_sweep(map, batch, LossConfig{}, path);
      checked += r.checked;
      skipped += r.skipped;
      if (r.worst > worst) {
        worst = r.worst;
        where = fmt::format("{}/{} {}", fmt_mode(mode), to_string(path), r.worst_name);
      }
    }
  }
  const double t = seconds_since(t0);
  // States are drawn away from ReLU kinks and the logit clamp, so no scalar
  // should need skipping.
  return {worst <= 1e-3 && skipped == 0 && t < 120.0,
          fmt::format("{} scalars checked, {} skipped at ReLU kinks; max rel. error {:.3g} at {} (tol 1e-3), "
                      "{:.1f} s (limit 120 s)",
                      checked, skipped, worst, where, t)};
}

// ---------------------------------------------------------------------------
// 4 and 5. Sphere reconstruction in four modes, then storage at matched quality.

struct SphereRun {
  FeatureMode mode;
  MetricReport metrics;
  StorageReport storage;
  double seconds = 0;
  std::optional<NeuralMap<float>> map;
};

struct SphereData {
  std::vector<PosedScan> scans;
  std::vector<TrainingSample> samples;
  TriangleMesh gt;
};

const SphereData& sphere_data() {
  static const SphereData data = [] {
    SphereData d;
    d.scans = testutil::sphere_scans(20, 64);
    d.samples = sample_scans(d.scans, SamplingConfig{}, 1);
    d.gt = make_icosphere(1.0, 6);
    return d;
  }();
  return data;
}

TrainConfig sphere_train_config() {
  TrainConfig tc;
  tc.iterations = 2000;
  tc.batch_size = 1024;
  tc.adam.decay_step = 1000;  // the reference schedule, scaled with the iteration budget
  tc.threads = 1;
  tc.seed = 1;
  return tc;
}

std::vector<SphereRun>& sphere_runs() {
  static std::vector<SphereRun> runs = [] {
    const auto& data = sphere_data();
    std::vector<SphereRun> out;
    for (auto mode : {FeatureMode::continuous, FeatureMode::indexing,
                      FeatureMode::decomposition_discrete_only, FeatureMode::decomposition}) {
      const auto t0 = Clock::now();
      MapConfig mc;
      mc.mode = mode;
      mc.bitwidth = 4;
      mc.seed = 1;
      SphereRun run{mode, {}, {}, 0, std::nullopt};
      run.map.emplace(mc, build_octree(data.scans, mc.octree));
      run.map->finalize();
      train_batch(*run.map, std::span<const TrainingSample>(data.samples), sphere_train_config());
      const auto mesh = marching_cubes(sample_grid(*run.map, 0.05, 1), 0.0, 1);
      if (!mesh.empty()) run.metrics = compute_metrics(mesh, data.gt, 10.0, 200000, 3, 1);
      run.storage = run.map->storage();
      run.seconds = seconds_since(t0);
      fmt::print("    {:<28} C-l1 {:6.3f} cm  F {:6.2f}  Rep. {:8.1f} kB  {:5.1f} s\n", fmt_mode(mode),
                 run.metrics.chamfer_l1_cm, run.metrics.f_score_percent, run.storage.rep_kb(), run.seconds);
      std::fflush(stdout);
      out.push_back(std::move(run));
    }
    return out;
  }();
  return runs;
}

Outcome sphere_reconstruction() {
  const auto t0 = Clock::now();
  const auto& runs = sphere_runs();
  bool ok = true;
  std::string detail;
  for (const auto& r : runs) {
    const bool pass = r.metrics.chamfer_l1_cm > 0 && r.metrics.chamfer_l1_cm < 3.0 && r.metrics.f_score_percent > 95.0;
    ok = ok && pass;
    detail += fmt::format("{}{} C-l1 {:.2f} F {:.2f}{}", detail.empty() ? "" : "; ", fmt_mode(r.mode),
                          r.metrics.chamfer_l1_cm, r.metrics.f_score_percent, pass ? "" : " (fail)");
  }
  const double t = seconds_since(t0);
  ok = ok && t < 900.0;
  return {ok, fmt::format("{} (need C-l1 < 3 cm, F > 95), {:.0f} s (limit 900 s)", detail, t)};
}

Outcome storage_ordering() {
  const auto& runs = sphere_runs();
  const SphereRun* cont = nullptr;
  const SphereRun* disc = nullptr;
  for (const auto& r : runs) {
    if (r.mode == FeatureMode::continuous) cont = &r;
    if (r.mode == FeatureMode::decomposition_discrete_only) disc = &r;
  }
  const double ratio = static_cast<double>(disc->storage.rep_bytes()) / static_cast<double>(cont->storage.rep_bytes());
  const double gap = cont->metrics.f_score_percent - disc->metrics.f_score_percent;
  return {ratio <= 1.0 / 8.0 && std::abs(gap) <= 5.0,
          fmt::format("discrete Rep. {} B / continuous Rep. {} B = {:.4f} (need <= 0.125); F gap {:.2f} (need <= 5)",
                      disc->storage.rep_bytes(), cont->storage.rep_bytes(), ratio, gap)};
}

// ---------------------------------------------------------------------------
// 6. Throughput ordering on a large map.

Outcome throughput() {
  // A 60 m x 60 m ground patch at 0.2 m leaves.
  OctreeConfig oc;
  oc.levels = 3;
  oc.leaf_voxel_size = 0.2;
  std::vector<Vec3> ground;
  for (double x = -30; x < 30; x += 0.2) {
    for (double y = -30; y < 30; y += 0.2) ground.emplace_back(x + 0.1, y + 0.1, 0.1);
  }
  auto tree = SparseOctree::build(ground, oc);
  tree.finalize();
  const std::size_t corners = tree.total_corner_count();

  std::mt19937_64 rng(601);
  std::uniform_real_distribution<double> u(-29.9, 29.9), h(0.02, 0.18);
  std::vector<TrainingSample> samples(200000);
  for (auto& s : samples) {
    s.x = Vec3(u(rng), u(rng), h(rng));
    s.label = s.x.z() - 0.1;
  }

  auto rate = [&](FeatureMode mode, QueryPath path) {
    MapConfig mc;
    mc.octree = oc;
    mc.mode = mode;
    mc.bitwidth = 8;
    NeuralMap<float> map(mc, tree);
    TrainConfig tc;
    tc.iterations = 25;
    tc.batch_size = 4096;
    tc.threads = 1;
    tc.path = path;
    const auto res = train_batch(map, std::span<const TrainingSample>(samples), tc);
    return res.iterations_per_second(5, 25);
  };
  const double dec_eff = rate(FeatureMode::decomposition, QueryPath::efficient);
  const double dec_basic = rate(FeatureMode::decomposition, QueryPath::basic);
  const double idx_eff = rate(FeatureMode::indexing, QueryPath::efficient);
  const double speedup = dec_eff / dec_basic;
  const bool ok = corners >= 100000 && dec_eff > idx_eff && speedup >= 1.05;
  return {ok, fmt::format("{} corners; decomposition {:.2f} it/s vs indexing {:.2f} it/s; efficient/basic "
                          "{:.2f}/{:.2f} = {:.3f}x (need >= 1.05x)",
                          corners, dec_eff, idx_eff, dec_eff, dec_basic, speedup)};
}

// ---------------------------------------------------------------------------
// 7. Marching cubes on an analytic sphere.

Outcome marching_cubes_check() {
  const double cell = 0.05;
  auto grid = make_grid(Vec3::Constant(-1.3), Vec3::Constant(1.3), cell);
  fill_grid(grid, [](const Vec3& x) -> std::optional<double> { return x.norm() - 1.0; }, 1);
  const auto mesh = marching_cubes(grid, 0.0, 1);
  double worst = 0;
  for (const auto& v : mesh.vertices) worst = std::max(worst, std::abs(v.norm() - 1.0));
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> edges;
  for (const auto& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      auto a = f[k], b = f[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      ++edges[{a, b}];
    }
  }
  std::size_t bad = 0;
  for (const auto& [e, n] : edges) bad += n != 2 ? 1 : 0;
  return {!mesh.empty() && worst < cell && bad == 0,
          fmt::format("{} triangles; max vertex distance {:.4f} m (need < {}); {} of {} edges not shared by "
                      "exactly 2 triangles",
                      mesh.faces.size(), worst, cell, bad, edges.size())};
}

// ---------------------------------------------------------------------------
// 8. Reference-mode determinism and checkpoint persistence.

Outcome determinism() {
  const auto& data = sphere_data();
  auto trace = [&] {
    MapConfig mc;
    mc.bitwidth = 4;
    mc.seed = 7;
    NeuralMap<float> map(mc, build_octree(data.scans, mc.octree));
    map.finalize();
    auto tc = sphere_train_config();
    tc.iterations = 200;
    tc.seed = 7;
    return train_batch(map, std::span<const TrainingSample>(data.samples), tc).trace;
  };
  const auto a = trace(), b = trace();
  double trace_diff = a.size() == b.size() ? 0.0 : 1e300;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
    trace_diff = std::max({trace_diff, std::abs(a[i].sdf - b[i].sdf), std::abs(a[i].eikonal - b[i].eikonal)});
  }

  testutil::TempDir dir("accept");
  std::size_t mismatches = 0, probes = 0, maps = 0;
  for (auto& run : sphere_runs()) {
    const auto path = dir / (fmt_mode(run.mode) + ".dnmp");
    save_checkpoint(*run.map, path);
    const auto loaded = load_checkpoint<float>(path);
    ++maps;
    std::mt19937_64 rng(801);
    std::size_t n = 0;
    while (n < 1000) {
      const auto x = testutil::random_point(rng, Vec3::Constant(-1.3), Vec3::Constant(1.3));
      const auto p = run.map->sdf(x);
      if (!p) continue;
      const auto q = loaded.map.sdf(x);
      if (!q || std::memcmp(&*p, &*q, sizeof(float)) != 0) ++mismatches;
      ++n;
    }
    probes += n;
  }
  return {trace_diff <= 1e-6 && mismatches == 0,
          fmt::format("loss trace max diff {:.3g} over {} iterations (tol 1e-6); {} of {} probes differ after "
                      "save/load across {} maps",
                      trace_diff, a.size(), mismatches, probes, maps)};
}

// ---------------------------------------------------------------------------
// 9. Incremental mapping with replay against batch training.

Outcome incremental() {
  const auto scans = testutil::sphere_scans(2, 64);
  const auto gt = make_icosphere(1.0, 6);
  MapConfig mc;
  mc.bitwidth = 4;
  mc.seed = 1;
  auto tc = sphere_train_config();
  tc.iterations_per_scan = tc.iterations / 2;

  NeuralMap<float> inc(mc, SparseOctree(mc.octree));
  train_incremental(inc, std::span<const PosedScan>(scans), SamplingConfig{}, tc);
  inc.finalize();

  NeuralMap<float> batch(mc, build_octree(scans, mc.octree));
  batch.finalize();
  const auto samples = sample_scans(scans, SamplingConfig{}, tc.seed);
  train_batch(batch, std::span<const TrainingSample>(samples), tc);

  auto score = [&](const NeuralMap<float>& m) {
    const auto mesh = marching_cubes(sample_grid(m, 0.05, 1), 0.0, 1);
    return mesh.empty() ? 0.0 : compute_metrics(mesh, gt, 10.0, 200000, 3, 1).f_score_percent;
  };
  const double f_inc = score(inc), f_batch = score(batch);
  return {std::abs(f_batch - f_inc) <= 5.0,
          fmt::format("incremental F {:.2f} vs batch F {:.2f}, gap {:.2f} (need <= 5)", f_inc, f_batch,
                      f_batch - f_inc)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<int, std::pair<const char*, std::function<Outcome()>>>> criteria{
      {1, {"basic/efficient query equivalence", path_equivalence}},
      {2, {"composition reparameterization", reparameterization}},
      {3, {"gradient suite", gradient_suite}},
      {4, {"sphere reconstruction", sphere_reconstruction}},
      {5, {"storage ordering at matched quality", storage_ordering}},
      {6, {"throughput ordering", throughput}},
      {7, {"marching cubes correctness", marching_cubes_check}},
      {8, {"determinism and persistence", determinism}},
      {9, {"incremental vs batch", incremental}},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& [id, entry] : criteria) {
    if (!wanted.empty() && !wanted.count(id)) continue;
    const auto& [name, fn] = entry;
    fmt::print("criterion {}: {} ...\n", id, name);
    std::fflush(stdout);
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    fmt::print("[{}] {} {}: {} [{:.1f} s]\n", o.pass ? "PASS" : "FAIL", id, name, o.detail, seconds_since(t0));
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  fmt::print("{} criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
