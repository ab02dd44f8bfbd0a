#include "commands.hpp"

#include "dnmap/checkpoint.hpp"
#include "dnmap/eval.hpp"
#include "dnmap/mesh_io.hpp"
#include "dnmap/meshing.hpp"
#include "dnmap/scan_io.hpp"
#include "dnmap/scene.hpp"
#include "dnmap/trainer.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <chrono>
#include <cstring>
#include <fstream>
#include <ostream>

namespace dnmap::cli {
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void require_dir(const fs::path& p, const char* flag) {
  if (p.empty()) throw ConfigError(fmt::format("{} is required", flag));
}

TriangleMesh ground_truth_for(const std::string& scene_name, const AnalyticScene& scene) {
  if (scene_name == "sphere") return make_icosphere(1.0, 6);
  MeshGrid g = make_grid(Vec3(-2, -2, -2), Vec3(2, 2, 2), 0.02);
  fill_grid(g, [&](const Vec3& x) -> std::optional<double> { return scene.sdf(x); }, 0);
  return marching_cubes(g, 0.0, 0);
}

void fnv(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}

}  // namespace

std::uint64_t input_hash(const SparseOctree& tree, std::span<const TrainingSample> samples) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (int l = 0; l < tree.levels(); ++l) {
    const auto codes = tree.voxel_codes(l);
    fnv(h, codes.data(), codes.size() * sizeof(std::uint64_t));
  }
  for (const auto& s : samples) {
    fnv(h, s.x.data(), 3 * sizeof(double));
    fnv(h, &s.label, sizeof(double));
  }
  return h;
}

RunConfig resolve_config(const CommonOptions& c) {
  RunConfig cfg = c.config ? RunConfig::load(*c.config) : RunConfig();
  if (c.seed) {
    cfg.train.seed = *c.seed;
    cfg.map.seed = *c.seed;
  }
  if (c.threads) cfg.train.threads = *c.threads;
  if (c.mode) {
    try {
      cfg.map.mode = parse_feature_mode(*c.mode);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(fmt::format("--mode: {}", e.what()));
    }
  }
  if (c.bitwidth) cfg.map.bitwidth = *c.bitwidth;
  if (c.reference_mode) cfg.train.threads = 1;
  cfg.validate();
  return cfg;
}

void run_synth(const CommonOptions& common, const SynthOptions& o, std::ostream& log) {
  require_dir(common.out, "--out");
  resolve_config(common);  // validates global flags only
  if (o.scans <= 0) throw ConfigError("--scans must be positive");
  if (o.rays <= 0) throw ConfigError("--rays must be positive");
  if (o.format != "ply" && o.format != "xyz") throw ConfigError("--format must be 'ply' or 'xyz'");
  AnalyticScene scene;
  try {
    scene = AnalyticScene::named(o.scene);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(fmt::format("--scene: {}", e.what()));
  }
  const bool ground = o.scene == "sphere_on_plane";
  const Vec3 target = ground ? Vec3(0, 0, 0.6) : Vec3::Zero();
  const auto poses = orbit_poses(o.scans, o.distance, target, ground);
  const auto dirs = grid_directions(o.rays, o.rays, o.fov, o.fov);
  std::vector<std::vector<Vec3>> local(poses.size());
  std::size_t total = 0;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const PosedScan scan = virtual_lidar(scene, poses[i], dirs, 4.0 * o.distance);
    const Eigen::Matrix3d rt = poses[i].rotation.transpose();
    for (const auto& p : scan.endpoints) local[i].push_back(rt * (p - poses[i].translation));
    total += local[i].size();
  }
  write_dataset(common.out, local, poses, o.format == "ply" ? ScanFormat::ply_binary : ScanFormat::xyz_ascii);
  write_mesh(ground_truth_for(o.scene, scene), common.out / "gt.ply");
  std::ofstream(common.out / "scene.txt") << o.scene << "\n";
  fmt::print(log, "synth: scene '{}', {} scans, {} endpoints -> {}\n", o.scene, poses.size(), total,
             common.out.string());
}

void run_train(const CommonOptions& common, std::ostream& log) {
  require_dir(common.data, "--data");
  require_dir(common.out, "--out");
  const RunConfig cfg = resolve_config(common);
  const auto scans = load_dataset(common.data);
  fs::create_directories(common.out);
  const auto t0 = Clock::now();

  TrainResult result;
  std::optional<NeuralMap<float>> map;
  if (cfg.incremental) {
    map.emplace(cfg.map, SparseOctree(cfg.map.octree));
    result = train_incremental(*map, scans, cfg.sampling, cfg.train);
    map->finalize();
  } else {
    map.emplace(cfg.map, build_octree(scans, cfg.map.octree));
    map->finalize();
    const auto samples = sample_scans(scans, cfg.sampling, cfg.train.seed, cfg.train.threads);
    if (samples.empty()) throw InputError("dataset produced no training samples");
    result = train_batch(*map, samples, cfg.train);
  }
  const auto echo = cfg.echo();
  save_checkpoint(*map, common.out / "map.dnmp", echo);
  write_loss_trace(common.out / "loss.csv", result.trace, echo);
  std::ofstream(common.out / "config.ini") << cfg.to_ini();
  const StorageReport st = map->storage();
  const double last_sdf = result.trace.empty() ? 0.0 : result.trace.back().sdf;
  fmt::print(log, "train: mode {}, {} iterations in {:.1f} s, final sdf loss {:.5f}\n",
             to_string(cfg.map.mode), result.trace.size(), seconds_since(t0), last_sdf);
  fmt::print(log, "train: {} voxels, {} corners, Rep. {:.1f} kB, Total {:.1f} kB -> {}\n",
             map->tree().total_voxel_count(), map->tree().total_corner_count(), st.rep_kb(),
             st.total_kb(), (common.out / "map.dnmp").string());
}

void run_mesh(const CommonOptions& common, const MeshOptions& o, std::ostream& log) {
  if (o.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  require_dir(common.out, "--out");
  const RunConfig cfg = resolve_config(common);
  const double cell = o.cell.value_or(cfg.mesh.cell);
  if (!(cell > 0)) throw ConfigError("--cell must be positive");
  const auto loaded = load_checkpoint<float>(o.checkpoint);
  const MeshGrid grid = sample_grid(loaded.map, cell, cfg.train.threads);
  const TriangleMesh mesh = marching_cubes(grid, 0.0, cfg.train.threads);
  write_mesh(mesh, common.out);
  fmt::print(log, "mesh: {} vertices, {} triangles at cell {} m -> {}\n", mesh.vertices.size(),
             mesh.faces.size(), cell, common.out.string());
}

void run_eval(const CommonOptions& common, const EvalOptions& o, std::ostream& log) {
  if (o.recon.empty() || o.gt.empty()) throw ConfigError("--recon and --gt are required");
  const RunConfig cfg = resolve_config(common);
  const double thr = o.threshold_cm.value_or(cfg.eval.threshold_cm);
  const TriangleMesh recon = read_mesh(o.recon);
  const TriangleMesh gt = read_mesh(o.gt);
  MetricReport r = compute_metrics(recon, gt, thr, cfg.eval.samples, cfg.train.seed, cfg.train.threads);
  if (o.checkpoint) {
    const CheckpointHeader h = read_checkpoint_header(*o.checkpoint);
    StorageReport st;
    st.indicator_bytes = h.section(CheckpointSection::indicators);
    st.component_bytes = h.section(CheckpointSection::components);
    st.continuous_bytes = h.section(CheckpointSection::continuous);
    st.decoder_bytes = h.section(CheckpointSection::decoder);
    const std::uint64_t total = std::stoull(h.at("storage.total_bytes"));
    const std::uint64_t known = st.rep_bytes() + st.decoder_bytes;
    st.spatial_bytes = total > known ? total - known : 0;
    r.storage = st;
  }
  log << report_table(r);
  if (!common.out.empty()) {
    std::ofstream out(common.out);
    if (!out) throw InputError("cannot open '" + common.out.string() + "' for writing");
    out << report_csv_header() << "\n" << report_csv_row(r) << "\n";
  }
}

void run_ablate(const CommonOptions& common, const AblateOptions& o, std::ostream& log) {
  require_dir(common.data, "--data");
  require_dir(common.out, "--out");
  const RunConfig base = resolve_config(common);
  std::vector<FeatureMode> modes;
  if (o.modes.empty()) {
    modes = {FeatureMode::continuous, FeatureMode::indexing, FeatureMode::decomposition_naive,
             FeatureMode::decomposition_discrete_only, FeatureMode::decomposition};
  } else {
    for (const auto& m : o.modes) {
      try {
        modes.push_back(parse_feature_mode(m));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(fmt::format("--modes: {}", e.what()));
      }
    }
  }
  std::vector<int> bits = o.bitwidths;
  if (bits.empty()) bits = common.bitwidth ? std::vector<int>{*common.bitwidth} : std::vector<int>{4, 6, 8};

  const auto scans = load_dataset(common.data);
  const fs::path gt_path = o.gt.value_or(common.data / "gt.ply");
  std::optional<TriangleMesh> gt;
  if (fs::exists(gt_path)) gt = read_mesh(gt_path);
  const SparseOctree tree = [&] {
    SparseOctree t = build_octree(scans, base.map.octree);
    t.finalize();
    return t;
  }();
  const auto samples = sample_scans(scans, base.sampling, base.train.seed, base.train.threads);
  if (samples.empty()) throw InputError("dataset produced no training samples");

  std::ofstream out(common.out);
  if (!out) throw InputError("cannot open '" + common.out.string() + "' for writing");
  for (const auto& [k, v] : base.echo()) out << "# " << k << "=" << v << "\n";
  out << "mode,bitwidth,path,status,iterations,its_per_sec,compose_ops_per_iter,rep_kb,total_kb,"
         "input_hash,final_fscore,fscore_trace,error\n";

  for (FeatureMode mode : modes) {
    for (std::size_t bi = 0; bi < bits.size(); ++bi) {
      if (mode == FeatureMode::continuous && bi > 0) break;
      for (QueryPath path : {QueryPath::basic, QueryPath::efficient}) {
        if (mode == FeatureMode::continuous && path == QueryPath::basic) continue;
        RunConfig cfg = base;
        cfg.map.mode = mode;
        cfg.map.bitwidth = bits[bi];
        cfg.train.path = path;
        std::string status = "ok", error, trace;
        double its = 0, ops = 0, final_f = -1;
        std::int64_t iters = 0;
        std::uint64_t hash = 0;
        StorageReport st;
        try {
          cfg.validate();
          NeuralMap<float> map(cfg.map, tree);
          hash = input_hash(map.tree(), samples);
          auto hook = [&](std::int64_t done) {
            if (!gt) return;
            const TriangleMesh mesh = marching_cubes(sample_grid(map, cfg.mesh.cell, cfg.train.threads), 0.0,
                                                     cfg.train.threads);
            double f = 0;
            if (!mesh.empty()) {
              f = compute_metrics(mesh, *gt, cfg.eval.threshold_cm, cfg.eval.samples, cfg.train.seed,
                                  cfg.train.threads).f_score_percent;
            }
            trace += fmt::format("{}{}:{:.2f}", trace.empty() ? "" : ";", done, f);
            final_f = f;
          };
          const TrainResult res = train_batch(map, samples, cfg.train, hook, cfg.eval.every);
          iters = static_cast<std::int64_t>(res.trace.size());
          const std::int64_t first = std::min<std::int64_t>(100, iters / 10);
          its = res.iterations_per_second(first, std::min<std::int64_t>(iters, first + 1000));
          ops = iters > 0 ? static_cast<double>(res.ops.compose_ops) / static_cast<double>(iters) : 0.0;
          if (gt && (iters % cfg.eval.every != 0)) hook(iters);
          st = map.storage();
        } catch (const std::exception& e) {
          status = "failed";
          error = e.what();
          for (char& ch : error) {
            if (ch == ',' || ch == '\n') ch = ' ';
          }
        }
        out << fmt::format("{},{},{},{},{},{:.3f},{:.0f},{:.3f},{:.3f},{:016x},{},{},{}\n", to_string(mode),
                           mode == FeatureMode::continuous ? 0 : bits[bi], to_string(path), status,
                           iters, its, ops, st.rep_kb(), st.total_kb(), hash,
                           final_f >= 0 ? fmt::format("{:.2f}", final_f) : std::string(), trace, error);
        out.flush();
        fmt::print(log, "ablate: {:<28} B={} {:<9} {} {:.2f} it/s F={}\n", to_string(mode), bits[bi],
                   to_string(path), status, its, final_f >= 0 ? fmt::format("{:.2f}", final_f) : "-");
      }
    }
  }
}

int exit_code_for(std::exception_ptr error) {
  try {
    std::rethrow_exception(error);
  } catch (const ConfigError&) {
    return kConfigError;
  } catch (const InputError&) {
    return kDataError;
  } catch (const ParseError&) {
    return kDataError;
  } catch (const FormatError&) {
    return kDataError;
  } catch (const EmptyMapError&) {
    return kDataError;
  } catch (const EvalError&) {
    return kDataError;
  } catch (const fs::filesystem_error&) {
    return kDataError;
  } catch (...) {
    return kRuntimeError;
  }
}

}  // namespace dnmap::cli
