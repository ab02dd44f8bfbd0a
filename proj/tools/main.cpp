#include "commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace dnmap::cli;
  CLI::App app{"dnmap: neural SDF mapping with compact discrete octree features"};
  app.require_subcommand(1);
  app.fallthrough();

  CommonOptions common;
  std::string config, data, out;
  std::uint64_t seed = 0;
  int threads = 0, bitwidth = 0;
  std::string mode;
  auto* o_config = app.add_option("--config", config, "INI run configuration");
  app.add_option("--data", data, "dataset directory (poses.txt + scans/)");
  app.add_option("--out", out, "output path");
  auto* o_seed = app.add_option("--seed", seed, "random seed");
  auto* o_threads = app.add_option("--threads", threads, "worker threads (0: all cores)");
  auto* o_mode = app.add_option("--mode", mode,
                                "continuous | indexing | decomposition_naive | "
                                "decomposition_discrete_only | decomposition");
  auto* o_bits = app.add_option("--bitwidth", bitwidth, "indicator bits B");
  app.add_flag("--reference-mode", common.reference_mode, "single-threaded, bit-reproducible run");

  SynthOptions synth;
  auto* c_synth = app.add_subcommand("synth", "render virtual LiDAR scans of an analytic scene");
  c_synth->add_option("--scene", synth.scene, "sphere | box | sphere_on_plane");
  c_synth->add_option("--scans", synth.scans, "number of scans");
  c_synth->add_option("--format", synth.format, "ply | xyz");
  c_synth->add_option("--rays", synth.rays, "rays per axis");
  c_synth->add_option("--fov", synth.fov, "field of view per axis (radians)");
  c_synth->add_option("--distance", synth.distance, "sensor distance from the scene center (m)");

  auto* c_train = app.add_subcommand("train", "train a map; writes map.dnmp and loss.csv into --out");

  MeshOptions mesh;
  double cell = 0;
  auto* c_mesh = app.add_subcommand("mesh", "extract a mesh (.ply or .obj) from a checkpoint");
  c_mesh->add_option("--checkpoint", mesh.checkpoint, "checkpoint file")->required();
  auto* o_cell = c_mesh->add_option("--cell", cell, "marching-cubes cell size (m)");

  EvalOptions eval;
  std::string eval_ckpt;
  double thr = 0;
  auto* c_eval = app.add_subcommand("eval", "compare a reconstruction against a ground-truth mesh");
  c_eval->add_option("--recon", eval.recon, "reconstructed mesh")->required();
  c_eval->add_option("--gt", eval.gt, "ground-truth mesh")->required();
  auto* o_eval_ckpt = c_eval->add_option("--checkpoint", eval_ckpt, "checkpoint for storage columns");
  auto* o_thr = c_eval->add_option("--threshold", thr, "F-score threshold (cm)");

  AblateOptions ablate;
  std::string gt_path;
  auto* c_ablate = app.add_subcommand("ablate", "sweep representation x bitwidth x query path");
  c_ablate->add_option("--modes", ablate.modes, "feature modes to include");
  c_ablate->add_option("--bitwidths", ablate.bitwidths, "bitwidths to include");
  auto* o_gt = c_ablate->add_option("--gt", gt_path, "ground-truth mesh (default: <data>/gt.ply)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  if (*o_config) common.config = config;
  common.data = data;
  common.out = out;
  if (*o_seed) common.seed = seed;
  if (*o_threads) common.threads = threads;
  if (*o_mode) common.mode = mode;
  if (*o_bits) common.bitwidth = bitwidth;
  if (*o_cell) mesh.cell = cell;
  if (*o_eval_ckpt) eval.checkpoint = eval_ckpt;
  if (*o_thr) eval.threshold_cm = thr;
  if (*o_gt) ablate.gt = gt_path;

  try {
    if (c_synth->parsed()) run_synth(common, synth, std::cout);
    if (c_train->parsed()) run_train(common, std::cout);
    if (c_mesh->parsed()) run_mesh(common, mesh, std::cout);
    if (c_eval->parsed()) run_eval(common, eval, std::cout);
    if (c_ablate->parsed()) run_ablate(common, ablate, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "dnmap: error: " << e.what() << "\n";
    return exit_code_for(std::current_exception());
  }
  return kOk;
}
