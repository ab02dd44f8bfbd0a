#pragma once

#include "run_config.hpp"

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dnmap::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kDataError = 3, kRuntimeError = 4 };

/// Flags shared by every subcommand.
struct CommonOptions {
  std::optional<std::filesystem::path> config;
  std::filesystem::path data;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> mode;
  std::optional<int> bitwidth;
  bool reference_mode = false;
};

struct SynthOptions {
  std::string scene = "sphere";
  int scans = 10;
  std::string format = "ply";
  int rays = 64;          // azimuth and elevation samples per scan
  double fov = 0.8;       // radians, both axes
  double distance = 3.0;  // sensor orbit radius, meters
};

struct MeshOptions {
  std::filesystem::path checkpoint;
  std::optional<double> cell;
};

struct EvalOptions {
  std::filesystem::path recon;
  std::filesystem::path gt;
  std::optional<std::filesystem::path> checkpoint;
  std::optional<double> threshold_cm;
};

struct AblateOptions {
  std::vector<std::string> modes;   // empty: all
  std::vector<int> bitwidths;       // empty: --bitwidth or {4, 6, 8}
  std::optional<std::filesystem::path> gt;
};

/// Defaults, then --config, then flag overrides. Reference mode forces one thread.
RunConfig resolve_config(const CommonOptions& common);

void run_synth(const CommonOptions& common, const SynthOptions& opts, std::ostream& log);
void run_train(const CommonOptions& common, std::ostream& log);
void run_mesh(const CommonOptions& common, const MeshOptions& opts, std::ostream& log);
void run_eval(const CommonOptions& common, const EvalOptions& opts, std::ostream& log);
void run_ablate(const CommonOptions& common, const AblateOptions& opts, std::ostream& log);

/// Exit code for an exception escaping a command.
int exit_code_for(std::exception_ptr error);

/// FNV-1a over the octree voxel codes and the training samples.
std::uint64_t input_hash(const SparseOctree& tree, std::span<const TrainingSample> samples);

}  // namespace dnmap::cli
