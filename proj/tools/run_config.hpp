#pragma once

#include "dnmap/checkpoint.hpp"
#include "dnmap/loss.hpp"
#include "dnmap/neural_map.hpp"
#include "dnmap/sampler.hpp"
#include "dnmap/trainer.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>

namespace dnmap::cli {

/// Invalid or unknown configuration; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MeshSettings {
  double cell = 0.10;
};

struct EvalSettings {
  double threshold_cm = 10.0;
  std::size_t samples = 1000000;
  std::int64_t every = 10000;  // ablation F-score cadence, iterations
};

/// Everything a pipeline run needs. Defaults follow the reference setup:
/// L=3, 0.2 m leaves, D=8, B=8, N_F=6, N_S=3, s=0.05, 20000 iterations of
/// 8192 samples, lr 0.01 decaying to 0.001 after step 10000, lambda 0.1.
struct RunConfig {
  MapConfig map;
  SamplingConfig sampling;
  TrainConfig train;
  bool incremental = false;
  MeshSettings mesh;
  EvalSettings eval;

  RunConfig();

  /// Parses INI text with sections [octree] [embedding] [sampling] [train]
  /// [mesh] [eval]. Unknown sections or keys and malformed values raise
  /// ConfigError; omitted keys keep their defaults.
  static RunConfig parse(const std::string& text, const std::string& source = "<string>");
  static RunConfig load(const std::filesystem::path& path);

  /// Throws ConfigError when a value is out of range.
  void validate() const;

  /// Flat "section.key" = value pairs covering every setting.
  ConfigEcho echo() const;
  std::string to_ini() const;
};

}  // namespace dnmap::cli
