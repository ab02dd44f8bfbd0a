#pragma once

#include "dnmap/loss.hpp"
#include "dnmap/neural_map.hpp"
#include "dnmap/optimizer.hpp"
#include "dnmap/sampler.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dnmap {

struct TrainConfig {
  std::int64_t iterations = 20000;
  std::size_t batch_size = 8192;
  AdamConfig adam;
  LossConfig loss;
  QueryPath path = QueryPath::efficient;
  int threads = 0;  // 0: all cores
  std::uint64_t seed = 0;

  // Incremental mode.
  std::size_t replay_capacity = 1000000;
  double replay_old_fraction = 0.5;
  std::int64_t iterations_per_scan = 300;

  void validate() const;
};

struct LossRecord {
  std::int64_t iteration = 0;  // 0-based
  double sdf = 0;
  double eikonal = 0;
  double lr = 0;
};

struct TrainResult {
  std::vector<LossRecord> trace;
  std::vector<double> elapsed_seconds;  // wall time after each iteration
  OpCounter ops;

  /// Iterations per second measured over [first, last) iterations.
  double iterations_per_second(std::int64_t first, std::int64_t last) const;
};

/// Called with the number of completed iterations.
using TrainHook = std::function<void(std::int64_t)>;

/// Octree over all scan endpoints.
SparseOctree build_octree(std::span<const PosedScan> scans, const OctreeConfig& config);

/// Uniform batches (with replacement) over all samples. Throws InputError on
/// an empty sample set. The octree is not modified.
template <class T>
TrainResult train_batch(NeuralMap<T>& map, std::span<const TrainingSample> samples,
                        const TrainConfig& config, const TrainHook& hook = {},
                        std::int64_t hook_every = 0);

/// Scan-by-scan mapping: extend the octree, train iterations_per_scan steps on
/// batches mixing the current scan's samples with replayed ones, then add the
/// scan's samples to the replay buffer.
template <class T>
TrainResult train_incremental(NeuralMap<T>& map, std::span<const PosedScan> scans,
                              const SamplingConfig& sampling, const TrainConfig& config,
                              const TrainHook& hook = {}, std::int64_t hook_every = 0);

/// CSV with header iteration,sdf_loss,eikonal_loss,lr; `comments` become
/// leading '# key=value' lines.
void write_loss_trace(const std::filesystem::path& path, std::span<const LossRecord> trace,
                      std::span<const std::pair<std::string, std::string>> comments = {});
std::vector<LossRecord> read_loss_trace(const std::filesystem::path& path);

extern template TrainResult train_batch<float>(NeuralMap<float>&, std::span<const TrainingSample>,
                                               const TrainConfig&, const TrainHook&, std::int64_t);
extern template TrainResult train_batch<double>(NeuralMap<double>&, std::span<const TrainingSample>,
                                                const TrainConfig&, const TrainHook&, std::int64_t);
extern template TrainResult train_incremental<float>(NeuralMap<float>&, std::span<const PosedScan>,
                                                     const SamplingConfig&, const TrainConfig&,
                                                     const TrainHook&, std::int64_t);
extern template TrainResult train_incremental<double>(NeuralMap<double>&, std::span<const PosedScan>,
                                                      const SamplingConfig&, const TrainConfig&,
                                                      const TrainHook&, std::int64_t);

}  // namespace dnmap
