#include "dnmap/trainer.hpp"

#include "dnmap/replay.hpp"

#include <fmt/format.h>

#include <chrono>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace dnmap {

void TrainConfig::validate() const {
  if (iterations < 0) throw std::invalid_argument("iterations must be non-negative");
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (replay_capacity == 0) throw std::invalid_argument("replay capacity must be positive");
  if (!(replay_old_fraction >= 0 && replay_old_fraction < 1)) {
    throw std::invalid_argument("replay old fraction must be in [0, 1)");
  }
  if (iterations_per_scan < 0) throw std::invalid_argument("iterations per scan must be non-negative");
  adam.validate();
  loss.validate();
}

double TrainResult::iterations_per_second(std::int64_t first, std::int64_t last) const {
  const auto n = static_cast<std::int64_t>(elapsed_seconds.size());
  first = std::clamp<std::int64_t>(first, 0, n);
  last = std::clamp<std::int64_t>(last, 0, n);
  if (last - first < 1) return 0.0;
  const double t0 = first == 0 ? 0.0 : elapsed_seconds[static_cast<std::size_t>(first - 1)];
  const double t1 = elapsed_seconds[static_cast<std::size_t>(last - 1)];
  return t1 > t0 ? static_cast<double>(last - first) / (t1 - t0) : 0.0;
}

SparseOctree build_octree(std::span<const PosedScan> scans, const OctreeConfig& config) {
  std::vector<Vec3> pts;
  for (const auto& s : scans) pts.insert(pts.end(), s.endpoints.begin(), s.endpoints.end());
  return SparseOctree::build(pts, config);
}

namespace {

using Clock = std::chrono::steady_clock;

template <class T>
class Stepper {
 public:
  Stepper(NeuralMap<T>& map, const TrainConfig& config, TrainResult& result)
      : map_(map), config_(config), adam_(config.adam), result_(result), start_(Clock::now()) {}

  void step(std::span<const TrainingSample> batch) {
    map_.zero_grad();
    const double lr = adam_.current_lr();
    const LossStats stats = total_loss(map_, batch, config_.loss, config_.path, config_.threads,
                                       true, &ws_, &result_.ops);
    auto params = map_.parameters();
    adam_.step(params);
    result_.trace.push_back({iteration_, stats.sdf, stats.eikonal, lr});
    result_.elapsed_seconds.push_back(std::chrono::duration<double>(Clock::now() - start_).count());
    ++iteration_;
  }

  std::int64_t iteration() const noexcept { return iteration_; }

 private:
  NeuralMap<T>& map_;
  const TrainConfig& config_;
  Adam<T> adam_;
  TrainResult& result_;
  LossWorkspace<T> ws_;
  Clock::time_point start_;
  std::int64_t iteration_ = 0;
};

void draw(std::span<const TrainingSample> pool, std::size_t count, std::mt19937_64& rng,
          std::vector<TrainingSample>& out) {
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  for (std::size_t i = 0; i < count; ++i) out.push_back(pool[pick(rng)]);
}

void maybe_hook(const TrainHook& hook, std::int64_t every, std::int64_t done) {
  if (hook && every > 0 && done % every == 0) hook(done);
}

}  // namespace

template <class T>
TrainResult train_batch(NeuralMap<T>& map, std::span<const TrainingSample> samples,
                        const TrainConfig& config, const TrainHook& hook, std::int64_t hook_every) {
  config.validate();
  if (samples.empty()) throw InputError("training set is empty");
  TrainResult result;
  Stepper<T> stepper(map, config, result);
  std::mt19937_64 rng(config.seed);
  std::vector<TrainingSample> batch;
  batch.reserve(config.batch_size);
  for (std::int64_t it = 0; it < config.iterations; ++it) {
    batch.clear();
    draw(samples, config.batch_size, rng, batch);
    stepper.step(batch);
    maybe_hook(hook, hook_every, it + 1);
  }
  return result;
}

template <class T>
TrainResult train_incremental(NeuralMap<T>& map, std::span<const PosedScan> scans,
                              const SamplingConfig& sampling, const TrainConfig& config,
                              const TrainHook& hook, std::int64_t hook_every) {
  config.validate();
  sampling.validate();
  if (scans.empty()) throw InputError("scan stream is empty");
  TrainResult result;
  Stepper<T> stepper(map, config, result);
  std::mt19937_64 rng(config.seed);
  ReplayBuffer replay(config.replay_capacity);
  std::vector<TrainingSample> batch;
  batch.reserve(config.batch_size);
  const auto old_count = static_cast<std::size_t>(
      static_cast<double>(config.batch_size) * config.replay_old_fraction + 0.5);
  for (std::size_t s = 0; s < scans.size(); ++s) {
    map.extend(scans[s].endpoints);
    const auto current = sample_scan(scans[s], sampling, config.seed, s, config.threads);
    if (current.empty()) continue;
    for (std::int64_t k = 0; k < config.iterations_per_scan; ++k) {
      batch.clear();
      const std::size_t n_old = replay.empty() ? 0 : old_count;
      draw(current, config.batch_size - n_old, rng, batch);
      if (n_old > 0) replay.sample(n_old, rng, batch);
      stepper.step(batch);
      maybe_hook(hook, hook_every, stepper.iteration());
    }
    replay.add(current, rng);
  }
  return result;
}

void write_loss_trace(const std::filesystem::path& path, std::span<const LossRecord> trace,
                      std::span<const std::pair<std::string, std::string>> comments) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
  for (const auto& [k, v] : comments) out << "# " << k << "=" << v << "\n";
  out << "iteration,sdf_loss,eikonal_loss,lr\n";
  for (const auto& r : trace) out << fmt::format("{},{},{},{}\n", r.iteration, r.sdf, r.eikonal, r.lr);
  if (!out) throw InputError("failed writing '" + path.string() + "'");
}

std::vector<LossRecord> read_loss_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "' for reading");
  std::vector<LossRecord> out;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    std::istringstream ls(line);
    LossRecord r;
    char c1 = 0, c2 = 0, c3 = 0;
    if (!(ls >> r.iteration >> c1 >> r.sdf >> c2 >> r.eikonal >> c3 >> r.lr) || c1 != ',' ||
        c2 != ',' || c3 != ',') {
      throw ParseError(fmt::format("{}:{}: malformed loss trace row", path.string(), lineno), lineno);
    }
    out.push_back(r);
  }
  return out;
}

template TrainResult train_batch<float>(NeuralMap<float>&, std::span<const TrainingSample>,
                                        const TrainConfig&, const TrainHook&, std::int64_t);
template TrainResult train_batch<double>(NeuralMap<double>&, std::span<const TrainingSample>,
                                         const TrainConfig&, const TrainHook&, std::int64_t);
template TrainResult train_incremental<float>(NeuralMap<float>&, std::span<const PosedScan>,
                                              const SamplingConfig&, const TrainConfig&,
                                              const TrainHook&, std::int64_t);
template TrainResult train_incremental<double>(NeuralMap<double>&, std::span<const PosedScan>,
                                               const SamplingConfig&, const TrainConfig&,
                                               const TrainHook&, std::int64_t);

}  // namespace dnmap
