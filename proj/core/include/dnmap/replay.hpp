#pragma once

#include "dnmap/sampler.hpp"

#include <cstddef>
#include <random>
#include <span>
#include <vector>

namespace dnmap {

/// Bounded store of past training pairs. Once full, new samples replace
/// stored ones by reservoir sampling, so the buffer stays a uniform subset
/// of everything offered.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return items_.size(); }
  bool empty() const noexcept { return items_.empty(); }
  std::size_t seen() const noexcept { return seen_; }

  void add(std::span<const TrainingSample> samples, std::mt19937_64& rng);
  /// Appends `count` uniform draws (with replacement) to `out`.
  void sample(std::size_t count, std::mt19937_64& rng, std::vector<TrainingSample>& out) const;

 private:
  std::size_t capacity_;
  std::size_t seen_ = 0;
  std::vector<TrainingSample> items_;
};

}  // namespace dnmap
