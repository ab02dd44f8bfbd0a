#include "dnmap/replay.hpp"

#include <stdexcept>

namespace dnmap {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
}

void ReplayBuffer::add(std::span<const TrainingSample> samples, std::mt19937_64& rng) {
  for (const auto& s : samples) {
    ++seen_;
    if (items_.size() < capacity_) {
      items_.push_back(s);
      continue;
    }
    std::uniform_int_distribution<std::size_t> pick(0, seen_ - 1);
    const std::size_t j = pick(rng);
    if (j < capacity_) items_[j] = s;
  }
}

void ReplayBuffer::sample(std::size_t count, std::mt19937_64& rng,
                          std::vector<TrainingSample>& out) const {
  if (items_.empty()) throw std::logic_error("sampling from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  for (std::size_t i = 0; i < count; ++i) out.push_back(items_[pick(rng)]);
}

}  // namespace dnmap
