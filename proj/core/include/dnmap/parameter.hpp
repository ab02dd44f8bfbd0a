#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace dnmap {

/// A flat block of trainable scalars with its gradient accumulator.
/// `version` is bumped whenever an optimizer writes `value`, which lets
/// caches derived from the parameter detect staleness.
template <class T>
struct Parameter {
  std::string name;
  std::vector<T> value;
  std::vector<T> grad;
  std::uint64_t version = 0;

  std::size_t size() const noexcept { return value.size(); }
  void resize(std::size_t n) {
    value.resize(n, T(0));
    grad.resize(n, T(0));
  }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

}  // namespace dnmap
