#pragma once

#include "dnmap/parameter.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace dnmap {

struct AdamConfig {
  double lr = 0.01;
  double lr_decayed = 0.001;
  std::int64_t decay_step = 10000;  // steps <= decay_step use lr
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
  /// Learning rate of the 1-indexed optimizer step.
  double lr_at(std::int64_t step) const { return step <= decay_step ? lr : lr_decayed; }
};

/// Raised when a gradient holds NaN or Inf; parameters are left untouched.
class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense Adam over a fixed, ordered list of parameter blocks. Blocks may grow
/// between steps; moments for appended entries start at zero.
template <class T>
class Adam {
 public:
  explicit Adam(AdamConfig config = {});

  const AdamConfig& config() const noexcept { return config_; }
  std::int64_t step_count() const noexcept { return step_; }
  double current_lr() const { return config_.lr_at(step_ + 1); }

  /// Applies one update with the scheduled rate and bumps every block's version.
  void step(std::span<Parameter<T>* const> params);

 private:
  AdamConfig config_;
  std::int64_t step_ = 0;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace dnmap
