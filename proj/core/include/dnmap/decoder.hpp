#pragma once

#include "dnmap/parameter.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace dnmap {

/// MLP D -> H -> H -> 1 with ReLU hidden activations and a linear output.
///
/// Flat parameter layout: [W1 (H x D, row-major) | b1 (H) | W2 (H x H) | b2 (H) |
/// W3 (H) | b3 (1)].
template <class T>
class Decoder {
 public:
  /// Activations of one forward call. Stamped with the parameter version it
  /// was computed against.
  struct Cache {
    std::vector<T> z;
    std::vector<T> a1, h1, a2, h2;
    T out = T(0);
    std::uint64_t version = 0;
    const Decoder* owner = nullptr;
  };

  explicit Decoder(int input_dim, int hidden = 32);

  int input_dim() const noexcept { return input_dim_; }
  int hidden() const noexcept { return hidden_; }
  std::size_t parameter_count() const noexcept { return params_.size(); }
  static std::size_t parameter_count(int input_dim, int hidden = 32);

  /// He-uniform weights (limit sqrt(6 / fan_in)), zero biases.
  void init(std::mt19937_64& rng);

  Parameter<T>& params() noexcept { return params_; }
  const Parameter<T>& params() const noexcept { return params_; }

  T forward(std::span<const T> z) const;
  T forward(std::span<const T> z, Cache& cache) const;

  /// Accumulates d_out * dd/dTheta into grad_theta and writes d_out * dd/dz
  /// into grad_z. Throws std::logic_error when `cache` was computed by another
  /// decoder or before the parameters last changed.
  void backward(const Cache& cache, T d_out, std::span<T> grad_z, std::span<T> grad_theta) const;

 private:
  std::size_t off_w1() const noexcept { return 0; }
  std::size_t off_b1() const noexcept { return off_w1() + hsz() * dsz(); }
  std::size_t off_w2() const noexcept { return off_b1() + hsz(); }
  std::size_t off_b2() const noexcept { return off_w2() + hsz() * hsz(); }
  std::size_t off_w3() const noexcept { return off_b2() + hsz(); }
  std::size_t off_b3() const noexcept { return off_w3() + hsz(); }
  std::size_t hsz() const noexcept { return static_cast<std::size_t>(hidden_); }
  std::size_t dsz() const noexcept { return static_cast<std::size_t>(input_dim_); }

  int input_dim_;
  int hidden_;
  Parameter<T> params_;
};

extern template class Decoder<float>;
extern template class Decoder<double>;

}  // namespace dnmap
