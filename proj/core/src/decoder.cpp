#include "dnmap/decoder.hpp"

#include "dnmap/common.hpp"

#include <cmath>
#include <stdexcept>

namespace dnmap {

template <class T>
Decoder<T>::Decoder(int input_dim, int hidden) : input_dim_(input_dim), hidden_(hidden) {
  if (input_dim <= 0 || hidden <= 0) throw std::invalid_argument("decoder sizes must be positive");
  params_.name = "decoder";
  params_.resize(parameter_count(input_dim, hidden));
}

template <class T>
std::size_t Decoder<T>::parameter_count(int input_dim, int hidden) {
  const auto d = static_cast<std::size_t>(input_dim);
  const auto h = static_cast<std::size_t>(hidden);
  return h * d + h + h * h + h + h + 1;
}

template <class T>
void Decoder<T>::init(std::mt19937_64& rng) {
  auto fill = [&](std::size_t off, std::size_t n, std::size_t fan_in) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < n; ++i) params_.value[off + i] = static_cast<T>(limit * u(rng));
  };
  std::fill(params_.value.begin(), params_.value.end(), T(0));
  fill(off_w1(), hsz() * dsz(), dsz());
  fill(off_w2(), hsz() * hsz(), hsz());
  fill(off_w3(), hsz(), hsz());
  ++params_.version;
}

template <class T>
T Decoder<T>::forward(std::span<const T> z) const {
  Cache scratch;
  return forward(z, scratch);
}

template <class T>
T Decoder<T>::forward(std::span<const T> z, Cache& c) const {
  if (z.size() != dsz()) throw ShapeError("decoder input has wrong dimension");
  const T* p = params_.value.data();
  const std::size_t H = hsz();
  const std::size_t D = dsz();
  c.z.assign(z.begin(), z.end());
  c.a1.resize(H);
  c.h1.resize(H);
  c.a2.resize(H);
  c.h2.resize(H);
  for (std::size_t i = 0; i < H; ++i) {
    const T* w = p + off_w1() + i * D;
    T acc = p[off_b1() + i];
    for (std::size_t k = 0; k < D; ++k) acc += w[k] * z[k];
    c.a1[i] = acc;
    c.h1[i] = acc > T(0) ? acc : T(0);
  }
  for (std::size_t i = 0; i < H; ++i) {
    const T* w = p + off_w2() + i * H;
    T acc = p[off_b2() + i];
    for (std::size_t k = 0; k < H; ++k) acc += w[k] * c.h1[k];
    c.a2[i] = acc;
    c.h2[i] = acc > T(0) ? acc : T(0);
  }
  T out = p[off_b3()];
  for (std::size_t k = 0; k < H; ++k) out += p[off_w3() + k] * c.h2[k];
  c.out = out;
  c.version = params_.version;
  c.owner = this;
  return out;
}

template <class T>
void Decoder<T>::backward(const Cache& c, T d_out, std::span<T> grad_z,
                          std::span<T> grad_theta) const {
  if (c.owner != this || c.version != params_.version || c.z.size() != dsz()) {
    throw std::logic_error("decoder backward called with a stale or foreign activation cache");
  }
  if (grad_z.size() != dsz() || grad_theta.size() != params_.size()) {
    throw ShapeError("decoder backward: gradient buffer has wrong size");
  }
  const T* p = params_.value.data();
  T* g = grad_theta.data();
  const std::size_t H = hsz();
  const std::size_t D = dsz();

  std::vector<T> d2(H), d1(H, T(0));
  g[off_b3()] += d_out;
  for (std::size_t k = 0; k < H; ++k) {
    g[off_w3() + k] += d_out * c.h2[k];
    d2[k] = c.a2[k] > T(0) ? d_out * p[off_w3() + k] : T(0);
  }
  for (std::size_t i = 0; i < H; ++i) {
    if (d2[i] == T(0)) continue;
    g[off_b2() + i] += d2[i];
    const T* w = p + off_w2() + i * H;
    T* gw = g + off_w2() + i * H;
    for (std::size_t k = 0; k < H; ++k) {
      gw[k] += d2[i] * c.h1[k];
      d1[k] += d2[i] * w[k];
    }
  }
  std::fill(grad_z.begin(), grad_z.end(), T(0));
  for (std::size_t i = 0; i < H; ++i) {
    if (c.a1[i] <= T(0) || d1[i] == T(0)) continue;
    g[off_b1() + i] += d1[i];
    const T* w = p + off_w1() + i * D;
    T* gw = g + off_w1() + i * D;
    for (std::size_t k = 0; k < D; ++k) {
      gw[k] += d1[i] * c.z[k];
      grad_z[k] += d1[i] * w[k];
    }
  }
}

template class Decoder<float>;
template class Decoder<double>;

}  // namespace dnmap
