#include "dnmap/optimizer.hpp"

#include <fmt/format.h>

#include <cmath>

namespace dnmap {

void AdamConfig::validate() const {
  if (!(lr > 0) || !(lr_decayed > 0)) throw std::invalid_argument("learning rates must be positive");
  if (decay_step < 0) throw std::invalid_argument("lr decay step must be non-negative");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) {
    throw std::invalid_argument("Adam betas must be in [0, 1)");
  }
  if (!(eps > 0)) throw std::invalid_argument("Adam eps must be positive");
}

template <class T>
Adam<T>::Adam(AdamConfig config) : config_(config) {
  config_.validate();
}

template <class T>
void Adam<T>::step(std::span<Parameter<T>* const> params) {
  for (const Parameter<T>* p : params) {
    for (std::size_t i = 0; i < p->grad.size(); ++i) {
      if (!std::isfinite(p->grad[i])) {
        throw NonFiniteGradient(fmt::format(
            "non-finite gradient at optimizer step {}: {}[{}] = {} (of {} entries); step aborted",
            step_ + 1, p->name, i, static_cast<double>(p->grad[i]), p->grad.size()));
      }
    }
  }
  if (m_.size() < params.size()) {
    m_.resize(params.size());
    v_.resize(params.size());
  }
  ++step_;
  const double lr = config_.lr_at(step_);
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const T tb1 = static_cast<T>(b1), tb2 = static_cast<T>(b2);
  const T step_size = static_cast<T>(lr / c1);
  const T inv_sqrt_c2 = static_cast<T>(1.0 / std::sqrt(c2));
  const T eps = static_cast<T>(config_.eps);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter<T>& p = *params[k];
    auto& m = m_[k];
    auto& v = v_[k];
    m.resize(p.size(), T(0));
    v.resize(p.size(), T(0));
    for (std::size_t i = 0; i < p.size(); ++i) {
      const T g = p.grad[i];
      m[i] = tb1 * m[i] + (T(1) - tb1) * g;
      v[i] = tb2 * v[i] + (T(1) - tb2) * g * g;
      p.value[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_c2 + eps);
    }
    ++p.version;
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace dnmap
