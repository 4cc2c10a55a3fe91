// SPDX-License-Identifier: Apache-2.0
#include "mgtd/optim.hpp"

#include <cmath>

namespace mgtd {

template <typename T>
Adam<T>::Adam(ParamRefs<T> params, AdamConfig config, std::vector<double> lr_scale)
    : params_(std::move(params)), config_(config), lr_scale_(std::move(lr_scale)) {
  if (lr_scale_.empty()) lr_scale_.assign(params_.size(), 1.0);
  if (lr_scale_.size() != params_.size()) throw ConfigError("Adam: one learning-rate scale per parameter required");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto* p : params_) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

template <typename T>
void Adam<T>::step() {
  ++step_;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto* p = params_[i];
    if (p->frozen) continue;
    const double lr = config_.lr * lr_scale_[i];
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < p->size(); ++j) {
      const double g = p->grad[j];
      const double mj = config_.beta1 * m[j] + (1.0 - config_.beta1) * g;
      const double vj = config_.beta2 * v[j] + (1.0 - config_.beta2) * g * g;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double update = lr * (mj / c1) / (std::sqrt(vj / c2) + config_.eps);
      p->value[j] = static_cast<T>(p->value[j] - update);
    }
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  zero_grads(params_);
}

template class Adam<float>;
template class Adam<double>;

}  // namespace mgtd
