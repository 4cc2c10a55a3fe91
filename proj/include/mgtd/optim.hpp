// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mgtd/tensor.hpp"

namespace mgtd {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam. Frozen parameters are skipped entirely: their values
/// and moments are never touched.
template <typename T>
class Adam {
 public:
  /// `lr_scale[i]` multiplies the base rate for params[i]; empty means 1.
  Adam(ParamRefs<T> params, AdamConfig config, std::vector<double> lr_scale = {});

  void step();
  void zero_grad();

  std::uint64_t steps() const noexcept { return step_; }
  const AdamConfig& config() const noexcept { return config_; }
  const Tensor<T>& first_moment(std::size_t i) const { return m_[i]; }
  const Tensor<T>& second_moment(std::size_t i) const { return v_[i]; }

 private:
  ParamRefs<T> params_;
  AdamConfig config_;
  std::vector<double> lr_scale_;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  std::uint64_t step_ = 0;
};

}  // namespace mgtd
