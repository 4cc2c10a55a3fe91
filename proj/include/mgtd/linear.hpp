// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mgtd/tensor.hpp"

namespace mgtd {

class Rng;

/// Affine map y = x W^T + b with an optional low-rank adapter
/// y += (alpha / r) (x A^T) B^T. Weight is stored [out, in]; A is [r, in]
/// (random init) and B is [out, r] (zero init).
template <typename T>
class Linear {
 public:
  struct Cache {
    Tensor<T> input;
    Tensor<T> adapter_hidden;  // x A^T, present only with an adapter
  };

  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out);

  /// Weight uniform(+-1/sqrt(in)), bias zero.
  void init(Rng& rng);

  /// Adds adapter matrices and freezes the base weight and bias.
  void attach_lora(std::size_t rank, double alpha, Rng& rng);

  bool has_lora() const noexcept { return lora_a.has_value(); }
  std::size_t in_features() const noexcept { return in_; }
  std::size_t out_features() const noexcept { return out_; }
  bool any_trainable() const;

  Tensor<T> forward(const Tensor<T>& x, Cache* cache) const;

  /// Accumulates gradients into non-frozen parameters. Returns dx when
  /// requested, otherwise an empty tensor.
  Tensor<T> backward(const Tensor<T>& dy, const Cache& cache, bool need_input_grad);

  void collect(ParamRefs<T>& out);
  void collect(std::vector<const Parameter<T>*>& out) const;

  Parameter<T> weight;
  Parameter<T> bias;
  std::optional<Parameter<T>> lora_a;
  std::optional<Parameter<T>> lora_b;
  double lora_scale = 1.0;

 private:
  std::size_t in_ = 0;
  std::size_t out_ = 0;
};

/// Parameter specs in the order Linear::collect emits them.
std::vector<ParamSpec> linear_layout(const std::string& name, std::size_t in, std::size_t out,
                                     std::size_t lora_rank = 0);

}  // namespace mgtd
