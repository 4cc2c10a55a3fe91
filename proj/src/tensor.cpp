// SPDX-License-Identifier: Apache-2.0
#include "mgtd/tensor.hpp"

#include "mgtd/rng.hpp"

namespace mgtd {

std::size_t shape_size(const Shape& shape) {
  if (shape.empty()) return 0;
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::size_t count_trainable(std::span<const ParamSpec> specs) {
  std::size_t n = 0;
  for (const auto& s : specs) {
    if (!s.frozen) n += s.size();
  }
  return n;
}

template <typename T>
void init_uniform(Tensor<T>& t, Rng& rng, double bound) {
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-bound, bound));
}

template void init_uniform<float>(Tensor<float>&, Rng&, double);
template void init_uniform<double>(Tensor<double>&, Rng&, double);

}  // namespace mgtd
