// SPDX-License-Identifier: Apache-2.0
#include "mgtd/linear.hpp"

#include <cmath>

#include "mgtd/kernels.hpp"
#include "mgtd/ops.hpp"
#include "mgtd/rng.hpp"

namespace mgtd {

template <typename T>
Linear<T>::Linear(const std::string& name, std::size_t in, std::size_t out)
    : weight(name + ".weight", {out, in}), bias(name + ".bias", {out}), in_(in), out_(out) {}

template <typename T>
void Linear<T>::init(Rng& rng) {
  init_uniform(weight.value, rng, 1.0 / std::sqrt(static_cast<double>(in_)));
  bias.value.fill(T(0));
}

template <typename T>
void Linear<T>::attach_lora(std::size_t rank, double alpha, Rng& rng) {
  if (has_lora()) throw ConfigError("adapter already attached to " + weight.name);
  if (rank == 0) throw ConfigError("adapter rank must be at least 1");
  const std::string base = weight.name.substr(0, weight.name.size() - std::string(".weight").size());
  lora_a.emplace(base + ".lora_a", Shape{rank, in_});
  lora_b.emplace(base + ".lora_b", Shape{out_, rank});
  init_uniform(lora_a->value, rng, 1.0 / std::sqrt(static_cast<double>(in_)));
  lora_scale = alpha / static_cast<double>(rank);
  weight.frozen = true;
  bias.frozen = true;
}

template <typename T>
bool Linear<T>::any_trainable() const {
  if (!weight.frozen || !bias.frozen) return true;
  return has_lora() && (!lora_a->frozen || !lora_b->frozen);
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x, Cache* cache) const {
  Tensor<T> y = matmul_nt(x, weight.value);
  add_row_bias(y, bias.value);
  if (has_lora()) {
    Tensor<T> hidden = matmul_nt(x, lora_a->value);
    Tensor<T> delta = matmul_nt(hidden, lora_b->value);
    const T s = static_cast<T>(lora_scale);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += s * delta[i];
    if (cache) cache->adapter_hidden = std::move(hidden);
  }
  if (cache) cache->input = x;
  return y;
}

template <typename T>
Tensor<T> Linear<T>::backward(const Tensor<T>& dy, const Cache& cache, bool need_input_grad) {
  const auto& x = cache.input;
  if (!weight.frozen) matmul_tn_accumulate(dy, x, weight.grad);
  if (!bias.frozen) accumulate_column_sums(dy, bias.grad);

  Tensor<T> dx;
  if (need_input_grad) dx = matmul(dy, weight.value);

  if (has_lora()) {
    Tensor<T> scaled = dy;
    const T s = static_cast<T>(lora_scale);
    for (auto& v : scaled.values()) v *= s;
    if (!lora_b->frozen) matmul_tn_accumulate(scaled, cache.adapter_hidden, lora_b->grad);
    const bool need_hidden = !lora_a->frozen || need_input_grad;
    if (need_hidden) {
      Tensor<T> dhidden = matmul(scaled, lora_b->value);
      if (!lora_a->frozen) matmul_tn_accumulate(dhidden, x, lora_a->grad);
      if (need_input_grad) {
        kernels::gemm_nn(dhidden.rows(), in_, dhidden.cols(), dhidden.data(), lora_a->value.data(), dx.data(), true);
      }
    }
  }
  return dx;
}

template <typename T>
void Linear<T>::collect(ParamRefs<T>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
  if (has_lora()) {
    out.push_back(&*lora_a);
    out.push_back(&*lora_b);
  }
}

template <typename T>
void Linear<T>::collect(std::vector<const Parameter<T>*>& out) const {
  out.push_back(&weight);
  out.push_back(&bias);
  if (has_lora()) {
    out.push_back(&*lora_a);
    out.push_back(&*lora_b);
  }
}

std::vector<ParamSpec> linear_layout(const std::string& name, std::size_t in, std::size_t out,
                                     std::size_t lora_rank) {
  std::vector<ParamSpec> specs{{name + ".weight", {out, in}, false}, {name + ".bias", {out}, false}};
  if (lora_rank > 0) {
    specs[0].frozen = true;
    specs[1].frozen = true;
    specs.push_back({name + ".lora_a", {lora_rank, in}, false});
    specs.push_back({name + ".lora_b", {out, lora_rank}, false});
  }
  return specs;
}

template class Linear<float>;
template class Linear<double>;

}  // namespace mgtd
