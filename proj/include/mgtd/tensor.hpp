// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mgtd/errors.hpp"

namespace mgtd {

class Rng;

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array. The last dimension is the column count; everything
/// before it folds into rows, so a [B, T, d] tensor is viewed as (B*T) x d.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_size(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                       shape_string(shape_));
    }
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, T fill = T(0)) { return Tensor(Shape{rows, cols}, fill); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t ndim() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t cols() const noexcept { return shape_.empty() ? 0 : shape_.back(); }
  std::size_t rows() const noexcept { return cols() == 0 ? 0 : data_.size() / cols(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  void reshape(Shape shape) {
    if (shape_size(shape) != data_.size()) {
      throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    shape_ = std::move(shape);
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

/// A named trainable tensor with its gradient buffer.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool frozen = false;

  Parameter() = default;
  Parameter(std::string name_, const Shape& shape) : name(std::move(name_)), value(shape), grad(shape) {}

  std::size_t size() const noexcept { return value.size(); }
  void zero_grad() { grad.fill(T(0)); }
};

template <typename T>
using ParamRefs = std::vector<Parameter<T>*>;

/// Name, shape and freeze flag of a parameter, without storage. Used to count
/// parameters of base-sized models without allocating them.
struct ParamSpec {
  std::string name;
  Shape shape;
  bool frozen = false;

  std::size_t size() const { return shape_size(shape); }
  friend bool operator==(const ParamSpec&, const ParamSpec&) = default;
};

std::size_t count_trainable(std::span<const ParamSpec> specs);

template <typename T>
std::size_t count_trainable_params(const ParamRefs<T>& params) {
  std::size_t n = 0;
  for (const auto* p : params) {
    if (!p->frozen) n += p->size();
  }
  return n;
}

template <typename T>
void zero_grads(const ParamRefs<T>& params) {
  for (auto* p : params) p->zero_grad();
}

template <typename T>
std::vector<ParamSpec> describe(const ParamRefs<T>& params) {
  std::vector<ParamSpec> out;
  out.reserve(params.size());
  for (const auto* p : params) out.push_back({p->name, p->value.shape(), p->frozen});
  return out;
}

/// Fills with uniform(-bound, bound).
template <typename T>
void init_uniform(Tensor<T>& t, Rng& rng, double bound);

}  // namespace mgtd
