// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>

#include <json.hpp>

#include "mgtd/corpus.hpp"
#include "mgtd/encoder.hpp"
#include "mgtd/heads.hpp"
#include "mgtd/variant.hpp"

namespace mgtd {

class Rng;

/// Encoder (absent for external embeddings) wired to a classification head.
template <typename T>
class Model {
 public:
  struct Cache {
    typename Encoder<T>::Cache encoder;
    typename Head<T>::Cache head;
    std::size_t rows = 0;
  };

  /// Builds the variant with freshly initialized weights.
  Model(const VariantSpec& spec, std::uint64_t seed);

  const VariantSpec& spec() const noexcept { return spec_; }
  bool has_encoder() const noexcept { return encoder_.has_value(); }
  Encoder<T>& encoder() { return *encoder_; }
  const Encoder<T>& encoder() const { return *encoder_; }
  Head<T>& head() { return head_; }
  const Head<T>& head() const { return head_; }

  /// 1 x 2 logits from token ids whose first real_len entries are real.
  Tensor<T> forward(std::span<const std::int32_t> ids, std::size_t real_len, Cache* cache, Rng* dropout_rng) const;

  /// 1 x 2 logits from precomputed hidden states.
  Tensor<T> forward_hidden(const Tensor<T>& hidden, std::size_t real_len, Cache* cache, Rng* dropout_rng) const;

  /// Accumulates gradients of every trainable parameter.
  void backward(const Tensor<T>& dlogits, const Cache& cache);

  /// Encoder parameters first, then head parameters.
  ParamRefs<T> parameters();
  std::vector<const Parameter<T>*> parameters() const;
  std::size_t trainable_params() const;

 private:
  VariantSpec spec_;
  std::optional<Encoder<T>> encoder_;
  Head<T> head_;
};

/// A model together with the vocabulary it was trained on and free-form
/// training metadata.
struct Detector {
  Vocab vocab;
  Model<float> model;
  nlohmann::json metadata = nlohmann::json::object();
};

}  // namespace mgtd
