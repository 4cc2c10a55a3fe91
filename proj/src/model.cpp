// SPDX-License-Identifier: Apache-2.0
#include "mgtd/model.hpp"

#include "mgtd/errors.hpp"
#include "mgtd/rng.hpp"

namespace mgtd {

template <typename T>
Model<T>::Model(const VariantSpec& spec, std::uint64_t seed)
    : spec_(spec), head_(spec.head, spec.input_dim, derive_seed(seed, "model.head")) {
  if (!spec_.external_encoder) {
    if (spec_.input_dim != spec_.encoder.model_dim) throw ConfigError("head input_dim must equal encoder model_dim");
    encoder_.emplace(spec_.encoder, derive_seed(seed, "model.encoder"));
    if (spec_.lora) encoder_->apply_lora(*spec_.lora, derive_seed(seed, "model.lora"));
    encoder_->set_trainable(spec_.freeze);
  }
}

template <typename T>
Tensor<T> Model<T>::forward(std::span<const std::int32_t> ids, std::size_t real_len, Cache* cache,
                            Rng* dropout_rng) const {
  if (!encoder_) throw ConfigError("variant " + spec_.name + " reads precomputed embeddings, not token ids");
  const bool keep = cache && encoder_->any_trainable();
  Tensor<T> hidden = encoder_->forward(ids, real_len, keep ? &cache->encoder : nullptr);
  return forward_hidden(hidden, real_len, cache, dropout_rng);
}

template <typename T>
Tensor<T> Model<T>::forward_hidden(const Tensor<T>& hidden, std::size_t real_len, Cache* cache,
                                   Rng* dropout_rng) const {
  if (cache) cache->rows = hidden.rows();
  return head_.forward(hidden, real_len, cache ? &cache->head : nullptr, dropout_rng);
}

template <typename T>
void Model<T>::backward(const Tensor<T>& dlogits, const Cache& cache) {
  const bool encoder_trains = encoder_ && encoder_->any_trainable();
  Tensor<T> dhidden = head_.backward(dlogits, cache.head, encoder_trains);
  if (encoder_trains) encoder_->backward(dhidden, cache.encoder);
}

template <typename T>
ParamRefs<T> Model<T>::parameters() {
  ParamRefs<T> out;
  if (encoder_) out = encoder_->parameters();
  auto head = head_.parameters();
  out.insert(out.end(), head.begin(), head.end());
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> Model<T>::parameters() const {
  std::vector<const Parameter<T>*> out;
  if (encoder_) out = encoder_->parameters();
  auto head = head_.parameters();
  out.insert(out.end(), head.begin(), head.end());
  return out;
}

template <typename T>
std::size_t Model<T>::trainable_params() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) {
    if (!p->frozen) n += p->size();
  }
  return n;
}

template class Model<float>;
template class Model<double>;

}  // namespace mgtd
