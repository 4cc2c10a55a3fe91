// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mgtd/linear.hpp"
#include "mgtd/ops.hpp"
#include "mgtd/tensor.hpp"

namespace mgtd {

struct Batch;

struct EncoderConfig {
  std::size_t num_layers = 2;
  std::size_t model_dim = 32;
  std::size_t num_heads = 4;
  std::size_t ffn_dim = 64;
  std::size_t vocab_size = 1000;
  std::size_t max_positions = 128;
  std::size_t attention_window = 0;  // 0 = full attention, otherwise odd
  bool causal = false;

  /// RoBERTa-base sized; used for parameter accounting only.
  static EncoderConfig base();
  /// Small encoder that trains in seconds on a CPU.
  static EncoderConfig desk(std::size_t vocab_size);

  void validate() const;
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

enum class LoraTarget { q, k, v, o };

struct LoraConfig {
  std::size_t rank = 20;
  double alpha = 20.0;
  std::vector<LoraTarget> targets{LoraTarget::q, LoraTarget::v};

  bool targets_projection(LoraTarget t) const;
  void validate() const;
  friend bool operator==(const LoraConfig&, const LoraConfig&) = default;
};

enum class FreezeMode { all_frozen, all_trainable, top_k_unfrozen };

struct FreezeSpec {
  FreezeMode mode = FreezeMode::all_trainable;
  std::size_t k = 0;
  bool embeddings_trainable = true;

  static FreezeSpec all_frozen() { return {FreezeMode::all_frozen, 0, false}; }
  static FreezeSpec all_trainable() { return {FreezeMode::all_trainable, 0, true}; }
  /// The k highest layers train; embeddings and lower layers are frozen.
  static FreezeSpec top_k_unfrozen(std::size_t k) { return {FreezeMode::top_k_unfrozen, k, false}; }

  friend bool operator==(const FreezeSpec&, const FreezeSpec&) = default;
};

/// Parameter names, shapes and freeze flags of an encoder, in the order
/// Encoder::parameters() returns them. Allocates nothing.
std::vector<ParamSpec> encoder_layout(const EncoderConfig& config, const std::optional<LoraConfig>& lora,
                                      const FreezeSpec& freeze);

template <typename T>
struct EncoderLayer {
  Linear<T> query, key, value, output;
  Parameter<T> norm1_gain, norm1_bias;
  Linear<T> ffn_in, ffn_out;
  Parameter<T> norm2_gain, norm2_bias;
};

/// Post-norm transformer encoder: token + learned position embeddings, layer
/// norm, then per layer LN(x + attn(x)) followed by LN(x + ffn(x)) with a GELU
/// feed-forward. PAD keys are masked out of attention.
template <typename T>
class Encoder {
 public:
  struct LayerCache {
    typename Linear<T>::Cache query, key, value, output, ffn_in, ffn_out;
    Tensor<T> q, k, v;
    std::vector<AttentionCache<T>> heads;
    LayerNormCache<T> norm1, norm2;
    Tensor<T> ffn_pre, ffn_act;
  };

  struct Cache {
    std::vector<std::int32_t> ids;
    std::vector<std::uint8_t> key_mask;
    LayerNormCache<T> embed_norm;
    std::vector<LayerCache> layers;
  };

  Encoder(const EncoderConfig& config, std::uint64_t seed);

  const EncoderConfig& config() const noexcept { return config_; }
  const std::optional<LoraConfig>& lora() const noexcept { return lora_; }
  const FreezeSpec& freeze() const noexcept { return freeze_; }

  /// Hidden states (ids.size() x d) for one padded sequence whose first
  /// real_len positions are real tokens.
  Tensor<T> forward(std::span<const std::int32_t> ids, std::size_t real_len, Cache* cache) const;

  /// [rows x cols x d] hidden states for a padded batch. Rows run in
  /// parallel; each row's result does not depend on the thread count.
  Tensor<T> forward_batch(const Batch& batch) const;

  /// Accumulates gradients of trainable parameters. Layers below the lowest
  /// trainable block are not visited.
  void backward(const Tensor<T>& d_hidden, const Cache& cache);

  /// Attaches adapters to the targeted projections of every layer. The base
  /// encoder becomes frozen; only adapter matrices train.
  void apply_lora(const LoraConfig& config, std::uint64_t seed);

  void set_trainable(const FreezeSpec& spec);

  bool any_trainable() const;

  ParamRefs<T> parameters();
  std::vector<const Parameter<T>*> parameters() const;

 private:
  Tensor<T> layer_forward(const EncoderLayer<T>& layer, const Tensor<T>& x, std::span<const std::uint8_t> key_mask,
                          LayerCache* cache) const;
  Tensor<T> layer_backward(EncoderLayer<T>& layer, const Tensor<T>& dy, const LayerCache& cache, bool need_input_grad);
  /// 0 = embeddings, l + 1 = layer l; nullopt when nothing trains.
  std::optional<std::size_t> lowest_trainable_block() const;

  EncoderConfig config_;
  std::optional<LoraConfig> lora_;
  FreezeSpec freeze_;
  Parameter<T> token_embedding_;
  Parameter<T> position_embedding_;
  Parameter<T> embed_norm_gain_;
  Parameter<T> embed_norm_bias_;
  std::vector<EncoderLayer<T>> layers_;
};

}  // namespace mgtd
