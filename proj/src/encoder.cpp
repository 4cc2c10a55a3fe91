// SPDX-License-Identifier: Apache-2.0
#include "mgtd/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "mgtd/corpus.hpp"
#include "mgtd/errors.hpp"
#include "mgtd/parallel.hpp"
#include "mgtd/rng.hpp"

namespace mgtd {

EncoderConfig EncoderConfig::base() {
  EncoderConfig c;
  c.num_layers = 12;
  c.model_dim = 768;
  c.num_heads = 12;
  c.ffn_dim = 3072;
  c.vocab_size = 50265;
  c.max_positions = 514;
  return c;
}

EncoderConfig EncoderConfig::desk(std::size_t vocab_size) {
  EncoderConfig c;
  c.vocab_size = vocab_size;
  return c;
}

void EncoderConfig::validate() const {
  if (num_layers == 0 || model_dim == 0 || num_heads == 0 || ffn_dim == 0) {
    throw ConfigError("encoder dimensions must be positive");
  }
  if (model_dim % num_heads != 0) {
    throw ConfigError("model_dim " + std::to_string(model_dim) + " not divisible by num_heads " +
                      std::to_string(num_heads));
  }
  if (attention_window != 0 && attention_window % 2 == 0) {
    throw ConfigError("attention_window must be 0 or odd, got " + std::to_string(attention_window));
  }
  if (vocab_size < Vocab::kNumSpecial) throw ConfigError("vocab_size must cover the special tokens");
  if (max_positions < 2) throw ConfigError("max_positions must be at least 2");
}

bool LoraConfig::targets_projection(LoraTarget t) const {
  return std::find(targets.begin(), targets.end(), t) != targets.end();
}

void LoraConfig::validate() const {
  if (rank == 0) throw ConfigError("LoRA rank must be at least 1");
  if (targets.empty()) throw ConfigError("LoRA needs at least one target projection");
}

namespace {

constexpr LoraTarget kProjections[] = {LoraTarget::q, LoraTarget::k, LoraTarget::v, LoraTarget::o};
constexpr const char* kProjectionNames[] = {"q", "k", "v", "o"};

std::string layer_prefix(std::size_t l) { return "encoder.layer" + std::to_string(l); }

/// Whether a base (non-adapter) parameter in `block` trains. Block 0 is the
/// embedding block, block l + 1 is layer l.
bool base_trainable(std::size_t block, const FreezeSpec& spec, std::size_t num_layers, bool lora_active) {
  if (lora_active) return false;
  if (block == 0) return spec.embeddings_trainable;
  const std::size_t layer = block - 1;
  switch (spec.mode) {
    case FreezeMode::all_frozen:
      return false;
    case FreezeMode::all_trainable:
      return true;
    case FreezeMode::top_k_unfrozen:
      return layer + spec.k >= num_layers;
  }
  return false;
}

void check_freeze(const FreezeSpec& spec, std::size_t num_layers) {
  if (spec.mode == FreezeMode::top_k_unfrozen && spec.k > num_layers) {
    throw ConfigError("top_k_unfrozen(" + std::to_string(spec.k) + ") exceeds " + std::to_string(num_layers) +
                      " layers");
  }
}

bool is_adapter(const std::string& name) {
  return name.ends_with(".lora_a") || name.ends_with(".lora_b");
}

}  // namespace

std::vector<ParamSpec> encoder_layout(const EncoderConfig& config, const std::optional<LoraConfig>& lora,
                                      const FreezeSpec& freeze) {
  config.validate();
  check_freeze(freeze, config.num_layers);
  if (lora) lora->validate();
  const std::size_t d = config.model_dim;
  const bool lora_active = lora.has_value();

  std::vector<ParamSpec> specs;
  auto push_block = [&](std::vector<ParamSpec> block_specs, std::size_t block) {
    const bool trainable = base_trainable(block, freeze, config.num_layers, lora_active);
    for (auto& s : block_specs) {
      s.frozen = is_adapter(s.name) ? false : !trainable;
      specs.push_back(std::move(s));
    }
  };

  push_block({{"encoder.embed.tokens", {config.vocab_size, d}},
              {"encoder.embed.positions", {config.max_positions, d}},
              {"encoder.embed.norm.gain", {d}},
              {"encoder.embed.norm.bias", {d}}},
             0);
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    const std::string p = layer_prefix(l);
    std::vector<ParamSpec> block;
    for (std::size_t i = 0; i < 4; ++i) {
      const std::size_t rank = lora_active && lora->targets_projection(kProjections[i]) ? lora->rank : 0;
      auto lin = linear_layout(p + ".attn." + kProjectionNames[i], d, d, rank);
      block.insert(block.end(), lin.begin(), lin.end());
    }
    block.push_back({p + ".norm1.gain", {d}});
    block.push_back({p + ".norm1.bias", {d}});
    for (auto& s : linear_layout(p + ".ffn.in", d, config.ffn_dim)) block.push_back(s);
    for (auto& s : linear_layout(p + ".ffn.out", config.ffn_dim, d)) block.push_back(s);
    block.push_back({p + ".norm2.gain", {d}});
    block.push_back({p + ".norm2.bias", {d}});
    push_block(std::move(block), l + 1);
  }
  return specs;
}

// --- Encoder ---------------------------------------------------------------------

template <typename T>
Encoder<T>::Encoder(const EncoderConfig& config, std::uint64_t seed)
    : config_(config),
      token_embedding_("encoder.embed.tokens", {config.vocab_size, config.model_dim}),
      position_embedding_("encoder.embed.positions", {config.max_positions, config.model_dim}),
      embed_norm_gain_("encoder.embed.norm.gain", {config.model_dim}),
      embed_norm_bias_("encoder.embed.norm.bias", {config.model_dim}) {
  config_.validate();
  Rng rng(derive_seed(seed, "encoder"));
  const std::size_t d = config.model_dim;
  const double embed_bound = 1.0 / std::sqrt(static_cast<double>(d));
  init_uniform(token_embedding_.value, rng, embed_bound);
  init_uniform(position_embedding_.value, rng, embed_bound);
  embed_norm_gain_.value.fill(T(1));

  layers_.reserve(config.num_layers);
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    const std::string p = layer_prefix(l);
    EncoderLayer<T> layer{Linear<T>(p + ".attn.q", d, d),
                          Linear<T>(p + ".attn.k", d, d),
                          Linear<T>(p + ".attn.v", d, d),
                          Linear<T>(p + ".attn.o", d, d),
                          Parameter<T>(p + ".norm1.gain", {d}),
                          Parameter<T>(p + ".norm1.bias", {d}),
                          Linear<T>(p + ".ffn.in", d, config.ffn_dim),
                          Linear<T>(p + ".ffn.out", config.ffn_dim, d),
                          Parameter<T>(p + ".norm2.gain", {d}),
                          Parameter<T>(p + ".norm2.bias", {d})};
    layer.query.init(rng);
    layer.key.init(rng);
    layer.value.init(rng);
    layer.output.init(rng);
    layer.ffn_in.init(rng);
    layer.ffn_out.init(rng);
    layer.norm1_gain.value.fill(T(1));
    layer.norm2_gain.value.fill(T(1));
    layers_.push_back(std::move(layer));
  }
  set_trainable(FreezeSpec::all_trainable());
}

template <typename T>
ParamRefs<T> Encoder<T>::parameters() {
  ParamRefs<T> out{&token_embedding_, &position_embedding_, &embed_norm_gain_, &embed_norm_bias_};
  for (auto& layer : layers_) {
    layer.query.collect(out);
    layer.key.collect(out);
    layer.value.collect(out);
    layer.output.collect(out);
    out.push_back(&layer.norm1_gain);
    out.push_back(&layer.norm1_bias);
    layer.ffn_in.collect(out);
    layer.ffn_out.collect(out);
    out.push_back(&layer.norm2_gain);
    out.push_back(&layer.norm2_bias);
  }
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> Encoder<T>::parameters() const {
  auto refs = const_cast<Encoder*>(this)->parameters();
  return {refs.begin(), refs.end()};
}

template <typename T>
void Encoder<T>::set_trainable(const FreezeSpec& spec) {
  const auto layout = encoder_layout(config_, lora_, spec);
  auto params = parameters();
  if (layout.size() != params.size()) throw std::logic_error("encoder layout out of sync with parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (layout[i].name != params[i]->name || layout[i].shape != params[i]->value.shape()) {
      throw std::logic_error("encoder layout mismatch at " + params[i]->name);
    }
    params[i]->frozen = layout[i].frozen;
  }
  freeze_ = spec;
}

template <typename T>
void Encoder<T>::apply_lora(const LoraConfig& config, std::uint64_t seed) {
  if (lora_) throw ConfigError("LoRA adapters already applied; stacking is not supported");
  config.validate();
  Rng rng(derive_seed(seed, "lora"));
  for (auto& layer : layers_) {
    Linear<T>* projections[] = {&layer.query, &layer.key, &layer.value, &layer.output};
    for (std::size_t i = 0; i < 4; ++i) {
      if (config.targets_projection(kProjections[i])) projections[i]->attach_lora(config.rank, config.alpha, rng);
    }
  }
  lora_ = config;
  set_trainable(freeze_);
}

template <typename T>
bool Encoder<T>::any_trainable() const {
  return lowest_trainable_block().has_value();
}

template <typename T>
std::optional<std::size_t> Encoder<T>::lowest_trainable_block() const {
  if (!token_embedding_.frozen || !position_embedding_.frozen || !embed_norm_gain_.frozen || !embed_norm_bias_.frozen) {
    return 0;
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.query.any_trainable() || layer.key.any_trainable() || layer.value.any_trainable() ||
        layer.output.any_trainable() || layer.ffn_in.any_trainable() || layer.ffn_out.any_trainable() ||
        !layer.norm1_gain.frozen || !layer.norm1_bias.frozen || !layer.norm2_gain.frozen || !layer.norm2_bias.frozen) {
      return l + 1;
    }
  }
  return std::nullopt;
}

template <typename T>
Tensor<T> Encoder<T>::forward(std::span<const std::int32_t> ids, std::size_t real_len, Cache* cache) const {
  const std::size_t n = ids.size();
  const std::size_t d = config_.model_dim;
  if (n > config_.max_positions) {
    throw DataError("sequence length " + std::to_string(n) + " exceeds max_positions " +
                    std::to_string(config_.max_positions));
  }
  if (real_len > n) throw DataError("real length exceeds sequence length");

  Tensor<T> x0 = Tensor<T>::matrix(n, d);
  for (std::size_t t = 0; t < n; ++t) {
    const auto id = ids[t];
    if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab_size) {
      throw DataError("token id " + std::to_string(id) + " out of range for vocabulary of " +
                      std::to_string(config_.vocab_size));
    }
    const auto tok = token_embedding_.value.row(static_cast<std::size_t>(id));
    const auto pos = position_embedding_.value.row(t);
    for (std::size_t c = 0; c < d; ++c) x0(t, c) = tok[c] + pos[c];
  }

  std::vector<std::uint8_t> key_mask(n, 0);
  std::fill_n(key_mask.begin(), real_len, std::uint8_t{1});

  Tensor<T> x = layer_norm(x0, embed_norm_gain_.value, embed_norm_bias_.value, cache ? &cache->embed_norm : nullptr);
  if (cache) cache->layers.resize(layers_.size());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    x = layer_forward(layers_[l], x, key_mask, cache ? &cache->layers[l] : nullptr);
  }
  if (cache) {
    cache->ids.assign(ids.begin(), ids.end());
    cache->key_mask = std::move(key_mask);
  }
  return x;
}

template <typename T>
Tensor<T> Encoder<T>::layer_forward(const EncoderLayer<T>& layer, const Tensor<T>& x,
                                    std::span<const std::uint8_t> key_mask, LayerCache* cache) const {
  const std::size_t n = x.rows();
  const std::size_t d = config_.model_dim;
  const std::size_t dk = d / config_.num_heads;
  const AttentionSpec spec{config_.attention_window, config_.causal};

  Tensor<T> q = layer.query.forward(x, cache ? &cache->query : nullptr);
  Tensor<T> k = layer.key.forward(x, cache ? &cache->key : nullptr);
  Tensor<T> v = layer.value.forward(x, cache ? &cache->value : nullptr);

  Tensor<T> attended = Tensor<T>::matrix(n, d);
  if (cache) cache->heads.resize(config_.num_heads);
  for (std::size_t h = 0; h < config_.num_heads; ++h) {
    Tensor<T> out = attention(slice_columns(q, h * dk, dk), slice_columns(k, h * dk, dk), slice_columns(v, h * dk, dk),
                              key_mask, spec, cache ? &cache->heads[h] : nullptr);
    add_columns(attended, out, h * dk);
  }
  Tensor<T> s1 = layer.output.forward(attended, cache ? &cache->output : nullptr);
  add_inplace(s1, x);
  Tensor<T> x1 = layer_norm(s1, layer.norm1_gain.value, layer.norm1_bias.value, cache ? &cache->norm1 : nullptr);

  Tensor<T> pre = layer.ffn_in.forward(x1, cache ? &cache->ffn_in : nullptr);
  Tensor<T> act = activate(Activation::gelu, pre);
  Tensor<T> s2 = layer.ffn_out.forward(act, cache ? &cache->ffn_out : nullptr);
  add_inplace(s2, x1);
  Tensor<T> x2 = layer_norm(s2, layer.norm2_gain.value, layer.norm2_bias.value, cache ? &cache->norm2 : nullptr);

  if (cache) {
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->ffn_pre = std::move(pre);
    cache->ffn_act = std::move(act);
  }
  return x2;
}

template <typename T>
Tensor<T> Encoder<T>::layer_backward(EncoderLayer<T>& layer, const Tensor<T>& dy, const LayerCache& cache,
                                     bool need_input_grad) {
  const std::size_t n = dy.rows();
  const std::size_t d = config_.model_dim;
  const std::size_t dk = d / config_.num_heads;

  auto grad_or_null = [](Parameter<T>& p) { return p.frozen ? nullptr : &p.grad; };

  Tensor<T> ds2 = layer_norm_backward(dy, cache.norm2, layer.norm2_gain.value, grad_or_null(layer.norm2_gain),
                                      grad_or_null(layer.norm2_bias));
  Tensor<T> dact = layer.ffn_out.backward(ds2, cache.ffn_out, true);
  Tensor<T> dpre = activate_backward(Activation::gelu, cache.ffn_pre, cache.ffn_act, dact);
  Tensor<T> dx1 = layer.ffn_in.backward(dpre, cache.ffn_in, true);
  add_inplace(dx1, ds2);

  Tensor<T> ds1 = layer_norm_backward(dx1, cache.norm1, layer.norm1_gain.value, grad_or_null(layer.norm1_gain),
                                      grad_or_null(layer.norm1_bias));
  Tensor<T> dattended = layer.output.backward(ds1, cache.output, true);

  Tensor<T> dq = Tensor<T>::matrix(n, d);
  Tensor<T> dk_all = Tensor<T>::matrix(n, d);
  Tensor<T> dv = Tensor<T>::matrix(n, d);
  for (std::size_t h = 0; h < config_.num_heads; ++h) {
    auto g = attention_backward(slice_columns(dattended, h * dk, dk), slice_columns(cache.q, h * dk, dk),
                                slice_columns(cache.k, h * dk, dk), slice_columns(cache.v, h * dk, dk),
                                cache.heads[h]);
    add_columns(dq, g.dq, h * dk);
    add_columns(dk_all, g.dk, h * dk);
    add_columns(dv, g.dv, h * dk);
  }

  Tensor<T> dxq = layer.query.backward(dq, cache.query, need_input_grad);
  Tensor<T> dxk = layer.key.backward(dk_all, cache.key, need_input_grad);
  Tensor<T> dxv = layer.value.backward(dv, cache.value, need_input_grad);
  if (!need_input_grad) return {};
  Tensor<T> dx = std::move(ds1);
  add_inplace(dx, dxq);
  add_inplace(dx, dxk);
  add_inplace(dx, dxv);
  return dx;
}

template <typename T>
void Encoder<T>::backward(const Tensor<T>& d_hidden, const Cache& cache) {
  const auto lowest = lowest_trainable_block();
  if (!lowest) return;
  Tensor<T> grad = d_hidden;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const std::size_t block = l + 1;
    if (block < *lowest) return;
    const bool need_input_grad = *lowest < block;
    grad = layer_backward(layers_[l], grad, cache.layers[l], need_input_grad);
  }
  if (*lowest != 0) return;

  auto grad_or_null = [](Parameter<T>& p) { return p.frozen ? nullptr : &p.grad; };
  Tensor<T> dx0 = layer_norm_backward(grad, cache.embed_norm, embed_norm_gain_.value, grad_or_null(embed_norm_gain_),
                                      grad_or_null(embed_norm_bias_));
  const std::size_t d = config_.model_dim;
  for (std::size_t t = 0; t < cache.ids.size(); ++t) {
    const auto id = static_cast<std::size_t>(cache.ids[t]);
    for (std::size_t c = 0; c < d; ++c) {
      if (!token_embedding_.frozen) token_embedding_.grad(id, c) += dx0(t, c);
      if (!position_embedding_.frozen) position_embedding_.grad(t, c) += dx0(t, c);
    }
  }
}

template <typename T>
Tensor<T> Encoder<T>::forward_batch(const Batch& batch) const {
  const std::size_t d = config_.model_dim;
  Tensor<T> out(Shape{batch.rows, batch.cols, d});
  parallel_for(batch.rows, [&](std::size_t row) {
    Tensor<T> h = forward(batch.row_ids(row), batch.real_length(row), nullptr);
    std::copy(h.values().begin(), h.values().end(), out.data() + row * batch.cols * d);
  });
  return out;
}

template class Encoder<float>;
template class Encoder<double>;

}  // namespace mgtd
