// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mgtd/encoder.hpp"
#include "mgtd/heads.hpp"
#include "mgtd/tensor.hpp"

namespace mgtd {

enum class Preset { base, desk };

Preset parse_preset(std::string_view name);
std::string_view preset_name(Preset preset);

/// Everything needed to rebuild a detector's parameter set.
struct VariantSpec {
  std::string name;
  /// Hidden states come from a precomputed embedding table; the model has no
  /// encoder and only the head trains.
  bool external_encoder = false;
  std::size_t input_dim = 0;  // model_dim, or the table's width when external
  EncoderConfig encoder;
  FreezeSpec freeze;
  std::optional<LoraConfig> lora;
  HeadConfig head;

  friend bool operator==(const VariantSpec&, const VariantSpec&) = default;
};

/// Optional adjustments applied on top of a named variant.
struct VariantOverrides {
  std::optional<std::size_t> hidden_size;
  std::optional<std::size_t> num_layers;
  std::optional<double> dropout;
  std::optional<std::size_t> lora_rank;  // alpha follows the rank
  std::optional<std::size_t> max_positions;
  std::optional<std::size_t> attention_window;
};

/// full_finetune, lora_frozen, lora_longcontext, bilstm_unfrozen2,
/// gru_frozen, bilstm_frozen.
const std::vector<std::string>& variant_names();

/// Builds the spec for a named variant. `vocab_size` only affects the desk
/// preset; the base preset uses the RoBERTa vocabulary size.
VariantSpec make_variant(std::string_view name, Preset preset, std::size_t vocab_size,
                         const VariantOverrides& overrides = {});

/// Head-only spec fed by `dim`-wide precomputed hidden states. Only variants
/// whose encoder is fully frozen qualify.
VariantSpec make_external_variant(std::string_view name, std::size_t dim, const VariantOverrides& overrides = {});

/// Encoder layout (when present) followed by the head layout.
std::vector<ParamSpec> variant_layout(const VariantSpec& spec);

struct ParamBreakdown {
  std::size_t encoder = 0;  // trainable encoder values, adapters included
  std::size_t adapters = 0;
  std::size_t head = 0;
  std::size_t total() const { return encoder + head; }
};

ParamBreakdown count_variant_params(const VariantSpec& spec);

nlohmann::json to_json(const VariantSpec& spec);
VariantSpec variant_from_json(const nlohmann::json& j);

}  // namespace mgtd
