// SPDX-License-Identifier: Apache-2.0
#include "mgtd/variant.hpp"

#include <algorithm>

#include "mgtd/corpus.hpp"
#include "mgtd/errors.hpp"

namespace mgtd {

namespace {

constexpr std::size_t kDeskHeadHidden = 16;
constexpr std::size_t kDeskLoraRank = 4;
constexpr std::size_t kDeskLongWindow = 9;
constexpr std::size_t kDeskLongPositions = 256;
constexpr std::size_t kBaseLongWindow = 513;
constexpr std::size_t kBaseLongPositions = 4098;

std::string valid_names() {
  std::string out;
  for (const auto& n : variant_names()) out += (out.empty() ? "" : ", ") + n;
  return out;
}

HeadConfig head_for(std::string_view name, Preset preset) {
  HeadConfig h;
  if (name == "full_finetune" || name == "lora_frozen" || name == "lora_longcontext") {
    h.kind = HeadKind::linear;
    h.pooling = Pooling::cls;
    h.hidden_size = 0;
    h.num_layers = 0;
    return h;
  }
  h.kind = name == "gru_frozen" ? HeadKind::bigru : HeadKind::bilstm;
  if (preset == Preset::desk) h.hidden_size = kDeskHeadHidden;
  return h;
}

void apply_head_overrides(HeadConfig& head, const VariantOverrides& o) {
  if (head.kind != HeadKind::linear) {
    if (o.hidden_size) head.hidden_size = *o.hidden_size;
    if (o.num_layers) head.num_layers = *o.num_layers;
  }
  if (o.dropout) head.dropout = *o.dropout;
  head.validate();
}

const char* head_kind_name(HeadKind k) {
  switch (k) {
    case HeadKind::linear: return "linear";
    case HeadKind::bilstm: return "bilstm";
    case HeadKind::bigru: return "bigru";
  }
  return "?";
}

HeadKind parse_head_kind(const std::string& s) {
  if (s == "linear") return HeadKind::linear;
  if (s == "bilstm") return HeadKind::bilstm;
  if (s == "bigru") return HeadKind::bigru;
  throw ConfigError("unknown head kind '" + s + "'");
}

const char* freeze_mode_name(FreezeMode m) {
  switch (m) {
    case FreezeMode::all_frozen: return "all_frozen";
    case FreezeMode::all_trainable: return "all_trainable";
    case FreezeMode::top_k_unfrozen: return "top_k_unfrozen";
  }
  return "?";
}

FreezeMode parse_freeze_mode(const std::string& s) {
  if (s == "all_frozen") return FreezeMode::all_frozen;
  if (s == "all_trainable") return FreezeMode::all_trainable;
  if (s == "top_k_unfrozen") return FreezeMode::top_k_unfrozen;
  throw ConfigError("unknown freeze mode '" + s + "'");
}

const char* target_name(LoraTarget t) {
  switch (t) {
    case LoraTarget::q: return "q";
    case LoraTarget::k: return "k";
    case LoraTarget::v: return "v";
    case LoraTarget::o: return "o";
  }
  return "?";
}

LoraTarget parse_target(const std::string& s) {
  if (s == "q") return LoraTarget::q;
  if (s == "k") return LoraTarget::k;
  if (s == "v") return LoraTarget::v;
  if (s == "o") return LoraTarget::o;
  throw ConfigError("unknown LoRA target '" + s + "'");
}

}  // namespace

Preset parse_preset(std::string_view name) {
  if (name == "base") return Preset::base;
  if (name == "desk") return Preset::desk;
  throw ConfigError("unknown preset '" + std::string(name) + "' (valid: base, desk)");
}

std::string_view preset_name(Preset preset) { return preset == Preset::base ? "base" : "desk"; }

const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> names{"full_finetune", "lora_frozen",   "lora_longcontext",
                                              "bilstm_unfrozen2", "gru_frozen", "bilstm_frozen"};
  return names;
}

VariantSpec make_variant(std::string_view name, Preset preset, std::size_t vocab_size,
                         const VariantOverrides& overrides) {
  const auto& names = variant_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    throw ConfigError("unknown variant '" + std::string(name) + "' (valid: " + valid_names() + ")");
  }
  VariantSpec spec;
  spec.name = std::string(name);
  spec.encoder = preset == Preset::base ? EncoderConfig::base() : EncoderConfig::desk(vocab_size);
  spec.head = head_for(name, preset);

  if (name == "full_finetune") {
    spec.freeze = FreezeSpec::all_trainable();
  } else if (name == "bilstm_unfrozen2") {
    spec.freeze = FreezeSpec::top_k_unfrozen(2);
  } else {
    spec.freeze = FreezeSpec::all_frozen();
  }

  if (name == "lora_frozen" || name == "lora_longcontext") {
    LoraConfig lora;
    const std::size_t rank = overrides.lora_rank.value_or(preset == Preset::base ? lora.rank : kDeskLoraRank);
    lora.rank = rank;
    lora.alpha = static_cast<double>(rank);
    spec.lora = lora;
  }
  if (name == "lora_longcontext") {
    spec.encoder.attention_window = preset == Preset::base ? kBaseLongWindow : kDeskLongWindow;
    spec.encoder.max_positions = preset == Preset::base ? kBaseLongPositions : kDeskLongPositions;
  }

  if (overrides.max_positions) spec.encoder.max_positions = *overrides.max_positions;
  if (overrides.attention_window) spec.encoder.attention_window = *overrides.attention_window;
  apply_head_overrides(spec.head, overrides);
  spec.encoder.validate();
  if (spec.lora) spec.lora->validate();
  if (spec.freeze.mode == FreezeMode::top_k_unfrozen && spec.freeze.k > spec.encoder.num_layers) {
    throw ConfigError("variant " + spec.name + " unfreezes " + std::to_string(spec.freeze.k) + " layers but the " +
                      std::string(preset_name(preset)) + " encoder has " + std::to_string(spec.encoder.num_layers));
  }
  spec.input_dim = spec.encoder.model_dim;
  return spec;
}

VariantSpec make_external_variant(std::string_view name, std::size_t dim, const VariantOverrides& overrides) {
  if (dim == 0) throw ConfigError("embedding width must be positive");
  VariantSpec spec = make_variant(name, Preset::desk, Vocab::kNumSpecial + 1, overrides);
  if (spec.freeze.mode != FreezeMode::all_frozen || spec.lora) {
    throw ConfigError("variant " + spec.name +
                      " trains encoder parameters; precomputed embeddings need bilstm_frozen or gru_frozen");
  }
  spec.external_encoder = true;
  spec.input_dim = dim;
  return spec;
}

std::vector<ParamSpec> variant_layout(const VariantSpec& spec) {
  std::vector<ParamSpec> out;
  if (!spec.external_encoder) out = encoder_layout(spec.encoder, spec.lora, spec.freeze);
  auto head = head_layout(spec.head, spec.input_dim);
  out.insert(out.end(), head.begin(), head.end());
  return out;
}

ParamBreakdown count_variant_params(const VariantSpec& spec) {
  ParamBreakdown b;
  for (const auto& p : variant_layout(spec)) {
    if (p.frozen) continue;
    if (p.name.starts_with("head.")) {
      b.head += p.size();
    } else {
      b.encoder += p.size();
      if (p.name.ends_with(".lora_a") || p.name.ends_with(".lora_b")) b.adapters += p.size();
    }
  }
  return b;
}

nlohmann::json to_json(const VariantSpec& spec) {
  nlohmann::json j;
  j["name"] = spec.name;
  j["external_encoder"] = spec.external_encoder;
  j["input_dim"] = spec.input_dim;
  const auto& e = spec.encoder;
  j["encoder"] = {{"num_layers", e.num_layers},   {"model_dim", e.model_dim},
                  {"num_heads", e.num_heads},     {"ffn_dim", e.ffn_dim},
                  {"vocab_size", e.vocab_size},   {"max_positions", e.max_positions},
                  {"attention_window", e.attention_window}, {"causal", e.causal}};
  j["freeze"] = {{"mode", freeze_mode_name(spec.freeze.mode)},
                 {"k", spec.freeze.k},
                 {"embeddings_trainable", spec.freeze.embeddings_trainable}};
  if (spec.lora) {
    nlohmann::json targets = nlohmann::json::array();
    for (auto t : spec.lora->targets) targets.push_back(target_name(t));
    j["lora"] = {{"rank", spec.lora->rank}, {"alpha", spec.lora->alpha}, {"targets", targets}};
  } else {
    j["lora"] = nullptr;
  }
  j["head"] = {{"kind", head_kind_name(spec.head.kind)},
               {"hidden_size", spec.head.hidden_size},
               {"num_layers", spec.head.num_layers},
               {"dropout", spec.head.dropout},
               {"pooling", spec.head.pooling == Pooling::cls ? "cls" : "last_hidden"}};
  return j;
}

VariantSpec variant_from_json(const nlohmann::json& j) {
  try {
    VariantSpec spec;
    spec.name = j.at("name").get<std::string>();
    spec.external_encoder = j.at("external_encoder").get<bool>();
    spec.input_dim = j.at("input_dim").get<std::size_t>();
    const auto& e = j.at("encoder");
    spec.encoder.num_layers = e.at("num_layers").get<std::size_t>();
    spec.encoder.model_dim = e.at("model_dim").get<std::size_t>();
    spec.encoder.num_heads = e.at("num_heads").get<std::size_t>();
    spec.encoder.ffn_dim = e.at("ffn_dim").get<std::size_t>();
    spec.encoder.vocab_size = e.at("vocab_size").get<std::size_t>();
    spec.encoder.max_positions = e.at("max_positions").get<std::size_t>();
    spec.encoder.attention_window = e.at("attention_window").get<std::size_t>();
    spec.encoder.causal = e.at("causal").get<bool>();
    const auto& f = j.at("freeze");
    spec.freeze.mode = parse_freeze_mode(f.at("mode").get<std::string>());
    spec.freeze.k = f.at("k").get<std::size_t>();
    spec.freeze.embeddings_trainable = f.at("embeddings_trainable").get<bool>();
    if (!j.at("lora").is_null()) {
      const auto& l = j.at("lora");
      LoraConfig lora;
      lora.rank = l.at("rank").get<std::size_t>();
      lora.alpha = l.at("alpha").get<double>();
      lora.targets.clear();
      for (const auto& t : l.at("targets")) lora.targets.push_back(parse_target(t.get<std::string>()));
      lora.validate();
      spec.lora = lora;
    }
    const auto& h = j.at("head");
    spec.head.kind = parse_head_kind(h.at("kind").get<std::string>());
    spec.head.hidden_size = h.at("hidden_size").get<std::size_t>();
    spec.head.num_layers = h.at("num_layers").get<std::size_t>();
    spec.head.dropout = h.at("dropout").get<double>();
    spec.head.pooling = h.at("pooling").get<std::string>() == "cls" ? Pooling::cls : Pooling::last_hidden;
    spec.head.validate();
    if (!spec.external_encoder) spec.encoder.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(std::string("variant spec: ") + e.what());
  }
}

}  // namespace mgtd
