// SPDX-License-Identifier: Apache-2.0
#include "mgtd/gradcheck_suite.hpp"

#include <algorithm>
#include <cstdio>

#include "mgtd/encoder.hpp"
#include "mgtd/heads.hpp"
#include "mgtd/linear.hpp"
#include "mgtd/model.hpp"
#include "mgtd/ops.hpp"
#include "mgtd/parallel.hpp"
#include "mgtd/probe.hpp"
#include "mgtd/rng.hpp"

namespace mgtd {

namespace {

using D = double;
using Check = std::function<GradCheckCase(std::uint64_t, const GradCheckOptions&)>;

Tensor<D> random_tensor(Shape shape, Rng& rng, double bound = 1.0) {
  Tensor<D> t(std::move(shape));
  init_uniform(t, rng, bound);
  return t;
}

Parameter<D> random_param(const std::string& name, Shape shape, Rng& rng, double bound = 1.0) {
  Parameter<D> p(name, shape);
  init_uniform(p.value, rng, bound);
  return p;
}

// Gains near 1, everything else small and nonzero, so no gradient vanishes by
// construction (zero-initialized LoRA B in particular).
void randomize(const ParamRefs<D>& params, Rng& rng) {
  for (auto* p : params) {
    init_uniform(p->value, rng, 0.5);
    if (p->name.ends_with(".gain")) {
      for (auto& v : p->value.values()) v += 1.0;
    }
  }
}

// The key bias of every attention head has an identically zero gradient
// (softmax is invariant to a per-query shift), so its finite differences are
// pure roundoff. Cases containing an encoder scale their loss down so that
// roundoff stays well below the 1e-8 relative-error floor.
constexpr double kEncoderLossScale = 1e-3;

// sum(R .* Y) for a fixed random projection R.
double project(const Tensor<D>& y, const Tensor<D>& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
  return s;
}

GradCheckCase matmul_case(std::uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  auto a = random_param("a", {4, 5}, rng);
  auto b = random_param("b", {5, 3}, rng);
  const auto r = random_tensor({4, 3}, rng);
  auto loss = [&](bool grad) {
    const auto c = matmul(a.value, b.value);
    if (grad) {
      const auto g = matmul_backward(a.value, b.value, r);
      add_inplace(a.grad, g.da);
      add_inplace(b.grad, g.db);
    }
    return project(c, r);
  };
  return {"primitive.matmul", grad_check(loss, {&a, &b}, opt)};
}

GradCheckCase activation_case(Activation kind, const char* name, std::uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  auto x = random_param("x", {3, 7}, rng, 2.0);
  if (kind == Activation::relu) {
    // Keep away from the kink at zero.
    for (auto& v : x.value.values()) v += v >= 0.0 ? 0.1 : -0.1;
  }
  const auto r = random_tensor({3, 7}, rng);
  auto loss = [&](bool grad) {
    const auto y = activate(kind, x.value);
    if (grad) add_inplace(x.grad, activate_backward(kind, x.value, y, r));
    return project(y, r);
  };
  return {std::string("primitive.") + name, grad_check(loss, {&x}, opt)};
}

GradCheckCase layer_norm_case(std::uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  auto x = random_param("x", {3, 8}, rng);
  auto gain = random_param("gain", {8}, rng, 0.5);
  for (auto& v : gain.value.values()) v += 1.0;
  auto bias = random_param("bias", {8}, rng, 0.5);
  const auto r = random_tensor({3, 8}, rng);
  auto loss = [&](bool grad) {
    LayerNormCache<D> cache;
    const auto y = layer_norm(x.value, gain.value, bias.value, &cache);
    if (grad) add_inplace(x.grad, layer_norm_backward(r, cache, gain.value, &gain.grad, &bias.grad));
    return project(y, r);
  };
  return {"primitive.layer_norm", grad_check(loss, {&x, &gain, &bias}, opt)};
}

GradCheckCase softmax_ce_case(std::uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  auto logits = random_param("logits", {5, 2}, rng, 2.0);
  std::vector<int> labels(5);
  for (auto& l : labels) l = static_cast<int>(rng.below(2));
  auto loss = [&](bool grad) {
    const auto ce = softmax_ce(logits.value, std::span<const int>(labels));
    if (grad) add_inplace(logits.grad, ce.dlogits);
    return ce.loss;
  };
  return {"primitive.softmax_ce", grad_check(loss, {&logits}, opt)};
}

GradCheckCase dropout_case(std::uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  auto x = random_param("x", {4, 6}, rng);
  const auto r = random_tensor({4, 6}, rng);
  const std::uint64_t mask_seed = rng.next();
  auto loss = [&](bool grad) {
    Tensor<D> mask;
    const auto y = dropout(x.value, 0.3, mask_seed, true, &mask);
    if (grad) add_inplace(x.grad, dropout_backward(r, mask));
    return project(y, r);
  };
  return {"primitive.dropout(fixed mask)", grad_check(loss, {&x}, opt)};
}

GradCheckCase attention_case(AttentionSpec spec, const char* name, std::uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  auto q = random_param("q", {6, 4}, rng);
  auto k = random_param("k", {6, 4}, rng);
  auto v = random_param("v", {6, 4}, rng);
  const std::vector<std::uint8_t> mask{1, 1, 1, 1, 1, 0};
  const auto r = random_tensor({6, 4}, rng);
  auto loss = [&](bool grad) {
    AttentionCache<D> cache;
    const auto y = attention(q.value, k.value, v.value, mask, spec, &cache);
    if (grad) {
      const auto g = attention_backward(r, q.value, k.value, v.value, cache);
      add_inplace(q.grad, g.dq);
      add_inplace(k.grad, g.dk);
      add_inplace(v.grad, g.dv);
    }
    return project(y, r);
  };
  return {std::string("primitive.") + name, grad_check(loss, {&q, &k, &v}, opt)};
}

GradCheckCase linear_case(bool lora, std::uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  Linear<D> layer("linear", 5, 4);
  layer.init(rng);
  if (lora) layer.attach_lora(2, 3.0, rng);
  ParamRefs<D> params;
  layer.collect(params);
  randomize(params, rng);
  auto x = random_param("input", {3, 5}, rng);
  params.push_back(&x);
  const auto r = random_tensor({3, 4}, rng);
  auto loss = [&](bool grad) {
    typename Linear<D>::Cache cache;
    const auto y = layer.forward(x.value, &cache);
    if (grad) add_inplace(x.grad, layer.backward(r, cache, true));
    return project(y, r);
  };
  return {lora ? "primitive.linear+lora" : "primitive.linear", grad_check(loss, params, opt)};
}

GradCheckCase lstm_cell_case(std::uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  CellParams<D> cell("lstm", CellKind::lstm, 5, 4);
  ParamRefs<D> params;
  cell.collect(params);
  randomize(params, rng);
  auto x = random_param("x", {5}, rng);
  auto h = random_param("h_prev", {4}, rng);
  auto c = random_param("c_prev", {4}, rng);
  params.insert(params.end(), {&x, &h, &c});
  const auto rh = random_tensor({4}, rng);
  const auto rc = random_tensor({4}, rng);
  auto loss = [&](bool grad) {
    LstmCellCache<D> cache;
    const auto s = lstm_cell(x.value, h.value, c.value, cell, &cache);
    if (grad) {
      const auto g = lstm_cell_backward(rh, rc, cache, cell);
      add_inplace(x.grad, g.dx);
      add_inplace(h.grad, g.dh_prev);
      add_inplace(c.grad, g.dc_prev);
    }
    return project(s.h, rh) + project(s.c, rc);
  };
  return {"cell.lstm", grad_check(loss, params, opt)};
}

GradCheckCase gru_cell_case(std::uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  CellParams<D> cell("gru", CellKind::gru, 5, 4);
  ParamRefs<D> params;
  cell.collect(params);
  randomize(params, rng);
  auto x = random_param("x", {5}, rng);
  auto h = random_param("h_prev", {4}, rng);
  params.insert(params.end(), {&x, &h});
  const auto r = random_tensor({4}, rng);
  auto loss = [&](bool grad) {
    GruCellCache<D> cache;
    const auto y = gru_cell(x.value, h.value, cell, &cache);
    if (grad) {
      const auto g = gru_cell_backward(r, cache, cell);
      add_inplace(x.grad, g.dx);
      add_inplace(h.grad, g.dh_prev);
    }
    return project(y, r);
  };
  return {"cell.gru", grad_check(loss, params, opt)};
}

EncoderConfig tiny_encoder(std::size_t layers) {
  EncoderConfig c;
  c.num_layers = layers;
  c.model_dim = 8;
  c.num_heads = 2;
  c.ffn_dim = 16;
  c.vocab_size = 20;
  c.max_positions = 16;
  return c;
}

std::vector<std::int32_t> random_ids(std::size_t n, std::size_t vocab, Rng& rng) {
  std::vector<std::int32_t> ids(n);
  for (auto& id : ids) id = static_cast<std::int32_t>(Vocab::kNumSpecial + rng.below(vocab - Vocab::kNumSpecial));
  return ids;
}

enum class EncoderMode { all_trainable, lora, top1 };

GradCheckCase encoder_case(EncoderMode mode, std::uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  EncoderConfig config = tiny_encoder(1);
  config.attention_window = mode == EncoderMode::lora ? 3 : 0;
  Encoder<D> enc(config, rng.next());
  const char* name = "encoder.all_trainable";
  if (mode == EncoderMode::lora) {
    LoraConfig lora;
    lora.rank = 2;
    lora.alpha = 2.0;
    lora.targets = {LoraTarget::q, LoraTarget::k, LoraTarget::v, LoraTarget::o};
    enc.apply_lora(lora, rng.next());
    enc.set_trainable(FreezeSpec::all_frozen());
    name = "encoder.lora(window=3)";
  } else if (mode == EncoderMode::top1) {
    enc.set_trainable(FreezeSpec::top_k_unfrozen(1));
    name = "encoder.top1_unfrozen";
  }
  randomize(enc.parameters(), rng);
  // Seven positions, the last two PAD.
  auto ids = random_ids(7, config.vocab_size, rng);
  ids[5] = ids[6] = Vocab::kPad;
  const auto r = random_tensor({7, config.model_dim}, rng, kEncoderLossScale);
  auto loss = [&](bool grad) {
    typename Encoder<D>::Cache cache;
    const auto h = enc.forward(ids, 5, &cache);
    if (grad) enc.backward(r, cache);
    return project(h, r);
  };
  return {name, grad_check(loss, enc.parameters(), opt)};
}

GradCheckCase head_case(HeadKind kind, std::uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  HeadConfig config;
  config.kind = kind;
  config.hidden_size = 3;
  config.num_layers = kind == HeadKind::linear ? 0 : 2;
  config.pooling = kind == HeadKind::linear ? Pooling::cls : Pooling::last_hidden;
  config.dropout = 0.2;  // inactive: no dropout rng is passed
  Head<D> head(config, 8, rng.next());
  ParamRefs<D> params = head.parameters();
  randomize(params, rng);
  // Four real rows plus one padded row.
  auto hidden = random_param("hidden", {5, 8}, rng);
  params.push_back(&hidden);
  const int label = 1;
  auto loss = [&](bool grad) {
    typename Head<D>::Cache cache;
    const auto logits = head.forward(hidden.value, 4, &cache, nullptr);
    const auto ce = softmax_ce(logits, std::span<const int>(&label, 1));
    if (grad) add_inplace(hidden.grad, head.backward(ce.dlogits, cache, true));
    return ce.loss;
  };
  const char* name = kind == HeadKind::linear ? "head.linear" : kind == HeadKind::bilstm ? "head.bilstm" : "head.bigru";
  return {name, grad_check(loss, params, opt)};
}

GradCheckCase model_case(std::uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  VariantSpec spec;
  spec.name = "bilstm_unfrozen2";
  spec.encoder = tiny_encoder(3);
  spec.freeze = FreezeSpec::top_k_unfrozen(2);
  spec.head.kind = HeadKind::bilstm;
  spec.head.hidden_size = 3;
  spec.head.num_layers = 2;
  spec.input_dim = spec.encoder.model_dim;
  Model<D> model(spec, rng.next());
  randomize(model.parameters(), rng);
  const auto ids = random_ids(6, spec.encoder.vocab_size, rng);
  const int label = 0;
  auto loss = [&](bool grad) {
    typename Model<D>::Cache cache;
    const auto logits = model.forward(ids, ids.size(), &cache, nullptr);
    const auto ce = softmax_ce(logits, std::span<const int>(&label, 1), 1.0 / kEncoderLossScale);
    if (grad) model.backward(ce.dlogits, cache);
    return ce.loss;
  };
  return {"model.bilstm_unfrozen2", grad_check(loss, model.parameters(), opt)};
}

GradCheckCase lm_case(LmKind kind, std::uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  LmConfig config;
  config.kind = kind;
  config.model_dim = 8;
  config.num_heads = 2;
  config.vocab_size = 12;
  config.max_len = 8;
  LanguageModel<D> lm(config, rng.next());
  randomize(lm.parameters(), rng);
  const auto ids = random_ids(6, config.vocab_size, rng);
  std::vector<int> targets(ids.begin() + 1, ids.end());
  auto loss = [&](bool grad) {
    typename LanguageModel<D>::Cache cache;
    const auto logits = lm.forward(ids, &cache);
    const double norm = static_cast<double>(targets.size()) / kEncoderLossScale;
    const auto ce = softmax_ce(logits, std::span<const int>(targets), norm);
    if (grad) lm.backward(ce.dlogits, cache);
    return ce.loss;
  };
  return {std::string("probe.") + std::string(lm_kind_name(kind)), grad_check(loss, lm.parameters(), opt)};
}

}  // namespace

bool GradCheckSuite::passed() const {
  return std::all_of(cases.begin(), cases.end(), [&](const GradCheckCase& c) { return c.report.passed(); });
}

double GradCheckSuite::max_rel_error() const {
  double m = 0.0;
  for (const auto& c : cases) m = std::max(m, c.report.max_rel_error());
  return m;
}

GradCheckSuite run_gradcheck_suite(std::uint64_t seed, double tolerance) {
  const std::vector<Check> checks{
      matmul_case,
      [](auto s, const auto& o) { return activation_case(Activation::gelu, "gelu", s, o); },
      [](auto s, const auto& o) { return activation_case(Activation::tanh, "tanh", s, o); },
      [](auto s, const auto& o) { return activation_case(Activation::sigmoid, "sigmoid", s, o); },
      [](auto s, const auto& o) { return activation_case(Activation::relu, "relu", s, o); },
      layer_norm_case,
      softmax_ce_case,
      dropout_case,
      [](auto s, const auto& o) { return attention_case({0, false}, "attention", s, o); },
      [](auto s, const auto& o) { return attention_case({3, false}, "attention(window=3)", s, o); },
      [](auto s, const auto& o) { return attention_case({0, true}, "attention(causal)", s, o); },
      [](auto s, const auto& o) { return linear_case(false, s, o); },
      [](auto s, const auto& o) { return linear_case(true, s, o); },
      lstm_cell_case,
      gru_cell_case,
      [](auto s, const auto& o) { return encoder_case(EncoderMode::all_trainable, s, o); },
      [](auto s, const auto& o) { return encoder_case(EncoderMode::lora, s, o); },
      [](auto s, const auto& o) { return encoder_case(EncoderMode::top1, s, o); },
      [](auto s, const auto& o) { return head_case(HeadKind::linear, s, o); },
      [](auto s, const auto& o) { return head_case(HeadKind::bilstm, s, o); },
      [](auto s, const auto& o) { return head_case(HeadKind::bigru, s, o); },
      model_case,
      [](auto s, const auto& o) { return lm_case(LmKind::lstm_lm, s, o); },
      [](auto s, const auto& o) { return lm_case(LmKind::transformer_lm, s, o); },
  };
  GradCheckSuite suite;
  suite.tolerance = tolerance;
  suite.cases.resize(checks.size());
  parallel_for(checks.size(), [&](std::size_t i) {
    GradCheckOptions opt;
    opt.tolerance = tolerance;
    opt.seed = derive_seed(seed, "gradcheck.coords", i);
    suite.cases[i] = checks[i](derive_seed(seed, "gradcheck.case", i), opt);
  });
  return suite;
}

std::string render_gradcheck_suite(const GradCheckSuite& suite) {
  std::string out;
  char buf[200];
  for (const auto& c : suite.cases) {
    std::size_t coords = 0;
    for (const auto& e : c.report.entries) coords += e.coords_checked;
    std::snprintf(buf, sizeof buf, "%-4s %-32s params=%-3zu coords=%-4zu max_rel_err=%.3e\n",
                  c.report.passed() ? "ok" : "FAIL", c.name.c_str(), c.report.entries.size(), coords,
                  c.report.max_rel_error());
    out += buf;
    for (const auto& f : c.report.failures()) out += "     " + f + "\n";
  }
  std::snprintf(buf, sizeof buf, "%s: %zu cases, max relative error %.3e (tolerance %.0e)\n",
                suite.passed() ? "PASSED" : "FAILED", suite.cases.size(), suite.max_rel_error(), suite.tolerance);
  out += buf;
  return out;
}

nlohmann::json gradcheck_suite_json(const GradCheckSuite& suite) {
  nlohmann::json cases = nlohmann::json::array();
  for (const auto& c : suite.cases) {
    nlohmann::json params = nlohmann::json::array();
    for (const auto& e : c.report.entries) {
      params.push_back({{"name", e.name}, {"coords", e.coords_checked}, {"max_rel_error", e.max_rel_error}});
    }
    cases.push_back({{"name", c.name},
                     {"passed", c.report.passed()},
                     {"max_rel_error", c.report.max_rel_error()},
                     {"params", params},
                     {"failures", c.report.failures()}});
  }
  return {{"passed", suite.passed()},
          {"tolerance", suite.tolerance},
          {"max_rel_error", suite.max_rel_error()},
          {"cases", cases}};
}

}  // namespace mgtd
