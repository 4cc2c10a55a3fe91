// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "mgtd/corpus.hpp"
#include "mgtd/encoder.hpp"
#include "mgtd/errors.hpp"
#include "mgtd/gradcheck_suite.hpp"
#include "mgtd/rng.hpp"

using namespace mgtd;

namespace {

Tensor<double> random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Tensor<double> t = Tensor<double>::matrix(r, c);
  init_uniform(t, rng, 1.0);
  return t;
}

std::vector<std::int32_t> random_ids(std::size_t n, std::size_t vocab, Rng& rng) {
  std::vector<std::int32_t> ids(n);
  for (auto& id : ids) id = static_cast<std::int32_t>(Vocab::kNumSpecial + rng.below(vocab - Vocab::kNumSpecial));
  return ids;
}

// Independent masked attention: explicit |i-j| window and key mask, softmax
// computed from scratch.
Tensor<double> brute_attention(const Tensor<double>& q, const Tensor<double>& k, const Tensor<double>& v,
                               const std::vector<std::uint8_t>& mask, std::size_t window) {
  const std::size_t n = q.rows(), dk = q.cols();
  Tensor<double> out = Tensor<double>::matrix(n, v.cols());
  const long half = window == 0 ? static_cast<long>(n) : static_cast<long>((window - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> w(n, 0.0);
    double mx = -1e300;
    for (std::size_t j = 0; j < n; ++j) {
      if (!mask[j] || std::abs(static_cast<long>(i) - static_cast<long>(j)) > half) continue;
      double s = 0.0;
      for (std::size_t c = 0; c < dk; ++c) s += q(i, c) * k(j, c);
      w[j] = s / std::sqrt(static_cast<double>(dk));
      mx = std::max(mx, w[j]);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!mask[j] || std::abs(static_cast<long>(i) - static_cast<long>(j)) > half) {
        w[j] = 0.0;
        continue;
      }
      w[j] = std::exp(w[j] - mx);
      z += w[j];
    }
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t c = 0; c < v.cols(); ++c) out(i, c) += w[j] / z * v(j, c);
    }
  }
  return out;
}

double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::size_t trainable(const std::vector<ParamSpec>& layout) { return count_trainable(layout); }

}  // namespace

TEST_CASE("config validation") {
  auto c = EncoderConfig::desk(50);
  CHECK_NOTHROW(c.validate());
  c.num_heads = 5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = EncoderConfig::desk(50);
  c.attention_window = 4;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  LoraConfig lora;
  lora.rank = 0;
  CHECK_THROWS_AS(lora.validate(), ConfigError);
  lora.rank = 2;
  lora.targets.clear();
  CHECK_THROWS_AS(lora.validate(), ConfigError);
}

TEST_CASE("attention window semantics") {
  Rng rng(21);
  const std::size_t n = 6;
  const auto q = random_matrix(n, 4, rng);
  const auto k = random_matrix(n, 4, rng);
  const auto v = random_matrix(n, 4, rng);
  const std::vector<std::uint8_t> all(n, 1);

  SUBCASE("wide window equals full attention") {
    const auto full = attention(q, k, v, all, {}, static_cast<AttentionCache<double>*>(nullptr));
    const auto wide = attention(q, k, v, all, {.window = 2 * n - 1}, static_cast<AttentionCache<double>*>(nullptr));
    CHECK(max_abs_diff(full, wide) < 1e-6);
  }
  SUBCASE("window 1 returns V") {
    const auto q3 = random_matrix(3, 4, rng), k3 = random_matrix(3, 4, rng), v3 = random_matrix(3, 4, rng);
    const auto out = attention(q3, k3, v3, {}, {.window = 1}, static_cast<AttentionCache<double>*>(nullptr));
    CHECK(max_abs_diff(out, v3) < 1e-15);
  }
  SUBCASE("window 3 with a PAD key matches brute force") {
    std::vector<std::uint8_t> mask{1, 1, 1, 1, 1, 0};
    const auto out = attention(q, k, v, mask, {.window = 3}, static_cast<AttentionCache<double>*>(nullptr));
    CHECK(max_abs_diff(out, brute_attention(q, k, v, mask, 3)) < 1e-12);
    const auto full = attention(q, k, v, mask, {}, static_cast<AttentionCache<double>*>(nullptr));
    CHECK(max_abs_diff(full, brute_attention(q, k, v, mask, 0)) < 1e-12);
  }
  SUBCASE("causal mask") {
    CHECK(attention_allowed(3, 2, {}, {.causal = true}));
    CHECK_FALSE(attention_allowed(2, 3, {}, {.causal = true}));
    CHECK_FALSE(attention_allowed(0, 2, {}, {.window = 3}));
  }
}

TEST_CASE("encoder forward shapes, determinism and errors") {
  const auto config = EncoderConfig::desk(40);
  const Encoder<float> enc(config, 7);
  Rng rng(22);
  const auto ids = random_ids(7, 40, rng);
  const auto h1 = enc.forward(ids, 7, nullptr);
  CHECK(h1.shape() == Shape{7, 32});
  CHECK(Encoder<float>(config, 7).forward(ids, 7, nullptr) == h1);
  CHECK(Encoder<float>(config, 8).forward(ids, 7, nullptr) != h1);

  std::vector<Record> records{{"a", "x y z w", kHuman, "human", "d"}, {"b", "x y", kMachine, "dolly", "d"}};
  auto vocab = Vocab::build(records, 40);
  const auto batches = make_sequential_batches(records, vocab, 2);
  const auto hb = enc.forward_batch(batches[0]);
  CHECK(hb.shape() == Shape{2, batches[0].cols, 32});

  auto bad = ids;
  bad[2] = 40;
  CHECK_THROWS_AS(enc.forward(bad, 7, nullptr), DataError);
  const std::vector<std::int32_t> too_long(config.max_positions + 1, Vocab::kCls);
  CHECK_THROWS_AS(enc.forward(too_long, too_long.size(), nullptr), DataError);
}

TEST_CASE("PAD suffix does not change real-token states") {
  const Encoder<double> enc(EncoderConfig::desk(30), 3);
  Rng rng(23);
  auto ids = random_ids(5, 30, rng);
  const auto base = enc.forward(ids, 5, nullptr);
  ids.push_back(Vocab::kPad);
  ids.push_back(Vocab::kPad);
  const auto padded = enc.forward(ids, 5, nullptr);
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < base.cols(); ++c) CHECK(padded(r, c) == doctest::Approx(base(r, c)).epsilon(1e-12));
  }
}

TEST_CASE("LoRA") {
  const auto config = EncoderConfig::desk(30);
  Rng rng(24);
  const auto ids = random_ids(9, 30, rng);

  SUBCASE("zero-initialized adapters leave outputs unchanged") {
    for (int trial = 0; trial < 5; ++trial) {
      Encoder<float> enc(config, 100 + trial);
      const auto before = enc.forward(ids, 9, nullptr);
      enc.apply_lora({.rank = 4, .alpha = 4, .targets = {LoraTarget::q, LoraTarget::k, LoraTarget::v, LoraTarget::o}},
                     5);
      CHECK(enc.forward(ids, 9, nullptr) == before);
    }
  }
  SUBCASE("only adapters train and stacking is refused") {
    Encoder<float> enc(config, 1);
    enc.apply_lora({.rank = 4, .alpha = 4, .targets = {LoraTarget::q}}, 5);
    std::size_t n = 0;
    for (const auto* p : enc.parameters()) {
      if (!p->frozen) {
        CHECK(p->name.find(".lora_") != std::string::npos);
        n += p->size();
      }
    }
    CHECK(n == 2 * 1 * 2 * 32 * 4);
    CHECK(count_trainable_params(enc.parameters()) == 512);
    CHECK_THROWS_AS(enc.apply_lora({.rank = 4, .alpha = 4}, 5), ConfigError);
  }
}

TEST_CASE("parameter accounting on the base preset") {
  const auto base = EncoderConfig::base();
  const LoraConfig qv{.rank = 20, .alpha = 20, .targets = {LoraTarget::q, LoraTarget::v}};
  CHECK(trainable(encoder_layout(base, qv, FreezeSpec::all_frozen())) == 737280);
  CHECK(trainable(encoder_layout(base, std::nullopt, FreezeSpec::all_frozen())) == 0);
  CHECK(trainable(encoder_layout(base, std::nullopt, FreezeSpec::top_k_unfrozen(2))) == 14175744);
  CHECK(trainable(encoder_layout(base, std::nullopt, FreezeSpec::top_k_unfrozen(1))) == 7087872);
  const double full = static_cast<double>(trainable(encoder_layout(base, std::nullopt, FreezeSpec::all_trainable())));
  CHECK(std::abs(full - 124e6) / 124e6 < 0.02);

  // Per-layer count from the closed-form formula.
  const std::size_t d = 768, f = 3072;
  const std::size_t per_layer = 4 * (d * d + d) + (d * f + f) + (f * d + d) + 2 * 2 * d;
  CHECK(per_layer == 7087872);
  const std::size_t embeddings = 50265 * d + 514 * d + 2 * d;
  CHECK(static_cast<std::size_t>(full) == embeddings + 12 * per_layer);

  CHECK_THROWS_AS(encoder_layout(base, std::nullopt, FreezeSpec::top_k_unfrozen(13)), ConfigError);
}

TEST_CASE("layout matches allocated parameters and counts are additive (property)") {
  Rng rng(25);
  for (int trial = 0; trial < 20; ++trial) {
    EncoderConfig c;
    c.num_layers = 1 + rng.below(3);
    c.num_heads = 1 + rng.below(3);
    c.model_dim = c.num_heads * (1 + rng.below(4));
    c.ffn_dim = 1 + rng.below(20);
    c.vocab_size = 5 + rng.below(20);
    c.max_positions = 2 + rng.below(20);
    const FreezeSpec freeze = rng.bernoulli(0.5) ? FreezeSpec::top_k_unfrozen(rng.below(c.num_layers + 1))
                                                 : FreezeSpec::all_trainable();
    Encoder<float> enc(c, trial);
    enc.set_trainable(freeze);
    const auto layout = encoder_layout(c, std::nullopt, freeze);
    CHECK(describe(enc.parameters()) == layout);
    std::size_t sum = 0;
    for (const auto& p : layout) sum += p.frozen ? 0 : p.size();
    CHECK(count_trainable(layout) == sum);
  }
}

TEST_CASE("top-k freezing leaves the lowest layers and embeddings frozen") {
  EncoderConfig c = EncoderConfig::desk(20);
  c.num_layers = 3;
  Encoder<float> enc(c, 1);
  enc.set_trainable(FreezeSpec::top_k_unfrozen(1));
  for (const auto* p : enc.parameters()) {
    const bool top = p->name.rfind("encoder.layer2.", 0) == 0;
    CHECK(p->frozen == !top);
  }
  enc.set_trainable(FreezeSpec::all_frozen());
  CHECK_FALSE(enc.any_trainable());
  CHECK_THROWS_AS(enc.set_trainable(FreezeSpec::top_k_unfrozen(4)), ConfigError);
}

TEST_CASE("encoder gradient checks") {
  const auto suite = run_gradcheck_suite(42);
  std::set<std::string> encoder_cases;
  for (const auto& c : suite.cases) {
    if (c.name.rfind("encoder.", 0) == 0 || c.name.rfind("primitive.attention", 0) == 0) {
      encoder_cases.insert(c.name);
      INFO(c.name);
      CHECK(c.report.max_rel_error() < 1e-4);
    }
  }
  CHECK(encoder_cases.size() >= 6);
}
