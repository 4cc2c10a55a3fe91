// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "mgtd/checkpoint.hpp"
#include "mgtd/container.hpp"
#include "mgtd/errors.hpp"
#include "mgtd/eval.hpp"
#include "mgtd/rng.hpp"
#include "mgtd/search.hpp"
#include "mgtd/synthetic.hpp"
#include "mgtd/train.hpp"
#include "mgtd/variant.hpp"

using namespace mgtd;

namespace {

struct Toy {
  std::vector<Record> train;
  std::vector<Record> val;
  Vocab vocab;
};

const Toy& toy() {
  static const Toy t = [] {
    const auto all = synthetic::detection_corpus(200, 3);
    auto [train, val] = synthetic::split(all, 0.8);
    Toy out{train, val, Vocab::build(train, 1000)};
    return out;
  }();
  return t;
}

VariantSpec desk_spec(const std::string& name, std::size_t vocab_size, const VariantOverrides& o = {}) {
  return make_variant(name, Preset::desk, vocab_size, o);
}

std::vector<Tensor<float>> values(const Model<float>& m) {
  std::vector<Tensor<float>> out;
  for (const auto* p : m.parameters()) out.push_back(p->value);
  return out;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("mgtd_test_pipeline_" + name);
}

}  // namespace

TEST_CASE("variant table") {
  CHECK(variant_names().size() == 6);
  try {
    make_variant("nope", Preset::desk, 50);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    for (const auto& n : variant_names()) CHECK(msg.find(n) != std::string::npos);
  }

  const auto bf = desk_spec("bilstm_frozen", 50);
  CHECK(bf.freeze == FreezeSpec::all_frozen());
  CHECK(bf.head.kind == HeadKind::bilstm);
  CHECK(desk_spec("bilstm_unfrozen2", 50).freeze == FreezeSpec::top_k_unfrozen(2));
  CHECK(desk_spec("lora_longcontext", 50).encoder.attention_window > 0);
  CHECK(desk_spec("lora_frozen", 50).lora.has_value());
  CHECK(desk_spec("gru_frozen", 50).head.kind == HeadKind::bigru);
  CHECK(desk_spec("full_finetune", 50).head.kind == HeadKind::linear);

  for (const auto& n : variant_names()) {
    const auto spec = desk_spec(n, 77);
    CHECK(variant_from_json(to_json(spec)) == spec);
  }
  CHECK_THROWS_AS(variant_from_json(nlohmann::json{{"name", 3}}), CorruptionError);
}

TEST_CASE("base preset parameter counts") {
  auto count = [](const std::string& n) { return count_variant_params(make_variant(n, Preset::base, 0)); };
  CHECK(count("bilstm_frozen").total() == 3675138);
  CHECK(count("bilstm_frozen").encoder == 0);
  CHECK(count("gru_frozen").total() == 2756610);
  CHECK(count("bilstm_unfrozen2").total() == 17850882);
  CHECK(count("bilstm_unfrozen2").encoder == 14175744);
  CHECK(count("lora_frozen").adapters == 737280);
  CHECK(count("lora_frozen").total() == 737280 + 1538);
  const double full = static_cast<double>(count("full_finetune").total());
  CHECK(std::abs(full - 124e6) / 124e6 < 0.02);
}

TEST_CASE("desk models match their layouts") {
  for (const auto& n : variant_names()) {
    const auto spec = desk_spec(n, 60);
    const Model<float> model(spec, 1);
    CHECK(describe(const_cast<Model<float>&>(model).parameters()) == variant_layout(spec));
    CHECK(model.trainable_params() == count_variant_params(spec).total());
  }
  CHECK(Model<float>(desk_spec("bilstm_frozen", 60), 1).trainable_params() ==
        count_trainable(head_layout(desk_spec("bilstm_frozen", 60).head, 32)));
}

TEST_CASE("lora_frozen trains exactly the adapters and the head") {
  Model<float> model(desk_spec("lora_frozen", 60), 1);
  for (const auto* p : model.parameters()) {
    const bool adapter = p->name.find(".lora_") != std::string::npos;
    const bool head = p->name.rfind("head.", 0) == 0;
    CHECK(!p->frozen == (adapter || head));
  }
}

TEST_CASE("training contracts") {
  const auto& t = toy();
  const auto train_s = prepare_samples(t.train, t.vocab, 128);
  const auto val_s = prepare_samples(t.val, t.vocab, 128);

  SUBCASE("frozen encoder never changes") {
    Model<float> model(desk_spec("bilstm_frozen", t.vocab.size()), 5);
    std::vector<Tensor<float>> before;
    for (const auto* p : model.encoder().parameters()) before.push_back(p->value);
    TrainConfig cfg{.epochs = 2, .batch_size = 4, .patience = 0};  // 80 steps
    train(model, train_s, val_s, cfg);
    const auto after = model.encoder().parameters();
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(after[i]->value == before[i]);
  }
  SUBCASE("lr 0 leaves parameters unchanged") {
    Model<float> model(desk_spec("full_finetune", t.vocab.size()), 5);
    const auto before = values(model);
    const auto initial = evaluate(model, val_s).metrics.accuracy;
    const auto result = train(model, train_s, val_s, {.epochs = 1, .head_lr = 0.0, .encoder_lr = 0.0});
    CHECK(values(model) == before);
    CHECK(result.history.at(0).val.accuracy == initial);
  }
  SUBCASE("errors") {
    Model<float> model(desk_spec("bilstm_frozen", t.vocab.size()), 5);
    CHECK_THROWS_AS(train(model, {}, val_s, {}), DataError);
    std::vector<Sample> one_class;
    for (const auto& s : train_s) {
      if (s.label == kHuman) one_class.push_back(s);
    }
    CHECK_THROWS_AS(train(model, one_class, val_s, {}), DataError);
    CHECK_THROWS_AS(train(model, train_s, val_s, {.epochs = 0}), ConfigError);
  }
  SUBCASE("history and best-epoch bookkeeping") {
    Model<float> model(desk_spec("gru_frozen", t.vocab.size()), 5);
    const auto result = train(model, train_s, val_s, {.epochs = 4, .patience = 0});
    REQUIRE(result.history.size() == 4);
    double best = -1.0;
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(result.history[i].epoch == i + 1);
      best = std::max(best, result.history[i].val.accuracy);
    }
    CHECK(result.best_val_accuracy == best);
    CHECK(result.history[result.best_epoch - 1].val.accuracy == best);
    CHECK(evaluate(model, val_s).metrics.accuracy == best);
  }
}

TEST_CASE("toy corpus is learnable and training is deterministic") {
  const auto& t = toy();
  auto spec = [&](std::size_t v) { return desk_spec("bilstm_frozen", v); };
  const TrainConfig cfg{.epochs = 5, .seed = 9};
  const auto a = train_detector(t.train, t.val, spec, cfg, 1000);
  const auto b = train_detector(t.train, t.val, spec, cfg, 1000);
  CHECK(a.result.best_val_accuracy >= 0.95);
  CHECK(checkpoint_bytes(a.detector) == checkpoint_bytes(b.detector));
  CHECK(history_json(a.result) == history_json(b.result));

  // Predictions agree with the eval module.
  const auto val_s = prepare_samples(t.val, a.detector.vocab, 128);
  const auto preds = predict(a.detector.model, val_s);
  std::vector<int> p, l;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    p.push_back(preds[i].label);
    l.push_back(val_s[i].label);
    CHECK(preds[i].prob_machine >= 0.0);
    CHECK(preds[i].prob_machine <= 1.0);
    CHECK(std::abs(preds[i].prob_machine + preds[i].prob_human - 1.0) < 1e-6);
    CHECK(preds[i].label == (preds[i].prob_machine > 0.5 ? kMachine : kHuman));
  }
  const auto ev = evaluate(a.detector.model, val_s);
  CHECK(ev.confusion == confusion(p, l));
  CHECK(ev.metrics.accuracy == metrics(confusion(p, l)).accuracy);

  std::vector<std::string> texts;
  for (const auto& r : t.val) texts.push_back(r.text);
  const auto from_text = predict_texts(a.detector, texts);
  for (std::size_t i = 0; i < texts.size(); ++i) CHECK(from_text[i].prob_machine == preds[i].prob_machine);
  CHECK(predict_texts(a.detector, {}).empty());
}

TEST_CASE("zeroed classifier predicts exactly one half") {
  const auto& t = toy();
  Detector d{t.vocab, Model<float>(desk_spec("bilstm_frozen", t.vocab.size()), 2), {}};
  d.model.head().classifier().weight.value.fill(0.0f);
  d.model.head().classifier().bias.value.fill(0.0f);
  std::vector<std::string> texts{"m01 m02", "h03 h04 h05", ""};
  for (const auto& p : predict_texts(d, texts)) CHECK(p.prob_machine == 0.5);
}

TEST_CASE("checkpoint round trip for every desk variant") {
  const auto& t = toy();
  const auto samples = prepare_samples(t.val, t.vocab, 128);
  for (const auto& n : variant_names()) {
    INFO(n);
    Detector d{t.vocab, Model<float>(desk_spec(n, t.vocab.size()), 11), {{"note", n}}};
    // Make adapter B matrices non-zero so they are exercised.
    Rng rng(4);
    for (auto* p : d.model.parameters()) {
      if (p->name.find(".lora_b") != std::string::npos) init_uniform(p->value, rng, 0.1);
    }
    const auto path = temp_path(n + ".ckpt");
    save_checkpoint(d, path);
    const Detector loaded = load_checkpoint(path);
    save_checkpoint(loaded, temp_path(n + ".2.ckpt"));
    CHECK(read_file(path) == read_file(temp_path(n + ".2.ckpt")));
    CHECK(loaded.vocab == d.vocab);
    CHECK(loaded.metadata == d.metadata);
    CHECK(loaded.model.spec() == d.model.spec());
    const auto lp = loaded.model.parameters();
    const auto dp = d.model.parameters();
    for (std::size_t i = 0; i < dp.size(); ++i) CHECK(lp[i]->frozen == dp[i]->frozen);
    for (const auto& s : samples) {
      CHECK(loaded.model.forward(s.ids, s.length, nullptr, nullptr) == d.model.forward(s.ids, s.length, nullptr, nullptr));
    }
    std::filesystem::remove(path);
    std::filesystem::remove(temp_path(n + ".2.ckpt"));
  }
}

TEST_CASE("corrupt containers are rejected") {
  const auto& t = toy();
  const Detector d{t.vocab, Model<float>(desk_spec("gru_frozen", t.vocab.size()), 1), {}};
  const std::string bytes = checkpoint_bytes(d);
  CHECK_THROWS_AS(checkpoint_from_bytes(bytes.substr(0, bytes.size() - 4)), CorruptionError);
  CHECK_THROWS_AS(checkpoint_from_bytes(bytes.substr(0, 10)), CorruptionError);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(checkpoint_from_bytes(bad_magic), CorruptionError);
  std::string bad_version = bytes;
  bad_version[4] = 9;
  CHECK_THROWS_AS(checkpoint_from_bytes(bad_version), FormatError);
  CHECK_THROWS_AS(load_checkpoint(temp_path("missing.ckpt")), DataError);

  Container c;
  c.manifest = {{"kind", "checkpoint"}};
  c.blob = {1.0f, 2.0f};
  auto enc = encode_container(c);
  CHECK(decode_container(enc).blob == c.blob);
  CHECK_THROWS_AS(checkpoint_from_bytes(enc), CorruptionError);
}

TEST_CASE("precomputed embeddings reproduce internal logits") {
  const auto& t = toy();
  for (const std::string n : {"bilstm_frozen", "gru_frozen"}) {
    const Model<float> model(desk_spec(n, t.vocab.size()), 3);
    const auto samples = prepare_samples(t.val, t.vocab, 128);
    const auto table = compute_embeddings(model.encoder(), samples);
    const auto restored = embeddings_from_bytes(embeddings_bytes(table));
    CHECK(embeddings_bytes(restored) == embeddings_bytes(table));

    Model<float> external(make_external_variant(n, table.dim), 3);
    CHECK(external.trainable_params() == model.trainable_params());
    // Same head weights.
    const auto src = const_cast<Model<float>&>(model).head().parameters();
    const auto dst = external.head().parameters();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i]->value = src[i]->value;

    const auto ext_samples = prepare_samples(t.val, restored);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto a = model.forward(samples[i].ids, samples[i].length, nullptr, nullptr);
      const auto b = external.forward_hidden(ext_samples[i].hidden, ext_samples[i].length, nullptr, nullptr);
      CHECK(a == b);
    }
  }
  CHECK_THROWS_AS(make_external_variant("lora_frozen", 32), ConfigError);
  CHECK_THROWS_AS(make_external_variant("full_finetune", 32), ConfigError);
}

TEST_CASE("search") {
  SearchSpace grid = SearchSpace::from_json({{"hidden_size", {4, 8}}, {"dropout", {0.0, 0.2}}});
  CHECK(enumerate_trials(grid, {}).size() == 4);

  const SearchSpace random = SearchSpace::from_json({{"lr", {{"min", 1e-4}, {"max", 1e-2}, {"log", true}}},
                                                     {"hidden_size", {{"min", 2}, {"max", 16}}}});
  const SearchOptions opts{.strategy = SearchStrategy::random, .trials = 5, .seed = 3};
  const auto r1 = enumerate_trials(random, opts);
  CHECK(r1.size() == 5);
  CHECK(r1 == enumerate_trials(random, opts));
  for (const auto& trial : r1) {
    CHECK(trial.at("lr") >= 1e-4);
    CHECK(trial.at("lr") <= 1e-2);
    CHECK(trial.at("hidden_size") == std::round(trial.at("hidden_size")));
  }
  CHECK_THROWS_AS(enumerate_trials(random, {.strategy = SearchStrategy::random, .trials = 0}), ConfigError);
  CHECK_THROWS_AS(SearchSpace::from_json({{"colour", {1}}}), ConfigError);

  Trial a{.config = {{"x", 1}}, .val_accuracy = 0.9, .trainable_params = 10};
  Trial b{.config = {{"x", 2}}, .val_accuracy = 0.9, .trainable_params = 5};
  Trial c{.config = {{"x", 0}}, .val_accuracy = 0.9, .trainable_params = 5};
  CHECK(trial_better(b, a));
  CHECK(trial_better(c, b));
  CHECK_FALSE(trial_better(b, c));

  // A learning rate of zero cannot move off the initial accuracy.
  const auto& t = toy();
  const auto train_s = prepare_samples(t.train, t.vocab, 128);
  const auto val_s = prepare_samples(t.val, t.vocab, 128);
  const auto space = SearchSpace::from_json({{"lr", {0.0, 0.01}}});
  auto make = [&](const VariantOverrides& o) { return desk_spec("bilstm_frozen", t.vocab.size(), o); };
  const auto result = hyperparam_search(make, train_s, val_s, {.epochs = 3}, space, {});
  REQUIRE(result.log.size() == 2);
  CHECK(result.best().config.at("lr") == 0.01);
  CHECK(result.best().val_accuracy >= 0.95);
  CHECK(search_json(result) == search_json(hyperparam_search(make, train_s, val_s, {.epochs = 3}, space, {})));
}
