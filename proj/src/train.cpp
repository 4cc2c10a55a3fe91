// SPDX-License-Identifier: Apache-2.0
#include "mgtd/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mgtd/errors.hpp"
#include "mgtd/ops.hpp"
#include "mgtd/optim.hpp"
#include "mgtd/parallel.hpp"
#include "mgtd/rng.hpp"

namespace mgtd {

namespace {

bool is_base_encoder_param(const std::string& name) {
  return name.starts_with("encoder.") && !name.ends_with(".lora_a") && !name.ends_with(".lora_b");
}

// Encoder outputs are fixed when nothing in the encoder trains, so they are
// computed once and reused by every epoch.
std::vector<Tensor<float>> cached_hidden(const Model<float>& model, std::span<const Sample> samples) {
  std::vector<Tensor<float>> out(samples.size());
  if (!model.has_encoder() || model.encoder().any_trainable()) return out;
  parallel_for(samples.size(), [&](std::size_t i) {
    out[i] = model.encoder().forward(samples[i].ids, samples[i].length, nullptr);
  });
  return out;
}

Tensor<float> run_forward(const Model<float>& model, const Sample& s, const Tensor<float>& precomputed,
                          Model<float>::Cache* cache, Rng* dropout_rng) {
  if (!model.has_encoder()) return model.forward_hidden(s.hidden, s.length, cache, dropout_rng);
  if (!precomputed.empty()) return model.forward_hidden(precomputed, s.length, cache, dropout_rng);
  return model.forward(s.ids, s.length, cache, dropout_rng);
}

Prediction to_prediction(const Tensor<float>& logits) {
  const double a = logits[0];
  const double b = logits[1];
  const double m = std::max(a, b);
  const double ea = std::exp(a - m);
  const double eb = std::exp(b - m);
  Prediction p;
  p.prob_human = ea / (ea + eb);
  p.prob_machine = eb / (ea + eb);
  p.label = b > a ? kMachine : kHuman;
  return p;
}

void check_labels(std::span<const Sample> samples) {
  if (samples.empty()) throw DataError("training set is empty");
  bool seen[2] = {false, false};
  for (const auto& s : samples) seen[s.label] = true;
  if (!seen[0] || !seen[1]) throw DataError("training set contains a single class; both labels are required");
}

Evaluation evaluate_with(const Model<float>& model, std::span<const Sample> samples,
                         const std::vector<Tensor<float>>& precomputed) {
  if (samples.empty()) throw DataError("cannot evaluate an empty sample list");
  std::vector<Tensor<float>> logits(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    logits[i] = run_forward(model, samples[i], precomputed.empty() ? Tensor<float>() : precomputed[i], nullptr,
                            nullptr);
  });
  Evaluation e;
  std::vector<int> preds, labels;
  double loss = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Prediction p = to_prediction(logits[i]);
    const double prob = samples[i].label == kMachine ? p.prob_machine : p.prob_human;
    loss += -std::log(std::max(prob, 1e-300));
    preds.push_back(p.label);
    labels.push_back(samples[i].label);
    e.predictions.push_back(p);
  }
  e.loss = loss / static_cast<double>(samples.size());
  e.confusion = confusion(preds, labels);
  e.metrics = metrics(e.confusion);
  return e;
}

}  // namespace

std::vector<Sample> prepare_samples(std::span<const Record> records, const Vocab& vocab, std::size_t max_len) {
  std::vector<Sample> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    TokenSeq seq = encode(r.text, vocab, max_len);
    Sample s;
    s.id = r.id;
    s.length = seq.ids.size();
    s.ids = std::move(seq.ids);
    s.label = r.label;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sample> prepare_samples(std::span<const Record> records, const EmbeddingTable& table) {
  std::vector<Sample> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    const EmbeddingEntry& e = table.at(r.id);
    Sample s;
    s.id = r.id;
    s.length = e.real_length();
    if (s.length == 0) throw DataError("embedding for '" + r.id + "' has no real rows");
    s.hidden = Tensor<float>::matrix(s.length, table.dim);
    std::copy_n(e.hidden.data(), s.length * table.dim, s.hidden.data());
    s.label = r.label;
    out.push_back(std::move(s));
  }
  return out;
}

EmbeddingTable compute_embeddings(const Encoder<float>& encoder, std::span<const Sample> samples) {
  std::vector<Tensor<float>> hidden(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    hidden[i] = encoder.forward(samples[i].ids, samples[i].length, nullptr);
  });
  EmbeddingTable table;
  table.dim = encoder.config().model_dim;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    EmbeddingEntry e{std::move(hidden[i]), std::vector<std::uint8_t>(samples[i].length, 1)};
    if (!table.entries.emplace(samples[i].id, std::move(e)).second) {
      throw DataError("duplicate record id '" + samples[i].id + "'");
    }
  }
  return table;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (head_lr < 0.0 || encoder_lr < 0.0) throw ConfigError("learning rates must be non-negative");
  if (max_len < 2) throw ConfigError("max_len must be at least 2");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},         {"batch_size", c.batch_size}, {"head_lr", c.head_lr},
          {"encoder_lr", c.encoder_lr}, {"seed", c.seed},             {"patience", c.patience},
          {"max_len", c.max_len}};
}

nlohmann::json history_json(const TrainResult& result) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : result.history) {
    epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss},
                      {"val", metrics_json(e.val)}});
  }
  return {{"epochs", epochs}, {"best_epoch", result.best_epoch}, {"best_val_accuracy", result.best_val_accuracy}};
}

TrainResult train(Model<float>& model, std::span<const Sample> train_set, std::span<const Sample> val_set,
                  const TrainConfig& config) {
  config.validate();
  check_labels(train_set);

  ParamRefs<float> params = model.parameters();
  std::vector<double> lr;
  for (const auto* p : params) lr.push_back(is_base_encoder_param(p->name) ? config.encoder_lr : config.head_lr);
  AdamConfig adam;
  adam.lr = 1.0;
  Adam<float> optimizer(params, adam, lr);

  const auto train_hidden = cached_hidden(model, train_set);
  const auto val_hidden = cached_hidden(model, val_set);
  const bool frozen_encoder = !train_hidden.empty() && !train_hidden.front().empty();

  Rng order_rng(derive_seed(config.seed, "train.order"));
  Rng dropout_rng(derive_seed(config.seed, "train.dropout"));

  std::vector<Tensor<float>> best(params.size());
  auto snapshot = [&] {
    for (std::size_t i = 0; i < params.size(); ++i) best[i] = params[i]->value;
  };
  snapshot();

  TrainResult result;
  bool have_best = false;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    order_rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t b = std::min(config.batch_size, order.size() - start);
      std::vector<std::uint64_t> seeds(b);
      for (auto& s : seeds) s = dropout_rng.next();
      std::vector<Model<float>::Cache> caches(b);
      std::vector<Tensor<float>> logits(b);
      parallel_for(b, [&](std::size_t i) {
        const std::size_t idx = order[start + i];
        Rng rng(seeds[i]);
        logits[i] = run_forward(model, train_set[idx], frozen_encoder ? train_hidden[idx] : Tensor<float>(),
                                &caches[i], &rng);
      });
      optimizer.zero_grad();
      for (std::size_t i = 0; i < b; ++i) {
        const int label = train_set[order[start + i]].label;
        const auto ce = softmax_ce(logits[i], std::span<const int>(&label, 1), static_cast<double>(b));
        loss_sum += ce.row_losses[0];
        model.backward(ce.dlogits, caches[i]);
      }
      optimizer.step();
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train_set.size());
    if (!val_set.empty()) {
      const Evaluation ev = evaluate_with(model, val_set, frozen_encoder ? val_hidden : std::vector<Tensor<float>>{});
      rec.val_loss = ev.loss;
      rec.val = ev.metrics;
    }
    result.history.push_back(rec);

    if (val_set.empty()) {
      result.best_epoch = epoch;
      snapshot();
      continue;
    }
    if (!have_best || rec.val.accuracy > result.best_val_accuracy) {
      have_best = true;
      result.best_epoch = epoch;
      result.best_val_accuracy = rec.val.accuracy;
      snapshot();
    } else if (config.patience > 0 && epoch - result.best_epoch >= config.patience) {
      break;
    }
  }

  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best[i];
  return result;
}

std::vector<Prediction> predict(const Model<float>& model, std::span<const Sample> samples) {
  std::vector<Prediction> out(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    out[i] = to_prediction(run_forward(model, samples[i], Tensor<float>(), nullptr, nullptr));
  });
  return out;
}

Evaluation evaluate(const Model<float>& model, std::span<const Sample> samples) {
  return evaluate_with(model, samples, {});
}

namespace {

nlohmann::json run_metadata(const TrainConfig& config, const TrainResult& result) {
  return {{"seed", config.seed}, {"train_config", to_json(config)}, {"history", history_json(result)}};
}

}  // namespace

TrainedDetector train_detector(std::span<const Record> train_records, std::span<const Record> val_records,
                               const std::function<VariantSpec(std::size_t)>& spec_for_vocab,
                               const TrainConfig& config, std::size_t max_vocab) {
  config.validate();
  Vocab vocab = Vocab::build(train_records, max_vocab);
  const VariantSpec spec = spec_for_vocab(vocab.size());
  const std::size_t max_len = std::min(config.max_len, spec.encoder.max_positions);
  const auto train_set = prepare_samples(train_records, vocab, max_len);
  const auto val_set = prepare_samples(val_records, vocab, max_len);
  Model<float> model(spec, derive_seed(config.seed, "model"));
  TrainResult result = train(model, train_set, val_set, config);
  nlohmann::json meta = run_metadata(config, result);
  meta["max_len"] = max_len;
  return {Detector{std::move(vocab), std::move(model), std::move(meta)}, std::move(result)};
}

TrainedDetector train_external_detector(std::span<const Record> train_records, std::span<const Record> val_records,
                                        const EmbeddingTable& table, const VariantSpec& spec,
                                        const TrainConfig& config) {
  config.validate();
  if (!spec.external_encoder || spec.input_dim != table.dim) {
    throw ConfigError("variant must read " + std::to_string(table.dim) + "-wide precomputed embeddings");
  }
  const auto train_set = prepare_samples(train_records, table);
  const auto val_set = prepare_samples(val_records, table);
  Model<float> model(spec, derive_seed(config.seed, "model"));
  TrainResult result = train(model, train_set, val_set, config);
  return {Detector{Vocab(), std::move(model), run_metadata(config, result)}, std::move(result)};
}

std::vector<Prediction> predict_texts(const Detector& detector, std::span<const std::string> texts) {
  if (!detector.model.has_encoder()) {
    throw ConfigError("this detector reads precomputed embeddings; raw text cannot be scored");
  }
  std::size_t max_len = detector.model.spec().encoder.max_positions;
  if (detector.metadata.contains("max_len")) max_len = detector.metadata["max_len"].get<std::size_t>();
  std::vector<Sample> samples;
  samples.reserve(texts.size());
  for (const auto& t : texts) {
    TokenSeq seq = encode(t, detector.vocab, max_len);
    Sample s;
    s.length = seq.ids.size();
    s.ids = std::move(seq.ids);
    samples.push_back(std::move(s));
  }
  return predict(detector.model, samples);
}

}  // namespace mgtd
