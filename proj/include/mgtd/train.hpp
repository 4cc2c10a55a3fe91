// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mgtd/checkpoint.hpp"
#include "mgtd/corpus.hpp"
#include "mgtd/eval.hpp"
#include "mgtd/model.hpp"

namespace mgtd {

/// One model input: token ids for the internal encoder, or precomputed
/// hidden states for an external one. Only the real positions are kept.
struct Sample {
  std::string id;
  std::vector<std::int32_t> ids;
  Tensor<float> hidden;
  std::size_t length = 0;
  int label = kHuman;
};

std::vector<Sample> prepare_samples(std::span<const Record> records, const Vocab& vocab, std::size_t max_len);
std::vector<Sample> prepare_samples(std::span<const Record> records, const EmbeddingTable& table);

/// Runs the encoder over every sample. Record ids must be unique.
EmbeddingTable compute_embeddings(const Encoder<float>& encoder, std::span<const Sample> samples);

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  double head_lr = 1e-3;     // head and LoRA adapters
  double encoder_lr = 2e-5;  // unfrozen base encoder weights
  std::uint64_t seed = 42;
  std::size_t patience = 3;  // epochs without a new best val accuracy; 0 disables
  std::size_t max_len = 512;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

nlohmann::json to_json(const TrainConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  Metrics val;  // zeros when there is no validation set
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_accuracy = 0.0;
};

nlohmann::json history_json(const TrainResult& result);

/// Minimizes softmax cross-entropy with Adam. Per-sample forward passes run
/// in parallel; gradients are accumulated in sample order, so results do not
/// depend on the thread count. The parameters of the epoch with the highest
/// validation accuracy (first one on ties) are restored at the end.
TrainResult train(Model<float>& model, std::span<const Sample> train_set, std::span<const Sample> val_set,
                  const TrainConfig& config);

struct Prediction {
  int label = kHuman;
  double prob_machine = 0.5;
  double prob_human = 0.5;
};

std::vector<Prediction> predict(const Model<float>& model, std::span<const Sample> samples);

struct Evaluation {
  double loss = 0.0;
  Confusion confusion;
  Metrics metrics;
  std::vector<Prediction> predictions;
};

/// Requires a non-empty sample list.
Evaluation evaluate(const Model<float>& model, std::span<const Sample> samples);

struct TrainedDetector {
  Detector detector;
  TrainResult result;
};

/// Builds the vocabulary from the training records, constructs the variant
/// and trains it. `spec_for_vocab` maps the vocabulary size to a spec.
TrainedDetector train_detector(std::span<const Record> train_records, std::span<const Record> val_records,
                               const std::function<VariantSpec(std::size_t)>& spec_for_vocab,
                               const TrainConfig& config, std::size_t max_vocab);

/// Same, but reading hidden states from a precomputed table.
TrainedDetector train_external_detector(std::span<const Record> train_records, std::span<const Record> val_records,
                                        const EmbeddingTable& table, const VariantSpec& spec,
                                        const TrainConfig& config);

/// Labels raw texts with a detector whose encoder is internal.
std::vector<Prediction> predict_texts(const Detector& detector, std::span<const std::string> texts);

}  // namespace mgtd
