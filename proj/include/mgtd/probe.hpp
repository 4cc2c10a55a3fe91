// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mgtd/corpus.hpp"
#include "mgtd/encoder.hpp"
#include "mgtd/heads.hpp"
#include "mgtd/linear.hpp"

// Next-token language models trained on one class of text, and the
// distribution of per-sentence losses they assign to each class.

namespace mgtd {

enum class LmKind { lstm_lm, transformer_lm };

std::string_view lm_kind_name(LmKind kind);
LmKind parse_lm_kind(std::string_view name);

struct LmConfig {
  LmKind kind = LmKind::lstm_lm;
  std::size_t model_dim = 32;
  std::size_t layers = 1;
  std::size_t num_heads = 4;  // transformer only
  std::size_t vocab_size = 0;
  std::size_t max_len = 64;  // tokens per sentence; longer sentences are truncated
  std::uint64_t seed = 42;
  std::size_t epochs = 16;
  std::size_t batch_size = 16;
  double lr = 1e-2;

  void validate() const;
};

/// Unidirectional LSTM or causally masked transformer over word tokens, with
/// a linear projection to vocabulary logits.
template <typename T>
class LanguageModel {
 public:
  struct Cache {
    std::vector<std::int32_t> inputs;
    std::vector<typename RecurrentLayer<T>::Cache> recurrent;
    typename Encoder<T>::Cache encoder;
    typename Linear<T>::Cache output;
  };

  LanguageModel(const LmConfig& config, std::uint64_t seed);

  const LmConfig& config() const noexcept { return config_; }

  /// (n - 1) x V logits; row t predicts ids[t + 1]. Needs n >= 2.
  Tensor<T> forward(std::span<const std::int32_t> ids, Cache* cache) const;
  void backward(const Tensor<T>& dlogits, const Cache& cache);

  ParamRefs<T> parameters();
  std::vector<const Parameter<T>*> parameters() const;
  Linear<T>& output() { return output_; }

 private:
  LmConfig config_;
  Parameter<T> embedding_;  // lstm only
  std::vector<RecurrentLayer<T>> recurrent_;
  std::optional<Encoder<T>> encoder_;
  Linear<T> output_;
};

/// Word-token ids without [CLS]/[SEP], truncated to max_len.
std::vector<std::int32_t> lm_tokens(std::string_view text, const Vocab& vocab, std::size_t max_len);

/// Mean next-token cross-entropy of one sentence, computed in double.
template <typename T>
double sentence_loss(const LanguageModel<T>& lm, std::span<const std::int32_t> ids);

/// Per-sentence losses in record order. Sentences with fewer than two tokens
/// are skipped and counted in `skipped`.
std::vector<double> sentence_losses(const LanguageModel<float>& lm, std::span<const Record> records,
                                    const Vocab& vocab, std::size_t* skipped = nullptr);

struct LmHistory {
  double initial_loss = 0.0;
  std::vector<double> epoch_loss;  // mean sentence loss over the training set after each epoch
  double final_loss() const { return epoch_loss.empty() ? initial_loss : epoch_loss.back(); }
};

/// Teacher-forced training with Adam. All records must share one label.
LanguageModel<float> train_lm(std::span<const Record> records, const Vocab& vocab, LmConfig config,
                              LmHistory* history = nullptr);

struct Histogram {
  std::vector<double> edges;  // bins + 1
  std::vector<std::size_t> counts;
};

struct LossStats {
  std::vector<double> losses;
  double mean = 0.0;
  double variance = 0.0;  // population
  Histogram histogram;
};

/// Equal-width bins over [min, max]; the maximum falls in the last bin. A
/// zero-width range puts everything in the first bin.
LossStats loss_distribution(std::span<const double> losses, std::size_t bins = 30);

struct ProbePanel {
  int train_class = kHuman;
  int eval_class = kHuman;
  std::size_t skipped = 0;
  LossStats stats;
};

struct ProbeRun {
  LmKind kind = LmKind::lstm_lm;
  std::array<LmHistory, 2> history;  // LM trained on [human, machine]
  std::vector<ProbePanel> panels;    // (train, eval) in order hh, hm, mh, mm
};

struct ProbeConfig {
  LmConfig lm;
  std::size_t bins = 30;
  std::vector<LmKind> kinds{LmKind::lstm_lm, LmKind::transformer_lm};
  std::size_t max_vocab = 5000;
};

struct ProbeReport {
  std::size_t vocab_size = 0;
  std::vector<ProbeRun> runs;
};

/// Trains one LM per class on the training subsets (shared vocabulary and
/// seed) and scores both validation subsets with each.
ProbeReport probe_report(std::span<const Record> train_human, std::span<const Record> train_machine,
                         std::span<const Record> val_human, std::span<const Record> val_machine,
                         const ProbeConfig& config);

nlohmann::json probe_json(const ProbeReport& report);
std::string render_probe_table(const ProbeReport& report);
/// "loss\n" followed by one value per sentence.
std::string panel_csv(const ProbePanel& panel);

}  // namespace mgtd
