// SPDX-License-Identifier: Apache-2.0
#include "mgtd/probe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "mgtd/errors.hpp"
#include "mgtd/ops.hpp"
#include "mgtd/optim.hpp"
#include "mgtd/parallel.hpp"
#include "mgtd/rng.hpp"

namespace mgtd {

std::string_view lm_kind_name(LmKind kind) { return kind == LmKind::lstm_lm ? "lstm_lm" : "transformer_lm"; }

LmKind parse_lm_kind(std::string_view name) {
  if (name == "lstm_lm" || name == "lstm") return LmKind::lstm_lm;
  if (name == "transformer_lm" || name == "transformer") return LmKind::transformer_lm;
  throw ConfigError("unknown LM kind '" + std::string(name) + "' (valid: lstm_lm, transformer_lm)");
}

void LmConfig::validate() const {
  if (model_dim == 0 || layers == 0) throw ConfigError("LM dimensions must be positive");
  if (vocab_size <= Vocab::kNumSpecial) throw ConfigError("LM vocabulary has no ordinary tokens");
  if (max_len < 2) throw ConfigError("LM max_len must be at least 2");
  if (batch_size == 0) throw ConfigError("LM batch_size must be at least 1");
  if (lr < 0.0) throw ConfigError("LM learning rate must be non-negative");
  if (kind == LmKind::transformer_lm && model_dim % num_heads != 0) {
    throw ConfigError("LM model_dim must be divisible by num_heads");
  }
}

// --- LanguageModel -------------------------------------------------------------------------

template <typename T>
LanguageModel<T>::LanguageModel(const LmConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  const std::size_t d = config_.model_dim;
  Rng rng(derive_seed(seed, "lm"));
  if (config_.kind == LmKind::lstm_lm) {
    embedding_ = Parameter<T>("lm.embedding", {config_.vocab_size, d});
    init_uniform(embedding_.value, rng, 1.0 / std::sqrt(static_cast<double>(d)));
    for (std::size_t l = 0; l < config_.layers; ++l) {
      recurrent_.emplace_back("lm.lstm" + std::to_string(l), CellKind::lstm, d, d, false);
      recurrent_.back().cell.init(rng);
    }
  } else {
    EncoderConfig ec;
    ec.num_layers = config_.layers;
    ec.model_dim = d;
    ec.num_heads = config_.num_heads;
    ec.ffn_dim = 2 * d;
    ec.vocab_size = config_.vocab_size;
    ec.max_positions = config_.max_len;
    ec.causal = true;
    encoder_.emplace(ec, derive_seed(seed, "lm.encoder"));
  }
  output_ = Linear<T>("lm.output", d, config_.vocab_size);
  output_.init(rng);
}

template <typename T>
Tensor<T> LanguageModel<T>::forward(std::span<const std::int32_t> ids, Cache* cache) const {
  if (ids.size() < 2) throw DataError("language model input needs at least two tokens");
  const auto inputs = ids.first(ids.size() - 1);
  const std::size_t n = inputs.size();
  Tensor<T> h;
  if (encoder_) {
    h = encoder_->forward(inputs, n, cache ? &cache->encoder : nullptr);
  } else {
    const std::size_t d = config_.model_dim;
    h = Tensor<T>::matrix(n, d);
    for (std::size_t t = 0; t < n; ++t) {
      const auto id = static_cast<std::size_t>(inputs[t]);
      if (inputs[t] < 0 || id >= config_.vocab_size) throw DataError("token id out of range for the LM vocabulary");
      std::copy_n(embedding_.value.data() + id * d, d, h.row(t).data());
    }
    if (cache) cache->recurrent.resize(recurrent_.size());
    for (std::size_t l = 0; l < recurrent_.size(); ++l) {
      h = recurrent_[l].forward(h, cache ? &cache->recurrent[l] : nullptr);
    }
  }
  if (cache) cache->inputs.assign(inputs.begin(), inputs.end());
  return output_.forward(h, cache ? &cache->output : nullptr);
}

template <typename T>
void LanguageModel<T>::backward(const Tensor<T>& dlogits, const Cache& cache) {
  Tensor<T> dh = output_.backward(dlogits, cache.output, true);
  if (encoder_) {
    encoder_->backward(dh, cache.encoder);
    return;
  }
  for (std::size_t l = recurrent_.size(); l-- > 0;) dh = recurrent_[l].backward(dh, cache.recurrent[l], true);
  const std::size_t d = config_.model_dim;
  for (std::size_t t = 0; t < cache.inputs.size(); ++t) {
    T* g = embedding_.grad.data() + static_cast<std::size_t>(cache.inputs[t]) * d;
    for (std::size_t j = 0; j < d; ++j) g[j] += dh(t, j);
  }
}

template <typename T>
ParamRefs<T> LanguageModel<T>::parameters() {
  ParamRefs<T> out;
  if (encoder_) {
    out = encoder_->parameters();
  } else {
    out.push_back(&embedding_);
    for (auto& r : recurrent_) r.cell.collect(out);
  }
  output_.collect(out);
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> LanguageModel<T>::parameters() const {
  std::vector<const Parameter<T>*> out;
  if (encoder_) {
    out = encoder_->parameters();
  } else {
    out.push_back(&embedding_);
    for (const auto& r : recurrent_) r.cell.collect(out);
  }
  output_.collect(out);
  return out;
}

template class LanguageModel<float>;
template class LanguageModel<double>;

// --- losses ------------------------------------------------------------------------------------

std::vector<std::int32_t> lm_tokens(std::string_view text, const Vocab& vocab, std::size_t max_len) {
  const auto tokens = tokenize(text);
  auto ids = vocab.lookup(tokens);
  if (ids.size() > max_len) ids.resize(max_len);
  return ids;
}

template <typename T>
double sentence_loss(const LanguageModel<T>& lm, std::span<const std::int32_t> ids) {
  const Tensor<T> logits = lm.forward(ids, nullptr);
  const std::size_t v = logits.cols();
  double total = 0.0;
  for (std::size_t t = 0; t < logits.rows(); ++t) {
    const auto row = logits.row(t);
    double m = row[0];
    for (std::size_t j = 1; j < v; ++j) m = std::max(m, static_cast<double>(row[j]));
    double sum = 0.0;
    for (std::size_t j = 0; j < v; ++j) sum += std::exp(static_cast<double>(row[j]) - m);
    total += m + std::log(sum) - static_cast<double>(row[static_cast<std::size_t>(ids[t + 1])]);
  }
  return total / static_cast<double>(logits.rows());
}

template double sentence_loss(const LanguageModel<float>&, std::span<const std::int32_t>);
template double sentence_loss(const LanguageModel<double>&, std::span<const std::int32_t>);

namespace {

std::vector<std::vector<std::int32_t>> tokenize_all(std::span<const Record> records, const Vocab& vocab,
                                                    std::size_t max_len) {
  std::vector<std::vector<std::int32_t>> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(lm_tokens(r.text, vocab, max_len));
  return out;
}

std::vector<double> losses_of(const LanguageModel<float>& lm, const std::vector<std::vector<std::int32_t>>& seqs) {
  std::vector<double> out(seqs.size(), -1.0);
  parallel_for(seqs.size(), [&](std::size_t i) {
    if (seqs[i].size() >= 2) out[i] = sentence_loss(lm, seqs[i]);
  });
  std::erase_if(out, [](double x) { return x < 0.0; });
  return out;
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

}  // namespace

std::vector<double> sentence_losses(const LanguageModel<float>& lm, std::span<const Record> records,
                                    const Vocab& vocab, std::size_t* skipped) {
  const auto seqs = tokenize_all(records, vocab, lm.config().max_len);
  auto out = losses_of(lm, seqs);
  if (skipped) *skipped = seqs.size() - out.size();
  return out;
}

LanguageModel<float> train_lm(std::span<const Record> records, const Vocab& vocab, LmConfig config,
                              LmHistory* history) {
  if (records.empty()) throw DataError("language model training set is empty");
  for (const auto& r : records) {
    if (r.label != records.front().label) throw DataError("language model training records mix human and machine labels");
  }
  config.vocab_size = vocab.size();
  LanguageModel<float> lm(config, config.seed);

  auto seqs = tokenize_all(records, vocab, config.max_len);
  std::erase_if(seqs, [](const auto& s) { return s.size() < 2; });
  if (seqs.empty()) throw DataError("no training sentence has two or more tokens");

  ParamRefs<float> params = lm.parameters();
  AdamConfig adam;
  adam.lr = config.lr;
  Adam<float> optimizer(params, adam);
  Rng order_rng(derive_seed(config.seed, "lm.order"));
  std::vector<std::size_t> order(seqs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  if (history) {
    history->epoch_loss.clear();
    history->initial_loss = mean_of(losses_of(lm, seqs));
  }
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    order_rng.shuffle(order.begin(), order.end());
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t b = std::min(config.batch_size, order.size() - start);
      std::vector<LanguageModel<float>::Cache> caches(b);
      std::vector<Tensor<float>> logits(b);
      parallel_for(b, [&](std::size_t i) { logits[i] = lm.forward(seqs[order[start + i]], &caches[i]); });
      optimizer.zero_grad();
      for (std::size_t i = 0; i < b; ++i) {
        const auto& seq = seqs[order[start + i]];
        std::vector<int> targets(seq.begin() + 1, seq.end());
        const double norm = static_cast<double>(targets.size() * b);
        const auto ce = softmax_ce(logits[i], std::span<const int>(targets), norm);
        lm.backward(ce.dlogits, caches[i]);
      }
      optimizer.step();
    }
    if (history) history->epoch_loss.push_back(mean_of(losses_of(lm, seqs)));
  }
  return lm;
}

// --- distributions -------------------------------------------------------------------------------

LossStats loss_distribution(std::span<const double> losses, std::size_t bins) {
  if (losses.empty()) throw DataError("loss distribution of an empty list");
  if (bins == 0) throw ConfigError("histogram needs at least one bin");
  LossStats s;
  s.losses.assign(losses.begin(), losses.end());
  const double n = static_cast<double>(losses.size());
  s.mean = std::accumulate(losses.begin(), losses.end(), 0.0) / n;
  double sq = 0.0;
  for (double x : losses) sq += (x - s.mean) * (x - s.mean);
  s.variance = sq / n;

  const auto [lo_it, hi_it] = std::minmax_element(losses.begin(), losses.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  const double width = (hi - lo) / static_cast<double>(bins);
  s.histogram.counts.assign(bins, 0);
  for (std::size_t i = 0; i <= bins; ++i) s.histogram.edges.push_back(lo + width * static_cast<double>(i));
  s.histogram.edges.back() = hi;
  for (double x : losses) {
    std::size_t idx = 0;
    if (width > 0.0) idx = std::min(bins - 1, static_cast<std::size_t>((x - lo) / width));
    ++s.histogram.counts[idx];
  }
  return s;
}

// --- 2x2 report ------------------------------------------------------------------------------------

ProbeReport probe_report(std::span<const Record> train_human, std::span<const Record> train_machine,
                         std::span<const Record> val_human, std::span<const Record> val_machine,
                         const ProbeConfig& config) {
  if (train_human.empty() || train_machine.empty() || val_human.empty() || val_machine.empty()) {
    throw DataError("probe needs non-empty human and machine train and validation subsets");
  }
  std::vector<Record> all(train_human.begin(), train_human.end());
  all.insert(all.end(), train_machine.begin(), train_machine.end());
  ProbeReport report;
  const Vocab vocab = Vocab::build(all, config.max_vocab);
  report.vocab_size = vocab.size();

  const std::span<const Record> train_sets[2] = {train_human, train_machine};
  const std::span<const Record> val_sets[2] = {val_human, val_machine};
  for (LmKind kind : config.kinds) {
    LmConfig lc = config.lm;
    lc.kind = kind;
    ProbeRun run;
    run.kind = kind;
    std::vector<std::optional<LanguageModel<float>>> lms(2);
    parallel_for(2, [&](std::size_t c) { lms[c].emplace(train_lm(train_sets[c], vocab, lc, &run.history[c])); });
    for (int tc = 0; tc < 2; ++tc) {
      for (int ec = 0; ec < 2; ++ec) {
        ProbePanel panel;
        panel.train_class = tc;
        panel.eval_class = ec;
        const auto losses = sentence_losses(*lms[static_cast<std::size_t>(tc)], val_sets[ec], vocab, &panel.skipped);
        panel.stats = loss_distribution(losses, config.bins);
        run.panels.push_back(std::move(panel));
      }
    }
    report.runs.push_back(std::move(run));
  }
  return report;
}

namespace {

const char* class_name(int c) { return c == kHuman ? "human" : "machine"; }

}  // namespace

nlohmann::json probe_json(const ProbeReport& report) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& run : report.runs) {
    nlohmann::json panels = nlohmann::json::array();
    for (const auto& p : run.panels) {
      panels.push_back({{"train_class", class_name(p.train_class)},
                        {"eval_class", class_name(p.eval_class)},
                        {"n", p.stats.losses.size()},
                        {"skipped", p.skipped},
                        {"mean", p.stats.mean},
                        {"variance", p.stats.variance},
                        {"hist", {{"edges", p.stats.histogram.edges}, {"counts", p.stats.histogram.counts}}}});
    }
    nlohmann::json hist = nlohmann::json::object();
    for (int c = 0; c < 2; ++c) {
      hist[class_name(c)] = {{"initial_loss", run.history[static_cast<std::size_t>(c)].initial_loss},
                             {"epoch_loss", run.history[static_cast<std::size_t>(c)].epoch_loss}};
    }
    runs.push_back({{"kind", lm_kind_name(run.kind)}, {"panels", panels}, {"training", hist}});
  }
  return {{"vocab_size", report.vocab_size}, {"runs", runs}};
}

std::string render_probe_table(const ProbeReport& report) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-15s %-8s %-8s %6s %10s %10s\n", "LM", "trained", "scored", "n", "mean", "variance");
  out += buf;
  for (const auto& run : report.runs) {
    for (const auto& p : run.panels) {
      std::snprintf(buf, sizeof buf, "%-15s %-8s %-8s %6zu %10.4f %10.4f\n", std::string(lm_kind_name(run.kind)).c_str(),
                    class_name(p.train_class), class_name(p.eval_class), p.stats.losses.size(), p.stats.mean,
                    p.stats.variance);
      out += buf;
    }
  }
  return out;
}

std::string panel_csv(const ProbePanel& panel) {
  std::string out = "loss\n";
  char buf[64];
  for (double x : panel.stats.losses) {
    std::snprintf(buf, sizeof buf, "%.17g\n", x);
    out += buf;
  }
  return out;
}

}  // namespace mgtd
