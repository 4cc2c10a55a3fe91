// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mgtd/train.hpp"
#include "mgtd/variant.hpp"

namespace mgtd {

/// One searchable hyperparameter. Grid search uses `values`; random search
/// draws from `values` when given, otherwise from [min, max] (log-uniform
/// when `log_scale`). Integer-valued axes are rounded to the nearest integer.
struct SearchAxis {
  std::string name;
  std::vector<double> values;
  std::optional<double> min;
  std::optional<double> max;
  bool log_scale = false;
};

/// Recognised axes: hidden_size, num_layers, dropout, lr, encoder_lr,
/// lora_rank, batch_size, epochs, patience.
struct SearchSpace {
  std::vector<SearchAxis> axes;

  /// {"hidden_size": [4, 8], "lr": {"min": 1e-4, "max": 1e-2, "log": true}}
  static SearchSpace from_json(const nlohmann::json& j);
};

enum class SearchStrategy { grid, random };

struct SearchOptions {
  SearchStrategy strategy = SearchStrategy::grid;
  std::size_t trials = 0;  // random only
  std::uint64_t seed = 42;  // random sampling stream
};

using TrialConfig = std::map<std::string, double>;

/// The configurations a search would evaluate, in canonical (sorted) order
/// for grids and in draw order for random search.
std::vector<TrialConfig> enumerate_trials(const SearchSpace& space, const SearchOptions& options);

void apply_trial(const TrialConfig& trial, VariantOverrides& overrides, TrainConfig& config);

struct Trial {
  TrialConfig config;
  double val_accuracy = 0.0;
  std::size_t trainable_params = 0;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
};

struct SearchResult {
  std::vector<Trial> log;     // sorted by config
  std::vector<Trial> ranked;  // best first
  const Trial& best() const { return ranked.front(); }
};

/// Ranking: higher val accuracy, then fewer trainable parameters, then the
/// lexicographically smaller config.
bool trial_better(const Trial& a, const Trial& b);

/// Trains one model per configuration. Trials run in parallel; every trial
/// uses the same training seed, so trials differ only by configuration.
SearchResult hyperparam_search(const std::function<VariantSpec(const VariantOverrides&)>& make_spec,
                               std::span<const Sample> train_set, std::span<const Sample> val_set,
                               const TrainConfig& base, const SearchSpace& space, const SearchOptions& options);

nlohmann::json search_json(const SearchResult& result);

}  // namespace mgtd
