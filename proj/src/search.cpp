// SPDX-License-Identifier: Apache-2.0
#include "mgtd/search.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mgtd/errors.hpp"
#include "mgtd/parallel.hpp"
#include "mgtd/rng.hpp"

namespace mgtd {

namespace {

const std::set<std::string>& axis_names() {
  static const std::set<std::string> names{"hidden_size", "num_layers", "dropout",   "lr",      "encoder_lr",
                                           "lora_rank",   "batch_size", "epochs",    "patience"};
  return names;
}

bool integer_axis(const std::string& name) {
  return name != "dropout" && name != "lr" && name != "encoder_lr";
}

std::size_t as_count(const std::string& name, double v) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("axis " + name + " needs a non-negative value");
  return static_cast<std::size_t>(std::llround(v));
}

void validate_axis(const SearchAxis& a, SearchStrategy strategy) {
  if (!axis_names().contains(a.name)) {
    std::string valid;
    for (const auto& n : axis_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw ConfigError("unknown search axis '" + a.name + "' (valid: " + valid + ")");
  }
  if (!a.values.empty()) return;
  if (strategy == SearchStrategy::grid) throw ConfigError("grid axis " + a.name + " needs an explicit value list");
  if (!a.min || !a.max || *a.min > *a.max) throw ConfigError("axis " + a.name + " needs values or min <= max");
  if (a.log_scale && *a.min <= 0.0) throw ConfigError("log-scale axis " + a.name + " needs min > 0");
}

double normalize(const std::string& name, double v) { return integer_axis(name) ? std::round(v) : v; }

}  // namespace

SearchSpace SearchSpace::from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.empty()) throw ConfigError("search space must be a non-empty JSON object");
  SearchSpace space;
  try {
    for (const auto& [name, spec] : j.items()) {
      SearchAxis axis;
      axis.name = name;
      if (spec.is_array()) {
        for (const auto& v : spec) axis.values.push_back(v.get<double>());
        if (axis.values.empty()) throw ConfigError("axis " + name + " has an empty value list");
      } else if (spec.is_object()) {
        axis.min = spec.at("min").get<double>();
        axis.max = spec.at("max").get<double>();
        axis.log_scale = spec.value("log", false);
      } else {
        throw ConfigError("axis " + name + " must be a list or {min, max}");
      }
      validate_axis(axis, SearchStrategy::random);
      space.axes.push_back(std::move(axis));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("search space: ") + e.what());
  }
  return space;
}

std::vector<TrialConfig> enumerate_trials(const SearchSpace& space, const SearchOptions& options) {
  if (space.axes.empty()) throw ConfigError("search space is empty");
  for (const auto& a : space.axes) validate_axis(a, options.strategy);

  std::vector<TrialConfig> out;
  if (options.strategy == SearchStrategy::grid) {
    out.emplace_back();
    for (const auto& a : space.axes) {
      std::vector<TrialConfig> next;
      for (const auto& partial : out) {
        for (double v : a.values) {
          TrialConfig t = partial;
          t[a.name] = normalize(a.name, v);
          next.push_back(std::move(t));
        }
      }
      out = std::move(next);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  if (options.trials == 0) throw ConfigError("random search needs at least one trial");
  Rng rng(derive_seed(options.seed, "search.random"));
  for (std::size_t i = 0; i < options.trials; ++i) {
    TrialConfig t;
    for (const auto& a : space.axes) {
      double v;
      if (!a.values.empty()) {
        v = a.values[rng.below(a.values.size())];
      } else if (a.log_scale) {
        v = std::exp(rng.uniform(std::log(*a.min), std::log(*a.max)));
      } else {
        v = rng.uniform(*a.min, *a.max);
      }
      t[a.name] = normalize(a.name, v);
    }
    out.push_back(std::move(t));
  }
  return out;
}

void apply_trial(const TrialConfig& trial, VariantOverrides& overrides, TrainConfig& config) {
  for (const auto& [name, v] : trial) {
    if (name == "hidden_size") overrides.hidden_size = as_count(name, v);
    else if (name == "num_layers") overrides.num_layers = as_count(name, v);
    else if (name == "dropout") overrides.dropout = v;
    else if (name == "lora_rank") overrides.lora_rank = as_count(name, v);
    else if (name == "lr") config.head_lr = v;
    else if (name == "encoder_lr") config.encoder_lr = v;
    else if (name == "batch_size") config.batch_size = as_count(name, v);
    else if (name == "epochs") config.epochs = as_count(name, v);
    else if (name == "patience") config.patience = as_count(name, v);
    else throw ConfigError("unknown search axis '" + name + "'");
  }
}

bool trial_better(const Trial& a, const Trial& b) {
  if (a.val_accuracy != b.val_accuracy) return a.val_accuracy > b.val_accuracy;
  if (a.trainable_params != b.trainable_params) return a.trainable_params < b.trainable_params;
  return a.config < b.config;
}

SearchResult hyperparam_search(const std::function<VariantSpec(const VariantOverrides&)>& make_spec,
                               std::span<const Sample> train_set, std::span<const Sample> val_set,
                               const TrainConfig& base, const SearchSpace& space, const SearchOptions& options) {
  if (val_set.empty()) throw DataError("hyperparameter search needs a validation set");
  const auto configs = enumerate_trials(space, options);

  // Build every spec up front so configuration errors surface before training.
  std::vector<VariantSpec> specs;
  std::vector<TrainConfig> train_configs;
  for (const auto& c : configs) {
    VariantOverrides o;
    TrainConfig tc = base;
    apply_trial(c, o, tc);
    tc.validate();
    specs.push_back(make_spec(o));
    train_configs.push_back(tc);
  }

  std::vector<Trial> trials(configs.size());
  parallel_for(configs.size(), [&](std::size_t i) {
    Model<float> model(specs[i], derive_seed(train_configs[i].seed, "model"));
    const TrainResult r = train(model, train_set, val_set, train_configs[i]);
    trials[i] = {configs[i], r.best_val_accuracy, model.trainable_params(), r.best_epoch, r.history.size()};
  });

  SearchResult result;
  result.log = trials;
  std::sort(result.log.begin(), result.log.end(), [](const Trial& a, const Trial& b) { return a.config < b.config; });
  result.ranked = trials;
  std::sort(result.ranked.begin(), result.ranked.end(), trial_better);
  return result;
}

nlohmann::json search_json(const SearchResult& result) {
  auto trial_json = [](const Trial& t) {
    return nlohmann::json{{"config", t.config},
                          {"val_accuracy", t.val_accuracy},
                          {"trainable_params", t.trainable_params},
                          {"best_epoch", t.best_epoch},
                          {"epochs_run", t.epochs_run}};
  };
  nlohmann::json log = nlohmann::json::array();
  for (const auto& t : result.log) log.push_back(trial_json(t));
  nlohmann::json ranked = nlohmann::json::array();
  for (const auto& t : result.ranked) ranked.push_back(trial_json(t));
  return {{"trials", log}, {"ranking", ranked}, {"best", trial_json(result.best())}};
}

}  // namespace mgtd
