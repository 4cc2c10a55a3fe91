// SPDX-License-Identifier: Apache-2.0
#include "mgtd/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>

#include "mgtd/checkpoint.hpp"
#include "mgtd/container.hpp"
#include "mgtd/corpus.hpp"
#include "mgtd/errors.hpp"
#include "mgtd/eval.hpp"
#include "mgtd/gradcheck_suite.hpp"
#include "mgtd/probe.hpp"
#include "mgtd/rng.hpp"
#include "mgtd/search.hpp"
#include "mgtd/synthetic.hpp"
#include "mgtd/train.hpp"
#include "mgtd/variant.hpp"

namespace mgtd::cli {

namespace {

namespace fs = std::filesystem;

struct Common {
  std::optional<std::uint64_t> seed;
  std::string format = "table";

  std::uint64_t resolved_seed() const {
    if (seed) return *seed;
    if (const char* env = std::getenv("MGT_SEED"); env && *env) {
      try {
        std::size_t used = 0;
        const auto v = std::stoull(env, &used);
        if (used == std::string(env).size()) return v;
      } catch (const std::exception&) {
      }
      throw ConfigError(std::string("MGT_SEED is not an unsigned integer: '") + env + "'");
    }
    return kDefaultSeed;
  }
  bool json() const { return format == "json"; }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Root seed (default: $MGT_SEED, else 42)");
  cmd->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"table", "json"}));
}

void add_fields(CLI::App* cmd, FieldMap& f) {
  cmd->add_option("--text-field", f.text, "JSON field holding the text");
  cmd->add_option("--label-field", f.label, "JSON field holding the label");
  cmd->add_option("--model-field", f.generator, "JSON field holding the generator name");
  cmd->add_option("--source-field", f.domain, "JSON field holding the source domain");
  cmd->add_option("--id-field", f.id, "JSON field holding the record id");
  cmd->add_flag("--flip-labels", f.flip_labels, "Input uses 1 = human, 0 = machine");
}

struct ModelFlags {
  std::string variant = "bilstm_frozen";
  std::string preset = "desk";
  std::optional<std::size_t> hidden_size, num_layers, lora_rank, max_positions, attention_window;
  std::optional<double> dropout;

  VariantOverrides overrides() const {
    VariantOverrides o;
    o.hidden_size = hidden_size;
    o.num_layers = num_layers;
    o.lora_rank = lora_rank;
    o.max_positions = max_positions;
    o.attention_window = attention_window;
    o.dropout = dropout;
    return o;
  }
};

void add_model_flags(CLI::App* cmd, ModelFlags& m, const std::string& default_preset) {
  m.preset = default_preset;
  cmd->add_option("--variant", m.variant, "Detector variant")->check(CLI::IsMember(variant_names()));
  cmd->add_option("--preset", m.preset, "Encoder preset")->check(CLI::IsMember({"base", "desk"}));
  cmd->add_option("--hidden-size", m.hidden_size, "Recurrent head hidden size");
  cmd->add_option("--num-layers", m.num_layers, "Recurrent head layers");
  cmd->add_option("--dropout", m.dropout, "Head dropout");
  cmd->add_option("--lora-rank", m.lora_rank, "Adapter rank (alpha follows)");
  cmd->add_option("--max-positions", m.max_positions, "Encoder position table size");
  cmd->add_option("--attention-window", m.attention_window, "Odd attention window (0 = full)");
}

void add_train_flags(CLI::App* cmd, TrainConfig& t) {
  cmd->add_option("--epochs", t.epochs, "Training epochs")->capture_default_str();
  cmd->add_option("--batch-size", t.batch_size, "Mini-batch size")->capture_default_str();
  cmd->add_option("--lr", t.head_lr, "Learning rate for the head and adapters")->capture_default_str();
  cmd->add_option("--encoder-lr", t.encoder_lr, "Learning rate for unfrozen encoder weights")->capture_default_str();
  cmd->add_option("--patience", t.patience, "Early-stopping patience in epochs (0 = off)")->capture_default_str();
  cmd->add_option("--max-len", t.max_len, "Maximum tokens per text")->capture_default_str();
}

struct DataFlags {
  std::string train;
  std::string val;
  double val_fraction = 0.2;
  std::string embeddings;
  std::size_t max_vocab = 20000;
};

void add_data_flags(CLI::App* cmd, DataFlags& d) {
  cmd->add_option("--train", d.train, "Training JSONL")->required();
  cmd->add_option("--val", d.val, "Validation JSONL (default: hold out --val-fraction of --train)");
  cmd->add_option("--val-fraction", d.val_fraction, "Held-out fraction when --val is absent")
      ->check(CLI::Range(0.0, 0.9))
      ->capture_default_str();
  cmd->add_option("--embeddings", d.embeddings, "Precomputed embedding table; bypasses the encoder");
  cmd->add_option("--max-vocab", d.max_vocab, "Vocabulary size including specials")->capture_default_str();
}

void write_text(const std::string& path, const std::string& text) { write_file(path, text); }

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

std::pair<std::vector<Record>, std::vector<Record>> load_train_val(const DataFlags& d, const FieldMap& fields,
                                                                   std::uint64_t seed) {
  auto train = load_jsonl(d.train, fields);
  if (!d.val.empty()) return {std::move(train), load_jsonl(d.val, fields)};
  Rng rng(derive_seed(seed, "cli.split"));
  rng.shuffle(train.begin(), train.end());
  return synthetic::split(train, 1.0 - d.val_fraction);
}

std::string epoch_line(const EpochRecord& e, bool has_val) {
  char buf[160];
  if (has_val) {
    std::snprintf(buf, sizeof buf, "epoch %zu  train_loss %.4f  val_loss %.4f  val_acc %.2f%%\n", e.epoch,
                  e.train_loss, e.val_loss, 100.0 * e.val.accuracy);
  } else {
    std::snprintf(buf, sizeof buf, "epoch %zu  train_loss %.4f\n", e.epoch, e.train_loss);
  }
  return buf;
}

// --- subcommands -----------------------------------------------------------------------------

struct StatsCmd {
  Common common;
  FieldMap fields;
  std::string input;
  std::string out_path;

  int run(std::ostream& out) const {
    const auto records = load_jsonl(input, fields);
    const auto stats = corpus_stats(records);
    const std::string text = common.json() ? dump(stats_json(stats)) : render_stats_table(stats);
    out << text;
    if (!out_path.empty()) write_text(out_path, text);
    return kExitOk;
  }
};

struct TrainCmd {
  Common common;
  FieldMap fields;
  DataFlags data;
  ModelFlags model;
  TrainConfig train;
  std::string out_path;
  std::string history_path;

  int run(std::ostream& out) {
    train.seed = common.resolved_seed();
    const auto [train_records, val_records] = load_train_val(data, fields, train.seed);
    TrainedDetector trained = [&] {
      if (!data.embeddings.empty()) {
        const auto table = load_embeddings(data.embeddings);
        const auto spec = make_external_variant(model.variant, table.dim, model.overrides());
        return train_external_detector(train_records, val_records, table, spec, train);
      }
      const Preset preset = parse_preset(model.preset);
      const auto overrides = model.overrides();
      const std::string variant = model.variant;
      return train_detector(
          train_records, val_records,
          [&](std::size_t vocab) { return make_variant(variant, preset, vocab, overrides); }, train, data.max_vocab);
    }();
    const auto& result = trained.result;
    const std::size_t params = trained.detector.model.trainable_params();
    if (common.json()) {
      nlohmann::json j = history_json(result);
      j["variant"] = model.variant;
      j["trainable_params"] = params;
      out << dump(j);
    } else {
      for (const auto& e : result.history) out << epoch_line(e, !val_records.empty());
      out << "variant " << model.variant << "  trainable params " << format_params(params) << "\n";
      if (!val_records.empty()) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "best epoch %zu  val_acc %.2f%%\n", result.best_epoch,
                      100.0 * result.best_val_accuracy);
        out << buf;
      }
    }
    if (!out_path.empty()) save_checkpoint(trained.detector, out_path);
    if (!history_path.empty()) write_text(history_path, dump(history_json(result)));
    return kExitOk;
  }
};

struct SearchCmd {
  Common common;
  FieldMap fields;
  DataFlags data;
  ModelFlags model;
  TrainConfig train;
  std::string space_path;
  std::string strategy = "grid";
  std::size_t trials = 0;
  std::string out_path;

  int run(std::ostream& out) {
    train.seed = common.resolved_seed();
    const auto space = SearchSpace::from_json(nlohmann::json::parse(read_file(space_path)));
    SearchOptions options;
    options.strategy = strategy == "grid" ? SearchStrategy::grid : SearchStrategy::random;
    options.trials = trials;
    options.seed = train.seed;
    const auto [train_records, val_records] = load_train_val(data, fields, train.seed);
    if (val_records.empty()) throw DataError("search needs validation records");

    std::vector<Sample> train_set, val_set;
    std::function<VariantSpec(const VariantOverrides&)> make_spec;
    std::optional<EmbeddingTable> table;
    const std::string variant = model.variant;
    const VariantOverrides fixed = model.overrides();
    auto merged = [fixed](VariantOverrides o) {
      if (!o.hidden_size) o.hidden_size = fixed.hidden_size;
      if (!o.num_layers) o.num_layers = fixed.num_layers;
      if (!o.dropout) o.dropout = fixed.dropout;
      if (!o.lora_rank) o.lora_rank = fixed.lora_rank;
      o.max_positions = fixed.max_positions;
      o.attention_window = fixed.attention_window;
      return o;
    };
    if (!data.embeddings.empty()) {
      table = load_embeddings(data.embeddings);
      train_set = prepare_samples(train_records, *table);
      val_set = prepare_samples(val_records, *table);
      const std::size_t dim = table->dim;
      make_spec = [=](const VariantOverrides& o) { return make_external_variant(variant, dim, merged(o)); };
    } else {
      const Preset preset = parse_preset(model.preset);
      const Vocab vocab = Vocab::build(train_records, data.max_vocab);
      const std::size_t v = vocab.size();
      const VariantSpec probe_spec = make_variant(variant, preset, v, fixed);
      const std::size_t max_len = std::min(train.max_len, probe_spec.encoder.max_positions);
      train_set = prepare_samples(train_records, vocab, max_len);
      val_set = prepare_samples(val_records, vocab, max_len);
      make_spec = [=](const VariantOverrides& o) { return make_variant(variant, preset, v, merged(o)); };
    }
    const auto result = hyperparam_search(make_spec, train_set, val_set, train, space, options);
    const auto j = search_json(result);
    if (common.json()) {
      out << dump(j);
    } else {
      char buf[64];
      for (std::size_t i = 0; i < result.ranked.size(); ++i) {
        const auto& t = result.ranked[i];
        std::snprintf(buf, sizeof buf, "%3zu  val_acc %6.2f%%  params %-12s ", i + 1, 100.0 * t.val_accuracy,
                      group_thousands(t.trainable_params).c_str());
        out << buf << nlohmann::json(t.config).dump() << "\n";
      }
    }
    if (!out_path.empty()) write_text(out_path, dump(j));
    return kExitOk;
  }
};

struct EvalCmd {
  Common common;
  FieldMap fields;
  std::vector<std::string> checkpoints;
  std::vector<std::string> names;
  std::string input;
  std::string embeddings;
  std::string out_path;

  int run(std::ostream& out, std::ostream& err) const {
    const auto records = load_jsonl(input, fields);
    if (records.empty()) throw DataError(input + " holds no records");
    std::optional<EmbeddingTable> table;
    if (!embeddings.empty()) table = load_embeddings(embeddings);
    std::vector<ReportRow> rows;
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
      const Detector d = load_checkpoint(checkpoints[i]);
      std::vector<Sample> samples;
      if (d.model.has_encoder()) {
        std::size_t max_len = d.model.spec().encoder.max_positions;
        if (d.metadata.contains("max_len")) max_len = d.metadata["max_len"].get<std::size_t>();
        samples = prepare_samples(records, d.vocab, max_len);
      } else {
        if (!table) throw ConfigError(checkpoints[i] + " reads precomputed embeddings; pass --embeddings");
        samples = prepare_samples(records, *table);
      }
      const Evaluation ev = evaluate(d.model, samples);
      for (const auto& w : ev.metrics.warnings()) err << "warning: " << checkpoints[i] << ": " << w << "\n";
      const std::string name = i < names.size() ? names[i] : d.model.spec().name;
      rows.push_back({name, ev.metrics, d.model.trainable_params()});
    }
    const std::string text = common.json() ? dump(report_json(rows)) : render_report_table(rows);
    out << text;
    if (!out_path.empty()) write_text(out_path, text);
    return kExitOk;
  }
};

struct ParamsCmd {
  Common common;
  ModelFlags model;
  std::vector<std::string> variants;
  std::size_t vocab_size = 1000;

  int run(std::ostream& out) const {
    const Preset preset = parse_preset(model.preset);
    const auto names = variants.empty() ? variant_names() : variants;
    nlohmann::json rows = nlohmann::json::array();
    std::vector<std::vector<std::string>> cells{{"Variant", "Encoder", "Adapters", "Head", "Trainable", "Rounded"}};
    for (const auto& name : names) {
      const auto spec = make_variant(name, preset, vocab_size, model.overrides());
      const auto b = count_variant_params(spec);
      rows.push_back({{"variant", name},
                      {"preset", preset_name(preset)},
                      {"encoder", b.encoder},
                      {"adapters", b.adapters},
                      {"head", b.head},
                      {"trainable_params", b.total()},
                      {"rounded", round_millions(b.total())}});
      cells.push_back({name, group_thousands(b.encoder), group_thousands(b.adapters), group_thousands(b.head),
                       group_thousands(b.total()), "≈" + round_millions(b.total())});
    }
    if (common.json()) {
      out << dump(rows);
      return kExitOk;
    }
    std::vector<std::size_t> width(cells[0].size(), 0);
    for (const auto& r : cells) {
      for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
    }
    for (const auto& r : cells) {
      std::string line;
      for (std::size_t c = 0; c < r.size(); ++c) {
        const std::string& s = r[c];
        if (c == 0) {
          line += s + std::string(width[c] - s.size(), ' ');
        } else {
          line += "  " + std::string(width[c] - s.size(), ' ') + s;
        }
      }
      out << line << "\n";
    }
    return kExitOk;
  }
};

struct PredictCmd {
  Common common;
  FieldMap fields;
  std::string checkpoint;
  std::string input;
  bool jsonl = false;
  std::string out_path;

  int run(std::istream& in, std::ostream& out) const {
    const Detector d = load_checkpoint(checkpoint);
    std::vector<std::string> texts;
    std::vector<std::string> ids;
    if (jsonl) {
      const auto records = input.empty() ? parse_jsonl(in, fields, "<stdin>") : load_jsonl(input, fields);
      for (const auto& r : records) {
        texts.push_back(r.text);
        ids.push_back(r.id);
      }
    } else {
      std::unique_ptr<std::istream> file;
      if (!input.empty()) {
        file = std::make_unique<std::ifstream>(input);
        if (!*file) throw DataError("cannot open " + input);
      }
      std::istream& src = file ? *file : in;
      for (std::string line; std::getline(src, line);) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        texts.push_back(line);
        ids.push_back(std::to_string(texts.size()));
      }
    }
    const auto preds = predict_texts(d, texts);
    std::string text;
    if (common.json()) {
      nlohmann::json j = nlohmann::json::array();
      for (std::size_t i = 0; i < preds.size(); ++i) {
        j.push_back({{"id", ids[i]}, {"label", preds[i].label}, {"prob_machine", preds[i].prob_machine}});
      }
      text = dump(j);
    } else {
      char buf[96];
      for (std::size_t i = 0; i < preds.size(); ++i) {
        std::snprintf(buf, sizeof buf, "\t%d\t%.6f\n", preds[i].label, preds[i].prob_machine);
        text += ids[i] + buf;
      }
    }
    out << text;
    if (!out_path.empty()) write_text(out_path, text);
    return kExitOk;
  }
};

struct ProbeCmd {
  Common common;
  FieldMap fields;
  std::string train_human, train_machine, val_human, val_machine;
  std::size_t synthetic_count = 0;
  std::vector<std::string> kinds{"lstm_lm", "transformer_lm"};
  ProbeConfig config;
  std::string out_path;
  std::string csv_dir;

  int run(std::ostream& out) {
    const std::uint64_t seed = common.resolved_seed();
    config.lm.seed = seed;
    config.kinds.clear();
    for (const auto& k : kinds) config.kinds.push_back(parse_lm_kind(k));
    std::vector<Record> th, tm, vh, vm;
    if (synthetic_count > 0) {
      auto h = synthetic::variable_entropy_sentences(synthetic_count, derive_seed(seed, "probe.human"));
      auto m = synthetic::template_sentences(synthetic_count, derive_seed(seed, "probe.machine"));
      std::tie(th, vh) = synthetic::split(h, 0.8);
      std::tie(tm, vm) = synthetic::split(m, 0.8);
    } else {
      if (train_human.empty() || train_machine.empty() || val_human.empty() || val_machine.empty()) {
        throw ConfigError("probe needs --synthetic N or all of --train-human/--train-machine/--val-human/--val-machine");
      }
      th = load_jsonl(train_human, fields);
      tm = load_jsonl(train_machine, fields);
      vh = load_jsonl(val_human, fields);
      vm = load_jsonl(val_machine, fields);
    }
    const auto report = probe_report(th, tm, vh, vm, config);
    const auto j = probe_json(report);
    out << (common.json() ? dump(j) : render_probe_table(report));
    if (!out_path.empty()) write_text(out_path, dump(j));
    if (!csv_dir.empty()) {
      fs::create_directories(csv_dir);
      const char* cls[] = {"human", "machine"};
      for (const auto& run : report.runs) {
        for (const auto& p : run.panels) {
          const std::string file = std::string(lm_kind_name(run.kind)) + "_train-" + cls[p.train_class] + "_eval-" +
                                   cls[p.eval_class] + ".csv";
          write_text((fs::path(csv_dir) / file).string(), panel_csv(p));
        }
      }
    }
    return kExitOk;
  }
};

struct GradcheckCmd {
  Common common;
  double tolerance = 1e-4;

  int run(std::ostream& out) const {
    const auto suite = run_gradcheck_suite(common.resolved_seed(), tolerance);
    out << (common.json() ? dump(gradcheck_suite_json(suite)) : render_gradcheck_suite(suite));
    return suite.passed() ? kExitOk : kExitCheckFailed;
  }
};

struct EmbedCmd {
  Common common;
  FieldMap fields;
  std::string checkpoint;
  std::string input;
  std::string out_path;

  int run(std::ostream& out) const {
    const Detector d = load_checkpoint(checkpoint);
    if (!d.model.has_encoder()) throw ConfigError(checkpoint + " has no encoder to run");
    const auto records = load_jsonl(input, fields);
    std::size_t max_len = d.model.spec().encoder.max_positions;
    if (d.metadata.contains("max_len")) max_len = d.metadata["max_len"].get<std::size_t>();
    const auto samples = prepare_samples(records, d.vocab, max_len);
    const EmbeddingTable table = compute_embeddings(d.model.encoder(), samples);
    save_embeddings(table, out_path);
    out << "wrote " << table.entries.size() << " embeddings of width " << table.dim << " to " << out_path << "\n";
    return kExitOk;
  }
};

struct SynthCmd {
  Common common;
  std::string kind = "detection";
  std::size_t count = 2000;
  std::string out_path;

  int run(std::ostream& out) const {
    const std::uint64_t seed = common.resolved_seed();
    std::vector<Record> records;
    if (kind == "detection") records = synthetic::detection_corpus(count, seed);
    else if (kind == "templates") records = synthetic::template_sentences(count, seed);
    else records = synthetic::variable_entropy_sentences(count, seed);
    std::ostringstream ss;
    write_jsonl(ss, records);
    if (out_path.empty()) {
      out << ss.str();
    } else {
      write_text(out_path, ss.str());
    }
    return kExitOk;
  }
};

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Machine-generated text detection toolkit", "mgtd"};
  app.require_subcommand(1);
  app.fallthrough(false);

  StatsCmd stats;
  auto* c_stats = app.add_subcommand("stats", "Generator x domain counts of a JSONL corpus");
  add_common(c_stats, stats.common);
  add_fields(c_stats, stats.fields);
  c_stats->add_option("--input", stats.input, "JSONL corpus")->required();
  c_stats->add_option("--out", stats.out_path, "Also write the output here");

  TrainCmd train;
  auto* c_train = app.add_subcommand("train", "Train a detector variant");
  add_common(c_train, train.common);
  add_fields(c_train, train.fields);
  add_data_flags(c_train, train.data);
  add_model_flags(c_train, train.model, "desk");
  add_train_flags(c_train, train.train);
  c_train->add_option("--out", train.out_path, "Checkpoint path");
  c_train->add_option("--history", train.history_path, "Per-epoch history JSON path");

  SearchCmd search;
  auto* c_search = app.add_subcommand("search", "Grid or random hyperparameter search");
  add_common(c_search, search.common);
  add_fields(c_search, search.fields);
  add_data_flags(c_search, search.data);
  add_model_flags(c_search, search.model, "desk");
  add_train_flags(c_search, search.train);
  c_search->add_option("--space", search.space_path, "Search space JSON")->required();
  c_search->add_option("--strategy", search.strategy, "grid or random")->check(CLI::IsMember({"grid", "random"}));
  c_search->add_option("--trials", search.trials, "Number of random trials");
  c_search->add_option("--out", search.out_path, "Trial log JSON path");

  EvalCmd eval;
  auto* c_eval = app.add_subcommand("eval", "Metrics report for one or more checkpoints");
  add_common(c_eval, eval.common);
  add_fields(c_eval, eval.fields);
  c_eval->add_option("--checkpoint", eval.checkpoints, "Checkpoint (repeatable)")->required();
  c_eval->add_option("--name", eval.names, "Row name per checkpoint (default: variant name)");
  c_eval->add_option("--input", eval.input, "Labelled JSONL to score")->required();
  c_eval->add_option("--embeddings", eval.embeddings, "Precomputed embedding table");
  c_eval->add_option("--out", eval.out_path, "Also write the report here");

  ParamsCmd params;
  auto* c_params = app.add_subcommand("params", "Trainable-parameter audit per variant");
  add_common(c_params, params.common);
  add_model_flags(c_params, params.model, "base");
  c_params->remove_option(c_params->get_option("--variant"));
  c_params->add_option("--variant", params.variants, "Variant (repeatable; default: all)")
      ->check(CLI::IsMember(variant_names()));
  c_params->add_option("--vocab-size", params.vocab_size, "Vocabulary size for the desk preset");

  PredictCmd predict;
  auto* c_predict = app.add_subcommand("predict", "Label texts from a file or stdin");
  add_common(c_predict, predict.common);
  add_fields(c_predict, predict.fields);
  c_predict->add_option("--checkpoint", predict.checkpoint, "Trained checkpoint")->required();
  c_predict->add_option("--input", predict.input, "Text file, one text per line (default: stdin)");
  c_predict->add_flag("--jsonl", predict.jsonl, "Input is JSONL records");
  c_predict->add_option("--out", predict.out_path, "Also write predictions here");

  ProbeCmd probe;
  auto* c_probe = app.add_subcommand("probe", "Per-class LM loss distributions (2x2 grid)");
  add_common(c_probe, probe.common);
  add_fields(c_probe, probe.fields);
  c_probe->add_option("--train-human", probe.train_human, "Human training JSONL");
  c_probe->add_option("--train-machine", probe.train_machine, "Machine training JSONL");
  c_probe->add_option("--val-human", probe.val_human, "Human validation JSONL");
  c_probe->add_option("--val-machine", probe.val_machine, "Machine validation JSONL");
  c_probe->add_option("--synthetic", probe.synthetic_count, "Generate N sentences per class instead");
  c_probe->add_option("--kind", probe.kinds, "LM kinds to run")->check(CLI::IsMember({"lstm_lm", "transformer_lm"}));
  c_probe->add_option("--epochs", probe.config.lm.epochs, "LM training epochs")->capture_default_str();
  c_probe->add_option("--lr", probe.config.lm.lr, "LM learning rate")->capture_default_str();
  c_probe->add_option("--dim", probe.config.lm.model_dim, "LM width")->capture_default_str();
  c_probe->add_option("--layers", probe.config.lm.layers, "LM depth")->capture_default_str();
  c_probe->add_option("--max-len", probe.config.lm.max_len, "Tokens per sentence")->capture_default_str();
  c_probe->add_option("--bins", probe.config.bins, "Histogram bins")->capture_default_str();
  c_probe->add_option("--out", probe.out_path, "Report JSON path");
  c_probe->add_option("--csv-dir", probe.csv_dir, "Directory for per-panel loss CSVs");

  GradcheckCmd gradcheck;
  auto* c_grad = app.add_subcommand("gradcheck", "Finite-difference gradient-check suite");
  add_common(c_grad, gradcheck.common);
  c_grad->add_option("--tolerance", gradcheck.tolerance, "Maximum relative error")->capture_default_str();

  EmbedCmd embed;
  auto* c_embed = app.add_subcommand("embed", "Write a checkpoint encoder's hidden states for a corpus");
  add_common(c_embed, embed.common);
  add_fields(c_embed, embed.fields);
  c_embed->add_option("--checkpoint", embed.checkpoint, "Checkpoint whose encoder to run")->required();
  c_embed->add_option("--input", embed.input, "JSONL corpus")->required();
  c_embed->add_option("--out", embed.out_path, "Embedding table path")->required();

  SynthCmd synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic JSONL corpus");
  add_common(c_synth, synth.common);
  c_synth->add_option("--kind", synth.kind, "detection, templates or human")
      ->check(CLI::IsMember({"detection", "templates", "human"}));
  c_synth->add_option("--count", synth.count, "Number of records")->capture_default_str();
  c_synth->add_option("--out", synth.out_path, "Output JSONL (default: stdout)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  try {
    if (c_stats->parsed()) return stats.run(out);
    if (c_train->parsed()) return train.run(out);
    if (c_search->parsed()) return search.run(out);
    if (c_eval->parsed()) return eval.run(out, err);
    if (c_params->parsed()) return params.run(out);
    if (c_predict->parsed()) return predict.run(std::cin, out);
    if (c_probe->parsed()) return probe.run(out);
    if (c_grad->parsed()) return gradcheck.run(out);
    if (c_embed->parsed()) return embed.run(out);
    if (c_synth->parsed()) return synth.run(out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace mgtd::cli
