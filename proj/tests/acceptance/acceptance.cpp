// SPDX-License-Identifier: Apache-2.0
// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mgtd/checkpoint.hpp"
#include "mgtd/cli.hpp"
#include "mgtd/container.hpp"
#include "mgtd/corpus.hpp"
#include "mgtd/eval.hpp"
#include "mgtd/gradcheck_suite.hpp"
#include "mgtd/probe.hpp"
#include "mgtd/rng.hpp"
#include "mgtd/synthetic.hpp"
#include "mgtd/train.hpp"
#include "mgtd/variant.hpp"

using namespace mgtd;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 42;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Outcome parameter_counts() {
  Outcome o;
  const auto start = Clock::now();
  auto count = [](const char* name) { return count_variant_params(make_variant(name, Preset::base, 0)); };
  const auto lora = count("lora_frozen");
  o.require(lora.adapters == 737280, "lora adapters " + std::to_string(lora.adapters));
  o.require(round_millions(lora.adapters) == "0.7M", "lora rounding");
  o.require(count("bilstm_frozen").total() == 3675138, "bilstm_frozen");
  o.require(round_millions(3675138) == "4M", "bilstm rounding");
  o.require(count("gru_frozen").total() == 2756610, "gru_frozen");
  o.require(round_millions(2756610) == "3M", "gru rounding");
  const auto unfrozen = count("bilstm_unfrozen2");
  o.require(unfrozen.encoder == 14175744 && unfrozen.total() == 17850882, "bilstm_unfrozen2");
  o.require(round_millions(unfrozen.total()) == "18M", "unfrozen rounding");
  const double full = static_cast<double>(count("full_finetune").total());
  o.require(std::abs(full - 124e6) / 124e6 <= 0.02, "full_finetune " + group_thousands(static_cast<std::size_t>(full)));
  const double t = seconds_since(start);
  o.require(t < 1.0, "runtime");
  o.detail = o.pass ? "full_finetune " + group_thousands(static_cast<std::size_t>(full)) : o.detail;
  return o;
}

Outcome gradient_checks() {
  Outcome o;
  const auto start = Clock::now();
  const auto suite = run_gradcheck_suite(kSeed, 1e-4);
  for (const auto& c : suite.cases) o.require(c.report.max_rel_error() < 1e-4, c.name);
  const char* required[] = {"encoder.all_trainable", "encoder.lora", "encoder.top1_unfrozen", "head.bilstm",
                            "head.bigru"};
  for (const char* name : required) {
    bool found = false;
    for (const auto& c : suite.cases) found = found || c.name.rfind(name, 0) == 0;
    o.require(found, std::string("missing case ") + name);
  }
  o.require(seconds_since(start) < 120.0, "runtime");
  if (o.pass) {
    std::ostringstream d;
    d << suite.cases.size() << " cases, max rel error " << suite.max_rel_error();
    o.detail = d.str();
  }
  return o;
}

Outcome toy_training() {
  Outcome o;
  const auto start = Clock::now();
  const auto corpus = synthetic::detection_corpus(2000, kSeed);
  const auto [train_records, val_records] = synthetic::split(corpus, 0.8);
  auto spec = [](std::size_t v) { return make_variant("bilstm_frozen", Preset::desk, v); };
  const TrainConfig config{.epochs = 10, .seed = kSeed};
  const auto a = train_detector(train_records, val_records, spec, config, 5000);
  const auto b = train_detector(train_records, val_records, spec, config, 5000);
  o.require(a.result.history.size() <= 10, "epochs");
  o.require(a.result.best_val_accuracy >= 0.95, "val accuracy " + std::to_string(a.result.best_val_accuracy));
  o.require(checkpoint_bytes(a.detector) == checkpoint_bytes(b.detector), "checkpoints differ");
  o.require(history_json(a.result) == history_json(b.result), "histories differ");
  o.require(seconds_since(start) < 300.0, "runtime");
  if (o.pass) {
    std::ostringstream d;
    d << "val accuracy " << a.result.best_val_accuracy << " at epoch " << a.result.best_epoch;
    o.detail = d.str();
  }
  return o;
}

Outcome metrics_oracle() {
  Outcome o;
  const auto start = Clock::now();
  Rng rng(kSeed);
  for (int trial = 0; trial < 1000 && o.pass; ++trial) {
    const std::size_t n = 1 + rng.below(100);
    std::vector<int> preds(n), labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      preds[i] = static_cast<int>(rng.below(2));
      labels[i] = static_cast<int>(rng.below(2));
    }
    const auto m = metrics(confusion(preds, labels));
    double correct = 0;
    for (std::size_t i = 0; i < n; ++i) correct += preds[i] == labels[i];
    o.require(std::abs(m.accuracy - correct / static_cast<double>(n)) <= 1e-12, "accuracy");
    double f1_sum = 0;
    for (int k = 0; k < 2; ++k) {
      double tp = 0, predicted = 0, actual = 0;
      for (std::size_t i = 0; i < n; ++i) {
        tp += preds[i] == k && labels[i] == k;
        predicted += preds[i] == k;
        actual += labels[i] == k;
      }
      const double p = predicted > 0 ? tp / predicted : 0.0;
      const double r = actual > 0 ? tp / actual : 0.0;
      const double f = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
      f1_sum += f;
      o.require(std::abs(m.per_class[k].precision - p) <= 1e-12, "precision");
      o.require(std::abs(m.per_class[k].recall - r) <= 1e-12, "recall");
      o.require(std::abs(m.per_class[k].f1 - f) <= 1e-12, "f1");
    }
    o.require(std::abs(m.f1_macro - f1_sum / 2) <= 1e-12, "macro f1");
  }
  const auto shape = metrics({.tp = 50, .fp = 17, .tn = 31, .fn = 2});
  o.require(std::round(shape.positive().precision * 1e4) / 1e4 == 0.7463, "precision 0.7463");
  o.require(std::round(shape.positive().recall * 1e4) / 1e4 == 0.9615, "recall 0.9615");
  o.require(seconds_since(start) < 10.0, "runtime");
  return o;
}

Outcome fixture_stats() {
  Outcome o;
  // Authored grid of the bundled fixture.
  const std::map<std::pair<std::string, std::string>, std::size_t> authored{
      {{"bloomz", "arxiv"}, 1},    {{"bloomz", "peerread"}, 1}, {{"bloomz", "reddit"}, 1},
      {{"bloomz", "wikipedia"}, 1}, {{"chatGPT", "reddit"}, 1},  {{"chatGPT", "wikihow"}, 3},
      {{"cohere", "arxiv"}, 2},    {{"cohere", "wikipedia"}, 2}, {{"davinci", "peerread"}, 2},
      {{"davinci", "reddit"}, 2},  {{"dolly", "arxiv"}, 1},     {{"dolly", "peerread"}, 2},
      {{"dolly", "wikihow"}, 1},   {{"human", "arxiv"}, 4},     {{"human", "peerread"}, 4},
      {{"human", "reddit"}, 4},    {{"human", "wikihow"}, 4},   {{"human", "wikipedia"}, 4}};
  std::ostringstream out1, err1, out2, err2;
  o.require(cli::dispatch({"stats", "--input", MGTD_FIXTURE}, out1, err1) == cli::kExitOk, "stats exit code");
  cli::dispatch({"stats", "--input", MGTD_FIXTURE}, out2, err2);
  o.require(out1.str() == out2.str(), "output differs across runs");

  std::ostringstream js, jerr;
  cli::dispatch({"stats", "--input", MGTD_FIXTURE, "--format", "json"}, js, jerr);
  const auto stats = corpus_stats(load_jsonl(MGTD_FIXTURE));
  o.require(stats.counts.size() == authored.size(), "grid size");
  for (const auto& [key, n] : authored) {
    o.require(stats.count(key.first, key.second) == n, key.first + "/" + key.second);
  }
  o.require(stats.total == 40, "total");
  o.require(stats_json(stats).dump() == nlohmann::json::parse(js.str()).dump(), "json output");
  return o;
}

Outcome probe_experiment() {
  Outcome o;
  const auto start = Clock::now();
  const auto human = synthetic::variable_entropy_sentences(400, derive_seed(kSeed, "probe.human"));
  const auto machine = synthetic::template_sentences(400, derive_seed(kSeed, "probe.machine"));
  const auto [train_h, val_h] = synthetic::split(human, 0.8);
  const auto [train_m, val_m] = synthetic::split(machine, 0.8);
  ProbeConfig config;
  config.lm.seed = kSeed;
  const auto report = probe_report(train_h, train_m, val_h, val_m, config);
  std::ostringstream d;
  for (const auto& run : report.runs) {
    const std::string kind(lm_kind_name(run.kind));
    // Panels: hh, hm, mh, mm. Compare within each trained LM.
    const double hh = run.panels[0].stats.variance, hm = run.panels[1].stats.variance;
    const double mh = run.panels[2].stats.variance, mm = run.panels[3].stats.variance;
    o.require(hh > hm, kind + " human-trained LM: human variance <= machine variance");
    o.require(mh > mm, kind + " machine-trained LM: human variance <= machine variance");
    d << (d.tellp() > 0 ? "; " : "") << kind << " var h/m " << hh << "/" << hm << ", " << mh << "/" << mm;
  }

  const std::vector<Record> sentences(human.begin(), human.begin() + 20);
  const auto vocab = Vocab::build(sentences, 5000);
  const double ln_v = std::log(static_cast<double>(vocab.size()));
  for (const auto kind : {LmKind::lstm_lm, LmKind::transformer_lm}) {
    LmConfig cfg{.kind = kind, .vocab_size = vocab.size()};
    LanguageModel<float> lm(cfg, kSeed);
    lm.output().weight.value.fill(0.0f);
    lm.output().bias.value.fill(0.0f);
    for (const double loss : sentence_losses(lm, sentences, vocab)) {
      o.require(std::abs(loss - ln_v) < 1e-6, std::string(lm_kind_name(kind)) + " uniform loss != ln V");
    }
  }
  o.require(seconds_since(start) < 300.0, "runtime");
  if (o.pass) o.detail = d.str();
  return o;
}

Outcome checkpoint_round_trip() {
  Outcome o;
  const auto start = Clock::now();
  const auto corpus = synthetic::detection_corpus(40, kSeed);
  const auto vocab = Vocab::build(corpus, 5000);
  const auto samples = prepare_samples(corpus, vocab, 128);
  const fs::path dir = fs::temp_directory_path() / "mgtd_acceptance_ckpt";
  fs::create_directories(dir);
  for (const auto& name : variant_names()) {
    const Detector original{vocab, Model<float>(make_variant(name, Preset::desk, vocab.size()), kSeed), {}};
    const auto path = dir / (name + ".ckpt");
    save_checkpoint(original, path);
    const auto first = read_file(path);
    const Detector loaded = load_checkpoint(path);
    o.require(checkpoint_bytes(loaded) == first, name + " bytes");
    for (const auto& s : samples) {
      const auto a = original.model.forward(s.ids, s.length, nullptr, nullptr);
      const auto b = loaded.model.forward(s.ids, s.length, nullptr, nullptr);
      if (a != b) {
        o.require(false, name + " forward");
        break;
      }
    }
  }
  fs::remove_all(dir);
  o.require(seconds_since(start) < 30.0, "runtime");
  return o;
}

Outcome cli_determinism() {
  Outcome o;
  const fs::path dir = fs::temp_directory_path() / "mgtd_acceptance_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto p = [&](const std::string& name) { return (dir / name).string(); };

  auto run = [&](std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::dispatch(args, out, err);
    if (code != cli::kExitOk) o.require(false, args[0] + " exit " + std::to_string(code) + ": " + err.str());
    return out.str();
  };

  run({"synth", "--kind", "detection", "--count", "300", "--out", p("corpus.jsonl")});
  std::ofstream(p("space.json")) << R"({"hidden_size": [8, 16], "lr": [0.001, 0.01]})";

  // Each command runs twice with identical flags; the named outputs must match.
  const std::vector<std::pair<std::string, std::function<std::vector<std::string>(const std::string&)>>> commands{
      {"train",
       [&](const std::string& tag) {
         run({"train", "--train", p("corpus.jsonl"), "--epochs", "3", "--out", p("model" + tag + ".ckpt"),
              "--history", p("history" + tag + ".json")});
         return std::vector<std::string>{p("model" + tag + ".ckpt"), p("history" + tag + ".json")};
       }},
      {"search",
       [&](const std::string& tag) {
         run({"search", "--train", p("corpus.jsonl"), "--space", p("space.json"), "--epochs", "2", "--out",
              p("search" + tag + ".json")});
         return std::vector<std::string>{p("search" + tag + ".json")};
       }},
      {"probe",
       [&](const std::string& tag) {
         run({"probe", "--synthetic", "100", "--epochs", "3", "--out", p("probe" + tag + ".json")});
         return std::vector<std::string>{p("probe" + tag + ".json")};
       }},
      {"eval",
       [&](const std::string& tag) {
         run({"eval", "--checkpoint", p("model_a.ckpt"), "--input", p("corpus.jsonl"), "--format", "json", "--out",
              p("eval" + tag + ".json")});
         return std::vector<std::string>{p("eval" + tag + ".json")};
       }},
  };
  for (const auto& [name, command] : commands) {
    const auto first = command("_a");
    const auto second = command("_b");
    for (std::size_t i = 0; i < first.size(); ++i) {
      if (!fs::exists(first[i]) || !fs::exists(second[i])) {
        o.require(false, name + " output missing");
      } else {
        o.require(read_file(first[i]) == read_file(second[i]), name + " output differs");
      }
    }
  }
  fs::remove_all(dir);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"parameter counts", parameter_counts},     {"gradient checks", gradient_checks},
      {"toy-corpus training", toy_training},      {"metrics oracle", metrics_oracle},
      {"fixture statistics", fixture_stats},      {"probe experiment", probe_experiment},
      {"checkpoint round trip", checkpoint_round_trip}, {"cli determinism", cli_determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    failures += !o.pass;
    std::printf("%s %zu %s (%.2f s)%s%s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                seconds_since(start), o.detail.empty() ? "" : ": ", o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
