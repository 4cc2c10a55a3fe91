// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "mgtd/errors.hpp"
#include "mgtd/probe.hpp"
#include "mgtd/rng.hpp"
#include "mgtd/synthetic.hpp"

using namespace mgtd;

namespace {

Record human(std::string text) { return {"h", std::move(text), kHuman, "human", "d"}; }
Record machine(std::string text) { return {"m", std::move(text), kMachine, "dolly", "d"}; }

std::vector<Tensor<float>> values(const LanguageModel<float>& lm) {
  std::vector<Tensor<float>> out;
  for (const auto* p : lm.parameters()) out.push_back(p->value);
  return out;
}

}  // namespace

TEST_CASE("loss_distribution") {
  const std::vector<double> same{2, 2, 2};
  const auto s = loss_distribution(same, 30);
  CHECK(s.variance == 0.0);
  CHECK(s.mean == 2.0);
  CHECK(std::count_if(s.histogram.counts.begin(), s.histogram.counts.end(), [](std::size_t c) { return c > 0; }) == 1);

  const std::vector<double> ramp{0, 1, 2, 3};
  const auto r = loss_distribution(ramp, 3);
  CHECK(r.mean == 1.5);
  CHECK(r.variance == 1.25);
  CHECK(r.histogram.edges.size() == 4);
  CHECK(std::accumulate(r.histogram.counts.begin(), r.histogram.counts.end(), std::size_t{0}) == 4);
  CHECK(r.histogram.counts.back() == 2);
}

TEST_CASE("histogram conservation (property)") {
  Rng rng(51);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> losses(1 + rng.below(100));
    for (auto& l : losses) l = rng.bernoulli(0.1) ? 1.0 : rng.uniform(0.0, 10.0);
    const std::size_t bins = 1 + rng.below(40);
    const auto s = loss_distribution(losses, bins);
    CHECK(s.histogram.counts.size() == bins);
    CHECK(std::accumulate(s.histogram.counts.begin(), s.histogram.counts.end(), std::size_t{0}) == losses.size());
    CHECK(s.variance >= 0.0);
  }
}

TEST_CASE("untrained uniform model scores ln V") {
  const std::vector<Record> records{human("a b c d"), human("e f g"), human("a a a a a a")};
  const auto vocab = Vocab::build(records, 100);
  for (const auto kind : {LmKind::lstm_lm, LmKind::transformer_lm}) {
    LmConfig cfg{.kind = kind, .vocab_size = vocab.size()};
    LanguageModel<float> lm(cfg, 1);
    lm.output().weight.value.fill(0.0f);
    lm.output().bias.value.fill(0.0f);
    for (const double loss : sentence_losses(lm, records, vocab)) {
      CHECK(std::abs(loss - std::log(static_cast<double>(vocab.size()))) < 1e-6);
    }
  }
}

TEST_CASE("sentence losses are non-negative and skip short sentences") {
  const std::vector<Record> records{human("a b c"), human("a"), human(""), human("b c a b")};
  const auto vocab = Vocab::build(records, 100);
  const LanguageModel<float> lm({.vocab_size = vocab.size()}, 2);
  std::size_t skipped = 0;
  const auto losses = sentence_losses(lm, records, vocab, &skipped);
  CHECK(skipped == 2);
  REQUIRE(losses.size() == 2);
  for (const double l : losses) {
    CHECK(l >= 0.0);
    CHECK(std::isfinite(l));
  }
  CHECK(lm_tokens("A b.", vocab, 64).size() == 3);
  CHECK(lm_tokens("a b c d e", vocab, 2).size() == 2);
}

TEST_CASE("train_lm contracts") {
  const std::vector<Record> one{human("the cat sat on the mat")};
  const auto vocab = Vocab::build(one, 100);

  for (const auto kind : {LmKind::lstm_lm, LmKind::transformer_lm}) {
    INFO(lm_kind_name(kind));
    LmHistory h;
    train_lm(one, vocab, {.kind = kind, .epochs = 5, .lr = 1e-2}, &h);
    REQUIRE(h.epoch_loss.size() == 5);
    double prev = h.initial_loss;
    for (const double l : h.epoch_loss) {
      CHECK(l <= prev + 1e-6);
      prev = l;
    }

    LmHistory frozen;
    train_lm(one, vocab, {.kind = kind, .epochs = 3, .lr = 0.0}, &frozen);
    CHECK(frozen.final_loss() == frozen.initial_loss);

    const auto a = train_lm(one, vocab, {.kind = kind, .seed = 5, .epochs = 2});
    const auto b = train_lm(one, vocab, {.kind = kind, .seed = 5, .epochs = 2});
    CHECK(values(a) == values(b));
  }

  const std::vector<Record> mixed{human("a b"), machine("c d")};
  CHECK_THROWS_AS(train_lm(mixed, vocab, {}), DataError);
  CHECK_THROWS_AS(train_lm({}, vocab, {}), DataError);
}

TEST_CASE("memorization") {
  const std::vector<Record> train{human("one two three four five six seven eight")};
  const std::vector<Record> other{human("eight six four two seven five three one")};
  std::vector<Record> both = train;
  both.push_back(other[0]);
  const auto vocab = Vocab::build(both, 100);
  for (const auto kind : {LmKind::lstm_lm, LmKind::transformer_lm}) {
    INFO(lm_kind_name(kind));
    const auto lm = train_lm(train, vocab, {.kind = kind, .epochs = 200, .lr = 1e-2});
    const double seen = sentence_losses(lm, train, vocab).at(0);
    const double unseen = sentence_losses(lm, other, vocab).at(0);
    CHECK(seen < 0.1);
    CHECK(unseen >= 5.0 * seen);
  }
}

TEST_CASE("probe report") {
  const auto machine_train = synthetic::template_sentences(60, 1);
  const auto machine_val = synthetic::template_sentences(20, 2);
  const auto human_train = synthetic::variable_entropy_sentences(60, 3);
  const auto human_val = synthetic::variable_entropy_sentences(20, 4);
  ProbeConfig cfg;
  cfg.lm.epochs = 3;

  const auto report = probe_report(human_train, machine_train, human_val, machine_val, cfg);
  REQUIRE(report.runs.size() == 2);
  for (const auto& run : report.runs) {
    REQUIRE(run.panels.size() == 4);
    CHECK(run.panels[0].train_class == kHuman);
    CHECK(run.panels[0].eval_class == kHuman);
    CHECK(run.panels[1].eval_class == kMachine);
    CHECK(run.panels[2].train_class == kMachine);
    for (const auto& p : run.panels) CHECK(p.stats.losses.size() == 20);
  }
  const auto again = probe_report(human_train, machine_train, human_val, machine_val, cfg);
  CHECK(probe_json(report).dump() == probe_json(again).dump());
  CHECK(render_probe_table(report) == render_probe_table(again));

  const auto csv = panel_csv(report.runs[0].panels[0]);
  CHECK(csv.rfind("loss\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 21);

  const auto j = probe_json(report);
  CHECK(j["runs"][0]["panels"][0].contains("variance"));
  CHECK(j["runs"][0]["panels"][0]["hist"].contains("edges"));
}

TEST_CASE("identical class data gives a symmetric grid") {
  const auto sentences = synthetic::variable_entropy_sentences(30, 8);
  std::vector<Record> as_machine = sentences;
  for (auto& r : as_machine) {
    r.label = kMachine;
    r.generator = "dolly";
  }
  ProbeConfig cfg;
  cfg.lm.epochs = 2;
  cfg.kinds = {LmKind::lstm_lm};
  const auto report = probe_report(sentences, as_machine, sentences, as_machine, cfg);
  const auto& p = report.runs[0].panels;
  CHECK(p[0].stats.losses == p[3].stats.losses);
  CHECK(p[1].stats.losses == p[2].stats.losses);
  CHECK(p[0].stats.losses == p[1].stats.losses);
}

TEST_CASE("synthetic corpora are deterministic and separable by vocabulary") {
  CHECK(synthetic::detection_corpus(50, 1) == synthetic::detection_corpus(50, 1));
  CHECK(synthetic::machine_templates().size() == synthetic::kTemplateCount);
  for (const auto& r : synthetic::detection_corpus(200, 2)) {
    const char expected = r.label == kMachine ? 'm' : 'h';
    for (const auto& tok : tokenize(r.text)) CHECK(tok[0] == expected);
  }
  for (const auto& r : synthetic::variable_entropy_sentences(100, 3)) {
    const auto n = tokenize(r.text).size();
    CHECK(n >= 10);
    CHECK(n <= 30);
  }
}
