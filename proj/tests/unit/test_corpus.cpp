// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mgtd/corpus.hpp"
#include "mgtd/errors.hpp"
#include "mgtd/rng.hpp"

using namespace mgtd;

namespace {

std::vector<Record> parse(const std::string& text, const FieldMap& fields = {}) {
  std::istringstream in(text);
  return parse_jsonl(in, fields);
}

Record rec(std::string text, int label = kHuman, std::string gen = "human", std::string dom = "reddit") {
  return {"r", std::move(text), label, std::move(gen), std::move(dom)};
}

// Random words over a small alphabet with occasional punctuation.
std::string random_text(Rng& rng, std::size_t max_words) {
  static const char* words[] = {"alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta"};
  static const char* punct[] = {".", ",", "!", "?", "'"};
  std::string s;
  const std::size_t n = rng.below(max_words + 1);
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += words[rng.below(8)];
    if (rng.bernoulli(0.2)) s += punct[rng.below(5)];
  }
  return s;
}

}  // namespace

TEST_CASE("jsonl maps fields and preserves order") {
  const auto records = parse(
      R"({"text":"Hi","label":1,"model":"chatGPT","source":"reddit"})"
      "\n\n"
      R"({"id":"x","text":"Yo","label":0,"model":"human","source":"arxiv"})"
      "\n");
  REQUIRE(records.size() == 2);
  CHECK(records[0].label == kMachine);
  CHECK(records[0].generator == "chatGPT");
  CHECK(records[0].domain == "reddit");
  CHECK(records[0].id == "1");
  CHECK(records[1].id == "x");
  CHECK(records[1].label == kHuman);
}

TEST_CASE("jsonl edge cases") {
  CHECK(parse("").empty());

  SUBCASE("malformed line names the line") {
    try {
      parse("{\"text\":\"a\",\"label\":0,\"model\":\"human\",\"source\":\"s\"}\n{not json\n");
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
  }
  SUBCASE("missing field is named") {
    try {
      parse(R"({"text":"a","label":0,"source":"s"})");
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("model") != std::string::npos);
    }
  }
  SUBCASE("unknown label") {
    CHECK_THROWS_AS(parse(R"({"text":"a","label":2,"model":"human","source":"s"})"), DataError);
  }
  SUBCASE("blank text") {
    CHECK_THROWS_AS(parse(R"({"text":"   ","label":0,"model":"human","source":"s"})"), DataError);
  }
  SUBCASE("label must agree with generator") {
    CHECK_THROWS_AS(parse(R"({"text":"a","label":1,"model":"human","source":"s"})"), DataError);
  }
}

TEST_CASE("field remapping and label flip") {
  FieldMap fields;
  fields.text = "body";
  fields.generator = "gen";
  fields.domain = "dom";
  fields.flip_labels = true;
  const auto records = parse(R"({"body":"t","label":1,"gen":"human","dom":"d"})", fields);
  REQUIRE(records.size() == 1);
  CHECK(records[0].label == kHuman);
  CHECK(records[0].text == "t");
}

TEST_CASE("write_jsonl round trip") {
  const std::vector<Record> records{{"a", "x \"quoted\"", kHuman, "human", "wiki"},
                                    {"b", "unicode \xc3\xa9", kMachine, "dolly", "arxiv"}};
  std::ostringstream out;
  write_jsonl(out, records);
  CHECK(parse(out.str()) == records);
}

TEST_CASE("bundled fixture") {
  const auto records = load_jsonl(MGTD_FIXTURE);
  REQUIRE(records.size() == 40);
  const auto humans = std::count_if(records.begin(), records.end(), [](const Record& r) { return r.label == kHuman; });
  CHECK(humans == 20);

  const auto stats = corpus_stats(records);
  CHECK(stats.total == 40);
  CHECK(stats.count("chatGPT", "wikihow") == 3);
  CHECK(stats.count("human", "wikihow") == 4);
  CHECK(stats.count("davinci", "peerread") == 2);
  CHECK(stats.count("cohere", "reddit") == 0);
  CHECK(stats.generators().back() == "human");

  // Independent recount.
  std::map<std::pair<std::string, std::string>, std::size_t> brute;
  for (const auto& r : records) ++brute[{r.generator, r.domain}];
  for (const auto& [key, n] : brute) CHECK(stats.count(key.first, key.second) == n);
}

TEST_CASE("corpus_stats on empty input") {
  const auto stats = corpus_stats({});
  CHECK(stats.total == 0);
  CHECK(stats.count("chatGPT", "wikihow") == 0);
  CHECK(stats_json(stats)["total"] == 0);
}

TEST_CASE("corpus_stats totals equal record count (property)") {
  Rng rng(11);
  const char* gens[] = {"human", "chatGPT", "cohere", "dolly"};
  const char* doms[] = {"reddit", "arxiv", "wikihow"};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Record> records;
    const std::size_t n = rng.below(60);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t g = rng.below(4);
      records.push_back(rec("t", g == 0 ? kHuman : kMachine, gens[g], doms[rng.below(3)]));
    }
    const auto stats = corpus_stats(records);
    std::size_t cells = 0;
    for (const auto& [key, c] : stats.counts) cells += c;
    CHECK(cells == n);
    CHECK(stats.total == n);
    std::size_t gsum = 0;
    for (const auto& [g, c] : stats.generator_totals) gsum += c;
    CHECK(gsum == n);
  }
}

TEST_CASE("stats table is stable") {
  const auto records = load_jsonl(MGTD_FIXTURE);
  const auto a = render_stats_table(corpus_stats(records));
  const auto b = render_stats_table(corpus_stats(records));
  CHECK(a == b);
  CHECK(a.find("wikihow") != std::string::npos);
}

TEST_CASE("tokenize lowercases and detaches punctuation") {
  CHECK(tokenize("Don't stop.") == std::vector<std::string>{"don", "'", "t", "stop", "."});
  CHECK(tokenize("  A\tB\n") == std::vector<std::string>{"a", "b"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("...") == std::vector<std::string>{".", ".", "."});
}

TEST_CASE("vocab building") {
  SUBCASE("frequency ranked") {
    const std::vector<Record> records{rec("a b a")};
    const auto vocab = Vocab::build(records, 10);
    CHECK(vocab.size() == 6);
    CHECK(vocab.id("a") < vocab.id("b"));
    CHECK(vocab.id("a") == 4);
  }
  SUBCASE("ties lexicographic and truncation") {
    const std::vector<Record> records{rec("c b a d d")};
    const auto vocab = Vocab::build(records, 6);
    CHECK(vocab.size() == 6);
    CHECK(vocab.id("d") == 4);
    CHECK(vocab.id("a") == 5);
    CHECK(vocab.id("b") == Vocab::kUnk);
  }
  SUBCASE("empty") {
    const auto vocab = Vocab::build({}, 100);
    CHECK(vocab.size() == Vocab::kNumSpecial);
    CHECK(vocab.token(Vocab::kPad) != vocab.token(Vocab::kCls));
  }
  SUBCASE("from_tokens round trip") {
    const std::vector<Record> records{rec("x y z y")};
    const auto vocab = Vocab::build(records, 100);
    CHECK(Vocab::from_tokens(vocab.tokens()) == vocab);
  }
}

TEST_CASE("encode") {
  const std::vector<Record> records{rec("a b")};
  const auto vocab = Vocab::build(records, 10);

  const auto empty = encode("", vocab);
  CHECK(empty.ids == std::vector<std::int32_t>{Vocab::kCls, Vocab::kSep});
  CHECK(empty.original_length == 2);

  const auto ab = encode("a b", vocab);
  CHECK(ab.ids == std::vector<std::int32_t>{Vocab::kCls, vocab.id("a"), vocab.id("b"), Vocab::kSep});
  CHECK(ab.attention_mask == std::vector<std::uint8_t>{1, 1, 1, 1});

  std::string long_text;
  for (int i = 0; i < 1000; ++i) long_text += (i % 2) ? " a" : " b";
  const auto t = encode(long_text, vocab, 512);
  CHECK(t.ids.size() == 512);
  CHECK(t.ids.front() == Vocab::kCls);
  CHECK(t.ids.back() == Vocab::kSep);
  CHECK(t.original_length == 1002);

  CHECK(encode("q", vocab).ids[1] == Vocab::kUnk);
}

TEST_CASE("encode/decode invariants on random corpora (property)") {
  Rng rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<Record> records;
    for (int i = 0; i < 8; ++i) records.push_back(rec(random_text(rng, 30)));
    const auto vocab = Vocab::build(records, 1000);
    const std::size_t max_len = 2 + rng.below(40);
    for (const auto& r : records) {
      const auto seq = encode(r.text, vocab, max_len);
      CHECK(seq.ids.size() <= max_len);
      CHECK(seq.ids.size() == seq.attention_mask.size());
      CHECK(seq.ids.front() == Vocab::kCls);
      CHECK(seq.ids.back() == Vocab::kSep);
      const auto tokens = tokenize(r.text);
      CHECK(seq.original_length == tokens.size() + 2);
      if (tokens.size() + 2 <= max_len) CHECK(decode(seq.ids, vocab) == tokens);
    }
  }
}

TEST_CASE("batches") {
  std::vector<Record> records;
  for (int i = 0; i < 5; ++i) {
    records.push_back({"id" + std::to_string(i), std::string(static_cast<std::size_t>(i + 1) * 2, 'a'), i % 2,
                       i % 2 ? "dolly" : "human", "d"});
    for (int k = 0; k < i; ++k) records.back().text += " w";
  }
  const auto vocab = Vocab::build(records, 100);

  const auto batches = make_batches(records, vocab, 2, 7);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].rows == 2);
  CHECK(batches[1].rows == 2);
  CHECK(batches[2].rows == 1);

  CHECK(make_batches(records, vocab, 2, 7) == batches);

  std::vector<std::size_t> seen;
  for (const auto& b : batches) {
    std::size_t longest = 0;
    for (std::size_t r = 0; r < b.rows; ++r) {
      seen.push_back(b.indices[r]);
      CHECK(b.labels[r] == records[b.indices[r]].label);
      longest = std::max(longest, b.real_length(r));
      // PAD only as a suffix, mask consistent.
      bool in_pad = false;
      for (std::size_t c = 0; c < b.cols; ++c) {
        const bool pad = b.row_mask(r)[c] == 0;
        if (in_pad) CHECK(pad);
        in_pad = pad;
        CHECK(pad == (b.row_ids(r)[c] == Vocab::kPad));
      }
    }
    CHECK(longest == b.cols);
  }
  std::sort(seen.begin(), seen.end());
  CHECK(seen == std::vector<std::size_t>{0, 1, 2, 3, 4});
}

TEST_CASE("different seeds give different permutations on the fixture") {
  const auto records = load_jsonl(MGTD_FIXTURE);
  const auto vocab = Vocab::build(records, 1000);
  auto order = [&](std::uint64_t seed) {
    std::vector<std::size_t> out;
    for (const auto& b : make_batches(records, vocab, 8, seed)) out.insert(out.end(), b.indices.begin(), b.indices.end());
    return out;
  };
  CHECK(order(1) != order(2));
  CHECK(order(1) == order(1));

  const auto seq = make_sequential_batches(records, vocab, 16);
  REQUIRE(seq.size() == 3);
  CHECK(seq[0].indices.front() == 0);
  CHECK(seq[2].indices.back() == 39);
}
