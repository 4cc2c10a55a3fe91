// SPDX-License-Identifier: Apache-2.0
#include "mgtd/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "mgtd/rng.hpp"

namespace mgtd::synthetic {

namespace {

std::string token_name(char prefix, std::size_t i) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%c%02zu", prefix, i);
  return buf;
}

std::string make_id(std::string_view prefix, std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06zu", i);
  return std::string(prefix) + "-" + buf;
}

Record machine_record(std::string id, std::string text) {
  return {std::move(id), std::move(text), kMachine, "template", "synthetic"};
}

Record human_record(std::string id, std::string text) {
  return {std::move(id), std::move(text), kHuman, "human", "synthetic"};
}

std::string uniform_sentence(Rng& rng, std::span<const std::size_t> alphabet) {
  const std::size_t len = 10 + rng.below(21);
  std::string s;
  for (std::size_t i = 0; i < len; ++i) {
    if (i) s += ' ';
    s += token_name('h', alphabet[rng.below(alphabet.size())]);
  }
  return s;
}

}  // namespace

const std::vector<std::string>& machine_templates() {
  static const std::vector<std::string> templates = [] {
    Rng rng(0x7e3a1a7e5ULL);
    std::vector<std::string> out;
    for (std::size_t t = 0; t < kTemplateCount; ++t) {
      const std::size_t len = 10 + rng.below(11);
      std::string s;
      for (std::size_t i = 0; i < len; ++i) {
        if (i) s += ' ';
        s += token_name('m', rng.below(kTokensPerClass));
      }
      out.push_back(std::move(s));
    }
    return out;
  }();
  return templates;
}

std::vector<Record> template_sentences(std::size_t count, std::uint64_t seed, std::string_view id_prefix) {
  Rng rng(derive_seed(seed, "templates"));
  const auto& templates = machine_templates();
  std::vector<Record> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(machine_record(make_id(id_prefix, i), templates[rng.below(templates.size())]));
  }
  return out;
}

std::vector<Record> variable_entropy_sentences(std::size_t count, std::uint64_t seed, std::string_view id_prefix) {
  Rng rng(derive_seed(seed, "variable-entropy"));
  std::vector<Record> out;
  out.reserve(count);
  std::vector<double> cdf(kTokensPerClass);
  for (std::size_t i = 0; i < count; ++i) {
    const double exponent = rng.uniform(0.0, kMaxZipfExponent);
    double total = 0.0;
    for (std::size_t r = 0; r < kTokensPerClass; ++r) {
      total += std::pow(static_cast<double>(r + 1), -exponent);
      cdf[r] = total;
    }
    const std::size_t len = 10 + rng.below(21);
    std::string s;
    for (std::size_t t = 0; t < len; ++t) {
      const double u = rng.uniform() * total;
      const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      const auto rank = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), kTokensPerClass - 1);
      if (t) s += ' ';
      s += token_name('h', rank);
    }
    out.push_back(human_record(make_id(id_prefix, i), std::move(s)));
  }
  return out;
}

std::vector<Record> detection_corpus(std::size_t count, std::uint64_t seed) {
  const std::size_t machines = count / 2;
  std::vector<Record> out = template_sentences(machines, seed, "toy-m");
  Rng rng(derive_seed(seed, "random-human"));
  std::vector<std::size_t> all(kTokensPerClass);
  std::iota(all.begin(), all.end(), std::size_t{0});
  for (std::size_t i = 0; i < count - machines; ++i) {
    out.push_back(human_record(make_id("toy-h", i), uniform_sentence(rng, all)));
  }
  Rng order(derive_seed(seed, "detection-order"));
  order.shuffle(out.begin(), out.end());
  return out;
}

std::pair<std::vector<Record>, std::vector<Record>> split(std::span<const Record> records, double fraction) {
  const auto cut = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(records.size())));
  std::vector<Record> head(records.begin(), records.begin() + static_cast<std::ptrdiff_t>(cut));
  std::vector<Record> tail(records.begin() + static_cast<std::ptrdiff_t>(cut), records.end());
  return {std::move(head), std::move(tail)};
}

}  // namespace mgtd::synthetic
