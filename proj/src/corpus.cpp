// SPDX-License-Identifier: Apache-2.0
#include "mgtd/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "mgtd/errors.hpp"
#include "mgtd/rng.hpp"

namespace mgtd {

namespace {

std::string located(std::string_view source, std::size_t line, const std::string& what) {
  std::ostringstream os;
  os << source << ":" << line << ": " << what;
  return os.str();
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

int parse_label(const nlohmann::json& v, std::string_view source, std::size_t line) {
  if (v.is_boolean()) return v.get<bool>() ? 1 : 0;
  if (v.is_number_integer() || v.is_number_unsigned()) {
    const auto n = v.get<long long>();
    if (n == 0 || n == 1) return static_cast<int>(n);
  }
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "0") return 0;
    if (s == "1") return 1;
  }
  throw DataError(located(source, line, "unknown label value " + v.dump()));
}

std::string field_string(const nlohmann::json& obj, const std::string& field, std::string_view source,
                         std::size_t line) {
  auto it = obj.find(field);
  if (it == obj.end()) throw DataError(located(source, line, "missing field \"" + field + "\""));
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number()) return it->dump();
  throw DataError(located(source, line, "field \"" + field + "\" is not a string"));
}

}  // namespace

std::vector<Record> parse_jsonl(std::istream& in, const FieldMap& fields, std::string_view source) {
  std::vector<Record> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(located(source, line_no, std::string("malformed JSON: ") + e.what()));
    }
    if (!obj.is_object()) throw DataError(located(source, line_no, "line is not a JSON object"));

    Record r;
    r.text = field_string(obj, fields.text, source, line_no);
    auto label_it = obj.find(fields.label);
    if (label_it == obj.end()) throw DataError(located(source, line_no, "missing field \"" + fields.label + "\""));
    r.label = parse_label(*label_it, source, line_no);
    if (fields.flip_labels) r.label = 1 - r.label;
    r.generator = field_string(obj, fields.generator, source, line_no);
    r.domain = field_string(obj, fields.domain, source, line_no);
    r.id = obj.contains(fields.id) ? field_string(obj, fields.id, source, line_no) : std::to_string(line_no);

    if (is_blank(r.text)) throw DataError(located(source, line_no, "empty text"));
    if ((r.label == kHuman) != (r.generator == "human")) {
      throw DataError(located(source, line_no,
                              "label " + std::to_string(r.label) + " inconsistent with generator \"" + r.generator +
                                  "\" (label 0 iff generator is \"human\")"));
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<Record> load_jsonl(const std::filesystem::path& path, const FieldMap& fields) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_jsonl(in, fields, path.string());
}

void write_jsonl(std::ostream& out, std::span<const Record> records) {
  for (const auto& r : records) {
    nlohmann::ordered_json obj;
    obj["id"] = r.id;
    obj["text"] = r.text;
    obj["label"] = r.label;
    obj["model"] = r.generator;
    obj["source"] = r.domain;
    out << obj.dump() << '\n';
  }
}

// --- stats -------------------------------------------------------------------

std::size_t CorpusStats::count(const std::string& generator, const std::string& domain) const {
  auto it = counts.find({generator, domain});
  return it == counts.end() ? 0 : it->second;
}

std::vector<std::string> CorpusStats::generators() const {
  std::vector<std::string> out;
  bool has_human = false;
  for (const auto& [g, n] : generator_totals) {
    if (g == "human") {
      has_human = true;
    } else {
      out.push_back(g);
    }
  }
  if (has_human) out.push_back("human");
  return out;
}

std::vector<std::string> CorpusStats::domains() const {
  std::vector<std::string> out;
  for (const auto& [d, n] : domain_totals) out.push_back(d);
  return out;
}

CorpusStats corpus_stats(std::span<const Record> records) {
  CorpusStats s;
  for (const auto& r : records) {
    ++s.counts[{r.generator, r.domain}];
    ++s.generator_totals[r.generator];
    ++s.domain_totals[r.domain];
    ++s.total;
  }
  return s;
}

std::string render_stats_table(const CorpusStats& stats) {
  const auto gens = stats.generators();
  const auto doms = stats.domains();
  std::size_t first = std::string("Model/Source").size();
  for (const auto& d : doms) first = std::max(first, d.size());
  std::vector<std::size_t> widths;
  for (const auto& g : gens) {
    widths.push_back(std::max(g.size(), std::to_string(stats.generator_totals.at(g)).size()));
  }
  const std::size_t total_width = std::max<std::size_t>(5, std::to_string(stats.total).size());

  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(first)) << "Model/Source";
  for (std::size_t i = 0; i < gens.size(); ++i) os << "  " << std::right << std::setw(static_cast<int>(widths[i])) << gens[i];
  os << "  " << std::setw(static_cast<int>(total_width)) << "total" << '\n';
  for (const auto& d : doms) {
    os << std::left << std::setw(static_cast<int>(first)) << d;
    for (std::size_t i = 0; i < gens.size(); ++i) {
      os << "  " << std::right << std::setw(static_cast<int>(widths[i])) << stats.count(gens[i], d);
    }
    os << "  " << std::setw(static_cast<int>(total_width)) << stats.domain_totals.at(d) << '\n';
  }
  os << std::left << std::setw(static_cast<int>(first)) << "total";
  for (std::size_t i = 0; i < gens.size(); ++i) {
    os << "  " << std::right << std::setw(static_cast<int>(widths[i])) << stats.generator_totals.at(gens[i]);
  }
  os << "  " << std::setw(static_cast<int>(total_width)) << stats.total << '\n';
  return os.str();
}

nlohmann::json stats_json(const CorpusStats& stats) {
  nlohmann::json j;
  j["generators"] = stats.generators();
  j["domains"] = stats.domains();
  nlohmann::json grid = nlohmann::json::object();
  for (const auto& d : stats.domains()) {
    nlohmann::json row = nlohmann::json::object();
    for (const auto& g : stats.generators()) row[g] = stats.count(g, d);
    grid[d] = row;
  }
  j["counts"] = grid;
  j["generator_totals"] = stats.generator_totals;
  j["domain_totals"] = stats.domain_totals;
  j["total"] = stats.total;
  return j;
}

// --- tokenizer / vocab ---------------------------------------------------------

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  for (unsigned char c : text) {
    if (c < 0x80 && std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    } else {
      word.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
    }
  }
  flush();
  return out;
}

Vocab::Vocab() : tokens_{"<pad>", "<cls>", "<sep>", "<unk>"} {
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], static_cast<std::int32_t>(i));
}

Vocab Vocab::build(std::span<const Record> records, std::size_t max_size) {
  if (max_size < kNumSpecial + 1) throw ConfigError("vocabulary max_size must be at least 5");
  std::unordered_map<std::string, std::size_t> freq;
  for (const auto& r : records) {
    for (auto& t : tokenize(r.text)) ++freq[std::move(t)];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > max_size - kNumSpecial) ranked.resize(max_size - kNumSpecial);
  Vocab v;
  for (auto& [tok, n] : ranked) {
    v.index_.emplace(tok, static_cast<std::int32_t>(v.tokens_.size()));
    v.tokens_.push_back(std::move(tok));
  }
  return v;
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  Vocab v;
  if (tokens.size() < kNumSpecial || !std::equal(v.tokens_.begin(), v.tokens_.end(), tokens.begin())) {
    throw CorruptionError("vocabulary does not start with the special tokens");
  }
  v.tokens_ = std::move(tokens);
  v.index_.clear();
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.index_.emplace(v.tokens_[i], static_cast<std::int32_t>(i)).second) {
      throw CorruptionError("duplicate vocabulary token \"" + v.tokens_[i] + "\"");
    }
  }
  return v;
}

std::int32_t Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw DataError("token id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<std::int32_t> Vocab::lookup(std::span<const std::string> tokens) const {
  std::vector<std::int32_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

TokenSeq encode(std::string_view text, const Vocab& vocab, std::size_t max_len) {
  if (max_len < 2) throw ConfigError("max_len must be at least 2");
  const auto tokens = tokenize(text);
  TokenSeq seq;
  seq.original_length = tokens.size() + 2;
  const std::size_t keep = std::min(tokens.size(), max_len - 2);
  seq.ids.reserve(keep + 2);
  seq.ids.push_back(Vocab::kCls);
  for (std::size_t i = 0; i < keep; ++i) seq.ids.push_back(vocab.id(tokens[i]));
  seq.ids.push_back(Vocab::kSep);
  seq.attention_mask.assign(seq.ids.size(), 1);
  return seq;
}

std::vector<std::string> decode(std::span<const std::int32_t> ids, const Vocab& vocab) {
  std::vector<std::string> out;
  for (auto id : ids) {
    if (id >= 0 && static_cast<std::size_t>(id) < Vocab::kNumSpecial) continue;
    out.push_back(vocab.token(id));
  }
  return out;
}

// --- batching --------------------------------------------------------------------

std::size_t Batch::real_length(std::size_t r) const {
  auto m = row_mask(r);
  return static_cast<std::size_t>(std::count(m.begin(), m.end(), std::uint8_t{1}));
}

namespace {

std::vector<Batch> batch_in_order(std::span<const Record> records, std::span<const std::size_t> order,
                                  const Vocab& vocab, std::size_t batch_size, std::size_t max_len) {
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  std::vector<Batch> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    std::vector<TokenSeq> seqs;
    std::size_t cols = 0;
    for (std::size_t i = start; i < end; ++i) {
      seqs.push_back(encode(records[order[i]].text, vocab, max_len));
      cols = std::max(cols, seqs.back().ids.size());
    }
    Batch b;
    b.rows = end - start;
    b.cols = cols;
    b.ids.assign(b.rows * cols, Vocab::kPad);
    b.mask.assign(b.rows * cols, 0);
    for (std::size_t r = 0; r < b.rows; ++r) {
      std::copy(seqs[r].ids.begin(), seqs[r].ids.end(), b.ids.begin() + static_cast<std::ptrdiff_t>(r * cols));
      std::fill_n(b.mask.begin() + static_cast<std::ptrdiff_t>(r * cols), seqs[r].ids.size(), std::uint8_t{1});
      b.labels.push_back(records[order[start + r]].label);
      b.indices.push_back(order[start + r]);
    }
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace

std::vector<Batch> make_batches(std::span<const Record> records, const Vocab& vocab, std::size_t batch_size,
                                std::uint64_t seed, std::size_t max_len) {
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  return batch_in_order(records, order, vocab, batch_size, max_len);
}

std::vector<Batch> make_sequential_batches(std::span<const Record> records, const Vocab& vocab,
                                           std::size_t batch_size, std::size_t max_len) {
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  return batch_in_order(records, order, vocab, batch_size, max_len);
}

}  // namespace mgtd
