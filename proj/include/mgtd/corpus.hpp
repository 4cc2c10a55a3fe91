// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

namespace mgtd {

inline constexpr int kHuman = 0;
inline constexpr int kMachine = 1;

/// One labeled sample. label 0 = human, 1 = machine.
struct Record {
  std::string id;
  std::string text;
  int label = kHuman;
  std::string generator;
  std::string domain;

  friend bool operator==(const Record&, const Record&) = default;
};

/// JSON field names for each Record member, plus label polarity.
struct FieldMap {
  std::string id = "id";
  std::string text = "text";
  std::string label = "label";
  std::string generator = "model";
  std::string domain = "source";
  bool flip_labels = false;  // set when the file uses 1 = human
};

/// Reads one JSON object per line. Blank lines are skipped; the record id
/// falls back to the 1-based line number when the id field is absent.
std::vector<Record> load_jsonl(const std::filesystem::path& path, const FieldMap& fields = {});
std::vector<Record> parse_jsonl(std::istream& in, const FieldMap& fields = {}, std::string_view source = "<stream>");
void write_jsonl(std::ostream& out, std::span<const Record> records);

/// Counts over the (generator x domain) grid.
struct CorpusStats {
  std::map<std::pair<std::string, std::string>, std::size_t> counts;  // (generator, domain)
  std::map<std::string, std::size_t> generator_totals;
  std::map<std::string, std::size_t> domain_totals;
  std::size_t total = 0;

  std::size_t count(const std::string& generator, const std::string& domain) const;
  /// Sorted, with "human" moved to the end.
  std::vector<std::string> generators() const;
  std::vector<std::string> domains() const;
};

CorpusStats corpus_stats(std::span<const Record> records);
std::string render_stats_table(const CorpusStats& stats);
nlohmann::json stats_json(const CorpusStats& stats);

/// Lowercases ASCII, splits on whitespace and detaches every ASCII
/// punctuation character as its own token.
std::vector<std::string> tokenize(std::string_view text);

class Vocab {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kCls = 1;
  static constexpr std::int32_t kSep = 2;
  static constexpr std::int32_t kUnk = 3;
  static constexpr std::size_t kNumSpecial = 4;

  Vocab();

  /// Frequency-ranked vocabulary (ties broken lexicographically), truncated
  /// to max_size entries including the four specials.
  static Vocab build(std::span<const Record> records, std::size_t max_size);

  /// Rebuilds from an id-ordered token list whose first four entries are the
  /// specials.
  static Vocab from_tokens(std::vector<std::string> tokens);

  std::int32_t id(std::string_view token) const;
  const std::string& token(std::int32_t id) const;
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  std::vector<std::int32_t> lookup(std::span<const std::string> tokens) const;

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
};

struct TokenSeq {
  std::vector<std::int32_t> ids;
  std::vector<std::uint8_t> attention_mask;
  std::size_t original_length = 0;  // [CLS] + tokens + [SEP] before truncation
};

/// [CLS] tokens... [SEP], truncated so the result fits max_len with [SEP]
/// kept last. max_len must be at least 2.
TokenSeq encode(std::string_view text, const Vocab& vocab, std::size_t max_len = 512);

/// Inverse of encode for in-vocabulary tokens; specials are dropped.
std::vector<std::string> decode(std::span<const std::int32_t> ids, const Vocab& vocab);

/// A padded mini-batch. PAD only appears as a row suffix.
struct Batch {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int32_t> ids;      // rows x cols
  std::vector<std::uint8_t> mask;     // rows x cols
  std::vector<int> labels;            // rows
  std::vector<std::size_t> indices;   // position of each row in the input record list

  std::span<const std::int32_t> row_ids(std::size_t r) const { return {ids.data() + r * cols, cols}; }
  std::span<const std::uint8_t> row_mask(std::size_t r) const { return {mask.data() + r * cols, cols}; }
  std::size_t real_length(std::size_t r) const;

  friend bool operator==(const Batch&, const Batch&) = default;
};

/// Seeded shuffle followed by per-batch padding to the longest row.
std::vector<Batch> make_batches(std::span<const Record> records, const Vocab& vocab, std::size_t batch_size,
                                std::uint64_t seed, std::size_t max_len = 512);

/// Batches in input order without shuffling.
std::vector<Batch> make_sequential_batches(std::span<const Record> records, const Vocab& vocab,
                                           std::size_t batch_size, std::size_t max_len = 512);

}  // namespace mgtd
