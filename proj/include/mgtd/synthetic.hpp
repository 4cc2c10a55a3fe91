// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mgtd/corpus.hpp"

// Generated corpora with known structure, used by the acceptance suite and
// the `synth` subcommand.
//
// Machine sentences are verbatim copies of 20 fixed templates over the tokens
// m00..m49. Human sentences are random token strings over the disjoint
// tokens h00..h49.

namespace mgtd::synthetic {

inline constexpr std::size_t kTemplateCount = 20;
inline constexpr std::size_t kTokensPerClass = 50;
inline constexpr double kMaxZipfExponent = 2.0;

/// The fixed template set; independent of any user seed.
const std::vector<std::string>& machine_templates();

/// `count` records, half machine (templates) and half human (uniform random
/// 10-30 token strings), shuffled.
std::vector<Record> detection_corpus(std::size_t count, std::uint64_t seed);

/// Template sentences only.
std::vector<Record> template_sentences(std::size_t count, std::uint64_t seed, std::string_view id_prefix = "m");

/// Human sentences whose predictability varies per sentence: each draws a
/// Zipf exponent in [0, kMaxZipfExponent] and samples 10-30 tokens from the
/// Zipf law over the fixed ranking h00..h49 (exponent 0 is uniform).
std::vector<Record> variable_entropy_sentences(std::size_t count, std::uint64_t seed,
                                               std::string_view id_prefix = "h");

/// First round(fraction * n) records and the remainder.
std::pair<std::vector<Record>, std::vector<Record>> split(std::span<const Record> records, double fraction);

}  // namespace mgtd::synthetic
