// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mgtd/model.hpp"
#include "mgtd/tensor.hpp"

namespace mgtd {

/// Manifest: kind "checkpoint", variant spec, vocab tokens, a tensor
/// directory {name, shape, offset, frozen} in parameter order, and metadata.
std::string checkpoint_bytes(const Detector& detector);
Detector checkpoint_from_bytes(std::string_view bytes);

void save_checkpoint(const Detector& detector, const std::filesystem::path& path);
Detector load_checkpoint(const std::filesystem::path& path);

/// Hidden states for one record: rows x dim, mask[r] = 1 for real rows.
struct EmbeddingEntry {
  Tensor<float> hidden;
  std::vector<std::uint8_t> mask;

  std::size_t real_length() const;
};

/// Precomputed encoder outputs keyed by record id.
struct EmbeddingTable {
  std::size_t dim = 0;
  std::map<std::string, EmbeddingEntry> entries;

  const EmbeddingEntry& at(const std::string& id) const;
};

std::string embeddings_bytes(const EmbeddingTable& table);
EmbeddingTable embeddings_from_bytes(std::string_view bytes);

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);
EmbeddingTable load_embeddings(const std::filesystem::path& path);

}  // namespace mgtd
