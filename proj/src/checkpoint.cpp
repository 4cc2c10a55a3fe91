// SPDX-License-Identifier: Apache-2.0
#include "mgtd/checkpoint.hpp"

#include <algorithm>

#include "mgtd/container.hpp"
#include "mgtd/errors.hpp"

namespace mgtd {

namespace {

const nlohmann::json& require(const nlohmann::json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw CorruptionError(std::string("manifest lacks '") + key + "'");
  return j[key];
}

void check_kind(const nlohmann::json& manifest, std::string_view kind) {
  const auto& k = require(manifest, "kind");
  if (!k.is_string() || k.get<std::string>() != kind) {
    throw CorruptionError("container holds '" + k.dump() + "', expected '" + std::string(kind) + "'");
  }
}

template <typename Fn>
auto guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(std::string("malformed manifest: ") + e.what());
  }
}

}  // namespace

std::string checkpoint_bytes(const Detector& detector) {
  Container c;
  auto& m = c.manifest;
  m["kind"] = "checkpoint";
  m["variant"] = to_json(detector.model.spec());
  m["vocab"] = detector.vocab.tokens();
  m["metadata"] = detector.metadata;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto* p : detector.model.parameters()) {
    tensors.push_back({{"name", p->name}, {"shape", p->value.shape()}, {"offset", c.blob.size()}, {"frozen", p->frozen}});
    c.blob.insert(c.blob.end(), p->value.values().begin(), p->value.values().end());
  }
  m["tensors"] = std::move(tensors);
  return encode_container(std::move(c));
}

Detector checkpoint_from_bytes(std::string_view bytes) {
  Container c = decode_container(bytes);
  check_kind(c.manifest, "checkpoint");
  return guarded([&] {
    const VariantSpec spec = variant_from_json(require(c.manifest, "variant"));
    Vocab vocab = Vocab::from_tokens(require(c.manifest, "vocab").get<std::vector<std::string>>());
    Detector d{std::move(vocab), Model<float>(spec, 0), require(c.manifest, "metadata")};
    const auto& tensors = require(c.manifest, "tensors");
    auto params = d.model.parameters();
    if (!tensors.is_array() || tensors.size() != params.size()) {
      throw CorruptionError("tensor directory lists " + std::to_string(tensors.size()) + " entries, model has " +
                            std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& t = tensors[i];
      auto* p = params[i];
      if (t.at("name").get<std::string>() != p->name || t.at("shape").get<Shape>() != p->value.shape()) {
        throw CorruptionError("tensor " + std::to_string(i) + " (" + t.at("name").get<std::string>() +
                              ") does not match the variant's parameter " + p->name);
      }
      const auto offset = t.at("offset").get<std::size_t>();
      if (offset > c.blob.size() || c.blob.size() - offset < p->size()) {
        throw CorruptionError("tensor " + p->name + " extends past the blob");
      }
      std::copy_n(c.blob.begin() + static_cast<std::ptrdiff_t>(offset), p->size(), p->value.data());
      p->frozen = t.at("frozen").get<bool>();
    }
    return d;
  });
}

void save_checkpoint(const Detector& detector, const std::filesystem::path& path) {
  write_file(path, checkpoint_bytes(detector));
}

Detector load_checkpoint(const std::filesystem::path& path) { return checkpoint_from_bytes(read_file(path)); }

std::size_t EmbeddingEntry::real_length() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

const EmbeddingEntry& EmbeddingTable::at(const std::string& id) const {
  auto it = entries.find(id);
  if (it == entries.end()) throw DataError("no precomputed embedding for record '" + id + "'");
  return it->second;
}

std::string embeddings_bytes(const EmbeddingTable& table) {
  Container c;
  c.manifest["kind"] = "embeddings";
  c.manifest["dim"] = table.dim;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [id, e] : table.entries) {
    if (e.hidden.cols() != table.dim || e.hidden.rows() != e.mask.size()) {
      throw ShapeError("embedding entry '" + id + "' has shape " + shape_string(e.hidden.shape()));
    }
    std::string mask(e.mask.size(), '0');
    for (std::size_t r = 0; r < e.mask.size(); ++r) mask[r] = e.mask[r] ? '1' : '0';
    entries.push_back({{"id", id}, {"rows", e.hidden.rows()}, {"offset", c.blob.size()}, {"mask", mask}});
    c.blob.insert(c.blob.end(), e.hidden.values().begin(), e.hidden.values().end());
  }
  c.manifest["entries"] = std::move(entries);
  return encode_container(std::move(c));
}

EmbeddingTable embeddings_from_bytes(std::string_view bytes) {
  Container c = decode_container(bytes);
  check_kind(c.manifest, "embeddings");
  return guarded([&] {
    EmbeddingTable table;
    table.dim = require(c.manifest, "dim").get<std::size_t>();
    if (table.dim == 0) throw CorruptionError("embedding width is zero");
    for (const auto& e : require(c.manifest, "entries")) {
      const auto rows = e.at("rows").get<std::size_t>();
      const auto offset = e.at("offset").get<std::size_t>();
      const auto mask = e.at("mask").get<std::string>();
      const std::string id = e.at("id").get<std::string>();
      if (mask.size() != rows) throw CorruptionError("mask length mismatch for '" + id + "'");
      const std::size_t n = rows * table.dim;
      if (offset > c.blob.size() || c.blob.size() - offset < n) {
        throw CorruptionError("embedding '" + id + "' extends past the blob");
      }
      EmbeddingEntry entry;
      entry.hidden = Tensor<float>(
          {rows, table.dim},
          std::vector<float>(c.blob.begin() + static_cast<std::ptrdiff_t>(offset),
                             c.blob.begin() + static_cast<std::ptrdiff_t>(offset + n)));
      for (char ch : mask) entry.mask.push_back(ch == '1' ? 1 : 0);
      if (!table.entries.emplace(id, std::move(entry)).second) throw CorruptionError("duplicate embedding id '" + id + "'");
    }
    return table;
  });
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
  write_file(path, embeddings_bytes(table));
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) { return embeddings_from_bytes(read_file(path)); }

}  // namespace mgtd
