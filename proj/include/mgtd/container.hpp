// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

// Binary container shared by checkpoints and embedding tables:
//
//   "MGTD" | u32 version | u64 manifest length | manifest JSON | f32 blob
//
// All integers and floats are little-endian. The manifest's "blob_floats"
// field records the blob length in floats.

namespace mgtd {

inline constexpr std::uint32_t kContainerVersion = 1;

struct Container {
  nlohmann::json manifest;
  std::vector<float> blob;
};

/// Sets manifest["blob_floats"] and serializes.
std::string encode_container(Container container);

/// Throws CorruptionError on bad magic, truncation or a blob whose size
/// disagrees with the manifest, and FormatError on an unknown version.
Container decode_container(std::string_view bytes);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace mgtd
