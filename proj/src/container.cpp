// SPDX-License-Identifier: Apache-2.0
#include "mgtd/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mgtd/errors.hpp"

namespace mgtd {

namespace {

constexpr char kMagic[4] = {'M', 'G', 'T', 'D'};
constexpr std::size_t kHeaderSize = 4 + 4 + 8;

template <typename U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

template <typename U>
U get_le(std::string_view bytes, std::size_t offset) {
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    value |= static_cast<U>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  }
  return value;
}

}  // namespace

std::string encode_container(Container container) {
  container.manifest["blob_floats"] = container.blob.size();
  const std::string manifest = container.manifest.dump();
  std::string out;
  out.reserve(kHeaderSize + manifest.size() + 4 * container.blob.size());
  out.append(kMagic, 4);
  put_le<std::uint32_t>(out, kContainerVersion);
  put_le<std::uint64_t>(out, manifest.size());
  out += manifest;
  for (float f : container.blob) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

Container decode_container(std::string_view bytes) {
  if (bytes.size() < kHeaderSize || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CorruptionError("not an MGTD container (bad magic or short header)");
  }
  const auto version = get_le<std::uint32_t>(bytes, 4);
  if (version != kContainerVersion) {
    throw FormatError("unsupported container version " + std::to_string(version) + " (expected " +
                      std::to_string(kContainerVersion) + ")");
  }
  const auto manifest_len = get_le<std::uint64_t>(bytes, 8);
  if (manifest_len > bytes.size() - kHeaderSize) throw CorruptionError("manifest extends past end of file");

  Container c;
  try {
    c.manifest = nlohmann::json::parse(bytes.substr(kHeaderSize, manifest_len));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!c.manifest.is_object() || !c.manifest.contains("blob_floats") ||
      !c.manifest["blob_floats"].is_number_unsigned()) {
    throw CorruptionError("manifest lacks blob_floats");
  }
  const auto floats = c.manifest["blob_floats"].get<std::uint64_t>();
  const std::size_t blob_bytes = bytes.size() - kHeaderSize - manifest_len;
  if (blob_bytes != 4 * floats) {
    throw CorruptionError("blob holds " + std::to_string(blob_bytes) + " bytes but the manifest declares " +
                          std::to_string(floats) + " floats");
  }
  c.blob.resize(floats);
  const std::size_t base = kHeaderSize + manifest_len;
  for (std::size_t i = 0; i < floats; ++i) c.blob[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, base + 4 * i));
  return c;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace mgtd
