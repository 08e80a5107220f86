#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cpath::io {

/// Binary tensor container shared by checkpoints (.sslh) and feature files.
///
///   "SSLH" | u32 version | u32 entry_count | entries... | u32 crc32
///   entry: u32 name_len | name (utf-8) | u8 dtype | u32 rank | u64 dims[rank] | payload
///
/// All integers and f32 payloads are little-endian. The CRC covers every byte
/// between the version field and the checksum itself.
inline constexpr std::uint32_t kContainerVersion = 1;

enum class DType : std::uint8_t { f32 = 1, u8 = 2 };

struct Entry {
  std::string name;
  DType dtype = DType::f32;
  std::vector<std::uint64_t> dims;
  std::vector<float> f32;
  std::vector<std::uint8_t> bytes;

  static Entry floats(std::string name, std::vector<std::uint64_t> dims, std::vector<float> values);
  static Entry text(std::string name, const std::string& value);
  std::string as_text() const;
};

std::vector<std::uint8_t> encode_container(const std::vector<Entry>& entries);
/// Throws ParseError (truncation, bad magic, duplicate names), VersionError
/// or ChecksumError.
std::vector<Entry> decode_container(const std::vector<std::uint8_t>& bytes);

void write_container(const std::filesystem::path& path, const std::vector<Entry>& entries);
std::vector<Entry> read_container(const std::filesystem::path& path);

}  // namespace cpath::io
