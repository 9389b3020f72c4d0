#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fhdr/adam.hpp"

namespace fhdr {

/// Binary container of named tensors.
///
/// Byte layout (all integers little-endian):
///
///   "FHDRCKPT"                      8 bytes magic
///   u32 version                     currently 1
///   u32 record_count
///   record_count times:
///     u32 name_length, name bytes   UTF-8, no terminator
///     u32 rank                      always 4
///     u64 extents[4]                (batch, channel, height, width)
///     f64 values[product(extents)]  IEEE-754 binary64, little-endian, row-major
///
/// Records are written in name order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const NamedTensors& tensors);
NamedTensors decode_checkpoint(std::span<const std::uint8_t> bytes, const std::string& origin = "<memory>");

/// Writes to a temporary sibling and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors load_checkpoint(const std::filesystem::path& path);

/// Atomically replaces `path` with `bytes` (write to a temporary sibling, then rename).
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

/// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(std::span<const std::uint8_t> bytes);
std::string fnv1a_hex(std::string_view text);

}  // namespace fhdr
