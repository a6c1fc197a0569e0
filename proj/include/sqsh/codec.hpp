#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sqsh {

// Compression ids as stored in the superblock. All are recognized by
// name; only zlib is executable.
enum class compression_id : uint16_t {
  zlib = 1,
  lzma = 2,
  lzo = 3,
  xz = 4,
  lz4 = 5,
  zstd = 6,
};

std::string compression_name(uint16_t id);
bool compression_supported(uint16_t id);

// One-shot buffer-to-buffer inflation with a hard output bound.
std::vector<uint8_t> decompress(compression_id id, std::span<const uint8_t> input,
                                size_t max_output);

}  // namespace sqsh
