#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace sqsh::detail {

// Bytewise little-endian loads. Multi-byte values are assembled from
// individual bytes and never reinterpreted in place, so views at any
// alignment decode identically.
inline uint16_t load_le16(std::span<const uint8_t> b, size_t off) {
  return static_cast<uint16_t>(uint16_t{b[off]} | (uint16_t{b[off + 1]} << 8));
}

inline uint32_t load_le32(std::span<const uint8_t> b, size_t off) {
  return uint32_t{b[off]} | (uint32_t{b[off + 1]} << 8) |
         (uint32_t{b[off + 2]} << 16) | (uint32_t{b[off + 3]} << 24);
}

inline uint64_t load_le64(std::span<const uint8_t> b, size_t off) {
  return uint64_t{load_le32(b, off)} | (uint64_t{load_le32(b, off + 4)} << 32);
}

inline int16_t load_le16s(std::span<const uint8_t> b, size_t off) {
  return static_cast<int16_t>(load_le16(b, off));
}

}  // namespace sqsh::detail
