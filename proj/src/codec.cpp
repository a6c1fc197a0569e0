#include "sqsh/codec.hpp"

#include <zlib.h>

#include "sqsh/error.hpp"

namespace sqsh {

std::string compression_name(uint16_t id) {
  switch (static_cast<compression_id>(id)) {
    case compression_id::zlib: return "zlib";
    case compression_id::lzma: return "lzma";
    case compression_id::lzo: return "lzo";
    case compression_id::xz: return "xz";
    case compression_id::lz4: return "lz4";
    case compression_id::zstd: return "zstd";
  }
  return "unknown(" + std::to_string(id) + ")";
}

bool compression_supported(uint16_t id) {
  return static_cast<compression_id>(id) == compression_id::zlib;
}

std::vector<uint8_t> decompress(compression_id id, std::span<const uint8_t> input,
                                size_t max_output) {
  if (id != compression_id::zlib)
    fail(errc::unsupported_compression,
         "unsupported compression: " + compression_name(static_cast<uint16_t>(id)));
  if (input.empty())
    fail(errc::corrupt_stream, "empty compressed stream");
  if (max_output == 0)
    fail(errc::output_overflow, "zero-size output bound");

  std::vector<uint8_t> out(max_output);

  z_stream strm{};
  strm.next_in = const_cast<Bytef*>(input.data());
  strm.avail_in = static_cast<uInt>(input.size());
  strm.next_out = out.data();
  strm.avail_out = static_cast<uInt>(out.size());

  if (inflateInit(&strm) != Z_OK)
    fail(errc::io_failure, "inflateInit failed");

  int rc = inflate(&strm, Z_FINISH);
  size_t produced = out.size() - strm.avail_out;
  bool input_left = strm.avail_in != 0;
  inflateEnd(&strm);

  if (rc == Z_BUF_ERROR || (rc == Z_OK && produced == out.size()))
    fail(errc::output_overflow,
         "inflated size exceeds bound of " + std::to_string(max_output) + " bytes");
  if (rc != Z_STREAM_END)
    fail(errc::corrupt_stream, "corrupt deflate stream");
  if (input_left)
    fail(errc::corrupt_stream, "trailing bytes after deflate stream");

  out.resize(produced);
  return out;
}

}  // namespace sqsh
