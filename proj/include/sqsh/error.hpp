#pragma once

#include <stdexcept>
#include <string>

namespace sqsh {

// Typed failure reasons. Tests assert on these; the CLI maps them onto
// its exit codes.
enum class errc {
  // storage
  not_found,
  permission_denied,
  empty_file,
  out_of_bounds,
  io_failure,
  // on-disk decoding
  bad_magic,
  unsupported_version,
  corrupt_superblock,
  invalid_ref,
  unknown_inode_type,
  truncated_inode,
  bad_block_list,
  truncated_header,
  truncated_entry,
  empty_name,
  corrupt_directory,
  // codec
  unsupported_compression,
  corrupt_stream,
  output_overflow,
  // metadata tables
  truncated_block,
  oversize_block,
  truncated_table,
  corrupt_table,
  index_out_of_range,
  // vfs
  not_a_directory,
  is_a_directory,
  not_readable,
  symlink_loop,
  fragment_index_out_of_range,
  // cli and conformance harness
  usage,
  tool_missing,
  builder_failed,
};

const char* errc_name(errc code) noexcept;

class error : public std::runtime_error {
public:
  error(errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  errc code() const noexcept { return code_; }

private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& message) {
  throw error(code, message);
}

}  // namespace sqsh
