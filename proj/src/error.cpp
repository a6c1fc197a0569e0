#include "sqsh/error.hpp"

namespace sqsh {

const char* errc_name(errc code) noexcept {
  switch (code) {
    case errc::not_found: return "not_found";
    case errc::permission_denied: return "permission_denied";
    case errc::empty_file: return "empty_file";
    case errc::out_of_bounds: return "out_of_bounds";
    case errc::io_failure: return "io_failure";
    case errc::bad_magic: return "bad_magic";
    case errc::unsupported_version: return "unsupported_version";
    case errc::corrupt_superblock: return "corrupt_superblock";
    case errc::invalid_ref: return "invalid_ref";
    case errc::unknown_inode_type: return "unknown_inode_type";
    case errc::truncated_inode: return "truncated_inode";
    case errc::bad_block_list: return "bad_block_list";
    case errc::truncated_header: return "truncated_header";
    case errc::truncated_entry: return "truncated_entry";
    case errc::empty_name: return "empty_name";
    case errc::corrupt_directory: return "corrupt_directory";
    case errc::unsupported_compression: return "unsupported_compression";
    case errc::corrupt_stream: return "corrupt_stream";
    case errc::output_overflow: return "output_overflow";
    case errc::truncated_block: return "truncated_block";
    case errc::oversize_block: return "oversize_block";
    case errc::truncated_table: return "truncated_table";
    case errc::corrupt_table: return "corrupt_table";
    case errc::index_out_of_range: return "index_out_of_range";
    case errc::not_a_directory: return "not_a_directory";
    case errc::is_a_directory: return "is_a_directory";
    case errc::not_readable: return "not_readable";
    case errc::symlink_loop: return "symlink_loop";
    case errc::fragment_index_out_of_range: return "fragment_index_out_of_range";
    case errc::usage: return "usage";
    case errc::tool_missing: return "tool_missing";
    case errc::builder_failed: return "builder_failed";
  }
  return "unknown";
}

}  // namespace sqsh
