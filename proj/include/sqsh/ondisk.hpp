#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace sqsh {

inline constexpr uint32_t kMagic = 0x73717368;  // "sqsh"
inline constexpr uint64_t kTableAbsent = ~uint64_t{0};
inline constexpr uint32_t kNoFragment = 0xFFFFFFFF;
inline constexpr size_t kSuperblockSize = 96;
inline constexpr size_t kMetadataPayloadSize = 8192;
inline constexpr uint32_t kMinBlockSize = 4096;
inline constexpr uint32_t kMaxBlockSize = 1048576;

// superblock flag bits
inline constexpr uint16_t kFlagUncompressedInodes = 1u << 0;
inline constexpr uint16_t kFlagUncompressedData = 1u << 1;
inline constexpr uint16_t kFlagCheck = 1u << 2;
inline constexpr uint16_t kFlagUncompressedFragments = 1u << 3;
inline constexpr uint16_t kFlagNoFragments = 1u << 4;
inline constexpr uint16_t kFlagAlwaysFragments = 1u << 5;
inline constexpr uint16_t kFlagDuplicates = 1u << 6;
inline constexpr uint16_t kFlagExportable = 1u << 7;
inline constexpr uint16_t kFlagUncompressedXattrs = 1u << 8;
inline constexpr uint16_t kFlagNoXattrs = 1u << 9;
inline constexpr uint16_t kFlagCompressorOptions = 1u << 10;
inline constexpr uint16_t kFlagUncompressedIds = 1u << 11;

// Packed 48-bit block offset + 16-bit intra-block offset locating a
// record inside a metadata table.
struct meta_ref {
  uint64_t block_start = 0;   // metadata block offset relative to the table start
  uint16_t intra_offset = 0;  // position within the decompressed block

  uint64_t raw() const { return (block_start << 16) | intra_offset; }
  friend bool operator==(const meta_ref&, const meta_ref&) = default;
};

meta_ref decode_meta_ref(uint64_t raw);

struct superblock {
  uint32_t magic = 0;
  uint32_t inode_count = 0;
  uint32_t mkfs_time = 0;
  uint32_t block_size = 0;
  uint32_t fragment_count = 0;
  uint16_t compression = 0;
  uint16_t block_log = 0;
  uint16_t flags = 0;
  uint16_t id_count = 0;
  uint16_t version_major = 0;
  uint16_t version_minor = 0;
  meta_ref root_inode_ref;
  uint64_t bytes_used = 0;
  uint64_t id_table_start = 0;
  uint64_t xattr_id_table_start = kTableAbsent;
  uint64_t inode_table_start = 0;
  uint64_t directory_table_start = 0;
  uint64_t fragment_table_start = 0;
  uint64_t export_table_start = kTableAbsent;
};

// Decodes the fixed 96-byte first section. Expects exactly the bytes at
// image offset 0.
superblock parse_superblock(std::span<const uint8_t> bytes);

enum class inode_kind : uint16_t {
  basic_directory = 1,
  basic_file = 2,
  basic_symlink = 3,
  basic_block_device = 4,
  basic_char_device = 5,
  basic_fifo = 6,
  basic_socket = 7,
  extended_directory = 8,
  extended_file = 9,
  extended_symlink = 10,
  extended_block_device = 11,
  extended_char_device = 12,
  extended_fifo = 13,
  extended_socket = 14,
};

const char* inode_kind_name(inode_kind kind);

struct inode_header {
  uint16_t inode_type = 0;
  uint16_t permissions = 0;
  uint16_t uid_idx = 0;
  uint16_t gid_idx = 0;
  uint32_t mtime = 0;
  uint32_t inode_number = 0;
};

struct basic_directory {
  uint32_t start_block = 0;
  uint32_t nlink = 0;
  uint16_t file_size = 0;  // listing length + 3
  uint16_t block_offset = 0;
  uint32_t parent_inode = 0;
};

struct dir_index_rec {
  uint32_t index = 0;
  uint32_t start = 0;
  std::string name;
};

struct extended_directory {
  uint32_t nlink = 0;
  uint32_t file_size = 0;
  uint32_t start_block = 0;
  uint32_t parent_inode = 0;
  uint16_t index_count = 0;
  uint16_t block_offset = 0;
  uint32_t xattr_idx = 0;
  std::vector<dir_index_rec> indexes;
};

struct basic_file {
  uint32_t start_block = 0;
  uint32_t frag_index = kNoFragment;
  uint32_t frag_offset = 0;
  uint32_t file_size = 0;
  std::vector<uint32_t> block_sizes;
};

struct extended_file {
  uint64_t start_block = 0;
  uint64_t file_size = 0;
  uint64_t sparse = 0;
  uint32_t nlink = 0;
  uint32_t frag_index = kNoFragment;
  uint32_t frag_offset = 0;
  uint32_t xattr_idx = 0;
  std::vector<uint32_t> block_sizes;
};

struct basic_symlink {
  uint32_t nlink = 0;
  uint32_t target_size = 0;
  std::string target;
};

// Devices, fifos, sockets and extended symlinks: recognized and skipped
// over, listable by name and type, not readable. Raw body kept so the
// serialized form can be reproduced.
struct opaque_inode {
  std::vector<uint8_t> body;
};

struct inode {
  inode_header header;
  std::variant<basic_directory, extended_directory, basic_file, extended_file,
               basic_symlink, opaque_inode>
      body;

  inode_kind kind() const { return static_cast<inode_kind>(header.inode_type); }
  bool is_directory() const;
  bool is_file() const;
  bool is_symlink() const;

  // directories: listing length + 3; files: uncompressed content size;
  // symlinks: target length
  uint64_t size() const;
};

struct parsed_inode {
  inode node;
  size_t consumed = 0;
};

// Decodes one inode at `offset` within a decompressed table view and
// reports its exact serialized length so callers can step to the next.
parsed_inode parse_inode(std::span<const uint8_t> table, size_t offset,
                         const superblock& sb);

struct dir_header {
  uint32_t count = 0;  // true entry count (stored value + 1)
  uint32_t start = 0;
  uint32_t inode_number = 0;
};

struct parsed_dir_header {
  dir_header header;
  size_t consumed = 0;
};

parsed_dir_header parse_dir_header(std::span<const uint8_t> bytes, size_t offset);

struct dir_entry {
  uint16_t offset = 0;
  int16_t inode_delta = 0;
  uint16_t entry_type = 0;
  std::string name;  // true length (stored value + 1)
};

struct parsed_dir_entry {
  dir_entry entry;
  size_t consumed = 0;
};

parsed_dir_entry parse_dir_entry(std::span<const uint8_t> bytes, size_t offset);

struct fragment_entry {
  uint64_t start = 0;
  uint32_t size_word = 0;

  bool stored_raw() const { return (size_word & (1u << 24)) != 0; }
  uint32_t on_disk_size() const { return size_word & 0x00FFFFFF; }
};

fragment_entry parse_fragment_entry(std::span<const uint8_t> bytes, size_t offset);

// Data-block size words (file block lists and fragment entries share the
// encoding): bit 24 set means stored raw, low 24 bits are the on-disk
// size, an all-zero word is a sparse block.
inline constexpr uint32_t kDataBlockRawBit = 1u << 24;

inline bool data_block_sparse(uint32_t word) { return word == 0; }
inline bool data_block_stored_raw(uint32_t word) { return (word & kDataBlockRawBit) != 0; }
inline uint32_t data_block_on_disk_size(uint32_t word) { return word & 0x00FFFFFF; }

// Rejects words with bits above the raw flag set or a zero size that is
// not the sparse encoding.
void validate_data_size_word(uint32_t word);

}  // namespace sqsh
