#include "sqsh/ondisk.hpp"

#include "sqsh/bytes.hpp"
#include "sqsh/error.hpp"

namespace sqsh {

using detail::load_le16;
using detail::load_le16s;
using detail::load_le32;
using detail::load_le64;

namespace {

std::string hex(uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

meta_ref decode_meta_ref(uint64_t raw) {
  meta_ref ref;
  ref.block_start = raw >> 16;
  ref.intra_offset = static_cast<uint16_t>(raw & 0xFFFF);
  if (ref.intra_offset >= kMetadataPayloadSize)
    fail(errc::invalid_ref, "metadata reference " + hex(raw) + " has intra-block offset " +
                                std::to_string(ref.intra_offset) + " >= 8192");
  return ref;
}

superblock parse_superblock(std::span<const uint8_t> bytes) {
  if (bytes.size() != kSuperblockSize)
    fail(errc::corrupt_superblock,
         "superblock must be exactly 96 bytes, got " + std::to_string(bytes.size()));

  superblock sb;
  sb.magic = load_le32(bytes, 0);
  if (sb.magic != kMagic)
    fail(errc::bad_magic, "bad magic " + hex(sb.magic) + ", not a SquashFS image");

  sb.inode_count = load_le32(bytes, 4);
  sb.mkfs_time = load_le32(bytes, 8);
  sb.block_size = load_le32(bytes, 12);
  sb.fragment_count = load_le32(bytes, 16);
  sb.compression = load_le16(bytes, 20);
  sb.block_log = load_le16(bytes, 22);
  sb.flags = load_le16(bytes, 24);
  sb.id_count = load_le16(bytes, 26);
  sb.version_major = load_le16(bytes, 28);
  sb.version_minor = load_le16(bytes, 30);

  if (sb.version_major != 4)
    fail(errc::unsupported_version, "unsupported version " + std::to_string(sb.version_major) +
                                        "." + std::to_string(sb.version_minor));
  if (sb.version_minor != 0)
    fail(errc::unsupported_version,
         "unsupported minor version " + std::to_string(sb.version_minor));

  if (sb.block_log > 20 || sb.block_size != (uint32_t{1} << sb.block_log) ||
      sb.block_size < kMinBlockSize || sb.block_size > kMaxBlockSize)
    fail(errc::corrupt_superblock,
         "block size " + std::to_string(sb.block_size) + " does not match block log " +
             std::to_string(sb.block_log));

  sb.root_inode_ref = decode_meta_ref(load_le64(bytes, 32));
  sb.bytes_used = load_le64(bytes, 40);
  sb.id_table_start = load_le64(bytes, 48);
  sb.xattr_id_table_start = load_le64(bytes, 56);
  sb.inode_table_start = load_le64(bytes, 64);
  sb.directory_table_start = load_le64(bytes, 72);
  sb.fragment_table_start = load_le64(bytes, 80);
  sb.export_table_start = load_le64(bytes, 88);

  if (sb.inode_table_start >= sb.directory_table_start)
    fail(errc::corrupt_superblock,
         "inode table at " + hex(sb.inode_table_start) + " does not precede directory table at " +
             hex(sb.directory_table_start));
  return sb;
}

const char* inode_kind_name(inode_kind kind) {
  switch (kind) {
    case inode_kind::basic_directory: return "Basic Directory";
    case inode_kind::basic_file: return "Basic File";
    case inode_kind::basic_symlink: return "Basic Symlink";
    case inode_kind::basic_block_device: return "Basic Block Device";
    case inode_kind::basic_char_device: return "Basic Character Device";
    case inode_kind::basic_fifo: return "Basic Fifo";
    case inode_kind::basic_socket: return "Basic Socket";
    case inode_kind::extended_directory: return "Extended Directory";
    case inode_kind::extended_file: return "Extended File";
    case inode_kind::extended_symlink: return "Extended Symlink";
    case inode_kind::extended_block_device: return "Extended Block Device";
    case inode_kind::extended_char_device: return "Extended Character Device";
    case inode_kind::extended_fifo: return "Extended Fifo";
    case inode_kind::extended_socket: return "Extended Socket";
  }
  return "Unknown";
}

bool inode::is_directory() const {
  return kind() == inode_kind::basic_directory || kind() == inode_kind::extended_directory;
}

bool inode::is_file() const {
  return kind() == inode_kind::basic_file || kind() == inode_kind::extended_file;
}

bool inode::is_symlink() const { return kind() == inode_kind::basic_symlink; }

uint64_t inode::size() const {
  if (const auto* d = std::get_if<basic_directory>(&body)) return d->file_size;
  if (const auto* d = std::get_if<extended_directory>(&body)) return d->file_size;
  if (const auto* f = std::get_if<basic_file>(&body)) return f->file_size;
  if (const auto* f = std::get_if<extended_file>(&body)) return f->file_size;
  if (const auto* s = std::get_if<basic_symlink>(&body)) return s->target_size;
  return 0;
}

namespace {

// Block-list length is computed, not stored: a file with a fragment tail
// lists only its full blocks.
uint64_t block_list_count(uint64_t file_size, uint32_t frag_index, uint32_t block_size) {
  if (frag_index == kNoFragment) return (file_size + block_size - 1) / block_size;
  return file_size / block_size;
}

struct cursor {
  std::span<const uint8_t> bytes;
  size_t pos;

  size_t remaining() const { return bytes.size() - pos; }

  void need(size_t n, errc code, const char* what) const {
    if (remaining() < n)
      fail(code, std::string(what) + ": need " + std::to_string(n) + " bytes, have " +
                     std::to_string(remaining()));
  }

  uint16_t u16() { uint16_t v = load_le16(bytes, pos); pos += 2; return v; }
  int16_t s16() { int16_t v = load_le16s(bytes, pos); pos += 2; return v; }
  uint32_t u32() { uint32_t v = load_le32(bytes, pos); pos += 4; return v; }
  uint64_t u64() { uint64_t v = load_le64(bytes, pos); pos += 8; return v; }

  std::string str(size_t n) {
    std::string s(reinterpret_cast<const char*>(bytes.data()) + pos, n);
    pos += n;
    return s;
  }

  std::vector<uint8_t> raw(size_t n) {
    std::vector<uint8_t> v(bytes.begin() + pos, bytes.begin() + pos + n);
    pos += n;
    return v;
  }
};

std::vector<uint32_t> read_block_list(cursor& c, uint64_t count) {
  if (c.remaining() / 4 < count)
    fail(errc::bad_block_list, "block list of " + std::to_string(count) +
                                   " entries extends past table end");
  std::vector<uint32_t> sizes;
  sizes.reserve(count);
  for (uint64_t i = 0; i < count; ++i) sizes.push_back(c.u32());
  return sizes;
}

}  // namespace

parsed_inode parse_inode(std::span<const uint8_t> table, size_t offset, const superblock& sb) {
  if (offset > table.size())
    fail(errc::truncated_inode, "inode offset past table end");
  cursor c{table, offset};
  c.need(16, errc::truncated_inode, "inode header");

  inode node;
  node.header.inode_type = c.u16();
  node.header.permissions = c.u16();
  node.header.uid_idx = c.u16();
  node.header.gid_idx = c.u16();
  node.header.mtime = c.u32();
  node.header.inode_number = c.u32();

  if (node.header.inode_type < 1 || node.header.inode_type > 14)
    fail(errc::unknown_inode_type,
         "unknown inode type " + std::to_string(node.header.inode_type));
  if (node.header.inode_number < 1 || node.header.inode_number > sb.inode_count)
    fail(errc::truncated_inode, "inode number " + std::to_string(node.header.inode_number) +
                                    " outside 1.." + std::to_string(sb.inode_count));

  auto check_parent = [&](uint32_t parent) {
    if (parent > sb.inode_count + 1)
      fail(errc::truncated_inode,
           "parent inode " + std::to_string(parent) + " outside the inode table");
  };

  switch (node.kind()) {
    case inode_kind::basic_directory: {
      c.need(16, errc::truncated_inode, "basic directory inode");
      basic_directory d;
      d.start_block = c.u32();
      d.nlink = c.u32();
      d.file_size = c.u16();
      d.block_offset = c.u16();
      d.parent_inode = c.u32();
      check_parent(d.parent_inode);
      node.body = std::move(d);
      break;
    }
    case inode_kind::extended_directory: {
      c.need(24, errc::truncated_inode, "extended directory inode");
      extended_directory d;
      d.nlink = c.u32();
      d.file_size = c.u32();
      d.start_block = c.u32();
      d.parent_inode = c.u32();
      d.index_count = c.u16();
      d.block_offset = c.u16();
      d.xattr_idx = c.u32();
      check_parent(d.parent_inode);
      d.indexes.reserve(d.index_count);
      for (uint16_t i = 0; i < d.index_count; ++i) {
        c.need(12, errc::truncated_inode, "directory index");
        dir_index_rec rec;
        rec.index = c.u32();
        rec.start = c.u32();
        size_t name_len = size_t{c.u32()} + 1;
        c.need(name_len, errc::truncated_inode, "directory index name");
        rec.name = c.str(name_len);
        d.indexes.push_back(std::move(rec));
      }
      node.body = std::move(d);
      break;
    }
    case inode_kind::basic_file: {
      c.need(16, errc::truncated_inode, "basic file inode");
      basic_file f;
      f.start_block = c.u32();
      f.frag_index = c.u32();
      f.frag_offset = c.u32();
      f.file_size = c.u32();
      f.block_sizes = read_block_list(c, block_list_count(f.file_size, f.frag_index, sb.block_size));
      for (uint32_t w : f.block_sizes) validate_data_size_word(w);
      node.body = std::move(f);
      break;
    }
    case inode_kind::extended_file: {
      c.need(40, errc::truncated_inode, "extended file inode");
      extended_file f;
      f.start_block = c.u64();
      f.file_size = c.u64();
      f.sparse = c.u64();
      f.nlink = c.u32();
      f.frag_index = c.u32();
      f.frag_offset = c.u32();
      f.xattr_idx = c.u32();
      f.block_sizes = read_block_list(c, block_list_count(f.file_size, f.frag_index, sb.block_size));
      for (uint32_t w : f.block_sizes) validate_data_size_word(w);
      node.body = std::move(f);
      break;
    }
    case inode_kind::basic_symlink: {
      c.need(8, errc::truncated_inode, "symlink inode");
      basic_symlink s;
      s.nlink = c.u32();
      s.target_size = c.u32();
      c.need(s.target_size, errc::truncated_inode, "symlink target");
      s.target = c.str(s.target_size);
      node.body = std::move(s);
      break;
    }
    case inode_kind::extended_symlink: {
      c.need(8, errc::truncated_inode, "extended symlink inode");
      size_t body_start = c.pos;
      c.pos += 4;  // nlink
      size_t target_size = c.u32();
      c.need(target_size + 4, errc::truncated_inode, "extended symlink target");
      c.pos += target_size + 4;  // target + xattr index
      node.body = opaque_inode{std::vector<uint8_t>(table.begin() + body_start,
                                                    table.begin() + c.pos)};
      break;
    }
    case inode_kind::basic_block_device:
    case inode_kind::basic_char_device: {
      c.need(8, errc::truncated_inode, "device inode");
      node.body = opaque_inode{c.raw(8)};
      break;
    }
    case inode_kind::basic_fifo:
    case inode_kind::basic_socket: {
      c.need(4, errc::truncated_inode, "ipc inode");
      node.body = opaque_inode{c.raw(4)};
      break;
    }
    case inode_kind::extended_block_device:
    case inode_kind::extended_char_device: {
      c.need(12, errc::truncated_inode, "extended device inode");
      node.body = opaque_inode{c.raw(12)};
      break;
    }
    case inode_kind::extended_fifo:
    case inode_kind::extended_socket: {
      c.need(8, errc::truncated_inode, "extended ipc inode");
      node.body = opaque_inode{c.raw(8)};
      break;
    }
  }
  return {std::move(node), c.pos - offset};
}

parsed_dir_header parse_dir_header(std::span<const uint8_t> bytes, size_t offset) {
  if (offset > bytes.size())
    fail(errc::truncated_header, "directory header offset past end");
  cursor c{bytes, offset};
  c.need(12, errc::truncated_header, "directory header");

  dir_header h;
  uint32_t stored = c.u32();
  if (stored > 255)
    fail(errc::corrupt_directory,
         "directory header claims " + std::to_string(stored + 1) + " entries, limit is 256");
  h.count = stored + 1;
  h.start = c.u32();
  h.inode_number = c.u32();
  return {h, c.pos - offset};
}

parsed_dir_entry parse_dir_entry(std::span<const uint8_t> bytes, size_t offset) {
  if (offset > bytes.size())
    fail(errc::truncated_entry, "directory entry offset past end");
  cursor c{bytes, offset};
  c.need(8, errc::truncated_entry, "directory entry");

  dir_entry e;
  e.offset = c.u16();
  e.inode_delta = c.s16();
  e.entry_type = c.u16();
  uint16_t stored = c.u16();
  if (stored > 255)
    fail(errc::corrupt_directory,
         "entry name of " + std::to_string(stored + 1) + " bytes exceeds the 256-byte limit");
  size_t name_len = size_t{stored} + 1;
  c.need(name_len, errc::truncated_entry, "entry name");
  e.name = c.str(name_len);
  if (e.name.empty())
    fail(errc::empty_name, "directory entry with empty name");
  for (char ch : e.name)
    if (ch == '/' || ch == '\0')
      fail(errc::corrupt_directory, "entry name contains '/' or NUL");
  return {std::move(e), c.pos - offset};
}

fragment_entry parse_fragment_entry(std::span<const uint8_t> bytes, size_t offset) {
  cursor c{bytes, offset};
  c.need(16, errc::truncated_table, "fragment entry");
  fragment_entry e;
  e.start = c.u64();
  e.size_word = c.u32();
  c.u32();  // unused
  return e;
}

void validate_data_size_word(uint32_t word) {
  if (word == 0) return;  // sparse
  if ((word & 0xFE000000u) != 0)
    fail(errc::corrupt_stream, "data block size word " + hex(word) + " has reserved bits set");
  if (data_block_on_disk_size(word) == 0)
    fail(errc::corrupt_stream, "data block size word " + hex(word) + " encodes a zero size");
}

}  // namespace sqsh
