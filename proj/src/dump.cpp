#include "sqsh/dump.hpp"

#include <cctype>
#include <cinttypes>
#include <cstdarg>
#include <cstdio>
#include <ctime>
#include <map>

#include "sqsh/error.hpp"

namespace sqsh {

namespace {

std::string fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));

std::string fmt(const char* format, ...) {
  char buf[256];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::string render_time(uint32_t seconds, time_rendering tz) {
  static const char* const kDays[] = {"Sun", "Mon", "Tue", "Wed", "Thu", "Fri", "Sat"};
  time_t t = static_cast<time_t>(seconds);
  struct tm tm {};
  const char* zone = "UTC";
  if (tz == time_rendering::local) {
    localtime_r(&t, &tm);
    zone = tm.tm_zone ? tm.tm_zone : "local";
  } else {
    gmtime_r(&t, &tm);
  }
  return fmt("%s %04d-%02d-%02d (yyyy-mm-dd) %02d:%02d:%02d %s", kDays[tm.tm_wday],
             tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
             zone);
}

std::string render_magic(uint32_t magic) {
  // Most-significant byte first, the way the four characters read.
  std::string s;
  for (int shift = 24; shift >= 0; shift -= 8) {
    char c = static_cast<char>((magic >> shift) & 0xFF);
    s += std::isprint(static_cast<unsigned char>(c)) ? c : '.';
  }
  return s;
}

std::string render_block_size(uint32_t block_size) {
  if (block_size % (1024 * 1024) == 0)
    return fmt("%u (%u MiB)", block_size, block_size / (1024 * 1024));
  return fmt("%u (%u KiB)", block_size, block_size / 1024);
}

struct flag_name {
  uint16_t bit;
  const char* name;
};

constexpr flag_name kFlagNames[] = {
    {kFlagUncompressedInodes, "Uncompressed inodes"},
    {kFlagUncompressedData, "Uncompressed data"},
    {kFlagCheck, "Check"},
    {kFlagUncompressedFragments, "Uncompressed fragments"},
    {kFlagNoFragments, "No fragments"},
    {kFlagAlwaysFragments, "Always fragments"},
    {kFlagDuplicates, "Duplicates"},
    {kFlagExportable, "Exportable"},
    {kFlagUncompressedXattrs, "Uncompressed xattrs"},
    {kFlagNoXattrs, "No xattrs"},
    {kFlagCompressorOptions, "Compressor options"},
    {kFlagUncompressedIds, "Uncompressed ids"},
};

}  // namespace

dump_report dump_superblock(const mount& m, time_rendering tz) {
  const superblock& sb = m.sb();
  std::string out;
  out += "--- SUPER BLOCK INFORMATION ---\n";
  out += "Magic number: " + render_magic(sb.magic) + "\n";
  out += fmt("Number of inodes: %u\n", sb.inode_count);
  out += "Filesystem creation date: " + render_time(sb.mkfs_time, tz) + "\n";
  out += "Block size: " + render_block_size(sb.block_size) + "\n";
  out += fmt("Number of fragments: %u\n", sb.fragment_count);
  out += fmt("Block log: %u\n", sb.block_log);
  out += "Compression type: " + upper(compression_name(sb.compression)) + "\n";
  out += fmt("Super Block Flags: 0x%x\n", sb.flags);
  out += fmt("Major/Minor numbers: %u/%u\n", sb.version_major, sb.version_minor);
  out += fmt("Root inode: 0x%" PRIx64 "\n", sb.root_inode_ref.raw());
  out += fmt("Bytes used: %" PRIu64 "\n", sb.bytes_used);
  out += fmt("Id table start: 0x%" PRIx64 "\n", sb.id_table_start);
  out += fmt("(xattr) Id table start: 0x%" PRIx64 "\n", sb.xattr_id_table_start);
  out += fmt("Inode table start: 0x%" PRIx64 "\n", sb.inode_table_start);
  out += fmt("Directory table start: 0x%" PRIx64 "\n", sb.directory_table_start);
  out += fmt("Fragment table start: 0x%" PRIx64 "\n", sb.fragment_table_start);
  out += fmt("Lookup table start: 0x%" PRIx64 "\n", sb.export_table_start);
  out += "--- SUPER BLOCK FLAGS ---\n";
  for (const auto& f : kFlagNames)
    if (sb.flags & f.bit) out += std::string(f.name) + "\n";
  return {std::move(out), dump_section::superblock};
}

dump_report dump_inode_table(const mount& m, time_rendering tz) {
  const superblock& sb = m.sb();
  std::vector<inode> inodes = read_all_inodes(m);

  std::string out;
  out += "--- --- ---\n";
  for (uint32_t i = 0; i < inodes.size(); ++i) {
    const inode& node = inodes[i];
    out += fmt("{Inode %u/%u}\n", i + 1, sb.inode_count);
    out += "--- --- ---\n";
    out += fmt("Permissions: 0x%04x\n", node.header.permissions);
    out += fmt("UID index: 0x%04x\n", node.header.uid_idx);
    out += fmt("GID index: 0x%04x\n", node.header.gid_idx);
    out += "Modified time: " + render_time(node.header.mtime, tz) + "\n";
    out += fmt("Inode number: %u\n", node.header.inode_number);
    out += fmt("Inode type: %s\n", inode_kind_name(node.kind()));

    if (const auto* d = std::get_if<basic_directory>(&node.body)) {
      out += fmt("Start block: 0x%08x\n", d->start_block);
      out += fmt("Hard links: %u\n", d->nlink);
      out += fmt("File size: %u\n", d->file_size);
      out += fmt("Block offset: 0x%04x\n", d->block_offset);
      out += fmt("Parent inode number: %u\n", d->parent_inode);
    } else if (const auto* d = std::get_if<extended_directory>(&node.body)) {
      out += fmt("Start block: 0x%08x\n", d->start_block);
      out += fmt("Hard links: %u\n", d->nlink);
      out += fmt("File size: %u\n", d->file_size);
      out += fmt("Block offset: 0x%04x\n", d->block_offset);
      out += fmt("Parent inode number: %u\n", d->parent_inode);
      out += fmt("Index count: %u\n", d->index_count);
      out += fmt("Xattr index: 0x%08x\n", d->xattr_idx);
    } else if (const auto* f = std::get_if<basic_file>(&node.body)) {
      out += fmt("Start block: 0x%08x\n", f->start_block);
      out += fmt("Fragment block index: 0x%08x\n", f->frag_index);
      out += fmt("Fragment block offset: 0x%08x\n", f->frag_offset);
      out += fmt("(Uncompressed) File size: %u\n", f->file_size);
    } else if (const auto* f = std::get_if<extended_file>(&node.body)) {
      out += fmt("Start block: 0x%016" PRIx64 "\n", f->start_block);
      out += fmt("Fragment block index: 0x%08x\n", f->frag_index);
      out += fmt("Fragment block offset: 0x%08x\n", f->frag_offset);
      out += fmt("(Uncompressed) File size: %" PRIu64 "\n", f->file_size);
      out += fmt("Sparse bytes: %" PRIu64 "\n", f->sparse);
      out += fmt("Hard links: %u\n", f->nlink);
      out += fmt("Xattr index: 0x%08x\n", f->xattr_idx);
    } else if (const auto* s = std::get_if<basic_symlink>(&node.body)) {
      out += fmt("Hard links: %u\n", s->nlink);
      out += fmt("Symlink size: %u\n", s->target_size);
      out += "Target path: " + s->target + "\n";
    } else {
      out += "(contents not decoded)\n";
    }
    out += "\n";
  }
  return {std::move(out), dump_section::inode_table};
}

dump_report dump_directory_table(const mount& m) {
  std::vector<inode> inodes = read_all_inodes(m);

  // The table itself does not store a directory's own name; the parents'
  // listings do. Collect the names first.
  std::map<uint32_t, std::string> names;
  struct dir_info {
    const inode* node;
    std::vector<std::string> entries;
  };
  std::vector<dir_info> dirs;

  for (const inode& node : inodes) {
    if (!node.is_directory()) continue;
    dir_info info{&node, {}};
    std::vector<uint8_t> payload = read_dir_listing_bytes(m, node);
    size_t pos = 0;
    while (pos < payload.size()) {
      parsed_dir_header h = parse_dir_header(payload, pos);
      pos += h.consumed;
      for (uint32_t k = 0; k < h.header.count; ++k) {
        parsed_dir_entry e = parse_dir_entry(payload, pos);
        pos += e.consumed;
        uint32_t child = static_cast<uint32_t>(static_cast<int64_t>(h.header.inode_number) +
                                               e.entry.inode_delta);
        names[child] = e.entry.name;
        info.entries.push_back(e.entry.name);
      }
    }
    dirs.push_back(std::move(info));
  }

  uint32_t root_number = m.root().header.inode_number;
  std::string out;
  unsigned ordinal = 0;
  for (const dir_info& info : dirs) {
    if (info.node->header.inode_number == root_number) {
      out += "Root directory\n";
    } else {
      ++ordinal;
      out += fmt("Directory %u\n", ordinal);
      auto it = names.find(info.node->header.inode_number);
      out += "Name: " + (it != names.end() ? it->second : std::string("?")) + "\n";
    }
    if (info.entries.empty()) {
      out += "Empty directory.\n";
    } else {
      for (size_t k = 0; k < info.entries.size(); ++k)
        out += fmt("%zu) %s\n", k + 1, info.entries[k].c_str());
    }
    out += "\n";
  }
  return {std::move(out), dump_section::directory_table};
}

dump_report dump_entry(const mount& m, std::string_view path) {
  bool directory_mode = !path.empty() && path.back() == '/';
  if (directory_mode) {
    listing l = ls(m, path);
    std::string out;
    if (l.items.empty()) {
      out += "Empty directory.\n";
    } else {
      for (size_t k = 0; k < l.items.size(); ++k)
        out += fmt("%zu) %s\n", k + 1, l.items[k].name.c_str());
    }
    return {std::move(out), dump_section::entry};
  }

  resolved_node rn = resolve_path(m, path);
  if (rn.node.is_directory())
    fail(errc::is_a_directory,
         std::string(path) + " is a directory; end the path with '/' to list it");
  std::vector<uint8_t> content = read_file(m, path);
  return {std::string(content.begin(), content.end()), dump_section::entry};
}

}  // namespace sqsh
