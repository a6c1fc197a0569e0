#include "sqsh/vfs.hpp"

#include <atomic>
#include <deque>
#include <utility>

#include "sqsh/error.hpp"

namespace sqsh {

namespace detail {

namespace {
std::atomic<int64_t> g_live_mount_states{0};
}

struct mount_state {
  block_source source;
  superblock sb;
  fragment_table fragments;
  id_table ids;
  inode root;
  mutable meta_block_cache cache{8};

  mount_state(block_source src, const superblock& sb) : source(std::move(src)), sb(sb) {
    ++g_live_mount_states;
  }
  ~mount_state() { --g_live_mount_states; }
  mount_state(const mount_state&) = delete;
  mount_state& operator=(const mount_state&) = delete;

  meta_context ctx() const {
    return meta_context{source, static_cast<compression_id>(sb.compression), cache};
  }
};

int64_t live_mount_states() { return g_live_mount_states.load(); }

}  // namespace detail

using detail::mount_state;

namespace {

inode fetch_inode_impl(const mount_state& st, meta_ref ref) {
  table_walker walker(st.ctx(), st.sb.inode_table_start, ref);
  for (;;) {
    try {
      parsed_inode parsed = parse_inode(walker.buffered(), 0, st.sb);
      return std::move(parsed.node);
    } catch (const error& e) {
      if (e.code() != errc::truncated_inode && e.code() != errc::bad_block_list) throw;
      // The record may simply continue in the next metadata block.
      try {
        walker.grow();
      } catch (const error&) {
        throw e;
      }
    }
  }
}

struct dir_shape {
  uint64_t file_size = 0;  // listing length + 3
  meta_ref ref;
};

dir_shape shape_of_directory(const inode& node) {
  if (const auto* d = std::get_if<basic_directory>(&node.body))
    return {d->file_size, meta_ref{d->start_block, d->block_offset}};
  const auto& d = std::get<extended_directory>(node.body);
  return {d.file_size, meta_ref{d.start_block, d.block_offset}};
}

std::vector<uint8_t> dir_listing_bytes(const mount_state& st, const inode& dir) {
  dir_shape shape = shape_of_directory(dir);
  if (shape.file_size <= 3) return {};
  return read_table_span(st.ctx(), st.sb.directory_table_start, shape.ref,
                         shape.file_size - 3);
}

node_kind kind_of_entry_type(uint16_t entry_type) {
  uint16_t basic = entry_type > 7 ? entry_type - 7 : entry_type;
  if (basic < 1 || basic > 7)
    fail(errc::corrupt_directory, "entry type " + std::to_string(entry_type) + " is invalid");
  return kind_of(static_cast<inode_kind>(basic));
}

// Incremental directory-listing parser shared by readdir and lookups.
struct entry_cursor {
  std::span<const uint8_t> payload;
  size_t pos = 0;
  dir_header header{};
  uint32_t left = 0;

  std::optional<dir_entry> next() {
    if (left == 0) {
      if (pos >= payload.size()) return std::nullopt;
      parsed_dir_header h = parse_dir_header(payload, pos);
      pos += h.consumed;
      header = h.header;
      left = h.header.count;
    }
    parsed_dir_entry e = parse_dir_entry(payload, pos);
    pos += e.consumed;
    --left;
    return std::move(e.entry);
  }
};

dir_entry_info make_entry_info(const dir_header& header, const dir_entry& entry) {
  dir_entry_info info;
  info.name = entry.name;
  info.kind = kind_of_entry_type(entry.entry_type);
  info.inode_ref = meta_ref{header.start, entry.offset};
  info.inode_number = static_cast<uint32_t>(static_cast<int64_t>(header.inode_number) +
                                            entry.inode_delta);
  return info;
}

std::optional<dir_entry_info> lookup_entry(const mount_state& st, const inode& dir,
                                           std::string_view name) {
  std::vector<uint8_t> payload = dir_listing_bytes(st, dir);
  entry_cursor cursor{payload};
  while (auto entry = cursor.next()) {
    if (entry->name == name) return make_entry_info(cursor.header, *entry);
  }
  return std::nullopt;
}

std::deque<std::string> split_components(std::string_view path) {
  std::deque<std::string> parts;
  size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    size_t start = i;
    while (i < path.size() && path[i] != '/') ++i;
    if (i > start) parts.emplace_back(path.substr(start, i - start));
  }
  return parts;
}

struct walk_frame {
  std::string name;
  inode node;
};

resolved_node resolve_impl(const mount_state& st, std::string_view path,
                           symlink_policy policy) {
  if (path.empty()) fail(errc::not_found, "empty path");
  bool want_dir = path.back() == '/';

  std::deque<std::string> todo = split_components(path);
  std::vector<walk_frame> chain;
  int depth = 0;

  auto current = [&]() -> const inode& {
    return chain.empty() ? st.root : chain.back().node;
  };

  while (!todo.empty()) {
    std::string comp = std::move(todo.front());
    todo.pop_front();
    if (comp == ".") continue;
    if (comp == "..") {
      if (!chain.empty()) chain.pop_back();
      continue;
    }

    const inode& cur = current();
    if (!cur.is_directory())
      fail(errc::not_a_directory,
           "'" + (chain.empty() ? std::string("/") : chain.back().name) +
               "' is not a directory");

    std::optional<dir_entry_info> found = lookup_entry(st, cur, comp);
    if (!found) fail(errc::not_found, "'" + comp + "' not found");

    inode child = fetch_inode_impl(st, found->inode_ref);
    bool is_final = todo.empty();
    if (child.is_symlink() && (policy == symlink_policy::follow || !is_final)) {
      if (++depth > kMaxSymlinkDepth)
        fail(errc::symlink_loop, "too many symbolic links resolving '" + std::string(path) +
                                     "' (limit " + std::to_string(kMaxSymlinkDepth) + ")");
      const auto& link = std::get<basic_symlink>(child.body);
      std::deque<std::string> target = split_components(link.target);
      if (!link.target.empty() && link.target.front() == '/') chain.clear();
      for (auto it = target.rbegin(); it != target.rend(); ++it)
        todo.push_front(std::move(*it));
      continue;
    }
    chain.push_back(walk_frame{std::move(comp), std::move(child)});
  }

  if (want_dir && !current().is_directory())
    fail(errc::not_a_directory, std::string(path) + " is not a directory");

  resolved_node out;
  out.node = current();
  out.symlink_depth_used = depth;
  out.canonical_path = "/";
  for (size_t i = 0; i < chain.size(); ++i) {
    out.canonical_path += chain[i].name;
    if (i + 1 < chain.size()) out.canonical_path += '/';
  }
  return out;
}

struct file_shape {
  uint64_t file_size = 0;
  uint64_t data_start = 0;
  uint32_t frag_index = kNoFragment;
  uint32_t frag_offset = 0;
  const std::vector<uint32_t>* block_sizes = nullptr;
};

file_shape shape_of_file(const inode& node) {
  if (const auto* f = std::get_if<basic_file>(&node.body))
    return {f->file_size, f->start_block, f->frag_index, f->frag_offset, &f->block_sizes};
  const auto& f = std::get<extended_file>(node.body);
  return {f.file_size, f.start_block, f.frag_index, f.frag_offset, &f.block_sizes};
}

std::vector<uint8_t> read_data_block(const mount_state& st, uint64_t disk_offset,
                                     uint32_t size_word, uint64_t logical_size) {
  std::vector<uint8_t> data;
  if (data_block_sparse(size_word)) {
    data.assign(logical_size, 0);
    return data;
  }
  std::vector<uint8_t> disk = st.source.read_at(disk_offset, data_block_on_disk_size(size_word));
  if (data_block_stored_raw(size_word))
    data = std::move(disk);
  else
    data = decompress(static_cast<compression_id>(st.sb.compression), disk, st.sb.block_size);
  if (data.size() != logical_size)
    fail(errc::corrupt_stream, "data block at " + std::to_string(disk_offset) + " holds " +
                                   std::to_string(data.size()) + " bytes, expected " +
                                   std::to_string(logical_size));
  return data;
}

std::vector<uint8_t> read_fragment_block(const mount_state& st, const fragment_entry& entry) {
  std::vector<uint8_t> disk = st.source.read_at(entry.start, entry.on_disk_size());
  if (entry.stored_raw()) return disk;
  return decompress(static_cast<compression_id>(st.sb.compression), disk, st.sb.block_size);
}

}  // namespace

node_kind kind_of(inode_kind kind) {
  uint16_t raw = static_cast<uint16_t>(kind);
  switch (raw > 7 ? raw - 7 : raw) {
    case 1: return node_kind::directory;
    case 2: return node_kind::file;
    case 3: return node_kind::symlink;
    case 4: return node_kind::block_device;
    case 5: return node_kind::char_device;
    case 6: return node_kind::fifo;
    default: return node_kind::socket;
  }
}

std::shared_ptr<const mount_state> mount::state() const {
  if (!state_) throw std::logic_error("mount has been closed");
  return state_;
}

const superblock& mount::sb() const { return state()->sb; }
const block_source& mount::source() const { return state()->source; }
const fragment_table& mount::fragments() const { return state()->fragments; }
const id_table& mount::ids() const { return state()->ids; }
const inode& mount::root() const { return state()->root; }

mount mount::probe(block_source source) {
  if (source.total_size() < kSuperblockSize)
    fail(errc::bad_magic, source.identity() + " is smaller than a superblock, not SquashFS");

  superblock sb = parse_superblock(source.read_at(0, kSuperblockSize));

  if (!compression_supported(sb.compression))
    fail(errc::unsupported_compression,
         "unsupported compression: " + compression_name(sb.compression));
  if (sb.bytes_used > source.total_size())
    fail(errc::corrupt_superblock, "superblock claims " + std::to_string(sb.bytes_used) +
                                       " bytes used but the image holds only " +
                                       std::to_string(source.total_size()));

  auto st = std::make_shared<mount_state>(std::move(source), sb);
  st->fragments = load_fragment_table(st->ctx(), sb);
  st->ids = load_id_table(st->ctx(), sb);
  st->root = fetch_inode_impl(*st, sb.root_inode_ref);
  if (!st->root.is_directory())
    fail(errc::corrupt_superblock, "root inode is not a directory");

  mount m;
  m.state_ = std::move(st);
  return m;
}

void close(mount m) {
  // Taking the mount by value consumes the caller's handle; the state is
  // freed once the last borrower (e.g. an open dir_stream) lets go.
  (void)m;
}

resolved_node resolve_path(const mount& m, std::string_view path, symlink_policy policy) {
  return resolve_impl(*m.state(), path, policy);
}

inode fetch_inode(const mount& m, meta_ref ref) {
  return fetch_inode_impl(*m.state(), ref);
}

std::vector<inode> read_all_inodes(const mount& m) {
  auto st = m.state();
  const superblock& sb = st->sb;
  std::vector<inode> inodes;
  inodes.reserve(sb.inode_count);

  table_walker walker(st->ctx(), sb.inode_table_start, meta_ref{});
  for (uint32_t i = 0; i < sb.inode_count; ++i) {
    for (;;) {
      try {
        parsed_inode parsed = parse_inode(walker.buffered(), 0, sb);
        walker.consume(parsed.consumed);
        inodes.push_back(std::move(parsed.node));
        break;
      } catch (const error& e) {
        std::string at = "inode " + std::to_string(i + 1) + "/" +
                         std::to_string(sb.inode_count) + ": " + e.what();
        if (e.code() != errc::truncated_inode && e.code() != errc::bad_block_list)
          fail(e.code(), at);
        try {
          walker.grow();
        } catch (const error&) {
          fail(e.code(), at);
        }
      }
    }
  }
  return inodes;
}

std::vector<uint8_t> read_dir_listing_bytes(const mount& m, const inode& dir) {
  if (!dir.is_directory()) fail(errc::not_a_directory, "inode is not a directory");
  return dir_listing_bytes(*m.state(), dir);
}

dir_stream opendir(const mount& m, std::string_view path) {
  auto st = m.state();
  resolved_node rn = resolve_impl(*st, path, symlink_policy::follow);
  if (!rn.node.is_directory())
    fail(errc::not_a_directory, std::string(path) + " is not a directory");

  dir_stream stream;
  stream.state_ = st;
  stream.payload_ = dir_listing_bytes(*st, rn.node);
  return stream;
}

std::optional<dir_entry_info> readdir(dir_stream& stream) {
  if (!stream.state_) throw std::logic_error("readdir on a closed stream");
  try {
    if (stream.left_in_header_ == 0) {
      if (stream.pos_ >= stream.payload_.size()) return std::nullopt;
      parsed_dir_header h = parse_dir_header(stream.payload_, stream.pos_);
      stream.pos_ += h.consumed;
      stream.header_ = h.header;
      stream.left_in_header_ = h.header.count;
    }
    parsed_dir_entry e = parse_dir_entry(stream.payload_, stream.pos_);
    stream.pos_ += e.consumed;
    --stream.left_in_header_;
    ++stream.emitted_;
    return make_entry_info(stream.header_, e.entry);
  } catch (const error& e) {
    if (e.code() == errc::corrupt_directory || e.code() == errc::empty_name) throw;
    fail(errc::corrupt_directory, std::string("directory stream broke after ") +
                                      std::to_string(stream.emitted_) + " entries: " + e.what());
  }
}

void closedir(dir_stream stream) { (void)stream; }

uint64_t size(const mount& m, std::string_view path) {
  resolved_node rn = resolve_path(m, path);
  if (rn.node.is_directory())
    fail(errc::is_a_directory, std::string(path) + " is a directory");
  if (!rn.node.is_file())
    fail(errc::not_readable, std::string(path) + " is not a regular file");
  return rn.node.size();
}

std::vector<uint8_t> read_file(const mount& m, std::string_view path, uint64_t start,
                               uint64_t length) {
  auto st = m.state();
  resolved_node rn = resolve_impl(*st, path, symlink_policy::follow);
  if (rn.node.is_directory())
    fail(errc::is_a_directory, std::string(path) + " is a directory");
  if (!rn.node.is_file())
    fail(errc::not_readable, std::string(path) + " is not a regular file");

  file_shape shape = shape_of_file(rn.node);
  if (start > shape.file_size) start = shape.file_size;
  uint64_t want = shape.file_size - start;
  if (length != kReadAll && length < want) want = length;

  std::vector<uint8_t> out;
  if (want == 0) return out;
  // `want` comes from an untrusted header; preallocate only a sane bound
  out.reserve(std::min<uint64_t>(want, uint64_t{16} << 20));

  const uint32_t bs = st->sb.block_size;
  const auto& sizes = *shape.block_sizes;
  const uint64_t block_count = sizes.size();
  const uint64_t end = start + want;

  uint64_t first_block = start / bs;
  uint64_t disk_offset = shape.data_start;
  for (uint64_t i = 0; i < first_block && i < block_count; ++i)
    disk_offset += data_block_on_disk_size(sizes[i]);

  for (uint64_t i = first_block; i < block_count && i * bs < end; ++i) {
    uint64_t logical = std::min<uint64_t>(bs, shape.file_size - i * bs);
    std::vector<uint8_t> data = read_data_block(*st, disk_offset, sizes[i], logical);
    uint64_t block_base = i * bs;
    uint64_t lo = std::max(start, block_base) - block_base;
    uint64_t hi = std::min(end, block_base + logical) - block_base;
    out.insert(out.end(), data.begin() + static_cast<ptrdiff_t>(lo),
               data.begin() + static_cast<ptrdiff_t>(hi));
    disk_offset += data_block_on_disk_size(sizes[i]);
  }

  uint64_t blocks_span = block_count * bs;
  if (end > blocks_span) {
    // Tail lives in a shared fragment block.
    if (shape.frag_index == kNoFragment)
      fail(errc::corrupt_stream,
           std::string(path) + ": content extends past the block list with no fragment");
    if (shape.frag_index >= st->fragments.entries.size())
      fail(errc::fragment_index_out_of_range,
           "fragment index " + std::to_string(shape.frag_index) + " outside table of " +
               std::to_string(st->fragments.entries.size()) + " entries");

    const fragment_entry& entry = st->fragments.entries[shape.frag_index];
    std::vector<uint8_t> frag = read_fragment_block(*st, entry);
    uint64_t tail_len = shape.file_size - blocks_span;
    if (uint64_t{shape.frag_offset} + tail_len > frag.size())
      fail(errc::corrupt_stream, "fragment block holds " + std::to_string(frag.size()) +
                                     " bytes, tail needs offset " +
                                     std::to_string(shape.frag_offset) + " + " +
                                     std::to_string(tail_len));
    uint64_t lo = std::max(start, blocks_span) - blocks_span;
    uint64_t hi = end - blocks_span;
    out.insert(out.end(), frag.begin() + static_cast<ptrdiff_t>(shape.frag_offset + lo),
               frag.begin() + static_cast<ptrdiff_t>(shape.frag_offset + hi));
  }
  return out;
}

listing ls(const mount& m, std::string_view path) {
  auto st = m.state();
  dir_stream stream = opendir(m, path);
  listing result;
  while (auto entry = readdir(stream)) {
    listing::item item;
    item.name = entry->name;
    item.kind = entry->kind;
    if (entry->kind == node_kind::file)
      item.file_size = fetch_inode_impl(*st, entry->inode_ref).size();
    if (entry->kind == node_kind::directory)
      ++result.dir_count;
    else
      ++result.file_count;
    result.items.push_back(std::move(item));
  }
  closedir(std::move(stream));
  return result;
}

std::string format_listing(const listing& l) {
  std::string out;
  for (const auto& item : l.items) {
    switch (item.kind) {
      case node_kind::directory:
        out += "            " + item.name + "/\n";
        break;
      case node_kind::symlink:
        out += "    <SYM>   " + item.name + "\n";
        break;
      default: {
        char line[32];
        std::snprintf(line, sizeof line, " %8llu   ",
                      static_cast<unsigned long long>(item.file_size));
        out += line;
        out += item.name;
        out += '\n';
        break;
      }
    }
  }
  out += '\n';
  out += std::to_string(l.file_count) + " file(s), " + std::to_string(l.dir_count) +
         " dir(s)\n";
  return out;
}

}  // namespace sqsh
