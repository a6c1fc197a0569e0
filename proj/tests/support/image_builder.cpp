#include "support/image_builder.hpp"

#include <algorithm>
#include <deque>
#include <cassert>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <zlib.h>

namespace testsupport {

namespace {

constexpr uint32_t kNoFragment = 0xFFFFFFFF;
constexpr uint32_t kNoXattr = 0xFFFFFFFF;
constexpr size_t kMetaPayload = 8192;

void put16(std::vector<uint8_t>& v, uint16_t x) {
  v.push_back(static_cast<uint8_t>(x & 0xFF));
  v.push_back(static_cast<uint8_t>(x >> 8));
}

void put32(std::vector<uint8_t>& v, uint32_t x) {
  for (int i = 0; i < 4; ++i) v.push_back(static_cast<uint8_t>((x >> (8 * i)) & 0xFF));
}

void put64(std::vector<uint8_t>& v, uint64_t x) {
  for (int i = 0; i < 8; ++i) v.push_back(static_cast<uint8_t>((x >> (8 * i)) & 0xFF));
}

std::vector<uint8_t> deflate_bytes(const uint8_t* data, size_t size) {
  uLongf bound = compressBound(static_cast<uLong>(size));
  std::vector<uint8_t> out(bound);
  if (compress2(out.data(), &bound, data, static_cast<uLong>(size), 9) != Z_OK)
    throw std::runtime_error("compress2 failed");
  out.resize(bound);
  return out;
}

// Emits one standalone metadata block (2-byte header + payload), stored
// compressed only when that actually shrinks it.
void emit_meta_block(std::vector<uint8_t>& out, const uint8_t* payload, size_t size,
                     bool compress) {
  assert(size >= 1 && size <= kMetaPayload);
  if (compress) {
    std::vector<uint8_t> packed = deflate_bytes(payload, size);
    if (packed.size() < size) {
      put16(out, static_cast<uint16_t>(packed.size()));
      out.insert(out.end(), packed.begin(), packed.end());
      return;
    }
  }
  put16(out, static_cast<uint16_t>(size | 0x8000));
  out.insert(out.end(), payload, payload + size);
}

// A metadata table under construction: logical bytes are chunked into
// 8192-byte blocks as they accumulate, so a record's (block disk offset,
// intra offset) position is known the moment it is appended.
struct meta_stream {
  bool compress = true;
  std::vector<uint8_t> pending;
  std::vector<uint8_t> disk;

  std::pair<uint64_t, uint16_t> tell() const {
    return {disk.size(), static_cast<uint16_t>(pending.size())};
  }

  void append(const std::vector<uint8_t>& bytes) {
    pending.insert(pending.end(), bytes.begin(), bytes.end());
    while (pending.size() >= kMetaPayload) {
      emit_meta_block(disk, pending.data(), kMetaPayload, compress);
      pending.erase(pending.begin(), pending.begin() + kMetaPayload);
    }
  }

  void finish() {
    if (!pending.empty()) {
      emit_meta_block(disk, pending.data(), pending.size(), compress);
      pending.clear();
    }
  }
};

struct node_info {
  const tree_node* node = nullptr;
  std::string path;
  uint32_t number = 0;
  uint32_t parent_number = 0;
  uint32_t nlink = 2;
  // file placement
  uint64_t data_start = 0;
  std::vector<uint32_t> block_words;
  uint32_t frag_index = kNoFragment;
  uint32_t frag_offset = 0;
  // inode location within the inode table
  uint64_t iblock = 0;
  uint16_t ioffset = 0;
  // directory listing location within the directory table
  uint64_t dblock = 0;
  uint16_t doffset = 0;
  uint64_t listing_size = 0;
  std::vector<node_info*> children;  // sorted by name
};

uint16_t default_mode(node_kind kind) {
  switch (kind) {
    case node_kind::directory: return 0775;
    case node_kind::file: return 0664;
    case node_kind::symlink: return 0777;
    case node_kind::fifo: return 0644;
  }
  return 0644;
}

uint16_t basic_type(node_kind kind) {
  switch (kind) {
    case node_kind::directory: return 1;
    case node_kind::file: return 2;
    case node_kind::symlink: return 3;
    case node_kind::fifo: return 6;
  }
  return 2;
}

struct builder {
  const build_options& opts;
  bool zlib_usable;

  std::deque<node_info> infos;  // in inode-number order; deque keeps references stable
  std::vector<uint32_t> ids;
  std::map<uint32_t, uint16_t> id_index;

  std::vector<uint8_t> data;  // everything after the 96-byte superblock
  std::vector<std::pair<uint64_t, uint32_t>> fragments;  // (start, size word)
  std::vector<uint8_t> frag_current;

  meta_stream inode_stream;
  meta_stream dir_stream;

  layout_manifest manifest;

  explicit builder(const build_options& o)
      : opts(o), zlib_usable(o.compression_id == 1) {
    inode_stream.compress = zlib_usable && opts.compress_metadata;
    dir_stream.compress = zlib_usable && opts.compress_metadata;
  }

  uint16_t id_of(uint32_t id) {
    auto it = id_index.find(id);
    if (it != id_index.end()) return it->second;
    uint16_t idx = static_cast<uint16_t>(ids.size());
    ids.push_back(id);
    id_index[id] = idx;
    return idx;
  }

  uint64_t abs_data_offset() const { return 96 + data.size(); }

  // ---- numbering (post-order, children alphabetical) ----

  uint32_t next_number = 1;

  node_info* number_tree(const tree_node& node, const std::string& path) {
    std::vector<node_info*> children;
    std::vector<const tree_node*> sorted;
    for (const tree_node& child : node.children) sorted.push_back(&child);
    std::sort(sorted.begin(), sorted.end(),
              [](const tree_node* a, const tree_node* b) { return a->name < b->name; });

    for (const tree_node* child : sorted) {
      std::string child_path = path == "/" ? "/" + child->name : path + "/" + child->name;
      if (child->kind == node_kind::directory) {
        children.push_back(number_tree(*child, child_path));
      } else {
        infos.push_back(node_info{});
        node_info* info = &infos.back();
        info->node = child;
        info->path = child_path;
        info->number = next_number++;
        info->nlink = 1;
        children.push_back(info);
      }
    }

    infos.push_back(node_info{});
    node_info* self = &infos.back();
    self->node = &node;
    self->path = path;
    self->number = next_number++;
    self->children = std::move(children);
    self->nlink = 2;
    for (node_info* child : self->children)
      if (child->node->kind == node_kind::directory) ++self->nlink;
    return self;
  }

  void fill_parents(node_info* dir) {
    for (node_info* child : dir->children) {
      if (child->node->kind == node_kind::directory) {
        child->parent_number = dir->number;
        fill_parents(child);
      } else {
        child->parent_number = dir->number;
      }
    }
  }

  // ---- data blocks ----

  static bool all_zero(const uint8_t* p, size_t n) {
    for (size_t i = 0; i < n; ++i)
      if (p[i] != 0) return false;
    return true;
  }

  void flush_fragment_block() {
    if (frag_current.empty()) return;
    uint64_t start = abs_data_offset();
    uint32_t word;
    bool compress = zlib_usable && opts.compress_fragments;
    if (compress) {
      std::vector<uint8_t> packed = deflate_bytes(frag_current.data(), frag_current.size());
      if (packed.size() < frag_current.size()) {
        data.insert(data.end(), packed.begin(), packed.end());
        word = static_cast<uint32_t>(packed.size());
        fragments.emplace_back(start, word);
        frag_current.clear();
        return;
      }
    }
    data.insert(data.end(), frag_current.begin(), frag_current.end());
    word = static_cast<uint32_t>(frag_current.size()) | (1u << 24);
    fragments.emplace_back(start, word);
    frag_current.clear();
  }

  std::pair<uint32_t, uint32_t> pack_fragment(const uint8_t* tail, size_t size) {
    if (frag_current.size() + size > opts.block_size) flush_fragment_block();
    uint32_t index = static_cast<uint32_t>(fragments.size());
    uint32_t offset = static_cast<uint32_t>(frag_current.size());
    frag_current.insert(frag_current.end(), tail, tail + size);
    return {index, offset};
  }

  void write_file_data(node_info& info) {
    const std::vector<uint8_t>& content = info.node->content;
    uint64_t size = content.size();
    uint32_t bs = opts.block_size;
    uint64_t tail = size % bs;
    bool use_fragment =
        !opts.no_fragments && tail != 0 && (size < bs || opts.tail_packing);
    uint64_t block_count = use_fragment ? size / bs : (size + bs - 1) / bs;

    info.data_start = block_count > 0 ? abs_data_offset() : 0;
    for (uint64_t i = 0; i < block_count; ++i) {
      uint64_t begin = i * bs;
      uint64_t length = std::min<uint64_t>(bs, size - begin);
      const uint8_t* block = content.data() + begin;

      if (all_zero(block, length)) {
        info.block_words.push_back(0);  // sparse
        continue;
      }
      if (zlib_usable && opts.compress_data) {
        std::vector<uint8_t> packed = deflate_bytes(block, length);
        if (packed.size() < length) {
          data.insert(data.end(), packed.begin(), packed.end());
          info.block_words.push_back(static_cast<uint32_t>(packed.size()));
          continue;
        }
      }
      data.insert(data.end(), block, block + length);
      info.block_words.push_back(static_cast<uint32_t>(length) | (1u << 24));
    }

    if (use_fragment) {
      auto [index, offset] = pack_fragment(content.data() + size - tail, tail);
      info.frag_index = index;
      info.frag_offset = offset;
    }
  }

  // ---- inode and directory tables ----

  std::vector<uint8_t> serialize_inode_header(const node_info& info, uint16_t type) {
    std::vector<uint8_t> out;
    const tree_node& node = *info.node;
    put16(out, type);
    put16(out, node.mode ? node.mode : default_mode(node.kind));
    put16(out, id_of(node.uid));
    put16(out, id_of(node.gid));
    put32(out, node.mtime ? node.mtime : opts.mkfs_time);
    put32(out, info.number);
    return out;
  }

  void write_leaf_inode(node_info& info) {
    auto [block, offset] = inode_stream.tell();
    info.iblock = block;
    info.ioffset = offset;

    const tree_node& node = *info.node;
    switch (node.kind) {
      case node_kind::file: {
        bool extended = opts.force_extended || node.content.size() > 0xFFFFFFFFull ||
                        info.data_start > 0xFFFFFFFFull;
        std::vector<uint8_t> out = serialize_inode_header(info, extended ? 9 : 2);
        if (extended) {
          put64(out, info.data_start);
          put64(out, node.content.size());
          put64(out, 0);  // sparse byte count
          put32(out, 1);  // nlink
          put32(out, info.frag_index);
          put32(out, info.frag_offset);
          put32(out, kNoXattr);
        } else {
          put32(out, static_cast<uint32_t>(info.data_start));
          put32(out, info.frag_index);
          put32(out, info.frag_offset);
          put32(out, static_cast<uint32_t>(node.content.size()));
        }
        for (uint32_t word : info.block_words) put32(out, word);
        inode_stream.append(out);
        break;
      }
      case node_kind::symlink: {
        std::vector<uint8_t> out = serialize_inode_header(info, 3);
        put32(out, 1);  // nlink
        put32(out, static_cast<uint32_t>(node.target.size()));
        out.insert(out.end(), node.target.begin(), node.target.end());
        inode_stream.append(out);
        break;
      }
      case node_kind::fifo: {
        std::vector<uint8_t> out = serialize_inode_header(info, 6);
        put32(out, 1);  // nlink
        inode_stream.append(out);
        break;
      }
      case node_kind::directory:
        assert(false && "directories are written by write_directory");
        break;
    }
  }

  std::vector<uint8_t> serialize_listing(const node_info& dir) {
    std::vector<uint8_t> out;
    size_t i = 0;
    const auto& children = dir.children;
    while (i < children.size()) {
      // One header covers entries that live in the same inode-table block
      // and whose numbers stay within a signed 16-bit delta of the base.
      size_t group_end = i + 1;
      uint64_t block = children[i]->iblock;
      uint32_t base = children[i]->number;
      while (group_end < children.size() && group_end - i < 256 &&
             children[group_end]->iblock == block) {
        int64_t delta = static_cast<int64_t>(children[group_end]->number) - base;
        if (delta < -32768 || delta > 32767) break;
        ++group_end;
      }

      put32(out, static_cast<uint32_t>(group_end - i - 1));  // stored as count-1
      put32(out, static_cast<uint32_t>(block));
      put32(out, base);
      for (size_t k = i; k < group_end; ++k) {
        const node_info& child = *children[k];
        put16(out, child.ioffset);
        put16(out, static_cast<uint16_t>(static_cast<int16_t>(
                       static_cast<int64_t>(child.number) - base)));
        put16(out, basic_type(child.node->kind));
        put16(out, static_cast<uint16_t>(child.node->name.size() - 1));
        out.insert(out.end(), child.node->name.begin(), child.node->name.end());
      }
      i = group_end;
    }
    return out;
  }

  void write_directory(node_info& dir) {
    for (node_info* child : dir.children) {
      if (child->node->kind == node_kind::directory)
        write_directory(*child);
      else
        write_leaf_inode(*child);
    }

    auto [dblock, doffset] = dir_stream.tell();
    dir.dblock = dblock;
    dir.doffset = doffset;
    std::vector<uint8_t> listing = serialize_listing(dir);
    dir.listing_size = listing.size();
    dir_stream.append(listing);

    auto [iblock, ioffset] = inode_stream.tell();
    dir.iblock = iblock;
    dir.ioffset = ioffset;

    uint64_t file_size = dir.listing_size + 3;
    bool extended = opts.force_extended || file_size > 0xFFFF;
    std::vector<uint8_t> out = serialize_inode_header(dir, extended ? 8 : 1);
    if (extended) {
      put32(out, dir.nlink);
      put32(out, static_cast<uint32_t>(file_size));
      put32(out, static_cast<uint32_t>(dir.dblock));
      put32(out, dir.parent_number);
      put16(out, 0);  // no directory indexes
      put16(out, dir.doffset);
      put32(out, kNoXattr);
    } else {
      put32(out, static_cast<uint32_t>(dir.dblock));
      put32(out, dir.nlink);
      put16(out, static_cast<uint16_t>(file_size));
      put16(out, dir.doffset);
      put32(out, dir.parent_number);
    }
    inode_stream.append(out);
  }

  // ---- container tables ----

  // Writes records chunked into standalone metadata blocks followed by
  // the u64 indirection list; returns the list's offset.
  uint64_t write_indirect_table(std::vector<uint8_t>& image, const std::vector<uint8_t>& records,
                                size_t record_size, size_t per_block) {
    std::vector<uint64_t> block_offsets;
    size_t total = records.size() / record_size;
    for (size_t first = 0; first < total; first += per_block) {
      size_t count = std::min(per_block, total - first);
      block_offsets.push_back(image.size());
      emit_meta_block(image, records.data() + first * record_size, count * record_size,
                      zlib_usable && opts.compress_metadata);
    }
    uint64_t list_start = image.size();
    for (uint64_t off : block_offsets) put64(image, off);
    return list_start;
  }

  built_image build(const tree_node& root) {
    node_info* root_info = number_tree(root, "/");
    root_info->parent_number = next_number;  // inode_count + 1
    fill_parents(root_info);

    for (node_info& info : infos)
      if (info.node->kind == node_kind::file) write_file_data(info);
    flush_fragment_block();

    write_directory(*root_info);
    inode_stream.finish();
    dir_stream.finish();

    // assemble the image after the 96-byte superblock
    std::vector<uint8_t> image(96, 0);
    image.insert(image.end(), data.begin(), data.end());

    uint64_t inode_table_start = image.size();
    image.insert(image.end(), inode_stream.disk.begin(), inode_stream.disk.end());
    uint64_t directory_table_start = image.size();
    image.insert(image.end(), dir_stream.disk.begin(), dir_stream.disk.end());

    std::vector<uint8_t> frag_records;
    for (auto [start, word] : fragments) {
      put64(frag_records, start);
      put32(frag_records, word);
      put32(frag_records, 0);
    }
    uint64_t fragment_table_start = image.size();
    if (!fragments.empty())
      fragment_table_start = write_indirect_table(image, frag_records, 16, 512);

    uint64_t export_table_start = ~uint64_t{0};
    if (opts.exportable) {
      std::vector<uint8_t> refs;
      std::vector<const node_info*> by_number(infos.size());
      for (const node_info& info : infos) by_number[info.number - 1] = &info;
      for (const node_info* info : by_number)
        put64(refs, (info->iblock << 16) | info->ioffset);
      export_table_start = write_indirect_table(image, refs, 8, 1024);
    }

    std::vector<uint8_t> id_records;
    for (uint32_t id : ids) put32(id_records, id);
    uint64_t id_table_start = write_indirect_table(image, id_records, 4, 2048);

    uint64_t bytes_used = image.size();

    uint16_t flags = 0x40;  // duplicates removed, the builder default
    if (!opts.compress_metadata || !zlib_usable) flags |= 0x01;
    if (!opts.compress_data || !zlib_usable) flags |= 0x02;
    if (!opts.compress_fragments || !zlib_usable) flags |= 0x08;
    if (opts.no_fragments) flags |= 0x10;
    if (opts.tail_packing) flags |= 0x20;
    if (opts.exportable) flags |= 0x80;

    uint16_t block_log = 0;
    while ((uint32_t{1} << block_log) < opts.block_size) ++block_log;

    std::vector<uint8_t> sb;
    put32(sb, 0x73717368);
    put32(sb, static_cast<uint32_t>(infos.size()));
    put32(sb, opts.mkfs_time);
    put32(sb, opts.block_size);
    put32(sb, static_cast<uint32_t>(fragments.size()));
    put16(sb, opts.compression_id);
    put16(sb, block_log);
    put16(sb, flags);
    put16(sb, static_cast<uint16_t>(ids.size()));
    put16(sb, 4);
    put16(sb, 0);
    put64(sb, (root_info->iblock << 16) | root_info->ioffset);
    put64(sb, bytes_used);
    put64(sb, id_table_start);
    put64(sb, ~uint64_t{0});  // no xattr table
    put64(sb, inode_table_start);
    put64(sb, directory_table_start);
    put64(sb, fragment_table_start);
    put64(sb, export_table_start);
    assert(sb.size() == 96);
    std::copy(sb.begin(), sb.end(), image.begin());

    if (opts.pad_to_4k && image.size() % 4096 != 0)
      image.resize((image.size() / 4096 + 1) * 4096, 0);

    built_image out;
    out.bytes = std::move(image);
    out.manifest.inode_count = static_cast<uint32_t>(infos.size());
    out.manifest.fragment_count = static_cast<uint32_t>(fragments.size());
    out.manifest.id_count = static_cast<uint16_t>(ids.size());
    out.manifest.flags = flags;
    out.manifest.root_ref_raw = (root_info->iblock << 16) | root_info->ioffset;
    out.manifest.bytes_used = bytes_used;
    out.manifest.inode_table_start = inode_table_start;
    out.manifest.directory_table_start = directory_table_start;
    out.manifest.fragment_table_start = fragment_table_start;
    out.manifest.export_table_start = export_table_start;
    out.manifest.id_table_start = id_table_start;
    for (const node_info& info : infos) {
      out.manifest.inode_numbers[info.path] = info.number;
      if (info.node->kind == node_kind::file)
        out.manifest.storage[info.path] = {info.block_words.size(), info.frag_index};
    }
    return out;
  }
};

}  // namespace

tree_node dir_node(std::string name, std::vector<tree_node> children) {
  tree_node node;
  node.kind = node_kind::directory;
  node.name = std::move(name);
  node.children = std::move(children);
  return node;
}

tree_node file_node(std::string name, std::vector<uint8_t> content) {
  tree_node node;
  node.kind = node_kind::file;
  node.name = std::move(name);
  node.content = std::move(content);
  return node;
}

tree_node file_node(std::string name, std::string_view text) {
  return file_node(std::move(name), std::vector<uint8_t>(text.begin(), text.end()));
}

tree_node symlink_node(std::string name, std::string target) {
  tree_node node;
  node.kind = node_kind::symlink;
  node.name = std::move(name);
  node.target = std::move(target);
  return node;
}

tree_node fifo_node(std::string name) {
  tree_node node;
  node.kind = node_kind::fifo;
  node.name = std::move(name);
  return node;
}

built_image build_image(const tree_node& root, const build_options& opts) {
  builder b(opts);
  return b.build(root);
}

layout_manifest write_image(const tree_node& root, const build_options& opts,
                            const std::filesystem::path& path) {
  built_image built = build_image(root, opts);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(built.bytes.data()),
            static_cast<std::streamsize>(built.bytes.size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return built.manifest;
}

tree_node scan_tree(const std::filesystem::path& root) {
  tree_node node;
  node.kind = node_kind::directory;
  node.name = root.filename().string();
  for (const auto& entry : std::filesystem::directory_iterator(root)) {
    if (entry.is_symlink()) {
      node.children.push_back(symlink_node(entry.path().filename().string(),
                                           std::filesystem::read_symlink(entry.path()).string()));
    } else if (entry.is_directory()) {
      node.children.push_back(scan_tree(entry.path()));
    } else if (entry.is_regular_file()) {
      std::ifstream in(entry.path(), std::ios::binary);
      std::vector<uint8_t> content(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>{});
      node.children.push_back(file_node(entry.path().filename().string(), std::move(content)));
    }
  }
  return node;
}

}  // namespace testsupport
