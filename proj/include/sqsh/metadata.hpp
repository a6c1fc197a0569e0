#pragma once

#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <span>
#include <unordered_map>
#include <vector>

#include "sqsh/codec.hpp"
#include "sqsh/ondisk.hpp"
#include "sqsh/storage.hpp"

namespace sqsh {

// One decompressed metadata block plus the on-disk footprint needed to
// chain to the next block.
struct meta_block {
  std::vector<uint8_t> payload;  // <= 8192 bytes
  uint32_t disk_size = 0;        // bytes consumed on disk, including the 2-byte header
  bool was_compressed = false;
};

meta_block read_meta_block(const block_source& source, uint64_t abs_offset,
                           compression_id codec);

// Small LRU over decompressed metadata blocks, keyed by absolute offset.
// Table walks revisit the same blocks constantly; eight blocks keeps the
// memory bound bootloader-sized.
class meta_block_cache {
public:
  explicit meta_block_cache(size_t capacity = 8) : capacity_(capacity) {}

  std::shared_ptr<const meta_block> get(const block_source& source, uint64_t abs_offset,
                                        compression_id codec);

  uint64_t hits() const;
  uint64_t misses() const;

private:
  size_t capacity_;
  mutable std::mutex mu_;
  std::list<std::pair<uint64_t, std::shared_ptr<const meta_block>>> order_;
  std::unordered_map<uint64_t, decltype(order_)::iterator> index_;
  uint64_t hits_ = 0;
  uint64_t misses_ = 0;
};

struct meta_context {
  const block_source& source;
  compression_id codec;
  meta_block_cache& cache;
};

// Sequential reader over the logical byte stream of one metadata table,
// chaining blocks by their on-disk sizes.
class table_walker {
public:
  table_walker(const meta_context& ctx, uint64_t table_start, meta_ref pos);

  // Guarantees at least `length` buffered bytes or fails with
  // truncated_table.
  void ensure(size_t length);

  std::span<const uint8_t> buffered() const {
    return std::span<const uint8_t>(buf_).subspan(head_);
  }

  void consume(size_t length);

  // Pulls one more block into the buffer.
  void grow();

private:
  meta_context ctx_;
  uint64_t next_block_;  // absolute offset of the next unread block
  std::vector<uint8_t> buf_;
  size_t head_ = 0;
};

// Reads `length` logical bytes starting at `ref` within the table that
// begins at `table_start`.
std::vector<uint8_t> read_table_span(const meta_context& ctx, uint64_t table_start,
                                     meta_ref ref, size_t length);

struct fragment_table {
  std::vector<fragment_entry> entries;
};

struct id_table {
  std::vector<uint32_t> ids;

  uint32_t resolve(uint16_t idx) const;
};

// Both tables are reached through an indirection list of metadata-block
// offsets: 512 fragment entries / 2048 ids per block.
fragment_table load_fragment_table(const meta_context& ctx, const superblock& sb);
id_table load_id_table(const meta_context& ctx, const superblock& sb);

}  // namespace sqsh
