#include "sqsh/metadata.hpp"

#include <algorithm>
#include <cstring>

#include "sqsh/bytes.hpp"
#include "sqsh/error.hpp"

namespace sqsh {

namespace {

constexpr uint16_t kMetaRawBit = 1u << 15;
constexpr size_t kFragmentsPerBlock = kMetadataPayloadSize / 16;  // 512
constexpr size_t kIdsPerBlock = kMetadataPayloadSize / 4;         // 2048

}  // namespace

meta_block read_meta_block(const block_source& source, uint64_t abs_offset,
                           compression_id codec) {
  if (abs_offset + 2 > source.total_size())
    fail(errc::truncated_block, "metadata block header at " + std::to_string(abs_offset) +
                                    " is past the image end");
  uint8_t hdr[2];
  source.read_at(abs_offset, hdr);
  uint16_t word = detail::load_le16(std::span<const uint8_t>(hdr, 2), 0);

  bool raw = (word & kMetaRawBit) != 0;
  uint32_t payload_size = word & ~kMetaRawBit;
  if (payload_size == 0 || payload_size > kMetadataPayloadSize)
    fail(errc::oversize_block, "metadata block at " + std::to_string(abs_offset) +
                                   " declares on-disk size " + std::to_string(payload_size));
  if (abs_offset + 2 + payload_size > source.total_size())
    fail(errc::truncated_block, "metadata block at " + std::to_string(abs_offset) +
                                    " extends past the image end");

  meta_block block;
  block.disk_size = 2 + payload_size;
  block.was_compressed = !raw;

  std::vector<uint8_t> disk = source.read_at(abs_offset + 2, payload_size);
  if (raw) {
    block.payload = std::move(disk);
  } else {
    try {
      block.payload = decompress(codec, disk, kMetadataPayloadSize);
    } catch (const error& e) {
      if (e.code() == errc::output_overflow)
        fail(errc::oversize_block, "metadata block at " + std::to_string(abs_offset) +
                                       " inflates past 8192 bytes");
      throw;
    }
  }
  return block;
}

std::shared_ptr<const meta_block> meta_block_cache::get(const block_source& source,
                                                        uint64_t abs_offset,
                                                        compression_id codec) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = index_.find(abs_offset);
    if (it != index_.end()) {
      order_.splice(order_.begin(), order_, it->second);
      ++hits_;
      return it->second->second;
    }
  }

  auto block = std::make_shared<const meta_block>(read_meta_block(source, abs_offset, codec));

  std::lock_guard<std::mutex> lock(mu_);
  auto it = index_.find(abs_offset);
  if (it != index_.end()) return it->second->second;  // raced; keep the resident one
  ++misses_;
  order_.emplace_front(abs_offset, block);
  index_[abs_offset] = order_.begin();
  while (order_.size() > capacity_) {
    index_.erase(order_.back().first);
    order_.pop_back();
  }
  return block;
}

uint64_t meta_block_cache::hits() const {
  std::lock_guard<std::mutex> lock(mu_);
  return hits_;
}

uint64_t meta_block_cache::misses() const {
  std::lock_guard<std::mutex> lock(mu_);
  return misses_;
}

table_walker::table_walker(const meta_context& ctx, uint64_t table_start, meta_ref pos)
    : ctx_(ctx), next_block_(table_start + pos.block_start) {
  auto block = ctx_.cache.get(ctx_.source, next_block_, ctx_.codec);
  if (pos.intra_offset > block->payload.size())
    fail(errc::truncated_table,
         "intra-block offset " + std::to_string(pos.intra_offset) + " past block payload of " +
             std::to_string(block->payload.size()) + " bytes");
  buf_.assign(block->payload.begin() + pos.intra_offset, block->payload.end());
  next_block_ += block->disk_size;
}

void table_walker::grow() {
  auto block = ctx_.cache.get(ctx_.source, next_block_, ctx_.codec);
  if (head_ > 0) {
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<ptrdiff_t>(head_));
    head_ = 0;
  }
  buf_.insert(buf_.end(), block->payload.begin(), block->payload.end());
  next_block_ += block->disk_size;
}

void table_walker::ensure(size_t length) {
  while (buffered().size() < length) {
    try {
      grow();
    } catch (const error& e) {
      fail(errc::truncated_table, "table ends before " + std::to_string(length) +
                                      " bytes could be read (" + e.what() + ")");
    }
  }
}

void table_walker::consume(size_t length) {
  if (length > buffered().size())
    fail(errc::truncated_table, "consume past buffered table bytes");
  head_ += length;
}

std::vector<uint8_t> read_table_span(const meta_context& ctx, uint64_t table_start,
                                     meta_ref ref, size_t length) {
  if (length == 0) return {};
  table_walker walker(ctx, table_start, ref);
  walker.ensure(length);
  auto view = walker.buffered();
  return std::vector<uint8_t>(view.begin(), view.begin() + static_cast<ptrdiff_t>(length));
}

uint32_t id_table::resolve(uint16_t idx) const {
  if (idx >= ids.size())
    fail(errc::index_out_of_range, "id index " + std::to_string(idx) + " outside table of " +
                                       std::to_string(ids.size()) + " ids");
  return ids[idx];
}

namespace {

// Shared shape of the fragment and id tables: a list of u64 offsets of
// the metadata blocks that hold fixed-size records.
std::vector<uint8_t> load_indirect_table(const meta_context& ctx, uint64_t list_start,
                                         uint64_t record_count, size_t record_size,
                                         size_t records_per_block, const char* what) {
  size_t block_count = (record_count + records_per_block - 1) / records_per_block;
  std::vector<uint8_t> list;
  try {
    list = ctx.source.read_at(list_start, block_count * 8);
  } catch (const error&) {
    fail(errc::truncated_table, std::string(what) + " indirection list extends past the image");
  }

  std::vector<uint8_t> payload;
  payload.reserve(record_count * record_size);
  for (size_t i = 0; i < block_count; ++i) {
    uint64_t block_offset = detail::load_le64(list, i * 8);
    if (block_offset >= ctx.source.total_size())
      fail(errc::corrupt_table, std::string(what) + " indirection entry " + std::to_string(i) +
                                    " points past the image");
    auto block = ctx.cache.get(ctx.source, block_offset, ctx.codec);

    size_t expected = std::min(records_per_block,
                               static_cast<size_t>(record_count) - i * records_per_block) *
                      record_size;
    if (block->payload.size() != expected)
      fail(errc::corrupt_table, std::string(what) + " block " + std::to_string(i) + " holds " +
                                    std::to_string(block->payload.size()) + " bytes, expected " +
                                    std::to_string(expected));
    payload.insert(payload.end(), block->payload.begin(), block->payload.end());
  }
  return payload;
}

}  // namespace

fragment_table load_fragment_table(const meta_context& ctx, const superblock& sb) {
  fragment_table table;
  if (sb.fragment_count == 0) return table;

  std::vector<uint8_t> payload =
      load_indirect_table(ctx, sb.fragment_table_start, sb.fragment_count, 16,
                          kFragmentsPerBlock, "fragment table");

  table.entries.reserve(sb.fragment_count);
  for (uint32_t i = 0; i < sb.fragment_count; ++i) {
    fragment_entry e = parse_fragment_entry(payload, i * 16);
    if (e.start >= ctx.source.total_size())
      fail(errc::corrupt_table,
           "fragment " + std::to_string(i) + " starts past the image end");
    validate_data_size_word(e.size_word);
    if (data_block_sparse(e.size_word) || e.on_disk_size() > sb.block_size)
      fail(errc::corrupt_table, "fragment " + std::to_string(i) + " has on-disk size " +
                                    std::to_string(e.on_disk_size()) +
                                    " outside 1.." + std::to_string(sb.block_size));
    table.entries.push_back(e);
  }
  return table;
}

id_table load_id_table(const meta_context& ctx, const superblock& sb) {
  id_table table;
  if (sb.id_count == 0) fail(errc::corrupt_table, "id table must hold at least one entry");

  std::vector<uint8_t> payload =
      load_indirect_table(ctx, sb.id_table_start, sb.id_count, 4, kIdsPerBlock, "id table");

  table.ids.reserve(sb.id_count);
  for (uint16_t i = 0; i < sb.id_count; ++i)
    table.ids.push_back(detail::load_le32(payload, size_t{i} * 4));
  return table;
}

}  // namespace sqsh
