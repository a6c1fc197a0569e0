#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sqsh/metadata.hpp"
#include "sqsh/ondisk.hpp"
#include "sqsh/storage.hpp"

namespace sqsh {

inline constexpr int kMaxSymlinkDepth = 40;
inline constexpr uint64_t kReadAll = ~uint64_t{0};

enum class node_kind {
  directory,
  file,
  symlink,
  block_device,
  char_device,
  fifo,
  socket,
};

node_kind kind_of(inode_kind kind);

namespace detail {
struct mount_state;
// Live mount-state count, for lifecycle accounting in tests.
int64_t live_mount_states();
}  // namespace detail

// Immutable post-probe bundle: block source, superblock and preloaded
// fragment/id tables. Move-only; `close` consumes it. Directory streams
// share ownership of the state, so a stream outliving its mount stays
// valid.
class mount {
public:
  static mount probe(block_source source);

  const superblock& sb() const;
  const block_source& source() const;
  const fragment_table& fragments() const;
  const id_table& ids() const;
  const inode& root() const;

  bool closed() const { return state_ == nullptr; }

  // Internal handle used by the vfs/dump implementations.
  std::shared_ptr<const detail::mount_state> state() const;

private:
  mount() = default;
  std::shared_ptr<const detail::mount_state> state_;
};

// Releases the context. Taking the mount by value consumes it: any later
// use of the moved-from handle is rejected.
void close(mount m);

struct resolved_node {
  inode node;
  std::string canonical_path;
  int symlink_depth_used = 0;
};

enum class symlink_policy {
  follow,           // substitute symlinks everywhere, including the final component
  nofollow_final,   // keep a trailing symlink unresolved
};

resolved_node resolve_path(const mount& m, std::string_view path,
                           symlink_policy policy = symlink_policy::follow);

struct dir_entry_info {
  std::string name;
  node_kind kind = node_kind::file;
  meta_ref inode_ref;     // relative to the inode table start
  uint32_t inode_number = 0;
};

class dir_stream {
public:
  dir_stream(dir_stream&&) = default;
  dir_stream& operator=(dir_stream&&) = default;
  dir_stream(const dir_stream&) = delete;
  dir_stream& operator=(const dir_stream&) = delete;
  ~dir_stream() = default;

private:
  dir_stream() = default;
  friend dir_stream opendir(const mount&, std::string_view);
  friend std::optional<dir_entry_info> readdir(dir_stream&);

  std::shared_ptr<const detail::mount_state> state_;
  std::vector<uint8_t> payload_;
  size_t pos_ = 0;
  dir_header header_;
  uint32_t left_in_header_ = 0;
  uint64_t emitted_ = 0;
};

dir_stream opendir(const mount& m, std::string_view path);

// Next entry in on-disk order, or nullopt once the stream is exhausted.
std::optional<dir_entry_info> readdir(dir_stream& stream);

// Consumes the stream; double close is rejected at compile time because
// the stream must be moved in.
void closedir(dir_stream stream);

// Uncompressed size of the file at `path`, following symlinks.
uint64_t size(const mount& m, std::string_view path);

// Reads min(length, file_size - start) bytes beginning at `start`.
std::vector<uint8_t> read_file(const mount& m, std::string_view path, uint64_t start = 0,
                               uint64_t length = kReadAll);

struct listing {
  struct item {
    std::string name;
    node_kind kind = node_kind::file;
    uint64_t file_size = 0;
  };
  std::vector<item> items;
  unsigned file_count = 0;  // symlinks and special nodes count as files
  unsigned dir_count = 0;
};

listing ls(const mount& m, std::string_view path);

// Renders a listing the way a bootloader prints one: directories with a
// trailing '/', symlinks tagged <SYM>, then "N file(s), M dir(s)".
std::string format_listing(const listing& l);

// Fetches the inode a metadata reference points at.
inode fetch_inode(const mount& m, meta_ref ref);

// Every inode in on-disk table order. Parse failures name the index of
// the failing inode.
std::vector<inode> read_all_inodes(const mount& m);

// The raw listing bytes of a directory inode (empty for an empty
// directory).
std::vector<uint8_t> read_dir_listing_bytes(const mount& m, const inode& dir);

}  // namespace sqsh
