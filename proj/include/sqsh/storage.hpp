#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sqsh {

// Random-access byte source over a filesystem image, standing in for
// direct reads from a storage device partition. Immutable after open;
// reads are positioned, so concurrent readers are safe.
class block_source {
public:
  static block_source open_image(const std::filesystem::path& path);

  uint64_t total_size() const { return size_; }
  const std::string& identity() const { return identity_; }

  void read_at(uint64_t offset, std::span<uint8_t> out) const;
  std::vector<uint8_t> read_at(uint64_t offset, size_t length) const;

private:
  block_source(int fd, uint64_t size, std::string identity);

  struct fd_handle {
    explicit fd_handle(int fd) : fd(fd) {}
    fd_handle(const fd_handle&) = delete;
    fd_handle& operator=(const fd_handle&) = delete;
    ~fd_handle();
    int fd;
  };

  std::shared_ptr<const fd_handle> fd_;
  uint64_t size_ = 0;
  std::string identity_;
};

}  // namespace sqsh
