#include "sqsh/storage.hpp"

#include <cerrno>
#include <cstring>

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include "sqsh/error.hpp"

namespace sqsh {

block_source::fd_handle::~fd_handle() {
  if (fd >= 0) ::close(fd);
}

block_source::block_source(int fd, uint64_t size, std::string identity)
    : fd_(std::make_shared<const fd_handle>(fd)),
      size_(size),
      identity_(std::move(identity)) {}

block_source block_source::open_image(const std::filesystem::path& path) {
  int fd = ::open(path.c_str(), O_RDONLY);
  if (fd < 0) {
    int err = errno;
    if (err == EACCES)
      fail(errc::permission_denied, "cannot open " + path.string() + ": permission denied");
    fail(errc::not_found, "cannot open " + path.string() + ": " + std::strerror(err));
  }

  struct stat st {};
  if (::fstat(fd, &st) != 0) {
    int err = errno;
    ::close(fd);
    fail(errc::io_failure, "fstat " + path.string() + ": " + std::strerror(err));
  }
  if (!S_ISREG(st.st_mode) && !S_ISBLK(st.st_mode)) {
    ::close(fd);
    fail(errc::not_found, path.string() + " is not a regular file");
  }
  if (st.st_size == 0) {
    ::close(fd);
    fail(errc::empty_file, path.string() + " is empty; cannot hold a superblock");
  }
  return block_source(fd, static_cast<uint64_t>(st.st_size), path.string());
}

void block_source::read_at(uint64_t offset, std::span<uint8_t> out) const {
  if (offset > size_ || out.size() > size_ - offset)
    fail(errc::out_of_bounds,
         identity_ + ": read of " + std::to_string(out.size()) + " bytes at offset " +
             std::to_string(offset) + " exceeds image size " + std::to_string(size_));

  size_t done = 0;
  while (done < out.size()) {
    ssize_t n = ::pread(fd_->fd, out.data() + done, out.size() - done,
                        static_cast<off_t>(offset + done));
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(errc::io_failure, identity_ + ": read failed: " + std::strerror(errno));
    }
    if (n == 0)
      fail(errc::io_failure, identity_ + ": unexpected end of file");
    done += static_cast<size_t>(n);
  }
}

std::vector<uint8_t> block_source::read_at(uint64_t offset, size_t length) const {
  std::vector<uint8_t> out(length);
  read_at(offset, std::span<uint8_t>(out));
  return out;
}

}  // namespace sqsh
