#pragma once

// Shared test scaffolding: temp directories, canonical trees, and small
// helpers for asserting on typed errors.

#include <atomic>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "sqsh/error.hpp"
#include "support/image_builder.hpp"

namespace testsupport {

class temp_dir {
public:
  temp_dir() {
    static std::atomic<unsigned> counter{0};
    auto base = std::filesystem::temp_directory_path();
    path_ = base / ("sqsh_test_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  temp_dir(const temp_dir&) = delete;
  temp_dir& operator=(const temp_dir&) = delete;
  ~temp_dir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path file(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

// The tree the tool's reference outputs were produced from: an empty
// directory, a 12-byte text file ("Hello world" plus newline), and a
// symlink to the file.
inline tree_node reference_tree() {
  return dir_node("", {
                          dir_node("dir_example"),
                          file_node("file.txt", std::string_view("Hello world\n")),
                          symlink_node("slink", "file.txt"),
                      });
}

// A rootfs-shaped tree: 16 directories and two symlinks.
inline tree_node rootfs_tree() {
  std::vector<tree_node> children;
  for (const char* name : {"bin", "boot", "dev", "etc", "lib", "media", "mnt", "opt",
                           "proc", "root", "run", "sbin", "sys", "tmp", "usr", "var"})
    children.push_back(dir_node(name));
  children.push_back(symlink_node("lib32", "lib"));
  children.push_back(symlink_node("linuxrc", "bin/busybox"));
  return dir_node("", std::move(children));
}

inline std::vector<uint8_t> random_bytes(uint64_t seed, size_t size) {
  std::mt19937_64 rng(seed);
  std::vector<uint8_t> bytes(size);
  for (auto& b : bytes) b = static_cast<uint8_t>(rng());
  return bytes;
}

template <typename F>
std::optional<sqsh::errc> thrown_code(F&& f) {
  try {
    f();
    return std::nullopt;
  } catch (const sqsh::error& e) {
    return e.code();
  }
}

template <typename F>
std::string thrown_message(F&& f) {
  try {
    f();
    return {};
  } catch (const sqsh::error& e) {
    return e.what();
  }
}

inline bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

}  // namespace testsupport
