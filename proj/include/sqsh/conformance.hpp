#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sqsh::conformance {

// Deterministic corpus description: the same seed always yields the same
// on-disk tree.
struct corpus_spec {
  uint64_t seed = 1;
  int depth = 3;
  int fanout = 3;
  int file_count = 40;
  uint64_t max_file_size = uint64_t{1} << 20;
  bool with_symlinks = true;
  bool with_dangling_symlink = false;
  bool with_symlink_loop = false;
  bool with_sparse = true;
  bool with_empty_file = true;
};

void generate_tree(const corpus_spec& spec, const std::filesystem::path& root);

bool tool_available(std::string_view tool);

struct command_result {
  int status = -1;
  std::string output;
};

std::optional<command_result> run_command(const std::string& command);

// A built reference image plus the source tree it came from; both are
// removed on destruction.
class built_image {
public:
  built_image(std::filesystem::path image, std::filesystem::path tree)
      : image_(std::move(image)), tree_(std::move(tree)) {}
  built_image(built_image&& other) noexcept { *this = std::move(other); }
  built_image& operator=(built_image&& other) noexcept;
  built_image(const built_image&) = delete;
  built_image& operator=(const built_image&) = delete;
  ~built_image();

  const std::filesystem::path& image() const { return image_; }
  const std::filesystem::path& tree() const { return tree_; }

private:
  std::filesystem::path image_;
  std::filesystem::path tree_;
};

// Generates the corpus and runs `mksquashfs <src> <img> -comp gzip
// [flags]`. Fails with tool_missing when the builder is not on PATH.
built_image build_image(const corpus_spec& spec, const std::vector<std::string>& flags,
                        const std::filesystem::path& workdir);

struct verify_report {
  std::vector<std::string> mismatches;
  size_t files_checked = 0;

  bool ok() const { return mismatches.empty(); }
};

// Extracts every node through the reader and compares it against the
// source tree; when unsquashfs is available, file contents are also
// cross-checked against `unsquashfs -cat`.
verify_report verify_extraction(const std::filesystem::path& image,
                                const std::filesystem::path& tree);

// `unsquashfs -s` output, when the tool is available.
std::optional<std::string> unsquashfs_stat(const std::filesystem::path& image);

// One file's bytes via `unsquashfs -cat`.
std::optional<std::vector<uint8_t>> unsquashfs_cat(const std::filesystem::path& image,
                                                   const std::string& path);

}  // namespace sqsh::conformance
