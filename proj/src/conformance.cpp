#include "sqsh/conformance.hpp"

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <set>

#include <unistd.h>

#include "sqsh/error.hpp"
#include "sqsh/vfs.hpp"

namespace fs = std::filesystem;

namespace sqsh::conformance {

namespace {

std::vector<uint8_t> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in),
                              std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, const std::vector<uint8_t>& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(content.data()),
            static_cast<std::streamsize>(content.size()));
}

std::string shell_quote(const std::string& s) {
  std::string quoted = "'";
  for (char c : s) {
    if (c == '\'')
      quoted += "'\\''";
    else
      quoted += c;
  }
  quoted += "'";
  return quoted;
}

}  // namespace

bool tool_available(std::string_view tool) {
  const char* path_env = std::getenv("PATH");
  if (!path_env) return false;
  std::string paths(path_env);
  size_t start = 0;
  while (start <= paths.size()) {
    size_t end = paths.find(':', start);
    if (end == std::string::npos) end = paths.size();
    std::string dir = paths.substr(start, end - start);
    if (!dir.empty()) {
      fs::path candidate = fs::path(dir) / std::string(tool);
      if (::access(candidate.c_str(), X_OK) == 0) return true;
    }
    start = end + 1;
  }
  return false;
}

std::optional<command_result> run_command(const std::string& command) {
  FILE* pipe = ::popen((command + " 2>&1").c_str(), "r");
  if (!pipe) return std::nullopt;
  command_result result;
  std::array<char, 4096> buf;
  size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0)
    result.output.append(buf.data(), n);
  result.status = ::pclose(pipe);
  return result;
}

void generate_tree(const corpus_spec& spec, const fs::path& root) {
  std::mt19937_64 rng(spec.seed);
  fs::create_directories(root);

  std::vector<fs::path> all_dirs{root};
  std::vector<fs::path> frontier{root};
  int dir_counter = 0;
  for (int level = 0; level < spec.depth; ++level) {
    std::vector<fs::path> next;
    for (const fs::path& parent : frontier) {
      int subdirs = 1 + static_cast<int>(rng() % static_cast<uint64_t>(spec.fanout));
      for (int k = 0; k < subdirs; ++k) {
        fs::path dir = parent / ("d" + std::to_string(dir_counter++));
        fs::create_directory(dir);
        all_dirs.push_back(dir);
        next.push_back(dir);
      }
    }
    frontier = std::move(next);
  }

  std::vector<fs::path> files;
  for (int i = 0; i < spec.file_count; ++i) {
    const fs::path& parent = all_dirs[rng() % all_dirs.size()];
    fs::path file = parent / ("f" + std::to_string(i) + ".bin");

    uint64_t size;
    if (i == 0 && spec.with_empty_file) {
      size = 0;
    } else {
      switch (rng() % 4) {
        case 0: size = rng() % 512; break;                             // tiny
        case 1: size = 1 + rng() % 65536; break;                       // sub-block
        case 2: size = 131072 * (1 + rng() % 3); break;                // block multiples
        default: size = rng() % std::max<uint64_t>(spec.max_file_size, 1); break;
      }
    }

    std::vector<uint8_t> content(size);
    int style = static_cast<int>(rng() % 3);
    if (style == 0) {
      for (auto& b : content) b = static_cast<uint8_t>(rng());
    } else if (style == 1) {
      for (size_t k = 0; k < content.size(); ++k)
        content[k] = static_cast<uint8_t>('A' + (k % 23));
    } else if (spec.with_sparse && size > 8192) {
      // zero body with a few scattered markers, exercising sparse blocks
      for (int marks = 0; marks < 8; ++marks)
        content[rng() % size] = static_cast<uint8_t>(1 + rng() % 255);
    } else {
      for (auto& b : content) b = static_cast<uint8_t>(rng() % 7);
    }
    write_file(file, content);
    files.push_back(file);
  }

  if (spec.with_symlinks && !files.empty()) {
    const fs::path& target = files[rng() % files.size()];
    fs::create_symlink(fs::relative(target, root), root / "link_rel");
    fs::create_symlink("/" + fs::relative(files[0], root).string(), root / "link_abs");
  }
  if (spec.with_dangling_symlink)
    fs::create_symlink("no_such_target", root / "link_dangling");
  if (spec.with_symlink_loop) {
    fs::create_symlink("loop_b", root / "loop_a");
    fs::create_symlink("loop_a", root / "loop_b");
  }
}

built_image& built_image::operator=(built_image&& other) noexcept {
  std::swap(image_, other.image_);
  std::swap(tree_, other.tree_);
  return *this;
}

built_image::~built_image() {
  std::error_code ec;
  if (!tree_.empty()) fs::remove_all(tree_, ec);
  if (!image_.empty()) fs::remove(image_, ec);
}

built_image build_image(const corpus_spec& spec, const std::vector<std::string>& flags,
                        const fs::path& workdir) {
  if (!tool_available("mksquashfs"))
    fail(errc::tool_missing, "mksquashfs is not on PATH");

  fs::create_directories(workdir);
  fs::path tree = workdir / ("tree_" + std::to_string(spec.seed));
  fs::path image = workdir / ("image_" + std::to_string(spec.seed) + ".sqfs");
  fs::remove_all(tree);
  fs::remove(image);
  generate_tree(spec, tree);

  std::string cmd = "mksquashfs " + shell_quote(tree.string()) + " " +
                    shell_quote(image.string()) + " -comp gzip -noappend";
  for (const std::string& f : flags) cmd += " " + f;

  auto result = run_command(cmd);
  if (!result || result->status != 0) {
    std::error_code ec;
    fs::remove_all(tree, ec);
    fail(errc::builder_failed,
         "mksquashfs failed: " + (result ? result->output : std::string("cannot spawn")));
  }
  return built_image(image, tree);
}

namespace {

void verify_dir(const mount& m, const fs::path& fs_dir, const std::string& img_path,
                bool use_unsquashfs, const fs::path& image, verify_report& report) {
  std::set<std::string> tree_names;

  for (const auto& entry : fs::directory_iterator(fs_dir)) {
    std::string name = entry.path().filename().string();
    tree_names.insert(name);
    std::string child = img_path == "/" ? "/" + name : img_path + "/" + name;

    try {
      if (entry.is_symlink()) {
        resolved_node rn = resolve_path(m, child, symlink_policy::nofollow_final);
        if (!rn.node.is_symlink()) {
          report.mismatches.push_back(child + ": expected a symlink");
        } else {
          std::string expected = fs::read_symlink(entry.path()).string();
          const auto& link = std::get<basic_symlink>(rn.node.body);
          if (link.target != expected)
            report.mismatches.push_back(child + ": symlink target '" + link.target +
                                        "' != '" + expected + "'");
        }
      } else if (entry.is_directory()) {
        verify_dir(m, entry.path(), child, use_unsquashfs, image, report);
      } else if (entry.is_regular_file()) {
        std::vector<uint8_t> expected = slurp(entry.path());
        std::vector<uint8_t> got = read_file(m, child);
        ++report.files_checked;
        if (got != expected)
          report.mismatches.push_back(child + ": content differs (" +
                                      std::to_string(got.size()) + " vs " +
                                      std::to_string(expected.size()) + " bytes)");
        if (size(m, child) != expected.size())
          report.mismatches.push_back(child + ": size() disagrees with tree");
        if (use_unsquashfs) {
          auto reference = unsquashfs_cat(image, child);
          if (!reference || *reference != expected)
            report.mismatches.push_back(child + ": unsquashfs -cat disagrees");
        }
      }
    } catch (const error& e) {
      report.mismatches.push_back(child + ": " + e.what());
    }
  }

  try {
    listing l = ls(m, img_path.empty() ? "/" : img_path);
    std::set<std::string> image_names;
    for (const auto& item : l.items) image_names.insert(item.name);
    if (image_names != tree_names)
      report.mismatches.push_back(img_path + ": listing does not match the tree");
  } catch (const error& e) {
    report.mismatches.push_back(img_path + ": ls failed: " + e.what());
  }
}

}  // namespace

verify_report verify_extraction(const fs::path& image, const fs::path& tree) {
  verify_report report;
  mount m = mount::probe(block_source::open_image(image));
  bool use_unsquashfs = tool_available("unsquashfs");
  verify_dir(m, tree, "/", use_unsquashfs, image, report);
  close(std::move(m));
  return report;
}

std::optional<std::string> unsquashfs_stat(const fs::path& image) {
  if (!tool_available("unsquashfs")) return std::nullopt;
  auto result = run_command("unsquashfs -s " + shell_quote(image.string()));
  if (!result || result->status != 0) return std::nullopt;
  return result->output;
}

std::optional<std::vector<uint8_t>> unsquashfs_cat(const fs::path& image,
                                                   const std::string& path) {
  if (!tool_available("unsquashfs")) return std::nullopt;
  std::string rel = path;
  while (!rel.empty() && rel.front() == '/') rel.erase(rel.begin());
  // -cat writes the raw bytes to stdout; stderr is dropped to keep the
  // stream clean
  FILE* pipe = ::popen(("unsquashfs -cat " + shell_quote(image.string()) + " " +
                        shell_quote(rel) + " 2>/dev/null")
                           .c_str(),
                       "r");
  if (!pipe) return std::nullopt;
  std::vector<uint8_t> bytes;
  std::array<uint8_t, 4096> buf;
  size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0)
    bytes.insert(bytes.end(), buf.data(), buf.data() + n);
  if (::pclose(pipe) != 0) return std::nullopt;
  return bytes;
}

}  // namespace sqsh::conformance
