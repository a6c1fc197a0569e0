#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace sqsh::cli {

enum class mode {
  help,
  dump_super,
  dump_inodes,
  dump_dirs,
  extract,
  ls,
  load,
};

struct invocation {
  mode op = mode::help;
  std::filesystem::path image;
  std::string target_path;
  std::filesystem::path output;
  std::optional<uint64_t> pos;
  std::optional<uint64_t> bytes;
  bool local_time = false;
};

std::string usage_text();

// Maps -h/-s/-i/-d/-e and the ls/load subcommands onto modes. Throws
// error(errc::usage) on anything it cannot parse.
invocation parse_args(const std::vector<std::string>& args);

// Exit codes: 0 success, 2 usage, 3 probe failure, 4 path not found,
// 5 corrupt image.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitProbe = 3;
inline constexpr int kExitNotFound = 4;
inline constexpr int kExitCorrupt = 5;

int run(const invocation& inv, std::ostream& out, std::ostream& err);

// Convenience wrapper: parse then run, mapping usage errors to their
// exit code.
int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sqsh::cli
