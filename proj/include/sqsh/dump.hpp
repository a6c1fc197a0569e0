#pragma once

#include <string>
#include <string_view>

#include "sqsh/vfs.hpp"

namespace sqsh {

enum class dump_section {
  superblock,
  inode_table,
  directory_table,
  entry,
};

struct dump_report {
  std::string text;
  dump_section section = dump_section::superblock;
};

enum class time_rendering {
  utc,    // deterministic default
  local,  // opt-in host timezone
};

dump_report dump_superblock(const mount& m, time_rendering tz = time_rendering::utc);
dump_report dump_inode_table(const mount& m, time_rendering tz = time_rendering::utc);
dump_report dump_directory_table(const mount& m);

// File paths emit the raw content; paths with a trailing '/' emit the
// directory's listing.
dump_report dump_entry(const mount& m, std::string_view path);

}  // namespace sqsh
