#include "sqsh/cli.hpp"

#include <charconv>
#include <fstream>

#include "sqsh/dump.hpp"
#include "sqsh/error.hpp"
#include "sqsh/vfs.hpp"

namespace sqsh::cli {

std::string usage_text() {
  return
      "usage: sqfs [-h]\n"
      "       sqfs [-s] [-i] [-d] <fs-image>\n"
      "       sqfs [-e] <fs-image> /path/to/dir/\n"
      "       sqfs [-e] <fs-image> /path/to/file\n"
      "       sqfs ls <fs-image> [directory]\n"
      "       sqfs load <fs-image> <file> -o <out-file> [--bytes <n> [--pos <n>]]\n"
      "\n"
      "Tool to analyze the content of a SquashFS image\n"
      "\n"
      "Options:\n"
      "       -h: Prints the usage and exits\n"
      "       -s: Dumps the contents of a SquashFS image's superblock\n"
      "       -i: Dumps the contents of a SquashFS image's inode table\n"
      "       -d: Dumps the contents of a SquashFS image's directory table\n"
      "       -e: Dumps the contents of a SquashFS image's file or directory.\n"
      "           For directories, end path with '/'.\n"
      "       --local-time: Render timestamps in the host timezone (default UTC)\n"
      "\n"
      "Subcommands:\n"
      "       ls <fs-image> [directory]\n"
      "           List files in directory. Default: root (/).\n"
      "       load <fs-image> <file> -o <out-file> [--bytes <n> [--pos <n>]]\n"
      "           Load a file's content into <out-file>. 'pos' gives the file\n"
      "           position to start loading from. If 'pos' is omitted, 0 is\n"
      "           used. 'pos' requires 'bytes'. 'bytes' gives the size to\n"
      "           load. If 'bytes' is 0 or omitted, the load stops on end of\n"
      "           file.\n"
      "\n"
      "Parameters:\n"
      "       <fs-image>: Path to the filesystem image\n";
}

namespace {

[[noreturn]] void usage_error(const std::string& message) {
  fail(errc::usage, message);
}

uint64_t parse_number(const std::string& text, const char* what) {
  uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    usage_error(std::string("invalid ") + what + ": '" + text + "'");
  return value;
}

invocation parse_subcommand(const std::vector<std::string>& args) {
  invocation inv;
  inv.op = args[0] == "ls" ? mode::ls : mode::load;

  std::vector<std::string> positional;
  for (size_t i = 1; i < args.size(); ++i) {
    const std::string& a = args[i];
    auto value_of = [&](const char* flag) -> const std::string& {
      if (i + 1 >= args.size()) usage_error(std::string(flag) + " requires a value");
      return args[++i];
    };
    if (a == "-o" || a == "--output") {
      inv.output = value_of("-o");
    } else if (a == "--pos") {
      inv.pos = parse_number(value_of("--pos"), "--pos");
    } else if (a == "--bytes") {
      inv.bytes = parse_number(value_of("--bytes"), "--bytes");
    } else if (!a.empty() && a[0] == '-') {
      usage_error("unknown option '" + a + "'");
    } else {
      positional.push_back(a);
    }
  }

  if (positional.empty()) usage_error("missing <fs-image>");
  inv.image = positional[0];

  if (inv.op == mode::ls) {
    if (positional.size() > 2) usage_error("ls takes at most one directory");
    inv.target_path = positional.size() == 2 ? positional[1] : "/";
    if (inv.pos || inv.bytes || !inv.output.empty())
      usage_error("ls does not take -o/--pos/--bytes");
  } else {
    if (positional.size() != 2) usage_error("load needs <fs-image> and a file path");
    inv.target_path = positional[1];
    if (inv.output.empty()) usage_error("load requires -o <out-file>");
    if (inv.pos && !inv.bytes) usage_error("'pos' requires 'bytes'");
  }
  return inv;
}

}  // namespace

invocation parse_args(const std::vector<std::string>& args) {
  if (args.empty()) usage_error("no arguments");

  if (args[0] == "ls" || args[0] == "load") return parse_subcommand(args);

  invocation inv;
  bool have_mode = false;
  std::vector<std::string> positional;

  auto set_mode = [&](mode m) {
    if (have_mode) usage_error("choose a single mode option");
    inv.op = m;
    have_mode = true;
  };

  for (const std::string& a : args) {
    if (a == "-h" || a == "--help") {
      inv.op = mode::help;
      return inv;
    } else if (a == "-s") {
      set_mode(mode::dump_super);
    } else if (a == "-i") {
      set_mode(mode::dump_inodes);
    } else if (a == "-d") {
      set_mode(mode::dump_dirs);
    } else if (a == "-e") {
      set_mode(mode::extract);
    } else if (a == "--local-time") {
      inv.local_time = true;
    } else if (!a.empty() && a[0] == '-') {
      usage_error("unknown option '" + a + "'");
    } else {
      positional.push_back(a);
    }
  }

  if (!have_mode) usage_error("missing a mode option (-s, -i, -d or -e)");
  if (positional.empty()) usage_error("missing <fs-image>");
  inv.image = positional[0];

  if (inv.op == mode::extract) {
    if (positional.size() != 2) usage_error("-e needs <fs-image> and a path");
    inv.target_path = positional[1];
  } else if (positional.size() != 1) {
    usage_error("unexpected argument '" + positional[1] + "'");
  }
  return inv;
}

namespace {

int exit_code_for(errc code) {
  switch (code) {
    case errc::not_found:
    case errc::not_a_directory:
    case errc::is_a_directory:
    case errc::not_readable:
    case errc::symlink_loop:
      return kExitNotFound;
    default:
      return kExitCorrupt;
  }
}

int run_mounted(const invocation& inv, const mount& m, std::ostream& out, std::ostream& err) {
  time_rendering tz = inv.local_time ? time_rendering::local : time_rendering::utc;
  switch (inv.op) {
    case mode::dump_super:
      out << dump_superblock(m, tz).text;
      return kExitOk;
    case mode::dump_inodes:
      out << dump_inode_table(m, tz).text;
      return kExitOk;
    case mode::dump_dirs:
      out << dump_directory_table(m).text;
      return kExitOk;
    case mode::extract:
      out << dump_entry(m, inv.target_path).text;
      return kExitOk;
    case mode::ls:
      out << format_listing(ls(m, inv.target_path));
      return kExitOk;
    case mode::load: {
      uint64_t pos = inv.pos.value_or(0);
      uint64_t want = (inv.bytes && *inv.bytes > 0) ? *inv.bytes : kReadAll;
      std::vector<uint8_t> data = read_file(m, inv.target_path, pos, want);

      std::ofstream file(inv.output, std::ios::binary | std::ios::trunc);
      if (!file) {
        err << "sqfs: cannot write " << inv.output.string() << "\n";
        return kExitNotFound;
      }
      file.write(reinterpret_cast<const char*>(data.data()),
                 static_cast<std::streamsize>(data.size()));
      file.close();
      out << data.size() << " bytes read\n";
      return kExitOk;
    }
    default:
      return kExitOk;
  }
}

}  // namespace

int run(const invocation& inv, std::ostream& out, std::ostream& err) {
  if (inv.op == mode::help) {
    out << usage_text();
    return kExitOk;
  }

  std::optional<mount> m;
  try {
    m.emplace(mount::probe(block_source::open_image(inv.image)));
  } catch (const error& e) {
    err << "sqfs: cannot mount " << inv.image.string() << ": " << e.what() << "\n";
    return kExitProbe;
  }

  try {
    int rc = run_mounted(inv, *m, out, err);
    close(std::move(*m));
    return rc;
  } catch (const error& e) {
    close(std::move(*m));
    err << "sqfs: " << e.what() << "\n";
    return exit_code_for(e.code());
  }
}

int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    invocation inv = parse_args(args);
    return run(inv, out, err);
  } catch (const error& e) {
    err << "sqfs: " << e.what() << "\n" << usage_text();
    return kExitUsage;
  }
}

}  // namespace sqsh::cli
