#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "dkhac/error.hpp"

namespace dkhac {

/// Writes `content` to `path` via a sibling temporary and a rename, so a
/// reader never sees a partial file. Parent directories are created.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content,
                              ErrorCode code = ErrorCode::CacheFailure) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), code, "cannot write " + tmp.string());
    out << content;
    out.flush();
    require(static_cast<bool>(out), code, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  require(!ec, code, "cannot move " + tmp.string() + " into place: " + ec.message());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::ParseError, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace dkhac
