#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <string_view>

#include "causalkg/error.hpp"

namespace test {

namespace fs = std::filesystem;

inline fs::path source_dir() { return fs::path(CAUSALKG_SOURCE_DIR); }
inline fs::path fixture(std::string_view name) { return source_dir() / "data" / "fixtures" / name; }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("causalkg-test-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(std::string_view name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_file(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Code of the causalkg::Error thrown by `fn`, or "" if none was thrown.
template <typename Fn>
std::string error_code(Fn&& fn) {
  try {
    fn();
  } catch (const causalkg::Error& e) {
    return e.code();
  }
  return "";
}

}  // namespace test
