#pragma once

#include "mfscale/pool.hpp"

#include <filesystem>
#include <string>
#include <unistd.h>

namespace testutil {

// Fresh directory under the system temp dir, removed on scope exit.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("mfscale_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

// Small shared pool; low Reynolds numbers only would bias tests, so it is a
// plain seeded draw.
inline const mfscale::SamplePool& small_pool() {
  static const mfscale::SamplePool pool = mfscale::generate_pool(24, 5);
  return pool;
}

}  // namespace testutil
