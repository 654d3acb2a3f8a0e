#pragma once

#include <doctest.h>

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "mbda/util.hpp"

namespace mbda::test {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng{std::random_device{}()};
    path_ = std::filesystem::temp_directory_path() / ("mbda-test-" + hex64(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string str() const { return path_.string(); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string trap(const std::string& ts, const std::string& oid, const std::string& sta = {},
                        const std::string& ap = {}) {
  std::string out = ts + " wlc-1 # trap = OID: " + oid;
  if (!sta.empty()) out += " # sta = MAC: " + sta;
  if (!ap.empty()) out += " # ap = STRING: " + ap;
  return out;
}

inline void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  write_file(path, text);
}

}  // namespace mbda::test
