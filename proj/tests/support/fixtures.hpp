#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "json.hpp"

namespace tandem::testing {

std::filesystem::path source_dir();
std::filesystem::path fixture_path(const std::string& relative);
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& prefix = "tandem-test");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Every regular file under `root` mapped to its bytes, keyed by relative
// path. Used to prove that a failed operation left a directory untouched.
std::map<std::string, std::string> snapshot_tree(const std::filesystem::path& root);

}  // namespace tandem::testing
