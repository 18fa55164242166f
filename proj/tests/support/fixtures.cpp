#include "fixtures.hpp"

#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

namespace tandem::testing {

std::filesystem::path source_dir() { return TANDEM_SOURCE_DIR; }

std::filesystem::path fixture_path(const std::string& relative) {
  return source_dir() / "tests" / "fixtures" / relative;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << contents;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

TempDir::TempDir(const std::string& prefix) {
  std::random_device rd;
  std::mt19937_64 rng(rd());
  path_ = std::filesystem::temp_directory_path() /
          (prefix + "-" + std::to_string(rng() % 1'000'000'000'000ULL));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::map<std::string, std::string> snapshot_tree(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  if (!std::filesystem::exists(root)) return out;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    auto rel = std::filesystem::relative(entry.path(), root).string();
    if (entry.is_directory()) {
      out[rel + "/"] = "";
    } else {
      out[rel] = read_file(entry.path());
    }
  }
  return out;
}

}  // namespace tandem::testing
