// helpers.hpp — shared fixtures for the unit tests.
#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "core/dataset.hpp"
#include "core/matrix.hpp"
#include "core/rng.hpp"

namespace testutil {

// Unique scratch directory removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<uint64_t> counter{0};
    dir_ = std::filesystem::temp_directory_path() /
           ("ctrl_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::string dir() const { return dir_.string(); }

private:
  std::filesystem::path dir_;
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline ctrl::Matrix matrix_of(const std::vector<std::vector<double>>& rows) {
  ctrl::Matrix m(static_cast<int64_t>(rows.size()),
                 rows.empty() ? 0 : static_cast<int64_t>(rows[0].size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t j = 0; j < rows[i].size(); ++j) {
      m(static_cast<int64_t>(i), static_cast<int64_t>(j)) = rows[i][j];
    }
  }
  return m;
}

inline ctrl::Dataset make_dataset(const std::vector<std::vector<double>>& x,
                                  const std::vector<double>& y,
                                  const std::vector<std::string>& source) {
  return ctrl::Dataset::make(matrix_of(x), y, source);
}

}  // namespace testutil
