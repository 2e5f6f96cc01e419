#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <gtest/gtest.h>

#include "lift/data.hpp"
#include "lift/error.hpp"
#include "lift/random.hpp"

namespace lift::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("lift-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline std::size_t uniform_int(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

/// Random classification dataset with labels "0".."c-1", each present.
inline TabularDataset random_classification(Rng& rng, std::size_t n, std::size_t p, std::size_t c) {
  FeatureSchema schema;
  schema.p = p;
  FeatureMatrix rows;
  std::vector<Target> targets;
  for (std::size_t i = 0; i < n; ++i) {
    FeatureRow row;
    for (std::size_t j = 0; j < p; ++j) row.push_back(uniform(rng, -10, 10));
    rows.push_back(row);
    targets.emplace_back(std::to_string(i < c ? i : uniform_int(rng, 0, c - 1)));
  }
  return TabularDataset(schema, rows, targets, TaskKind::classification);
}

inline TabularDataset random_regression(Rng& rng, std::size_t n, std::size_t p) {
  FeatureSchema schema;
  schema.p = p;
  FeatureMatrix rows;
  std::vector<Target> targets;
  for (std::size_t i = 0; i < n; ++i) {
    FeatureRow row;
    for (std::size_t j = 0; j < p; ++j) row.push_back(uniform(rng, -10, 10));
    rows.push_back(row);
    targets.emplace_back(uniform(rng, -100, 100));
  }
  return TabularDataset(schema, rows, targets, TaskKind::regression);
}

}  // namespace lift::testing

#define EXPECT_LIFT_ERROR(stmt, expected_code)                                       \
  do {                                                                               \
    try {                                                                            \
      stmt;                                                                          \
      ADD_FAILURE() << "expected " << ::lift::to_string(expected_code) << " from " #stmt; \
    } catch (const ::lift::Error& e) {                                               \
      EXPECT_EQ(e.code(), expected_code) << e.what();                                \
    }                                                                                \
  } while (0)
