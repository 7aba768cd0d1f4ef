#pragma once

#include <filesystem>
#include <map>
#include <random>
#include <string>

#include "qf/bestiary.hpp"

namespace qf_test {

inline const qf::Bestiary& default_bestiary() {
  static const auto b = qf::generate_bestiary(7);
  return b;
}

/// Full 388-monster corpus at a given distractor rate, built once per rate.
inline const qf::Corpus& default_corpus(double distractor_rate) {
  static std::map<double, qf::Corpus> cache;
  auto it = cache.find(distractor_rate);
  if (it == cache.end()) {
    qf::StyleConfig style;
    style.distractor_rate = distractor_rate;
    it = cache.emplace(distractor_rate, qf::generate_corpus(default_bestiary(), style, 11)).first;
  }
  return it->second;
}

/// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() / ("qf_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

}  // namespace qf_test
