#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "json.hpp"

namespace swfc_test {

inline std::string data(const std::string& rel) { return std::string(SWFC_DATA_DIR) + "/" + rel; }

inline const nlohmann::json& oracle() {
  static const nlohmann::json j = [] {
    std::ifstream in(data("oracle/values.json"));
    return nlohmann::json::parse(in);
  }();
  return j;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("swfc-test-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace swfc_test
