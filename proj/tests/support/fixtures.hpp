#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "lisaliency/network_spec.hpp"
#include "oracles.hpp"

namespace fixtures {

// Small VGG-shaped network for fast tests: two conv blocks, fc head.
inline lisaliency::NetworkSpec tiny_spec(std::size_t classes = 6, std::size_t size = 16) {
  std::string names;
  for (std::size_t i = 0; i < classes; ++i) names += (i ? ", c" : "c") + std::to_string(i);
  const std::string s = std::to_string(size);
  return lisaliency::parse_network_spec(
      "name: tiny\n"
      "input: [3, " + s + ", " + s + "]\n"
      "classes: [" + names + "]\n"
      "layers:\n"
      "  - {name: conv1, type: conv, out: 4, kernel: 3, pad: 1}\n"
      "  - {name: relu1, type: relu}\n"
      "  - {name: pool1, type: maxpool, window: 2}\n"
      "  - {name: conv2, type: conv, out: 6, kernel: 3, pad: 1}\n"
      "  - {name: relu2, type: relu}\n"
      "  - {name: pool2, type: maxpool, window: 2}\n"
      "  - {name: flatten, type: flatten}\n"
      "  - {name: fc1, type: fc, out: 12}\n"
      "  - {name: relu3, type: relu}\n"
      "  - {name: fc2, type: fc, out: " + std::to_string(classes) + "}\n"
      "  - {name: prob, type: softmax}\n");
}

inline std::filesystem::path source_dir() { return LISALIENCY_SOURCE_DIR; }

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("lisaliency_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixtures
