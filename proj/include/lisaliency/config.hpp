#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "lisaliency/dataset.hpp"
#include "lisaliency/experiments.hpp"
#include "lisaliency/sanity.hpp"
#include "lisaliency/saliency.hpp"
#include "lisaliency/train.hpp"

namespace lisaliency {

inline constexpr std::string_view kVersion = "1.0.0";
inline constexpr int kConfigSchemaVersion = 1;

struct SanitySettings {
  RandomizationMode mode = RandomizationMode::kCascading;
  std::size_t seeds = 10;
  std::uint64_t first_seed = 1000;
};

struct DatasetSettings {
  std::uint64_t seed = 7;
  DatasetCounts counts;
};

struct PathSettings {
  std::string spec;
  std::string weights;
  std::string dataset;
};

// Every tunable of a run in one place. Serialized as YAML; unknown keys are
// rejected when loading.
struct RunConfig {
  SaliencyConfig saliency;
  TrainParams train;
  BlurConfig blur;
  SanitySettings sanity;
  DatasetSettings dataset;
  PathSettings paths;

  void validate() const;
};

RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string to_yaml(const RunConfig& config);

// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

// <artifact>.meta.yaml next to an emitted artifact: tool version, command,
// seed, weights checksum and the fully resolved config.
std::filesystem::path sidecar_path(const std::filesystem::path& artifact);
void write_sidecar(const std::filesystem::path& artifact, std::string_view command,
                   const RunConfig& config, const std::filesystem::path& weights);

}  // namespace lisaliency
