#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lisaliency/experiments.hpp"
#include "lisaliency/preprocess.hpp"
#include "lisaliency/train.hpp"

namespace lisaliency {

// Synthetic shapes-on-scenes corpus: one textured sprite per image on one of
// four background families.

inline constexpr std::size_t kShapeClasses = 8;
inline constexpr std::size_t kBackgroundFamilies = 4;

std::span<const std::string_view> shape_class_names();

enum class Split { kTrain, kTest, kAdversarial };
std::string_view to_string(Split split);

struct Box {
  std::size_t x = 0, y = 0, w = 0, h = 0;

  bool contains(std::size_t px, std::size_t py) const {
    return px >= x && px < x + w && py >= y && py < y + h;
  }
};

struct SceneParams {
  std::size_t label = 0;
  std::size_t family = 0;
  std::size_t size = 64;
};

struct Scene {
  Tensor image;  // (3, size, size) in [0, 1]
  Box box;
};

// Class c usually sits on background family c % 4. Each image draws from its
// own generator, so a scene depends only on (seed, split, index).
Scene render_scene(const SceneParams& params, std::mt19937_64& rng);

struct DatasetCounts {
  std::size_t train = 960;
  std::size_t test = 500;
  std::size_t adversarial = 200;
  std::size_t image_size = 64;
  // Probability that an in-distribution image uses its class's own family.
  double family_affinity = 0.7;
};

// Writes <dir>/{train,test,adversarial}/{images/*.png,labels.csv}. Output is
// byte-identical for a given seed and counts. Splits with count 0 are skipped.
void generate_dataset(const std::filesystem::path& dir, std::uint64_t seed,
                      const DatasetCounts& counts = {});

struct DatasetSample {
  std::string id;  // file name
  Tensor image;    // (3, H, W) in [0, 1]
  std::size_t label = 0;
  Box box;
};

// Reads one split directory (labels.csv + images/). `limit` 0 means all rows.
std::vector<DatasetSample> load_dataset(const std::filesystem::path& split_dir,
                                        std::size_t limit = 0);

std::vector<LabeledImage> to_labeled(std::span<const DatasetSample> samples,
                                     const PreprocessConfig& cfg);
// Crops to the network resolution but keeps image-space values.
std::vector<ExperimentSample> to_experiment(std::span<const DatasetSample> samples,
                                            const PreprocessConfig& cfg);

}  // namespace lisaliency
