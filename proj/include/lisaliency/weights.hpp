#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lisaliency/network_spec.hpp"
#include "lisaliency/tensor.hpp"

namespace lisaliency {

/// Named parameter tensors in a fixed order. Each learnable layer `L` owns
/// `L.weight` and `L.bias`.
class NetworkWeights {
 public:
  using Entry = std::pair<std::string, Tensor>;

  bool contains(std::string_view name) const;
  const Tensor& at(std::string_view name) const;
  Tensor& at(std::string_view name);
  // Inserts or replaces.
  void set(std::string name, Tensor value);

  std::span<const Entry> entries() const noexcept { return entries_; }
  std::span<Entry> entries() noexcept { return entries_; }
  std::size_t parameter_count() const;

  bool operator==(const NetworkWeights& other) const = default;

 private:
  std::vector<Entry> entries_;
};

std::string weight_name(std::string_view layer);
std::string bias_name(std::string_view layer);

// Parameter shapes for every learnable layer, in spec order.
std::vector<std::pair<std::string, Shape>> parameter_shapes(const NetworkSpec& spec);

// Standard deviation of the fan-in scaled uniform initializer,
// sqrt(2 / fan_in); the uniform bound is sqrt(3) times this.
double init_stddev(const Shape& weight_shape);

// Draws a fresh (weight, bias) pair for one layer. Deterministic in
// (seed, layer name); biases start at zero.
std::pair<Tensor, Tensor> draw_layer_parameters(std::string_view layer,
                                                const Shape& weight_shape,
                                                std::uint64_t seed);

NetworkWeights initialize_weights(const NetworkSpec& spec, std::uint64_t seed);

// Throws "shape mismatch at layer <name>" (or a missing/extra name error)
// unless the weights pair exactly with the spec.
void check_compatible(const NetworkSpec& spec, const NetworkWeights& weights);

// Binary weight file: "LISW", u32 version (1), u32 record count, then per
// record u16 name length, UTF-8 name, u8 dtype (0 = f32), u8 rank,
// u32 dims[rank], little-endian float payload.
inline constexpr std::uint32_t kWeightFileVersion = 1;

std::vector<std::uint8_t> serialize_weights(const NetworkWeights& weights);
NetworkWeights deserialize_weights(std::span<const std::uint8_t> bytes);

void save_weights(const NetworkWeights& weights, const std::filesystem::path& path);
NetworkWeights load_weights(const std::filesystem::path& path);
NetworkWeights load_weights(const std::filesystem::path& path, const NetworkSpec& spec);

}  // namespace lisaliency
