#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lisaliency/tensor.hpp"

namespace lisaliency {

// 8-bit PNG (any colour type, converted to RGB) or binary PPM (P6) into a
// (3, H, W) tensor of v / 255.
Tensor load_image(const std::filesystem::path& path);
Tensor decode_png(std::span<const std::uint8_t> bytes);
Tensor decode_ppm(std::span<const std::uint8_t> bytes);

// (3, H, W) -> RGB, (H, W) -> grayscale. Values in [0, 1] are quantized to
// round(v * 255) after clamping.
std::vector<std::uint8_t> encode_png(const Tensor& image);
void save_png(const Tensor& image, const std::filesystem::path& path);
void save_ppm(const Tensor& image, const std::filesystem::path& path);

// Maps [0, max] of an (H, W) map onto a grayscale ramp (black = 0).
Tensor render_map(const Tensor& map);

// H rows of W comma-separated values, full float precision.
void write_map_csv(const Tensor& map, const std::filesystem::path& path);
Tensor read_map_csv(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace lisaliency
