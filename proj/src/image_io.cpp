#include "lisaliency/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

namespace lisaliency {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

namespace {

Tensor from_interleaved(const std::uint8_t* pixels, std::size_t height, std::size_t width) {
  Tensor image({3, height, width});
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        image.at(c, y, x) = static_cast<float>(pixels[(y * width + x) * 3 + c]) / 255.0f;
      }
    }
  }
  return image;
}

std::uint8_t quantize(float v) {
  const float clamped = std::clamp(std::isfinite(v) ? v : 0.0f, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(clamped * 255.0f));
}

}  // namespace

Tensor decode_png(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw Error(ErrorCode::kFormat, std::string("cannot decode PNG: ") + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    const std::string message = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::kFormat, "corrupt PNG: " + message);
  }
  return from_interleaved(pixels.data(), image.height, image.width);
}

Tensor decode_ppm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
    return t;
  };
  auto number = [&](const char* what) {
    const std::string t = token();
    std::size_t value = 0;
    const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc() || end != t.data() + t.size() || value == 0) {
      throw Error(ErrorCode::kFormat, std::string("bad PPM ") + what);
    }
    return value;
  };
  if (token() != "P6") throw Error(ErrorCode::kFormat, "unsupported PPM (need binary P6)");
  const std::size_t width = number("width");
  const std::size_t height = number("height");
  if (number("maxval") != 255) throw Error(ErrorCode::kFormat, "PPM maxval must be 255");
  ++pos;  // single whitespace before the raster
  if (bytes.size() < pos || bytes.size() - pos < width * height * 3) {
    throw Error(ErrorCode::kFormat, "truncated PPM raster");
  }
  return from_interleaved(bytes.data() + pos, height, width);
}

Tensor load_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return decode_png(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P') return decode_ppm(bytes);
  throw Error(ErrorCode::kFormat, "unsupported image format: " + path.string());
}

std::vector<std::uint8_t> encode_png(const Tensor& image) {
  std::size_t height = 0, width = 0, channels = 0;
  if (image.rank() == 3 && image.dim(0) == 3) {
    channels = 3, height = image.dim(1), width = image.dim(2);
  } else if (image.rank() == 2) {
    channels = 1, height = image.dim(0), width = image.dim(1);
  } else {
    throw Error(ErrorCode::kShapeMismatch, "encode_png needs (3,H,W) or (H,W), got " +
                                               shape_string(image.shape()));
  }
  std::vector<std::uint8_t> pixels(height * width * channels);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < channels; ++c) {
        const float v = channels == 3 ? image.at(c, y, x) : image.at(y, x);
        pixels[(y * width + x) * channels + c] = quantize(v);
      }
    }
  }
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(width);
  png.height = static_cast<png_uint_32>(height);
  png.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
    throw Error(ErrorCode::kFormat, std::string("PNG encode failed: ") + png.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
    throw Error(ErrorCode::kFormat, std::string("PNG encode failed: ") + png.message);
  }
  out.resize(size);
  return out;
}

void save_png(const Tensor& image, const std::filesystem::path& path) {
  write_file(path, encode_png(image));
}

void save_ppm(const Tensor& image, const std::filesystem::path& path) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw Error(ErrorCode::kShapeMismatch, "save_ppm needs a (3,H,W) image");
  }
  const std::size_t height = image.dim(1), width = image.dim(2);
  const std::string header = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) bytes.push_back(quantize(image.at(c, y, x)));
    }
  }
  write_file(path, bytes);
}

Tensor render_map(const Tensor& map) {
  if (map.rank() != 2) throw Error(ErrorCode::kShapeMismatch, "render_map needs an (H,W) map");
  const float peak = *std::max_element(map.values().begin(), map.values().end());
  Tensor out(map.shape(), 0.0f);
  if (peak > 0.0f) {
    for (std::size_t i = 0; i < map.size(); ++i) out[i] = std::max(0.0f, map[i]) / peak;
  }
  return out;
}

void write_map_csv(const Tensor& map, const std::filesystem::path& path) {
  if (map.rank() != 2) throw Error(ErrorCode::kShapeMismatch, "write_map_csv needs an (H,W) map");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  char buf[32];
  for (std::size_t y = 0; y < map.dim(0); ++y) {
    for (std::size_t x = 0; x < map.dim(1); ++x) {
      const auto r = std::to_chars(buf, buf + sizeof(buf), map.at(y, x));
      if (x) out << ',';
      out.write(buf, r.ptr - buf);
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

Tensor read_map_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<float> values;
  std::size_t rows = 0, cols = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t count = 0;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p < end) {
      float v = 0.0f;
      const auto r = std::from_chars(p, end, v);
      if (r.ec != std::errc()) throw Error(ErrorCode::kFormat, "bad number in " + path.string());
      values.push_back(v);
      ++count;
      p = r.ptr;
      if (p < end && *p == ',') ++p;
    }
    if (rows == 0) cols = count;
    if (count != cols) throw Error(ErrorCode::kFormat, "ragged rows in " + path.string());
    ++rows;
  }
  if (rows == 0) throw Error(ErrorCode::kFormat, "empty map file " + path.string());
  return Tensor({rows, cols}, std::move(values));
}

}  // namespace lisaliency
