#include "lisaliency/weights.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>

namespace lisaliency {

bool NetworkWeights::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const Entry& e) { return e.first == name; });
}

const Tensor& NetworkWeights::at(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.first == name) return e.second;
  }
  throw Error(ErrorCode::kNotFound, "no parameter named '" + std::string(name) + "'");
}

Tensor& NetworkWeights::at(std::string_view name) {
  return const_cast<Tensor&>(std::as_const(*this).at(name));
}

void NetworkWeights::set(std::string name, Tensor value) {
  for (auto& e : entries_) {
    if (e.first == name) {
      e.second = std::move(value);
      return;
    }
  }
  entries_.emplace_back(std::move(name), std::move(value));
}

std::size_t NetworkWeights::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second.size();
  return n;
}

std::string weight_name(std::string_view layer) { return std::string(layer) + ".weight"; }
std::string bias_name(std::string_view layer) { return std::string(layer) + ".bias"; }

std::vector<std::pair<std::string, Shape>> parameter_shapes(const NetworkSpec& spec) {
  const std::vector<Shape> shapes = validate(spec);
  std::vector<std::pair<std::string, Shape>> out;
  Shape in = spec.input_shape;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    if (layer.kind == LayerKind::kConv) {
      out.emplace_back(weight_name(layer.name), Shape{layer.out, in[0], layer.kernel, layer.kernel});
      out.emplace_back(bias_name(layer.name), Shape{layer.out});
    } else if (layer.kind == LayerKind::kFullyConnected) {
      out.emplace_back(weight_name(layer.name), Shape{layer.out, in[0]});
      out.emplace_back(bias_name(layer.name), Shape{layer.out});
    }
    in = shapes[i];
  }
  return out;
}

double init_stddev(const Shape& weight_shape) {
  std::size_t fan_in = 1;
  for (std::size_t i = 1; i < weight_shape.size(); ++i) fan_in *= weight_shape[i];
  return std::sqrt(2.0 / static_cast<double>(fan_in));
}

namespace {

std::uint64_t name_hash(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

std::pair<Tensor, Tensor> draw_layer_parameters(std::string_view layer,
                                                const Shape& weight_shape,
                                                std::uint64_t seed) {
  const std::uint64_t h = name_hash(layer);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  std::mt19937_64 rng(seq);
  const double bound = std::sqrt(3.0) * init_stddev(weight_shape);
  Tensor weights(weight_shape);
  for (float& w : weights.values()) {
    // 24 random mantissa bits mapped onto the open interval (0, 1).
    const double u = (static_cast<double>(rng() >> 40) + 0.5) / 16777216.0;
    w = static_cast<float>((2.0 * u - 1.0) * bound);
  }
  return {std::move(weights), Tensor({weight_shape[0]}, 0.0f)};
}

NetworkWeights initialize_weights(const NetworkSpec& spec, std::uint64_t seed) {
  NetworkWeights weights;
  const auto shapes = parameter_shapes(spec);
  for (const auto& layer : spec.layers) {
    if (!layer.learnable()) continue;
    const std::string wname = weight_name(layer.name);
    const auto it = std::find_if(shapes.begin(), shapes.end(),
                                 [&](const auto& p) { return p.first == wname; });
    auto [w, b] = draw_layer_parameters(layer.name, it->second, seed);
    weights.set(wname, std::move(w));
    weights.set(bias_name(layer.name), std::move(b));
  }
  return weights;
}

void check_compatible(const NetworkSpec& spec, const NetworkWeights& weights) {
  const auto shapes = parameter_shapes(spec);
  for (const auto& [name, shape] : shapes) {
    if (!weights.contains(name)) {
      throw Error(ErrorCode::kShapeMismatch, "missing parameters for layer " + name);
    }
    if (weights.at(name).shape() != shape) {
      throw Error(ErrorCode::kShapeMismatch,
                  "shape mismatch at layer " + name + ": expected " + shape_string(shape) +
                      ", file has " + shape_string(weights.at(name).shape()));
    }
  }
  if (weights.entries().size() != shapes.size()) {
    for (const auto& e : weights.entries()) {
      const bool known = std::any_of(shapes.begin(), shapes.end(),
                                     [&](const auto& p) { return p.first == e.first; });
      if (!known) {
        throw Error(ErrorCode::kShapeMismatch, "unexpected parameters '" + e.first + "'");
      }
    }
  }
}

namespace {

constexpr char kMagic[4] = {'L', 'I', 'S', 'W'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T le(const char* what) {
    need(sizeof(T), what);
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      value |= static_cast<T>(static_cast<T>(bytes_[pos_ + i]) << (8 * i));
    }
    pos_ += sizeof(T);
    return value;
  }

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorCode::kFormat, std::string("weight file truncated while reading ") + what);
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_weights(const NetworkWeights& weights) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, kWeightFileVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(weights.entries().size()));
  for (const auto& [name, tensor] : weights.entries()) {
    if (name.size() > 0xffff) throw Error(ErrorCode::kInvalidArgument, "parameter name too long");
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(0);  // dtype f32
    out.push_back(static_cast<std::uint8_t>(tensor.rank()));
    for (std::size_t d : tensor.shape()) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (float v : tensor.values()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

NetworkWeights deserialize_weights(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  const auto magic = in.take(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), std::begin(kMagic))) {
    throw Error(ErrorCode::kFormat, "not a weight file (bad magic)");
  }
  const auto version = in.le<std::uint32_t>("version");
  if (version != kWeightFileVersion) {
    throw Error(ErrorCode::kFormat, "unsupported weight file version " + std::to_string(version));
  }
  const auto count = in.le<std::uint32_t>("record count");
  NetworkWeights weights;
  for (std::uint32_t r = 0; r < count; ++r) {
    const auto name_len = in.le<std::uint16_t>("name length");
    const auto name_bytes = in.take(name_len, "name");
    std::string name(name_bytes.begin(), name_bytes.end());
    const auto dtype = in.le<std::uint8_t>("dtype");
    if (dtype != 0) {
      throw Error(ErrorCode::kFormat, "unsupported dtype " + std::to_string(dtype) + " for " + name);
    }
    const auto rank = in.le<std::uint8_t>("rank");
    if (rank == 0) throw Error(ErrorCode::kFormat, "zero rank for " + name);
    Shape shape;
    std::uint64_t total = 1;
    for (std::uint8_t i = 0; i < rank; ++i) {
      const auto d = in.le<std::uint32_t>("dims");
      if (d == 0) throw Error(ErrorCode::kFormat, "zero dimension for " + name);
      total *= d;
      if (total > bytes.size()) throw Error(ErrorCode::kFormat, "weight file truncated in payload of " + name);
      shape.push_back(d);
    }
    const auto payload = in.take(total * 4, "payload");
    std::vector<float> values(total);
    for (std::size_t i = 0; i < total; ++i) {
      std::uint32_t bits = 0;
      for (std::size_t b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(payload[4 * i + b]) << (8 * b);
      values[i] = std::bit_cast<float>(bits);
    }
    if (weights.contains(name)) throw Error(ErrorCode::kFormat, "duplicate record " + name);
    weights.set(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  if (!in.done()) throw Error(ErrorCode::kFormat, "trailing bytes after last record");
  return weights;
}

void save_weights(const NetworkWeights& weights, const std::filesystem::path& path) {
  const auto bytes = serialize_weights(weights);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

NetworkWeights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_weights(bytes);
}

NetworkWeights load_weights(const std::filesystem::path& path, const NetworkSpec& spec) {
  NetworkWeights weights = load_weights(path);
  check_compatible(spec, weights);
  return weights;
}

}  // namespace lisaliency
