#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "lisaliency/image_io.hpp"
#include "lisaliency/train.hpp"
#include "support/fixtures.hpp"

using namespace lisaliency;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kState;
}

}  // namespace

TEST_CASE("weight files round-trip byte for byte") {
  const auto spec = fixtures::tiny_spec();
  const auto weights = initialize_weights(spec, 21);
  const auto dir = fixtures::scratch_dir("weights");
  save_weights(weights, dir / "a.lisw");
  const auto loaded = load_weights(dir / "a.lisw", spec);
  CHECK(loaded == weights);
  save_weights(loaded, dir / "b.lisw");
  CHECK(read_file(dir / "a.lisw") == read_file(dir / "b.lisw"));
}

TEST_CASE("weight file layout") {
  NetworkWeights w;
  w.set("l.weight", Tensor({2}, {1.0f, -2.0f}));
  const auto bytes = serialize_weights(w);
  // magic, version 1, one record, name length 8
  CHECK(std::memcmp(bytes.data(), "LISW", 4) == 0);
  CHECK(bytes[4] == 1);
  CHECK(bytes[8] == 1);
  CHECK(bytes[12] == 8);
  CHECK(std::memcmp(bytes.data() + 14, "l.weight", 8) == 0);
  CHECK(bytes[22] == 0);  // dtype f32
  CHECK(bytes[23] == 1);  // rank
  CHECK(bytes[24] == 2);  // dim
  CHECK(bytes.size() == 28 + 8);
  float second = 0.0f;
  std::memcpy(&second, bytes.data() + 32, 4);
  CHECK(second == -2.0f);
}

TEST_CASE("every truncation of a weight file is a structured error") {
  const auto bytes = serialize_weights(initialize_weights(fixtures::tiny_spec(), 22));
  for (std::size_t n = 0; n < bytes.size(); n += (n < 64 ? 1 : 97)) {
    std::span<const std::uint8_t> prefix(bytes.data(), n);
    CHECK(code_of([&] { deserialize_weights(prefix); }) == ErrorCode::kFormat);
  }
}

TEST_CASE("corrupted headers are rejected") {
  const auto spec = fixtures::tiny_spec();
  auto bytes = serialize_weights(initialize_weights(spec, 23));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK(code_of([&] { deserialize_weights(bad_magic); }) == ErrorCode::kFormat);
  auto bad_version = bytes;
  bad_version[4] = 2;
  CHECK(code_of([&] { deserialize_weights(bad_version); }) == ErrorCode::kFormat);
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK(code_of([&] { deserialize_weights(trailing); }) == ErrorCode::kFormat);
  auto bad_dtype = bytes;
  bad_dtype[14 + std::strlen("conv1.weight")] = 1;
  CHECK(code_of([&] { deserialize_weights(bad_dtype); }) == ErrorCode::kFormat);
}

TEST_CASE("a flipped shape dimension names the layer") {
  const auto spec = fixtures::tiny_spec();
  auto bytes = serialize_weights(initialize_weights(spec, 24));
  // First record is conv1.weight (4, 3, 3, 3); make it (4, 3, 3, 1) and drop
  // the now-surplus payload so the file itself stays well formed.
  const std::size_t dims = 14 + std::strlen("conv1.weight") + 2;
  REQUIRE(bytes[dims + 12] == 3);
  bytes[dims + 12] = 1;
  const std::size_t payload = dims + 16;
  bytes.erase(bytes.begin() + payload + 4 * 36, bytes.begin() + payload + 4 * 108);
  const auto dir = fixtures::scratch_dir("weights_flip");
  write_file(dir / "w.lisw", bytes);
  CHECK_NOTHROW(load_weights(dir / "w.lisw"));
  try {
    load_weights(dir / "w.lisw", spec);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("shape mismatch at layer conv1") != std::string::npos);
  }
}

TEST_CASE("missing weight file is an I/O error") {
  CHECK(code_of([] { load_weights("/nonexistent/w.lisw"); }) == ErrorCode::kIo);
}

namespace {

// Two classes told apart by which half of the image is bright.
std::vector<LabeledImage> separable_set(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> noise(-0.1f, 0.1f);
  std::vector<LabeledImage> out;
  for (std::size_t i = 0; i < n; ++i) {
    LabeledImage s{Tensor({3, 16, 16}), i % 2};
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < 16; ++y)
        for (std::size_t x = 0; x < 16; ++x) {
          const bool bright = (x < 8) == (s.label == 0);
          s.image.at(c, y, x) = (bright ? 1.0f : -1.0f) + noise(rng);
        }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST_CASE("zero learning rate leaves the initialization untouched") {
  const auto spec = fixtures::tiny_spec(2);
  const auto data = separable_set(8, 1);
  TrainParams p;
  p.learning_rate = 0.0f;
  p.epochs = 1;
  p.batch_size = 4;
  p.seed = 5;
  const auto result = train(spec, data, p);
  CHECK(result.weights == initialize_weights(spec, 5));
  REQUIRE(result.epoch_loss.size() == 1);
  CHECK(std::isfinite(result.epoch_loss[0]));
}

TEST_CASE("separable two-class data is fit exactly and deterministically") {
  const auto spec = fixtures::tiny_spec(2);
  const auto data = separable_set(64, 2);
  TrainParams p;
  p.learning_rate = 0.02f;
  p.epochs = 8;
  p.batch_size = 8;
  p.seed = 3;
  std::vector<double> seen;
  const auto a = train(spec, data, p, [&](std::size_t, double loss) { seen.push_back(loss); });
  CHECK(seen == a.epoch_loss);
  for (double l : a.epoch_loss) CHECK(std::isfinite(l));
  CHECK(accuracy(spec, a.weights, data) == 1.0);
  const auto b = train(spec, data, p);
  CHECK(a.weights == b.weights);
  CHECK(serialize_weights(a.weights) == serialize_weights(b.weights));
}

TEST_CASE("training rejects bad input and reports divergence") {
  const auto spec = fixtures::tiny_spec(2);
  TrainParams p;
  CHECK_THROWS_AS(train(spec, std::vector<LabeledImage>{}, p), Error);
  auto data = separable_set(4, 3);
  data[1].label = 7;
  CHECK_THROWS_AS(train(spec, data, p), Error);
  data[1].label = 1;
  p.learning_rate = 1e30f;
  p.epochs = 3;
  CHECK(code_of([&] { train(spec, data, p); }) == ErrorCode::kDivergence);
}
