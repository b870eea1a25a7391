#include <doctest.h>

#include <cmath>
#include <random>

#include "lisaliency/network.hpp"
#include "lisaliency/train.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace lisaliency;

TEST_CASE("shipped specs validate") {
  const auto mini = load_network_spec(fixtures::source_dir() / "data/mini_vgg.spec");
  CHECK(mini.class_count() == 8);
  CHECK(relu_layers(mini).size() == 7);
  CHECK(learnable_layers(mini).size() == 8);
  const auto vgg = load_network_spec(fixtures::source_dir() / "data/vgg16.spec");
  CHECK(vgg.class_count() == 1000);
  CHECK(relu_layers(vgg).size() == 15);
  CHECK(validate(vgg).back() == Shape{1000});
}

TEST_CASE("spec validation errors") {
  const std::string head = "name: t\ninput: [1, 4, 4]\nclasses: [a, b]\nlayers:\n";
  auto parse = [&](const std::string& layers) { return parse_network_spec(head + layers); };
  const std::string tail =
      "  - {name: f, type: flatten}\n  - {name: fc, type: fc, out: 2}\n  - {name: p, type: softmax}\n";
  CHECK_NOTHROW(parse("  - {name: c, type: conv, out: 2, kernel: 3, pad: 1}\n  - {name: r, type: relu}\n" + tail));
  // conv not followed by relu
  CHECK_THROWS_AS(parse("  - {name: c, type: conv, out: 2, kernel: 3, pad: 1}\n" + tail), Error);
  // even kernel
  CHECK_THROWS_AS(parse("  - {name: c, type: conv, out: 2, kernel: 2}\n  - {name: r, type: relu}\n" + tail), Error);
  // unknown key
  CHECK_THROWS_AS(parse("  - {name: c, type: conv, out: 2, kernel: 3, bogus: 1}\n  - {name: r, type: relu}\n" + tail), Error);
  // wrong class count
  CHECK_THROWS_AS(parse("  - {name: f, type: flatten}\n  - {name: fc, type: fc, out: 3}\n  - {name: p, type: softmax}\n"), Error);
  // softmax missing
  CHECK_THROWS_AS(parse("  - {name: f, type: flatten}\n  - {name: fc, type: fc, out: 2}\n"), Error);
  // pool not dividing
  CHECK_THROWS_AS(parse("  - {name: m, type: maxpool, window: 3}\n" + tail), Error);
}

TEST_CASE("forward_traced is deterministic and matches the plain forward pass") {
  const auto spec = fixtures::tiny_spec();
  const auto weights = initialize_weights(spec, 3);
  const Tensor zero({3, 16, 16}, 0.0f);
  const auto a = forward_traced(spec, weights, zero);
  const auto b = forward_traced(spec, weights, zero);
  CHECK(a.probabilities() == b.probabilities());

  std::mt19937_64 rng(4);
  const Tensor image = oracle::random_tensor({3, 16, 16}, rng);
  const auto trace = forward_traced(spec, weights, image);
  const auto plain = forward(spec, weights, image);
  REQUIRE(trace.relus().size() == relu_layers(spec).size());
  CHECK(trace.logits() == plain.logits);
  CHECK(trace.probabilities() == plain.probabilities);
  double sum = 0.0;
  for (float p : trace.probabilities().values()) sum += p;
  CHECK(std::fabs(sum - 1.0) < 1e-6);
  for (std::size_t i = 0; i < trace.relus().size(); ++i) {
    CHECK(trace.relus()[i].activation == plain.relu_outputs[i]);
    for (float v : trace.relus()[i].activation.values()) CHECK(v >= 0.0f);
  }
  CHECK_THROWS_AS(forward_traced(spec, weights, Tensor({3, 8, 8})), Error);
}

TEST_CASE("top_k breaks ties toward the lower index") {
  const Tensor p({5}, {0.1f, 0.3f, 0.3f, 0.2f, 0.1f});
  CHECK(top_k(p, 5) == std::vector<std::size_t>{1, 2, 3, 0, 4});
  CHECK(top_k(p, 9).size() == 5);
}

TEST_CASE("before-softmax gradient of a linear head is the class weight row") {
  const auto spec = parse_network_spec(
      "name: linear\ninput: [4, 1, 1]\nclasses: [a, b, c]\n"
      "layers:\n  - {name: r, type: relu}\n  - {name: f, type: flatten}\n"
      "  - {name: fc, type: fc, out: 3}\n  - {name: p, type: softmax}\n");
  std::mt19937_64 rng(5);
  NetworkWeights weights = initialize_weights(spec, 1);
  weights.set("fc.weight", oracle::random_tensor({3, 4}, rng));
  const Tensor image = oracle::random_tensor({4, 1, 1}, rng, 0.1f, 1.0f);
  const auto trace = forward_traced(spec, weights, image);
  for (std::size_t c = 0; c < 3; ++c) {
    const auto g = backprop_category(trace, c, TapPoint::kBeforeSoftmax);
    REQUIRE(g.has_gradients());
    const Tensor& grad = g.relus()[0].gradient;
    REQUIRE(grad.size() == 4);
    for (std::size_t j = 0; j < 4; ++j) CHECK(grad[j] == weights.at("fc.weight").at(c, j));
  }
}

TEST_CASE("after-softmax gradients equal the softmax Jacobian row applied to logit gradients") {
  const auto spec = fixtures::tiny_spec(5);
  const auto weights = initialize_weights(spec, 6);
  std::mt19937_64 rng(7);
  const Tensor image = oracle::random_tensor({3, 16, 16}, rng);
  const auto trace = forward_traced(spec, weights, image);
  const Tensor& p = trace.probabilities();
  std::vector<ActivationTrace> before;
  for (std::size_t c = 0; c < 5; ++c) before.push_back(backprop_category(trace, c, TapPoint::kBeforeSoftmax));
  const std::size_t cls = 2;
  const auto after = backprop_category(trace, cls, TapPoint::kAfterSoftmax);
  for (std::size_t layer = 0; layer < after.relus().size(); ++layer) {
    const Tensor& g = after.relus()[layer].gradient;
    for (std::size_t i = 0; i < g.size(); ++i) {
      double mixed = 0.0;
      for (std::size_t j = 0; j < 5; ++j) mixed += p[j] * before[j].relus()[layer].gradient[i];
      const double expected = p[cls] * (before[cls].relus()[layer].gradient[i] - mixed);
      CHECK(std::fabs(g[i] - expected) < 1e-6 + 1e-4 * std::fabs(expected));
    }
  }
}

TEST_CASE("ReLU-output gradients match finite differences for both taps") {
  const auto spec = fixtures::tiny_spec(4);
  const auto weights = initialize_weights(spec, 8);
  std::mt19937_64 rng(9);
  const Tensor image = oracle::random_tensor({3, 16, 16}, rng);
  const auto trace = forward_traced(spec, weights, image);
  const std::size_t cls = 1;
  for (TapPoint tap : {TapPoint::kBeforeSoftmax, TapPoint::kAfterSoftmax}) {
    const auto g = backprop_category(trace, cls, tap);
    for (std::size_t layer = 0; layer < g.relus().size(); ++layer) {
      const Tensor& grad = g.relus()[layer].gradient;
      // Probe a handful of elements per layer through the forward hook.
      for (std::size_t probe = 0; probe < 6; ++probe) {
        const std::size_t idx = (probe * 7919 + layer * 31) % grad.size();
        const float eps = 1e-3f;
        auto score = [&](float delta) {
          const auto out = forward(spec, weights, image, [&](std::size_t r, Tensor& act) {
            if (r == layer) act[idx] += delta;
          });
          return tap == TapPoint::kBeforeSoftmax ? double(out.logits[cls]) : double(out.probabilities[cls]);
        };
        const double numeric = (score(eps) - score(-eps)) / (2.0 * eps);
        INFO("tap " << to_string(tap) << " layer " << layer << " idx " << idx);
        CHECK(std::fabs(numeric - grad[idx]) < 2e-3 * std::max(1.0, std::fabs(numeric)));
      }
    }
  }
}

TEST_CASE("backprop_category is repeatable and refuses a consumed trace") {
  const auto spec = fixtures::tiny_spec();
  const auto weights = initialize_weights(spec, 10);
  auto trace = forward_traced(spec, weights, Tensor({3, 16, 16}, 0.3f));
  const auto a = backprop_category(trace, 3);
  const auto b = backprop_category(trace, 3);
  for (std::size_t i = 0; i < a.relus().size(); ++i) CHECK(a.relus()[i].gradient == b.relus()[i].gradient);
  CHECK_THROWS_AS(backprop_category(trace, 6), Error);
  trace.release_tape();
  CHECK(trace.consumed());
  try {
    backprop_category(trace, 0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kState);
  }
}

TEST_CASE("initializer: isolation, determinism and scale") {
  const auto spec = load_network_spec(fixtures::source_dir() / "data/mini_vgg.spec");
  const auto a = initialize_weights(spec, 42), b = initialize_weights(spec, 42);
  CHECK(a == b);
  CHECK_FALSE(a == initialize_weights(spec, 43));
  const Tensor& w = a.at("conv3_2.weight");  // 64*64*9 = 36864 values
  double sum = 0.0, sq = 0.0;
  for (float v : w.values()) sum += v, sq += double(v) * v;
  const double n = static_cast<double>(w.size());
  const double sd = std::sqrt(sq / n - (sum / n) * (sum / n));
  CHECK(std::fabs(sd / init_stddev(w.shape()) - 1.0) < 0.2);
  for (float v : a.at("conv3_2.bias").values()) CHECK(v == 0.0f);
}

TEST_CASE("weights must pair with the spec") {
  const auto spec = fixtures::tiny_spec();
  auto weights = initialize_weights(spec, 1);
  CHECK_NOTHROW(check_compatible(spec, weights));
  weights.set("conv2.weight", Tensor({6, 4, 3, 5}));
  try {
    check_compatible(spec, weights);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("shape mismatch at layer conv2") != std::string::npos);
  }
}
