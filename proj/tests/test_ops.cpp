#include <doctest.h>

#include <cmath>
#include <random>

#include "lisaliency/ops.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace lisaliency;

namespace {

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.shape() == b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(double(a[i]) - b[i]));
  return m;
}

}  // namespace

TEST_CASE("tensor rejects inconsistent data and zero dims") {
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<float>(3)), Error);
  CHECK_THROWS_AS(Tensor({2, 0}), Error);
  const Tensor t({2, 3}, 1.5f);
  CHECK(t.size() == 6);
  CHECK(t.at(1, 2) == 1.5f);
}

TEST_CASE("conv2d identity kernel") {
  const Tensor x({1, 3, 3}, 1.0f);
  const Tensor y = conv2d(x, Tensor({1, 1, 1, 1}, 1.0f), Tensor({1}, 0.0f), {});
  CHECK(y == x);
}

TEST_CASE("conv2d all-ones kernel sums the patch") {
  const Tensor x({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  const Tensor y = conv2d(x, Tensor({1, 1, 3, 3}, 1.0f), Tensor({1}, 0.0f), {});
  REQUIRE(y.shape() == Shape{1, 1, 1});
  CHECK(y[0] == 45.0f);
}

TEST_CASE("conv2d matches the nested-loop oracle") {
  std::mt19937_64 rng(11);
  for (std::size_t stride : {1, 2}) {
    const Tensor x = oracle::random_tensor({2, 5, 5}, rng);
    const Tensor w = oracle::random_tensor({3, 2, 3, 3}, rng);
    const Tensor b = oracle::random_tensor({3}, rng);
    const Tensor expected =
        oracle::conv2d(oracle::DTensor::from(x), oracle::DTensor::from(w),
                       oracle::DTensor::from(b), stride, 1)
            .to_float();
    CHECK(max_abs_diff(conv2d(x, w, b, {stride, 1}), expected) < 1e-5);
    CHECK(max_abs_diff(conv2d_direct(x, w, b, {stride, 1}), expected) < 1e-5);
  }
}

TEST_CASE("conv2d fast path agrees with the direct path on larger inputs") {
  std::mt19937_64 rng(12);
  const Tensor x = oracle::random_tensor({16, 32, 32}, rng);
  const Tensor w = oracle::random_tensor({24, 16, 3, 3}, rng);
  const Tensor b = oracle::random_tensor({24}, rng);
  CHECK(max_abs_diff(conv2d(x, w, b, {1, 1}), conv2d_direct(x, w, b, {1, 1})) < 1e-4);
}

TEST_CASE("conv2d shape errors") {
  const Tensor x({2, 5, 5});
  CHECK_THROWS_AS(conv2d(x, Tensor({1, 3, 3, 3}), Tensor({1}), {}), Error);
  CHECK_THROWS_AS(conv2d(x, Tensor({1, 2, 3, 3}), Tensor({2}), {}), Error);
  CHECK_THROWS_AS(conv2d(Tensor({2, 4, 4}), Tensor({1, 2, 3, 3}), Tensor({1}), {2, 0}), Error);
}

TEST_CASE("conv2d is linear for bias-free kernels") {
  std::mt19937_64 rng(13);
  const Tensor x = oracle::random_tensor({3, 7, 7}, rng), y = oracle::random_tensor({3, 7, 7}, rng);
  const Tensor w = oracle::random_tensor({4, 3, 3, 3}, rng);
  const Tensor zero({4}, 0.0f);
  const float a = 0.7f, b = -1.3f;
  Tensor mixed(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) mixed[i] = a * x[i] + b * y[i];
  const Tensor lhs = conv2d(mixed, w, zero, {1, 1});
  const Tensor cx = conv2d(x, w, zero, {1, 1}), cy = conv2d(y, w, zero, {1, 1});
  for (std::size_t i = 0; i < lhs.size(); ++i) CHECK(std::fabs(lhs[i] - (a * cx[i] + b * cy[i])) < 1e-4);
}

TEST_CASE("relu definition and idempotence") {
  CHECK(relu(Tensor({3}, {-1, 0, 2})) == Tensor({3}, {0, 0, 2}));
  CHECK(relu(Tensor({4}, -3.0f)) == Tensor({4}, 0.0f));
  const Tensor pos({2, 2}, {1, 2, 3, 4});
  CHECK(relu(pos) == pos);
  std::mt19937_64 rng(14);
  const Tensor r = oracle::random_tensor({3, 5, 5}, rng);
  CHECK(relu(relu(r)) == relu(r));
}

TEST_CASE("maxpool picks the window maximum") {
  CHECK(maxpool2d(Tensor({1, 2, 2}, {1, 2, 3, 4}), 2, 2) == Tensor({1, 1, 1}, {4}));
  CHECK(maxpool2d(Tensor({2, 4, 4}, 0.5f), 2, 2) == Tensor({2, 2, 2}, 0.5f));
  std::mt19937_64 rng(15);
  const Tensor x = oracle::random_tensor({1, 4, 4}, rng);
  const Tensor expected = oracle::maxpool(oracle::DTensor::from(x), 2).to_float();
  CHECK(maxpool2d(x, 2, 2) == expected);
  CHECK_THROWS_AS(maxpool2d(Tensor({1, 5, 4}), 2, 2), Error);
}

TEST_CASE("fully connected") {
  const Tensor x({3}, {1, -2, 3});
  Tensor eye({3, 3}, 0.0f);
  for (std::size_t i = 0; i < 3; ++i) eye.at(i, i) = 1.0f;
  CHECK(fully_connected(x, eye, Tensor({3}, 0.0f)) == x);
  const Tensor b({2}, {0.5f, -4.0f});
  CHECK(fully_connected(x, Tensor({2, 3}, 0.0f), b) == b);
  std::mt19937_64 rng(16);
  const Tensor v = oracle::random_tensor({4}, rng), w = oracle::random_tensor({3, 4}, rng),
               c = oracle::random_tensor({3}, rng);
  const Tensor expected =
      oracle::fc(oracle::DTensor::from(v), oracle::DTensor::from(w), oracle::DTensor::from(c))
          .to_float();
  CHECK(max_abs_diff(fully_connected(v, w, c), expected) < 1e-6);
  CHECK_THROWS_AS(fully_connected(Tensor({5}), w, c), Error);
}

TEST_CASE("softmax") {
  const Tensor u = softmax(Tensor({4}, 0.0f));
  for (std::size_t i = 0; i < 4; ++i) CHECK(u[i] == doctest::Approx(0.25).epsilon(1e-7));
  const Tensor big = softmax(Tensor({2}, {1000.0f, 0.0f}));
  CHECK(big[0] == doctest::Approx(1.0));
  CHECK(big[1] >= 0.0f);
  CHECK(big[1] < 1e-30);

  std::mt19937_64 rng(17);
  const Tensor x = oracle::random_tensor({10}, rng, -5, 5);
  const Tensor p = softmax(x);
  const auto expected = oracle::softmax(oracle::DTensor::from(x));
  double sum = 0.0;
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(std::fabs(p[i] - expected.v[i]) < 1e-6);
    CHECK(p[i] > 0.0f);
    sum += p[i];
  }
  CHECK(std::fabs(sum - 1.0) < 1e-6);
}

TEST_CASE("softmax is shift invariant") {
  std::mt19937_64 rng(18);
  for (float c : {-50.0f, -1.0f, 3.5f, 100.0f}) {
    const Tensor x = oracle::random_tensor({6}, rng);
    Tensor shifted = x;
    for (std::size_t i = 0; i < 6; ++i) shifted[i] += c;
    const Tensor a = softmax(x), b = softmax(shifted);
    for (std::size_t i = 0; i < 6; ++i) CHECK(std::fabs(a[i] - b[i]) < 1e-6);
  }
}

TEST_CASE("NaN inputs are a hard error") {
  Tensor x({3}, {1.0f, NAN, 0.0f});
  CHECK_THROWS_AS(relu(x), Error);
  CHECK_THROWS_AS(softmax(x), Error);
}

TEST_CASE("gradients match central finite differences over 20 seeds") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    for (const auto& r : gradcheck::run_trial(seed)) {
      INFO(r.name << " seed " << seed << " worst " << r.worst << " skipped " << r.skipped);
      CHECK(r.ok());
    }
  }
}
