#pragma once

// Central-difference gradient checks. Finite differences are taken on the
// double-precision oracles in oracles.hpp; analytic gradients come from the
// library's tape. Elements whose +/-eps probes cross a ReLU or max-pool kink
// are skipped, since no finite difference is meaningful there.

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "lisaliency/tape.hpp"
#include "oracles.hpp"

namespace gradcheck {

using lisaliency::GradientTape;
using lisaliency::NodeId;
using lisaliency::Tensor;

struct Eval {
  double value = 0.0;
  std::vector<int> pattern;
};

using Objective = std::function<Eval(const std::vector<oracle::DTensor>&)>;

struct Result {
  std::string name;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  std::size_t failures = 0;
  double worst = 0.0;  // largest relative error over checked elements

  bool ok() const { return failures == 0 && checked > 0; }
};

inline constexpr double kEps = 1e-3;
inline constexpr double kRelTol = 1e-2;
inline constexpr double kMinMagnitude = 1e-4;

// Compares analytic[k] against central differences of f in every element of
// every argument.
inline Result compare(const std::string& name, const std::vector<Tensor>& args,
                      const std::vector<Tensor>& analytic, const Objective& f) {
  Result res{name};
  std::vector<oracle::DTensor> x;
  for (const auto& a : args) x.push_back(oracle::DTensor::from(a));
  const std::vector<int> base = f(x).pattern;
  for (std::size_t k = 0; k < x.size(); ++k) {
    for (std::size_t i = 0; i < x[k].v.size(); ++i) {
      const double saved = x[k].v[i];
      x[k].v[i] = saved + kEps;
      const Eval plus = f(x);
      x[k].v[i] = saved - kEps;
      const Eval minus = f(x);
      x[k].v[i] = saved;
      if (plus.pattern != base || minus.pattern != base) {
        ++res.skipped;
        continue;
      }
      const double numeric = (plus.value - minus.value) / (2.0 * kEps);
      const double a = analytic[k][i];
      if (std::fabs(a) <= kMinMagnitude) continue;
      ++res.checked;
      const double rel = std::fabs(a - numeric) / std::max(std::fabs(a), std::fabs(numeric));
      res.worst = std::max(res.worst, rel);
      if (rel >= kRelTol) ++res.failures;
    }
  }
  return res;
}

inline double dot(const oracle::DTensor& y, const Tensor& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.v.size(); ++i) s += y.v[i] * r[i];
  return s;
}

// Runs one seeded trial of every operator check plus the composite network.
inline std::vector<Result> run_trial(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Result> out;
  auto rnd = [&](lisaliency::Shape s) { return oracle::random_tensor(s, rng); };

  {  // conv2d, padded and strided variants
    const std::size_t stride = 1 + seed % 2;
    const Tensor x = rnd({2, 5, 5}), w = rnd({3, 2, 3, 3}), b = rnd({3});
    GradientTape tape;
    const NodeId nx = tape.input(x), nw = tape.input(w), nb = tape.input(b);
    const NodeId y = tape.conv2d(nx, nw, nb, {stride, 1});
    const Tensor r = rnd(tape.value(y).shape());
    const auto g = tape.backward_with(y, r);
    out.push_back(compare("conv2d", {x, w, b}, {g[nx], g[nw], g[nb]},
                          [&](const std::vector<oracle::DTensor>& a) {
                            return Eval{dot(oracle::conv2d(a[0], a[1], a[2], stride, 1), r), {}};
                          }));
  }
  {  // relu; the kink-crossing filter handles inputs near zero
    const Tensor x = rnd({3, 4, 4});
    GradientTape tape;
    const NodeId nx = tape.input(x);
    const NodeId y = tape.relu(nx);
    const Tensor r = rnd(x.shape());
    const auto g = tape.backward_with(y, r);
    out.push_back(compare("relu", {x}, {g[nx]}, [&](const std::vector<oracle::DTensor>& a) {
      Eval e;
      e.value = dot(oracle::relu(a[0], &e.pattern), r);
      return e;
    }));
  }
  {  // maxpool
    const Tensor x = rnd({2, 4, 6});
    GradientTape tape;
    const NodeId nx = tape.input(x);
    const NodeId y = tape.maxpool2d(nx, 2, 2);
    const Tensor r = rnd(tape.value(y).shape());
    const auto g = tape.backward_with(y, r);
    out.push_back(compare("maxpool2d", {x}, {g[nx]}, [&](const std::vector<oracle::DTensor>& a) {
      Eval e;
      e.value = dot(oracle::maxpool(a[0], 2, &e.pattern), r);
      return e;
    }));
  }
  {  // fully connected
    const Tensor x = rnd({6}), w = rnd({4, 6}), b = rnd({4});
    GradientTape tape;
    const NodeId nx = tape.input(x), nw = tape.input(w), nb = tape.input(b);
    const NodeId y = tape.fully_connected(nx, nw, nb);
    const Tensor r = rnd({4});
    const auto g = tape.backward_with(y, r);
    out.push_back(compare("fully_connected", {x, w, b}, {g[nx], g[nw], g[nb]},
                          [&](const std::vector<oracle::DTensor>& a) {
                            return Eval{dot(oracle::fc(a[0], a[1], a[2]), r), {}};
                          }));
  }
  {  // softmax
    const Tensor x = rnd({7});
    GradientTape tape;
    const NodeId nx = tape.input(x);
    const NodeId y = tape.softmax(nx);
    const Tensor r = rnd({7});
    const auto g = tape.backward_with(y, r);
    out.push_back(compare("softmax", {x}, {g[nx]}, [&](const std::vector<oracle::DTensor>& a) {
      return Eval{dot(oracle::softmax(a[0]), r), {}};
    }));
  }
  {  // cross-entropy
    const Tensor x = rnd({5});
    const std::size_t label = seed % 5;
    GradientTape tape;
    const NodeId nx = tape.input(x);
    const NodeId loss = tape.cross_entropy(nx, label);
    const auto g = tape.backward(loss);
    out.push_back(compare("cross_entropy", {x}, {g[nx]}, [&](const std::vector<oracle::DTensor>& a) {
      return Eval{-std::log(oracle::softmax(a[0]).v[label]), {}};
    }));
  }
  {  // two-conv composite ending in a selected class probability
    const Tensor x = rnd({2, 6, 6});
    // small weights keep the softmax out of saturation
    auto small = [&](lisaliency::Shape s) { return oracle::random_tensor(s, rng, -0.3f, 0.3f); };
    const Tensor w1 = small({3, 2, 3, 3}), b1 = small({3}), w2 = small({4, 3, 3, 3}), b2 = small({4});
    const Tensor wf = small({5, 36}), bf = small({5});
    const std::size_t cls = seed % 5;
    GradientTape tape;
    const NodeId nx = tape.input(x), n1 = tape.input(w1), c1 = tape.input(b1),
                 n2 = tape.input(w2), c2 = tape.input(b2), nf = tape.input(wf), cf = tape.input(bf);
    NodeId h = tape.relu(tape.conv2d(nx, n1, c1, {1, 1}));
    h = tape.relu(tape.conv2d(h, n2, c2, {1, 1}));
    h = tape.flatten(tape.maxpool2d(h, 2, 2));
    const NodeId p = tape.select(tape.softmax(tape.fully_connected(h, nf, cf)), cls);
    const auto g = tape.backward(p);
    out.push_back(compare(
        "two_conv_network", {x, w1, b1, w2, b2, wf, bf},
        {g[nx], g[n1], g[c1], g[n2], g[c2], g[nf], g[cf]},
        [&](const std::vector<oracle::DTensor>& a) {
          Eval e;
          auto z = oracle::relu(oracle::conv2d(a[0], a[1], a[2], 1, 1), &e.pattern);
          z = oracle::relu(oracle::conv2d(z, a[3], a[4], 1, 1), &e.pattern);
          z = oracle::maxpool(z, 2, &e.pattern);
          z.shape = {z.v.size()};
          e.value = oracle::softmax(oracle::fc(z, a[5], a[6])).v[cls];
          return e;
        }));
  }
  return out;
}

}  // namespace gradcheck
