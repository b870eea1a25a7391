#include <doctest.h>

#include <fstream>
#include <iostream>
#include <sstream>

#include "lisaliency/cli.hpp"
#include "lisaliency/config.hpp"
#include "lisaliency/image_io.hpp"
#include "lisaliency/weights.hpp"
#include "support/fixtures.hpp"

using namespace lisaliency;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "lisaliency");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  auto* old_out = std::cout.rdbuf(out.rdbuf());
  auto* old_err = std::cerr.rdbuf(err.rdbuf());
  const int code = cli_main(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  return {code, out.str(), err.str()};
}

struct Model {
  std::filesystem::path dir, spec, weights, image;
};

Model tiny_model() {
  Model m;
  m.dir = fixtures::scratch_dir("cli");
  m.spec = m.dir / "tiny.spec";
  std::ofstream(m.spec) << "name: tiny\ninput: [3, 16, 16]\nclasses: [a, b, c, d, e, f]\n"
                           "layers:\n"
                           "  - {name: conv1, type: conv, out: 4, kernel: 3, pad: 1}\n"
                           "  - {name: relu1, type: relu}\n"
                           "  - {name: pool1, type: maxpool, window: 2}\n"
                           "  - {name: flatten, type: flatten}\n"
                           "  - {name: fc1, type: fc, out: 6}\n"
                           "  - {name: prob, type: softmax}\n";
  m.weights = m.dir / "tiny.lisw";
  save_weights(initialize_weights(load_network_spec(m.spec), 3), m.weights);
  m.image = m.dir / "img.png";
  std::mt19937_64 rng(4);
  save_png(oracle::random_tensor({3, 20, 24}, rng, 0.0f, 1.0f), m.image);
  return m;
}

}  // namespace

TEST_CASE("--version") {
  const Run r = run_cli({"--version"});
  CHECK(r.code == 0);
  CHECK(r.out.find("lisaliency 1.0.0") != std::string::npos);
}

TEST_CASE("usage errors exit with 2") {
  const Model m = tiny_model();
  const Run missing = run_cli({"classify", "--spec", m.spec.string(), "--weights", m.weights.string()});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("--image") != std::string::npos);
  const Run unknown = run_cli({"classify", "--image", m.image.string(), "--frobnicate"});
  CHECK(unknown.code == 2);
  CHECK(run_cli({}).code == 2);
  const Run no_weights = run_cli({"classify", "--image", m.image.string(), "--spec", m.spec.string()});
  CHECK(no_weights.code == 2);
  CHECK(no_weights.err.find("--weights is required") != std::string::npos);
}

TEST_CASE("runtime errors exit with 1 and name their category") {
  const Model m = tiny_model();
  const Run r = run_cli({"classify", "--image", (m.dir / "none.png").string(), "--spec",
                         m.spec.string(), "--weights", m.weights.string()});
  CHECK(r.code == 1);
  CHECK(r.err.rfind("error[io]", 0) == 0);
}

TEST_CASE("classify prints a five-row ranking") {
  const Model m = tiny_model();
  const Run r = run_cli({"classify", "--image", m.image.string(), "--spec", m.spec.string(),
                         "--weights", m.weights.string()});
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "rank,class_id,class_name,prob");
  int rows = 0;
  double last = 2.0;
  while (std::getline(lines, line)) {
    ++rows;
    const double p = std::stod(line.substr(line.rfind(',') + 1));
    CHECK(p <= last);
    last = p;
    CHECK(line.rfind(std::to_string(rows) + ",", 0) == 0);
  }
  CHECK(rows == 5);
}

TEST_CASE("attention and saliency write maps with sidecars") {
  const Model m = tiny_model();
  const auto png = m.dir / "att.png", raw = m.dir / "att.csv";
  const Run a = run_cli({"attention", "--image", m.image.string(), "--category", "2", "--spec",
                         m.spec.string(), "--weights", m.weights.string(), "--out", png.string(),
                         "--out-raw", raw.string(), "--tap", "before"});
  REQUIRE(a.code == 0);
  CHECK(load_image(png).shape() == Shape{3, 16, 16});
  CHECK(read_map_csv(raw).shape() == Shape{16, 16});
  CHECK(std::filesystem::exists(sidecar_path(raw)));

  const Run bad = run_cli({"attention", "--image", m.image.string(), "--category", "9", "--spec",
                           m.spec.string(), "--weights", m.weights.string()});
  CHECK(bad.code == 1);

  const auto sraw = m.dir / "sal.csv";
  const Run s = run_cli({"saliency", "--image", m.image.string(), "--spec", m.spec.string(),
                         "--weights", m.weights.string(), "--out-raw", sraw.string(), "--top-k", "3"});
  REQUIRE(s.code == 0);
  CHECK(s.out.rfind("categories ", 0) == 0);
  CHECK(read_map_csv(sraw).shape() == Shape{16, 16});
}

TEST_CASE("flags override the config file") {
  const Model m = tiny_model();
  const auto cfg = m.dir / "run.yaml";
  std::ofstream(cfg) << "lateral_inhibition: {k: 9}\npaths: {spec: " << m.spec.string()
                     << ", weights: " << m.weights.string() << "}\n";
  const auto raw = m.dir / "o.csv";
  const Run r = run_cli({"--config", cfg.string(), "attention", "--image", m.image.string(),
                         "--category", "0", "--li-k", "3", "--out-raw", raw.string()});
  REQUIRE(r.code == 0);
  std::ifstream side(sidecar_path(raw));
  std::stringstream text;
  text << side.rdbuf();
  CHECK(text.str().find("k: 3") != std::string::npos);
  CHECK(text.str().find("k: 9") == std::string::npos);
}

TEST_CASE("sanity writes one record per stage and seed") {
  const Model m = tiny_model();
  const auto out = m.dir / "sanity.csv";
  const Run r = run_cli({"sanity", "--image", m.image.string(), "--spec", m.spec.string(),
                         "--weights", m.weights.string(), "--out", out.string(), "--seeds", "2"});
  REQUIRE(r.code == 0);
  std::ifstream in(out);
  std::string line;
  int rows = -1;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 2 * 3);  // stage 0 plus two learnable layers, per seed
}
