#include "lisaliency/config.hpp"

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <fstream>
#include <iomanip>
#include <memory>
#include <set>
#include <sstream>

#include "lisaliency/image_io.hpp"

namespace lisaliency {

namespace {

[[noreturn]] void fail(const std::string& message) {
  throw Error(ErrorCode::kFormat, "config: " + message);
}

void check_keys(const YAML::Node& node, const std::set<std::string>& allowed,
                const std::string& where) {
  if (!node.IsMap()) fail("'" + where + "' must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) fail("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& out) {
  if (node[key]) out = node[key].as<T>();
}

}  // namespace

void RunConfig::validate() const {
  saliency.li.validate();
  if (saliency.top_k == 0) throw Error(ErrorCode::kInvalidArgument, "saliency.top_k must be positive");
  train.validate();
  blur.validate();
  if (sanity.seeds == 0) throw Error(ErrorCode::kInvalidArgument, "sanity.seeds must be positive");
}

RunConfig parse_run_config(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    fail(std::string("malformed YAML: ") + e.what());
  }
  RunConfig cfg;
  if (root.IsNull()) return cfg;
  try {
    check_keys(root, {"schema", "lateral_inhibition", "saliency", "train", "blur", "sanity",
                      "dataset", "paths"},
               "config");
    if (root["schema"] && root["schema"].as<int>() != kConfigSchemaVersion) {
      fail("unsupported schema " + root["schema"].as<std::string>());
    }
    if (const auto n = root["lateral_inhibition"]) {
      check_keys(n, {"a", "b", "k"}, "lateral_inhibition");
      read(n, "a", cfg.saliency.li.a);
      read(n, "b", cfg.saliency.li.b);
      read(n, "k", cfg.saliency.li.k);
    }
    if (const auto n = root["saliency"]) {
      check_keys(n, {"tap", "li_source", "spatial_layers_only", "top_k"}, "saliency");
      if (n["tap"]) cfg.saliency.tap = parse_tap_point(n["tap"].as<std::string>());
      if (n["li_source"]) cfg.saliency.li_source = parse_li_source(n["li_source"].as<std::string>());
      read(n, "spatial_layers_only", cfg.saliency.spatial_layers_only);
      read(n, "top_k", cfg.saliency.top_k);
    }
    if (const auto n = root["train"]) {
      check_keys(n, {"lr", "momentum", "lr_decay", "epochs", "batch", "seed"}, "train");
      read(n, "lr", cfg.train.learning_rate);
      read(n, "momentum", cfg.train.momentum);
      read(n, "lr_decay", cfg.train.lr_decay);
      read(n, "epochs", cfg.train.epochs);
      read(n, "batch", cfg.train.batch_size);
      read(n, "seed", cfg.train.seed);
    }
    if (const auto n = root["blur"]) {
      check_keys(n, {"radii", "regions", "threshold"}, "blur");
      read(n, "radii", cfg.blur.radii);
      read(n, "threshold", cfg.blur.threshold);
      if (n["regions"]) {
        cfg.blur.regions.clear();
        for (const auto& r : n["regions"].as<std::vector<std::string>>()) {
          cfg.blur.regions.push_back(parse_blur_region(r));
        }
      }
    }
    if (const auto n = root["sanity"]) {
      check_keys(n, {"mode", "seeds", "first_seed"}, "sanity");
      if (n["mode"]) cfg.sanity.mode = parse_randomization_mode(n["mode"].as<std::string>());
      read(n, "seeds", cfg.sanity.seeds);
      read(n, "first_seed", cfg.sanity.first_seed);
    }
    if (const auto n = root["dataset"]) {
      check_keys(n, {"seed", "train", "test", "adversarial", "image_size", "family_affinity"},
                 "dataset");
      read(n, "seed", cfg.dataset.seed);
      read(n, "train", cfg.dataset.counts.train);
      read(n, "test", cfg.dataset.counts.test);
      read(n, "adversarial", cfg.dataset.counts.adversarial);
      read(n, "image_size", cfg.dataset.counts.image_size);
      read(n, "family_affinity", cfg.dataset.counts.family_affinity);
    }
    if (const auto n = root["paths"]) {
      check_keys(n, {"spec", "weights", "dataset"}, "paths");
      read(n, "spec", cfg.paths.spec);
      read(n, "weights", cfg.paths.weights);
      read(n, "dataset", cfg.paths.dataset);
    }
  } catch (const YAML::Exception& e) {
    fail(std::string("bad value: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str());
}

std::string to_yaml(const RunConfig& cfg) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out.SetFloatPrecision(9);
  out << YAML::BeginMap;
  out << YAML::Key << "schema" << YAML::Value << kConfigSchemaVersion;
  out << YAML::Key << "lateral_inhibition" << YAML::Value << YAML::BeginMap
      << YAML::Key << "a" << YAML::Value << cfg.saliency.li.a
      << YAML::Key << "b" << YAML::Value << cfg.saliency.li.b
      << YAML::Key << "k" << YAML::Value << cfg.saliency.li.k << YAML::EndMap;
  out << YAML::Key << "saliency" << YAML::Value << YAML::BeginMap
      << YAML::Key << "tap" << YAML::Value << std::string(to_string(cfg.saliency.tap))
      << YAML::Key << "li_source" << YAML::Value << std::string(to_string(cfg.saliency.li_source))
      << YAML::Key << "spatial_layers_only" << YAML::Value << cfg.saliency.spatial_layers_only
      << YAML::Key << "top_k" << YAML::Value << cfg.saliency.top_k << YAML::EndMap;
  out << YAML::Key << "train" << YAML::Value << YAML::BeginMap
      << YAML::Key << "lr" << YAML::Value << cfg.train.learning_rate
      << YAML::Key << "momentum" << YAML::Value << cfg.train.momentum
      << YAML::Key << "lr_decay" << YAML::Value << cfg.train.lr_decay
      << YAML::Key << "epochs" << YAML::Value << cfg.train.epochs
      << YAML::Key << "batch" << YAML::Value << cfg.train.batch_size
      << YAML::Key << "seed" << YAML::Value << cfg.train.seed << YAML::EndMap;
  out << YAML::Key << "blur" << YAML::Value << YAML::BeginMap
      << YAML::Key << "radii" << YAML::Value << YAML::Flow << cfg.blur.radii;
  out << YAML::Key << "regions" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (BlurRegion r : cfg.blur.regions) out << std::string(to_string(r));
  out << YAML::EndSeq;
  out << YAML::Key << "threshold" << YAML::Value << cfg.blur.threshold << YAML::EndMap;
  out << YAML::Key << "sanity" << YAML::Value << YAML::BeginMap
      << YAML::Key << "mode" << YAML::Value << std::string(to_string(cfg.sanity.mode))
      << YAML::Key << "seeds" << YAML::Value << cfg.sanity.seeds
      << YAML::Key << "first_seed" << YAML::Value << cfg.sanity.first_seed << YAML::EndMap;
  out << YAML::Key << "dataset" << YAML::Value << YAML::BeginMap
      << YAML::Key << "seed" << YAML::Value << cfg.dataset.seed
      << YAML::Key << "train" << YAML::Value << cfg.dataset.counts.train
      << YAML::Key << "test" << YAML::Value << cfg.dataset.counts.test
      << YAML::Key << "adversarial" << YAML::Value << cfg.dataset.counts.adversarial
      << YAML::Key << "image_size" << YAML::Value << cfg.dataset.counts.image_size
      << YAML::Key << "family_affinity" << YAML::Value << cfg.dataset.counts.family_affinity
      << YAML::EndMap;
  out << YAML::Key << "paths" << YAML::Value << YAML::BeginMap
      << YAML::Key << "spec" << YAML::Value << cfg.paths.spec
      << YAML::Key << "weights" << YAML::Value << cfg.paths.weights
      << YAML::Key << "dataset" << YAML::Value << cfg.paths.dataset << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::string sha256_file(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kIo, "SHA-256 failed for " + path.string());
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

std::filesystem::path sidecar_path(const std::filesystem::path& artifact) {
  return std::filesystem::path(artifact.string() + ".meta.yaml");
}

void write_sidecar(const std::filesystem::path& artifact, std::string_view command,
                   const RunConfig& config, const std::filesystem::path& weights) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "tool_version" << YAML::Value << std::string(kVersion);
  out << YAML::Key << "config_schema" << YAML::Value << kConfigSchemaVersion;
  out << YAML::Key << "command" << YAML::Value << std::string(command);
  out << YAML::Key << "seed" << YAML::Value << config.train.seed;
  out << YAML::Key << "weights" << YAML::Value << weights.string();
  out << YAML::Key << "weights_sha256" << YAML::Value
      << (weights.empty() || !std::filesystem::exists(weights) ? std::string()
                                                               : sha256_file(weights));
  out << YAML::EndMap;
  std::ofstream file(sidecar_path(artifact), std::ios::trunc);
  if (!file) throw Error(ErrorCode::kIo, "cannot write " + sidecar_path(artifact).string());
  file << out.c_str() << "\nconfig:\n";
  std::istringstream body(to_yaml(config));
  for (std::string line; std::getline(body, line);) file << "  " << line << '\n';
  if (!file) throw Error(ErrorCode::kIo, "write failed for " + sidecar_path(artifact).string());
}

}  // namespace lisaliency
