#include "lisaliency/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lisaliency/config.hpp"
#include "lisaliency/dataset.hpp"
#include "lisaliency/image_io.hpp"

namespace lisaliency {

namespace {

// Raised when a value required by a subcommand came neither from a flag nor
// from the config file.
struct UsageError {
  std::string message;
  const CLI::App* command;
};

// Flag values are kept apart from the config and applied on top of it only
// when the flag was given, so flags win over --config.
class Overrides {
 public:
  template <typename T>
  CLI::Option* add(CLI::App* app, const std::string& name, const std::string& help,
                   std::function<void(RunConfig&, const T&)> apply) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(name, *value, help);
    appliers_.push_back([opt, value, apply](RunConfig& cfg) {
      if (opt->count() > 0) apply(cfg, *value);
    });
    return opt;
  }

  void apply(RunConfig& cfg) const {
    for (const auto& f : appliers_) f(cfg);
  }

 private:
  std::vector<std::function<void(RunConfig&)>> appliers_;
};

void add_saliency_flags(CLI::App* app, Overrides& o) {
  o.add<std::string>(app, "--tap", "back-propagation seed: after|before (softmax)",
                     [](RunConfig& c, const std::string& v) { c.saliency.tap = parse_tap_point(v); })
      ->check(CLI::IsMember({"after", "before"}));
  o.add<std::string>(app, "--li-source", "tensor feeding the inhibition model: gradient|activation",
                     [](RunConfig& c, const std::string& v) {
                       c.saliency.li_source = parse_li_source(v);
                     })
      ->check(CLI::IsMember({"gradient", "activation"}));
  o.add<float>(app, "--li-a", "average-term coefficient",
               [](RunConfig& c, const float& v) { c.saliency.li.a = v; });
  o.add<float>(app, "--li-b", "differential-term coefficient",
               [](RunConfig& c, const float& v) { c.saliency.li.b = v; });
  o.add<std::size_t>(app, "--li-k", "inhibition zone side (odd)",
                     [](RunConfig& c, const std::size_t& v) { c.saliency.li.k = v; });
  o.add<bool>(app, "--spatial-only", "fuse only spatial (conv) ReLU layers",
              [](RunConfig& c, const bool& v) { c.saliency.spatial_layers_only = v; });
  o.add<std::size_t>(app, "--top-k", "categories fused into a saliency map",
                     [](RunConfig& c, const std::size_t& v) { c.saliency.top_k = v; });
}

void add_model_flags(CLI::App* app, Overrides& o) {
  o.add<std::string>(app, "--spec", "network spec file",
                     [](RunConfig& c, const std::string& v) { c.paths.spec = v; });
  o.add<std::string>(app, "--weights", "weight file",
                     [](RunConfig& c, const std::string& v) { c.paths.weights = v; });
}

const std::string& require(const std::string& value, const char* flag, const CLI::App* app) {
  if (value.empty()) throw UsageError{std::string(flag) + " is required", app};
  return value;
}

struct Model {
  NetworkSpec spec;
  NetworkWeights weights;
};

Model load_model(const RunConfig& cfg, const CLI::App* app) {
  Model m;
  m.spec = load_network_spec(require(cfg.paths.spec, "--spec", app));
  m.weights = load_weights(require(cfg.paths.weights, "--weights", app), m.spec);
  return m;
}

void write_csv_lines(const std::string& path, const std::string& header,
                     const std::vector<std::string>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << header << '\n';
  for (const auto& r : rows) out << r << '\n';
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

void emit_map(const Tensor& values, const std::string& png, const std::string& raw,
              std::string_view command, const RunConfig& cfg) {
  if (!png.empty()) {
    save_png(render_map(values), png);
    write_sidecar(png, command, cfg, cfg.paths.weights);
  }
  if (!raw.empty()) {
    write_map_csv(values, raw);
    write_sidecar(raw, command, cfg, cfg.paths.weights);
  }
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Lateral-inhibition saliency toolkit", "lisaliency"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("lisaliency ") + std::string(kVersion) +
                                        " (config schema " +
                                        std::to_string(kConfigSchemaVersion) + ")");
  std::string config_path;
  app.add_option("--config", config_path, "run config (YAML); flags override it")
      ->check(CLI::ExistingFile);

  Overrides overrides;
  std::function<void(const RunConfig&)> action;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate the synthetic shapes corpus");
  std::string gen_out;
  gen->add_option("--out", gen_out, "output directory")->required();
  overrides.add<std::uint64_t>(gen, "--seed", "corpus seed",
                               [](RunConfig& c, const std::uint64_t& v) { c.dataset.seed = v; });
  overrides.add<std::size_t>(gen, "--train", "training images",
                             [](RunConfig& c, const std::size_t& v) { c.dataset.counts.train = v; });
  overrides.add<std::size_t>(gen, "--test", "test images",
                             [](RunConfig& c, const std::size_t& v) { c.dataset.counts.test = v; });
  overrides.add<std::size_t>(
      gen, "--adversarial", "mismatched-background images",
      [](RunConfig& c, const std::size_t& v) { c.dataset.counts.adversarial = v; });
  gen->callback([&] {
    action = [&](const RunConfig& cfg) {
      generate_dataset(gen_out, cfg.dataset.seed, cfg.dataset.counts);
      std::cout << "wrote corpus to " << gen_out << '\n';
    };
  });

  // train
  auto* tr = app.add_subcommand("train", "train a network on a generated corpus");
  std::string train_out;
  tr->add_option("--out", train_out, "output weight file")->required();
  overrides.add<std::string>(tr, "--spec", "network spec file",
                             [](RunConfig& c, const std::string& v) { c.paths.spec = v; });
  overrides.add<std::string>(tr, "--dataset", "corpus root (with train/ and test/)",
                             [](RunConfig& c, const std::string& v) { c.paths.dataset = v; });
  overrides.add<float>(tr, "--lr", "learning rate",
                       [](RunConfig& c, const float& v) { c.train.learning_rate = v; });
  overrides.add<std::size_t>(tr, "--epochs", "epochs",
                             [](RunConfig& c, const std::size_t& v) { c.train.epochs = v; });
  overrides.add<std::size_t>(tr, "--batch", "mini-batch size",
                             [](RunConfig& c, const std::size_t& v) { c.train.batch_size = v; });
  overrides.add<std::uint64_t>(tr, "--seed", "initialization and shuffling seed",
                               [](RunConfig& c, const std::uint64_t& v) { c.train.seed = v; });
  tr->callback([&] {
    action = [&](const RunConfig& cfg) {
      const NetworkSpec spec = load_network_spec(require(cfg.paths.spec, "--spec", tr));
      const std::filesystem::path root = require(cfg.paths.dataset, "--dataset", tr);
      const auto train_set = to_labeled(load_dataset(root / "train"), spec.preprocess);
      const TrainResult result = train(spec, train_set, cfg.train, [](std::size_t e, double loss) {
        std::cout << "epoch " << e + 1 << " loss " << fmt(loss) << std::endl;
      });
      save_weights(result.weights, train_out);
      std::cout << "train_accuracy " << fmt(accuracy(spec, result.weights, train_set)) << '\n';
      if (std::filesystem::exists(root / "test" / "labels.csv")) {
        const auto test_set = to_labeled(load_dataset(root / "test"), spec.preprocess);
        std::cout << "test_accuracy " << fmt(accuracy(spec, result.weights, test_set)) << '\n';
      }
      write_sidecar(train_out, "train", cfg, train_out);
    };
  });

  // classify
  auto* cls = app.add_subcommand("classify", "print the top-5 predictions for an image");
  std::string cls_image;
  cls->add_option("--image", cls_image, "input image (PNG or PPM)")->required();
  add_model_flags(cls, overrides);
  cls->callback([&] {
    action = [&](const RunConfig& cfg) {
      const Model m = load_model(cfg, cls);
      const Tensor input = preprocess(load_image(cls_image), m.spec.preprocess);
      const ForwardResult out = forward(m.spec, m.weights, input);
      const auto best = top_k(out.probabilities, 5);
      std::cout << "rank,class_id,class_name,prob\n";
      for (std::size_t r = 0; r < best.size(); ++r) {
        std::cout << r + 1 << ',' << best[r] << ',' << m.spec.class_names[best[r]] << ','
                  << fmt(out.probabilities[best[r]]) << '\n';
      }
    };
  });

  // attention
  auto* att = app.add_subcommand("attention", "category-specific attention map");
  std::string att_image, att_png, att_raw;
  std::size_t att_category = 0;
  att->add_option("--image", att_image, "input image")->required();
  att->add_option("--category", att_category, "class index")->required();
  att->add_option("--out", att_png, "rendered PNG");
  att->add_option("--out-raw", att_raw, "raw map CSV");
  add_model_flags(att, overrides);
  add_saliency_flags(att, overrides);
  att->callback([&] {
    action = [&](const RunConfig& cfg) {
      const Model m = load_model(cfg, att);
      if (att_category >= m.spec.class_count()) {
        throw Error(ErrorCode::kInvalidArgument, "--category out of range");
      }
      const Tensor input = preprocess(load_image(att_image), m.spec.preprocess);
      const AttentionMap map = attention_map(m.spec, m.weights, input, att_category, cfg.saliency);
      std::cout << "category " << map.category << " (" << m.spec.class_names[map.category]
                << ")" << (map.degenerate ? " degenerate" : "") << '\n';
      emit_map(map.values, att_png, att_raw, "attention", cfg);
    };
  });

  // saliency
  auto* sal = app.add_subcommand("saliency", "top-k fused saliency map");
  std::string sal_image, sal_png, sal_raw;
  sal->add_option("--image", sal_image, "input image")->required();
  sal->add_option("--out", sal_png, "rendered PNG");
  sal->add_option("--out-raw", sal_raw, "raw map CSV");
  add_model_flags(sal, overrides);
  add_saliency_flags(sal, overrides);
  sal->callback([&] {
    action = [&](const RunConfig& cfg) {
      const Model m = load_model(cfg, sal);
      const Tensor input = preprocess(load_image(sal_image), m.spec.preprocess);
      const SaliencyMap map = saliency_map(m.spec, m.weights, input, cfg.saliency);
      std::cout << "categories";
      for (std::size_t c : map.categories) std::cout << ' ' << c;
      std::cout << (map.degenerate ? " degenerate" : "") << '\n';
      emit_map(map.values, sal_png, sal_raw, "saliency", cfg);
    };
  });

  // sanity
  auto* san = app.add_subcommand("sanity", "weight-randomization sanity test");
  std::string san_image, san_out;
  san->add_option("--image", san_image, "input image")->required();
  san->add_option("--out", san_out, "similarity CSV")->required();
  overrides
      .add<std::string>(san, "--mode", "cascading|independent",
                        [](RunConfig& c, const std::string& v) {
                          c.sanity.mode = parse_randomization_mode(v);
                        })
      ->check(CLI::IsMember({"cascading", "independent"}));
  overrides.add<std::size_t>(san, "--seeds", "number of randomization seeds",
                             [](RunConfig& c, const std::size_t& v) { c.sanity.seeds = v; });
  add_model_flags(san, overrides);
  add_saliency_flags(san, overrides);
  san->callback([&] {
    action = [&](const RunConfig& cfg) {
      const Model m = load_model(cfg, san);
      const Tensor input = preprocess(load_image(san_image), m.spec.preprocess);
      std::vector<std::string> rows;
      for (std::size_t s = 0; s < cfg.sanity.seeds; ++s) {
        const auto plan = RandomizationPlan::top_down(m.spec, cfg.sanity.mode,
                                                      cfg.sanity.first_seed + s);
        for (const auto& r : run_randomization_test(m.spec, m.weights, input, plan, cfg.saliency)) {
          rows.push_back(std::to_string(r.stage) + ',' + r.layer + ',' + std::to_string(r.seed) +
                         ',' + fmt(r.hog_pearson) + ',' + fmt(r.spearman));
        }
      }
      write_csv_lines(san_out, "stage,layer_name,seed,hog_pearson,spearman", rows);
      write_sidecar(san_out, "sanity", cfg, cfg.paths.weights);
      std::cout << "wrote " << rows.size() << " records to " << san_out << '\n';
    };
  });

  // blur-exp
  auto* blur = app.add_subcommand("blur-exp", "background/foreground blur experiment");
  std::string blur_out, blur_flips, blur_predictions;
  std::size_t blur_limit = 0;
  blur->add_option("--out", blur_out, "accuracy report CSV")->required();
  blur->add_option("--flips", blur_flips, "images fixed by background blur (CSV)");
  blur->add_option("--predictions", blur_predictions, "per-image top-5 records (CSV)");
  blur->add_option("--limit", blur_limit, "use only the first N images (0 = all)");
  overrides.add<std::string>(blur, "--dataset", "split directory with labels.csv and images/",
                             [](RunConfig& c, const std::string& v) { c.paths.dataset = v; });
  overrides.add<std::vector<double>>(blur, "--radii", "blur radii, comma separated",
                                     [](RunConfig& c, const std::vector<double>& v) {
                                       c.blur.radii = v;
                                     })
      ->delimiter(',');
  overrides.add<double>(blur, "--threshold", "mask threshold relative to the map maximum",
                        [](RunConfig& c, const double& v) { c.blur.threshold = v; });
  add_model_flags(blur, overrides);
  add_saliency_flags(blur, overrides);
  blur->callback([&] {
    action = [&](const RunConfig& cfg) {
      const Model m = load_model(cfg, blur);
      const auto samples =
          load_dataset(require(cfg.paths.dataset, "--dataset", blur), blur_limit);
      const auto data = to_experiment(samples, m.spec.preprocess);
      const AccuracyReport report = run_blur_experiment(m.spec, m.weights, data, cfg.blur, cfg.saliency);
      std::vector<std::string> rows;
      for (const auto& v : report.variants) {
        rows.push_back(v.variant + ',' + v.region + ',' + fmt(v.radius) + ',' + fmt(v.top1) + ',' +
                       fmt(v.top5) + ',' + std::to_string(v.count));
        std::cout << rows.back() << '\n';
      }
      write_csv_lines(blur_out, "variant,region,radius,top1,top5,count", rows);
      write_sidecar(blur_out, "blur-exp", cfg, cfg.paths.weights);
      if (!blur_flips.empty()) {
        std::vector<std::string> flips;
        for (const auto& f : report.flips) {
          flips.push_back(f.image_id + ',' + f.variant + ',' + std::to_string(f.label) + ',' +
                          std::to_string(f.original_top1) + ',' + std::to_string(f.variant_top1));
        }
        write_csv_lines(blur_flips, "image_id,variant,label,original_top1,variant_top1", flips);
      }
      if (!blur_predictions.empty()) {
        std::vector<std::string> preds;
        for (const auto& p : report.predictions) {
          std::string row = p.image_id + ',' + p.variant + ',' + std::to_string(p.label);
          for (std::size_t i = 0; i < 5; ++i) {
            row += i < p.top_classes.size()
                       ? ',' + std::to_string(p.top_classes[i]) + ',' + fmt(p.top_probs[i])
                       : std::string(",,");
          }
          preds.push_back(std::move(row));
        }
        write_csv_lines(blur_predictions,
                        "image_id,variant,label,c1,p1,c2,p2,c3,p3,c4,p4,c5,p5", preds);
      }
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error[usage]: " << e.what() << "\n\n";
    const CLI::App* target = &app;
    for (const CLI::App* sub : app.get_subcommands()) target = sub;
    std::cerr << target->help();
    return 2;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    overrides.apply(cfg);
    cfg.validate();
    if (action) action(cfg);
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "error[usage]: " << e.message << "\n\n" << e.command->help();
    return 2;
  } catch (const Error& e) {
    std::cerr << "error[" << to_string(e.code()) << "]: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace lisaliency
