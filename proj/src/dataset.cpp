#include "lisaliency/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "lisaliency/image_io.hpp"
#include "lisaliency/parallel.hpp"

namespace lisaliency {

namespace {

constexpr std::array<std::string_view, kShapeClasses> kNames{
    "disc", "square", "triangle", "cross", "ring", "diamond", "star", "hexagon"};

using Rgb = std::array<double, 3>;

// 53-bit uniform in [0, 1); avoids the library-specific distributions so the
// corpus is reproducible across standard libraries.
double uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * uniform(rng); }
std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

Rgb hsv(double h, double s, double v) {
  const double c = v * s;
  const double hp = std::fmod(h, 1.0) * 6.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  Rgb rgb{};
  switch (static_cast<int>(hp)) {
    case 0: rgb = {c, x, 0}; break;
    case 1: rgb = {x, c, 0}; break;
    case 2: rgb = {0, c, x}; break;
    case 3: rgb = {0, x, c}; break;
    case 4: rgb = {x, 0, c}; break;
    default: rgb = {c, 0, x}; break;
  }
  const double m = v - c;
  for (double& ch : rgb) ch += m;
  return rgb;
}

Rgb mix(const Rgb& a, const Rgb& b, double t) {
  return {a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t};
}

// Shape membership in local coordinates, roughly [-1, 1]^2.
bool inside(std::size_t label, double u, double v) {
  const double r = std::hypot(u, v);
  switch (label) {
    case 0: return r <= 1.0;
    case 1: return std::max(std::fabs(u), std::fabs(v)) <= 0.85;
    case 2: return v >= -0.95 && v <= 0.8 && std::fabs(u) <= 0.95 * (v + 0.95) / 1.75;
    case 3: return (std::fabs(u) <= 0.32 && std::fabs(v) <= 1.0) ||
                   (std::fabs(v) <= 0.32 && std::fabs(u) <= 1.0);
    case 4: return r <= 1.0 && r >= 0.55;
    case 5: return std::fabs(u) + std::fabs(v) <= 1.0;
    case 6: {
      const double theta = std::atan2(v, u) + std::numbers::pi / 2.0;
      const double sector = 2.0 * std::numbers::pi / 5.0;
      const double phase = std::fabs(std::fmod(theta + 10.0 * sector, sector) - sector / 2.0) / (sector / 2.0);
      return r <= 0.45 + 0.55 * phase;
    }
    case 7: {
      const double au = std::fabs(u), av = std::fabs(v);
      return av <= 0.866 && av * 0.57735 + au <= 1.0;
    }
    default: return false;
  }
}

struct Texture {
  int kind = 0;  // 0 solid, 1 stripes, 2 checker
  Rgb primary{}, secondary{};
  double period = 4.0;
  double angle = 0.0;
};

Rgb texture_at(const Texture& t, double x, double y) {
  switch (t.kind) {
    case 1: {
      const double s = x * std::cos(t.angle) + y * std::sin(t.angle);
      return std::fmod(std::floor(s / t.period), 2.0) == 0.0 ? t.primary : t.secondary;
    }
    case 2: {
      const auto parity = static_cast<long>(std::floor(x / t.period) + std::floor(y / t.period));
      return parity % 2 == 0 ? t.primary : t.secondary;
    }
    default: return t.primary;
  }
}

std::vector<Rgb> render_background(std::size_t family, std::size_t n, std::mt19937_64& rng) {
  std::vector<Rgb> px(n * n);
  const Rgb a = hsv(uniform(rng), uniform(rng, 0.2, 0.7), uniform(rng, 0.3, 0.9));
  const Rgb b = hsv(uniform(rng), uniform(rng, 0.2, 0.7), uniform(rng, 0.3, 0.9));
  const double nn = static_cast<double>(n);
  switch (family) {
    case 0: {  // linear gradient
      const double angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
      const double c = std::cos(angle), s = std::sin(angle);
      for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) {
          const double t = 0.5 + ((x - nn / 2) * c + (y - nn / 2) * s) / (nn * 1.42);
          px[y * n + x] = mix(a, b, std::clamp(t, 0.0, 1.0));
        }
      }
      break;
    }
    case 1: {  // value noise: coarse lattice, bilinear, plus per-pixel grain
      constexpr std::size_t kGrid = 6;
      std::array<double, (kGrid + 1) * (kGrid + 1)> lattice{};
      for (double& l : lattice) l = uniform(rng);
      for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) {
          const double gx = x * kGrid / nn, gy = y * kGrid / nn;
          const auto x0 = static_cast<std::size_t>(gx), y0 = static_cast<std::size_t>(gy);
          const double fx = gx - x0, fy = gy - y0;
          const auto at = [&](std::size_t i, std::size_t j) { return lattice[j * (kGrid + 1) + i]; };
          const double v = (at(x0, y0) * (1 - fx) + at(x0 + 1, y0) * fx) * (1 - fy) +
                           (at(x0, y0 + 1) * (1 - fx) + at(x0 + 1, y0 + 1) * fx) * fy;
          const double grain = uniform(rng, -0.08, 0.08);
          Rgb c = mix(a, b, v);
          for (double& ch : c) ch = std::clamp(ch + grain, 0.0, 1.0);
          px[y * n + x] = c;
        }
      }
      break;
    }
    case 2: {  // soft sinusoidal stripes
      const double angle = uniform(rng, 0.0, std::numbers::pi);
      const double period = uniform(rng, 6.0, 14.0);
      const double c = std::cos(angle), s = std::sin(angle);
      for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) {
          const double t = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * (x * c + y * s) / period);
          px[y * n + x] = mix(a, b, t);
        }
      }
      break;
    }
    default: {  // soft blobs on a flat base
      std::fill(px.begin(), px.end(), a);
      const std::size_t blobs = 3 + pick(rng, 4);
      for (std::size_t k = 0; k < blobs; ++k) {
        const double cx = uniform(rng, 0.0, nn), cy = uniform(rng, 0.0, nn);
        const double radius = uniform(rng, nn / 10.0, nn / 4.0);
        const Rgb color = hsv(uniform(rng), uniform(rng, 0.2, 0.7), uniform(rng, 0.3, 0.9));
        for (std::size_t y = 0; y < n; ++y) {
          for (std::size_t x = 0; x < n; ++x) {
            const double d = std::hypot(x + 0.5 - cx, y + 0.5 - cy) / radius;
            if (d < 1.0) px[y * n + x] = mix(px[y * n + x], color, 1.0 - d * d);
          }
        }
      }
      break;
    }
  }
  return px;
}

std::string format_box_row(const std::string& file, std::size_t label, const Box& b) {
  std::ostringstream os;
  os << file << ',' << label << ',' << b.x << ',' << b.y << ',' << b.w << ',' << b.h;
  return os.str();
}

std::size_t parse_field(std::string_view s, const std::string& where) {
  std::size_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kFormat, "bad integer '" + std::string(s) + "' in " + where);
  }
  return v;
}

}  // namespace

std::span<const std::string_view> shape_class_names() { return kNames; }

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kTest: return "test";
    case Split::kAdversarial: return "adversarial";
  }
  return "?";
}

Scene render_scene(const SceneParams& params, std::mt19937_64& rng) {
  if (params.label >= kShapeClasses || params.family >= kBackgroundFamilies || params.size < 32) {
    throw Error(ErrorCode::kInvalidArgument, "render_scene: label/family out of range or size < 32");
  }
  const std::size_t n = params.size;
  std::vector<Rgb> px = render_background(params.family, n, rng);

  const double scale = static_cast<double>(n) / 64.0;
  const auto side = static_cast<std::size_t>(std::lround(uniform(rng, 18.0, 30.0) * scale));
  const std::size_t x0 = pick(rng, n - side + 1), y0 = pick(rng, n - side + 1);
  const double half = side / 2.0;
  const double cx = x0 + half, cy = y0 + half;
  const bool symmetric = params.label == 0 || params.label == 4;
  const double rot = symmetric ? 0.0 : uniform(rng, -0.25, 0.25);

  Texture tex;
  tex.kind = static_cast<int>(pick(rng, 3));
  tex.primary = hsv(uniform(rng), uniform(rng, 0.6, 1.0), uniform(rng, 0.75, 1.0));
  tex.secondary = hsv(uniform(rng), uniform(rng, 0.6, 1.0), uniform(rng, 0.1, 0.35));
  tex.period = uniform(rng, 2.0, 4.0) * scale;
  tex.angle = uniform(rng, 0.0, std::numbers::pi);

  const double cr = std::cos(rot), sr = std::sin(rot);
  for (std::size_t y = y0; y < y0 + side; ++y) {
    for (std::size_t x = x0; x < x0 + side; ++x) {
      // 3x3 supersampled coverage for anti-aliased edges.
      int hits = 0;
      for (int sy = 0; sy < 3; ++sy) {
        for (int sx = 0; sx < 3; ++sx) {
          const double dx = (x + (sx + 0.5) / 3.0 - cx) / half;
          const double dy = (y + (sy + 0.5) / 3.0 - cy) / half;
          if (inside(params.label, dx * cr + dy * sr, -dx * sr + dy * cr)) ++hits;
        }
      }
      if (hits == 0) continue;
      const Rgb color = texture_at(tex, static_cast<double>(x), static_cast<double>(y));
      px[y * n + x] = mix(px[y * n + x], color, hits / 9.0);
    }
  }

  Scene scene{Tensor({3, n, n}), Box{x0, y0, side, side}};
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        // Quantize now so the in-memory scene equals what a PNG round trip gives.
        const double q = std::round(std::clamp(px[y * n + x][c], 0.0, 1.0) * 255.0);
        scene.image.at(c, y, x) = static_cast<float>(q / 255.0);
      }
    }
  }
  return scene;
}

void generate_dataset(const std::filesystem::path& dir, std::uint64_t seed,
                      const DatasetCounts& counts) {
  if (counts.family_affinity < 0.0 || counts.family_affinity > 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "family_affinity must lie in [0, 1]");
  }
  const std::array<std::pair<Split, std::size_t>, 3> splits{
      {{Split::kTrain, counts.train}, {Split::kTest, counts.test},
       {Split::kAdversarial, counts.adversarial}}};
  for (const auto& [split, count] : splits) {
    if (count == 0) continue;
    const std::filesystem::path split_dir = dir / std::string(to_string(split));
    std::error_code ec;
    std::filesystem::create_directories(split_dir / "images", ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot create " + split_dir.string() + ": " + ec.message());

    std::vector<std::string> rows(count);
    parallel_for(count, [&](std::size_t i) {
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(split), static_cast<std::uint32_t>(i)};
      std::mt19937_64 rng(seq);
      SceneParams params;
      params.label = i % kShapeClasses;
      params.size = counts.image_size;
      const std::size_t home = params.label % kBackgroundFamilies;
      const double draw = uniform(rng);
      const std::size_t other = pick(rng, kBackgroundFamilies - 1);
      const std::size_t away = other >= home ? other + 1 : other;
      if (split == Split::kAdversarial) {
        params.family = away;
      } else {
        params.family = draw < counts.family_affinity ? home : away;
      }
      const Scene scene = render_scene(params, rng);
      char name[32];
      std::snprintf(name, sizeof(name), "%05zu.png", i);
      save_png(scene.image, split_dir / "images" / name);
      rows[i] = format_box_row(name, params.label, scene.box);
    });

    std::ofstream labels(split_dir / "labels.csv", std::ios::trunc | std::ios::binary);
    if (!labels) throw Error(ErrorCode::kIo, "cannot write labels in " + split_dir.string());
    labels << "filename,label,box_x,box_y,box_w,box_h\n";
    for (const auto& row : rows) labels << row << '\n';
    if (!labels) throw Error(ErrorCode::kIo, "write failed in " + split_dir.string());
  }
}

std::vector<DatasetSample> load_dataset(const std::filesystem::path& split_dir, std::size_t limit) {
  const auto labels_path = split_dir / "labels.csv";
  std::ifstream in(labels_path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + labels_path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("filename,label", 0) != 0) {
    throw Error(ErrorCode::kFormat, labels_path.string() + ": missing header");
  }
  std::vector<DatasetSample> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    const std::string where = labels_path.string() + ":" + std::to_string(line_no);
    if (fields.size() != 6) throw Error(ErrorCode::kFormat, where + ": expected 6 fields");
    DatasetSample s;
    s.id = std::string(fields[0]);
    s.label = parse_field(fields[1], where);
    s.box = Box{parse_field(fields[2], where), parse_field(fields[3], where),
                parse_field(fields[4], where), parse_field(fields[5], where)};
    rows.push_back(std::move(s));
    if (limit != 0 && rows.size() == limit) break;
  }
  if (rows.empty()) throw Error(ErrorCode::kFormat, labels_path.string() + ": no samples");
  parallel_for(rows.size(), [&](std::size_t i) {
    rows[i].image = load_image(split_dir / "images" / rows[i].id);
  });
  return rows;
}

std::vector<LabeledImage> to_labeled(std::span<const DatasetSample> samples,
                                     const PreprocessConfig& cfg) {
  std::vector<LabeledImage> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out[i] = LabeledImage{preprocess(samples[i].image, cfg), samples[i].label};
  }
  return out;
}

std::vector<ExperimentSample> to_experiment(std::span<const DatasetSample> samples,
                                            const PreprocessConfig& cfg) {
  std::vector<ExperimentSample> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out[i] = ExperimentSample{samples[i].id, fit_to_input(samples[i].image, cfg), samples[i].label};
  }
  return out;
}

}  // namespace lisaliency
