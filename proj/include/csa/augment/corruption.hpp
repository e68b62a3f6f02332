#ifndef CSA_AUGMENT_CORRUPTION_HPP
#define CSA_AUGMENT_CORRUPTION_HPP

// Severity-graded test-time corruptions for robust accuracy.
//
// Every (kind, severity) maps to one number from a versioned table:
//
//   kind               parameter              severities 1..5
//   gaussian-noise     noise sigma            0.04 0.08 0.12 0.16 0.20
//   shot-noise-analog  photons at intensity 1 60   25   12   5    3
//   box-blur           kernel radius (px)     1    2    3    4    5
//   quantize           intensity levels       32   16   8    4    2
//   occlusion-patch    patch side / height    0.125 0.25 0.375 0.5 0.625
//   brightness-shift   additive offset        0.1  0.2  0.3  0.4  0.5
//   contrast-scale     factor about the mean  0.75 0.6  0.45 0.3  0.15
//
// Severity 0 is an internal identity used by tests and sanity suites.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "csa/augment/image.hpp"
#include "csa/errors.hpp"
#include "csa/random.hpp"

namespace csa::augment {

enum class Corruption {
  gaussian_noise,
  shot_noise,
  box_blur,
  quantize,
  occlusion,
  brightness,
  contrast,
};

inline constexpr std::size_t kCorruptionKinds = 7;
inline constexpr int kMaxSeverity = 5;

inline constexpr std::array<std::string_view, kCorruptionKinds> kCorruptionNames{
    "gaussian-noise", "shot-noise-analog", "box-blur",      "quantize",
    "occlusion-patch", "brightness-shift", "contrast-scale"};

inline std::string_view corruption_name(Corruption c) {
  return kCorruptionNames[static_cast<std::size_t>(c)];
}

inline Corruption parse_corruption(std::string_view name) {
  for (std::size_t i = 0; i < kCorruptionKinds; ++i) {
    if (kCorruptionNames[i] == name) return static_cast<Corruption>(i);
  }
  throw ConfigError("unknown corruption kind '" + std::string(name) + "'");
}

struct CorruptionSpec {
  Corruption kind = Corruption::gaussian_noise;
  int severity = 1;

  /// User-facing specs take severities 1..5 only.
  static CorruptionSpec make(Corruption kind, int severity) {
    if (severity < 1 || severity > kMaxSeverity) {
      throw ConfigError("corruption severity must be in 1..5, got " + std::to_string(severity));
    }
    return {kind, severity};
  }
};

struct CorruptionTable {
  static constexpr int kVersion = 1;
  std::array<std::array<double, kMaxSeverity>, kCorruptionKinds> params{};

  static CorruptionTable defaults() {
    CorruptionTable t;
    t.params = {{
        {0.04, 0.08, 0.12, 0.16, 0.20},
        {60, 25, 12, 5, 3},
        {1, 2, 3, 4, 5},
        {32, 16, 8, 4, 2},
        {0.125, 0.25, 0.375, 0.5, 0.625},
        {0.1, 0.2, 0.3, 0.4, 0.5},
        {0.75, 0.6, 0.45, 0.3, 0.15},
    }};
    return t;
  }

  double at(Corruption kind, int severity) const {
    return params[static_cast<std::size_t>(kind)][static_cast<std::size_t>(severity - 1)];
  }

  /// key = value text; one line per kind with the five severity parameters.
  std::string serialize() const {
    std::ostringstream os;
    os << "# Corruption severity table. One line per kind: parameters for severities 1..5.\n";
    os << "version = " << kVersion << "\n";
    for (std::size_t k = 0; k < kCorruptionKinds; ++k) {
      os << kCorruptionNames[k] << " =";
      for (double v : params[k]) os << ' ' << v;
      os << '\n';
    }
    return os.str();
  }

  static CorruptionTable parse(std::istream& in, const std::string& source = "<table>") {
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
    }
    const int version = tree.get<int>("version", -1);
    if (version != kVersion) {
      throw ConfigError(source + ": unsupported corruption table version " +
                        std::to_string(version));
    }
    CorruptionTable t;
    for (std::size_t k = 0; k < kCorruptionKinds; ++k) {
      const auto key = std::string(kCorruptionNames[k]);
      const auto text = tree.get_optional<std::string>(key);
      if (!text) throw ConfigError(source + ": missing corruption kind '" + key + "'");
      std::istringstream row(*text);
      for (int s = 0; s < kMaxSeverity; ++s) {
        if (!(row >> t.params[k][s])) {
          throw ConfigError(source + ": '" + key + "' needs 5 numeric severity parameters");
        }
      }
      std::string extra;
      if (row >> extra) throw ConfigError(source + ": '" + key + "' has more than 5 parameters");
    }
    for (const auto& [key, _] : tree) {
      if (key != "version") parse_corruption(key);
    }
    return t;
  }

  static CorruptionTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open corruption table '" + path + "'");
    return parse(in, path);
  }
};

/// All 7 kinds x 5 severities, kind-major.
inline std::vector<CorruptionSpec> full_suite() {
  std::vector<CorruptionSpec> out;
  for (std::size_t k = 0; k < kCorruptionKinds; ++k) {
    for (int s = 1; s <= kMaxSeverity; ++s) out.push_back({static_cast<Corruption>(k), s});
  }
  return out;
}

namespace detail {

inline void box_blur(std::span<const double> in, std::span<double> out, ImageShape shape,
                     long radius) {
  const long h = static_cast<long>(shape.height), w = static_cast<long>(shape.width);
  const std::size_t plane = shape.height * shape.width;
  const double norm = static_cast<double>((2 * radius + 1) * (2 * radius + 1));
  for (std::size_t c = 0; c < shape.channels; ++c) {
    const double* src = in.data() + c * plane;
    for (long y = 0; y < h; ++y) {
      for (long x = 0; x < w; ++x) {
        double acc = 0.0;
        for (long dy = -radius; dy <= radius; ++dy) {
          const long sy = std::clamp(y + dy, 0L, h - 1);
          for (long dx = -radius; dx <= radius; ++dx) {
            acc += src[sy * w + std::clamp(x + dx, 0L, w - 1)];
          }
        }
        out[c * plane + y * w + x] = acc / norm;
      }
    }
  }
}

}  // namespace detail

/// Corrupts a single [C, H, W] image.
inline std::vector<double> corrupt_image(std::span<const double> image, ImageShape shape,
                                         CorruptionSpec spec, Rng& rng,
                                         const CorruptionTable& table) {
  std::vector<double> out(image.begin(), image.end());
  if (spec.severity == 0) return out;
  if (spec.severity < 0 || spec.severity > kMaxSeverity) {
    throw ConfigError("corruption severity must be in 0..5");
  }
  const double p = table.at(spec.kind, spec.severity);
  switch (spec.kind) {
    case Corruption::gaussian_noise:
      for (auto& v : out) v = clamp01(v + p * rng.normal());
      break;
    case Corruption::shot_noise:
      for (auto& v : out) v = clamp01(static_cast<double>(rng.poisson(clamp01(v) * p)) / p);
      break;
    case Corruption::box_blur:
      detail::box_blur(image, out, shape, std::lround(p));
      break;
    case Corruption::quantize: {
      const double steps = std::round(p) - 1.0;
      for (auto& v : out) v = std::round(clamp01(v) * steps) / steps;
      break;
    }
    case Corruption::occlusion: {
      const auto side = static_cast<std::size_t>(
          std::max(1L, std::lround(p * static_cast<double>(shape.height))));
      const std::size_t sh = std::min(side, shape.height), sw = std::min(side, shape.width);
      const std::size_t y0 = rng.uniform_index(shape.height - sh + 1);
      const std::size_t x0 = rng.uniform_index(shape.width - sw + 1);
      const std::size_t plane = shape.height * shape.width;
      for (std::size_t c = 0; c < shape.channels; ++c) {
        for (std::size_t y = y0; y < y0 + sh; ++y) {
          for (std::size_t x = x0; x < x0 + sw; ++x) out[c * plane + y * shape.width + x] = 0.0;
        }
      }
      break;
    }
    case Corruption::brightness:
      for (auto& v : out) v = clamp01(v + p);
      break;
    case Corruption::contrast: {
      const std::size_t plane = shape.height * shape.width;
      for (std::size_t c = 0; c < shape.channels; ++c) {
        double mean = 0.0;
        for (std::size_t i = 0; i < plane; ++i) mean += image[c * plane + i];
        mean /= static_cast<double>(plane);
        for (std::size_t i = 0; i < plane; ++i) {
          out[c * plane + i] = clamp01(mean + (image[c * plane + i] - mean) * p);
        }
      }
      break;
    }
  }
  return out;
}

/// Corrupted copy of the batch; labels are carried over unchanged.
inline ImageBatch corrupt(const ImageBatch& batch, CorruptionSpec spec, Rng& rng,
                          const CorruptionTable& table = CorruptionTable::defaults()) {
  const auto shape = batch.shape();
  std::vector<double> out;
  out.reserve(batch.images.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto img = corrupt_image(batch.image(i), shape, spec, rng, table);
    out.insert(out.end(), img.begin(), img.end());
  }
  return {batch_tensor(batch.size(), shape, std::move(out)), batch.labels};
}

}  // namespace csa::augment

#endif  // CSA_AUGMENT_CORRUPTION_HPP
