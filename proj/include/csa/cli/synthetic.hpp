#ifndef CSA_CLI_SYNTHETIC_HPP
#define CSA_CLI_SYNTHETIC_HPP

// Synthetic image benchmarks.
//
// Each sample is a latent vector rendered as a single-channel image through a
// fixed set of basis patterns. Every pattern is symmetric under horizontal flip
// and quarter-turn rotation, so the geometric augmentation primitives preserve
// the class signal.
//
//   synthetic-blobs:      Gaussian clusters in a 6-d latent space, one per class
//   synthetic-two-moons:  the interleaved half-moons in 2-d, rendered on two patterns

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "csa/augment/dataset.hpp"
#include "csa/errors.hpp"
#include "csa/random.hpp"

namespace csa::cli {

enum class SyntheticKind { blobs, two_moons };

inline SyntheticKind parse_synthetic_kind(const std::string& name) {
  if (name == "synthetic-blobs") return SyntheticKind::blobs;
  if (name == "synthetic-two-moons") return SyntheticKind::two_moons;
  throw ConfigError("unknown synthetic dataset '" + name + "'");
}

inline constexpr std::size_t kBasisCount = 6;

/// Basis patterns with peak value 1: centre bump, ring, corners, frame, cross, diagonals.
inline std::vector<std::vector<double>> basis_patterns(std::size_t size) {
  std::vector<std::vector<double>> b(kBasisCount, std::vector<double>(size * size, 0.0));
  const double c = (static_cast<double>(size) - 1.0) / 2.0;
  const double s = static_cast<double>(size);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double dy = static_cast<double>(y) - c, dx = static_cast<double>(x) - c;
      const double r = std::sqrt(dx * dx + dy * dy);
      const std::size_t i = y * size + x;
      b[0][i] = std::exp(-(r * r) / (2.0 * (s / 6.0) * (s / 6.0)));
      b[1][i] = std::exp(-((r - s / 3.0) * (r - s / 3.0)) / (2.0 * (s / 12.0) * (s / 12.0)));
      const double corner = std::min({std::hypot(dx + c, dy + c), std::hypot(dx - c, dy + c),
                                      std::hypot(dx + c, dy - c), std::hypot(dx - c, dy - c)});
      b[2][i] = std::exp(-(corner * corner) / (2.0 * (s / 8.0) * (s / 8.0)));
      const bool edge = y == 0 || x == 0 || y + 1 == size || x + 1 == size;
      b[3][i] = edge ? 1.0 : 0.0;
      b[4][i] = (std::abs(dx) < s / 8.0 || std::abs(dy) < s / 8.0) ? 1.0 : 0.0;
      b[5][i] = (std::abs(std::abs(dx) - std::abs(dy)) < 0.5) ? 1.0 : 0.0;
    }
  }
  return b;
}

/// Class prototypes in latent space; fixed, independent of the sampling seed, so
/// every seed sees the same task.
inline std::vector<std::vector<double>> blob_prototypes(std::size_t classes) {
  Rng rng(0x5EEDB10B5ULL);
  std::vector<std::vector<double>> mu(classes, std::vector<double>(kBasisCount));
  for (auto& m : mu) {
    for (auto& v : m) v = rng.uniform(0.0, 0.6);
  }
  return mu;
}

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::blobs;
  std::size_t train_size = 512;
  std::size_t test_size = 256;
  std::size_t classes = 4;
  double noise = 0.1;
  std::size_t image_size = 8;
  std::uint64_t seed = 0;
};

namespace detail {

inline augment::Dataset render_synthetic(const SyntheticSpec& spec, std::size_t n, Rng& rng) {
  const auto basis = basis_patterns(spec.image_size);
  const auto protos = blob_prototypes(spec.classes);
  const std::size_t pixels = spec.image_size * spec.image_size;

  augment::Dataset ds;
  ds.shape = {1, spec.image_size, spec.image_size};
  ds.classes = spec.classes;
  // Balanced within one: i mod classes, then a seeded shuffle of the order.
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % spec.classes);
  const auto order = rng.permutation(n);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) ds.labels[i] = labels[order[i]];
  ds.pixels.resize(n * pixels);

  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> latent(kBasisCount, 0.0);
    const int label = ds.labels[i];
    if (spec.kind == SyntheticKind::blobs) {
      for (std::size_t k = 0; k < kBasisCount; ++k) {
        latent[k] = protos[label][k] + spec.noise * rng.normal();
      }
    } else {
      // Half-moons: class 0 upper arc, class 1 lower arc shifted by (1, -0.5).
      const double t = rng.uniform(0.0, std::numbers::pi);
      double u = std::cos(t), v = std::sin(t);
      if (label == 1) {
        u = 1.0 - u;
        v = 0.5 - v;
      }
      u += spec.noise * rng.normal();
      v += spec.noise * rng.normal();
      latent[0] = 0.3 + 0.2 * u;
      latent[1] = 0.3 + 0.3 * v;
    }
    double* img = ds.pixels.data() + i * pixels;
    for (std::size_t p = 0; p < pixels; ++p) {
      double acc = 0.1;
      for (std::size_t k = 0; k < kBasisCount; ++k) acc += latent[k] * basis[k][p];
      img[p] = std::clamp(acc + 0.25 * spec.noise * rng.normal(), 0.0, 1.0);
    }
  }
  return ds;
}

}  // namespace detail

/// Train and test sets from independent streams derived from the seed.
inline augment::DataSplit make_synthetic(const SyntheticSpec& spec) {
  if (spec.classes < 2) throw ConfigError("synthetic data needs at least 2 classes");
  if (spec.kind == SyntheticKind::two_moons && spec.classes != 2) {
    throw ConfigError("synthetic-two-moons has exactly 2 classes");
  }
  if (spec.train_size < spec.classes) {
    throw ConfigError("synthetic data: n must be >= number of classes");
  }
  if (spec.image_size < 4) throw ConfigError("synthetic images must be at least 4x4");
  Rng train_rng(mix_seed(spec.seed, 1));
  Rng test_rng(mix_seed(spec.seed, 2));
  augment::DataSplit out;
  out.train = detail::render_synthetic(spec, spec.train_size, train_rng);
  out.test = detail::render_synthetic(spec, spec.test_size, test_rng);
  return out;
}

}  // namespace csa::cli

#endif  // CSA_CLI_SYNTHETIC_HPP
