#ifndef CSA_AUGMENT_AUGMIX_HPP
#define CSA_AUGMENT_AUGMIX_HPP

// AugMix-style views: a Beta-weighted blend of the clean image with a
// Dirichlet-weighted sum of `width` random operation chains.
//
// Primitive magnitudes live in [0, 1]. Signed primitives (translations,
// brightness, contrast) are neutral at 0.5 and reach their extremes at 0 and 1.

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "csa/augment/image.hpp"
#include "csa/errors.hpp"
#include "csa/random.hpp"

namespace csa::augment {

enum class Primitive {
  identity,
  translate_x,
  translate_y,
  flip_horizontal,
  rotate90,
  posterize,
  contrast,
  brightness,
};

inline constexpr std::array<std::pair<Primitive, std::string_view>, 8> kPrimitiveNames{{
    {Primitive::identity, "identity"},
    {Primitive::translate_x, "translate-x"},
    {Primitive::translate_y, "translate-y"},
    {Primitive::flip_horizontal, "flip-horizontal"},
    {Primitive::rotate90, "rotate90"},
    {Primitive::posterize, "posterize-quantize"},
    {Primitive::contrast, "contrast-scale"},
    {Primitive::brightness, "brightness-shift"},
}};

inline std::string_view primitive_name(Primitive p) {
  for (const auto& [k, name] : kPrimitiveNames) {
    if (k == p) return name;
  }
  return "?";
}

inline Primitive parse_primitive(std::string_view name) {
  for (const auto& [k, n] : kPrimitiveNames) {
    if (n == name) return k;
  }
  throw ConfigError("unknown augmentation primitive '" + std::string(name) + "'");
}

/// Signed pixel shift for translate primitives: round((2m - 1) * extent / 4).
inline long translate_shift(double magnitude, std::size_t extent) {
  return std::lround((2.0 * magnitude - 1.0) * static_cast<double>(extent) / 4.0);
}

/// Quantization level count for posterize: 8 at magnitude 0 down to 2 at magnitude 1.
inline std::size_t posterize_levels(double magnitude) {
  return static_cast<std::size_t>(8 - std::lround(6.0 * magnitude));
}

/// Applies one primitive to a single [C, H, W] image. Output stays in [0, 1].
inline std::vector<double> primitive_transform(std::span<const double> image, ImageShape shape,
                                               Primitive kind, double magnitude) {
  if (image.size() != shape.pixels()) throw DimensionError("primitive_transform: size mismatch");
  if (magnitude < 0.0 || magnitude > 1.0) {
    throw ConfigError("primitive magnitude must lie in [0, 1]");
  }
  const std::size_t h = shape.height, w = shape.width, plane = h * w;
  std::vector<double> out(image.size(), 0.0);
  switch (kind) {
    case Primitive::identity:
      out.assign(image.begin(), image.end());
      break;
    case Primitive::translate_x:
    case Primitive::translate_y: {
      const bool along_x = kind == Primitive::translate_x;
      const long shift = translate_shift(magnitude, along_x ? w : h);
      for (std::size_t c = 0; c < shape.channels; ++c) {
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            const long sy = static_cast<long>(y) - (along_x ? 0 : shift);
            const long sx = static_cast<long>(x) - (along_x ? shift : 0);
            if (sy < 0 || sx < 0 || sy >= static_cast<long>(h) || sx >= static_cast<long>(w)) {
              continue;  // vacated pixels are zero
            }
            out[c * plane + y * w + x] = image[c * plane + sy * w + sx];
          }
        }
      }
      break;
    }
    case Primitive::flip_horizontal:
      for (std::size_t c = 0; c < shape.channels; ++c) {
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            out[c * plane + y * w + x] = image[c * plane + y * w + (w - 1 - x)];
          }
        }
      }
      break;
    case Primitive::rotate90:
      // Counter-clockwise quarter turn.
      if (h != w) throw ConfigError("rotate90 requires square images");
      for (std::size_t c = 0; c < shape.channels; ++c) {
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            out[c * plane + y * w + x] = image[c * plane + x * w + (w - 1 - y)];
          }
        }
      }
      break;
    case Primitive::posterize: {
      const double steps = static_cast<double>(posterize_levels(magnitude) - 1);
      for (std::size_t i = 0; i < image.size(); ++i) {
        out[i] = std::round(clamp01(image[i]) * steps) / steps;
      }
      break;
    }
    case Primitive::contrast: {
      const double factor = 0.4 + 1.2 * magnitude;
      for (std::size_t c = 0; c < shape.channels; ++c) {
        double mean = 0.0;
        for (std::size_t i = 0; i < plane; ++i) mean += image[c * plane + i];
        mean /= static_cast<double>(plane);
        for (std::size_t i = 0; i < plane; ++i) {
          out[c * plane + i] = clamp01(mean + (image[c * plane + i] - mean) * factor);
        }
      }
      break;
    }
    case Primitive::brightness: {
      const double shift = 0.3 * (2.0 * magnitude - 1.0);
      for (std::size_t i = 0; i < image.size(); ++i) out[i] = clamp01(image[i] + shift);
      break;
    }
  }
  return out;
}

struct AugChainSpec {
  std::vector<Primitive> pool{Primitive::translate_x, Primitive::translate_y,
                              Primitive::flip_horizontal, Primitive::rotate90,
                              Primitive::posterize, Primitive::contrast, Primitive::brightness};
  std::size_t width = 3;
  std::size_t max_depth = 3;
  double dirichlet_alpha = 1.0;
  double beta_alpha = 1.0;

  void validate() const {
    if (pool.empty()) throw ConfigError("augmix: empty operation pool");
    if (width < 1) throw ConfigError("augmix: chain width must be >= 1");
    if (max_depth < 1) throw ConfigError("augmix: max chain depth must be >= 1");
    if (!(dirichlet_alpha > 0.0) || !(beta_alpha > 0.0)) {
      throw ConfigError("augmix: concentrations must be > 0");
    }
  }
};

struct ChainOp {
  Primitive kind = Primitive::identity;
  double magnitude = 0.5;
};

/// All randomness behind one augmented image, so views can be replayed or forced.
struct AugMixDraw {
  std::vector<double> chain_weights;       // Dirichlet sample, one per chain
  double clean_weight = 0.0;               // weight of the untouched image in the final blend
  std::vector<std::vector<ChainOp>> chains;
};

inline AugMixDraw sample_augmix_draw(const AugChainSpec& spec, Rng& rng) {
  spec.validate();
  AugMixDraw d;
  d.chain_weights = rng.dirichlet(spec.dirichlet_alpha, spec.width);
  d.clean_weight = 1.0 - rng.beta(spec.beta_alpha, spec.beta_alpha);
  d.chains.resize(spec.width);
  for (auto& chain : d.chains) {
    const std::size_t depth = 1 + rng.uniform_index(spec.max_depth);
    for (std::size_t k = 0; k < depth; ++k) {
      const Primitive kind = spec.pool[rng.uniform_index(spec.pool.size())];
      chain.push_back({kind, rng.uniform()});
    }
  }
  return d;
}

/// clean_weight * x + (1 - clean_weight) * sum_i w_i * chain_i(x), clipped to [0, 1].
/// Evaluated as x + (1 - clean_weight) * sum_i w_i * (chain_i(x) - x), which equals the
/// blend for normalized weights and returns x bit-for-bit when every chain is a no-op.
inline std::vector<double> augmix_image(std::span<const double> image, ImageShape shape,
                                        const AugMixDraw& draw) {
  if (draw.chain_weights.size() != draw.chains.size()) {
    throw ContractError("augmix: chain weight count does not match chain count");
  }
  std::vector<double> delta(image.size(), 0.0);
  for (std::size_t c = 0; c < draw.chains.size(); ++c) {
    std::vector<double> x(image.begin(), image.end());
    for (const auto& op : draw.chains[c]) x = primitive_transform(x, shape, op.kind, op.magnitude);
    for (std::size_t i = 0; i < x.size(); ++i) delta[i] += draw.chain_weights[c] * (x[i] - image[i]);
  }
  std::vector<double> out(image.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = clamp01(image[i] + (1.0 - draw.clean_weight) * delta[i]);
  }
  return out;
}

/// One augmented copy of every image in the batch, fresh draw per image.
inline nn::Tensor augmix_batch(const ImageBatch& batch, const AugChainSpec& spec, Rng& rng) {
  spec.validate();
  const auto shape = batch.shape();
  std::vector<double> out;
  out.reserve(batch.images.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto draw = sample_augmix_draw(spec, rng);
    const auto view = augmix_image(batch.image(i), shape, draw);
    out.insert(out.end(), view.begin(), view.end());
  }
  return batch_tensor(batch.size(), shape, std::move(out));
}

/// Two independent views per image (aug1 drawn before aug2 from the same stream).
inline ConsistencyBatch augmix_views(const ImageBatch& batch, const AugChainSpec& spec, Rng& rng) {
  spec.validate();
  ConsistencyBatch out;
  out.clean = batch;
  out.aug1 = augmix_batch(batch, spec, rng);
  out.aug2 = augmix_batch(batch, spec, rng);
  return out;
}

}  // namespace csa::augment

#endif  // CSA_AUGMENT_AUGMIX_HPP
