#ifndef CSA_AUGMENT_MIXING_HPP
#define CSA_AUGMENT_MIXING_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "csa/augment/image.hpp"
#include "csa/errors.hpp"
#include "csa/random.hpp"

namespace csa::augment {

namespace detail {
inline void check_partner(std::span<const std::size_t> partner, std::size_t batch) {
  if (partner.size() != batch) throw DimensionError("partner permutation length mismatch");
  std::vector<bool> hit(batch, false);
  for (std::size_t j : partner) {
    if (j >= batch || hit[j]) throw ContractError("partner list is not a permutation");
    hit[j] = true;
  }
}

inline std::vector<int> permuted_labels(const ImageBatch& batch,
                                        std::span<const std::size_t> partner) {
  std::vector<int> out(batch.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = batch.labels[partner[i]];
  return out;
}
}  // namespace detail

/// mixed = lambda * x + (1 - lambda) * x[partner], with a caller-supplied ratio and partners.
inline MixedBatch mixup_with(const ImageBatch& batch, double lambda_m,
                             std::span<const std::size_t> partner) {
  if (batch.size() == 0) throw ContractError("mixup: empty batch");
  if (lambda_m < 0.0 || lambda_m > 1.0) throw ContractError("mixup: lambda outside [0, 1]");
  detail::check_partner(partner, batch.size());
  const std::size_t n = batch.shape().pixels();
  const auto x = batch.images.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const std::size_t j = partner[i];
    for (std::size_t k = 0; k < n; ++k) {
      out[i * n + k] = lambda_m * x[i * n + k] + (1.0 - lambda_m) * x[j * n + k];
    }
  }
  MixedBatch m;
  m.mixed_images = nn::Tensor::from(batch.images.shape(), std::move(out));
  m.labels_a = batch.labels;
  m.labels_b = detail::permuted_labels(batch, partner);
  m.lambda_m = lambda_m;
  m.partner.assign(partner.begin(), partner.end());
  return m;
}

/// lambda ~ Beta(alpha, alpha), partners from a uniform batch permutation.
inline MixedBatch mixup(const ImageBatch& batch, double alpha, Rng& rng) {
  if (!(alpha > 0.0)) throw ContractError("mixup: alpha must be > 0");
  if (batch.size() == 0) throw ContractError("mixup: empty batch");
  const double lambda_m = rng.beta(alpha, alpha);
  const auto partner = rng.permutation(batch.size());
  return mixup_with(batch, lambda_m, partner);
}

/// Half-open pixel rectangle [y0, y1) x [x0, x1).
struct Box {
  std::size_t y0 = 0, x0 = 0, y1 = 0, x1 = 0;

  std::size_t area() const { return (y1 - y0) * (x1 - x0); }
  bool contains(std::size_t y, std::size_t x) const {
    return y >= y0 && y < y1 && x >= x0 && x < x1;
  }
};

/// Box of side floor(extent * sqrt(1 - lambda)) centred on (cy, cx), clipped to the image.
inline Box bbox_at(double lambda_m, std::size_t height, std::size_t width, double cy, double cx) {
  if (lambda_m < 0.0 || lambda_m > 1.0) throw ContractError("rand_bbox: lambda outside [0, 1]");
  const double cut = std::sqrt(1.0 - lambda_m);
  const auto cut_h = static_cast<long>(std::floor(static_cast<double>(height) * cut));
  const auto cut_w = static_cast<long>(std::floor(static_cast<double>(width) * cut));
  const long top = static_cast<long>(std::floor(cy - static_cast<double>(cut_h) / 2.0));
  const long left = static_cast<long>(std::floor(cx - static_cast<double>(cut_w) / 2.0));
  auto clip = [](long v, std::size_t hi) {
    return static_cast<std::size_t>(std::clamp(v, 0L, static_cast<long>(hi)));
  };
  Box b;
  b.y0 = clip(top, height);
  b.y1 = clip(top + cut_h, height);
  b.x0 = clip(left, width);
  b.x1 = clip(left + cut_w, width);
  return b;
}

/// Samples the box centre so the uncut box lies inside the image; the realized
/// area ratio is then (1 - lambda) up to integer rounding of the side lengths.
inline Box rand_bbox(double lambda_m, std::size_t height, std::size_t width, Rng& rng) {
  if (lambda_m < 0.0 || lambda_m > 1.0) throw ContractError("rand_bbox: lambda outside [0, 1]");
  const double cut = std::sqrt(1.0 - lambda_m);
  const auto cut_h = static_cast<std::size_t>(std::floor(static_cast<double>(height) * cut));
  const auto cut_w = static_cast<std::size_t>(std::floor(static_cast<double>(width) * cut));
  Box b;
  b.y0 = rng.uniform_index(height - cut_h + 1);
  b.x0 = rng.uniform_index(width - cut_w + 1);
  b.y1 = b.y0 + cut_h;
  b.x1 = b.x0 + cut_w;
  return b;
}

/// Pastes partner pixels inside `box`; lambda is recomputed as 1 - area / (H * W).
inline MixedBatch cutmix_with(const ImageBatch& batch, const Box& box,
                              std::span<const std::size_t> partner) {
  if (batch.size() == 0) throw ContractError("cutmix: empty batch");
  detail::check_partner(partner, batch.size());
  const auto shape = batch.shape();
  if (box.y1 > shape.height || box.x1 > shape.width || box.y0 > box.y1 || box.x0 > box.x1) {
    throw ContractError("cutmix: box outside the image");
  }
  const std::size_t n = shape.pixels();
  const std::size_t plane = shape.height * shape.width;
  const auto x = batch.images.values();
  std::vector<double> out(x.begin(), x.end());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const std::size_t j = partner[i];
    for (std::size_t c = 0; c < shape.channels; ++c) {
      for (std::size_t y = box.y0; y < box.y1; ++y) {
        for (std::size_t xx = box.x0; xx < box.x1; ++xx) {
          const std::size_t off = c * plane + y * shape.width + xx;
          out[i * n + off] = x[j * n + off];
        }
      }
    }
  }
  MixedBatch m;
  m.mixed_images = nn::Tensor::from(batch.images.shape(), std::move(out));
  m.labels_a = batch.labels;
  m.labels_b = detail::permuted_labels(batch, partner);
  m.lambda_m = 1.0 - static_cast<double>(box.area()) / static_cast<double>(plane);
  m.partner.assign(partner.begin(), partner.end());
  return m;
}

inline MixedBatch cutmix(const ImageBatch& batch, double alpha, Rng& rng) {
  if (!(alpha > 0.0)) throw ContractError("cutmix: alpha must be > 0");
  if (batch.size() == 0) throw ContractError("cutmix: empty batch");
  const double lambda_m = rng.beta(alpha, alpha);
  const auto partner = rng.permutation(batch.size());
  const auto shape = batch.shape();
  const Box box = rand_bbox(lambda_m, shape.height, shape.width, rng);
  return cutmix_with(batch, box, partner);
}

}  // namespace csa::augment

#endif  // CSA_AUGMENT_MIXING_HPP
