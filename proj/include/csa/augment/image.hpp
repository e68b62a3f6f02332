#ifndef CSA_AUGMENT_IMAGE_HPP
#define CSA_AUGMENT_IMAGE_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "csa/errors.hpp"
#include "csa/nn/tensor.hpp"

namespace csa::augment {

struct ImageShape {
  std::size_t channels = 1;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t pixels() const { return channels * height * width; }
  bool operator==(const ImageShape&) const = default;
};

/// images: [B, C, H, W] with values in [0, 1]; one label per image.
struct ImageBatch {
  nn::Tensor images;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  ImageShape shape() const { return {images.dim(1), images.dim(2), images.dim(3)}; }

  std::span<const double> image(std::size_t i) const {
    const std::size_t n = shape().pixels();
    return images.values().subspan(i * n, n);
  }

  void validate() const {
    if (images.rank() != 4) {
      throw DimensionError("image batch must be [B, C, H, W], got " +
                           nn::shape_string(images.shape()));
    }
    if (images.dim(0) != labels.size()) {
      throw DimensionError("image batch has " + std::to_string(images.dim(0)) + " images but " +
                           std::to_string(labels.size()) + " labels");
    }
    for (double v : images.values()) {
      if (!std::isfinite(v)) throw ContractError("image batch contains a non-finite pixel");
    }
  }
};

/// Mixed inputs for the dual-label objective: lambda_m weights labels_a.
struct MixedBatch {
  nn::Tensor mixed_images;
  std::vector<int> labels_a;  // original labels
  std::vector<int> labels_b;  // labels of the permuted partners
  double lambda_m = 1.0;
  std::vector<std::size_t> partner;  // image i was mixed with image partner[i]
};

/// Clean batch plus two independently augmented views of the same images.
struct ConsistencyBatch {
  ImageBatch clean;
  nn::Tensor aug1;
  nn::Tensor aug2;
};

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

inline nn::Tensor batch_tensor(std::size_t count, ImageShape shape, std::vector<double> pixels) {
  return nn::Tensor::from({count, shape.channels, shape.height, shape.width}, std::move(pixels));
}

}  // namespace csa::augment

#endif  // CSA_AUGMENT_IMAGE_HPP
