#ifndef CSA_AUGMENT_DATASET_HPP
#define CSA_AUGMENT_DATASET_HPP

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "csa/augment/image.hpp"
#include "csa/errors.hpp"

namespace csa::augment {

/// Contiguous image collection; batches are gathered on demand.
struct Dataset {
  ImageShape shape;
  std::size_t classes = 0;
  std::vector<double> pixels;  // size() * shape.pixels()
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }

  std::span<const double> image(std::size_t i) const {
    return std::span<const double>(pixels).subspan(i * shape.pixels(), shape.pixels());
  }

  ImageBatch gather(std::span<const std::size_t> indices) const {
    std::vector<double> out;
    out.reserve(indices.size() * shape.pixels());
    std::vector<int> lab;
    lab.reserve(indices.size());
    for (std::size_t i : indices) {
      if (i >= size()) throw ContractError("dataset index out of range");
      const auto img = image(i);
      out.insert(out.end(), img.begin(), img.end());
      lab.push_back(labels[i]);
    }
    return {batch_tensor(indices.size(), shape, std::move(out)), std::move(lab)};
  }

  /// Consecutive batches in storage order; the last one may be short.
  std::vector<ImageBatch> chunks(std::size_t batch_size) const {
    if (batch_size == 0) throw ContractError("chunk size must be >= 1");
    std::vector<ImageBatch> out;
    for (std::size_t start = 0; start < size(); start += batch_size) {
      std::vector<std::size_t> idx;
      for (std::size_t i = start; i < std::min(size(), start + batch_size); ++i) idx.push_back(i);
      out.push_back(gather(idx));
    }
    return out;
  }
};

struct DataSplit {
  Dataset train;
  Dataset test;
};

}  // namespace csa::augment

#endif  // CSA_AUGMENT_DATASET_HPP
