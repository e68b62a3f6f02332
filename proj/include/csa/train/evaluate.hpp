#ifndef CSA_TRAIN_EVALUATE_HPP
#define CSA_TRAIN_EVALUATE_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csa/augment/corruption.hpp"
#include "csa/errors.hpp"
#include "csa/nn/tensor.hpp"
#include "csa/random.hpp"

namespace csa::train {

/// Row-wise argmax of [B, C] logits; ties resolve to the lowest class index.
inline std::vector<int> argmax_rows(const nn::Tensor& logits) {
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  std::vector<int> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < cols; ++c) {
      if (logits[r * cols + c] > logits[r * cols + best]) best = c;
    }
    out[r] = static_cast<int>(best);
  }
  return out;
}

/// Top-1 accuracy. `predict` maps an image tensor [B, C, H, W] to logits [B, K].
template <class Predict>
double evaluate_sa(Predict&& predict, std::span<const augment::ImageBatch> test) {
  std::size_t correct = 0, total = 0;
  nn::NoGradGuard no_grad;
  for (const auto& batch : test) {
    const auto pred = argmax_rows(predict(batch.images));
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == batch.labels[i];
    total += batch.size();
  }
  if (total == 0) throw ContractError("evaluate_sa: empty test set");
  return static_cast<double>(correct) / static_cast<double>(total);
}

struct CorruptionAccuracy {
  augment::CorruptionSpec spec;
  double accuracy = 0.0;
};

struct RobustAccuracy {
  double ra = 0.0;  // unweighted mean over all (kind, severity) cells
  std::vector<CorruptionAccuracy> cells;
};

/// Seed for one (kind, severity) cell; independent of evaluation order.
inline std::uint64_t corruption_cell_seed(std::uint64_t eval_seed, augment::CorruptionSpec spec) {
  return mix_seed(eval_seed, 1000 + 16 * static_cast<std::uint64_t>(spec.kind) +
                                 static_cast<std::uint64_t>(spec.severity));
}

template <class Predict>
RobustAccuracy evaluate_ra(Predict&& predict, std::span<const augment::ImageBatch> test,
                           std::span<const augment::CorruptionSpec> suite, std::uint64_t eval_seed,
                           const augment::CorruptionTable& table = augment::CorruptionTable::defaults()) {
  if (suite.empty()) throw ContractError("evaluate_ra: empty corruption suite");
  RobustAccuracy out;
  double sum = 0.0;
  for (const auto& spec : suite) {
    Rng rng(corruption_cell_seed(eval_seed, spec));
    std::vector<augment::ImageBatch> corrupted;
    corrupted.reserve(test.size());
    for (const auto& batch : test) corrupted.push_back(augment::corrupt(batch, spec, rng, table));
    const double acc = evaluate_sa(predict, std::span<const augment::ImageBatch>(corrupted));
    out.cells.push_back({spec, acc});
    sum += acc;
  }
  out.ra = sum / static_cast<double>(suite.size());
  return out;
}

}  // namespace csa::train

#endif  // CSA_TRAIN_EVALUATE_HPP
