#ifndef CSA_TRAIN_OBJECTIVES_HPP
#define CSA_TRAIN_OBJECTIVES_HPP

// Training objectives.
//
//   mixing (MixUp / CutMix):
//     L_aug   = lambda * CE(f(x_aug), y_a) + (1 - lambda) * CE(f(x_aug), y_b)
//     L_total = (1 - gamma) * L_aug + gamma * L_CSA(g(x), g(x_aug); labels y_a)
//
//   consistency (AugMix):
//     L_aug   = CE(f(x), y) + lambda_l * JSD(p(x), p(x_aug1), p(x_aug2))
//     L_total = (1 - gamma) * L_aug + gamma / 2 * (L_CSA^aug1 + L_CSA^aug2)
//
// With alignment disabled the total is L_aug itself, not (1 - gamma) * L_aug.
// f(x) = h(g(x)): g is the feature extractor, h the classifier head.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "csa/align/csa.hpp"
#include "csa/augment/image.hpp"
#include "csa/errors.hpp"
#include "csa/nn/module.hpp"
#include "csa/nn/ops.hpp"
#include "csa/random.hpp"

namespace csa::train {

/// f = h o g, stored as the two halves so the objectives can reach g's output.
struct ModelSplit {
  nn::Sequential extractor;   // g: input -> embedding
  nn::Sequential classifier;  // h: embedding -> logits

  nn::Tensor features(const nn::Tensor& x) const { return extractor.forward(x); }
  nn::Tensor logits(const nn::Tensor& x) const { return classifier.forward(features(x)); }
  nn::Tensor operator()(const nn::Tensor& x) const { return logits(x); }

  std::vector<nn::NamedParameter> parameters() const {
    auto out = extractor.parameters("extractor");
    auto head = classifier.parameters("classifier");
    out.insert(out.end(), head.begin(), head.end());
    return out;
  }
};

enum class ObjectiveMode { normal, mixing, consistency };

/// Which feature-alignment term rides along with the task loss.
enum class Alignment {
  none,     // plain augmentation baseline
  csa,      // CSA with feature shuffling
  sa_only,  // alignment term only, no shuffling (ablation)
  supcon,   // supervised contrastive loss on g's output (baseline)
};

inline std::string alignment_name(Alignment a) {
  switch (a) {
    case Alignment::none: return "none";
    case Alignment::csa: return "csa";
    case Alignment::sa_only: return "sa-only";
    case Alignment::supcon: return "supcon";
  }
  return "?";
}

inline Alignment parse_alignment(const std::string& s) {
  if (s == "none") return Alignment::none;
  if (s == "csa") return Alignment::csa;
  if (s == "sa-only") return Alignment::sa_only;
  if (s == "supcon") return Alignment::supcon;
  throw ConfigError("unknown alignment variant '" + s + "' (expected csa|sa-only|supcon|none)");
}

inline std::string mode_name(ObjectiveMode m) {
  switch (m) {
    case ObjectiveMode::normal: return "normal";
    case ObjectiveMode::mixing: return "mixing";
    case ObjectiveMode::consistency: return "consistency";
  }
  return "?";
}

struct ObjectiveConfig {
  ObjectiveMode mode = ObjectiveMode::consistency;
  double gamma = 0.25;
  double lambda_l = 12.0;
  align::MarginConfig margin{};
  Alignment alignment = Alignment::csa;
  double supcon_temperature = 0.1;

  void validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
    if (!(lambda_l >= 0.0)) throw ConfigError("lambda_l must be >= 0");
    margin.validate();
    if (!(supcon_temperature > 0.0)) throw ConfigError("supcon temperature must be > 0");
    if (mode == ObjectiveMode::normal && alignment != Alignment::none) {
      throw ConfigError("normal mode has no augmented view; alignment must be 'none'");
    }
  }
};

/// Scalar values of every term, for logging and recombination checks.
/// Alignment values are averaged over views in consistency mode.
struct LossComponents {
  double task = 0.0;        // CE or the dual-label mixing CE
  double jsd = 0.0;
  double alignment = 0.0;   // L_SA
  double separation = 0.0;  // L_S
  double align_term = 0.0;  // whatever alignment loss entered the total (CSA, SA, SupCon)
  double total = 0.0;
  bool supcon_no_positives = false;
};

struct ObjectiveResult {
  nn::Tensor total;
  LossComponents parts;
};

/// lambda * CE(logits, y_a) + (1 - lambda) * CE(logits, y_b)
inline nn::Tensor dual_label_cross_entropy(const nn::Tensor& logits, std::span<const int> labels_a,
                                           std::span<const int> labels_b, double lambda_m) {
  return nn::add(nn::scale(nn::softmax_cross_entropy(logits, labels_a), lambda_m),
                 nn::scale(nn::softmax_cross_entropy(logits, labels_b), 1.0 - lambda_m));
}

inline nn::Tensor mixing_task_loss(const ModelSplit& model, const augment::MixedBatch& mixed) {
  return dual_label_cross_entropy(model.logits(mixed.mixed_images), mixed.labels_a,
                                  mixed.labels_b, mixed.lambda_m);
}

inline constexpr double kJsdProbabilityFloor = 1e-12;

/// Mean over the batch of (KL(p0 || M) + KL(p1 || M) + KL(p2 || M)) / 3 with
/// M = (p0 + p1 + p2) / 3; probabilities are floored at 1e-12 inside the logs.
inline nn::Tensor jsd_consistency(const nn::Tensor& p_clean, const nn::Tensor& p_aug1,
                                  const nn::Tensor& p_aug2) {
  constexpr double kFloor = kJsdProbabilityFloor;
  for (const auto* p : {&p_clean, &p_aug1, &p_aug2}) {
    if (p->rank() != 2 || p->shape() != p_clean.shape()) {
      throw DimensionError("jsd_consistency: expected three [B, C] probability tensors");
    }
  }
  const std::size_t rows = p_clean.dim(0), cols = p_clean.dim(1);
  if (rows == 0) throw ContractError("jsd_consistency: empty batch");
  for (const auto* p : {&p_clean, &p_aug1, &p_aug2}) {
    for (std::size_t r = 0; r < rows; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < cols; ++c) s += (*p)[r * cols + c];
      if (std::abs(s - 1.0) > 1e-5) {
        throw ContractError("jsd_consistency: row " + std::to_string(r) +
                            " is not a probability distribution (sums to " + std::to_string(s) +
                            ")");
      }
    }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < rows * cols; ++i) {
    const double m = (p_clean[i] + p_aug1[i] + p_aug2[i]) / 3.0;
    const double log_m = std::log(std::max(m, kFloor));
    for (const auto* p : {&p_clean, &p_aug1, &p_aug2}) {
      const double v = (*p)[i];
      total += v * (std::log(std::max(v, kFloor)) - log_m);
    }
  }
  const double value = total / 3.0 / static_cast<double>(rows);
  return nn::make_result(
      nn::Shape{}, {value}, "jsd_consistency", {p_clean, p_aug1, p_aug2},
      [rows, cols](nn::detail::Node& n) {
        constexpr double kFloor = kJsdProbabilityFloor;
        const double g = n.grad[0] / 3.0 / static_cast<double>(rows);
        auto& a = *n.inputs[0];
        auto& b = *n.inputs[1];
        auto& c = *n.inputs[2];
        for (std::size_t i = 0; i < rows * cols; ++i) {
          const double m = (a.value[i] + b.value[i] + c.value[i]) / 3.0;
          const double log_m = std::log(std::max(m, kFloor));
          const double m_active = m > kFloor ? 1.0 : 0.0;
          for (auto* p : {&a, &b, &c}) {
            if (!p->requires_grad) continue;
            const double v = p->value[i];
            const double d = std::log(std::max(v, kFloor)) + (v > kFloor ? 1.0 : 0.0) - log_m -
                             m_active;
            p->grad[i] += g * d;
          }
        }
      });
}

namespace detail {

struct AlignmentValue {
  nn::Tensor value;
  double alignment = 0.0;
  double separation = 0.0;
  bool supcon_no_positives = false;
};

/// One clean-vs-augmented alignment term under the configured variant.
inline AlignmentValue alignment_term(const nn::Tensor& clean_features,
                                     const nn::Tensor& aug_features, std::span<const int> labels,
                                     const ObjectiveConfig& cfg, Rng& shuffle_rng) {
  AlignmentValue out;
  switch (cfg.alignment) {
    case Alignment::csa:
    case Alignment::sa_only: {
      auto pairing = align::FeaturePairing::identity(clean_features, aug_features, labels);
      if (cfg.alignment == Alignment::csa) pairing = align::feature_shuffle(std::move(pairing), shuffle_rng);
      const auto terms = align::csa_terms(pairing, cfg.margin);
      out.value = terms.total;
      out.alignment = terms.alignment.item();
      out.separation = terms.separation.item();
      break;
    }
    case Alignment::supcon: {
      std::vector<int> both(labels.begin(), labels.end());
      both.insert(both.end(), labels.begin(), labels.end());
      auto r = align::supcon_loss(nn::concat_rows(clean_features, aug_features), both,
                                  cfg.supcon_temperature);
      out.value = r.loss;
      out.supcon_no_positives = r.no_positives;
      break;
    }
    case Alignment::none:
      throw ContractError("alignment_term called with alignment disabled");
  }
  return out;
}

}  // namespace detail

/// Plain cross-entropy on clean data (the no-augmentation baseline).
inline ObjectiveResult normal_loss(const ModelSplit& model, const augment::ImageBatch& batch) {
  ObjectiveResult r;
  r.total = nn::softmax_cross_entropy(model.logits(batch.images), batch.labels);
  r.parts.task = r.parts.total = r.total.item();
  return r;
}

/// Mixing objective. The augmented features come from the same forward pass
/// that produces the classification logits. CSA pairs use y_a on both sides.
inline ObjectiveResult mixing_total_loss(const ModelSplit& model, const augment::MixedBatch& mixed,
                                         const augment::ImageBatch& clean,
                                         const ObjectiveConfig& cfg, Rng& shuffle_rng) {
  cfg.validate();
  if (cfg.mode != ObjectiveMode::mixing) throw ContractError("mixing_total_loss: mode is not mixing");
  const nn::Tensor aug_features = model.features(mixed.mixed_images);
  const nn::Tensor logits = model.classifier.forward(aug_features);
  const nn::Tensor task =
      dual_label_cross_entropy(logits, mixed.labels_a, mixed.labels_b, mixed.lambda_m);

  ObjectiveResult r;
  r.parts.task = task.item();
  if (cfg.alignment == Alignment::none) {
    r.total = task;
    r.parts.total = r.total.item();
    return r;
  }
  const nn::Tensor clean_features = model.features(clean.images);
  auto term = detail::alignment_term(clean_features, aug_features, mixed.labels_a, cfg, shuffle_rng);
  r.total = nn::add(nn::scale(task, 1.0 - cfg.gamma), nn::scale(term.value, cfg.gamma));
  r.parts.alignment = term.alignment;
  r.parts.separation = term.separation;
  r.parts.align_term = term.value.item();
  r.parts.supcon_no_positives = term.supcon_no_positives;
  r.parts.total = r.total.item();
  return r;
}

/// Consistency objective. One clean forward feeds CE, JSD, and both CSA pairings;
/// each pairing is shuffled with its own permutation.
inline ObjectiveResult consistency_total_loss(const ModelSplit& model,
                                              const augment::ConsistencyBatch& batch,
                                              const ObjectiveConfig& cfg, Rng& shuffle_rng) {
  cfg.validate();
  if (cfg.mode != ObjectiveMode::consistency) {
    throw ContractError("consistency_total_loss: mode is not consistency");
  }
  const auto& labels = batch.clean.labels;
  const nn::Tensor f0 = model.features(batch.clean.images);
  const nn::Tensor f1 = model.features(batch.aug1);
  const nn::Tensor f2 = model.features(batch.aug2);
  const nn::Tensor z0 = model.classifier.forward(f0);
  const nn::Tensor z1 = model.classifier.forward(f1);
  const nn::Tensor z2 = model.classifier.forward(f2);

  const nn::Tensor ce = nn::softmax_cross_entropy(z0, labels);
  const nn::Tensor jsd = jsd_consistency(nn::softmax(z0), nn::softmax(z1), nn::softmax(z2));
  const nn::Tensor task = nn::add(ce, nn::scale(jsd, cfg.lambda_l));

  ObjectiveResult r;
  r.parts.task = ce.item();
  r.parts.jsd = jsd.item();
  if (cfg.alignment == Alignment::none) {
    r.total = task;
    r.parts.total = r.total.item();
    return r;
  }
  auto a1 = detail::alignment_term(f0, f1, labels, cfg, shuffle_rng);
  auto a2 = detail::alignment_term(f0, f2, labels, cfg, shuffle_rng);
  r.total = nn::add(nn::scale(task, 1.0 - cfg.gamma),
                    nn::scale(nn::add(a1.value, a2.value), 0.5 * cfg.gamma));
  r.parts.alignment = 0.5 * (a1.alignment + a2.alignment);
  r.parts.separation = 0.5 * (a1.separation + a2.separation);
  r.parts.align_term = 0.5 * (a1.value.item() + a2.value.item());
  r.parts.supcon_no_positives = a1.supcon_no_positives && a2.supcon_no_positives;
  r.parts.total = r.total.item();
  return r;
}

/// Rebuilds the total from the scalar components (used to check additivity).
inline double recombine(const LossComponents& p, const ObjectiveConfig& cfg) {
  const double task = cfg.mode == ObjectiveMode::consistency ? p.task + cfg.lambda_l * p.jsd : p.task;
  if (cfg.alignment == Alignment::none || cfg.mode == ObjectiveMode::normal) return task;
  return (1.0 - cfg.gamma) * task + cfg.gamma * p.align_term;
}

}  // namespace csa::train

#endif  // CSA_TRAIN_OBJECTIVES_HPP
