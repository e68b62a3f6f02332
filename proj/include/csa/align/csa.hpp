#ifndef CSA_ALIGN_CSA_HPP
#define CSA_ALIGN_CSA_HPP

// Contrastive semantic alignment between clean and augmented embeddings.
//
// A FeaturePairing pairs clean row i with augmented row permutation[i]. Pairs
// whose labels agree feed the alignment term (pull together); pairs whose labels
// differ feed the margin term (push to distance >= m). Each term is averaged over
// its own pairs so the loss scale does not grow with the batch.

#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "csa/errors.hpp"
#include "csa/nn/ops.hpp"
#include "csa/random.hpp"

namespace csa::align {

namespace testing {
/// Mutation hook for the gradcheck negative control: flips the sign of the
/// separation-term gradient. Never set outside tests and `csa gradcheck --inject-fault`.
inline bool flip_separation_gradient = false;
}  // namespace testing

struct MarginConfig {
  double margin = 1.0;

  void validate() const {
    if (!(margin > 0.0)) throw ConfigError("margin must be > 0, got " + std::to_string(margin));
  }
};

struct FeaturePairing {
  nn::Tensor clean_features;  // [B, Z]: g(x_i)
  nn::Tensor aug_features;    // [B, Z]: g(x_j^aug)
  std::vector<int> labels_clean;
  std::vector<int> labels_aug;
  std::vector<std::size_t> permutation;  // clean row i meets augmented row permutation[i]

  /// Unshuffled pairing: row i against row i, same label on both sides.
  static FeaturePairing identity(nn::Tensor clean, nn::Tensor aug, std::span<const int> labels) {
    FeaturePairing p;
    p.clean_features = std::move(clean);
    p.aug_features = std::move(aug);
    p.labels_clean.assign(labels.begin(), labels.end());
    p.labels_aug = p.labels_clean;
    p.permutation.resize(p.labels_clean.size());
    std::iota(p.permutation.begin(), p.permutation.end(), std::size_t{0});
    p.validate();
    return p;
  }

  std::size_t batch() const { return labels_clean.size(); }
  std::size_t width() const { return clean_features.dim(1); }

  int paired_label(std::size_t i) const { return labels_aug[permutation[i]]; }
  bool same_label(std::size_t i) const { return labels_clean[i] == paired_label(i); }

  void validate() const {
    if (clean_features.rank() != 2 || aug_features.rank() != 2) {
      throw DimensionError("feature pairing expects [B, Z] features, got " +
                           nn::shape_string(clean_features.shape()) + " and " +
                           nn::shape_string(aug_features.shape()));
    }
    if (clean_features.dim(1) != aug_features.dim(1)) {
      throw DimensionError("embedding width mismatch: clean " +
                           std::to_string(clean_features.dim(1)) + " vs augmented " +
                           std::to_string(aug_features.dim(1)));
    }
    const std::size_t b = clean_features.dim(0);
    if (aug_features.dim(0) != b || labels_clean.size() != b || labels_aug.size() != b ||
        permutation.size() != b) {
      throw DimensionError("feature pairing: batch extents disagree");
    }
    std::vector<bool> hit(b, false);
    for (std::size_t j : permutation) {
      if (j >= b || hit[j]) throw ContractError("feature pairing: permutation is not a bijection");
      hit[j] = true;
    }
  }
};

namespace detail {

struct PairTerm {
  std::vector<std::size_t> rows;  // clean row indices contributing to the term
};

inline PairTerm select_pairs(const FeaturePairing& p, bool same) {
  PairTerm t;
  for (std::size_t i = 0; i < p.batch(); ++i) {
    if (p.same_label(i) == same) t.rows.push_back(i);
  }
  return t;
}

inline double squared_distance(const double* a, const double* b, std::size_t width) {
  double s = 0.0;
  for (std::size_t k = 0; k < width; ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

}  // namespace detail

/// Mean over same-label pairs of 1/2 ||g(x_i) - g(x_pi(i)^aug)||^2; zero without such pairs.
inline nn::Tensor semantic_alignment_loss(const FeaturePairing& pairing) {
  pairing.validate();
  const auto term = detail::select_pairs(pairing, true);
  const std::size_t width = pairing.width();
  const auto c = pairing.clean_features.values();
  const auto a = pairing.aug_features.values();
  double total = 0.0;
  for (std::size_t i : term.rows) {
    total += 0.5 * detail::squared_distance(&c[i * width], &a[pairing.permutation[i] * width], width);
  }
  const double count = static_cast<double>(term.rows.size());
  const double value = term.rows.empty() ? 0.0 : total / count;
  return nn::make_result(
      nn::Shape{}, {value}, "semantic_alignment_loss",
      {pairing.clean_features, pairing.aug_features},
      [rows = term.rows, perm = pairing.permutation, width, count](nn::detail::Node& n) {
        if (rows.empty()) return;
        auto& cn = *n.inputs[0];
        auto& an = *n.inputs[1];
        const double g = n.grad[0] / count;
        for (std::size_t i : rows) {
          const std::size_t j = perm[i];
          for (std::size_t k = 0; k < width; ++k) {
            const double d = cn.value[i * width + k] - an.value[j * width + k];
            if (cn.requires_grad) cn.grad[i * width + k] += g * d;
            if (an.requires_grad) an.grad[j * width + k] -= g * d;
          }
        }
      });
}

/// Mean over different-label pairs of 1/2 max(0, m - ||g(x_i) - g(x_pi(i)^aug)||)^2;
/// zero without such pairs. At distance 0 the hinge gradient is taken as 0.
inline nn::Tensor separation_loss(const FeaturePairing& pairing, MarginConfig cfg) {
  pairing.validate();
  cfg.validate();
  const auto term = detail::select_pairs(pairing, false);
  const std::size_t width = pairing.width();
  const auto c = pairing.clean_features.values();
  const auto a = pairing.aug_features.values();
  double total = 0.0;
  for (std::size_t i : term.rows) {
    const double r =
        std::sqrt(detail::squared_distance(&c[i * width], &a[pairing.permutation[i] * width], width));
    const double h = std::max(0.0, cfg.margin - r);
    total += 0.5 * h * h;
  }
  const double count = static_cast<double>(term.rows.size());
  const double value = term.rows.empty() ? 0.0 : total / count;
  const double sign = testing::flip_separation_gradient ? -1.0 : 1.0;
  return nn::make_result(
      nn::Shape{}, {value}, "separation_loss", {pairing.clean_features, pairing.aug_features},
      [rows = term.rows, perm = pairing.permutation, width, count, margin = cfg.margin,
       sign](nn::detail::Node& n) {
        if (rows.empty()) return;
        auto& cn = *n.inputs[0];
        auto& an = *n.inputs[1];
        const double g = sign * n.grad[0] / count;
        for (std::size_t i : rows) {
          const std::size_t j = perm[i];
          const double r = std::sqrt(
              detail::squared_distance(&cn.value[i * width], &an.value[j * width], width));
          const double h = margin - r;
          if (h <= 0.0 || r == 0.0) continue;
          // d/d(clean) of 1/2 (m - r)^2 = -(m - r) (c - a) / r
          const double coeff = -g * h / r;
          for (std::size_t k = 0; k < width; ++k) {
            const double d = cn.value[i * width + k] - an.value[j * width + k];
            if (cn.requires_grad) cn.grad[i * width + k] += coeff * d;
            if (an.requires_grad) an.grad[j * width + k] -= coeff * d;
          }
        }
      });
}

struct CsaTerms {
  nn::Tensor alignment;   // L_SA
  nn::Tensor separation;  // L_S
  nn::Tensor total;       // L_SA + L_S
};

/// Both terms plus their sum; every pair lands in exactly one term by label equality.
inline CsaTerms csa_terms(const FeaturePairing& pairing, MarginConfig cfg) {
  CsaTerms t;
  t.alignment = semantic_alignment_loss(pairing);
  t.separation = separation_loss(pairing, cfg);
  t.total = nn::add(t.alignment, t.separation);
  return t;
}

inline nn::Tensor csa_loss(const FeaturePairing& pairing, MarginConfig cfg) {
  return csa_terms(pairing, cfg).total;
}

/// Draws a uniform permutation for the augmented side. Features and labels of
/// the augmented side travel together because pairing goes through the index.
inline FeaturePairing feature_shuffle(FeaturePairing pairing, Rng& rng) {
  pairing.validate();
  for (std::size_t i = 0; i < pairing.permutation.size(); ++i) {
    if (pairing.permutation[i] != i) {
      throw ContractError("feature_shuffle: pairing is already shuffled");
    }
  }
  pairing.permutation = rng.permutation(pairing.batch());
  return pairing;
}

struct SupConResult {
  nn::Tensor loss;
  bool no_positives = false;  // every anchor lacked a same-label partner
};

/// Supervised contrastive loss on L2-normalized features. For each anchor i with
/// positives P(i) = {p != i : y_p = y_i}:
///   l_i = -1/|P(i)| sum_p log( exp(s_ip / t) / sum_{a != i} exp(s_ia / t) )
/// averaged over anchors that have at least one positive.
inline SupConResult supcon_loss(const nn::Tensor& features, std::span<const int> labels,
                                double temperature = 0.1) {
  if (features.rank() != 2) {
    throw DimensionError("supcon_loss: features must be [N, Z], got " +
                         nn::shape_string(features.shape()));
  }
  const std::size_t rows = features.dim(0), width = features.dim(1);
  if (labels.size() != rows) throw DimensionError("supcon_loss: label count mismatch");
  if (rows < 2) throw ContractError("supcon_loss: needs at least two samples");
  if (!(temperature > 0.0)) throw ContractError("supcon_loss: temperature must be > 0");

  std::vector<double> unit(rows * width);
  std::vector<double> norms(rows);
  const auto f = features.values();
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < width; ++k) s += f[i * width + k] * f[i * width + k];
    norms[i] = std::max(std::sqrt(s), 1e-12);
    for (std::size_t k = 0; k < width; ++k) unit[i * width + k] = f[i * width + k] / norms[i];
  }
  std::vector<double> sim(rows * rows);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < rows; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < width; ++k) s += unit[i * width + k] * unit[j * width + k];
      sim[i * rows + j] = s / temperature;
    }
  }

  // dL/dsim, filled while computing the value.
  std::vector<double> dsim(rows * rows, 0.0);
  std::vector<std::size_t> anchors;
  std::vector<double> per_anchor;
  for (std::size_t i = 0; i < rows; ++i) {
    std::size_t positives = 0;
    for (std::size_t j = 0; j < rows; ++j) positives += (j != i && labels[j] == labels[i]);
    if (positives == 0) continue;
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < rows; ++j) {
      if (j != i) peak = std::max(peak, sim[i * rows + j]);
    }
    double denom = 0.0;
    for (std::size_t j = 0; j < rows; ++j) {
      if (j != i) denom += std::exp(sim[i * rows + j] - peak);
    }
    const double log_denom = peak + std::log(denom);
    double li = 0.0;
    for (std::size_t j = 0; j < rows; ++j) {
      if (j != i && labels[j] == labels[i]) li -= sim[i * rows + j] - log_denom;
    }
    li /= static_cast<double>(positives);
    per_anchor.push_back(li);
    anchors.push_back(i);
    for (std::size_t j = 0; j < rows; ++j) {
      if (j == i) continue;
      const double softmax = std::exp(sim[i * rows + j] - log_denom);
      const double positive = labels[j] == labels[i] ? 1.0 / static_cast<double>(positives) : 0.0;
      dsim[i * rows + j] = softmax - positive;
    }
  }

  SupConResult result;
  if (anchors.empty()) {
    result.no_positives = true;
    result.loss = nn::make_result(nn::Shape{}, {0.0}, "supcon_loss", {features},
                                  [](nn::detail::Node&) {});
    return result;
  }
  double total = 0.0;
  for (double v : per_anchor) total += v;
  const double count = static_cast<double>(anchors.size());
  for (double& d : dsim) d /= count;

  result.loss = nn::make_result(
      nn::Shape{}, {total / count}, "supcon_loss", {features},
      [rows, width, temperature, unit = std::move(unit), norms = std::move(norms),
       dsim = std::move(dsim)](nn::detail::Node& n) {
        auto& fn = *n.inputs[0];
        if (!fn.requires_grad) return;
        const double g = n.grad[0];
        // Through sim_ij = u_i . u_j / t.
        std::vector<double> du(rows * width, 0.0);
        for (std::size_t i = 0; i < rows; ++i) {
          for (std::size_t j = 0; j < rows; ++j) {
            const double w = g * dsim[i * rows + j] / temperature;
            if (w == 0.0) continue;
            for (std::size_t k = 0; k < width; ++k) {
              du[i * width + k] += w * unit[j * width + k];
              du[j * width + k] += w * unit[i * width + k];
            }
          }
        }
        // Through u = f / ||f||.
        for (std::size_t i = 0; i < rows; ++i) {
          double dot = 0.0;
          for (std::size_t k = 0; k < width; ++k) dot += unit[i * width + k] * du[i * width + k];
          for (std::size_t k = 0; k < width; ++k) {
            fn.grad[i * width + k] += (du[i * width + k] - unit[i * width + k] * dot) / norms[i];
          }
        }
      });
  return result;
}

struct PairwiseStats {
  double same_label_mean = std::numeric_limits<double>::quiet_NaN();
  double different_label_mean = std::numeric_limits<double>::quiet_NaN();
  std::size_t same_label_pairs = 0;
  std::size_t different_label_pairs = 0;
};

/// Mean Euclidean clean-vs-augmented distance over all B^2 cross pairs, split by
/// label agreement. Independent of the pairing's permutation. An empty class of
/// pairs reports NaN.
inline PairwiseStats pairwise_feature_stats(const FeaturePairing& pairing) {
  pairing.validate();
  const std::size_t b = pairing.batch(), width = pairing.width();
  const auto c = pairing.clean_features.values();
  const auto a = pairing.aug_features.values();
  double same = 0.0, diff = 0.0;
  PairwiseStats s;
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      const double r = std::sqrt(detail::squared_distance(&c[i * width], &a[j * width], width));
      if (pairing.labels_clean[i] == pairing.labels_aug[j]) {
        same += r;
        ++s.same_label_pairs;
      } else {
        diff += r;
        ++s.different_label_pairs;
      }
    }
  }
  if (s.same_label_pairs) s.same_label_mean = same / static_cast<double>(s.same_label_pairs);
  if (s.different_label_pairs) {
    s.different_label_mean = diff / static_cast<double>(s.different_label_pairs);
  }
  return s;
}

}  // namespace csa::align

#endif  // CSA_ALIGN_CSA_HPP
