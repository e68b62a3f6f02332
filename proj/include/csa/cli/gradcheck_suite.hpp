#ifndef CSA_CLI_GRADCHECK_SUITE_HPP
#define CSA_CLI_GRADCHECK_SUITE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "csa/align/csa.hpp"
#include "csa/augment/augmix.hpp"
#include "csa/augment/mixing.hpp"
#include "csa/nn/gradcheck.hpp"
#include "csa/random.hpp"
#include "csa/train/objectives.hpp"

namespace csa::cli {

struct GradcheckOutcome {
  std::string name;
  std::size_t instances = 0;
  std::size_t failures = 0;
  double worst_error = 0.0;
  std::string note;

  bool passed() const { return failures == 0; }
};

struct GradcheckSuiteReport {
  std::vector<GradcheckOutcome> checks;
  double step = 1e-5;
  double tolerance = 1e-4;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed(); });
  }
};

struct GradcheckOptions {
  std::size_t instances = 50;
  double step = 1e-5;
  double tolerance = 1e-4;
  std::uint64_t seed = 7;
};

namespace detail {

using nn::NamedParameter;
using nn::Tensor;

inline Tensor random_leaf(nn::Shape shape, Rng& rng, double scale = 1.0) {
  std::vector<double> v(nn::shape_size(shape));
  for (auto& x : v) x = scale * rng.normal();
  return Tensor::from(std::move(shape), std::move(v), true);
}

// Values bounded away from 0 so the ReLU kink never falls inside the stencil.
inline Tensor kink_free_leaf(nn::Shape shape, Rng& rng) {
  std::vector<double> v(nn::shape_size(shape));
  for (auto& x : v) {
    const double mag = rng.uniform(0.05, 2.0);
    x = rng.uniform() < 0.5 ? -mag : mag;
  }
  return Tensor::from(std::move(shape), std::move(v), true);
}

inline std::vector<int> random_labels(std::size_t n, int classes, Rng& rng) {
  std::vector<int> out(n);
  for (auto& y : out) y = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(classes)));
  return out;
}

struct Instance {
  std::vector<NamedParameter> params;
  std::function<Tensor()> loss;
};

using Builder = std::function<Instance(Rng&, std::size_t index)>;

inline std::vector<double> pair_distances(const align::FeaturePairing& p) {
  std::vector<double> out;
  const auto c = p.clean_features.values();
  const auto a = p.aug_features.values();
  const std::size_t w = p.width();
  for (std::size_t i = 0; i < p.batch(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < w; ++k) {
      const double d = c[i * w + k] - a[p.permutation[i] * w + k];
      s += d * d;
    }
    out.push_back(std::sqrt(s));
  }
  return out;
}

// Pairing whose different-label distances all sit below (active) or above
// (inactive) the unit margin, at least 0.1 away from it and from zero.
inline align::FeaturePairing hinge_pairing(Rng& rng, bool active) {
  for (;;) {
    const std::size_t b = 4 + rng.uniform_index(6), z = 2 + rng.uniform_index(5);
    auto clean = random_leaf({b, z}, rng, active ? 0.15 : 1.5);
    auto aug = random_leaf({b, z}, rng, active ? 0.15 : 1.5);
    auto labels = random_labels(b, 3, rng);
    align::FeaturePairing p;
    p.clean_features = clean;
    p.aug_features = aug;
    p.labels_clean = labels;
    p.labels_aug = labels;
    p.permutation = rng.permutation(b);
    const auto dist = pair_distances(p);
    bool ok = false;
    for (std::size_t i = 0; i < b; ++i) {
      if (p.same_label(i)) continue;
      const double r = dist[i];
      if (r < 0.1 || std::abs(r - 1.0) < 0.1 || (active ? r > 1.0 : r < 1.0)) {
        ok = false;
        break;
      }
      ok = true;
    }
    if (ok) return p;
  }
}

inline train::ModelSplit tiny_model(Rng& rng) {
  train::ModelSplit m;
  m.extractor = nn::make_mlp({16, 8, 6}, true, rng);
  m.classifier.add<nn::Linear>(6, 3, rng);
  return m;
}

inline augment::ImageBatch tiny_images(std::size_t b, Rng& rng) {
  std::vector<double> px(b * 16);
  for (auto& v : px) v = rng.uniform();
  return {augment::batch_tensor(b, {1, 4, 4}, std::move(px)), random_labels(b, 3, rng)};
}

inline std::vector<std::pair<std::string, Builder>> builders() {
  std::vector<std::pair<std::string, Builder>> out;

  out.emplace_back("linear", [](Rng& rng, std::size_t) {
    auto x = random_leaf({3, 4}, rng), w = random_leaf({4, 2}, rng), b = random_leaf({2}, rng);
    auto proj = random_leaf({3, 2}, rng);
    return Instance{{{"input", x}, {"weights", w}, {"bias", b}},
                    [=] { return nn::sum(nn::mul(nn::linear(x, w, b), proj.detach())); }};
  });

  out.emplace_back("conv2d", [](Rng& rng, std::size_t i) {
    const std::size_t stride = 1 + i % 2, pad = (i / 2) % 2;
    auto x = random_leaf({2, 2, 5, 5}, rng), k = random_leaf({3, 2, 3, 3}, rng);
    auto b = random_leaf({3}, rng);
    const std::size_t out = (5 + 2 * pad - 3) / stride + 1;
    auto proj = random_leaf({2, 3, out, out}, rng);
    return Instance{{{"input", x}, {"kernels", k}, {"bias", b}}, [=] {
                      return nn::sum(nn::mul(nn::conv2d(x, k, b, stride, pad), proj.detach()));
                    }};
  });

  out.emplace_back("relu", [](Rng& rng, std::size_t) {
    auto x = kink_free_leaf({4, 5}, rng);
    auto proj = random_leaf({4, 5}, rng);
    return Instance{{{"input", x}}, [=] { return nn::sum(nn::mul(nn::relu(x), proj.detach())); }};
  });

  out.emplace_back("softmax", [](Rng& rng, std::size_t) {
    auto x = random_leaf({3, 4}, rng, 2.0);
    auto proj = random_leaf({3, 4}, rng);
    return Instance{{{"logits", x}}, [=] { return nn::sum(nn::mul(nn::softmax(x), proj.detach())); }};
  });

  out.emplace_back("softmax_cross_entropy", [](Rng& rng, std::size_t) {
    auto x = random_leaf({4, 5}, rng, 2.0);
    auto y = random_labels(4, 5, rng);
    return Instance{{{"logits", x}}, [=] { return nn::softmax_cross_entropy(x, y); }};
  });

  out.emplace_back("semantic_alignment_loss", [](Rng& rng, std::size_t) {
    auto p = hinge_pairing(rng, rng.uniform() < 0.5);
    return Instance{{{"clean", p.clean_features}, {"aug", p.aug_features}},
                    [=] { return align::semantic_alignment_loss(p); }};
  });

  // Even instances exercise the active hinge, odd ones the inactive hinge.
  out.emplace_back("separation_loss", [](Rng& rng, std::size_t i) {
    auto p = hinge_pairing(rng, i % 2 == 0);
    return Instance{{{"clean", p.clean_features}, {"aug", p.aug_features}},
                    [=] { return align::separation_loss(p, {}); }};
  });

  out.emplace_back("csa_loss", [](Rng& rng, std::size_t i) {
    auto p = hinge_pairing(rng, i % 2 == 0);
    return Instance{{{"clean", p.clean_features}, {"aug", p.aug_features}},
                    [=] { return align::csa_loss(p, {}); }};
  });

  out.emplace_back("supcon_loss", [](Rng& rng, std::size_t) {
    auto f = random_leaf({8, 4}, rng);
    auto y = random_labels(8, 3, rng);
    return Instance{{{"features", f}}, [=] { return align::supcon_loss(f, y, 0.5).loss; }};
  });

  out.emplace_back("jsd_consistency", [](Rng& rng, std::size_t) {
    auto a = random_leaf({3, 4}, rng), b = random_leaf({3, 4}, rng), c = random_leaf({3, 4}, rng);
    return Instance{{{"logits_clean", a}, {"logits_aug1", b}, {"logits_aug2", c}}, [=] {
                      return train::jsd_consistency(nn::softmax(a), nn::softmax(b), nn::softmax(c));
                    }};
  });

  out.emplace_back("mixing_total_loss", [](Rng& rng, std::size_t i) {
    auto model = std::make_shared<train::ModelSplit>(tiny_model(rng));
    const auto clean = tiny_images(6, rng);
    const auto mixed = i % 2 ? augment::cutmix(clean, 1.0, rng) : augment::mixup(clean, 1.0, rng);
    train::ObjectiveConfig cfg;
    cfg.mode = train::ObjectiveMode::mixing;
    const std::uint64_t seed = rng.engine()();
    return Instance{model->parameters(), [=] {
                      Rng shuffle(seed);
                      return train::mixing_total_loss(*model, mixed, clean, cfg, shuffle).total;
                    }};
  });

  out.emplace_back("consistency_total_loss", [](Rng& rng, std::size_t) {
    auto model = std::make_shared<train::ModelSplit>(tiny_model(rng));
    const auto views = augment::augmix_views(tiny_images(6, rng), {}, rng);
    train::ObjectiveConfig cfg;
    const std::uint64_t seed = rng.engine()();
    return Instance{model->parameters(), [=] {
                      Rng shuffle(seed);
                      return train::consistency_total_loss(*model, views, cfg, shuffle).total;
                    }};
  });

  return out;
}

}  // namespace detail

/// Names of every operation the suite checks, in report order.
inline std::vector<std::string> gradcheck_operation_names() {
  std::vector<std::string> out;
  for (const auto& [name, _] : detail::builders()) out.push_back(name);
  return out;
}

/// Central-difference check of every differentiable loss operation on random instances.
inline GradcheckSuiteReport run_gradcheck_suite(const GradcheckOptions& opt = {}) {
  GradcheckSuiteReport report;
  report.step = opt.step;
  report.tolerance = opt.tolerance;
  std::uint64_t tag = 0;
  for (const auto& [name, build] : detail::builders()) {
    Rng rng(mix_seed(opt.seed, ++tag));
    GradcheckOutcome outcome;
    outcome.name = name;
    for (std::size_t i = 0; i < opt.instances; ++i) {
      const auto inst = build(rng, i);
      const auto r = nn::finite_diff_gradcheck(inst.loss, inst.params, opt.step, opt.tolerance);
      outcome.worst_error = std::max(outcome.worst_error, r.worst());
      outcome.failures += r.passed ? 0 : 1;
      ++outcome.instances;
    }
    if (name == "separation_loss" || name == "csa_loss") outcome.note = "active and inactive hinge";
    report.checks.push_back(std::move(outcome));
  }
  return report;
}

}  // namespace csa::cli

#endif  // CSA_CLI_GRADCHECK_SUITE_HPP
