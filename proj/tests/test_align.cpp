#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "csa/align/csa.hpp"
#include "oracles.hpp"

using namespace csa;
using align::FeaturePairing;
using nn::Tensor;

namespace {

FeaturePairing make_pairing(std::vector<double> clean, std::vector<double> aug, std::size_t b,
                            std::size_t z, std::vector<int> y_clean, std::vector<int> y_aug,
                            std::vector<std::size_t> perm, bool grad = false) {
  FeaturePairing p;
  p.clean_features = Tensor::from({b, z}, std::move(clean), grad);
  p.aug_features = Tensor::from({b, z}, std::move(aug), grad);
  p.labels_clean = std::move(y_clean);
  p.labels_aug = std::move(y_aug);
  p.permutation = std::move(perm);
  return p;
}

struct Random {
  std::vector<double> clean, aug;
  std::vector<int> y;
  std::vector<std::size_t> perm;
  FeaturePairing pairing;
};

Random random_pairing(Rng& rng, std::size_t b, std::size_t z, int classes, double scale = 1.0) {
  Random r;
  r.clean = oracle::random_values(b * z, rng, -scale, scale);
  r.aug = oracle::random_values(b * z, rng, -scale, scale);
  r.y = oracle::random_labels(b, classes, rng);
  r.perm = rng.permutation(b);
  r.pairing = make_pairing(r.clean, r.aug, b, z, r.y, r.y, r.perm);
  return r;
}

}  // namespace

TEST(SemanticAlignment, IdenticalFeaturesIsZero) {
  auto p = FeaturePairing::identity(Tensor::from({2, 2}, {1, 2, 3, 4}), Tensor::from({2, 2}, {1, 2, 3, 4}),
                                    std::vector<int>{0, 1});
  EXPECT_EQ(align::semantic_alignment_loss(p).item(), 0.0);
}

TEST(SemanticAlignment, HandNorm) {
  auto p = make_pairing({1, 0}, {0, 1}, 1, 2, {3}, {3}, {0});
  EXPECT_DOUBLE_EQ(align::semantic_alignment_loss(p).item(), 1.0);
}

TEST(SemanticAlignment, MatchesPairLoop) {
  Rng rng(11);
  for (int t = 0; t < 50; ++t) {
    auto r = random_pairing(rng, 8, 4, 3);
    auto want = oracle::csa(r.clean, r.aug, r.y, r.y, r.perm, 4, 1.0);
    EXPECT_NEAR(align::semantic_alignment_loss(r.pairing).item(), want.sa, 1e-9);
  }
}

TEST(SemanticAlignment, WidthMismatch) {
  FeaturePairing p;
  p.clean_features = Tensor::zeros({2, 3});
  p.aug_features = Tensor::zeros({2, 4});
  p.labels_clean = p.labels_aug = {0, 1};
  p.permutation = {0, 1};
  EXPECT_THROW(align::semantic_alignment_loss(p), DimensionError);
}

TEST(Separation, HingeInactiveBeyondMargin) {
  auto p = make_pairing({0, 0}, {1.5, 0}, 1, 2, {0}, {1}, {0});
  EXPECT_EQ(align::separation_loss(p, {1.0}).item(), 0.0);
  auto at_margin = make_pairing({0, 0}, {1.0, 0}, 1, 2, {0}, {1}, {0});
  EXPECT_EQ(align::separation_loss(at_margin, {1.0}).item(), 0.0);
}

TEST(Separation, MaximalHinge) {
  auto p = make_pairing({0.3, 0.4}, {0.3, 0.4}, 1, 2, {0}, {1}, {0});
  EXPECT_DOUBLE_EQ(align::separation_loss(p, {1.0}).item(), 0.5);
}

TEST(Separation, MatchesPairLoop) {
  Rng rng(12);
  for (int t = 0; t < 50; ++t) {
    auto r = random_pairing(rng, 8, 4, 3, 0.4);
    auto want = oracle::csa(r.clean, r.aug, r.y, r.y, r.perm, 4, 1.0);
    EXPECT_NEAR(align::separation_loss(r.pairing, {1.0}).item(), want.s, 1e-9);
  }
}

TEST(Separation, ZeroDistanceGradientIsFinite) {
  auto p = make_pairing({0.2, 0.2}, {0.2, 0.2}, 1, 2, {0}, {1}, {0}, true);
  nn::backward(align::separation_loss(p, {}));
  for (double g : p.clean_features.grad()) EXPECT_EQ(g, 0.0);
}

TEST(Csa, IdentityPermutationIsAlignmentOnly) {
  Rng rng(13);
  auto clean = oracle::random_values(12, rng), aug = oracle::random_values(12, rng);
  auto p = FeaturePairing::identity(Tensor::from({4, 3}, clean), Tensor::from({4, 3}, aug),
                                    std::vector<int>{0, 1, 2, 0});
  EXPECT_EQ(align::csa_loss(p, {}).item(), align::semantic_alignment_loss(p).item());
}

TEST(Csa, DerangementOfDistinctLabelsIsSeparationOnly) {
  Rng rng(14);
  auto p = make_pairing(oracle::random_values(8, rng, -0.3, 0.3), oracle::random_values(8, rng, -0.3, 0.3), 4,
                        2, {0, 1, 2, 3}, {0, 1, 2, 3}, {1, 2, 3, 0});
  EXPECT_EQ(align::semantic_alignment_loss(p).item(), 0.0);
  EXPECT_EQ(align::csa_loss(p, {}).item(), align::separation_loss(p, {}).item());
}

TEST(Csa, PartitionOracle) {
  Rng rng(15);
  for (int t = 0; t < 100; ++t) {
    const std::size_t b = 2 + rng.uniform_index(15), z = 1 + rng.uniform_index(8);
    auto r = random_pairing(rng, b, z, 3, 0.5);
    const double m = rng.uniform(0.5, 2.0);
    auto want = oracle::csa(r.clean, r.aug, r.y, r.y, r.perm, z, m);
    auto terms = align::csa_terms(r.pairing, {m});
    EXPECT_NEAR(terms.total.item(), want.sa + want.s, 1e-9);
    EXPECT_EQ(terms.total.item(), terms.alignment.item() + terms.separation.item());
  }
}

TEST(Csa, NonNegativeAndTranslationInvariant) {
  Rng rng(16);
  for (int t = 0; t < 50; ++t) {
    auto r = random_pairing(rng, 6, 3, 2, 0.6);
    const double before_sa = align::semantic_alignment_loss(r.pairing).item();
    const double before_s = align::separation_loss(r.pairing, {}).item();
    EXPECT_GE(before_sa, 0.0);
    EXPECT_GE(before_s, 0.0);
    auto shift = oracle::random_values(3, rng, -5, 5);
    auto c = r.clean, a = r.aug;
    for (std::size_t i = 0; i < c.size(); ++i) {
      c[i] += shift[i % 3];
      a[i] += shift[i % 3];
    }
    auto moved = make_pairing(c, a, 6, 3, r.y, r.y, r.perm);
    EXPECT_NEAR(align::semantic_alignment_loss(moved).item(), before_sa, 1e-9);
    EXPECT_NEAR(align::separation_loss(moved, {}).item(), before_s, 1e-9);
  }
}

TEST(Csa, ZeroIffConditions) {
  // Same-label pairs identical and different-label pairs beyond the margin.
  auto p = make_pairing({0, 0, 5, 5}, {0, 0, 5, 5}, 2, 2, {0, 1}, {0, 1}, {0, 1});
  EXPECT_EQ(align::csa_loss(p, {}).item(), 0.0);
  auto q = make_pairing({0, 0, 5, 5}, {0, 0, 5, 5}, 2, 2, {0, 1}, {0, 1}, {1, 0});
  EXPECT_EQ(align::csa_loss(q, {}).item(), 0.0);
  auto close = make_pairing({0, 0, 0.5, 0}, {0, 0, 0.5, 0}, 2, 2, {0, 1}, {0, 1}, {1, 0});
  EXPECT_GT(align::csa_loss(close, {}).item(), 0.0);
}

TEST(Csa, GradientsReachBothBranches) {
  Rng rng(17);
  auto r = random_pairing(rng, 6, 3, 2, 0.4);
  auto p = make_pairing(r.clean, r.aug, 6, 3, r.y, r.y, r.perm, true);
  nn::backward(align::csa_loss(p, {}));
  auto nonzero = [](std::span<const double> g) {
    return std::any_of(g.begin(), g.end(), [](double v) { return v != 0.0; });
  };
  EXPECT_TRUE(nonzero(std::as_const(p.clean_features).grad()));
  EXPECT_TRUE(nonzero(std::as_const(p.aug_features).grad()));
}

TEST(Csa, InvalidPermutationRejected) {
  auto p = make_pairing({0, 0, 1, 1}, {0, 0, 1, 1}, 2, 2, {0, 1}, {0, 1}, {0, 0});
  EXPECT_THROW(align::csa_loss(p, {}), ContractError);
  EXPECT_THROW(align::MarginConfig{0.0}.validate(), ConfigError);
}

TEST(FeatureShuffle, SingletonIsIdentity) {
  Rng rng(18);
  auto p = FeaturePairing::identity(Tensor::zeros({1, 2}), Tensor::zeros({1, 2}), std::vector<int>{4});
  EXPECT_EQ(align::feature_shuffle(p, rng).permutation, std::vector<std::size_t>{0});
}

TEST(FeatureShuffle, LabelsTravelWithFeatures) {
  Rng rng(19);
  for (int t = 0; t < 100; ++t) {
    const std::size_t b = 1 + rng.uniform_index(16);
    auto y = oracle::random_labels(b, 4, rng);
    auto aug = oracle::random_values(b * 2, rng);
    auto p = FeaturePairing::identity(Tensor::zeros({b, 2}), Tensor::from({b, 2}, aug), y);
    auto s = align::feature_shuffle(p, rng);
    auto sorted = s.permutation;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < b; ++i) EXPECT_EQ(sorted[i], i);
    std::vector<int> paired;
    for (std::size_t i = 0; i < b; ++i) {
      const std::size_t j = s.permutation[i];
      paired.push_back(s.paired_label(i));
      EXPECT_EQ(s.paired_label(i), y[j]);
      EXPECT_EQ(s.aug_features[j * 2], aug[j * 2]);
    }
    std::sort(paired.begin(), paired.end());
    std::sort(y.begin(), y.end());
    EXPECT_EQ(paired, y);
  }
}

TEST(FeatureShuffle, MatchesFisherYatesOracle) {
  Rng a(20), b(20);
  auto p = FeaturePairing::identity(Tensor::zeros({16, 2}), Tensor::zeros({16, 2}), std::vector<int>(16, 0));
  EXPECT_EQ(align::feature_shuffle(p, a).permutation, oracle::fisher_yates(16, b));
}

TEST(FeatureShuffle, RequiresUnshuffledInput) {
  Rng rng(21);
  auto p = make_pairing({0, 0, 1, 1}, {0, 0, 1, 1}, 2, 2, {0, 1}, {0, 1}, {1, 0});
  EXPECT_THROW(align::feature_shuffle(p, rng), ContractError);
}

TEST(SupCon, SinglePositiveSingleCandidate) {
  auto r = align::supcon_loss(Tensor::from({2, 2}, {0.6, 0.8, 0.6, 0.8}), std::vector<int>{1, 1}, 1.0);
  EXPECT_NEAR(r.loss.item(), 0.0, 1e-15);
  EXPECT_FALSE(r.no_positives);
}

TEST(SupCon, NoPositivesFlagged) {
  auto r = align::supcon_loss(Tensor::from({3, 2}, {1, 0, 0, 1, 1, 1}), std::vector<int>{0, 1, 2});
  EXPECT_EQ(r.loss.item(), 0.0);
  EXPECT_TRUE(r.no_positives);
}

TEST(SupCon, MatchesLogSoftmaxOracle) {
  Rng rng(22);
  for (int t = 0; t < 50; ++t) {
    auto f = oracle::random_values(6 * 4, rng);
    auto y = oracle::random_labels(6, 2, rng);
    const double tau = rng.uniform(0.1, 1.0);
    EXPECT_NEAR(oracle::rel_err(align::supcon_loss(Tensor::from({6, 4}, f), y, tau).loss.item(),
                                oracle::supcon(f, y, 4, tau)),
                0.0, 1e-7);
  }
}

TEST(PairwiseStats, IdenticalSetsHaveZeroSameLabelMean) {
  Rng rng(23);
  auto f = oracle::random_values(8, rng);
  auto p = FeaturePairing::identity(Tensor::from({4, 2}, f), Tensor::from({4, 2}, f), std::vector<int>{0, 1, 2, 3});
  EXPECT_EQ(align::pairwise_feature_stats(p).same_label_mean, 0.0);
}

TEST(PairwiseStats, TwoClusters) {
  const double d = 3.0;
  auto p = FeaturePairing::identity(Tensor::from({4, 1}, {0, 0, d, d}), Tensor::from({4, 1}, {0, 0, d, d}),
                                    std::vector<int>{0, 0, 1, 1});
  auto s = align::pairwise_feature_stats(p);
  EXPECT_DOUBLE_EQ(s.different_label_mean, d);
  EXPECT_DOUBLE_EQ(s.same_label_mean, 0.0);
  EXPECT_EQ(s.same_label_pairs, 8u);
}

TEST(PairwiseStats, MatchesDoubleLoop) {
  Rng rng(24);
  for (int t = 0; t < 30; ++t) {
    auto r = random_pairing(rng, 10, 3, 3);
    auto want = oracle::pairwise(r.clean, r.aug, r.y, 3);
    auto s = align::pairwise_feature_stats(r.pairing);
    EXPECT_NEAR(s.same_label_mean, want.same, 1e-9);
    EXPECT_NEAR(s.different_label_mean, want.diff, 1e-9);
  }
}
