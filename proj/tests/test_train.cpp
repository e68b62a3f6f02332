#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include <gtest/gtest.h>

#include "csa/augment/augmix.hpp"
#include "csa/augment/mixing.hpp"
#include "csa/train/studies.hpp"
#include "oracles.hpp"

using namespace csa;
using namespace csa::train;
using augment::ImageBatch;
using augment::ImageShape;
using nn::Tensor;

namespace {

constexpr ImageShape kShape{1, 4, 4};

ModelSplit tiny_model(std::uint64_t seed, std::size_t classes = 3) {
  Rng rng(seed);
  ModelSpec spec;
  spec.kind = "mlp";
  spec.hidden = {8};
  spec.embedding = 5;
  return build_model(spec, kShape, classes, rng);
}

ImageBatch random_batch(Rng& rng, std::size_t b, int classes = 3) {
  return {augment::batch_tensor(b, kShape, oracle::random_values(b * kShape.pixels(), rng, 0, 1)),
          oracle::random_labels(b, classes, rng)};
}

std::vector<double> values(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

ObjectiveConfig objective(ObjectiveMode mode, Alignment a, double gamma) {
  ObjectiveConfig c;
  c.mode = mode;
  c.alignment = a;
  c.gamma = gamma;
  return c;
}

ExperimentConfig small_run(const std::string& augmentation, Alignment a, std::size_t epochs) {
  ExperimentConfig cfg;
  cfg.name = "t";
  cfg.augmentation.kind = augmentation;
  cfg.objective.mode = ExperimentConfig::mode_for(augmentation);
  cfg.objective.alignment = a;
  cfg.data.train_size = 96;
  cfg.data.test_size = 48;
  cfg.data.classes = 3;
  cfg.data.image_size = 4;
  cfg.model.kind = "mlp";
  cfg.model.hidden = {16};
  cfg.model.embedding = 8;
  cfg.batch_size = 32;
  cfg.epochs = epochs;
  cfg.optimizer.lr = 0.05;
  cfg.eval.every = 1;
  return cfg;
}

}  // namespace

TEST(MixingTaskLoss, LambdaOneIsCleanLabelCrossEntropy) {
  Rng rng(1);
  auto logits = oracle::random_values(12, rng);
  auto ya = oracle::random_labels(4, 3, rng), yb = oracle::random_labels(4, 3, rng);
  auto l = dual_label_cross_entropy(Tensor::from({4, 3}, logits), ya, yb, 1.0);
  EXPECT_NEAR(l.item(), oracle::cross_entropy(logits, ya, 3), 1e-12);
}

TEST(MixingTaskLoss, EqualLabelsIgnoreLambda) {
  Rng rng(2);
  auto logits = oracle::random_values(12, rng);
  auto y = oracle::random_labels(4, 3, rng);
  for (double lam : {0.0, 0.3, 0.8}) {
    auto l = dual_label_cross_entropy(Tensor::from({4, 3}, logits), y, y, lam);
    EXPECT_NEAR(l.item(), oracle::cross_entropy(logits, y, 3), 1e-12);
  }
}

TEST(MixingTaskLoss, HalfLambdaAveragesBothTargets) {
  Rng rng(3);
  auto logits = oracle::random_values(15, rng);
  auto ya = oracle::random_labels(5, 3, rng), yb = oracle::random_labels(5, 3, rng);
  auto l = dual_label_cross_entropy(Tensor::from({5, 3}, logits), ya, yb, 0.5);
  EXPECT_NEAR(l.item(), 0.5 * oracle::cross_entropy(logits, ya, 3) + 0.5 * oracle::cross_entropy(logits, yb, 3),
              1e-12);
}

TEST(MixingTotalLoss, MatchesComposedOracle) {
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    auto model = tiny_model(100 + t);
    auto clean = random_batch(rng, 6);
    auto mixed = t % 2 ? augment::mixup(clean, 1.0, rng) : augment::cutmix(clean, 1.0, rng);
    const double gamma = rng.uniform();
    auto cfg = objective(ObjectiveMode::mixing, Alignment::csa, gamma);
    Rng shuffle(t), replay(t);
    auto r = mixing_total_loss(model, mixed, clean, cfg, shuffle);
    const auto perm = replay.permutation(6);

    const auto fc = values(model.features(clean.images));
    const auto fa = values(model.features(mixed.mixed_images));
    const auto logits = values(model.logits(mixed.mixed_images));
    const double task = mixed.lambda_m * oracle::cross_entropy(logits, mixed.labels_a, 3) +
                        (1 - mixed.lambda_m) * oracle::cross_entropy(logits, mixed.labels_b, 3);
    const auto c = oracle::csa(fc, fa, clean.labels, clean.labels, perm, 5, 1.0);
    EXPECT_NEAR(r.parts.task, task, 1e-10);
    EXPECT_NEAR(r.parts.alignment, c.sa, 1e-10);
    EXPECT_NEAR(r.parts.separation, c.s, 1e-10);
    EXPECT_NEAR(r.total.item(), (1 - gamma) * task + gamma * (c.sa + c.s), 1e-10);
  }
}

TEST(MixingTotalLoss, GammaEndpointsAndRecombination) {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    auto model = tiny_model(200 + t);
    auto clean = random_batch(rng, 5);
    auto mixed = augment::mixup(clean, 1.0, rng);
    for (auto a : {Alignment::csa, Alignment::sa_only, Alignment::supcon}) {
      Rng s0(t), s1(t), s2(t);
      auto r0 = mixing_total_loss(model, mixed, clean, objective(ObjectiveMode::mixing, a, 0.0), s0);
      auto r1 = mixing_total_loss(model, mixed, clean, objective(ObjectiveMode::mixing, a, 1.0), s1);
      EXPECT_NEAR(r0.total.item(), r0.parts.task, 1e-12);
      EXPECT_NEAR(r1.total.item(), r1.parts.align_term, 1e-12);
      const auto cfg = objective(ObjectiveMode::mixing, a, 0.37);
      auto r = mixing_total_loss(model, mixed, clean, cfg, s2);
      EXPECT_NEAR(recombine(r.parts, cfg), r.parts.total, 1e-9);
    }
  }
}

TEST(MixingTotalLoss, NoneIsPlainTaskLoss) {
  Rng rng(6);
  auto model = tiny_model(7);
  auto clean = random_batch(rng, 4);
  auto mixed = augment::mixup(clean, 1.0, rng);
  Rng s(0);
  auto r = mixing_total_loss(model, mixed, clean, objective(ObjectiveMode::mixing, Alignment::none, 0.9), s);
  EXPECT_EQ(r.total.item(), mixing_task_loss(model, mixed).item());
  EXPECT_EQ(r.parts.alignment, 0.0);
}

TEST(Jsd, IdenticalDistributionsGiveZero) {
  Rng rng(7);
  auto p = oracle::softmax(oracle::random_values(12, rng), 3);
  auto t = Tensor::from({4, 3}, p);
  EXPECT_NEAR(jsd_consistency(t, t, t).item(), 0.0, 1e-15);
}

TEST(Jsd, PermutationSymmetric) {
  Rng rng(8);
  for (int k = 0; k < 50; ++k) {
    auto a = oracle::softmax(oracle::random_values(8, rng), 4);
    auto b = oracle::softmax(oracle::random_values(8, rng), 4);
    auto c = oracle::softmax(oracle::random_values(8, rng), 4);
    auto A = Tensor::from({2, 4}, a), B = Tensor::from({2, 4}, b), C = Tensor::from({2, 4}, c);
    const double v = jsd_consistency(A, B, C).item();
    EXPECT_NEAR(jsd_consistency(B, C, A).item(), v, 1e-14);
    EXPECT_NEAR(jsd_consistency(C, A, B).item(), v, 1e-14);
    EXPECT_NEAR(v, oracle::jsd(a, b, c, 4), 1e-12);
    EXPECT_GE(v, 0.0);
  }
}

TEST(Jsd, HandComputedValue) {
  auto a = Tensor::from({1, 2}, {1.0, 0.0});
  auto b = Tensor::from({1, 2}, {0.0, 1.0});
  auto c = Tensor::from({1, 2}, {0.5, 0.5});
  EXPECT_NEAR(jsd_consistency(a, b, c).item(), 2.0 * std::log(2.0) / 3.0, 1e-12);
}

TEST(Jsd, RejectsNonDistributions) {
  auto a = Tensor::from({1, 2}, {0.7, 0.7});
  EXPECT_THROW(jsd_consistency(a, a, a), ContractError);
}

TEST(ConsistencyTotalLoss, MatchesComposedOracle) {
  Rng rng(9);
  for (int t = 0; t < 20; ++t) {
    auto model = tiny_model(300 + t);
    auto clean = random_batch(rng, 6);
    auto views = augment::augmix_views(clean, {}, rng);
    const double gamma = rng.uniform();
    auto cfg = objective(ObjectiveMode::consistency, Alignment::csa, gamma);
    Rng shuffle(t), replay(t);
    auto r = consistency_total_loss(model, views, cfg, shuffle);
    const auto perm1 = replay.permutation(6);
    const auto perm2 = replay.permutation(6);

    const auto f0 = values(model.features(clean.images));
    const auto f1 = values(model.features(views.aug1));
    const auto f2 = values(model.features(views.aug2));
    const auto z0 = values(model.logits(clean.images));
    const double ce = oracle::cross_entropy(z0, clean.labels, 3);
    const double js = oracle::jsd(oracle::softmax(z0, 3), oracle::softmax(values(model.logits(views.aug1)), 3),
                                  oracle::softmax(values(model.logits(views.aug2)), 3), 3);
    const auto c1 = oracle::csa(f0, f1, clean.labels, clean.labels, perm1, 5, 1.0);
    const auto c2 = oracle::csa(f0, f2, clean.labels, clean.labels, perm2, 5, 1.0);
    const double want = (1 - gamma) * (ce + 12.0 * js) + gamma / 2 * (c1.sa + c1.s + c2.sa + c2.s);
    EXPECT_NEAR(r.parts.task, ce, 1e-10);
    EXPECT_NEAR(r.parts.jsd, js, 1e-10);
    EXPECT_NEAR(r.total.item(), want, 1e-9);
    EXPECT_NEAR(recombine(r.parts, cfg), r.parts.total, 1e-9);
  }
}

TEST(ConsistencyTotalLoss, PairingsUseIndependentPermutations) {
  Rng rng(10);
  std::size_t differ = 0;
  for (int t = 0; t < 50; ++t) {
    Rng s(t);
    const auto p1 = s.permutation(8), p2 = s.permutation(8);
    differ += p1 != p2;
  }
  EXPECT_GE(differ, 49u);
  auto model = tiny_model(11);
  auto clean = random_batch(rng, 4);
  auto views = augment::augmix_views(clean, {}, rng);
  EXPECT_THROW(consistency_total_loss(model, views, objective(ObjectiveMode::mixing, Alignment::csa, 0.5), rng),
               ContractError);
}

TEST(Objective, NormalModeRejectsAlignment) {
  EXPECT_THROW(objective(ObjectiveMode::normal, Alignment::csa, 0.5).validate(), ConfigError);
  EXPECT_THROW(objective(ObjectiveMode::mixing, Alignment::csa, 1.5).validate(), ConfigError);
  EXPECT_THROW(parse_alignment("triplet"), ConfigError);
}

TEST(Evaluate, SaCountsCorrectRows) {
  auto predict = [](const Tensor& x) {
    const std::size_t b = x.dim(0);
    std::vector<double> z(b * 2);
    for (std::size_t i = 0; i < b; ++i) z[i * 2 + (x[i * 16] > 0.5 ? 1 : 0)] = 1.0;
    return Tensor::from({b, 2}, z);
  };
  std::vector<double> px(4 * 16, 0.0);
  px[0] = 1.0;
  px[16] = 1.0;
  std::vector<ImageBatch> test{{augment::batch_tensor(4, kShape, px), {1, 0, 0, 1}}};
  EXPECT_DOUBLE_EQ(evaluate_sa(predict, std::span<const ImageBatch>(test)), 0.5);
}

TEST(Evaluate, ArgmaxTiesPickLowestIndex) {
  auto t = Tensor::from({2, 3}, {1, 1, 0, 0, 2, 2});
  EXPECT_EQ(argmax_rows(t), (std::vector<int>{0, 1}));
}

TEST(Evaluate, RaIsUniformMeanOverCells) {
  Rng rng(12);
  auto batch = random_batch(rng, 20, 2);
  std::vector<ImageBatch> test{batch};
  // Predicts class 1 exactly when the mean pixel exceeds 0.5.
  auto predict = [](const Tensor& x) {
    const std::size_t b = x.dim(0);
    std::vector<double> z(b * 2);
    for (std::size_t i = 0; i < b; ++i) {
      double s = 0;
      for (std::size_t k = 0; k < 16; ++k) s += x[i * 16 + k];
      z[i * 2 + (s / 16 > 0.5 ? 1 : 0)] = 1.0;
    }
    return Tensor::from({b, 2}, z);
  };
  const auto suite = augment::full_suite();
  ASSERT_EQ(suite.size(), 35u);
  auto ra = evaluate_ra(predict, std::span<const ImageBatch>(test), suite, 99);
  double sum = 0;
  for (const auto& c : ra.cells) sum += c.accuracy;
  EXPECT_NEAR(ra.ra, sum / 35.0, 1e-15);
  auto again = evaluate_ra(predict, std::span<const ImageBatch>(test), suite, 99);
  EXPECT_EQ(again.ra, ra.ra);
  // A constant predictor scores the class frequency on every cell.
  auto constant = [](const Tensor& x) { return Tensor::full({x.dim(0), 2}, 0.0); };
  const double freq = static_cast<double>(std::count(batch.labels.begin(), batch.labels.end(), 0)) / 20.0;
  EXPECT_DOUBLE_EQ(evaluate_ra(constant, std::span<const ImageBatch>(test), suite, 1).ra, freq);
}

TEST(Training, ZeroEpochsReturnsInitialModel) {
  auto cfg = small_run("augmix", Alignment::csa, 0);
  auto r = train_run(cfg);
  EXPECT_TRUE(r.metrics.empty());
  Rng init(stream_seed(cfg.seed, Stream::init));
  auto fresh = build_model(cfg.model, kShape, 3, init);
  auto a = r.model.parameters(), b = fresh.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(values(a[i].tensor), values(b[i].tensor));
}

TEST(Training, DeterministicAcrossReruns) {
  for (const char* aug : {"augmix", "mixup", "cutmix"}) {
    auto cfg = small_run(aug, Alignment::csa, 2);
    auto a = train_run(cfg), b = train_run(cfg);
    ASSERT_EQ(a.metrics.size(), 2u);
    for (std::size_t e = 0; e < 2; ++e) {
      EXPECT_EQ(a.metrics[e].loss.total, b.metrics[e].loss.total) << aug;
      EXPECT_EQ(a.metrics[e].sa, b.metrics[e].sa);
      EXPECT_EQ(a.metrics[e].ra, b.metrics[e].ra);
    }
  }
}

TEST(Training, GammaZeroMatchesBaselineBitwise) {
  for (const char* aug : {"augmix", "mixup"}) {
    auto with = small_run(aug, Alignment::csa, 2);
    with.objective.gamma = 0.0;
    auto base = small_run(aug, Alignment::none, 2);
    auto a = train_run(with), b = train_run(base);
    for (std::size_t e = 0; e < 2; ++e) {
      EXPECT_EQ(a.metrics[e].loss.task, b.metrics[e].loss.task) << aug;
      EXPECT_EQ(a.metrics[e].sa, b.metrics[e].sa);
      EXPECT_EQ(a.metrics[e].ra, b.metrics[e].ra);
    }
  }
}

TEST(Training, SeparableBlobsAreLearned) {
  auto cfg = small_run("none", Alignment::none, 15);
  cfg.data.noise = 0.05;
  cfg.data.train_size = 240;
  cfg.data.test_size = 120;
  auto r = train_run(cfg);
  EXPECT_GE(r.metrics.back().sa, 0.95);
  EXPECT_EQ(r.metrics.back().per_corruption.size(), 35u);
}

TEST(Training, MetricsCarryLossComponents) {
  auto r = train_run(small_run("augmix", Alignment::csa, 1));
  const auto& m = r.metrics.front();
  EXPECT_EQ(m.epoch, 1u);
  EXPECT_GT(m.loss.task, 0.0);
  EXPECT_GT(m.loss.jsd, 0.0);
  EXPECT_GE(m.loss.alignment, 0.0);
  EXPECT_GE(m.loss.separation, 0.0);
}

TEST(Studies, MedianAndMean) {
  EXPECT_EQ(median({3, 1, 2}), 2);
  EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
  EXPECT_EQ(mean({1, 2, 6}), 3);
}

TEST(Studies, BudgetEpochs) {
  EXPECT_EQ(budget_epochs(10, 0.25), 2u);
  EXPECT_EQ(budget_epochs(30, 0.1), 3u);
  EXPECT_EQ(budget_epochs(10, 0.3), 3u);
  EXPECT_EQ(budget_epochs(30, 0.01), 1u);
  EXPECT_EQ(budget_epochs(30, 1.0), 30u);
}

TEST(Studies, GammaSweepZeroEqualsBaselineAndDuplicatesAgree) {
  auto cfg = small_run("mixup", Alignment::csa, 2);
  cfg.repeats = 2;
  std::vector<double> gammas{0.0, 0.3, 0.3};
  auto t = gamma_sweep(cfg, gammas);
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_EQ(t.baseline.variant, "none");
  EXPECT_EQ(t.rows[0].sas(), t.baseline.sas());
  EXPECT_EQ(t.rows[0].ras(), t.baseline.ras());
  EXPECT_EQ(t.rows[1].sas(), t.rows[2].sas());
  EXPECT_EQ(t.rows[1].ras(), t.rows[2].ras());
  EXPECT_EQ(t.rows[1].runs[1].seed, 1u);
  EXPECT_EQ(t.rows[1].runs[0].run_id, "t-csa-0.3-s0");
}

TEST(Studies, EpochBudgetGrid) {
  auto cfg = small_run("mixup", Alignment::csa, 4);
  std::vector<double> fractions{0.25, 0.5, 1.0};
  auto t = epoch_budget_study(cfg, fractions);
  ASSERT_EQ(t.rows.size(), 3u);
  const std::size_t epochs[] = {1, 2, 4};
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(t.rows[i].x, fractions[i]);
    EXPECT_EQ(t.rows[i].with.epochs, epochs[i]);
    EXPECT_EQ(t.rows[i].without.epochs, epochs[i]);
    EXPECT_EQ(t.rows[i].with.runs.front().metrics.size(), epochs[i]);
    EXPECT_EQ(t.rows[i].with.variant, "csa");
    EXPECT_EQ(t.rows[i].without.variant, "none");
  }
  std::vector<double> bad{0.0};
  EXPECT_THROW(epoch_budget_study(cfg, bad), ConfigError);
}

TEST(Synthetic, ClassBalanceAndRange) {
  cli::SyntheticSpec spec;
  spec.train_size = 1000;
  spec.test_size = 10;
  spec.classes = 4;
  auto split = cli::make_synthetic(spec);
  std::map<int, int> counts;
  for (int y : split.train.labels) ++counts[y];
  ASSERT_EQ(counts.size(), 4u);
  for (auto [k, n] : counts) EXPECT_EQ(n, 250) << k;
  for (double v : split.train.pixels) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
  auto again = cli::make_synthetic(spec);
  EXPECT_EQ(again.train.pixels, split.train.pixels);
  spec.seed = 1;
  EXPECT_NE(cli::make_synthetic(spec).train.pixels, split.train.pixels);
}

TEST(Synthetic, TwoMoonsNeedsTwoClasses) {
  cli::SyntheticSpec spec;
  spec.kind = cli::SyntheticKind::two_moons;
  EXPECT_THROW(cli::make_synthetic(spec), ConfigError);
  spec.classes = 2;
  EXPECT_NO_THROW(cli::make_synthetic(spec));
}
