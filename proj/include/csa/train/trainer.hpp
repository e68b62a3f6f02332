#ifndef CSA_TRAIN_TRAINER_HPP
#define CSA_TRAIN_TRAINER_HPP

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "csa/augment/augmix.hpp"
#include "csa/augment/corruption.hpp"
#include "csa/augment/dataset.hpp"
#include "csa/augment/mixing.hpp"
#include "csa/cli/idx.hpp"
#include "csa/cli/synthetic.hpp"
#include "csa/nn/module.hpp"
#include "csa/nn/optim.hpp"
#include "csa/random.hpp"
#include "csa/train/config.hpp"
#include "csa/train/evaluate.hpp"
#include "csa/train/objectives.hpp"

namespace csa::train {

/// Non-finite training loss; the message carries every component of the failing step.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  LossComponents loss;    // batch-size-weighted means over the epoch
  double sa = 0.0;
  double ra = 0.0;
  std::vector<CorruptionAccuracy> per_corruption;
  double seconds = 0.0;  // wall clock since the start of training
};

struct RunResult {
  std::vector<EpochMetrics> metrics;
  ModelSplit model;
};

// Independent streams per concern, so toggling one feature (e.g. the feature
// shuffle) never perturbs another (data order, augmentation draws).
enum class Stream : std::uint64_t { init = 10, order = 11, augment = 12, shuffle = 13, data = 14 };

inline std::uint64_t stream_seed(std::uint64_t seed, Stream s) {
  return mix_seed(seed, static_cast<std::uint64_t>(s));
}

inline augment::DataSplit load_data(const ExperimentConfig& cfg) {
  const auto& d = cfg.data;
  if (d.kind == "idx") {
    augment::DataSplit split;
    split.train = cli::load_idx_dataset(d.train_images, d.train_labels, d.limit);
    split.test = cli::load_idx_dataset(d.test_images, d.test_labels, d.test_limit);
    const std::size_t classes = std::max(split.train.classes, split.test.classes);
    split.train.classes = split.test.classes = std::max(classes, d.classes);
    return split;
  }
  cli::SyntheticSpec s;
  s.kind = cli::parse_synthetic_kind(d.kind);
  s.train_size = d.train_size;
  s.test_size = d.test_size;
  s.classes = d.classes;
  s.noise = d.noise;
  s.image_size = d.image_size;
  s.seed = stream_seed(cfg.seed, Stream::data);
  return cli::make_synthetic(s);
}

inline ModelSplit build_model(const ModelSpec& spec, augment::ImageShape shape, std::size_t classes,
                              Rng& rng) {
  ModelSplit m;
  if (spec.kind == "small-cnn") {
    m.extractor = nn::make_small_cnn(shape.channels, shape.height, shape.width, spec.channels,
                                     spec.embedding, rng);
  } else if (spec.kind == "mlp") {
    std::vector<std::size_t> widths{shape.pixels()};
    widths.insert(widths.end(), spec.hidden.begin(), spec.hidden.end());
    widths.push_back(spec.embedding);
    m.extractor = nn::make_mlp(widths, true, rng);
  } else {
    throw ConfigError("unknown model '" + spec.kind + "'");
  }
  m.classifier.add<nn::Linear>(spec.embedding, classes, rng);
  return m;
}

inline std::unique_ptr<nn::Optimizer> build_optimizer(const OptimizerSpec& spec,
                                                      std::vector<nn::NamedParameter> params) {
  if (spec.kind == "adam") {
    return std::make_unique<nn::Adam>(
        std::move(params),
        nn::AdamConfig{spec.lr, spec.momentum, spec.beta2, spec.epsilon, spec.weight_decay});
  }
  return std::make_unique<nn::Sgd>(std::move(params),
                                   nn::SgdConfig{spec.lr, spec.momentum, spec.weight_decay});
}

inline double scheduled_lr(const ExperimentConfig& cfg, std::size_t epoch) {
  const double base = cfg.optimizer.lr;
  if (cfg.scheduler.kind == "cosine") return nn::cosine_anneal_lr(base, epoch, cfg.epochs);
  if (cfg.scheduler.kind == "step") {
    return nn::step_decay_lr(base, epoch, cfg.scheduler.period, cfg.scheduler.factor);
  }
  return base;
}

inline augment::CorruptionTable corruption_table_for(const ExperimentConfig& cfg) {
  return cfg.eval.corruption_table.empty() ? augment::CorruptionTable::defaults()
                                           : augment::CorruptionTable::load(cfg.eval.corruption_table);
}

namespace detail {

inline void accumulate(LossComponents& sum, const LossComponents& p, double w) {
  sum.task += w * p.task;
  sum.jsd += w * p.jsd;
  sum.alignment += w * p.alignment;
  sum.separation += w * p.separation;
  sum.align_term += w * p.align_term;
  sum.total += w * p.total;
}

inline std::string describe(const LossComponents& p) {
  std::ostringstream os;
  os.precision(9);
  os << "task=" << p.task << " jsd=" << p.jsd << " sa=" << p.alignment << " s=" << p.separation
     << " align=" << p.align_term << " total=" << p.total;
  return os.str();
}

}  // namespace detail

/// Full training run on prepared data. Deterministic in cfg.seed on one thread.
inline RunResult train_run(const ExperimentConfig& cfg, const augment::DataSplit& data) {
  cfg.validate();
  if (data.train.empty()) throw ContractError("train_run: empty training set");
  Rng init_rng(stream_seed(cfg.seed, Stream::init));
  Rng order_rng(stream_seed(cfg.seed, Stream::order));
  Rng aug_rng(stream_seed(cfg.seed, Stream::augment));
  Rng shuffle_rng(stream_seed(cfg.seed, Stream::shuffle));

  RunResult result;
  result.model = build_model(cfg.model, data.train.shape, data.train.classes, init_rng);
  if (cfg.epochs == 0) return result;

  auto optimizer = build_optimizer(cfg.optimizer, result.model.parameters());
  const auto suite = augment::full_suite();
  const auto table = corruption_table_for(cfg);
  const auto test_batches = data.test.chunks(cfg.batch_size);
  const auto start = std::chrono::steady_clock::now();
  const auto& obj = cfg.objective;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    optimizer->set_lr(scheduled_lr(cfg, epoch));
    const auto order = order_rng.permutation(data.train.size());
    LossComponents sum;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const auto batch = data.train.gather(std::span(order).subspan(begin, end - begin));
      ObjectiveResult step;
      switch (obj.mode) {
        case ObjectiveMode::normal:
          step = normal_loss(result.model, batch);
          break;
        case ObjectiveMode::mixing: {
          const auto mixed = cfg.augmentation.kind == "cutmix"
                                 ? augment::cutmix(batch, cfg.augmentation.alpha, aug_rng)
                                 : augment::mixup(batch, cfg.augmentation.alpha, aug_rng);
          step = mixing_total_loss(result.model, mixed, batch, obj, shuffle_rng);
          break;
        }
        case ObjectiveMode::consistency: {
          const auto views = augment::augmix_views(batch, cfg.augmentation.chain, aug_rng);
          step = consistency_total_loss(result.model, views, obj, shuffle_rng);
          break;
        }
      }
      if (!std::isfinite(step.parts.total)) {
        throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch + 1) +
                               ", sample offset " + std::to_string(begin) + ": " +
                               detail::describe(step.parts));
      }
      optimizer->zero_grad();
      nn::backward(step.total);
      optimizer->step();
      detail::accumulate(sum, step.parts, static_cast<double>(end - begin));
    }

    const bool last = epoch + 1 == cfg.epochs;
    const bool due = cfg.eval.every > 0 && (epoch + 1) % cfg.eval.every == 0;
    if (!last && !due) continue;
    EpochMetrics m;
    m.epoch = epoch + 1;
    LossComponents mean;
    detail::accumulate(mean, sum, 1.0 / static_cast<double>(data.train.size()));
    m.loss = mean;
    const auto& model = result.model;
    auto predict = [&model](const nn::Tensor& x) { return model.logits(x); };
    m.sa = evaluate_sa(predict, std::span<const augment::ImageBatch>(test_batches));
    const auto ra = evaluate_ra(predict, std::span<const augment::ImageBatch>(test_batches),
                                std::span<const augment::CorruptionSpec>(suite), cfg.eval.seed, table);
    m.ra = ra.ra;
    m.per_corruption = ra.cells;
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.metrics.push_back(std::move(m));
  }
  return result;
}

inline RunResult train_run(const ExperimentConfig& cfg) { return train_run(cfg, load_data(cfg)); }

}  // namespace csa::train

#endif  // CSA_TRAIN_TRAINER_HPP
