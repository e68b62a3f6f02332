#ifndef CSA_TRAIN_CONFIG_HPP
#define CSA_TRAIN_CONFIG_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "csa/augment/augmix.hpp"
#include "csa/errors.hpp"
#include "csa/train/objectives.hpp"

namespace csa::train {

struct DatasetSpec {
  std::string kind = "synthetic-blobs";  // synthetic-blobs | synthetic-two-moons | idx
  std::size_t train_size = 512;
  std::size_t test_size = 256;
  std::size_t classes = 4;
  std::size_t image_size = 8;
  double noise = 0.1;
  std::string train_images, train_labels, test_images, test_labels;  // idx only
  std::size_t limit = 2000;       // idx train truncation
  std::size_t test_limit = 1000;  // idx test truncation
};

struct ModelSpec {
  std::string kind = "small-cnn";  // small-cnn | mlp
  std::vector<std::size_t> channels{8, 16};
  std::vector<std::size_t> hidden{64};  // mlp hidden widths
  std::size_t embedding = 16;
};

struct AugmentationSpec {
  std::string kind = "augmix";  // none | mixup | cutmix | augmix
  double alpha = 1.0;           // Beta concentration for mixup / cutmix
  augment::AugChainSpec chain{};
};

struct OptimizerSpec {
  std::string kind = "sgd";  // sgd | adam
  double lr = 0.1;
  double momentum = 0.9;  // SGD momentum, Adam beta1
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 5e-4;
};

struct SchedulerSpec {
  std::string kind = "cosine";  // cosine | step | constant
  std::size_t period = 10;
  double factor = 0.5;
};

struct EvalSpec {
  std::size_t every = 0;  // 0: final epoch only
  std::uint64_t seed = 2024;
  std::string corruption_table;  // empty: built-in table
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string preset = "single";  // single | main-pair | gamma-sweep | epoch-budget | ablation
  DatasetSpec data{};
  ModelSpec model{};
  AugmentationSpec augmentation{};
  ObjectiveConfig objective{};
  OptimizerSpec optimizer{};
  SchedulerSpec scheduler{};
  EvalSpec eval{};
  std::size_t epochs = 30;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  std::size_t repeats = 1;  // seeds seed, seed+1, ...
  std::vector<double> gammas{0.1, 0.25, 0.5};
  std::vector<double> fractions{0.25, 0.5, 0.75};
  std::vector<Alignment> variants{Alignment::csa, Alignment::sa_only, Alignment::supcon};  // ablation
  std::string output_dir = "runs";
  bool wall_clock = false;  // write real seconds into metrics.csv (breaks bitwise reproducibility)

  static ObjectiveMode mode_for(const std::string& augmentation) {
    if (augmentation == "none") return ObjectiveMode::normal;
    if (augmentation == "mixup" || augmentation == "cutmix") return ObjectiveMode::mixing;
    if (augmentation == "augmix") return ObjectiveMode::consistency;
    throw ConfigError("unknown augmentation '" + augmentation +
                      "' (expected none|mixup|cutmix|augmix)");
  }

  void validate() const {
    if (objective.mode != mode_for(augmentation.kind)) {
      throw ConfigError("objective mode '" + mode_name(objective.mode) +
                        "' does not match augmentation '" + augmentation.kind + "'");
    }
    objective.validate();
    if (augmentation.kind == "augmix") augmentation.chain.validate();
    if ((augmentation.kind == "mixup" || augmentation.kind == "cutmix") && !(augmentation.alpha > 0)) {
      throw ConfigError("augmentation alpha must be > 0");
    }
    if (preset != "single" && preset != "main-pair" && preset != "gamma-sweep" &&
        preset != "epoch-budget" && preset != "ablation") {
      throw ConfigError("unknown preset '" + preset +
                        "' (expected single|main-pair|gamma-sweep|epoch-budget|ablation)");
    }
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (repeats == 0) throw ConfigError("repeats must be >= 1");
    if (optimizer.kind != "sgd" && optimizer.kind != "adam") {
      throw ConfigError("unknown optimizer '" + optimizer.kind + "'");
    }
    if (scheduler.kind != "cosine" && scheduler.kind != "step" && scheduler.kind != "constant") {
      throw ConfigError("unknown scheduler '" + scheduler.kind + "'");
    }
    if (scheduler.period == 0) throw ConfigError("scheduler period must be >= 1");
    if (model.kind != "small-cnn" && model.kind != "mlp") {
      throw ConfigError("unknown model '" + model.kind + "'");
    }
    for (double f : fractions) {
      if (!(f > 0.0 && f <= 1.0)) throw ConfigError("epoch fractions must lie in (0, 1]");
    }
    for (double g : gammas) {
      if (!(g >= 0.0 && g <= 1.0)) throw ConfigError("gammas must lie in [0, 1]");
    }
  }
};

}  // namespace csa::train

#endif  // CSA_TRAIN_CONFIG_HPP
