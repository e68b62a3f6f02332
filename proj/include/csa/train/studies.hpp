#ifndef CSA_TRAIN_STUDIES_HPP
#define CSA_TRAIN_STUDIES_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <optional>
#include <string>
#include <vector>

#include "csa/train/trainer.hpp"

namespace csa::train {

inline double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double mean(const std::vector<double>& v) {
  if (v.empty()) return std::nan("");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

struct RunSummary {
  std::string run_id;
  std::uint64_t seed = 0;
  ExperimentConfig config;
  std::vector<EpochMetrics> metrics;
  std::shared_ptr<const ModelSplit> model;  // final parameters, shared so cells stay copyable

  double sa() const { return metrics.empty() ? std::nan("") : metrics.back().sa; }
  double ra() const { return metrics.empty() ? std::nan("") : metrics.back().ra; }
};

/// One configuration trained over every study seed.
struct StudyCell {
  std::string variant;
  double x = 0.0;  // gamma or epoch fraction, depending on the study
  std::size_t epochs = 0;
  std::vector<RunSummary> runs;

  std::vector<double> sas() const {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(r.sa());
    return v;
  }
  std::vector<double> ras() const {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(r.ra());
    return v;
  }
  double median_sa() const { return median(sas()); }
  double median_ra() const { return median(ras()); }
  double mean_sa() const { return mean(sas()); }
  double mean_ra() const { return mean(ras()); }
};

/// With/without alignment at one setting, same seeds on both sides.
struct PairedCell {
  double x = 0.0;
  StudyCell with;
  StudyCell without;

  double delta_sa() const { return with.median_sa() - without.median_sa(); }
  double delta_ra() const { return with.median_ra() - without.median_ra(); }
};

struct GammaSweepTable {
  StudyCell baseline;  // alignment disabled
  std::vector<StudyCell> rows;
};

struct EpochBudgetTable {
  std::vector<PairedCell> rows;
};

using Progress = std::function<void(const RunSummary&)>;

inline std::vector<std::uint64_t> study_seeds(const ExperimentConfig& cfg) {
  std::vector<std::uint64_t> seeds;
  for (std::size_t k = 0; k < cfg.repeats; ++k) seeds.push_back(cfg.seed + k);
  return seeds;
}

/// floor(fraction * total) with a 1e-9 guard against representation error, minimum 1.
inline std::size_t budget_epochs(std::size_t total, double fraction) {
  const auto e = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(total) + 1e-9));
  return std::max<std::size_t>(1, e);
}

inline std::string format_tag(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

inline StudyCell run_cell(const ExperimentConfig& cfg, const std::string& variant, double x,
                          const Progress& progress = {}) {
  StudyCell cell;
  cell.variant = variant;
  cell.x = x;
  cell.epochs = cfg.epochs;
  for (std::uint64_t seed : study_seeds(cfg)) {
    RunSummary run;
    run.seed = seed;
    run.config = cfg;
    run.config.seed = seed;
    run.config.repeats = 1;
    run.run_id = cfg.name + "-" + variant + "-" + format_tag(x) + "-s" + std::to_string(seed);
    auto result = train_run(run.config);
    run.metrics = std::move(result.metrics);
    run.model = std::make_shared<const ModelSplit>(std::move(result.model));
    if (progress) progress(run);
    cell.runs.push_back(std::move(run));
  }
  return cell;
}

inline ExperimentConfig with_alignment(ExperimentConfig cfg, Alignment a) {
  cfg.objective.alignment = a;
  return cfg;
}

/// The configured alignment (CSA unless overridden) against the plain baseline.
/// `x` tags the run ids; it defaults to gamma.
inline PairedCell main_pair(const ExperimentConfig& base, const Progress& progress = {},
                            std::optional<double> x = std::nullopt) {
  const Alignment a = base.objective.alignment == Alignment::none ? Alignment::csa
                                                                  : base.objective.alignment;
  PairedCell p;
  p.x = x.value_or(base.objective.gamma);
  p.with = run_cell(with_alignment(base, a), alignment_name(a), p.x, progress);
  p.without = run_cell(with_alignment(base, Alignment::none), "none", p.x, progress);
  return p;
}

inline GammaSweepTable gamma_sweep(const ExperimentConfig& base, std::span<const double> gammas,
                                   const Progress& progress = {}) {
  GammaSweepTable t;
  t.baseline = run_cell(with_alignment(base, Alignment::none), "none", 0.0, progress);
  const Alignment a = base.objective.alignment == Alignment::none ? Alignment::csa
                                                                  : base.objective.alignment;
  for (double g : gammas) {
    auto cfg = with_alignment(base, a);
    cfg.objective.gamma = g;
    t.rows.push_back(run_cell(cfg, alignment_name(a), g, progress));
  }
  return t;
}

inline EpochBudgetTable epoch_budget_study(const ExperimentConfig& base,
                                           std::span<const double> fractions,
                                           const Progress& progress = {}) {
  EpochBudgetTable t;
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("epoch fractions must lie in (0, 1]");
    auto cfg = base;
    cfg.epochs = budget_epochs(base.epochs, f);
    t.rows.push_back(main_pair(cfg, progress, f));
  }
  return t;
}

}  // namespace csa::train

#endif  // CSA_TRAIN_STUDIES_HPP
