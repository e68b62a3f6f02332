#ifndef CSA_CLI_RUNNER_HPP
#define CSA_CLI_RUNNER_HPP

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "csa/cli/config.hpp"
#include "csa/cli/metrics_io.hpp"
#include "csa/train/studies.hpp"

namespace csa::cli {

inline constexpr const char* kSummaryHeader =
    "variant,x,epochs,runs,median_sa,median_ra,mean_sa,mean_ra";
inline constexpr const char* kEpochBudgetHeader =
    "fraction,epochs,sa_with,ra_with,sa_without,ra_without,delta_sa,delta_ra";

struct ExperimentOutcome {
  std::filesystem::path directory;
  std::vector<MetricsRecord> records;
  std::vector<train::StudyCell> cells;
};

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  auto out = open_output(path);
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

template <class Writer>
void write_csv(const std::filesystem::path& path, Writer&& writer) {
  auto out = open_output(path);
  writer(out);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline void write_summary(std::ostream& os, std::span<const train::StudyCell> cells) {
  os << kSummaryHeader << '\n';
  for (const auto& c : cells) {
    os << c.variant << ',' << format_number(c.x) << ',' << c.epochs << ',' << c.runs.size() << ','
       << format_number(c.median_sa()) << ',' << format_number(c.median_ra()) << ','
       << format_number(c.mean_sa()) << ',' << format_number(c.mean_ra()) << '\n';
  }
}

inline std::string signed_points(double delta) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.2f", 100.0 * delta);
  return buf;
}

inline std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

inline void print_pair(std::ostream& log, const train::PairedCell& p, const std::string& label) {
  log << label << "  " << p.with.variant << ": SA " << percent(p.with.median_sa()) << " ("
      << signed_points(p.delta_sa()) << ")  RA " << percent(p.with.median_ra()) << " ("
      << signed_points(p.delta_ra()) << ")  | none: SA " << percent(p.without.median_sa())
      << "  RA " << percent(p.without.median_ra()) << '\n';
}

inline void require_augmentation(const train::ExperimentConfig& cfg) {
  if (cfg.objective.mode == train::ObjectiveMode::normal) {
    throw ConfigError("preset '" + cfg.preset + "' compares alignment variants and needs an augmentation");
  }
}

}  // namespace detail

/// Writes per-run files and the experiment-level aggregates for finished cells.
inline ExperimentOutcome write_outcome(const train::ExperimentConfig& cfg,
                                       std::vector<train::StudyCell> cells) {
  ExperimentOutcome out;
  out.directory = std::filesystem::path(cfg.output_dir) / cfg.name;
  for (const auto& cell : cells) {
    for (const auto& run : cell.runs) {
      auto rec = make_record(run.run_id, run.config, run.metrics);
      const auto dir = out.directory / "runs" / run.run_id;
      const std::span<const MetricsRecord> one(&rec, 1);
      detail::write_csv(dir / "metrics.csv", [&](std::ostream& os) { write_metrics_csv(os, one, cfg.wall_clock); });
      detail::write_csv(dir / "corruption.csv", [&](std::ostream& os) { write_corruption_csv(os, one); });
      emit_plot_data(rec, dir / "plot_epoch.csv");
      detail::write_file(dir / "config.ini", serialize_config(run.config));
      out.records.push_back(std::move(rec));
    }
  }
  detail::write_file(out.directory / "config.ini", serialize_config(cfg));
  detail::write_csv(out.directory / "metrics.csv",
                    [&](std::ostream& os) { write_metrics_csv(os, out.records, cfg.wall_clock); });
  detail::write_csv(out.directory / "corruption.csv",
                    [&](std::ostream& os) { write_corruption_csv(os, out.records); });
  detail::write_csv(out.directory / "summary.csv",
                    [&](std::ostream& os) { detail::write_summary(os, cells); });
  out.cells = std::move(cells);
  return out;
}

/// Runs the configured preset and writes everything under output_dir/name.
inline ExperimentOutcome run_preset(const train::ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  auto progress = [&log](const train::RunSummary& run) {
    log << "  " << run.run_id << "  epochs " << run.config.epochs << "  SA " << detail::percent(run.sa())
        << "  RA " << detail::percent(run.ra()) << '\n';
  };
  log << "experiment " << cfg.name << " (" << cfg.preset << "), config hash " << config_hash(cfg) << '\n';

  if (cfg.preset == "single") {
    std::vector<train::StudyCell> cells{train::run_cell(
        cfg, train::alignment_name(cfg.objective.alignment), cfg.objective.gamma, progress)};
    auto out = write_outcome(cfg, std::move(cells));
    const auto& c = out.cells.front();
    log << "median SA " << detail::percent(c.median_sa()) << "  RA " << detail::percent(c.median_ra()) << '\n';
    return out;
  }

  detail::require_augmentation(cfg);
  if (cfg.preset == "main-pair") {
    auto pair = train::main_pair(cfg, progress);
    detail::print_pair(log, pair, "gamma " + format_number(pair.x));
    return write_outcome(cfg, {pair.with, pair.without});
  }

  if (cfg.preset == "gamma-sweep") {
    auto table = train::gamma_sweep(cfg, cfg.gammas, progress);
    PlotSeries series{"gamma", {}};
    std::vector<train::StudyCell> cells{table.baseline};
    log << "baseline (none): SA " << detail::percent(table.baseline.median_sa()) << "  RA "
        << detail::percent(table.baseline.median_ra()) << '\n';
    for (const auto& row : table.rows) {
      series.points.push_back({row.x, row.median_sa(), row.median_ra()});
      log << "gamma " << format_number(row.x) << ": SA " << detail::percent(row.median_sa()) << " ("
          << detail::signed_points(row.median_sa() - table.baseline.median_sa()) << ")  RA "
          << detail::percent(row.median_ra()) << " ("
          << detail::signed_points(row.median_ra() - table.baseline.median_ra()) << ")\n";
      cells.push_back(row);
    }
    auto out = write_outcome(cfg, std::move(cells));
    emit_plot_data(series, out.directory / "gamma_sweep.csv");
    return out;
  }

  if (cfg.preset == "epoch-budget") {
    auto table = train::epoch_budget_study(cfg, cfg.fractions, progress);
    std::vector<train::StudyCell> cells;
    for (const auto& row : table.rows) {
      detail::print_pair(log, row, "fraction " + format_number(row.x) + " (" +
                                        std::to_string(row.with.epochs) + " epochs)");
      cells.push_back(row.with);
      cells.push_back(row.without);
    }
    auto out = write_outcome(cfg, std::move(cells));
    detail::write_csv(out.directory / "epoch_budget.csv", [&](std::ostream& os) {
      os << kEpochBudgetHeader << '\n';
      for (const auto& row : table.rows) {
        os << format_number(row.x) << ',' << row.with.epochs << ',' << format_number(row.with.median_sa())
           << ',' << format_number(row.with.median_ra()) << ',' << format_number(row.without.median_sa())
           << ',' << format_number(row.without.median_ra()) << ',' << format_number(row.delta_sa())
           << ',' << format_number(row.delta_ra()) << '\n';
      }
    });
    return out;
  }

  if (cfg.preset == "ablation") {
    std::vector<train::StudyCell> cells;
    cells.push_back(train::run_cell(train::with_alignment(cfg, train::Alignment::none), "none",
                                    cfg.objective.gamma, progress));
    const auto& base = cells.front();
    log << "none: SA " << detail::percent(base.median_sa()) << "  RA " << detail::percent(base.median_ra()) << '\n';
    for (auto v : cfg.variants) {
      if (v == train::Alignment::none) continue;
      auto cell = train::run_cell(train::with_alignment(cfg, v), train::alignment_name(v),
                                  cfg.objective.gamma, progress);
      log << cell.variant << ": SA " << detail::percent(cell.median_sa()) << " ("
          << detail::signed_points(cell.median_sa() - cells.front().median_sa()) << ")  RA "
          << detail::percent(cell.median_ra()) << " ("
          << detail::signed_points(cell.median_ra() - cells.front().median_ra()) << ")\n";
      cells.push_back(std::move(cell));
    }
    return write_outcome(cfg, std::move(cells));
  }

  throw ConfigError("unknown preset '" + cfg.preset +
                    "' (expected single|main-pair|gamma-sweep|epoch-budget|ablation)");
}

inline ExperimentOutcome run_experiment(const std::filesystem::path& config_path, std::ostream& log) {
  return run_preset(load_config(config_path), log);
}

}  // namespace csa::cli

#endif  // CSA_CLI_RUNNER_HPP
