// csa: experiment runner and verification commands.
//
//   csa train <config>
//   csa sweep-gamma <config> [--gammas 0.1 0.25 0.5]
//   csa epoch-budget <config> [--fractions 0.25 0.5 0.75]
//   csa ablate <config> --variant {csa|sa-only|supcon|none}
//   csa gradcheck [--instances N] [--inject-fault]
//   csa corrupt-preview <config> [--count N]

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "csa/cli/config.hpp"
#include "csa/cli/gradcheck_suite.hpp"
#include "csa/cli/preview.hpp"
#include "csa/cli/runner.hpp"

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> repeats;
  std::optional<std::size_t> epochs;
  std::optional<std::string> output_dir;

  void attach(CLI::App* cmd) {
    cmd->add_option("--seed", seed, "First seed (overrides the config)");
    cmd->add_option("--repeats", repeats, "Seeds per cell (overrides the config)");
    cmd->add_option("--epochs", epochs, "Epoch budget (overrides the config)");
    cmd->add_option("--output-dir", output_dir, "Output root (overrides the config)");
  }

  void apply(csa::train::ExperimentConfig& cfg) const {
    if (seed) cfg.seed = *seed;
    if (repeats) cfg.repeats = *repeats;
    if (epochs) cfg.epochs = *epochs;
    if (output_dir) cfg.output_dir = *output_dir;
  }
};

int run(const std::string& path, const Overrides& o, auto&& adjust) {
  auto cfg = csa::cli::load_config(path);
  o.apply(cfg);
  adjust(cfg);
  const auto out = csa::cli::run_preset(cfg, std::cout);
  std::cout << "wrote " << out.directory.string() << '\n';
  return 0;
}

int gradcheck(std::size_t instances, bool inject_fault) {
  csa::align::testing::flip_separation_gradient = inject_fault;
  csa::cli::GradcheckOptions opt;
  opt.instances = instances;
  const auto report = csa::cli::run_gradcheck_suite(opt);
  csa::align::testing::flip_separation_gradient = false;
  std::printf("central differences, step %g, tolerance %g\n", report.step, report.tolerance);
  for (const auto& c : report.checks) {
    std::printf("%-4s %-24s %3zu instances  worst rel err %.3e%s%s\n", c.passed() ? "ok" : "FAIL",
                c.name.c_str(), c.instances, c.worst_error, c.note.empty() ? "" : "  ",
                c.note.c_str());
  }
  std::printf("%s\n", report.passed() ? "all gradient checks passed" : "gradient check FAILED");
  return report.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive semantic alignment training and robustness evaluation"};
  app.require_subcommand(1);

  std::string config;
  Overrides overrides;

  auto* train = app.add_subcommand("train", "Run the preset named in the config");
  train->add_option("config", config, "Experiment config (INI)")->required()->check(CLI::ExistingFile);
  overrides.attach(train);

  std::vector<double> gammas;
  auto* sweep = app.add_subcommand("sweep-gamma", "CSA at several gamma values against the baseline");
  sweep->add_option("config", config)->required()->check(CLI::ExistingFile);
  sweep->add_option("--gammas", gammas, "Gamma values (default: from the config)");
  overrides.attach(sweep);

  std::vector<double> fractions;
  auto* budget = app.add_subcommand("epoch-budget", "Paired runs at fractions of the epoch budget");
  budget->add_option("config", config)->required()->check(CLI::ExistingFile);
  budget->add_option("--fractions", fractions, "Epoch fractions in (0, 1] (default: from the config)");
  overrides.attach(budget);

  std::string variant;
  auto* ablate = app.add_subcommand("ablate", "One alignment variant against the plain baseline");
  ablate->add_option("config", config)->required()->check(CLI::ExistingFile);
  ablate->add_option("--variant", variant)
      ->required()
      ->check(CLI::IsMember({"csa", "sa-only", "supcon", "none"}));
  overrides.attach(ablate);

  std::size_t instances = 50;
  bool inject_fault = false;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every loss operation");
  grad->add_option("--instances", instances, "Random instances per operation");
  grad->add_flag("--inject-fault", inject_fault, "Flip the separation-loss gradient sign (negative control)");

  std::size_t count = 8;
  auto* preview = app.add_subcommand("corrupt-preview", "Write corrupted samples and per-cell MSE");
  preview->add_option("config", config)->required()->check(CLI::ExistingFile);
  preview->add_option("--count", count, "Test images to preview");
  overrides.attach(preview);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return run(config, overrides, [](auto&) {});
    if (*sweep) {
      return run(config, overrides, [&](auto& cfg) {
        cfg.preset = "gamma-sweep";
        if (!gammas.empty()) cfg.gammas = gammas;
        cfg.validate();
      });
    }
    if (*budget) {
      return run(config, overrides, [&](auto& cfg) {
        cfg.preset = "epoch-budget";
        if (!fractions.empty()) cfg.fractions = fractions;
        cfg.validate();
      });
    }
    if (*ablate) {
      return run(config, overrides, [&](auto& cfg) {
        cfg.preset = "ablation";
        cfg.variants = {csa::train::parse_alignment(variant)};
      });
    }
    if (*grad) return gradcheck(instances, inject_fault);
    if (*preview) {
      auto cfg = csa::cli::load_config(config);
      overrides.apply(cfg);
      const auto dir = std::filesystem::path(cfg.output_dir) / cfg.name / "preview";
      const auto cells = csa::cli::corrupt_preview(cfg, dir, count);
      for (const auto& c : cells) {
        std::printf("%-20s severity %d  mse %.6f\n",
                    std::string(csa::augment::corruption_name(c.spec.kind)).c_str(), c.spec.severity,
                    c.mse);
      }
      std::cout << "wrote " << dir.string() << '\n';
      return 0;
    }
  } catch (const csa::train::TrainingDiverged& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
