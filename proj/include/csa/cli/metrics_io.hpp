#ifndef CSA_CLI_METRICS_IO_HPP
#define CSA_CLI_METRICS_IO_HPP

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "csa/cli/config.hpp"
#include "csa/errors.hpp"
#include "csa/train/trainer.hpp"

namespace csa::cli {

// Column sets are part of the output contract. Bump the version when they change.
inline constexpr int kCsvSchemaVersion = 1;
inline constexpr const char* kMetricsHeader = "run_id,epoch,loss_task,loss_sa,loss_s,loss_jsd,sa,ra,seconds";
inline constexpr const char* kCorruptionHeader = "run_id,kind,severity,accuracy";

struct MetricsRecord {
  std::string run_id;
  std::string config_hash;
  std::vector<train::EpochMetrics> rows;  // ordered by epoch
  double final_sa = 0.0;
  double final_ra = 0.0;
  std::vector<train::CorruptionAccuracy> per_corruption;  // from the last row
};

inline MetricsRecord make_record(const std::string& run_id, const train::ExperimentConfig& cfg,
                                 std::span<const train::EpochMetrics> metrics) {
  MetricsRecord r;
  r.run_id = run_id;
  r.config_hash = config_hash(cfg);
  r.rows.assign(metrics.begin(), metrics.end());
  if (!r.rows.empty()) {
    r.final_sa = r.rows.back().sa;
    r.final_ra = r.rows.back().ra;
    r.per_corruption = r.rows.back().per_corruption;
  }
  return r;
}

/// Seconds are written as 0 unless `wall_clock`, so reruns produce identical bytes.
inline void write_metrics_csv(std::ostream& os, std::span<const MetricsRecord> records,
                              bool wall_clock = false) {
  os << kMetricsHeader << '\n';
  for (const auto& rec : records) {
    for (const auto& m : rec.rows) {
      os << rec.run_id << ',' << m.epoch << ',' << format_number(m.loss.task) << ','
         << format_number(m.loss.alignment) << ',' << format_number(m.loss.separation) << ','
         << format_number(m.loss.jsd) << ',' << format_number(m.sa) << ',' << format_number(m.ra)
         << ',' << format_number(wall_clock ? m.seconds : 0.0) << '\n';
    }
  }
}

inline void write_corruption_csv(std::ostream& os, std::span<const MetricsRecord> records) {
  os << kCorruptionHeader << '\n';
  for (const auto& rec : records) {
    for (const auto& c : rec.per_corruption) {
      os << rec.run_id << ',' << augment::corruption_name(c.spec.kind) << ',' << c.spec.severity
         << ',' << format_number(c.accuracy) << '\n';
    }
  }
}

struct PlotPoint {
  double x = 0.0;
  double sa = 0.0;
  double ra = 0.0;
};

/// One (x, SA, RA) series. x_name is "epoch" or "gamma" (or "fraction").
struct PlotSeries {
  std::string x_name = "epoch";
  std::vector<PlotPoint> points;
};

inline PlotSeries epoch_series(const MetricsRecord& rec) {
  PlotSeries s;
  for (const auto& m : rec.rows) s.points.push_back({static_cast<double>(m.epoch), m.sa, m.ra});
  return s;
}

inline void write_plot_csv(std::ostream& os, const PlotSeries& s) {
  os << s.x_name << ",sa,ra\n";
  for (const auto& p : s.points) {
    os << format_number(p.x) << ',' << format_number(p.sa) << ',' << format_number(p.ra) << '\n';
  }
}

/// Opens `path` for writing, creating parent directories.
inline std::ofstream open_output(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

inline void emit_plot_data(const PlotSeries& s, const std::filesystem::path& path) {
  auto out = open_output(path);
  write_plot_csv(out, s);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline void emit_plot_data(const MetricsRecord& rec, const std::filesystem::path& path) {
  emit_plot_data(epoch_series(rec), path);
}

inline PlotSeries read_plot_csv(std::istream& in, const std::string& source = "<plot>") {
  PlotSeries s;
  std::string line;
  if (!std::getline(in, line)) throw LoadError(source + ": missing header");
  const auto comma = line.find(',');
  if (comma == std::string::npos || line.substr(comma) != ",sa,ra") {
    throw LoadError(source + ": unexpected header '" + line + "'");
  }
  s.x_name = line.substr(0, comma);
  for (int n = 2; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    std::istringstream row(line);
    PlotPoint p;
    char c1 = 0, c2 = 0;
    if (!(row >> p.x >> c1 >> p.sa >> c2 >> p.ra) || c1 != ',' || c2 != ',') {
      throw LoadError(source + ":" + std::to_string(n) + ": malformed row");
    }
    s.points.push_back(p);
  }
  return s;
}

inline PlotSeries read_plot_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open '" + path.string() + "'");
  return read_plot_csv(in, path.string());
}

}  // namespace csa::cli

#endif  // CSA_CLI_METRICS_IO_HPP
