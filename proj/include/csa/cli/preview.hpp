#ifndef CSA_CLI_PREVIEW_HPP
#define CSA_CLI_PREVIEW_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "csa/augment/corruption.hpp"
#include "csa/cli/metrics_io.hpp"
#include "csa/train/evaluate.hpp"
#include "csa/train/trainer.hpp"

namespace csa::cli {

inline constexpr const char* kPreviewHeader = "kind,severity,mse";

struct PreviewCell {
  augment::CorruptionSpec spec;
  double mse = 0.0;  // mean squared pixel change over the previewed images
};

/// Binary PGM (or PPM for 3 channels) of a grid of images, upscaled by `zoom`.
/// grid[row][col] holds one [C, H, W] image.
inline void write_netpbm(const std::filesystem::path& path,
                         const std::vector<std::vector<std::vector<double>>>& grid,
                         augment::ImageShape shape, std::size_t zoom = 4) {
  if (shape.channels != 1 && shape.channels != 3) {
    throw ContractError("preview supports 1 or 3 channel images");
  }
  const std::size_t rows = grid.size(), cols = rows ? grid.front().size() : 0;
  const std::size_t gap = 1, cell_h = shape.height * zoom + gap, cell_w = shape.width * zoom + gap;
  const std::size_t height = rows * cell_h, width = cols * cell_w;
  const std::size_t plane = shape.height * shape.width;
  std::vector<unsigned char> px(height * width * shape.channels, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const auto& img = grid[r][c];
      for (std::size_t y = 0; y < shape.height * zoom; ++y) {
        for (std::size_t x = 0; x < shape.width * zoom; ++x) {
          const std::size_t src = (y / zoom) * shape.width + x / zoom;
          const std::size_t dst = (r * cell_h + y) * width + c * cell_w + x;
          for (std::size_t ch = 0; ch < shape.channels; ++ch) {
            const double v = augment::clamp01(img[ch * plane + src]);
            px[dst * shape.channels + ch] = static_cast<unsigned char>(std::lround(255.0 * v));
          }
        }
      }
    }
  }
  auto out = open_output(path);
  out << (shape.channels == 1 ? "P5" : "P6") << '\n' << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

/// Applies every (kind, severity) to the first `count` test images. Writes one
/// image grid per kind (rows: images, columns: severity 0..5) and preview.csv.
inline std::vector<PreviewCell> corrupt_preview(const train::ExperimentConfig& cfg,
                                                const std::filesystem::path& dir,
                                                std::size_t count = 8) {
  const auto data = train::load_data(cfg);
  const auto table = train::corruption_table_for(cfg);
  count = std::min(count, data.test.size());
  if (count == 0) throw ContractError("corrupt-preview: empty test set");
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = i;
  const auto batch = data.test.gather(idx);
  const auto shape = batch.shape();

  std::vector<PreviewCell> cells;
  for (std::size_t k = 0; k < augment::kCorruptionKinds; ++k) {
    const auto kind = static_cast<augment::Corruption>(k);
    std::vector<std::vector<std::vector<double>>> grid(count);
    for (int s = 0; s <= augment::kMaxSeverity; ++s) {
      const augment::CorruptionSpec spec{kind, s};
      Rng rng(train::corruption_cell_seed(cfg.eval.seed, spec));
      const auto out = augment::corrupt(batch, spec, rng, table);
      double sq = 0.0;
      for (std::size_t i = 0; i < count; ++i) {
        const auto a = batch.image(i), b = out.image(i);
        for (std::size_t p = 0; p < a.size(); ++p) sq += (a[p] - b[p]) * (a[p] - b[p]);
        grid[i].emplace_back(b.begin(), b.end());
      }
      if (s > 0) cells.push_back({spec, sq / static_cast<double>(batch.images.size())});
    }
    write_netpbm(dir / (std::string(augment::corruption_name(kind)) +
                        (shape.channels == 1 ? ".pgm" : ".ppm")),
                 grid, shape);
  }
  auto out = open_output(dir / "preview.csv");
  out << kPreviewHeader << '\n';
  for (const auto& c : cells) {
    out << augment::corruption_name(c.spec.kind) << ',' << c.spec.severity << ','
        << format_number(c.mse) << '\n';
  }
  if (!out) throw IoError("write failed for preview.csv");
  return cells;
}

}  // namespace csa::cli

#endif  // CSA_CLI_PREVIEW_HPP
