#ifndef CSA_CLI_IDX_HPP
#define CSA_CLI_IDX_HPP

// IDX reader (the MNIST container format): big-endian header, unsigned bytes.
//   images: magic 0x00000803, count, rows, cols, then count*rows*cols pixels
//   labels: magic 0x00000801, count, then count labels

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "csa/augment/dataset.hpp"
#include "csa/errors.hpp"

namespace csa::cli {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

namespace detail {

inline std::vector<unsigned char> read_bytes(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(std::string("cannot open ") + what + " file '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                               const char* what, const char* field) {
  if (bytes.size() < offset + 4) {
    throw LoadError(std::string("truncated ") + what + " file: missing header field '" + field +
                    "'");
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

inline std::string hex(std::uint32_t v) {
  std::ostringstream os;
  os << "0x" << std::hex;
  os.width(8);
  os.fill('0');
  os << v;
  return os.str();
}

}  // namespace detail

/// Loads at most `limit` image/label pairs; pixels are scaled by 1/255.
inline augment::Dataset load_idx_dataset(const std::string& images_path,
                                         const std::string& labels_path, std::size_t limit) {
  const auto img = detail::read_bytes(images_path, "images");
  const auto lab = detail::read_bytes(labels_path, "labels");

  const auto img_magic = detail::read_be32(img, 0, "images", "magic");
  if (img_magic != kIdxImageMagic) {
    throw LoadError("images file: bad magic " + detail::hex(img_magic) + ", expected " +
                    detail::hex(kIdxImageMagic));
  }
  const auto lab_magic = detail::read_be32(lab, 0, "labels", "magic");
  if (lab_magic != kIdxLabelMagic) {
    throw LoadError("labels file: bad magic " + detail::hex(lab_magic) + ", expected " +
                    detail::hex(kIdxLabelMagic));
  }
  const std::size_t count = detail::read_be32(img, 4, "images", "count");
  const std::size_t rows = detail::read_be32(img, 8, "images", "rows");
  const std::size_t cols = detail::read_be32(img, 12, "images", "cols");
  const std::size_t label_count = detail::read_be32(lab, 4, "labels", "count");
  if (count != label_count) {
    throw LoadError("image count " + std::to_string(count) + " does not match label count " +
                    std::to_string(label_count));
  }
  const std::size_t pixels = rows * cols;
  if (img.size() < 16 + count * pixels) {
    throw LoadError("truncated images file: expected " + std::to_string(count * pixels) +
                    " pixel bytes, found " + std::to_string(img.size() - 16));
  }
  if (lab.size() < 8 + count) {
    throw LoadError("truncated labels file: expected " + std::to_string(count) +
                    " label bytes, found " + std::to_string(lab.size() - 8));
  }

  augment::Dataset ds;
  ds.shape = {1, rows, cols};
  const std::size_t keep = std::min(count, limit);
  ds.pixels.resize(keep * pixels);
  ds.labels.resize(keep);
  for (std::size_t i = 0; i < keep * pixels; ++i) ds.pixels[i] = img[16 + i] / 255.0;
  int top = -1;
  for (std::size_t i = 0; i < keep; ++i) {
    ds.labels[i] = lab[8 + i];
    top = std::max(top, ds.labels[i]);
  }
  ds.classes = static_cast<std::size_t>(top + 1);
  return ds;
}

}  // namespace csa::cli

#endif  // CSA_CLI_IDX_HPP
