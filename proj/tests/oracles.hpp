// Reference implementations used only by tests. Each one is written directly
// from the defining formula with plain loops and long double accumulation, and
// shares no code with the library beyond the value types.
#ifndef CSA_TESTS_ORACLES_HPP
#define CSA_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "csa/random.hpp"

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline Matrix rows(const std::vector<double>& flat, std::size_t r, std::size_t c) {
  Matrix m(r, std::vector<double>(c));
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m[i][j] = flat[i * c + j];
  return m;
}

inline std::vector<double> random_values(std::size_t n, csa::Rng& rng, double lo = -2.0, double hi = 2.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline std::vector<int> random_labels(std::size_t n, int classes, csa::Rng& rng) {
  std::vector<int> y(n);
  for (auto& v : y) v = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(classes)));
  return y;
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12});
}

// out[b][o] = sum_i x[b][i] w[i][o] + bias[o]
inline std::vector<double> matmul(const std::vector<double>& x, const std::vector<double>& w,
                                  const std::vector<double>& bias, std::size_t b, std::size_t din,
                                  std::size_t dout) {
  std::vector<double> out(b * dout);
  for (std::size_t r = 0; r < b; ++r)
    for (std::size_t o = 0; o < dout; ++o) {
      long double s = bias[o];
      for (std::size_t i = 0; i < din; ++i) s += (long double)x[r * din + i] * w[i * dout + o];
      out[r * dout + o] = (double)s;
    }
  return out;
}

// Naive six-loop cross-correlation with zero padding.
inline std::vector<double> conv(const std::vector<double>& x, const std::vector<double>& k,
                                const std::vector<double>& bias, std::size_t B, std::size_t C,
                                std::size_t H, std::size_t W, std::size_t K, std::size_t ks,
                                std::size_t stride, std::size_t pad) {
  const std::size_t oh = (H + 2 * pad - ks) / stride + 1, ow = (W + 2 * pad - ks) / stride + 1;
  std::vector<double> out(B * K * oh * ow);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < K; ++o)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xx = 0; xx < ow; ++xx) {
          long double s = bias[o];
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t dy = 0; dy < ks; ++dy)
              for (std::size_t dx = 0; dx < ks; ++dx) {
                const long iy = (long)(y * stride + dy) - (long)pad;
                const long ix = (long)(xx * stride + dx) - (long)pad;
                if (iy < 0 || ix < 0 || iy >= (long)H || ix >= (long)W) continue;
                s += (long double)x[((b * C + c) * H + iy) * W + ix] *
                     k[((o * C + c) * ks + dy) * ks + dx];
              }
          out[((b * K + o) * oh + y) * ow + xx] = (double)s;
        }
  return out;
}

inline double cross_entropy(const std::vector<double>& logits, const std::vector<int>& y,
                            std::size_t classes) {
  const std::size_t n = y.size();
  long double total = 0;
  for (std::size_t r = 0; r < n; ++r) {
    long double mx = logits[r * classes];
    for (std::size_t c = 1; c < classes; ++c) mx = std::max<long double>(mx, logits[r * classes + c]);
    long double z = 0;
    for (std::size_t c = 0; c < classes; ++c) z += std::exp((long double)logits[r * classes + c] - mx);
    total += -((long double)logits[r * classes + y[r]] - mx - std::log(z));
  }
  return (double)(total / n);
}

inline std::vector<double> softmax(const std::vector<double>& logits, std::size_t classes) {
  std::vector<double> out(logits.size());
  for (std::size_t r = 0; r < logits.size() / classes; ++r) {
    long double z = 0;
    for (std::size_t c = 0; c < classes; ++c) z += std::exp((long double)logits[r * classes + c]);
    for (std::size_t c = 0; c < classes; ++c)
      out[r * classes + c] = (double)(std::exp((long double)logits[r * classes + c]) / z);
  }
  return out;
}

inline long double dist(const std::vector<double>& a, std::size_t i, const std::vector<double>& b,
                        std::size_t j, std::size_t z) {
  long double s = 0;
  for (std::size_t k = 0; k < z; ++k) {
    const long double d = (long double)a[i * z + k] - b[j * z + k];
    s += d * d;
  }
  return std::sqrt(s);
}

struct Csa {
  double sa = 0, s = 0;
};

// Pair (i, perm[i]); same labels feed L_SA, different labels feed L_S; mean per term.
inline Csa csa(const std::vector<double>& clean, const std::vector<double>& aug,
               const std::vector<int>& y_clean, const std::vector<int>& y_aug,
               const std::vector<std::size_t>& perm, std::size_t z, double margin) {
  long double sa = 0, s = 0;
  std::size_t n_sa = 0, n_s = 0;
  for (std::size_t i = 0; i < y_clean.size(); ++i) {
    const std::size_t j = perm[i];
    const long double d = dist(clean, i, aug, j, z);
    if (y_clean[i] == y_aug[j]) {
      sa += 0.5L * d * d;
      ++n_sa;
    } else {
      const long double h = std::max<long double>(0, margin - d);
      s += 0.5L * h * h;
      ++n_s;
    }
  }
  return {n_sa ? (double)(sa / n_sa) : 0.0, n_s ? (double)(s / n_s) : 0.0};
}

// SupCon with self-exclusion; anchors without positives are skipped.
inline double supcon(const std::vector<double>& f, const std::vector<int>& y, std::size_t z, double t) {
  const std::size_t n = y.size();
  std::vector<long double> u(f.size());
  for (std::size_t i = 0; i < n; ++i) {
    long double norm = 0;
    for (std::size_t k = 0; k < z; ++k) norm += (long double)f[i * z + k] * f[i * z + k];
    norm = std::sqrt(norm);
    for (std::size_t k = 0; k < z; ++k) u[i * z + k] = f[i * z + k] / norm;
  }
  auto sim = [&](std::size_t i, std::size_t j) {
    long double s = 0;
    for (std::size_t k = 0; k < z; ++k) s += u[i * z + k] * u[j * z + k];
    return s / t;
  };
  long double total = 0;
  std::size_t anchors = 0;
  for (std::size_t i = 0; i < n; ++i) {
    long double denom = 0;
    std::size_t pos = 0;
    for (std::size_t a = 0; a < n; ++a)
      if (a != i) denom += std::exp(sim(i, a));
    long double li = 0;
    for (std::size_t p = 0; p < n; ++p) {
      if (p == i || y[p] != y[i]) continue;
      li += -(sim(i, p) - std::log(denom));
      ++pos;
    }
    if (!pos) continue;
    total += li / pos;
    ++anchors;
  }
  return anchors ? (double)(total / anchors) : 0.0;
}

// Mean over rows of (1/3) sum_v KL(p_v || M), floor 1e-12 inside logs.
inline double jsd(const std::vector<double>& a, const std::vector<double>& b,
                  const std::vector<double>& c, std::size_t classes) {
  const std::size_t n = a.size() / classes;
  auto lg = [](long double v) { return std::log(std::max<long double>(v, 1e-12L)); };
  long double total = 0;
  for (std::size_t r = 0; r < n; ++r) {
    long double row = 0;
    for (std::size_t k = 0; k < classes; ++k) {
      const std::size_t i = r * classes + k;
      const long double m = ((long double)a[i] + b[i] + c[i]) / 3;
      for (long double p : {(long double)a[i], (long double)b[i], (long double)c[i]}) {
        row += p * (lg(p) - lg(m));
      }
    }
    total += row / 3;
  }
  return (double)(total / n);
}

struct Pairwise {
  double same = 0, diff = 0;
};

inline Pairwise pairwise(const std::vector<double>& clean, const std::vector<double>& aug,
                         const std::vector<int>& y, std::size_t z) {
  long double s = 0, d = 0;
  std::size_t ns = 0, nd = 0;
  for (std::size_t i = 0; i < y.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j) {
      const long double r = dist(clean, i, aug, j, z);
      if (y[i] == y[j]) {
        s += r;
        ++ns;
      } else {
        d += r;
        ++nd;
      }
    }
  return {ns ? (double)(s / ns) : NAN, nd ? (double)(d / nd) : NAN};
}

// Durstenfeld shuffle driven by the same uniform_index stream.
inline std::vector<std::size_t> fisher_yates(std::size_t n, csa::Rng& rng) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.uniform_index(i);
    const std::size_t tmp = p[i - 1];
    p[i - 1] = p[j];
    p[j] = tmp;
  }
  return p;
}

// Big-endian IDX writer, byte by byte.
inline void put_be32(std::ofstream& out, std::uint32_t v) {
  const unsigned char b[4] = {(unsigned char)(v >> 24), (unsigned char)(v >> 16),
                              (unsigned char)(v >> 8), (unsigned char)v};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_idx_images(const std::string& path, const std::vector<unsigned char>& px,
                             std::uint32_t count, std::uint32_t rows, std::uint32_t cols,
                             std::uint32_t magic = 0x00000803) {
  std::ofstream out(path, std::ios::binary);
  put_be32(out, magic);
  put_be32(out, count);
  put_be32(out, rows);
  put_be32(out, cols);
  out.write(reinterpret_cast<const char*>(px.data()), (std::streamsize)px.size());
}

inline void write_idx_labels(const std::string& path, const std::vector<unsigned char>& labels,
                             std::uint32_t magic = 0x00000801) {
  std::ofstream out(path, std::ios::binary);
  put_be32(out, magic);
  put_be32(out, (std::uint32_t)labels.size());
  out.write(reinterpret_cast<const char*>(labels.data()), (std::streamsize)labels.size());
}

}  // namespace oracle

#endif  // CSA_TESTS_ORACLES_HPP
