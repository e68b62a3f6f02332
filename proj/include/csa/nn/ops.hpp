#ifndef CSA_NN_OPS_HPP
#define CSA_NN_OPS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "csa/errors.hpp"
#include "csa/nn/tensor.hpp"

namespace csa::nn {

namespace detail {

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

inline void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* what) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": " + what + " must have rank " +
                         std::to_string(rank) + ", got shape " + shape_string(t.shape()));
  }
}

inline void accumulate(Node& into, std::span<const double> delta, double scale = 1.0) {
  if (!into.requires_grad) return;
  for (std::size_t i = 0; i < delta.size(); ++i) into.grad[i] += scale * delta[i];
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return make_result(a.shape(), std::move(out), "add", {a, b}, [](detail::Node& n) {
    detail::accumulate(*n.inputs[0], n.grad);
    detail::accumulate(*n.inputs[1], n.grad);
  });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return make_result(a.shape(), std::move(out), "sub", {a, b}, [](detail::Node& n) {
    detail::accumulate(*n.inputs[0], n.grad);
    detail::accumulate(*n.inputs[1], n.grad, -1.0);
  });
}

inline Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = factor * a[i];
  return make_result(a.shape(), std::move(out), "scale", {a}, [factor](detail::Node& n) {
    detail::accumulate(*n.inputs[0], n.grad, factor);
  });
}

/// Elementwise product.
inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return make_result(a.shape(), std::move(out), "mul", {a, b}, [](detail::Node& n) {
    auto& x = *n.inputs[0];
    auto& y = *n.inputs[1];
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      if (x.requires_grad) x.grad[i] += n.grad[i] * y.value[i];
      if (y.requires_grad) y.grad[i] += n.grad[i] * x.value[i];
    }
  });
}

inline Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  return make_result(Shape{}, {total}, "sum", {a}, [](detail::Node& n) {
    auto& x = *n.inputs[0];
    if (!x.requires_grad) return;
    for (double& g : x.grad) g += n.grad[0];
  });
}

inline Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw ContractError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

inline Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    throw DimensionError("reshape: cannot view " + shape_string(a.shape()) + " as " +
                         shape_string(shape));
  }
  std::vector<double> out(a.values().begin(), a.values().end());
  return make_result(std::move(shape), std::move(out), "reshape", {a}, [](detail::Node& n) {
    detail::accumulate(*n.inputs[0], n.grad);
  });
}

/// Collapses every axis after the first: [B, ...] -> [B, prod(...)].
inline Tensor flatten(const Tensor& a) {
  if (a.rank() < 1) throw DimensionError("flatten: scalar input");
  const std::size_t batch = a.dim(0);
  return reshape(a, Shape{batch, batch ? a.size() / batch : 0});
}

/// Stacks two [N, D] and [M, D] matrices into [N+M, D].
inline Tensor concat_rows(const Tensor& a, const Tensor& b) {
  detail::require_rank(a, 2, "concat_rows", "first input");
  detail::require_rank(b, 2, "concat_rows", "second input");
  if (a.dim(1) != b.dim(1)) {
    throw DimensionError("concat_rows: width mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  std::vector<double> out(a.values().begin(), a.values().end());
  out.insert(out.end(), b.values().begin(), b.values().end());
  const std::size_t split = a.size();
  return make_result(Shape{a.dim(0) + b.dim(0), a.dim(1)}, std::move(out), "concat_rows", {a, b},
                     [split](detail::Node& n) {
                       std::span<const double> g(n.grad);
                       detail::accumulate(*n.inputs[0], g.subspan(0, split));
                       detail::accumulate(*n.inputs[1], g.subspan(split));
                     });
}

/// output[b][o] = sum_i input[b][i] * weights[i][o] + bias[o]
inline Tensor linear(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  detail::require_rank(input, 2, "linear", "input");
  detail::require_rank(weights, 2, "linear", "weights");
  detail::require_rank(bias, 1, "linear", "bias");
  const std::size_t batch = input.dim(0), in = input.dim(1), out_dim = weights.dim(1);
  if (weights.dim(0) != in) {
    throw DimensionError("linear: input width " + std::to_string(in) +
                         " does not match weight rows " + std::to_string(weights.dim(0)));
  }
  if (bias.dim(0) != out_dim) {
    throw DimensionError("linear: bias length " + std::to_string(bias.dim(0)) +
                         " does not match output width " + std::to_string(out_dim));
  }
  std::vector<double> out(batch * out_dim);
  const auto x = input.values();
  const auto w = weights.values();
  const auto c = bias.values();
  for (std::size_t b = 0; b < batch; ++b) {
    double* row = out.data() + b * out_dim;
    for (std::size_t o = 0; o < out_dim; ++o) row[o] = c[o];
    for (std::size_t i = 0; i < in; ++i) {
      const double xv = x[b * in + i];
      const double* wrow = w.data() + i * out_dim;
      for (std::size_t o = 0; o < out_dim; ++o) row[o] += xv * wrow[o];
    }
  }
  return make_result(
      Shape{batch, out_dim}, std::move(out), "linear", {input, weights, bias},
      [batch, in, out_dim](detail::Node& n) {
        auto& xn = *n.inputs[0];
        auto& wn = *n.inputs[1];
        auto& bn = *n.inputs[2];
        const double* g = n.grad.data();
        for (std::size_t b = 0; b < batch; ++b) {
          const double* grow = g + b * out_dim;
          for (std::size_t i = 0; i < in; ++i) {
            const double* wrow = wn.value.data() + i * out_dim;
            if (xn.requires_grad) {
              double acc = 0.0;
              for (std::size_t o = 0; o < out_dim; ++o) acc += grow[o] * wrow[o];
              xn.grad[b * in + i] += acc;
            }
            if (wn.requires_grad) {
              const double xv = xn.value[b * in + i];
              double* gw = wn.grad.data() + i * out_dim;
              for (std::size_t o = 0; o < out_dim; ++o) gw[o] += xv * grow[o];
            }
          }
          if (bn.requires_grad) {
            for (std::size_t o = 0; o < out_dim; ++o) bn.grad[o] += grow[o];
          }
        }
      });
}

/// Cross-correlation (no kernel flip). Output extent floor((H + 2p - k) / stride) + 1.
inline Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                     std::size_t stride = 1, std::size_t padding = 0) {
  detail::require_rank(input, 4, "conv2d", "input");
  detail::require_rank(kernels, 4, "conv2d", "kernels");
  detail::require_rank(bias, 1, "conv2d", "bias");
  if (stride < 1) throw ContractError("conv2d: stride must be >= 1");
  const std::size_t batch = input.dim(0), channels = input.dim(1), height = input.dim(2),
                    width = input.dim(3);
  const std::size_t filters = kernels.dim(0), kh = kernels.dim(2), kw = kernels.dim(3);
  if (kernels.dim(1) != channels) {
    throw DimensionError("conv2d: input has " + std::to_string(channels) +
                         " channels but kernels expect " + std::to_string(kernels.dim(1)));
  }
  if (bias.dim(0) != filters) {
    throw DimensionError("conv2d: bias length " + std::to_string(bias.dim(0)) + " for " +
                         std::to_string(filters) + " filters");
  }
  if (kh > height + 2 * padding || kw > width + 2 * padding) {
    throw DimensionError("conv2d: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                         " larger than padded input");
  }
  const std::size_t oh = (height + 2 * padding - kh) / stride + 1;
  const std::size_t ow = (width + 2 * padding - kw) / stride + 1;
  const long pad = static_cast<long>(padding);

  const auto x = input.values();
  const auto k = kernels.values();
  const auto bv = bias.values();
  std::vector<double> out(batch * filters * oh * ow);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t f = 0; f < filters; ++f) {
      double* plane = out.data() + (b * filters + f) * oh * ow;
      for (std::size_t i = 0; i < oh * ow; ++i) plane[i] = bv[f];
      for (std::size_t c = 0; c < channels; ++c) {
        const double* src = x.data() + (b * channels + c) * height * width;
        const double* ker = k.data() + (f * channels + c) * kh * kw;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          for (std::size_t ky = 0; ky < kh; ++ky) {
            const long iy = static_cast<long>(oy * stride + ky) - pad;
            if (iy < 0 || iy >= static_cast<long>(height)) continue;
            for (std::size_t ox = 0; ox < ow; ++ox) {
              double acc = 0.0;
              for (std::size_t kx = 0; kx < kw; ++kx) {
                const long ix = static_cast<long>(ox * stride + kx) - pad;
                if (ix < 0 || ix >= static_cast<long>(width)) continue;
                acc += src[iy * width + ix] * ker[ky * kw + kx];
              }
              plane[oy * ow + ox] += acc;
            }
          }
        }
      }
    }
  }

  return make_result(
      Shape{batch, filters, oh, ow}, std::move(out), "conv2d", {input, kernels, bias},
      [=](detail::Node& n) {
        auto& xn = *n.inputs[0];
        auto& kn = *n.inputs[1];
        auto& bn = *n.inputs[2];
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t f = 0; f < filters; ++f) {
            const double* g = n.grad.data() + (b * filters + f) * oh * ow;
            if (bn.requires_grad) {
              for (std::size_t i = 0; i < oh * ow; ++i) bn.grad[f] += g[i];
            }
            for (std::size_t c = 0; c < channels; ++c) {
              const std::size_t src_off = (b * channels + c) * height * width;
              const std::size_t ker_off = (f * channels + c) * kh * kw;
              for (std::size_t oy = 0; oy < oh; ++oy) {
                for (std::size_t ky = 0; ky < kh; ++ky) {
                  const long iy = static_cast<long>(oy * stride + ky) - pad;
                  if (iy < 0 || iy >= static_cast<long>(height)) continue;
                  for (std::size_t ox = 0; ox < ow; ++ox) {
                    const double go = g[oy * ow + ox];
                    for (std::size_t kx = 0; kx < kw; ++kx) {
                      const long ix = static_cast<long>(ox * stride + kx) - pad;
                      if (ix < 0 || ix >= static_cast<long>(width)) continue;
                      const std::size_t xi = src_off + iy * width + ix;
                      const std::size_t ki = ker_off + ky * kw + kx;
                      if (kn.requires_grad) kn.grad[ki] += go * xn.value[xi];
                      if (xn.requires_grad) xn.grad[xi] += go * kn.value[ki];
                    }
                  }
                }
              }
            }
          }
        }
      });
}

/// max(0, x); the subgradient at 0 is 0.
inline Tensor relu(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
  return make_result(a.shape(), std::move(out), "relu", {a}, [](detail::Node& n) {
    auto& x = *n.inputs[0];
    if (!x.requires_grad) return;
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      if (x.value[i] > 0.0) x.grad[i] += n.grad[i];
    }
  });
}

/// Row-wise softmax of a [B, C] matrix, max-subtracted.
inline Tensor softmax(const Tensor& logits) {
  detail::require_rank(logits, 2, "softmax", "logits");
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  std::vector<double> out(logits.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* z = logits.values().data() + r * cols;
    double* p = out.data() + r * cols;
    const double peak = *std::max_element(z, z + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) total += (p[c] = std::exp(z[c] - peak));
    for (std::size_t c = 0; c < cols; ++c) p[c] /= total;
  }
  return make_result(logits.shape(), std::move(out), "softmax", {logits},
                     [rows, cols](detail::Node& n) {
                       auto& z = *n.inputs[0];
                       if (!z.requires_grad) return;
                       for (std::size_t r = 0; r < rows; ++r) {
                         const double* p = n.value.data() + r * cols;
                         const double* g = n.grad.data() + r * cols;
                         double dot = 0.0;
                         for (std::size_t c = 0; c < cols; ++c) dot += g[c] * p[c];
                         for (std::size_t c = 0; c < cols; ++c) {
                           z.grad[r * cols + c] += p[c] * (g[c] - dot);
                         }
                       }
                     });
}

inline void check_labels(std::span<const int> labels, std::size_t batch, std::size_t classes,
                         const char* op) {
  if (labels.size() != batch) {
    throw DimensionError(std::string(op) + ": " + std::to_string(labels.size()) +
                         " labels for batch of " + std::to_string(batch));
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw IndexError(std::string(op) + ": label " + std::to_string(labels[i]) + " at row " +
                       std::to_string(i) + " outside [0, " + std::to_string(classes) + ")");
    }
  }
}

/// Mean over the batch of -log softmax(logits)[label].
inline Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  detail::require_rank(logits, 2, "softmax_cross_entropy", "logits");
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  check_labels(labels, rows, cols, "softmax_cross_entropy");
  if (rows == 0) throw ContractError("softmax_cross_entropy: empty batch");
  std::vector<double> probs(logits.size());
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* z = logits.values().data() + r * cols;
    double* p = probs.data() + r * cols;
    const double peak = *std::max_element(z, z + cols);
    double denom = 0.0;
    for (std::size_t c = 0; c < cols; ++c) denom += (p[c] = std::exp(z[c] - peak));
    for (std::size_t c = 0; c < cols; ++c) p[c] /= denom;
    total += std::log(denom) - (z[labels[r]] - peak);
  }
  std::vector<int> targets(labels.begin(), labels.end());
  return make_result(Shape{}, {total / static_cast<double>(rows)}, "softmax_cross_entropy",
                     {logits},
                     [rows, cols, probs = std::move(probs), targets = std::move(targets)](
                         detail::Node& n) {
                       auto& z = *n.inputs[0];
                       if (!z.requires_grad) return;
                       const double g = n.grad[0] / static_cast<double>(rows);
                       for (std::size_t r = 0; r < rows; ++r) {
                         for (std::size_t c = 0; c < cols; ++c) {
                           const double onehot = static_cast<int>(c) == targets[r] ? 1.0 : 0.0;
                           z.grad[r * cols + c] += g * (probs[r * cols + c] - onehot);
                         }
                       }
                     });
}

}  // namespace csa::nn

#endif  // CSA_NN_OPS_HPP
