#ifndef CSA_NN_MODULE_HPP
#define CSA_NN_MODULE_HPP

#include <cmath>
#include <cstddef>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "csa/errors.hpp"
#include "csa/nn/ops.hpp"
#include "csa/random.hpp"

namespace csa::nn {

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

class Module {
 public:
  virtual ~Module() = default;
  virtual Tensor forward(const Tensor& input) const = 0;
  virtual void collect(const std::string& prefix, std::vector<NamedParameter>& out) const {
    (void)prefix;
    (void)out;
  }

  /// Parameters in registration order; names are checked for uniqueness.
  std::vector<NamedParameter> parameters(const std::string& prefix = "") const {
    std::vector<NamedParameter> out;
    collect(prefix, out);
    std::set<std::string> names;
    for (const auto& p : out) {
      if (!names.insert(p.name).second) {
        throw ConfigError("duplicate parameter name '" + p.name + "'");
      }
    }
    return out;
  }
};

namespace detail {
inline std::string join(const std::string& prefix, const std::string& name) {
  return prefix.empty() ? name : prefix + "." + name;
}

// PyTorch-style default: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
inline Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> v(shape_size(shape));
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return Tensor::from(std::move(shape), std::move(v), true);
}
}  // namespace detail

class Linear : public Module {
 public:
  Linear(std::size_t in, std::size_t out, Rng& rng)
      : weight_(detail::uniform_init({in, out}, in, rng)),
        bias_(detail::uniform_init({out}, in, rng)) {}
  Linear(Tensor weight, Tensor bias) : weight_(std::move(weight)), bias_(std::move(bias)) {}

  Tensor forward(const Tensor& input) const override { return linear(input, weight_, bias_); }
  void collect(const std::string& prefix, std::vector<NamedParameter>& out) const override {
    out.push_back({detail::join(prefix, "weight"), weight_});
    out.push_back({detail::join(prefix, "bias"), bias_});
  }
  std::size_t in_features() const { return weight_.dim(0); }
  std::size_t out_features() const { return weight_.dim(1); }

 private:
  Tensor weight_;
  Tensor bias_;
};

class Conv2d : public Module {
 public:
  Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
         std::size_t padding, Rng& rng)
      : weight_(detail::uniform_init({out_channels, in_channels, kernel, kernel},
                                     in_channels * kernel * kernel, rng)),
        bias_(detail::uniform_init({out_channels}, in_channels * kernel * kernel, rng)),
        stride_(stride),
        padding_(padding) {}

  Tensor forward(const Tensor& input) const override {
    return conv2d(input, weight_, bias_, stride_, padding_);
  }
  void collect(const std::string& prefix, std::vector<NamedParameter>& out) const override {
    out.push_back({detail::join(prefix, "weight"), weight_});
    out.push_back({detail::join(prefix, "bias"), bias_});
  }

 private:
  Tensor weight_;
  Tensor bias_;
  std::size_t stride_;
  std::size_t padding_;
};

class ReLU : public Module {
 public:
  Tensor forward(const Tensor& input) const override { return relu(input); }
};

class Flatten : public Module {
 public:
  Tensor forward(const Tensor& input) const override { return flatten(input); }
};

class Sequential : public Module {
 public:
  Sequential() = default;
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  template <class Layer, class... Args>
  Sequential& add(Args&&... args) {
    layers_.push_back(std::make_unique<Layer>(std::forward<Args>(args)...));
    return *this;
  }

  Tensor forward(const Tensor& input) const override {
    Tensor x = input;
    for (const auto& layer : layers_) x = layer->forward(x);
    return x;
  }

  void collect(const std::string& prefix, std::vector<NamedParameter>& out) const override {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      layers_[i]->collect(detail::join(prefix, std::to_string(i)), out);
    }
  }

  std::size_t depth() const { return layers_.size(); }

 private:
  std::vector<std::unique_ptr<Module>> layers_;
};

/// Fully connected stack; ReLU after every layer when `final_relu`, otherwise
/// between layers only.
inline Sequential make_mlp(const std::vector<std::size_t>& widths, bool final_relu, Rng& rng) {
  if (widths.size() < 2) throw ConfigError("mlp needs at least input and output widths");
  Sequential net;
  net.add<Flatten>();
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    net.add<Linear>(widths[i], widths[i + 1], rng);
    if (final_relu || i + 2 < widths.size()) net.add<ReLU>();
  }
  return net;
}

/// 3x3 conv blocks; every block after the first halves the spatial extent.
/// Ends with a ReLU'd linear embedding of width `embedding`.
inline Sequential make_small_cnn(std::size_t in_channels, std::size_t height, std::size_t width,
                                 const std::vector<std::size_t>& channels, std::size_t embedding,
                                 Rng& rng) {
  if (channels.empty()) throw ConfigError("small-cnn needs at least one channel count");
  Sequential net;
  std::size_t c = in_channels, h = height, w = width;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    const std::size_t stride = i == 0 ? 1 : 2;
    net.add<Conv2d>(c, channels[i], 3, stride, 1, rng);
    net.add<ReLU>();
    c = channels[i];
    h = (h + 2 - 3) / stride + 1;
    w = (w + 2 - 3) / stride + 1;
  }
  net.add<Flatten>();
  net.add<Linear>(c * h * w, embedding, rng);
  net.add<ReLU>();
  return net;
}

}  // namespace csa::nn

#endif  // CSA_NN_MODULE_HPP
