#ifndef CSA_NN_OPTIM_HPP
#define CSA_NN_OPTIM_HPP

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "csa/errors.hpp"
#include "csa/nn/module.hpp"

namespace csa::nn {

struct SgdConfig {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 5e-4;
};

/// Shared bookkeeping: parameter list, one or two buffers per parameter, step count.
class Optimizer {
 public:
  explicit Optimizer(std::vector<NamedParameter> params) : params_(std::move(params)) {}
  virtual ~Optimizer() = default;

  virtual void step() = 0;
  virtual void set_lr(double lr) = 0;
  virtual double lr() const = 0;

  void zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
  }
  std::size_t steps() const { return steps_; }
  const std::vector<NamedParameter>& parameters() const { return params_; }

 protected:
  void require_gradients() const {
    for (const auto& p : params_) {
      if (!p.tensor.has_grad()) {
        throw ContractError("optimizer step: parameter '" + p.name + "' has no gradient");
      }
    }
  }

  static std::vector<std::vector<double>> zero_buffers(const std::vector<NamedParameter>& params) {
    std::vector<std::vector<double>> out;
    out.reserve(params.size());
    for (const auto& p : params) out.emplace_back(p.tensor.size(), 0.0);
    return out;
  }

  std::vector<NamedParameter> params_;
  std::size_t steps_ = 0;
};

/// v <- mu * v + (grad + wd * param); param <- param - lr * v
class Sgd : public Optimizer {
 public:
  Sgd(std::vector<NamedParameter> params, SgdConfig cfg)
      : Optimizer(std::move(params)), cfg_(cfg), velocity_(zero_buffers(params_)) {}

  void step() override {
    require_gradients();
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto value = params_[k].tensor.values();
      const auto grad = std::as_const(params_[k].tensor).grad();
      auto& v = velocity_[k];
      for (std::size_t i = 0; i < value.size(); ++i) {
        v[i] = cfg_.momentum * v[i] + grad[i] + cfg_.weight_decay * value[i];
        value[i] -= cfg_.lr * v[i];
      }
    }
    ++steps_;
  }

  void set_lr(double lr) override { cfg_.lr = lr; }
  double lr() const override { return cfg_.lr; }
  const SgdConfig& config() const { return cfg_; }
  const std::vector<std::vector<double>>& velocity() const { return velocity_; }

 private:
  SgdConfig cfg_;
  std::vector<std::vector<double>> velocity_;
};

/// Bias-corrected Adam with classic (gradient-coupled) L2 weight decay.
class Adam : public Optimizer {
 public:
  Adam(std::vector<NamedParameter> params, AdamConfig cfg)
      : Optimizer(std::move(params)),
        cfg_(cfg),
        first_(zero_buffers(params_)),
        second_(zero_buffers(params_)) {}

  void step() override {
    require_gradients();
    ++steps_;
    const double t = static_cast<double>(steps_);
    const double c1 = 1.0 - std::pow(cfg_.beta1, t);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t);
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto value = params_[k].tensor.values();
      const auto grad = std::as_const(params_[k].tensor).grad();
      auto& m = first_[k];
      auto& v = second_[k];
      for (std::size_t i = 0; i < value.size(); ++i) {
        const double g = grad[i] + cfg_.weight_decay * value[i];
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
        const double m_hat = m[i] / c1;
        const double v_hat = v[i] / c2;
        value[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
      }
    }
  }

  void set_lr(double lr) override { cfg_.lr = lr; }
  double lr() const override { return cfg_.lr; }
  const AdamConfig& config() const { return cfg_; }
  const std::vector<std::vector<double>>& first_moment() const { return first_; }
  const std::vector<std::vector<double>>& second_moment() const { return second_; }

 private:
  AdamConfig cfg_;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
};

/// base_lr * (1 + cos(pi * epoch / total)) / 2
inline double cosine_anneal_lr(double base_lr, std::size_t epoch, std::size_t total_epochs) {
  if (epoch > total_epochs) {
    throw ContractError("cosine_anneal_lr: epoch " + std::to_string(epoch) + " beyond total " +
                        std::to_string(total_epochs));
  }
  if (total_epochs == 0) return base_lr;
  const double phase = static_cast<double>(epoch) / static_cast<double>(total_epochs);
  return base_lr * (1.0 + std::cos(std::numbers::pi * phase)) / 2.0;
}

/// base_lr * factor^floor(epoch / period)
inline double step_decay_lr(double base_lr, std::size_t epoch, std::size_t period, double factor) {
  if (period < 1) throw ContractError("step_decay_lr: period must be >= 1");
  return base_lr * std::pow(factor, static_cast<double>(epoch / period));
}

}  // namespace csa::nn

#endif  // CSA_NN_OPTIM_HPP
