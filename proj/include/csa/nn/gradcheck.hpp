#ifndef CSA_NN_GRADCHECK_HPP
#define CSA_NN_GRADCHECK_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "csa/nn/module.hpp"

namespace csa::nn {

struct GradcheckEntry {
  std::string parameter;
  double max_relative_error = 0.0;
  bool finite = true;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  double tolerance = 0.0;
  bool passed = true;

  double worst() const {
    double w = 0.0;
    for (const auto& e : entries) {
      w = std::max(w, e.finite ? e.max_relative_error : std::numeric_limits<double>::infinity());
    }
    return w;
  }
};

/// Elementwise |a - n| / max(|a|, |n|, floor). The floor keeps entries whose true
/// gradient is ~0 from reporting roundoff as a large relative error.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

/// Compares analytic gradients from backward() against central differences
/// (f(p + h) - f(p - h)) / 2h for every element of every parameter.
/// `loss_fn` must rebuild the graph from the current parameter values on each call.
inline GradcheckReport finite_diff_gradcheck(const std::function<Tensor()>& loss_fn,
                                             std::span<const NamedParameter> params,
                                             double step = 1e-5, double tolerance = 1e-4) {
  GradcheckReport report;
  report.tolerance = tolerance;

  for (const auto& p : params) {
    Tensor t = p.tensor;
    t.zero_grad();
  }
  const Tensor loss = loss_fn();
  if (!std::isfinite(loss.item())) {
    for (const auto& p : params) report.entries.push_back({p.name, 0.0, false});
    report.passed = false;
    return report;
  }
  backward(loss);

  for (const auto& p : params) {
    Tensor t = p.tensor;
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    GradcheckEntry entry{p.name, 0.0, true};
    auto values = t.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      const double up = loss_fn().item();
      values[i] = saved - step;
      const double down = loss_fn().item();
      values[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down) || !std::isfinite(analytic[i])) {
        entry.finite = false;
        continue;
      }
      const double numeric = (up - down) / (2.0 * step);
      entry.max_relative_error =
          std::max(entry.max_relative_error, relative_error(analytic[i], numeric));
    }
    if (!entry.finite || entry.max_relative_error > tolerance) report.passed = false;
    report.entries.push_back(entry);
  }
  return report;
}

}  // namespace csa::nn

#endif  // CSA_NN_GRADCHECK_HPP
