#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "tgmc/errors.hpp"
#include "tgmc/optim.hpp"

namespace tgmc {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t entries_checked = 0;

  bool passed(double tolerance = 1e-5) const { return max_relative_error < tolerance; }
};

/// Compares the analytic gradients stored in each `ParamRef::grad` against
/// central differences of `loss` (step `h`). Per entry the error is
/// |a - n| / max(1, |a|, |n|); the maximum over all entries is returned.
/// `loss` must read the current parameter values; they are restored after
/// each probe.
template <typename Loss>
GradCheckResult gradient_check(Loss&& loss, const std::vector<ParamRef<double>>& params,
                               double h = 1e-5) {
  GradCheckResult result;
  auto eval = [&]() {
    const double v = loss();
    if (!std::isfinite(v)) throw NonFiniteError("gradient_check: loss is not finite");
    return v;
  };
  eval();
  for (const auto& p : params) {
    if (!p.value->same_shape(*p.grad)) throw ShapeError("gradient_check: shape mismatch in " + p.name);
    auto values = p.value->flat();
    auto grads = p.grad->flat();
    for (std::size_t e = 0; e < values.size(); ++e) {
      const double saved = values[e];
      values[e] = saved + h;
      const double up = eval();
      values[e] = saved - h;
      const double down = eval();
      values[e] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = grads[e];
      const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
      const double err = std::abs(analytic - numeric) / denom;
      ++result.entries_checked;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_param = p.name;
        result.worst_index = e;
      }
    }
  }
  return result;
}

}  // namespace tgmc
