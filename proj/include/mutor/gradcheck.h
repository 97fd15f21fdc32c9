#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mutor/tensor.h"

namespace mutor {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

// Compares reverse-mode gradients of a scalar graph against five-point
// central differences, coordinate by coordinate. Per coordinate the error is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8); the report holds
// the maximum. Run it with T = double for a 64-bit oracle. Never throws on
// disagreement; it only reports.
template <typename T>
GradCheckReport grad_check(const std::function<BasicTensor<T>(BasicTape<T>&)>& f,
                           const std::vector<NamedTensor<T>>& params, double h) {
  for (auto p : params) p.tensor.zero_grad();
  {
    BasicTape<T> tape;
    BasicTensor<T> out = f(tape);
    tape.backward(out);
  }
  auto eval = [&]() {
    BasicTape<T> tape(false);
    return double(f(tape).item());
  };
  GradCheckReport report;
  for (auto p : params) {
    auto w = p.tensor.data();
    const bool has = p.tensor.has_grad();
    std::vector<T> analytic(w.size(), T(0));
    if (has) {
      auto g = p.tensor.grad();
      std::copy(g.begin(), g.end(), analytic.begin());
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      const T saved = w[i];
      auto at = [&](double step) {
        w[i] = T(double(saved) + step);
        return eval();
      };
      const double numeric = (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h);
      w[i] = saved;
      const double a = double(analytic[i]);
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double err = std::abs(a - numeric) / denom;
      ++report.coordinates;
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_param = p.name;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace mutor
