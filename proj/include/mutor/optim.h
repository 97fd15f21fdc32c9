#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mutor/tensor.h"

namespace mutor {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// Raised before any parameter is touched when a gradient entry is NaN/inf.
class NonFiniteGradient : public std::runtime_error {
 public:
  NonFiniteGradient(std::string param, std::size_t index)
      : std::runtime_error("non-finite gradient in '" + param + "' at index " + std::to_string(index)),
        param_(std::move(param)),
        index_(index) {}
  const std::string& param() const { return param_; }
  std::size_t index() const { return index_; }

 private:
  std::string param_;
  std::size_t index_;
};

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::uint64_t step = 0;
};

// Decoupled-weight-decay Adam with bias correction:
//   m = b1 m + (1 - b1) g,  v = b2 v + (1 - b2) g^2
//   p -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)
// Parameters without a gradient buffer are treated as having g = 0.
template <typename T>
void adamw_step(const std::vector<NamedTensor<T>>& params, AdamState<T>& state, double lr,
                const AdamWConfig& config);

// Global L2 norm of all gradients, accumulated in double.
template <typename T>
double grad_norm(const std::vector<NamedTensor<T>>& params);

// Scales all gradients so their global norm is at most max_norm.
template <typename T>
void clip_grad_norm(const std::vector<NamedTensor<T>>& params, double max_norm);

}  // namespace mutor
