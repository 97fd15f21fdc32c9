#include "mutor/optim.h"

#include <cmath>

namespace mutor {

template <typename T>
void adamw_step(const std::vector<NamedTensor<T>>& params, AdamState<T>& state, double lr,
                const AdamWConfig& config) {
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    auto g = p.tensor.grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) throw NonFiniteGradient(p.name, i);
    }
  }
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), {});
    state.v.assign(params.size(), {});
    for (std::size_t k = 0; k < params.size(); ++k) {
      state.m[k].assign(params[k].tensor.numel(), T(0));
      state.v[k].assign(params[k].tensor.numel(), T(0));
    }
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);
  const double b1 = config.beta1, b2 = config.beta2;
  for (std::size_t k = 0; k < params.size(); ++k) {
    BasicTensor<T> tensor = params[k].tensor;
    auto w = tensor.data();
    const bool has = tensor.has_grad();
    std::span<const T> g;
    if (has) g = tensor.grad();
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = has ? double(g[i]) : 0.0;
      const double mi = b1 * double(m[i]) + (1.0 - b1) * gi;
      const double vi = b2 * double(v[i]) + (1.0 - b2) * gi * gi;
      m[i] = T(mi);
      v[i] = T(vi);
      const double update = (mi / bc1) / (std::sqrt(vi / bc2) + config.eps) + config.weight_decay * double(w[i]);
      w[i] = T(double(w[i]) - lr * update);
    }
  }
}

template <typename T>
double grad_norm(const std::vector<NamedTensor<T>>& params) {
  double ss = 0;
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (T g : p.tensor.grad()) ss += double(g) * double(g);
  }
  return std::sqrt(ss);
}

template <typename T>
void clip_grad_norm(const std::vector<NamedTensor<T>>& params, double max_norm) {
  const double norm = grad_norm(params);
  if (!(norm > max_norm)) return;
  const T scale = T(max_norm / norm);
  for (auto p : params) {
    if (!p.tensor.has_grad()) continue;
    for (T& g : p.tensor.grad()) g *= scale;
  }
}

template void adamw_step(const std::vector<NamedTensor<float>>&, AdamState<float>&, double, const AdamWConfig&);
template void adamw_step(const std::vector<NamedTensor<double>>&, AdamState<double>&, double, const AdamWConfig&);
template double grad_norm(const std::vector<NamedTensor<float>>&);
template double grad_norm(const std::vector<NamedTensor<double>>&);
template void clip_grad_norm(const std::vector<NamedTensor<float>>&, double);
template void clip_grad_norm(const std::vector<NamedTensor<double>>&, double);

}  // namespace mutor
