#pragma once

#include <cmath>
#include <cstdint>

#include "fskws/nn/encoder.hpp"

namespace fskws::nn {

// Adam with bias correction. Moment tensors are laid out to match the
// parameter registry order.
template <typename S>
struct AdamState {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Vec<S>> m, v;

  void init(const std::vector<TensorRef<S>>& params) {
    step = 0;
    m.clear();
    v.clear();
    for (const auto& p : params) {
      m.push_back(Vec<S>::Zero(p.size()));
      v.push_back(Vec<S>::Zero(p.size()));
    }
  }
};

template <typename S>
void adam_step(const std::vector<TensorRef<S>>& params, const std::vector<TensorRef<S>>& grads,
               AdamState<S>& state, double lr) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw Error("adam: parameter/gradient/state size mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != grads[i].size() || params[i].size() != state.m[i].size())
      throw Error("adam: shape mismatch for " + params[i].name);
    S* p = params[i].data;
    const S* g = grads[i].data;
    S* m = state.m[i].data();
    S* v = state.v[i].data();
    const Eigen::Index n = params[i].size();
    for (Eigen::Index k = 0; k < n; ++k) {
      m[k] = static_cast<S>(state.beta1 * m[k] + (1.0 - state.beta1) * g[k]);
      v[k] = static_cast<S>(state.beta2 * v[k] + (1.0 - state.beta2) * g[k] * g[k]);
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p[k] -= static_cast<S>(lr * mhat / (std::sqrt(vhat) + state.eps));
    }
  }
}

// Cosine decay from lr_base at step 0 to lr_min at total_steps.
inline double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr_base,
                        double lr_min = 0.0) {
  if (total_steps <= 0) return lr_base;
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_min + 0.5 * (lr_base - lr_min) * (1.0 + std::cos(M_PI * frac));
}

}  // namespace fskws::nn
