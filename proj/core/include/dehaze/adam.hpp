#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "dehaze/error.hpp"
#include "dehaze/tensor.hpp"

namespace dehaze::ad {

template <typename T>
struct AdamConfig {
  T lr = T(1e-3);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
};

// First/second moment buffers for one group of parameter tensors. The step
// counter is shared by the group and increases by exactly 1 per step.
template <typename T>
struct AdamState {
  AdamConfig<T> config;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::int64_t t = 0;

  static AdamState init(const std::vector<Tensor<T>*>& params, AdamConfig<T> cfg) {
    AdamState st;
    st.config = cfg;
    st.m.reserve(params.size());
    st.v.reserve(params.size());
    for (const Tensor<T>* p : params) {
      st.m.emplace_back(static_cast<std::size_t>(p->size()), T(0));
      st.v.emplace_back(static_cast<std::size_t>(p->size()), T(0));
    }
    return st;
  }
};

// One Adam update with bias correction:
//   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2,  t <- t+1
//   p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
template <typename T>
void adam_step(const std::vector<Tensor<T>*>& params, const std::vector<Tensor<T>>& grads,
               AdamState<T>& st) {
  ensure(params.size() == grads.size() && params.size() == st.m.size(),
         "adam_step: parameter/gradient/state count mismatch");
  st.t += 1;
  const T b1 = st.config.beta1, b2 = st.config.beta2;
  const T corr1 = T(1) - static_cast<T>(std::pow(static_cast<double>(b1), static_cast<double>(st.t)));
  const T corr2 = T(1) - static_cast<T>(std::pow(static_cast<double>(b2), static_cast<double>(st.t)));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = *params[i];
    const Tensor<T>& g = grads[i];
    ensure(p.same_shape(g), "adam_step: gradient shape " + shape_str(g.shape) +
                                " does not match parameter shape " + shape_str(p.shape));
    ensure_finite(g, "adam_step gradient");
    auto& m = st.m[i];
    auto& v = st.v[i];
    for (std::int64_t j = 0; j < p.size(); ++j) {
      const T gj = g[j];
      m[static_cast<std::size_t>(j)] = b1 * m[static_cast<std::size_t>(j)] + (T(1) - b1) * gj;
      v[static_cast<std::size_t>(j)] = b2 * v[static_cast<std::size_t>(j)] + (T(1) - b2) * gj * gj;
      const T mhat = m[static_cast<std::size_t>(j)] / corr1;
      const T vhat = v[static_cast<std::size_t>(j)] / corr2;
      p[j] -= st.config.lr * mhat / (std::sqrt(vhat) + st.config.eps);
    }
  }
}

}  // namespace dehaze::ad
