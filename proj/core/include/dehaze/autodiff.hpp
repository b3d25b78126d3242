#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "dehaze/conv_kernels.hpp"
#include "dehaze/error.hpp"
#include "dehaze/random.hpp"
#include "dehaze/tensor.hpp"

namespace dehaze::ad {

enum class ConvMode { normal, transpose };

// Reverse-mode tape. Operations evaluate eagerly, append a node holding the
// forward value, and register a closure that routes the node's gradient to
// its inputs. Node ids are append order, so inputs always precede consumers
// and a reverse sweep over ids is a valid backward schedule; cycles cannot
// be formed. Replaying the same ops over the same leaves is bit-identical.
template <typename T>
class Tape {
 public:
  int leaf(Tensor<T> value) {
    const bool needs = value.requires_grad;
    return push(std::move(value), needs, nullptr);
  }

  // -- elementwise ------------------------------------------------------

  int relu(int x) {
    return unary(x, [](T v) { return v > T(0) ? v : T(0); },
                 [](T v, T) { return v > T(0) ? T(1) : T(0); });
  }

  int leaky_relu(int x, T slope) {
    return unary(x, [slope](T v) { return v > T(0) ? v : slope * v; },
                 [slope](T v, T) { return v > T(0) ? T(1) : slope; });
  }

  int sigmoid(int x) {
    return unary(x, [](T v) { return T(1) / (T(1) + std::exp(-v)); },
                 [](T, T y) { return y * (T(1) - y); });
  }

  int log(int x) {
    for (T v : value(x).data) ensure(v > T(0), "log: non-positive input");
    return unary(x, [](T v) { return std::log(v); },
                 [](T v, T) { return T(1) / v; });
  }

  int abs(int x) {
    return unary(x, [](T v) { return v < T(0) ? -v : v; },
                 [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
  }

  int clamp(int x, T lo, T hi) {
    ensure(lo <= hi, "clamp: lo > hi");
    return unary(x, [lo, hi](T v) { return std::min(std::max(v, lo), hi); },
                 [lo, hi](T v, T) { return (v > lo && v < hi) ? T(1) : T(0); });
  }

  int affine(int x, T scale, T shift) {
    return unary(x, [scale, shift](T v) { return scale * v + shift; },
                 [scale](T, T) { return scale; });
  }

  int add(int a, int b) { return binary(a, b, /*sign_b=*/T(1)); }
  int sub(int a, int b) { return binary(a, b, /*sign_b=*/T(-1)); }

  int mul(int a, int b) {
    const Tensor<T>& va = value(a);
    const Tensor<T>& vb = value(b);
    ensure(va.same_shape(vb), "mul: shape mismatch " + shape_str(va.shape) +
                                  " vs " + shape_str(vb.shape));
    Tensor<T> out(va.shape);
    for (std::int64_t i = 0; i < va.size(); ++i) out[i] = va[i] * vb[i];
    return push(std::move(out), needs_grad(a) || needs_grad(b),
                [a, b](Tape& t, int self) {
                  const auto& g = t.node(self).grad;
                  if (t.needs_grad(a)) {
                    auto& ga = t.grad_buf(a);
                    const auto& vb2 = t.value(b);
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb2[static_cast<std::int64_t>(i)];
                  }
                  if (t.needs_grad(b)) {
                    auto& gb = t.grad_buf(b);
                    const auto& va2 = t.value(a);
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va2[static_cast<std::int64_t>(i)];
                  }
                });
  }

  // -- reductions -------------------------------------------------------

  int sum(int x) {
    const Tensor<T>& v = value(x);
    T acc = T(0);
    for (T e : v.data) acc += e;
    Tensor<T> out({1});
    out[0] = acc;
    return push(std::move(out), needs_grad(x), [x](Tape& t, int self) {
      if (!t.needs_grad(x)) return;
      const T g = t.node(self).grad[0];
      auto& gx = t.grad_buf(x);
      for (auto& e : gx) e += g;
    });
  }

  int mean(int x) {
    const Tensor<T>& v = value(x);
    ensure(v.size() > 0, "mean: empty tensor");
    const T inv = T(1) / static_cast<T>(v.size());
    T acc = T(0);
    for (T e : v.data) acc += e;
    Tensor<T> out({1});
    out[0] = acc * inv;
    return push(std::move(out), needs_grad(x), [x, inv](Tape& t, int self) {
      if (!t.needs_grad(x)) return;
      const T g = t.node(self).grad[0] * inv;
      auto& gx = t.grad_buf(x);
      for (auto& e : gx) e += g;
    });
  }

  // -- structure --------------------------------------------------------

  int concat_channels(int a, int b) {
    const Tensor<T>& va = value(a);
    const Tensor<T>& vb = value(b);
    ensure(va.ndim() == 4 && vb.ndim() == 4, "concat: expects [N,C,H,W] tensors");
    ensure(va.dim(0) == vb.dim(0) && va.dim(2) == vb.dim(2) && va.dim(3) == vb.dim(3),
           "concat: batch/spatial mismatch " + shape_str(va.shape) + " vs " + shape_str(vb.shape));
    const int n = va.dim(0), ca = va.dim(1), cb = vb.dim(1), h = va.dim(2), w = va.dim(3);
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    Tensor<T> out({n, ca + cb, h, w});
    for (int i = 0; i < n; ++i) {
      std::copy_n(va.data.data() + static_cast<std::int64_t>(i) * ca * plane, ca * plane,
                  out.data.data() + static_cast<std::int64_t>(i) * (ca + cb) * plane);
      std::copy_n(vb.data.data() + static_cast<std::int64_t>(i) * cb * plane, cb * plane,
                  out.data.data() + (static_cast<std::int64_t>(i) * (ca + cb) + ca) * plane);
    }
    return push(std::move(out), needs_grad(a) || needs_grad(b),
                [a, b, n, ca, cb, plane](Tape& t, int self) {
                  const auto& g = t.node(self).grad;
                  if (t.needs_grad(a)) {
                    auto& ga = t.grad_buf(a);
                    for (int i = 0; i < n; ++i)
                      for (std::int64_t j = 0; j < ca * plane; ++j)
                        ga[static_cast<std::size_t>(i * ca * plane + j)] +=
                            g[static_cast<std::size_t>(i * (ca + cb) * plane + j)];
                  }
                  if (t.needs_grad(b)) {
                    auto& gb = t.grad_buf(b);
                    for (int i = 0; i < n; ++i)
                      for (std::int64_t j = 0; j < cb * plane; ++j)
                        gb[static_cast<std::size_t>(i * cb * plane + j)] +=
                            g[static_cast<std::size_t>((static_cast<std::int64_t>(i) * (ca + cb) + ca) * plane + j)];
                  }
                });
  }

  int avgpool2x2(int x) {
    const Tensor<T>& v = value(x);
    ensure(v.ndim() == 4, "avgpool2x2: expects [N,C,H,W]");
    const int n = v.dim(0), c = v.dim(1), h = v.dim(2), w = v.dim(3);
    ensure(h % 2 == 0 && w % 2 == 0, "avgpool2x2: odd spatial dims " + shape_str(v.shape));
    const int oh = h / 2, ow = w / 2;
    Tensor<T> out({n, c, oh, ow});
    for (int p = 0; p < n * c; ++p) {
      const T* src = v.data.data() + static_cast<std::int64_t>(p) * h * w;
      T* dst = out.data.data() + static_cast<std::int64_t>(p) * oh * ow;
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx)
          dst[y * ow + xx] = (src[(2 * y) * w + 2 * xx] + src[(2 * y) * w + 2 * xx + 1] +
                              src[(2 * y + 1) * w + 2 * xx] + src[(2 * y + 1) * w + 2 * xx + 1]) *
                             T(0.25);
    }
    return push(std::move(out), needs_grad(x), [x, n, c, h, w, oh, ow](Tape& t, int self) {
      if (!t.needs_grad(x)) return;
      const auto& g = t.node(self).grad;
      auto& gx = t.grad_buf(x);
      for (int p = 0; p < n * c; ++p) {
        const T* gs = g.data() + static_cast<std::int64_t>(p) * oh * ow;
        T* gd = gx.data() + static_cast<std::int64_t>(p) * h * w;
        for (int y = 0; y < oh; ++y)
          for (int xx = 0; xx < ow; ++xx) {
            const T q = gs[y * ow + xx] * T(0.25);
            gd[(2 * y) * w + 2 * xx] += q;
            gd[(2 * y) * w + 2 * xx + 1] += q;
            gd[(2 * y + 1) * w + 2 * xx] += q;
            gd[(2 * y + 1) * w + 2 * xx + 1] += q;
          }
      }
    });
  }

  int maxpool2x2(int x) {
    const Tensor<T>& v = value(x);
    ensure(v.ndim() == 4, "maxpool2x2: expects [N,C,H,W]");
    const int n = v.dim(0), c = v.dim(1), h = v.dim(2), w = v.dim(3);
    ensure(h % 2 == 0 && w % 2 == 0, "maxpool2x2: odd spatial dims " + shape_str(v.shape));
    const int oh = h / 2, ow = w / 2;
    Tensor<T> out({n, c, oh, ow});
    std::vector<std::int32_t> arg(static_cast<std::size_t>(out.size()));
    for (int p = 0; p < n * c; ++p) {
      const T* src = v.data.data() + static_cast<std::int64_t>(p) * h * w;
      T* dst = out.data.data() + static_cast<std::int64_t>(p) * oh * ow;
      std::int32_t* am = arg.data() + static_cast<std::int64_t>(p) * oh * ow;
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) {
          const int base = (2 * y) * w + 2 * xx;
          // first maximum in scan order wins ties
          int best = base;
          if (src[base + 1] > src[best]) best = base + 1;
          if (src[base + w] > src[best]) best = base + w;
          if (src[base + w + 1] > src[best]) best = base + w + 1;
          dst[y * ow + xx] = src[best];
          am[y * ow + xx] = best;
        }
    }
    return push(std::move(out), needs_grad(x),
                [x, n, c, h, w, oh, ow, arg = std::move(arg)](Tape& t, int self) {
                  if (!t.needs_grad(x)) return;
                  const auto& g = t.node(self).grad;
                  auto& gx = t.grad_buf(x);
                  for (int p = 0; p < n * c; ++p) {
                    const T* gs = g.data() + static_cast<std::int64_t>(p) * oh * ow;
                    const std::int32_t* am = arg.data() + static_cast<std::int64_t>(p) * oh * ow;
                    T* gd = gx.data() + static_cast<std::int64_t>(p) * h * w;
                    for (int j = 0; j < oh * ow; ++j) gd[am[j]] += gs[j];
                  }
                });
  }

  // Inverted dropout: kept activations are scaled by 1/(1-rate) at train
  // time so that eval mode is the identity.
  int dropout(int x, T rate, bool training, Rng* rng) {
    ensure(rate >= T(0) && rate < T(1), "dropout: rate must be in [0,1)");
    if (!training || rate == T(0)) {
      return unary(x, [](T v) { return v; }, [](T, T) { return T(1); });
    }
    ensure(rng != nullptr, "dropout: training mode requires a random stream");
    const Tensor<T>& v = value(x);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(v.size()));
    for (auto& m : mask) m = rng->uniform() >= static_cast<double>(rate) ? 1 : 0;
    const T scale = T(1) / (T(1) - rate);
    Tensor<T> out(v.shape);
    for (std::int64_t i = 0; i < v.size(); ++i)
      out[i] = mask[static_cast<std::size_t>(i)] ? v[i] * scale : T(0);
    return push(std::move(out), needs_grad(x),
                [x, scale, mask = std::move(mask)](Tape& t, int self) {
                  if (!t.needs_grad(x)) return;
                  const auto& g = t.node(self).grad;
                  auto& gx = t.grad_buf(x);
                  for (std::size_t i = 0; i < g.size(); ++i)
                    if (mask[i]) gx[i] += g[i] * scale;
                });
  }

  // Batch normalization over [N,C,H,W] with per-channel scale/shift.
  // Training mode normalizes by batch statistics and folds them into the
  // running buffers (keep factor `momentum`); eval mode uses the buffers.
  int batchnorm(int x, int gamma, int beta, Tensor<T>* running_mean, Tensor<T>* running_var,
                bool training, T momentum = T(0.9), T eps = T(1e-5)) {
    const Tensor<T>& v = value(x);
    ensure(v.ndim() == 4, "batchnorm: expects [N,C,H,W]");
    const int n = v.dim(0), c = v.dim(1), h = v.dim(2), w = v.dim(3);
    ensure(n >= 1, "batchnorm: batch dimension must be >= 1");
    const Tensor<T>& vg = value(gamma);
    const Tensor<T>& vb = value(beta);
    ensure(vg.ndim() == 1 && vg.dim(0) == c && vb.ndim() == 1 && vb.dim(0) == c,
           "batchnorm: scale/shift must be [C]");
    ensure(running_mean && running_var && running_mean->size() == c && running_var->size() == c,
           "batchnorm: running stats must be [C]");
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    const std::int64_t m = static_cast<std::int64_t>(n) * plane;

    std::vector<T> mu(static_cast<std::size_t>(c)), inv_std(static_cast<std::size_t>(c));
    if (training) {
      for (int ch = 0; ch < c; ++ch) {
        T s = T(0);
        for (int i = 0; i < n; ++i) {
          const T* src = v.data.data() + (static_cast<std::int64_t>(i) * c + ch) * plane;
          for (std::int64_t j = 0; j < plane; ++j) s += src[j];
        }
        const T mean = s / static_cast<T>(m);
        T sq = T(0);
        for (int i = 0; i < n; ++i) {
          const T* src = v.data.data() + (static_cast<std::int64_t>(i) * c + ch) * plane;
          for (std::int64_t j = 0; j < plane; ++j) {
            const T d = src[j] - mean;
            sq += d * d;
          }
        }
        const T var = sq / static_cast<T>(m);
        mu[static_cast<std::size_t>(ch)] = mean;
        inv_std[static_cast<std::size_t>(ch)] = T(1) / std::sqrt(var + eps);
        (*running_mean)[ch] = momentum * (*running_mean)[ch] + (T(1) - momentum) * mean;
        (*running_var)[ch] = momentum * (*running_var)[ch] + (T(1) - momentum) * var;
      }
    } else {
      for (int ch = 0; ch < c; ++ch) {
        mu[static_cast<std::size_t>(ch)] = (*running_mean)[ch];
        inv_std[static_cast<std::size_t>(ch)] = T(1) / std::sqrt((*running_var)[ch] + eps);
      }
    }

    Tensor<T> out(v.shape);
    for (int i = 0; i < n; ++i)
      for (int ch = 0; ch < c; ++ch) {
        const T* src = v.data.data() + (static_cast<std::int64_t>(i) * c + ch) * plane;
        T* dst = out.data.data() + (static_cast<std::int64_t>(i) * c + ch) * plane;
        const T g = vg[ch], b = vb[ch];
        const T mc = mu[static_cast<std::size_t>(ch)], is = inv_std[static_cast<std::size_t>(ch)];
        for (std::int64_t j = 0; j < plane; ++j) dst[j] = g * (src[j] - mc) * is + b;
      }

    return push(std::move(out), needs_grad(x) || needs_grad(gamma) || needs_grad(beta),
                [x, gamma, beta, n, c, plane, m, training, mu = std::move(mu),
                 inv_std = std::move(inv_std)](Tape& t, int self) {
                  const auto& g = t.node(self).grad;
                  const auto& vx = t.value(x);
                  const auto& vgm = t.value(gamma);
                  for (int ch = 0; ch < c; ++ch) {
                    const T mc = mu[static_cast<std::size_t>(ch)];
                    const T is = inv_std[static_cast<std::size_t>(ch)];
                    // per-channel reductions of dy and dy*xhat
                    T sum_dy = T(0), sum_dy_xhat = T(0);
                    for (int i = 0; i < n; ++i) {
                      const std::int64_t off = (static_cast<std::int64_t>(i) * c + ch) * plane;
                      for (std::int64_t j = 0; j < plane; ++j) {
                        const T dy = g[static_cast<std::size_t>(off + j)];
                        sum_dy += dy;
                        sum_dy_xhat += dy * (vx[off + j] - mc) * is;
                      }
                    }
                    if (t.needs_grad(beta)) t.grad_buf(beta)[static_cast<std::size_t>(ch)] += sum_dy;
                    if (t.needs_grad(gamma))
                      t.grad_buf(gamma)[static_cast<std::size_t>(ch)] += sum_dy_xhat;
                    if (t.needs_grad(x)) {
                      auto& gx = t.grad_buf(x);
                      const T gm = vgm[ch];
                      if (training) {
                        const T mean_dy = sum_dy / static_cast<T>(m);
                        const T mean_dy_xhat = sum_dy_xhat / static_cast<T>(m);
                        for (int i = 0; i < n; ++i) {
                          const std::int64_t off = (static_cast<std::int64_t>(i) * c + ch) * plane;
                          for (std::int64_t j = 0; j < plane; ++j) {
                            const T xhat = (vx[off + j] - mc) * is;
                            gx[static_cast<std::size_t>(off + j)] +=
                                gm * is *
                                (g[static_cast<std::size_t>(off + j)] - mean_dy - xhat * mean_dy_xhat);
                          }
                        }
                      } else {
                        for (int i = 0; i < n; ++i) {
                          const std::int64_t off = (static_cast<std::int64_t>(i) * c + ch) * plane;
                          for (std::int64_t j = 0; j < plane; ++j)
                            gx[static_cast<std::size_t>(off + j)] +=
                                gm * is * g[static_cast<std::size_t>(off + j)];
                        }
                      }
                    }
                  }
                });
  }

  // 2-D convolution over [N,C,H,W].
  //   normal:    kernel [F,C,kh,kw], x C channels -> F channels,
  //              out = floor((H + 2p - kh)/stride) + 1 per axis
  //   transpose: kernel [F,C,kh,kw], x F channels -> C channels,
  //              out = (H-1)*stride - 2p + kh + output_padding per axis;
  //              with output_padding 0 this is exactly the adjoint of the
  //              normal mode under the same kernel.
  int conv2d(int x, int kernel, int bias, int stride, int padding,
             ConvMode mode = ConvMode::normal, int output_padding = 0) {
    const Tensor<T>& v = value(x);
    const Tensor<T>& k = value(kernel);
    ensure(v.ndim() == 4, "conv2d: input must be [N,C,H,W], got " + shape_str(v.shape));
    ensure(k.ndim() == 4, "conv2d: kernel must be [F,C,kh,kw], got " + shape_str(k.shape));
    ensure(stride >= 1, "conv2d: stride must be positive");
    ensure(padding >= 0, "conv2d: padding must be non-negative");
    ensure_finite(v, "conv2d input");
    ensure_finite(k, "conv2d kernel");

    const int n = v.dim(0), h = v.dim(2), w = v.dim(3);
    const int f = k.dim(0), c = k.dim(1), kh = k.dim(2), kw = k.dim(3);
    const std::int64_t kvol = static_cast<std::int64_t>(c) * kh * kw;

    int oc = 0, oh = 0, ow = 0;
    if (mode == ConvMode::normal) {
      ensure(output_padding == 0, "conv2d: output_padding applies to transpose mode only");
      ensure(v.dim(1) == c, "conv2d: input channels " + std::to_string(v.dim(1)) +
                                " do not match kernel channels " + std::to_string(c));
      ensure(h + 2 * padding >= kh && w + 2 * padding >= kw,
             "conv2d: kernel larger than padded input");
      oc = f;
      oh = (h + 2 * padding - kh) / stride + 1;
      ow = (w + 2 * padding - kw) / stride + 1;
    } else {
      ensure(output_padding >= 0 && output_padding < stride,
             "conv2d: output_padding must be in [0, stride)");
      ensure(v.dim(1) == f, "conv2d transpose: input channels " + std::to_string(v.dim(1)) +
                                " do not match kernel dim0 " + std::to_string(f));
      oc = c;
      oh = (h - 1) * stride - 2 * padding + kh + output_padding;
      ow = (w - 1) * stride - 2 * padding + kw + output_padding;
    }
    ensure(oh > 0 && ow > 0, "conv2d: non-positive output dimension");

    if (bias >= 0) {
      const Tensor<T>& b = value(bias);
      ensure(b.ndim() == 1 && b.dim(0) == oc, "conv2d: bias must be [" + std::to_string(oc) + "]");
      ensure_finite(b, "conv2d bias");
    }

    Tensor<T> out({n, oc, oh, ow});
    const std::int64_t ospatial = static_cast<std::int64_t>(oh) * ow;
    const std::int64_t ispatial = static_cast<std::int64_t>(h) * w;

    if (mode == ConvMode::normal) {
      std::vector<T> cols(static_cast<std::size_t>(kvol * ospatial));
      for (int i = 0; i < n; ++i) {
        im2col(v.data.data() + static_cast<std::int64_t>(i) * c * ispatial, c, h, w, kh, kw,
               stride, padding, oh, ow, cols.data());
        gemm_nn(f, static_cast<int>(ospatial), static_cast<int>(kvol), k.data.data(), cols.data(),
                out.data.data() + static_cast<std::int64_t>(i) * f * ospatial);
      }
    } else {
      std::vector<T> cols(static_cast<std::size_t>(kvol * ispatial));
      for (int i = 0; i < n; ++i) {
        std::fill(cols.begin(), cols.end(), T(0));
        gemm_tn(static_cast<int>(kvol), static_cast<int>(ispatial), f, k.data.data(),
                v.data.data() + static_cast<std::int64_t>(i) * f * ispatial, cols.data());
        col2im(cols.data(), c, oh, ow, kh, kw, stride, padding, h, w,
               out.data.data() + static_cast<std::int64_t>(i) * c * ospatial);
      }
    }
    if (bias >= 0) {
      const Tensor<T>& b = value(bias);
      for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < oc; ++ch) {
          T* dst = out.data.data() + (static_cast<std::int64_t>(i) * oc + ch) * ospatial;
          const T bv = b[ch];
          for (std::int64_t j = 0; j < ospatial; ++j) dst[j] += bv;
        }
    }

    const bool needs = needs_grad(x) || needs_grad(kernel) || (bias >= 0 && needs_grad(bias));
    return push(
        std::move(out), needs,
        [x, kernel, bias, stride, padding, mode, n, c, f, h, w, kh, kw, oh, ow, kvol, ospatial,
         ispatial](Tape& t, int self) {
          const auto& g = t.node(self).grad;
          const auto& vx = t.value(x);
          const auto& vk = t.value(kernel);
          const bool need_x = t.needs_grad(x);
          const bool need_k = t.needs_grad(kernel);
          const bool need_b = bias >= 0 && t.needs_grad(bias);
          const int oc = (mode == ConvMode::normal) ? f : c;

          if (need_b) {
            auto& gb = t.grad_buf(bias);
            for (int i = 0; i < n; ++i)
              for (int ch = 0; ch < oc; ++ch) {
                const T* gs = g.data() + (static_cast<std::int64_t>(i) * oc + ch) * ospatial;
                T acc = T(0);
                for (std::int64_t j = 0; j < ospatial; ++j) acc += gs[j];
                gb[static_cast<std::size_t>(ch)] += acc;
              }
          }
          if (!need_x && !need_k) return;

          if (mode == ConvMode::normal) {
            std::vector<T> cols(static_cast<std::size_t>(kvol * ospatial));
            std::vector<T> dcols;
            if (need_x) dcols.resize(static_cast<std::size_t>(kvol * ospatial));
            for (int i = 0; i < n; ++i) {
              const T* gy = g.data() + static_cast<std::int64_t>(i) * f * ospatial;
              if (need_k) {
                im2col(vx.data.data() + static_cast<std::int64_t>(i) * c * ispatial, c, h, w, kh,
                       kw, stride, padding, oh, ow, cols.data());
                gemm_nt(f, static_cast<int>(kvol), static_cast<int>(ospatial), gy, cols.data(),
                        t.grad_buf(kernel).data());
              }
              if (need_x) {
                std::fill(dcols.begin(), dcols.end(), T(0));
                gemm_tn(static_cast<int>(kvol), static_cast<int>(ospatial), f, vk.data.data(), gy,
                        dcols.data());
                col2im(dcols.data(), c, h, w, kh, kw, stride, padding, oh, ow,
                       t.grad_buf(x).data() + static_cast<std::int64_t>(i) * c * ispatial);
              }
            }
          } else {
            std::vector<T> cols(static_cast<std::size_t>(kvol * ispatial));
            for (int i = 0; i < n; ++i) {
              const T* gy = g.data() + static_cast<std::int64_t>(i) * c * ospatial;
              im2col(gy, c, oh, ow, kh, kw, stride, padding, h, w, cols.data());
              if (need_x) {
                gemm_nn(f, static_cast<int>(ispatial), static_cast<int>(kvol), vk.data.data(),
                        cols.data(),
                        t.grad_buf(x).data() + static_cast<std::int64_t>(i) * f * ispatial);
              }
              if (need_k) {
                gemm_nt(f, static_cast<int>(kvol), static_cast<int>(ispatial),
                        vx.data.data() + static_cast<std::int64_t>(i) * f * ispatial, cols.data(),
                        t.grad_buf(kernel).data());
              }
            }
          }
        });
  }

  // -- gradient driving ---------------------------------------------------

  void backward(int loss) {
    ensure(loss >= 0 && loss < static_cast<int>(nodes_.size()), "backward: bad node id");
    ensure(value(loss).size() == 1, "backward: loss node must be scalar, got " +
                                        shape_str(value(loss).shape));
    for (auto& nd : nodes_) {
      nd.grad.clear();
      nd.seen = false;
    }
    grad_buf(loss, /*force=*/true)[0] = T(1);
    for (int id = loss; id >= 0; --id) {
      Node& nd = nodes_[static_cast<std::size_t>(id)];
      if (nd.seen && nd.needs && nd.back) nd.back(*this, id);
    }
  }

  const Tensor<T>& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }

  // Gradient of the last backward() w.r.t. node `id`; zeros if the node was
  // never reached (leaves not on the loss path report zero gradient).
  Tensor<T> grad(int id) const {
    const Node& nd = nodes_[static_cast<std::size_t>(id)];
    Tensor<T> g(nd.value.shape);
    if (!nd.grad.empty()) g.data = nd.grad;
    return g;
  }

  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs; }

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Tensor<T> value;
    std::vector<T> grad;  // lazily sized
    bool needs = false;
    bool seen = false;
    std::function<void(Tape&, int)> back;
  };

  friend struct TapeAccess;

  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }

  std::vector<T>& grad_buf(int id, bool force = false) {
    Node& nd = nodes_[static_cast<std::size_t>(id)];
    ensure(force || nd.needs, "internal: gradient routed to a node that does not need it");
    if (nd.grad.empty()) nd.grad.assign(static_cast<std::size_t>(nd.value.size()), T(0));
    nd.seen = true;
    return nd.grad;
  }

  int push(Tensor<T> value, bool needs, std::function<void(Tape&, int)> back) {
    Node nd;
    nd.value = std::move(value);
    nd.needs = needs;
    nd.back = std::move(back);
    nodes_.push_back(std::move(nd));
    return static_cast<int>(nodes_.size()) - 1;
  }

  template <typename F, typename DF>
  int unary(int x, F f, DF df) {
    const Tensor<T>& v = value(x);
    Tensor<T> out(v.shape);
    for (std::int64_t i = 0; i < v.size(); ++i) out[i] = f(v[i]);
    return push(std::move(out), needs_grad(x), [x, df](Tape& t, int self) {
      if (!t.needs_grad(x)) return;
      const auto& g = t.node(self).grad;
      const auto& vx = t.value(x);
      const auto& vy = t.value(self);
      auto& gx = t.grad_buf(x);
      for (std::size_t i = 0; i < g.size(); ++i)
        gx[i] += g[i] * df(vx[static_cast<std::int64_t>(i)], vy[static_cast<std::int64_t>(i)]);
    });
  }

  int binary(int a, int b, T sign_b) {
    const Tensor<T>& va = value(a);
    const Tensor<T>& vb = value(b);
    ensure(va.same_shape(vb), "add/sub: shape mismatch " + shape_str(va.shape) + " vs " +
                                  shape_str(vb.shape));
    Tensor<T> out(va.shape);
    for (std::int64_t i = 0; i < va.size(); ++i) out[i] = va[i] + sign_b * vb[i];
    return push(std::move(out), needs_grad(a) || needs_grad(b),
                [a, b, sign_b](Tape& t, int self) {
                  const auto& g = t.node(self).grad;
                  if (t.needs_grad(a)) {
                    auto& ga = t.grad_buf(a);
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                  }
                  if (t.needs_grad(b)) {
                    auto& gb = t.grad_buf(b);
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sign_b * g[i];
                  }
                });
  }

  std::vector<Node> nodes_;
};

}  // namespace dehaze::ad
