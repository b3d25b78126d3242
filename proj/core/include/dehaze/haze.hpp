#pragma once

#include <algorithm>
#include <cmath>

#include "dehaze/error.hpp"
#include "dehaze/image.hpp"
#include "dehaze/random.hpp"

namespace dehaze {

// Atmospheric scattering model: I(x) = J(x) T(x) + A (1 - T(x)), with the
// two transmission constructions kept separate and selected explicitly.
// They are not interchangeable: the exponential form is the physical decay
// law, the linear form is the scaled depth ramp used for pair synthesis.

enum class TransmissionMode { exponential, linear_scaled };

// T(x) = exp(-beta * d(x)).
template <typename T>
Plane<T> transmission_exponential(const Plane<T>& depth, T beta) {
  ensure(beta >= T(0), "transmission: attenuation coefficient must be >= 0");
  validate_depth(depth, "transmission");
  Plane<T> t(depth.height, depth.width);
  for (std::size_t i = 0; i < depth.values.size(); ++i)
    t.values[i] = std::exp(-beta * depth.values[i]);
  return t;
}

// T(x) = s * (1 - d_norm(x)) with per-image min-max depth normalization.
// The nearest pixel gets T = s, the farthest T = 0.
template <typename T>
Plane<T> transmission_linear_scaled(const Plane<T>& depth, T s) {
  ensure(s > T(0) && s <= T(1), "transmission: scale must be in (0,1]");
  validate_depth(depth, "transmission");
  const auto [lo_it, hi_it] = std::minmax_element(depth.values.begin(), depth.values.end());
  const T lo = *lo_it, hi = *hi_it;
  ensure(hi > lo, "transmission: degenerate depth map (max == min)");
  const T inv = T(1) / (hi - lo);
  Plane<T> t(depth.height, depth.width);
  for (std::size_t i = 0; i < depth.values.size(); ++i)
    t.values[i] = s * (T(1) - (depth.values[i] - lo) * inv);
  return t;
}

template <typename T>
Plane<T> transmission_from_depth(const Plane<T>& depth, TransmissionMode mode, T param) {
  return mode == TransmissionMode::exponential ? transmission_exponential(depth, param)
                                               : transmission_linear_scaled(depth, param);
}

// I(x) = J(x) T(x) + A (1 - T(x)) per channel, clipped to [0,1]. No value
// actually leaves [min(min J, A), max(max J, A)] for valid inputs.
template <typename T>
Image<T> apply_haze(const Image<T>& clear, const Plane<T>& t, T a) {
  ensure(clear.height == t.height && clear.width == t.width,
         "apply_haze: image/transmission shape mismatch");
  ensure(a > T(0) && a <= T(1), "apply_haze: atmospheric light must be in (0,1]");
  Image<T> out(clear.height, clear.width);
  for (int r = 0; r < clear.height; ++r)
    for (int c = 0; c < clear.width; ++c) {
      const T tv = t.at(r, c);
      for (int ch = 0; ch < 3; ++ch) {
        const T v = clear.at(r, c, ch) * tv + a * (T(1) - tv);
        out.at(r, c, ch) = std::min(std::max(v, T(0)), T(1));
      }
    }
  return out;
}

// Algebraic inverse of apply_haze: J(x) = (I(x) - A (1 - T(x))) / max(T(x),
// t_floor), clipped to [0,1].
template <typename T>
Image<T> invert_haze(const Image<T>& hazy, const Plane<T>& t, T a, T t_floor = T(0.1)) {
  ensure(hazy.height == t.height && hazy.width == t.width,
         "invert_haze: image/transmission shape mismatch");
  ensure(t_floor > T(0) && t_floor <= T(1), "invert_haze: t_floor must be in (0,1]");
  Image<T> out(hazy.height, hazy.width);
  for (int r = 0; r < hazy.height; ++r)
    for (int c = 0; c < hazy.width; ++c) {
      const T tv = std::max(t.at(r, c), t_floor);
      for (int ch = 0; ch < 3; ++ch) {
        const T v = (hazy.at(r, c, ch) - a * (T(1) - t.at(r, c))) / tv;
        out.at(r, c, ch) = std::min(std::max(v, T(0)), T(1));
      }
    }
  return out;
}

template <typename T>
struct HazeSynthesisConfig {
  T atmospheric_light = T(1);
  T s_min = T(0.2);
  T s_max = T(0.4);
  int target_size = 256;
  TransmissionMode mode = TransmissionMode::linear_scaled;
  T beta = T(1);  // exponential mode only

  void validate() const {
    ensure(atmospheric_light > T(0) && atmospheric_light <= T(1),
           "synthesis: atmospheric light must be in (0,1]");
    ensure(s_min > T(0) && s_min <= s_max && s_max <= T(1),
           "synthesis: need 0 < s_min <= s_max <= 1");
    ensure(target_size > 0, "synthesis: target size must be positive");
    ensure(beta >= T(0), "synthesis: beta must be >= 0");
  }
};

template <typename T>
struct SynthesizedPair {
  Image<T> hazy;
  Image<T> clear;
  T s_used;
};

// Resizes image and depth to the target size (depth before normalization),
// draws s uniformly from [s_min, s_max], and applies the scattering model.
// In exponential mode the transmission comes from beta and the drawn s is
// reported but unused.
template <typename T>
SynthesizedPair<T> synthesize_pair(const Image<T>& clear, const Plane<T>& depth,
                                   const HazeSynthesisConfig<T>& config, Rng& rng) {
  config.validate();
  ensure(clear.height == depth.height && clear.width == depth.width,
         "synthesize_pair: image and depth are not spatially aligned");
  validate_image(clear, "synthesize_pair");
  validate_depth(depth, "synthesize_pair");

  SynthesizedPair<T> out;
  out.clear = resize_bilinear(clear, config.target_size, config.target_size);
  Plane<T> depth_r = resize_bilinear(depth, config.target_size, config.target_size);
  out.s_used = static_cast<T>(rng.uniform(static_cast<double>(config.s_min),
                                          static_cast<double>(config.s_max)));
  Plane<T> t = (config.mode == TransmissionMode::linear_scaled)
                   ? transmission_linear_scaled(depth_r, out.s_used)
                   : transmission_exponential(depth_r, config.beta);
  out.hazy = apply_haze(out.clear, t, config.atmospheric_light);
  return out;
}

}  // namespace dehaze
