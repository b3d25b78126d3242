#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "dehaze/error.hpp"
#include "dehaze/image.hpp"

namespace dehaze {

// Dark-channel-prior dehazing with guided-filter transmission refinement.
// Hyperparameter defaults follow the published dark-channel method: 15-pixel
// patches, omega 0.95, transmission floor 0.1, top 0.1% airlight candidates.

struct DcpConfig {
  int patch_size = 15;
  double omega = 0.95;
  double t0 = 0.1;
  int guided_radius = 40;
  double guided_eps = 1e-3;
  double airlight_percentile = 0.001;

  void validate() const {
    ensure(patch_size >= 1 && patch_size % 2 == 1, "dcp: patch size must be odd and >= 1");
    ensure(omega > 0.0 && omega <= 1.0, "dcp: omega must be in (0,1]");
    ensure(t0 > 0.0 && t0 < 1.0, "dcp: t0 must be in (0,1)");
    ensure(guided_radius >= 1, "dcp: guided filter radius must be >= 1");
    ensure(guided_eps > 0.0, "dcp: guided filter epsilon must be positive");
    ensure(airlight_percentile > 0.0 && airlight_percentile <= 1.0,
           "dcp: airlight percentile must be in (0,1]");
  }
};

namespace detail {

// Sliding window minimum over [i-r, i+r] clamped to the axis; min over a
// replicate-padded patch equals min over the clamped window.
template <typename T>
void window_min_rows(const Plane<T>& in, int r, Plane<T>& out) {
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) {
      const int lo = std::max(0, x - r), hi = std::min(in.width - 1, x + r);
      T m = in.at(y, lo);
      for (int k = lo + 1; k <= hi; ++k) m = std::min(m, in.at(y, k));
      out.at(y, x) = m;
    }
}

template <typename T>
void window_min_cols(const Plane<T>& in, int r, Plane<T>& out) {
  for (int y = 0; y < in.height; ++y) {
    const int lo = std::max(0, y - r), hi = std::min(in.height - 1, y + r);
    for (int x = 0; x < in.width; ++x) {
      T m = in.at(lo, x);
      for (int k = lo + 1; k <= hi; ++k) m = std::min(m, in.at(k, x));
      out.at(y, x) = m;
    }
  }
}

// Box sums over [y-r,y+r]x[x-r,x+r] clamped to the image, via an integral
// image, together with the per-pixel window areas.
inline void box_mean(const std::vector<double>& src, int h, int w, int r,
                     std::vector<double>& mean_out) {
  std::vector<double> integral(static_cast<std::size_t>(h + 1) * (w + 1), 0.0);
  for (int y = 0; y < h; ++y) {
    double row = 0.0;
    for (int x = 0; x < w; ++x) {
      row += src[static_cast<std::size_t>(y) * w + x];
      integral[static_cast<std::size_t>(y + 1) * (w + 1) + (x + 1)] =
          integral[static_cast<std::size_t>(y) * (w + 1) + (x + 1)] + row;
    }
  }
  mean_out.resize(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - r), y1 = std::min(h - 1, y + r);
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - r), x1 = std::min(w - 1, x + r);
      const double sum = integral[static_cast<std::size_t>(y1 + 1) * (w + 1) + (x1 + 1)] -
                         integral[static_cast<std::size_t>(y0) * (w + 1) + (x1 + 1)] -
                         integral[static_cast<std::size_t>(y1 + 1) * (w + 1) + x0] +
                         integral[static_cast<std::size_t>(y0) * (w + 1) + x0];
      const double area = static_cast<double>(y1 - y0 + 1) * (x1 - x0 + 1);
      mean_out[static_cast<std::size_t>(y) * w + x] = sum / area;
    }
  }
}

}  // namespace detail

// Per pixel, the minimum over the three channels and the patch_size x
// patch_size neighborhood (edge-replicated). Accepts any finite intensities
// so it can run on airlight-normalized images.
template <typename T>
Plane<T> dark_channel(const Image<T>& img, int patch_size) {
  ensure(patch_size >= 1 && patch_size % 2 == 1, "dark_channel: patch size must be odd");
  const int r = patch_size / 2;
  Plane<T> channel_min(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      channel_min.at(y, x) = std::min({img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2)});
  Plane<T> tmp(img.height, img.width);
  detail::window_min_rows(channel_min, r, tmp);
  Plane<T> out(img.height, img.width);
  detail::window_min_cols(tmp, r, out);
  return out;
}

// Among the top `percentile` fraction of pixels ranked by dark-channel
// value, returns the RGB of the pixel with the largest channel sum; all ties
// break toward the lowest linear pixel index.
template <typename T>
std::array<T, 3> estimate_airlight(const Image<T>& img, const Plane<T>& dark, double percentile) {
  ensure(percentile > 0.0 && percentile <= 1.0, "estimate_airlight: percentile must be in (0,1]");
  ensure(img.height == dark.height && img.width == dark.width,
         "estimate_airlight: image/dark channel mismatch");
  const std::size_t n = dark.values.size();
  const std::size_t k =
      std::max<std::size_t>(1, static_cast<std::size_t>(percentile * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dark.values[a] != dark.values[b]) return dark.values[a] > dark.values[b];
    return a < b;
  });
  std::size_t best = order[0];
  double best_sum = -1.0;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t idx = order[i];
    const double s = static_cast<double>(img.values[idx * 3]) +
                     static_cast<double>(img.values[idx * 3 + 1]) +
                     static_cast<double>(img.values[idx * 3 + 2]);
    if (s > best_sum || (s == best_sum && idx < best)) {
      best_sum = s;
      best = idx;
    }
  }
  return {img.values[best * 3], img.values[best * 3 + 1], img.values[best * 3 + 2]};
}

// t(x) = 1 - omega * dark_channel(I / A), with the channelwise division
// applied before the dark channel.
template <typename T>
Plane<T> estimate_transmission(const Image<T>& img, const std::array<T, 3>& airlight,
                               double omega, int patch_size) {
  for (T a : airlight) ensure(a > T(0), "estimate_transmission: airlight channel must be positive");
  Image<T> normalized(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int ch = 0; ch < 3; ++ch)
        normalized.at(y, x, ch) = img.at(y, x, ch) / airlight[static_cast<std::size_t>(ch)];
  const Plane<T> dark = dark_channel(normalized, patch_size);
  Plane<T> t(img.height, img.width);
  for (std::size_t i = 0; i < t.values.size(); ++i)
    t.values[i] = static_cast<T>(1.0 - omega * static_cast<double>(dark.values[i]));
  return t;
}

// Guided filter with a grayscale guide (channel mean): per window,
// a = cov(guide, input) / (var(guide) + eps), b = mean(input) - a *
// mean(guide), and the output is mean(a) * guide + mean(b) with box means of
// the given radius.
template <typename T>
Plane<T> guided_filter(const Image<T>& guide, const Plane<T>& input, int radius, double epsilon) {
  ensure(radius >= 1, "guided_filter: radius must be >= 1");
  ensure(epsilon > 0.0, "guided_filter: epsilon must be positive");
  ensure(guide.height == input.height && guide.width == input.width,
         "guided_filter: guide/input shape mismatch");
  const int h = guide.height, w = guide.width;
  const std::size_t n = static_cast<std::size_t>(h) * w;

  std::vector<double> gray(n), p(n), gg(n), gp(n);
  for (std::size_t i = 0; i < n; ++i) {
    gray[i] = (static_cast<double>(guide.values[i * 3]) +
               static_cast<double>(guide.values[i * 3 + 1]) +
               static_cast<double>(guide.values[i * 3 + 2])) /
              3.0;
    p[i] = static_cast<double>(input.values[i]);
    gg[i] = gray[i] * gray[i];
    gp[i] = gray[i] * p[i];
  }

  std::vector<double> mean_g, mean_p, mean_gg, mean_gp;
  detail::box_mean(gray, h, w, radius, mean_g);
  detail::box_mean(p, h, w, radius, mean_p);
  detail::box_mean(gg, h, w, radius, mean_gg);
  detail::box_mean(gp, h, w, radius, mean_gp);

  std::vector<double> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double var_g = mean_gg[i] - mean_g[i] * mean_g[i];
    const double cov_gp = mean_gp[i] - mean_g[i] * mean_p[i];
    a[i] = cov_gp / (var_g + epsilon);
    b[i] = mean_p[i] - a[i] * mean_g[i];
  }
  std::vector<double> mean_a, mean_b;
  detail::box_mean(a, h, w, radius, mean_a);
  detail::box_mean(b, h, w, radius, mean_b);

  Plane<T> out(h, w);
  for (std::size_t i = 0; i < n; ++i)
    out.values[i] = static_cast<T>(mean_a[i] * gray[i] + mean_b[i]);
  return out;
}

template <typename T>
struct DcpResult {
  Image<T> dehazed;
  Plane<T> transmission;  // refined
  std::array<T, 3> airlight;
};

// Full pipeline: dark channel, airlight, raw transmission, guided-filter
// refinement (clamped to [0,1]), then J = (I - A) / max(t, t0) + A per
// channel, clipped to [0,1].
template <typename T>
DcpResult<T> dcp_dehaze(const Image<T>& img, const DcpConfig& config = {}) {
  config.validate();
  validate_image(img, "dcp_dehaze");
  DcpResult<T> result;
  const Plane<T> dark = dark_channel(img, config.patch_size);
  result.airlight = estimate_airlight(img, dark, config.airlight_percentile);
  Plane<T> t = estimate_transmission(img, result.airlight, config.omega, config.patch_size);
  t = guided_filter(img, t, config.guided_radius, config.guided_eps);
  for (auto& v : t.values) v = std::min(std::max(v, T(0)), T(1));
  result.transmission = t;

  result.dehazed = Image<T>(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const double tv = std::max(static_cast<double>(t.at(y, x)), config.t0);
      for (int ch = 0; ch < 3; ++ch) {
        const double a = static_cast<double>(result.airlight[static_cast<std::size_t>(ch)]);
        const double v = (static_cast<double>(img.at(y, x, ch)) - a) / tv + a;
        result.dehazed.at(y, x, ch) = static_cast<T>(std::min(std::max(v, 0.0), 1.0));
      }
    }
  return result;
}

}  // namespace dehaze
