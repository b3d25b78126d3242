#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "dehaze/error.hpp"
#include "dehaze/tensor.hpp"

namespace dehaze {

// H x W scalar field (depth maps, transmission maps, dark channels).
template <typename T>
struct Plane {
  int height = 0;
  int width = 0;
  std::vector<T> values;  // row-major

  Plane() = default;
  Plane(int h, int w, T fill = T(0))
      : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {
    ensure(h > 0 && w > 0, "plane dimensions must be positive");
  }

  T& at(int r, int c) { return values[static_cast<std::size_t>(r) * width + c]; }
  const T& at(int r, int c) const { return values[static_cast<std::size_t>(r) * width + c]; }
  std::int64_t size() const { return static_cast<std::int64_t>(values.size()); }
};

// H x W x 3 intensity field with channel-interleaved storage, values in [0,1].
template <typename T>
struct Image {
  int height = 0;
  int width = 0;
  std::vector<T> values;  // (r, c, ch) -> values[(r*width + c)*3 + ch]

  Image() = default;
  Image(int h, int w, T fill = T(0))
      : height(h), width(w), values(static_cast<std::size_t>(h) * w * 3, fill) {
    ensure(h > 0 && w > 0, "image dimensions must be positive");
  }

  T& at(int r, int c, int ch) {
    return values[(static_cast<std::size_t>(r) * width + c) * 3 + ch];
  }
  const T& at(int r, int c, int ch) const {
    return values[(static_cast<std::size_t>(r) * width + c) * 3 + ch];
  }
  std::int64_t size() const { return static_cast<std::int64_t>(values.size()); }
};

template <typename T>
void validate_image(const Image<T>& img, const char* who) {
  ensure(img.height > 0 && img.width > 0, std::string(who) + ": empty image");
  ensure(img.size() == static_cast<std::int64_t>(img.height) * img.width * 3,
         std::string(who) + ": storage size mismatch");
  for (T v : img.values)
    ensure(std::isfinite(static_cast<double>(v)) && v >= T(0) && v <= T(1),
           std::string(who) + ": image value outside [0,1]");
}

template <typename T>
void validate_depth(const Plane<T>& d, const char* who) {
  ensure(d.height > 0 && d.width > 0, std::string(who) + ": empty depth map");
  for (T v : d.values)
    ensure(std::isfinite(static_cast<double>(v)) && v >= T(0),
           std::string(who) + ": depth must be finite and non-negative");
}

template <typename T, typename U>
Image<U> image_cast(const Image<T>& img) {
  Image<U> out;
  out.height = img.height;
  out.width = img.width;
  out.values.reserve(img.values.size());
  for (T v : img.values) out.values.push_back(static_cast<U>(v));
  return out;
}

template <typename T, typename U>
Plane<U> plane_cast(const Plane<T>& p) {
  Plane<U> out;
  out.height = p.height;
  out.width = p.width;
  out.values.reserve(p.values.size());
  for (T v : p.values) out.values.push_back(static_cast<U>(v));
  return out;
}

namespace detail {

// Sample location for destination index i when resizing n -> m: the usual
// pixel-center convention (i + 0.5) * n/m - 0.5, clamped to the source.
inline void bilinear_axis(int src, int dst, int i, int& lo, int& hi, double& frac) {
  const double pos = (static_cast<double>(i) + 0.5) * static_cast<double>(src) / dst - 0.5;
  const double clamped = std::min(std::max(pos, 0.0), static_cast<double>(src - 1));
  lo = static_cast<int>(std::floor(clamped));
  hi = std::min(lo + 1, src - 1);
  frac = clamped - lo;
}

}  // namespace detail

template <typename T>
Image<T> resize_bilinear(const Image<T>& img, int h, int w) {
  ensure(h > 0 && w > 0, "resize: target dimensions must be positive");
  if (h == img.height && w == img.width) return img;
  Image<T> out(h, w);
  for (int r = 0; r < h; ++r) {
    int r0, r1;
    double fr;
    detail::bilinear_axis(img.height, h, r, r0, r1, fr);
    for (int c = 0; c < w; ++c) {
      int c0, c1;
      double fc;
      detail::bilinear_axis(img.width, w, c, c0, c1, fc);
      for (int ch = 0; ch < 3; ++ch) {
        const double top = (1.0 - fc) * img.at(r0, c0, ch) + fc * img.at(r0, c1, ch);
        const double bot = (1.0 - fc) * img.at(r1, c0, ch) + fc * img.at(r1, c1, ch);
        out.at(r, c, ch) = static_cast<T>((1.0 - fr) * top + fr * bot);
      }
    }
  }
  return out;
}

template <typename T>
Plane<T> resize_bilinear(const Plane<T>& p, int h, int w) {
  ensure(h > 0 && w > 0, "resize: target dimensions must be positive");
  if (h == p.height && w == p.width) return p;
  Plane<T> out(h, w);
  for (int r = 0; r < h; ++r) {
    int r0, r1;
    double fr;
    detail::bilinear_axis(p.height, h, r, r0, r1, fr);
    for (int c = 0; c < w; ++c) {
      int c0, c1;
      double fc;
      detail::bilinear_axis(p.width, w, c, c0, c1, fc);
      const double top = (1.0 - fc) * p.at(r0, c0) + fc * p.at(r0, c1);
      const double bot = (1.0 - fc) * p.at(r1, c0) + fc * p.at(r1, c1);
      out.at(r, c) = static_cast<T>((1.0 - fr) * top + fr * bot);
    }
  }
  return out;
}

// Horizontal mirror: pixel (r, c) <-> (r, W-1-c). An exact involution.
template <typename T>
Image<T> hflip(const Image<T>& img) {
  Image<T> out(img.height, img.width);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      for (int ch = 0; ch < 3; ++ch) out.at(r, c, ch) = img.at(r, img.width - 1 - c, ch);
  return out;
}

// Pack one image into a [3,H,W] block at `dst` (CHW planes).
template <typename T>
void image_to_chw(const Image<T>& img, T* dst) {
  const std::int64_t plane = static_cast<std::int64_t>(img.height) * img.width;
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      for (int ch = 0; ch < 3; ++ch)
        dst[ch * plane + static_cast<std::int64_t>(r) * img.width + c] = img.at(r, c, ch);
}

template <typename T>
ad::Tensor<T> image_to_tensor(const Image<T>& img) {
  ad::Tensor<T> t({1, 3, img.height, img.width});
  image_to_chw(img, t.data.data());
  return t;
}

// Inverse of image_to_tensor for a single [*,3,H,W] sample; values are
// clipped to [0,1] so the result is always a valid Image.
template <typename T>
Image<T> tensor_to_image(const ad::Tensor<T>& t, int batch_index = 0) {
  ensure(t.ndim() == 4 && t.dim(1) == 3, "tensor_to_image: expects [N,3,H,W]");
  ensure(batch_index >= 0 && batch_index < t.dim(0), "tensor_to_image: bad batch index");
  const int h = t.dim(2), w = t.dim(3);
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  const T* src = t.data.data() + static_cast<std::int64_t>(batch_index) * 3 * plane;
  Image<T> img(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (int ch = 0; ch < 3; ++ch) {
        T v = src[ch * plane + static_cast<std::int64_t>(r) * w + c];
        img.at(r, c, ch) = std::min(std::max(v, T(0)), T(1));
      }
  return img;
}

}  // namespace dehaze
