#pragma once

#include <cmath>
#include <filesystem>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "dehaze/error.hpp"
#include "dehaze/image.hpp"

namespace dehaze {

struct ScoreWeights {
  double w_psnr = 0.05;
  double w_ssim = 1.0;

  void validate() const {
    ensure(w_psnr >= 0.0 && w_ssim >= 0.0, "score weights must be non-negative");
  }
};

// 10 log10(1 / MSE) dB with MAX = 1 and the MSE over all pixels and
// channels; identical images give +infinity.
template <typename T>
double psnr(const Image<T>& a, const Image<T>& b) {
  ensure(a.height == b.height && a.width == b.width, "psnr: shape mismatch");
  double sq = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double d = static_cast<double>(a.values[i]) - static_cast<double>(b.values[i]);
    sq += d * d;
  }
  const double mse = sq / static_cast<double>(a.values.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

namespace detail {

// 11-tap Gaussian window, sigma 1.5, normalized to sum 1.
inline const std::vector<double>& ssim_window() {
  static const std::vector<double> w = [] {
    std::vector<double> v(11);
    double total = 0.0;
    for (int i = 0; i < 11; ++i) {
      const double d = i - 5.0;
      v[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
      total += v[static_cast<std::size_t>(i)];
    }
    for (auto& x : v) x /= total;
    return v;
  }();
  return w;
}

// Valid-region separable Gaussian filter: output is (h-10) x (w-10).
inline std::vector<double> gauss_valid(const std::vector<double>& src, int h, int w, int& oh,
                                       int& ow) {
  const auto& win = ssim_window();
  oh = h - 10;
  ow = w - 10;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (int j = 0; j < 11; ++j) acc += win[static_cast<std::size_t>(j)] * src[static_cast<std::size_t>(r) * w + c + j];
      tmp[static_cast<std::size_t>(r) * ow + c] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int r = 0; r < oh; ++r)
    for (int c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (int i = 0; i < 11; ++i) acc += win[static_cast<std::size_t>(i)] * tmp[static_cast<std::size_t>(r + i) * ow + c];
      out[static_cast<std::size_t>(r) * ow + c] = acc;
    }
  return out;
}

}  // namespace detail

// Windowed SSIM with the standard constants: 11x11 Gaussian window with
// sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic range 1. Computed per channel
// over all valid window positions and averaged over positions and channels.
template <typename T>
double ssim(const Image<T>& a, const Image<T>& b) {
  ensure(a.height == b.height && a.width == b.width, "ssim: shape mismatch");
  ensure(a.height >= 11 && a.width >= 11,
         "ssim: image smaller than the 11x11 window (" + std::to_string(a.width) + "x" +
             std::to_string(a.height) + ")");
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  const int h = a.height, w = a.width;
  const std::size_t n = static_cast<std::size_t>(h) * w;

  double total = 0.0;
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (int ch = 0; ch < 3; ++ch) {
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        const std::size_t i = static_cast<std::size_t>(r) * w + c;
        x[i] = static_cast<double>(a.at(r, c, ch));
        y[i] = static_cast<double>(b.at(r, c, ch));
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
      }
    int oh = 0, ow = 0;
    const auto mx = detail::gauss_valid(x, h, w, oh, ow);
    const auto my = detail::gauss_valid(y, h, w, oh, ow);
    const auto mxx = detail::gauss_valid(xx, h, w, oh, ow);
    const auto myy = detail::gauss_valid(yy, h, w, oh, ow);
    const auto mxy = detail::gauss_valid(xy, h, w, oh, ow);
    double acc = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double var_x = mxx[i] - mx[i] * mx[i];
      const double var_y = myy[i] - my[i] * my[i];
      const double cov = mxy[i] - mx[i] * my[i];
      acc += ((2.0 * mx[i] * my[i] + kC1) * (2.0 * cov + kC2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + kC1) * (var_x + var_y + kC2));
    }
    total += acc / static_cast<double>(mx.size());
  }
  return total / 3.0;
}

// Score = w_psnr * PSNR + w_ssim * SSIM; an infinite PSNR short-circuits to
// an infinite score.
inline double score(double psnr_value, double ssim_value, const ScoreWeights& w = {}) {
  w.validate();
  if (std::isinf(psnr_value)) return std::numeric_limits<double>::infinity();
  return w.w_psnr * psnr_value + w.w_ssim * ssim_value;
}

struct EvalRecord {
  std::string id;
  double psnr = 0.0;
  double ssim = 0.0;
  double score = 0.0;
};

struct EvalSummary {
  std::vector<EvalRecord> records;      // ordered by id
  double mean_psnr = 0.0;               // over finite entries only
  std::size_t infinite_psnr_count = 0;  // entries excluded from mean_psnr
  double mean_ssim = 0.0;
  double mean_score = 0.0;
};

// Pairs matching filename stems of pred_dir and gt_dir (PPM images) and
// evaluates each pair; unmatched stems on either side are an error.
EvalSummary evaluate_directory(const std::filesystem::path& pred_dir,
                               const std::filesystem::path& gt_dir,
                               const ScoreWeights& weights = {});

// CSV with header id,psnr,ssim,score, one row per pair, and a final MEAN
// row; infinite PSNR is serialized as the literal `inf`.
void write_eval_csv(std::ostream& out, const EvalSummary& summary);

// Fixed-layout text table of the aggregate means for stdout.
std::string format_eval_table(const EvalSummary& summary);

}  // namespace dehaze
