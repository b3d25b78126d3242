#pragma once

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "dehaze/dataset.hpp"
#include "dehaze/image.hpp"
#include "dehaze/random.hpp"

namespace dehaze::testing {

// Procedural "scene": blocks of saturated color with per-pixel shading and a
// scattering of dark patches, so images have healthy contrast and most
// pixels carry a low-intensity channel (the statistics dark-channel methods
// expect).
inline Image<float> make_scene_image(int h, int w, Rng& rng) {
  Image<float> img(h, w);
  const int cells = 4;
  std::vector<std::array<float, 3>> palette(static_cast<std::size_t>(cells * cells));
  for (auto& color : palette) {
    // one channel near zero, the others spread over [0,1]
    const int dark_ch = static_cast<int>(rng.below(3));
    for (int ch = 0; ch < 3; ++ch)
      color[static_cast<std::size_t>(ch)] =
          ch == dark_ch ? static_cast<float>(rng.uniform(0.0, 0.08))
                        : static_cast<float>(rng.uniform(0.15, 1.0));
  }
  const double fx = rng.uniform(1.0, 3.0), fy = rng.uniform(1.0, 3.0);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const int cell = (r * cells / h) * cells + (c * cells / w);
      const double shade =
          0.55 + 0.45 * std::sin(fx * 6.2832 * c / w) * std::cos(fy * 6.2832 * r / h);
      for (int ch = 0; ch < 3; ++ch) {
        const float v = palette[static_cast<std::size_t>(cell)][static_cast<std::size_t>(ch)] *
                        static_cast<float>(shade);
        img.at(r, c, ch) = std::min(std::max(v, 0.0f), 1.0f);
      }
    }
  return img;
}

// Smooth depth ramp plus a sinusoidal bump, in arbitrary units.
inline Plane<float> make_scene_depth(int h, int w, Rng& rng) {
  Plane<float> depth(h, w);
  const double angle = rng.uniform(0.0, 6.2832);
  const double gx = std::cos(angle), gy = std::sin(angle);
  const double bump = rng.uniform(0.1, 0.5);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const double u = static_cast<double>(c) / w, v = static_cast<double>(r) / h;
      const double d = 1.0 + gx * u + gy * v + bump * std::sin(6.2832 * (u + v));
      depth.at(r, c) = static_cast<float>(500.0 * (d + 2.0));  // keep strictly positive
    }
  return depth;
}

inline std::vector<RgbdSample> make_rgbd_corpus(int n, int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<RgbdSample> corpus;
  corpus.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    RgbdSample s;
    char id[32];
    std::snprintf(id, sizeof(id), "scene%04d", i);
    s.id = id;
    s.image = make_scene_image(h, w, rng);
    s.depth = make_scene_depth(h, w, rng);
    s.source_tag = (i % 2 == 0) ? "indoor" : "outdoor";
    corpus.push_back(std::move(s));
  }
  return corpus;
}

// Unique scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("dehaze_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace dehaze::testing
