#pragma once

#include <filesystem>

#include "dehaze/image.hpp"

namespace dehaze {

// Raster I/O. Images are binary PPM (P6, maxval 255); depth maps are binary
// PGM (P5, maxval 255 or 65535, raw counts returned as floats) or the raw
// float format below. Quantization on save is round-to-nearest.
//
// Raw float depth ("DPF1"): 4 magic bytes "DPF1", then height and width as
// little-endian u32, then height*width little-endian f32 values row-major.

Image<float> load_ppm(const std::filesystem::path& path);
void save_ppm(const std::filesystem::path& path, const Image<float>& img);

Plane<float> load_pgm(const std::filesystem::path& path);
void save_pgm16(const std::filesystem::path& path, const Plane<float>& raw_counts);

Plane<float> load_depth_raw(const std::filesystem::path& path);
void save_depth_raw(const std::filesystem::path& path, const Plane<float>& depth);

// Dispatches on extension: .pgm -> PGM, .dpf -> raw float.
Plane<float> load_depth(const std::filesystem::path& path);

}  // namespace dehaze
