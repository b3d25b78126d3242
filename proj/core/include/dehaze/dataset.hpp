#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dehaze/error.hpp"
#include "dehaze/haze.hpp"
#include "dehaze/image.hpp"
#include "dehaze/random.hpp"
#include "dehaze/tensor.hpp"

namespace dehaze {

struct RgbdSample {
  std::string id;
  Image<float> image;
  Plane<float> depth;
  std::string source_tag;  // indoor / outdoor
};

enum class Augmentation { none, hflip };

inline const char* to_string(Augmentation a) { return a == Augmentation::none ? "none" : "hflip"; }

struct PairedSample {
  std::string id;
  Image<float> hazy;
  Image<float> clear;
  float s_used = 0.0f;
  Augmentation aug = Augmentation::none;
};

struct SplitSpec {
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  std::size_t n_test = 0;
  std::uint64_t seed = 0;
};

struct CorpusSplit {
  std::vector<PairedSample> train;
  std::vector<PairedSample> val;
  std::vector<PairedSample> test;
};

struct Batch {
  ad::Tensor<float> hazy;   // [N,3,H,W]
  ad::Tensor<float> clear;  // [N,3,H,W]
  std::vector<std::string> ids;
};

// Seeded epoch iteration: the permutation is drawn from seed ^ epoch, images
// are packed [N,3,H,W], and the final partial batch is emitted.
class BatchStream {
 public:
  BatchStream(const std::vector<PairedSample>& samples, int batch_size, std::uint64_t seed,
              std::uint64_t epoch);

  bool next(Batch& out);
  std::size_t batches_per_epoch() const;

 private:
  const std::vector<PairedSample>* samples_;
  int batch_size_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

RgbdSample load_rgbd(const std::filesystem::path& image_path,
                     const std::filesystem::path& depth_path);

// Seeded uniform shuffle, then the first n_train / n_val / n_test entries.
CorpusSplit split_corpus(std::vector<PairedSample> samples, const SplitSpec& spec);

// Returns originals followed by horizontally mirrored copies tagged hflip.
std::vector<PairedSample> augment_hflip(const std::vector<PairedSample>& train);

inline BatchStream iterate_batches(const std::vector<PairedSample>& samples, int batch_size,
                                   std::uint64_t seed, std::uint64_t epoch) {
  return BatchStream(samples, batch_size, seed, epoch);
}

// Unpack one batch entry back to an Image; exact inverse of the packing.
Image<float> unpack_batch_image(const ad::Tensor<float>& batch, int index);

// -- paired dataset directory layout ------------------------------------
//
//   <dir>/hazy/<id>.ppm
//   <dir>/clear/<id>.ppm
//   <dir>/manifest.tsv     one line per sample: id<TAB>s_used<TAB>aug

struct ManifestEntry {
  std::string id;
  float s_used = 0.0f;
  Augmentation aug = Augmentation::none;
};

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

void save_paired_dataset(const std::filesystem::path& dir,
                         const std::vector<PairedSample>& samples);
std::vector<PairedSample> load_paired_dataset(const std::filesystem::path& dir);

// Filename stems (without extension) of files in `dir` with any of `exts`,
// sorted ascending.
std::vector<std::string> list_stems(const std::filesystem::path& dir,
                                    const std::vector<std::string>& exts);

}  // namespace dehaze
