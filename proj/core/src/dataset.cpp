#include "dehaze/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "dehaze/image_io.hpp"

namespace dehaze {

BatchStream::BatchStream(const std::vector<PairedSample>& samples, int batch_size,
                         std::uint64_t seed, std::uint64_t epoch)
    : samples_(&samples), batch_size_(batch_size) {
  ensure(batch_size >= 1, "iterate_batches: batch size must be >= 1");
  ensure(!samples.empty(), "iterate_batches: empty sample list");
  order_.resize(samples.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  Rng rng(seed ^ epoch);
  // Fisher-Yates with explicit bounded draws, for a portable permutation.
  for (std::size_t i = order_.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(order_[i - 1], order_[j]);
  }
}

std::size_t BatchStream::batches_per_epoch() const {
  return (order_.size() + static_cast<std::size_t>(batch_size_) - 1) /
         static_cast<std::size_t>(batch_size_);
}

bool BatchStream::next(Batch& out) {
  if (pos_ >= order_.size()) return false;
  const std::size_t take = std::min(static_cast<std::size_t>(batch_size_), order_.size() - pos_);
  const PairedSample& first = (*samples_)[order_[pos_]];
  const int h = first.hazy.height, w = first.hazy.width;
  out.hazy = ad::Tensor<float>({static_cast<int>(take), 3, h, w});
  out.clear = ad::Tensor<float>({static_cast<int>(take), 3, h, w});
  out.ids.clear();
  const std::int64_t block = static_cast<std::int64_t>(3) * h * w;
  for (std::size_t k = 0; k < take; ++k) {
    const PairedSample& s = (*samples_)[order_[pos_ + k]];
    ensure(s.hazy.height == h && s.hazy.width == w && s.clear.height == h && s.clear.width == w,
           "iterate_batches: sample " + s.id + " has mismatched dimensions");
    image_to_chw(s.hazy, out.hazy.data.data() + static_cast<std::int64_t>(k) * block);
    image_to_chw(s.clear, out.clear.data.data() + static_cast<std::int64_t>(k) * block);
    out.ids.push_back(s.id);
  }
  pos_ += take;
  return true;
}

Image<float> unpack_batch_image(const ad::Tensor<float>& batch, int index) {
  ensure(batch.ndim() == 4 && batch.dim(1) == 3, "unpack: expects [N,3,H,W]");
  ensure(index >= 0 && index < batch.dim(0), "unpack: index out of range");
  const int h = batch.dim(2), w = batch.dim(3);
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  const float* src = batch.data.data() + static_cast<std::int64_t>(index) * 3 * plane;
  Image<float> img(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (int ch = 0; ch < 3; ++ch)
        img.at(r, c, ch) = src[ch * plane + static_cast<std::int64_t>(r) * w + c];
  return img;
}

RgbdSample load_rgbd(const std::filesystem::path& image_path,
                     const std::filesystem::path& depth_path) {
  RgbdSample s;
  s.id = image_path.stem().string();
  s.image = load_ppm(image_path);
  s.depth = load_depth(depth_path);
  ensure(s.image.height == s.depth.height && s.image.width == s.depth.width,
         "load_rgbd: " + s.id + ": image is " + std::to_string(s.image.width) + "x" +
             std::to_string(s.image.height) + " but depth is " + std::to_string(s.depth.width) +
             "x" + std::to_string(s.depth.height));
  validate_depth(s.depth, "load_rgbd");
  return s;
}

CorpusSplit split_corpus(std::vector<PairedSample> samples, const SplitSpec& spec) {
  ensure(spec.n_train + spec.n_val + spec.n_test <= samples.size(),
         "split_corpus: requested " +
             std::to_string(spec.n_train + spec.n_val + spec.n_test) +
             " samples from a corpus of " + std::to_string(samples.size()));
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(spec.seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(order[i - 1], order[j]);
  }
  CorpusSplit out;
  out.train.reserve(spec.n_train);
  out.val.reserve(spec.n_val);
  out.test.reserve(spec.n_test);
  std::size_t k = 0;
  for (std::size_t i = 0; i < spec.n_train; ++i) out.train.push_back(std::move(samples[order[k++]]));
  for (std::size_t i = 0; i < spec.n_val; ++i) out.val.push_back(std::move(samples[order[k++]]));
  for (std::size_t i = 0; i < spec.n_test; ++i) out.test.push_back(std::move(samples[order[k++]]));
  return out;
}

std::vector<PairedSample> augment_hflip(const std::vector<PairedSample>& train) {
  std::vector<PairedSample> out;
  out.reserve(train.size() * 2);
  out = train;
  for (const PairedSample& s : train) {
    PairedSample f;
    f.id = s.id;
    f.hazy = hflip(s.hazy);
    f.clear = hflip(s.clear);
    f.s_used = s.s_used;
    f.aug = Augmentation::hflip;
    out.push_back(std::move(f));
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path);
  ensure(out.good(), path.string() + ": cannot open for writing");
  for (const auto& e : entries) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", static_cast<double>(e.s_used));
    out << e.id << "\t" << buf << "\t" << to_string(e.aug) << "\n";
  }
  ensure(out.good(), path.string() + ": write failed");
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  ensure(in.good(), path.string() + ": cannot open manifest");
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    ManifestEntry e;
    std::string s_str, aug_str;
    ensure(static_cast<bool>(std::getline(ls, e.id, '\t')) &&
               static_cast<bool>(std::getline(ls, s_str, '\t')) &&
               static_cast<bool>(std::getline(ls, aug_str)),
           path.string() + ":" + std::to_string(lineno) + ": malformed manifest line");
    try {
      e.s_used = std::stof(s_str);
    } catch (const std::exception&) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": bad s_used '" + s_str + "'");
    }
    if (aug_str == "none") {
      e.aug = Augmentation::none;
    } else if (aug_str == "hflip") {
      e.aug = Augmentation::hflip;
    } else {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": bad aug tag '" + aug_str + "'");
    }
    out.push_back(std::move(e));
  }
  return out;
}

void save_paired_dataset(const std::filesystem::path& dir,
                         const std::vector<PairedSample>& samples) {
  std::filesystem::create_directories(dir / "hazy");
  std::filesystem::create_directories(dir / "clear");
  std::vector<ManifestEntry> manifest;
  manifest.reserve(samples.size());
  for (const PairedSample& s : samples) {
    save_ppm(dir / "hazy" / (s.id + ".ppm"), s.hazy);
    save_ppm(dir / "clear" / (s.id + ".ppm"), s.clear);
    manifest.push_back({s.id, s.s_used, s.aug});
  }
  write_manifest(dir / "manifest.tsv", manifest);
}

std::vector<PairedSample> load_paired_dataset(const std::filesystem::path& dir) {
  const auto entries = read_manifest(dir / "manifest.tsv");
  ensure(!entries.empty(), dir.string() + ": empty manifest");
  std::vector<PairedSample> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    PairedSample s;
    s.id = e.id;
    s.s_used = e.s_used;
    s.aug = e.aug;
    s.hazy = load_ppm(dir / "hazy" / (e.id + ".ppm"));
    s.clear = load_ppm(dir / "clear" / (e.id + ".ppm"));
    ensure(s.hazy.height == s.clear.height && s.hazy.width == s.clear.width,
           dir.string() + ": pair " + e.id + " has mismatched dimensions");
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::string> list_stems(const std::filesystem::path& dir,
                                    const std::vector<std::string>& exts) {
  ensure(std::filesystem::is_directory(dir), dir.string() + ": not a directory");
  std::set<std::string> stems;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = entry.path().extension().string();
    if (std::find(exts.begin(), exts.end(), ext) != exts.end())
      stems.insert(entry.path().stem().string());
  }
  return {stems.begin(), stems.end()};
}

}  // namespace dehaze
