#include "dehaze/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "dehaze/dataset.hpp"
#include "dehaze/image_io.hpp"

namespace dehaze {
namespace {

std::string format_metric(double v, const char* fmt) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

}  // namespace

EvalSummary evaluate_directory(const std::filesystem::path& pred_dir,
                               const std::filesystem::path& gt_dir, const ScoreWeights& weights) {
  const auto pred_stems = list_stems(pred_dir, {".ppm"});
  const auto gt_stems = list_stems(gt_dir, {".ppm"});
  ensure(!gt_stems.empty(), gt_dir.string() + ": no .ppm files");

  std::vector<std::string> only_pred, only_gt;
  std::set_difference(pred_stems.begin(), pred_stems.end(), gt_stems.begin(), gt_stems.end(),
                      std::back_inserter(only_pred));
  std::set_difference(gt_stems.begin(), gt_stems.end(), pred_stems.begin(), pred_stems.end(),
                      std::back_inserter(only_gt));
  if (!only_pred.empty() || !only_gt.empty()) {
    std::ostringstream os;
    os << "evaluate: unmatched stems:";
    for (const auto& s : only_pred) os << " " << s << " (prediction only)";
    for (const auto& s : only_gt) os << " " << s << " (ground truth only)";
    throw Error(os.str());
  }

  EvalSummary summary;
  double psnr_acc = 0.0, ssim_acc = 0.0, score_acc = 0.0;
  for (const std::string& stem : gt_stems) {  // sorted, so output order is by id
    const Image<float> pred = load_ppm(pred_dir / (stem + ".ppm"));
    const Image<float> gt = load_ppm(gt_dir / (stem + ".ppm"));
    ensure(pred.height == gt.height && pred.width == gt.width,
           "evaluate: pair " + stem + " has mismatched dimensions");
    EvalRecord rec;
    rec.id = stem;
    rec.psnr = psnr(pred, gt);
    rec.ssim = ssim(pred, gt);
    rec.score = score(rec.psnr, rec.ssim, weights);
    if (std::isinf(rec.psnr)) {
      ++summary.infinite_psnr_count;
    } else {
      psnr_acc += rec.psnr;
    }
    ssim_acc += rec.ssim;
    score_acc += rec.score;
    summary.records.push_back(std::move(rec));
  }
  const auto n = static_cast<double>(summary.records.size());
  const std::size_t finite = summary.records.size() - summary.infinite_psnr_count;
  summary.mean_psnr = finite ? psnr_acc / static_cast<double>(finite) : 0.0;
  summary.mean_ssim = ssim_acc / n;
  summary.mean_score = score_acc / n;
  return summary;
}

void write_eval_csv(std::ostream& out, const EvalSummary& summary) {
  out << "id,psnr,ssim,score\n";
  for (const auto& r : summary.records) {
    out << r.id << "," << format_metric(r.psnr, "%.4f") << "," << format_metric(r.ssim, "%.6f")
        << "," << format_metric(r.score, "%.6f") << "\n";
  }
  out << "MEAN," << format_metric(summary.mean_psnr, "%.4f") << ","
      << format_metric(summary.mean_ssim, "%.6f") << ","
      << format_metric(summary.mean_score, "%.6f") << "\n";
}

std::string format_eval_table(const EvalSummary& summary) {
  std::ostringstream os;
  os << "pairs: " << summary.records.size();
  if (summary.infinite_psnr_count)
    os << " (" << summary.infinite_psnr_count << " with infinite PSNR, excluded from mean PSNR)";
  os << "\n";
  os << "Metric   Mean\n";
  os << "PSNR     " << format_metric(summary.mean_psnr, "%.2f") << "\n";
  os << "SSIM     " << format_metric(summary.mean_ssim, "%.3f") << "\n";
  os << "Score    " << format_metric(summary.mean_score, "%.3f") << "\n";
  return os.str();
}

}  // namespace dehaze
