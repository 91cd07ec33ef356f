#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "selfment/tensor_io.hpp"

namespace selfment {

/// Pixel-resolution binary map (ground truth or a binarized prediction).
struct BinaryMap {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<std::uint8_t> values;

  BinaryMap() = default;
  BinaryMap(std::uint32_t h, std::uint32_t w, std::uint8_t fill = 0)
      : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}
  std::size_t size() const { return values.size(); }
  std::size_t count() const;
};

/// Ground truth from an 8-bit map: byte > 127 is foreground.
BinaryMap ground_truth_from(const ProbMap& map);
/// Prediction binarized at `threshold` (p >= threshold is foreground).
BinaryMap binarize_prediction(const ProbMap& pred, double threshold = 0.5);

inline constexpr double kFBeta2 = 0.3;
inline constexpr double kSMeasureAlpha = 0.5;

/// Max F-beta (beta^2 = 0.3) over thresholds k/255, k = 0..255, with
/// pred >= t counted positive.
double f_max(const ProbMap& pred, const BinaryMap& gt);
double iou(const BinaryMap& pred, const BinaryMap& gt);
double accuracy(const BinaryMap& pred, const BinaryMap& gt);
double mae(const ProbMap& pred, const BinaryMap& gt);
/// Structure measure: alpha * object-aware + (1 - alpha) * region-aware.
double s_measure(const ProbMap& pred, const BinaryMap& gt, double alpha = kSMeasureAlpha);
/// Enhanced-alignment measure of a binary prediction, averaged over pixels.
double e_measure(const BinaryMap& pred, const BinaryMap& gt);
/// Weighted F-measure (beta^2 = 1, 7x7 Gaussian with sigma 5).
double weighted_f(const ProbMap& pred, const BinaryMap& gt);

/// Squared Euclidean distance to the nearest foreground pixel and that
/// pixel's index (ties: smallest row, then smallest column). Foreground
/// pixels map to themselves at distance 0.
struct DistanceTransform {
  std::vector<double> squared;
  std::vector<std::size_t> nearest;
};
DistanceTransform nearest_foreground(const BinaryMap& mask);

struct MetricReport {
  double f_max = 0.0;
  double iou = 0.0;
  double acc = 0.0;
  double mae = 0.0;
  double s_measure = 0.0;
  double e_measure = 0.0;
  double weighted_f = 0.0;
};

MetricReport evaluate(const ProbMap& pred, const BinaryMap& gt);
MetricReport mean_report(std::span<const MetricReport> reports);

struct NamedReport {
  std::string image_id;
  MetricReport report;
};

/// TSV with a leading '#' line naming the metric variants, a header row,
/// one row per image and a final MEAN row.
std::string format_eval_tsv(std::span<const NamedReport> rows);

}  // namespace selfment
