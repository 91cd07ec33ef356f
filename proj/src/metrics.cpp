#include "selfment/metrics.hpp"

#include <algorithm>
#include <array>
#include <cfloat>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "selfment/errors.hpp"

namespace selfment {

namespace {

constexpr double kEps = DBL_EPSILON;

template <class A, class B>
void check_shapes(const A& a, const B& b) {
  if (a.height != b.height || a.width != b.width) {
    throw ValidationError("prediction is " + std::to_string(a.height) + "x" + std::to_string(a.width) +
                          ", ground truth is " + std::to_string(b.height) + "x" + std::to_string(b.width));
  }
  if (a.height == 0 || a.width == 0) throw ValidationError("metric inputs must be non-empty");
}

/// Largest k in [0, 255] with p >= k / 255.
int level_of(double p) {
  int k = std::clamp(static_cast<int>(std::floor(p * 255.0)), 0, 255);
  while (k < 255 && p >= (k + 1) / 255.0) ++k;
  while (k > 0 && p < k / 255.0) --k;
  return k;
}

double object_score(double mean, double stddev) { return 2.0 * mean / (mean * mean + 1.0 + stddev + kEps); }

/// Mean and sample standard deviation of values selected by `select`.
template <class Value, class Select>
std::pair<double, double> masked_moments(std::size_t n, Value value, Select select) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (select(i)) {
      sum += value(i);
      ++count;
    }
  }
  if (count == 0) return {0.0, 0.0};
  const double mean = sum / static_cast<double>(count);
  if (count == 1) return {mean, 0.0};
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (select(i)) ss += (value(i) - mean) * (value(i) - mean);
  }
  return {mean, std::sqrt(ss / static_cast<double>(count - 1))};
}

double s_object(const ProbMap& pred, const BinaryMap& gt) {
  const std::size_t n = gt.size();
  const auto [fg_mean, fg_std] = masked_moments(
      n, [&](std::size_t i) { return pred.values[i]; }, [&](std::size_t i) { return gt.values[i] != 0; });
  const auto [bg_mean, bg_std] = masked_moments(
      n, [&](std::size_t i) { return 1.0 - pred.values[i]; }, [&](std::size_t i) { return gt.values[i] == 0; });
  const double u = static_cast<double>(gt.count()) / static_cast<double>(n);
  return u * object_score(fg_mean, fg_std) + (1.0 - u) * object_score(bg_mean, bg_std);
}

/// Structural similarity of one rectangular block [r0, r1) x [c0, c1).
double block_ssim(const ProbMap& pred, const BinaryMap& gt, std::size_t r0, std::size_t r1, std::size_t c0,
                  std::size_t c1) {
  const std::size_t n = (r1 - r0) * (c1 - c0);
  if (n == 0) return 0.0;
  const std::size_t w = gt.width;
  double sx = 0.0, sy = 0.0;
  for (std::size_t r = r0; r < r1; ++r)
    for (std::size_t c = c0; c < c1; ++c) {
      sx += pred.values[r * w + c];
      sy += gt.values[r * w + c];
    }
  const double x = sx / static_cast<double>(n);
  const double y = sy / static_cast<double>(n);
  double vx = 0.0, vy = 0.0, cxy = 0.0;
  for (std::size_t r = r0; r < r1; ++r)
    for (std::size_t c = c0; c < c1; ++c) {
      const double dx = pred.values[r * w + c] - x;
      const double dy = gt.values[r * w + c] - y;
      vx += dx * dx;
      vy += dy * dy;
      cxy += dx * dy;
    }
  const double denom = static_cast<double>(n) - 1.0 + kEps;
  vx /= denom;
  vy /= denom;
  cxy /= denom;
  const double alpha = 4.0 * x * y * cxy;
  const double beta = (x * x + y * y) * (vx + vy);
  if (alpha != 0.0) return alpha / (beta + kEps);
  if (beta == 0.0) return 1.0;
  return 0.0;
}

double s_region(const ProbMap& pred, const BinaryMap& gt) {
  const std::size_t h = gt.height, w = gt.width;
  const std::size_t total = gt.count();
  std::size_t cx, cy;  // 1-based centroid, rounded half away from zero
  if (total == 0) {
    cx = static_cast<std::size_t>(std::lround(w / 2.0));
    cy = static_cast<std::size_t>(std::lround(h / 2.0));
  } else {
    double sum_c = 0.0, sum_r = 0.0;
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c)
        if (gt.values[r * w + c]) {
          sum_c += static_cast<double>(c + 1);
          sum_r += static_cast<double>(r + 1);
        }
    cx = static_cast<std::size_t>(std::lround(sum_c / static_cast<double>(total)));
    cy = static_cast<std::size_t>(std::lround(sum_r / static_cast<double>(total)));
  }
  const double area = static_cast<double>(h * w);
  const double w1 = static_cast<double>(cx * cy) / area;
  const double w2 = static_cast<double>((w - cx) * cy) / area;
  const double w3 = static_cast<double>(cx * (h - cy)) / area;
  const double w4 = 1.0 - w1 - w2 - w3;
  return w1 * block_ssim(pred, gt, 0, cy, 0, cx) + w2 * block_ssim(pred, gt, 0, cy, cx, w) +
         w3 * block_ssim(pred, gt, cy, h, 0, cx) + w4 * block_ssim(pred, gt, cy, h, cx, w);
}

/// One-dimensional squared distance transform (lower envelope of parabolas).
void distance_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v, std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s;
    while (true) {
      s = ((f[q] + static_cast<double>(q) * q) - (f[v[k]] + static_cast<double>(v[k]) * v[k])) / (2.0 * (q - v[k]));
      if (s <= z[k] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    d[q] = static_cast<double>(q - v[k]) * (q - v[k]) + f[v[k]];
  }
}

std::array<double, 49> gaussian_kernel_7x7() {
  std::array<double, 49> k{};
  double peak = 0.0;
  for (int y = -3; y <= 3; ++y)
    for (int x = -3; x <= 3; ++x) {
      const double v = std::exp(-(x * x + y * y) / (2.0 * 25.0));
      k[(y + 3) * 7 + (x + 3)] = v;
      peak = std::max(peak, v);
    }
  double sum = 0.0;
  for (auto& v : k) {
    if (v < kEps * peak) v = 0.0;
    sum += v;
  }
  for (auto& v : k) v /= sum;
  return k;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::size_t BinaryMap::count() const {
  return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](std::uint8_t v) { return v != 0; }));
}

BinaryMap ground_truth_from(const ProbMap& map) {
  BinaryMap out(map.height, map.width);
  for (std::size_t i = 0; i < map.size(); ++i) out.values[i] = map.values[i] > 127.0 / 255.0 ? 1 : 0;
  return out;
}

BinaryMap binarize_prediction(const ProbMap& pred, double threshold) {
  BinaryMap out(pred.height, pred.width);
  for (std::size_t i = 0; i < pred.size(); ++i) out.values[i] = pred.values[i] >= threshold ? 1 : 0;
  return out;
}

double f_max(const ProbMap& pred, const BinaryMap& gt) {
  check_shapes(pred, gt);
  std::array<std::size_t, 256> pos{}, neg{};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const int k = level_of(pred.values[i]);
    (gt.values[i] ? pos : neg)[static_cast<std::size_t>(k)]++;
  }
  const std::size_t gt_count = gt.count();
  double best = 0.0;
  std::size_t tp = 0, fp = 0;
  for (int k = 255; k >= 0; --k) {
    tp += pos[static_cast<std::size_t>(k)];
    fp += neg[static_cast<std::size_t>(k)];
    double f;
    if (gt_count == 0) {
      f = (tp + fp == 0) ? 1.0 : 0.0;
    } else {
      const double precision = (tp + fp == 0) ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
      const double recall = static_cast<double>(tp) / static_cast<double>(gt_count);
      const double denom = kFBeta2 * precision + recall;
      f = denom > 0.0 ? (1.0 + kFBeta2) * precision * recall / denom : 0.0;
    }
    best = std::max(best, f);
  }
  return best;
}

double iou(const BinaryMap& pred, const BinaryMap& gt) {
  check_shapes(pred, gt);
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    inter += pred.values[i] && gt.values[i];
    uni += pred.values[i] || gt.values[i];
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double accuracy(const BinaryMap& pred, const BinaryMap& gt) {
  check_shapes(pred, gt);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) agree += (pred.values[i] != 0) == (gt.values[i] != 0);
  return static_cast<double>(agree) / static_cast<double>(pred.size());
}

double mae(const ProbMap& pred, const BinaryMap& gt) {
  check_shapes(pred, gt);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(pred.values[i] - (gt.values[i] ? 1.0 : 0.0));
  return sum / static_cast<double>(pred.size());
}

double s_measure(const ProbMap& pred, const BinaryMap& gt, double alpha) {
  check_shapes(pred, gt);
  double mean_pred = 0.0;
  for (double v : pred.values) mean_pred += v;
  mean_pred /= static_cast<double>(pred.size());
  const std::size_t fg = gt.count();
  if (fg == 0) return 1.0 - mean_pred;
  if (fg == gt.size()) return mean_pred;
  const double q = alpha * s_object(pred, gt) + (1.0 - alpha) * s_region(pred, gt);
  return std::max(q, 0.0);
}

double e_measure(const BinaryMap& pred, const BinaryMap& gt) {
  check_shapes(pred, gt);
  const double n = static_cast<double>(gt.size());
  const std::size_t fg = gt.count();
  if (fg == 0 || fg == gt.size()) {
    // Degenerate ground truth: the enhanced map is the (inverted) prediction.
    const double pred_fg = static_cast<double>(pred.count()) / n;
    return fg == 0 ? 1.0 - pred_fg : pred_fg;
  }
  const double mean_pred = static_cast<double>(pred.count()) / n;
  const double mean_gt = static_cast<double>(fg) / n;
  double sum = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const double a = (pred.values[i] ? 1.0 : 0.0) - mean_pred;
    const double b = (gt.values[i] ? 1.0 : 0.0) - mean_gt;
    const double align = 2.0 * a * b / (a * a + b * b + kEps);
    sum += (align + 1.0) * (align + 1.0) / 4.0;
  }
  return sum / n;
}

DistanceTransform nearest_foreground(const BinaryMap& mask) {
  const std::size_t h = mask.height, w = mask.width;
  if (mask.count() == 0) throw ValidationError("distance transform needs at least one foreground pixel");
  constexpr double kInf = 1e20;
  std::vector<double> grid(h * w);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = mask.values[i] ? 0.0 : kInf;

  const std::size_t longest = std::max(h, w);
  std::vector<double> f(longest), d(longest), z(longest + 1);
  std::vector<int> v(longest);
  // Columns, then rows.
  f.resize(h);
  d.resize(h);
  for (std::size_t c = 0; c < w; ++c) {
    for (std::size_t r = 0; r < h; ++r) f[r] = grid[r * w + c];
    distance_1d(f, d, v, z);
    for (std::size_t r = 0; r < h; ++r) grid[r * w + c] = d[r];
  }
  f.resize(w);
  d.resize(w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) f[c] = grid[r * w + c];
    distance_1d(f, d, v, z);
    for (std::size_t c = 0; c < w; ++c) grid[r * w + c] = d[c];
  }

  DistanceTransform out;
  out.squared = grid;
  out.nearest.resize(h * w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t idx = r * w + c;
      if (mask.values[idx]) {
        out.nearest[idx] = idx;
        continue;
      }
      // Enumerate lattice points at exactly the squared distance, in
      // row-major order, and keep the first foreground hit.
      const auto d2 = static_cast<long long>(std::llround(grid[idx]));
      const auto reach = static_cast<long long>(std::floor(std::sqrt(static_cast<double>(d2))));
      bool found = false;
      for (long long dy = -reach; dy <= reach && !found; ++dy) {
        const long long rr = static_cast<long long>(r) + dy;
        if (rr < 0 || rr >= static_cast<long long>(h)) continue;
        const long long rem = d2 - dy * dy;
        auto dx = static_cast<long long>(std::llround(std::sqrt(static_cast<double>(rem))));
        if (dx * dx != rem) continue;
        for (long long cc : {static_cast<long long>(c) - dx, static_cast<long long>(c) + dx}) {
          if (cc < 0 || cc >= static_cast<long long>(w)) continue;
          const std::size_t cand = static_cast<std::size_t>(rr) * w + static_cast<std::size_t>(cc);
          if (mask.values[cand]) {
            out.nearest[idx] = cand;
            found = true;
            break;
          }
        }
      }
      if (!found) throw Error("distance transform failed to locate a nearest foreground pixel");
    }
  }
  return out;
}

double weighted_f(const ProbMap& pred, const BinaryMap& gt) {
  check_shapes(pred, gt);
  const std::size_t h = gt.height, w = gt.width, n = gt.size();
  const std::size_t fg = gt.count();
  if (fg == 0) {
    double mean_pred = 0.0;
    for (double v : pred.values) mean_pred += v;
    return 1.0 - mean_pred / static_cast<double>(n);
  }

  std::vector<double> err(n);
  for (std::size_t i = 0; i < n; ++i) err[i] = std::abs(pred.values[i] - (gt.values[i] ? 1.0 : 0.0));

  const DistanceTransform dt = nearest_foreground(gt);
  std::vector<double> et(n);
  for (std::size_t i = 0; i < n; ++i) et[i] = gt.values[i] ? err[i] : err[dt.nearest[i]];

  // Zero-padded 7x7 Gaussian filtering of et.
  static const std::array<double, 49> kernel = gaussian_kernel_7x7();
  std::vector<double> ea(n, 0.0);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      double s = 0.0;
      for (int ky = -3; ky <= 3; ++ky) {
        const long long rr = static_cast<long long>(r) + ky;
        if (rr < 0 || rr >= static_cast<long long>(h)) continue;
        for (int kx = -3; kx <= 3; ++kx) {
          const long long cc = static_cast<long long>(c) + kx;
          if (cc < 0 || cc >= static_cast<long long>(w)) continue;
          s += kernel[static_cast<std::size_t>((ky + 3) * 7 + (kx + 3))] *
               et[static_cast<std::size_t>(rr) * w + static_cast<std::size_t>(cc)];
        }
      }
      ea[r * w + c] = s;
    }
  }

  double tp_err = 0.0, fp_w = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (gt.values[i]) {
      tp_err += std::min(err[i], ea[i]);
    } else {
      const double importance = 2.0 - std::exp(std::log(0.5) / 5.0 * std::sqrt(dt.squared[i]));
      fp_w += err[i] * importance;
    }
  }
  const double tp_w = static_cast<double>(fg) - tp_err;
  const double recall = 1.0 - tp_err / static_cast<double>(fg);
  const double precision = tp_w / (kEps + tp_w + fp_w);
  return 2.0 * recall * precision / (kEps + recall + precision);
}

MetricReport evaluate(const ProbMap& pred, const BinaryMap& gt) {
  check_shapes(pred, gt);
  const BinaryMap bin = binarize_prediction(pred);
  MetricReport r;
  r.f_max = f_max(pred, gt);
  r.iou = iou(bin, gt);
  r.acc = accuracy(bin, gt);
  r.mae = mae(pred, gt);
  r.s_measure = s_measure(pred, gt);
  r.e_measure = e_measure(bin, gt);
  r.weighted_f = weighted_f(pred, gt);
  return r;
}

MetricReport mean_report(std::span<const MetricReport> reports) {
  MetricReport m;
  if (reports.empty()) return m;
  for (const auto& r : reports) {
    m.f_max += r.f_max;
    m.iou += r.iou;
    m.acc += r.acc;
    m.mae += r.mae;
    m.s_measure += r.s_measure;
    m.e_measure += r.e_measure;
    m.weighted_f += r.weighted_f;
  }
  const double n = static_cast<double>(reports.size());
  m.f_max /= n;
  m.iou /= n;
  m.acc /= n;
  m.mae /= n;
  m.s_measure /= n;
  m.e_measure /= n;
  m.weighted_f /= n;
  return m;
}

std::string format_eval_tsv(std::span<const NamedReport> rows) {
  std::ostringstream out;
  out << "# f_max: beta2=0.3 over 256 thresholds; iou/acc: prediction >= 0.5; s_measure: alpha=0.5; "
         "e_measure: mean enhanced alignment of the 0.5-binarized prediction; weighted_f: beta2=1, 7x7 gaussian "
         "sigma=5\n";
  out << "image_id\tf_max\tiou\tacc\tmae\ts_measure\te_measure\tweighted_f\n";
  auto line = [&](const std::string& id, const MetricReport& r) {
    out << id << '\t' << fmt(r.f_max) << '\t' << fmt(r.iou) << '\t' << fmt(r.acc) << '\t' << fmt(r.mae) << '\t'
        << fmt(r.s_measure) << '\t' << fmt(r.e_measure) << '\t' << fmt(r.weighted_f) << '\n';
  };
  std::vector<MetricReport> reports;
  for (const auto& row : rows) {
    line(row.image_id, row.report);
    reports.push_back(row.report);
  }
  line("MEAN", mean_report(reports));
  return out.str();
}

}  // namespace selfment
