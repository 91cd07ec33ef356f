#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "selfment/errors.hpp"
#include "selfment/metrics.hpp"
#include "support/oracles.hpp"

using namespace selfment;

namespace {

ProbMap prob(std::uint32_t h, std::uint32_t w, std::vector<double> v) {
  ProbMap m(h, w);
  m.values = std::move(v);
  return m;
}

BinaryMap bin(std::uint32_t h, std::uint32_t w, std::vector<std::uint8_t> v) {
  BinaryMap m(h, w);
  m.values = std::move(v);
  return m;
}

oracle::Grid grid_of(const ProbMap& p) {
  oracle::Grid g(p.height, std::vector<double>(p.width));
  for (std::uint32_t r = 0; r < p.height; ++r)
    for (std::uint32_t c = 0; c < p.width; ++c) g[r][c] = p.at(r, c);
  return g;
}

oracle::Mask mask_of(const BinaryMap& b) {
  oracle::Mask m(b.height, std::vector<int>(b.width));
  for (std::uint32_t r = 0; r < b.height; ++r)
    for (std::uint32_t c = 0; c < b.width; ++c) m[r][c] = b.values[r * b.width + c];
  return m;
}

/// Smooth random blob map with a thresholded ground truth, so metrics see
/// structured rather than salt-and-pepper inputs.
std::pair<ProbMap, BinaryMap> random_case(std::uint32_t n, std::mt19937& gen) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double cy = u(gen) * n, cx = u(gen) * n, rad = 2 + u(gen) * n / 3;
  ProbMap p(n, n);
  BinaryMap g(n, n);
  for (std::uint32_t r = 0; r < n; ++r)
    for (std::uint32_t c = 0; c < n; ++c) {
      const double d = std::hypot(r - cy, c - cx);
      g.values[r * n + c] = d < rad;
      const double v = std::clamp(1.0 / (1.0 + std::exp((d - rad) / 1.5)) + 0.25 * (u(gen) - 0.5), 0.0, 1.0);
      p.values[r * n + c] = std::round(v * 255.0) / 255.0;
    }
  return {p, g};
}

}  // namespace

TEST(FMax, Anchors) {
  const auto gt = bin(2, 2, {1, 1, 0, 0});
  EXPECT_DOUBLE_EQ(f_max(prob(2, 2, {1, 1, 0, 0}), gt), 1.0);
}

TEST(FMax, InvertedHardPredictionScoresOnlyAtZeroThreshold) {
  // Every threshold above 0 selects exactly the wrong half (F = 0); t = 0
  // selects everything: P = 1/2, R = 1, F = 1.3 * 0.5 / (0.15 + 1).
  const auto gt = bin(2, 2, {1, 1, 0, 0});
  EXPECT_NEAR(f_max(prob(2, 2, {0, 0, 1, 1}), gt), 0.65 / 1.15, 1e-12);
  EXPECT_NEAR(f_max(prob(2, 2, {0, 0, 1, 1}), gt), oracle::f_max({{0, 0}, {1, 1}}, {{1, 1}, {0, 0}}), 1e-12);
}

TEST(FMax, FourPixelSweep) {
  // Level sets: {0.9} gives P=1, R=1/2, F = 1.3*0.5/(0.3+0.5) = 0.8125, the
  // best of the four non-empty sets.
  const auto pred = prob(1, 4, {0.9, 0.4, 0.6, 0.1});
  const auto gt = bin(1, 4, {1, 1, 0, 0});
  EXPECT_NEAR(f_max(pred, gt), 0.8125, 1e-12);
  EXPECT_NEAR(f_max(pred, gt), oracle::f_max(grid_of(pred), mask_of(gt)), 1e-12);
}

TEST(FMax, EmptyConventionsAndShapeCheck) {
  EXPECT_DOUBLE_EQ(f_max(prob(1, 2, {0, 0}), bin(1, 2, {0, 0})), 1.0);
  EXPECT_THROW(f_max(prob(1, 2, {0, 0}), bin(2, 1, {0, 0})), ValidationError);
}

TEST(FMax, InvariantUnderMonotoneRelabelingOfLevels) {
  std::mt19937 gen(4);
  const int from[] = {10, 50, 100, 200};
  const int to[] = {20, 21, 22, 250};
  for (int t = 0; t < 20; ++t) {
    ProbMap a(4, 5), b(4, 5);
    BinaryMap g(4, 5);
    for (int i = 0; i < 20; ++i) {
      const int k = gen() % 4;
      a.values[i] = from[k] / 255.0;
      b.values[i] = to[k] / 255.0;
      g.values[i] = gen() % 2;
    }
    EXPECT_DOUBLE_EQ(f_max(a, g), f_max(b, g));
  }
}

TEST(IouAccMae, Anchors) {
  const auto gt = bin(2, 2, {1, 1, 0, 0});
  EXPECT_EQ(iou(gt, gt), 1.0);
  EXPECT_EQ(accuracy(gt, gt), 1.0);
  EXPECT_EQ(mae(prob(2, 2, {1, 1, 0, 0}), gt), 0.0);
  EXPECT_EQ(iou(bin(2, 2, {0, 0, 0, 0}), gt), 0.0);
  EXPECT_EQ(accuracy(bin(2, 2, {0, 0, 0, 0}), gt), 0.5);
  EXPECT_EQ(mae(prob(2, 2, {0, 0, 0, 0}), gt), 0.5);
  EXPECT_EQ(iou(bin(1, 2, {0, 0}), bin(1, 2, {0, 0})), 1.0);
}

TEST(IouAccMae, SixPixelHandCount) {
  // pred 1 1 0 1 0 0 vs gt 1 0 0 1 1 0: intersection 2, union 4, agree 4.
  const auto pred = bin(2, 3, {1, 1, 0, 1, 0, 0});
  const auto gt = bin(2, 3, {1, 0, 0, 1, 1, 0});
  EXPECT_DOUBLE_EQ(iou(pred, gt), 0.5);
  EXPECT_DOUBLE_EQ(accuracy(pred, gt), 4.0 / 6.0);
  EXPECT_DOUBLE_EQ(mae(prob(2, 3, {0.9, 0.2, 0.0, 1.0, 0.5, 0.1}), gt), (0.1 + 0.2 + 0 + 0 + 0.5 + 0.1) / 6);
}

TEST(IouAccMae, IouBoundedByF1AndMaeSymmetry) {
  std::mt19937 gen(5);
  std::uniform_real_distribution<double> u;
  for (int t = 0; t < 100; ++t) {
    ProbMap p(6, 6);
    BinaryMap g(6, 6);
    for (int i = 0; i < 36; ++i) {
      p.values[i] = u(gen);
      g.values[i] = gen() % 2;
    }
    const auto b = binarize_prediction(p);
    std::size_t tp = 0, fp = 0, fn = 0;
    for (int i = 0; i < 36; ++i) {
      tp += b.values[i] && g.values[i];
      fp += b.values[i] && !g.values[i];
      fn += !b.values[i] && g.values[i];
    }
    const double f1 = tp == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
    EXPECT_LE(iou(b, g), f1 + 1e-12);
    EXPECT_LE(f1, 1.0);

    ProbMap q = p;
    BinaryMap h = g;
    for (int i = 0; i < 36; ++i) {
      q.values[i] = 1 - p.values[i];
      h.values[i] = 1 - g.values[i];
    }
    EXPECT_NEAR(mae(p, g), mae(q, h), 1e-12);
  }
}

TEST(SMeasure, Anchors) {
  const auto gt = bin(3, 3, {0, 1, 0, 1, 1, 1, 0, 1, 0});
  EXPECT_NEAR(s_measure(prob(3, 3, {0, 1, 0, 1, 1, 1, 0, 1, 0}), gt), 1.0, 1e-12);
  EXPECT_NEAR(s_measure(prob(2, 2, {0, 0, 0, 0}), bin(2, 2, {0, 0, 0, 0})), 1.0, 1e-12);
  EXPECT_NEAR(s_measure(prob(2, 2, {1, 1, 1, 1}), bin(2, 2, {1, 1, 1, 1})), 1.0, 1e-12);
}

TEST(EMeasureWeightedF, PerfectAndInverted) {
  BinaryMap gt(8, 8);
  for (int i = 0; i < 64; ++i) gt.values[i] = (i % 8) < 4;
  ProbMap perfect(8, 8), inverted(8, 8);
  BinaryMap inv(8, 8);
  for (int i = 0; i < 64; ++i) {
    perfect.values[i] = gt.values[i];
    inverted.values[i] = 1 - gt.values[i];
    inv.values[i] = 1 - gt.values[i];
  }
  EXPECT_NEAR(e_measure(gt, gt), 1.0, 1e-12);
  EXPECT_NEAR(weighted_f(perfect, gt), 1.0, 1e-12);
  EXPECT_LE(e_measure(inv, gt), 0.25);
  EXPECT_NEAR(e_measure(inv, gt), oracle::e_measure(mask_of(inv), mask_of(gt)), 1e-12);
}

TEST(MetricOracles, FixedEightByEightCase) {
  std::mt19937 gen(88);
  const auto [p, g] = random_case(8, gen);
  const auto b = binarize_prediction(p);
  EXPECT_NEAR(s_measure(p, g), oracle::s_measure(grid_of(p), mask_of(g)), 1e-6);
  EXPECT_NEAR(e_measure(b, g), oracle::e_measure(mask_of(b), mask_of(g)), 1e-6);
  EXPECT_NEAR(weighted_f(p, g), oracle::weighted_f(grid_of(p), mask_of(g)), 1e-6);
  EXPECT_NEAR(f_max(p, g), oracle::f_max(grid_of(p), mask_of(g)), 1e-6);
}

TEST(MetricOracles, RandomCasesStayInUnitInterval) {
  std::mt19937 gen(89);
  for (int t = 0; t < 30; ++t) {
    const auto [p, g] = random_case(12, gen);
    const auto r = evaluate(p, g);
    for (double v : {r.f_max, r.iou, r.acc, r.mae, r.s_measure, r.e_measure, r.weighted_f}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_NEAR(r.s_measure, oracle::s_measure(grid_of(p), mask_of(g)), 1e-6);
    EXPECT_NEAR(r.weighted_f, oracle::weighted_f(grid_of(p), mask_of(g)), 1e-6);
  }
}

TEST(Evaluate, PerfectPredictionScoresOne) {
  BinaryMap g(10, 10);
  ProbMap p(10, 10);
  for (int i = 0; i < 100; ++i) p.values[i] = g.values[i] = (i / 10 > 2 && i % 10 < 6);
  const auto r = evaluate(p, g);
  for (double v : {r.f_max, r.iou, r.acc, r.s_measure, r.e_measure, r.weighted_f}) EXPECT_NEAR(v, 1.0, 1e-12);
  EXPECT_EQ(r.mae, 0.0);
}

TEST(DistanceTransform, NearestForegroundTieBreak) {
  // Pixel (1,1) is at distance 1 from both (0,1) and (1,0); row order wins.
  const auto d = nearest_foreground(bin(3, 3, {0, 1, 0, 1, 0, 0, 0, 0, 0}));
  EXPECT_EQ(d.squared[4], 1.0);
  EXPECT_EQ(d.nearest[4], 1u);
  EXPECT_EQ(d.nearest[1], 1u);
  EXPECT_EQ(d.squared[1], 0.0);
  EXPECT_EQ(d.squared[8], 5.0);
}

TEST(EvalTsv, HeaderRowsAndMean) {
  MetricReport a{1, 1, 1, 0, 1, 1, 1}, b{0.5, 0.25, 0.75, 0.5, 0.5, 0.5, 0.5};
  const std::vector<NamedReport> rows = {{"a", a}, {"b", b}};
  std::istringstream in(format_eval_tsv(rows));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line[0], '#');
  std::getline(in, line);
  EXPECT_EQ(line, "image_id\tf_max\tiou\tacc\tmae\ts_measure\te_measure\tweighted_f");
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 2), "a\t");
  std::getline(in, line);
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 5), "MEAN\t");
  const auto m = mean_report(std::vector<MetricReport>{a, b});
  EXPECT_DOUBLE_EQ(m.iou, 0.625);
  EXPECT_DOUBLE_EQ(m.mae, 0.25);
}
