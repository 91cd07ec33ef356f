#include <cmath>
#include <limits>

#include "selfment/errors.hpp"
#include "selfment/random.hpp"
#include "selfment/spectral.hpp"

namespace selfment {

namespace {

constexpr int kMaxLloydIterations = 100;

struct TwoMeans {
  std::vector<std::uint8_t> assignment;
  double objective = std::numeric_limits<double>::infinity();
  bool degenerate = true;
};

TwoMeans run_once(const Eigen::MatrixXd& x, Rng& rng) {
  const Eigen::Index n = x.rows();
  TwoMeans out;

  // k-means++ seeding.
  Eigen::RowVectorXd centers[2];
  centers[0] = x.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  Eigen::VectorXd d2 = (x.rowwise() - centers[0]).rowwise().squaredNorm();
  const double total = d2.sum();
  if (!(total > 0.0)) return out;
  double pick = rng.uniform() * total;
  Eigen::Index second = n - 1;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (d2[i] <= 0.0) continue;
    pick -= d2[i];
    if (pick < 0.0) {
      second = i;
      break;
    }
  }
  while (d2[second] <= 0.0) --second;
  centers[1] = x.row(second);

  std::vector<std::uint8_t> assign(static_cast<std::size_t>(n), 2);
  for (int iter = 0; iter < kMaxLloydIterations; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double a = (x.row(i) - centers[0]).squaredNorm();
      const double b = (x.row(i) - centers[1]).squaredNorm();
      const std::uint8_t c = b < a ? 1 : 0;
      if (assign[static_cast<std::size_t>(i)] != c) {
        assign[static_cast<std::size_t>(i)] = c;
        changed = true;
      }
    }
    if (!changed) break;
    Eigen::RowVectorXd sums[2] = {Eigen::RowVectorXd::Zero(x.cols()), Eigen::RowVectorXd::Zero(x.cols())};
    std::size_t counts[2] = {0, 0};
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto c = assign[static_cast<std::size_t>(i)];
      sums[c] += x.row(i);
      ++counts[c];
    }
    for (int c = 0; c < 2; ++c) {
      if (counts[c] > 0) centers[c] = sums[c] / static_cast<double>(counts[c]);
    }
  }

  std::size_t counts[2] = {0, 0};
  double objective = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto c = assign[static_cast<std::size_t>(i)];
    ++counts[c];
    objective += (x.row(i) - centers[c]).squaredNorm();
  }
  out.assignment = std::move(assign);
  out.objective = objective;
  out.degenerate = counts[0] == 0 || counts[1] == 0;
  return out;
}

}  // namespace

bool is_border_patch(std::size_t index, std::uint32_t h_patches, std::uint32_t w_patches) {
  const std::size_t row = index / w_patches;
  const std::size_t col = index % w_patches;
  return row == 0 || col == 0 || row + 1 == h_patches || col + 1 == w_patches;
}

KMeansResult init_kmeans2(const FeatureField& normalized, int restarts, std::uint64_t seed) {
  normalized.validate();
  const std::size_t n = normalized.patch_count();
  if (n < 2) throw DegenerateInputError("k-means initializer needs at least two patches");
  if (restarts < 1) throw ValidationError("k-means restarts must be >= 1");

  const Eigen::MatrixXd x = feature_matrix(normalized);
  Rng rng(seed);
  TwoMeans best;
  for (int r = 0; r < restarts; ++r) {
    TwoMeans run = run_once(x, rng);
    if (run.degenerate) continue;
    if (best.degenerate || run.objective < best.objective) best = std::move(run);
  }

  KMeansResult result;
  result.mask = PatchMask(normalized.h_patches, normalized.w_patches);
  if (best.degenerate) {
    result.degenerate = true;
    return result;
  }
  result.objective = best.objective;

  std::size_t size[2] = {0, 0};
  std::size_t border[2] = {0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = best.assignment[i];
    ++size[c];
    if (is_border_patch(i, normalized.h_patches, normalized.w_patches)) ++border[c];
  }
  // Compare border[0]/size[0] with border[1]/size[1] exactly.
  const std::size_t lhs = border[0] * size[1];
  const std::size_t rhs = border[1] * size[0];
  std::uint8_t foreground;
  if (lhs != rhs) {
    foreground = lhs < rhs ? 0 : 1;
  } else if (size[0] != size[1]) {
    foreground = size[0] < size[1] ? 0 : 1;
  } else {
    foreground = best.assignment[0] == 0 ? 1 : 0;
  }
  for (std::size_t i = 0; i < n; ++i) result.mask.labels[i] = best.assignment[i] == foreground ? 1 : 0;
  return result;
}

}  // namespace selfment
