#include "selfment/upsample.hpp"

#include <algorithm>
#include <cmath>

#include "selfment/errors.hpp"

namespace selfment {

namespace {

struct Tap {
  std::uint32_t lo;
  std::uint32_t hi;
  double frac;
};

Tap source_tap(std::uint32_t dst, std::uint32_t in, std::uint32_t out) {
  const double scale = static_cast<double>(in) / out;
  double src = (dst + 0.5) * scale - 0.5;
  if (src < 0.0) src = 0.0;
  auto lo = static_cast<std::uint32_t>(std::floor(src));
  lo = std::min(lo, in - 1);
  const std::uint32_t hi = std::min(lo + 1, in - 1);
  return {lo, hi, src - lo};
}

}  // namespace

ProbMap upsample_bilinear(const Eigen::VectorXd& grid, std::uint32_t grid_h, std::uint32_t grid_w,
                          std::uint32_t out_h, std::uint32_t out_w) {
  if (grid_h < 1 || grid_w < 1 || out_h < 1 || out_w < 1) throw ValidationError("resize dimensions must be >= 1");
  if (static_cast<std::size_t>(grid.size()) != static_cast<std::size_t>(grid_h) * grid_w) {
    throw ValidationError("grid length does not match its dimensions");
  }
  std::vector<Tap> cols(out_w);
  for (std::uint32_t x = 0; x < out_w; ++x) cols[x] = source_tap(x, grid_w, out_w);

  ProbMap out(out_h, out_w);
  for (std::uint32_t y = 0; y < out_h; ++y) {
    const Tap r = source_tap(y, grid_h, out_h);
    for (std::uint32_t x = 0; x < out_w; ++x) {
      const Tap& c = cols[x];
      auto at = [&](std::uint32_t gy, std::uint32_t gx) { return grid[static_cast<Eigen::Index>(gy) * grid_w + gx]; };
      const double top = (1.0 - c.frac) * at(r.lo, c.lo) + c.frac * at(r.lo, c.hi);
      const double bottom = (1.0 - c.frac) * at(r.hi, c.lo) + c.frac * at(r.hi, c.hi);
      out.values[static_cast<std::size_t>(y) * out_w + x] = std::clamp((1.0 - r.frac) * top + r.frac * bottom, 0.0, 1.0);
    }
  }
  return out;
}

ProbMap upsample_mask(const PatchMask& mask, std::uint32_t out_h, std::uint32_t out_w) {
  Eigen::VectorXd grid(static_cast<Eigen::Index>(mask.size()));
  for (std::size_t i = 0; i < mask.size(); ++i) grid[static_cast<Eigen::Index>(i)] = mask.labels[i];
  return upsample_bilinear(grid, mask.h_patches, mask.w_patches, out_h, out_w);
}

ProbMap upsample_nearest(const PatchMask& mask, std::uint32_t out_h, std::uint32_t out_w) {
  ProbMap out(out_h, out_w);
  for (std::uint32_t y = 0; y < out_h; ++y) {
    const std::size_t py = static_cast<std::size_t>(y) * mask.h_patches / out_h;
    for (std::uint32_t x = 0; x < out_w; ++x) {
      const std::size_t px = static_cast<std::size_t>(x) * mask.w_patches / out_w;
      out.values[static_cast<std::size_t>(y) * out_w + x] = mask.labels[py * mask.w_patches + px];
    }
  }
  return out;
}

ProbMap binarize(const ProbMap& map, double threshold) {
  ProbMap out = map;
  for (auto& v : out.values) v = v >= threshold ? 1.0 : 0.0;
  return out;
}

}  // namespace selfment
