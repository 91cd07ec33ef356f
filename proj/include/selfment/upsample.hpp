#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "selfment/tensor_io.hpp"

namespace selfment {

/// Bilinear resize of a row-major grid (align_corners = false: output pixel
/// centers map to input coordinates (x + 0.5) * in / out - 0.5, clamped at
/// the borders). Values are clamped to [0, 1].
ProbMap upsample_bilinear(const Eigen::VectorXd& grid, std::uint32_t grid_h, std::uint32_t grid_w,
                          std::uint32_t out_h, std::uint32_t out_w);

/// Hard labels as a {0,1} map through the same bilinear path.
ProbMap upsample_mask(const PatchMask& mask, std::uint32_t out_h, std::uint32_t out_w);

/// Each output pixel takes the label of the patch cell that contains it.
ProbMap upsample_nearest(const PatchMask& mask, std::uint32_t out_h, std::uint32_t out_w);

/// Pixels >= threshold become 1.
ProbMap binarize(const ProbMap& map, double threshold = 0.5);

}  // namespace selfment
