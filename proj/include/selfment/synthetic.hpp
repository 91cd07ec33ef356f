#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "selfment/tensor_io.hpp"

namespace selfment {

/// Planted two-cluster feature fields. Every image has one rectangular
/// foreground block; foreground and background patches are drawn around two
/// corpus-wide prototype directions (jittered per image), perturbed by
/// isotropic Gaussian noise and renormalized. Optional distractors are
/// background patches on the ring around the block whose embedding blends
/// both directions; an optional weak part is a strip of the block with a
/// fainter foreground signal.
struct SyntheticSpec {
  std::uint32_t h_patches = 48;
  std::uint32_t w_patches = 48;
  std::uint32_t dim = 64;
  std::uint32_t patch_size = 16;
  double sigma = 0.05;
  std::uint32_t min_side = 8;
  std::uint32_t max_side = 20;
  double direction_jitter = 0.1;
  /// Number of distractor patches as a fraction of the foreground area.
  double distractor_fraction = 0.0;
  /// Weight of the foreground direction inside a distractor embedding.
  double distractor_blend = 0.5;
  /// Fraction of images whose block is pushed into an image corner.
  double corner_fraction = 0.0;
  /// Share of the block (a strip along one side) whose foreground signal is
  /// scaled by `weak_amplitude` before noise is added.
  double weak_fraction = 0.0;
  double weak_amplitude = 1.0;
};

struct SyntheticImage {
  FeatureField field;
  PatchMask truth;
  std::vector<float> cls;  ///< global-average token: normalized mean patch embedding
  std::size_t distractors = 0;
};

SyntheticImage make_synthetic_image(const SyntheticSpec& spec, std::uint64_t corpus_seed, std::size_t index);
std::vector<SyntheticImage> make_synthetic_corpus(const SyntheticSpec& spec, std::size_t count, std::uint64_t seed);

std::string synthetic_image_id(std::size_t index);

/// Writes <id>.dpf and <id>.cls into `feature_dir` and the pixel-resolution
/// ground truth <id>.pgm into `gt_dir`.
void export_synthetic(const std::vector<SyntheticImage>& corpus, const std::filesystem::path& feature_dir,
                      const std::filesystem::path& gt_dir);

}  // namespace selfment
