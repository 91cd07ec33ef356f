#include "selfment/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <Eigen/Dense>

#include "selfment/errors.hpp"
#include "selfment/random.hpp"
#include "selfment/upsample.hpp"

namespace selfment {

namespace {

Eigen::VectorXd gaussian_vector(Rng& rng, std::uint32_t dim) {
  Eigen::VectorXd v(dim);
  for (std::uint32_t k = 0; k < dim; ++k) v[k] = rng.normal();
  return v;
}

/// Orthonormal foreground/background prototypes shared by the whole corpus.
std::pair<Eigen::VectorXd, Eigen::VectorXd> prototypes(std::uint32_t dim, std::uint64_t corpus_seed) {
  Rng rng(mix_seed(corpus_seed, 0x70707));
  Eigen::VectorXd fg = gaussian_vector(rng, dim).normalized();
  Eigen::VectorXd bg = gaussian_vector(rng, dim);
  bg -= fg * fg.dot(bg);
  return {fg, bg.normalized()};
}

}  // namespace

std::string synthetic_image_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "synth_%04zu", index);
  return buf;
}

SyntheticImage make_synthetic_image(const SyntheticSpec& spec, std::uint64_t corpus_seed, std::size_t index) {
  if (spec.h_patches < 3 || spec.w_patches < 3 || spec.dim < 2 || spec.patch_size < 1) {
    throw ValidationError("synthetic grid must be at least 3x3 with dim >= 2");
  }
  if (spec.weak_fraction < 0.0 || spec.weak_fraction > 1.0 || spec.weak_amplitude < 0.0) {
    throw ValidationError("synthetic weak part needs fraction in [0, 1] and a non-negative amplitude");
  }
  if (spec.min_side < 1 || spec.min_side > spec.max_side || spec.max_side + 2 > std::min(spec.h_patches, spec.w_patches)) {
    throw ValidationError("synthetic block side range does not fit the grid");
  }
  const auto [proto_fg, proto_bg] = prototypes(spec.dim, corpus_seed);
  Rng rng(mix_seed(corpus_seed, index + 1));

  const Eigen::VectorXd fg_dir = (proto_fg + spec.direction_jitter * gaussian_vector(rng, spec.dim) / std::sqrt(double(spec.dim))).normalized();
  const Eigen::VectorXd bg_dir = (proto_bg + spec.direction_jitter * gaussian_vector(rng, spec.dim) / std::sqrt(double(spec.dim))).normalized();
  const Eigen::VectorXd blend_dir =
      (spec.distractor_blend * fg_dir + (1.0 - spec.distractor_blend) * bg_dir).normalized();

  const std::uint32_t span = spec.max_side - spec.min_side + 1;
  const auto bh = spec.min_side + static_cast<std::uint32_t>(rng.below(span));
  const auto bw = spec.min_side + static_cast<std::uint32_t>(rng.below(span));
  std::uint32_t top, left;
  if (rng.uniform() < spec.corner_fraction) {
    top = rng.below(2) ? spec.h_patches - bh : 0;
    left = rng.below(2) ? spec.w_patches - bw : 0;
  } else {
    // Keep a one-patch margin so the block does not touch the border.
    top = 1 + static_cast<std::uint32_t>(rng.below(spec.h_patches - bh - 1));
    left = 1 + static_cast<std::uint32_t>(rng.below(spec.w_patches - bw - 1));
  }

  SyntheticImage img;
  img.truth = PatchMask(spec.h_patches, spec.w_patches);
  for (std::uint32_t r = top; r < top + bh; ++r)
    for (std::uint32_t c = left; c < left + bw; ++c) img.truth.labels[static_cast<std::size_t>(r) * spec.w_patches + c] = 1;

  // Distractors: a seeded subset of the 4-neighbour ring around the block.
  std::vector<std::uint8_t> distractor(img.truth.size(), 0);
  if (spec.distractor_fraction > 0.0) {
    std::vector<std::size_t> ring;
    for (std::size_t i = 0; i < img.truth.size(); ++i) {
      if (img.truth.labels[i]) continue;
      const std::size_t r = i / spec.w_patches, c = i % spec.w_patches;
      const bool touches = (r > 0 && img.truth.labels[i - spec.w_patches]) ||
                           (r + 1 < spec.h_patches && img.truth.labels[i + spec.w_patches]) ||
                           (c > 0 && img.truth.labels[i - 1]) || (c + 1 < spec.w_patches && img.truth.labels[i + 1]);
      if (touches) ring.push_back(i);
    }
    const auto wanted = static_cast<std::size_t>(std::lround(spec.distractor_fraction * bh * bw));
    const std::size_t take = std::min(wanted, ring.size());
    for (std::size_t i = 0; i < take; ++i) {
      std::swap(ring[i], ring[i + static_cast<std::size_t>(rng.below(ring.size() - i))]);
      distractor[ring[i]] = 1;
    }
    img.distractors = take;
  }

  // Weak part: a strip of whole block columns (or rows) with attenuated signal.
  std::vector<std::uint8_t> weak(img.truth.size(), 0);
  if (spec.weak_fraction > 0.0) {
    const bool columns = rng.below(2) == 0;
    const std::uint32_t side = columns ? bw : bh;
    const auto width = std::min<std::uint32_t>(side - 1, static_cast<std::uint32_t>(std::lround(spec.weak_fraction * side)));
    const bool far_end = rng.below(2) == 1;
    for (std::uint32_t r = top; r < top + bh; ++r)
      for (std::uint32_t c = left; c < left + bw; ++c) {
        const std::uint32_t along = columns ? c - left : r - top;
        const bool in_strip = far_end ? along >= side - width : along < width;
        if (in_strip) weak[static_cast<std::size_t>(r) * spec.w_patches + c] = 1;
      }
  }

  FeatureField& f = img.field;
  f.h_patches = spec.h_patches;
  f.w_patches = spec.w_patches;
  f.dim = spec.dim;
  f.source_h = spec.h_patches * spec.patch_size;
  f.source_w = spec.w_patches * spec.patch_size;
  f.image_id = synthetic_image_id(index);
  f.data.resize(f.patch_count() * spec.dim);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(spec.dim);
  for (std::size_t i = 0; i < f.patch_count(); ++i) {
    const Eigen::VectorXd& dir = img.truth.labels[i] ? fg_dir : (distractor[i] ? blend_dir : bg_dir);
    const double amplitude = weak[i] ? spec.weak_amplitude : 1.0;
    Eigen::VectorXd v = amplitude * dir + spec.sigma * gaussian_vector(rng, spec.dim);
    v.normalize();
    auto out = f.patch(i);
    for (std::uint32_t k = 0; k < spec.dim; ++k) out[k] = static_cast<float>(v[k]);
    mean += v;
  }
  mean.normalize();
  img.cls.resize(spec.dim);
  for (std::uint32_t k = 0; k < spec.dim; ++k) img.cls[k] = static_cast<float>(mean[k]);
  return img;
}

std::vector<SyntheticImage> make_synthetic_corpus(const SyntheticSpec& spec, std::size_t count, std::uint64_t seed) {
  std::vector<SyntheticImage> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(make_synthetic_image(spec, seed, i));
  return out;
}

void export_synthetic(const std::vector<SyntheticImage>& corpus, const std::filesystem::path& feature_dir,
                      const std::filesystem::path& gt_dir) {
  std::filesystem::create_directories(feature_dir);
  std::filesystem::create_directories(gt_dir);
  for (const auto& img : corpus) {
    const auto& id = img.field.image_id;
    write_dpf(img.field, feature_dir / (id + ".dpf"));
    write_cls_sidecar(img.cls, feature_dir / (id + ".cls"));
    write_prob_pgm(upsample_nearest(img.truth, img.field.source_h, img.field.source_w), gt_dir / (id + ".pgm"));
  }
}

}  // namespace selfment
