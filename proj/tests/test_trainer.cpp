#include <cmath>

#include <gtest/gtest.h>

#include "selfment/errors.hpp"
#include "selfment/spectral.hpp"
#include "selfment/synthetic.hpp"
#include "selfment/trainer.hpp"
#include "support/test_util.hpp"

using namespace selfment;
using testutil::TempDir;

namespace {

double iou(const PatchMask& a, const PatchMask& b) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a.labels[i] && b.labels[i];
    uni += a.labels[i] || b.labels[i];
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

SyntheticSpec small_spec() {
  SyntheticSpec spec;
  spec.h_patches = spec.w_patches = 24;
  spec.dim = 32;
  spec.min_side = 5;
  spec.max_side = 10;
  return spec;
}

TrainConfig config_for(const TempDir& dir) {
  TrainConfig c;
  c.feature_dir = dir / "features";
  c.cache_dir = dir / "cache";
  c.hidden = 16;
  c.embed = 16;
  c.seed = 5;
  return c;
}

}  // namespace

TEST(Pseudolabels, PlantedCorpusIsRecoveredAndConstantImageIsSkipped) {
  TempDir dir("pl");
  const auto corpus = make_synthetic_corpus(small_spec(), 10, 3);
  export_synthetic(corpus, dir / "features", dir / "gt");
  FeatureField flat = corpus[0].field;
  flat.image_id = "zz_constant";
  for (std::size_t i = 0; i < flat.data.size(); ++i) flat.data[i] = (i % flat.dim == 0) ? 1.0f : 0.5f;
  write_dpf(flat, dir / "features/zz_constant.dpf");

  const auto config = config_for(dir);
  const auto report = generate_pseudolabels(config);
  ASSERT_EQ(report.entries.size(), 11u);
  EXPECT_TRUE(report.failures.empty());
  for (std::size_t i = 0; i < 10; ++i) {
    const auto& e = report.entries[i];
    ASSERT_FALSE(e.degenerate) << e.image_id;
    const auto mask = prob_map_to_mask(read_mask_pgm(config.cache_dir / (e.image_id + ".mask.pgm")));
    EXPECT_GE(iou(mask, corpus[i].truth), 0.99) << e.image_id;
    EXPECT_NEAR(e.fg_fraction, static_cast<double>(mask.count_foreground()) / mask.size(), 1e-12);
  }
  EXPECT_EQ(report.entries[10].image_id, "zz_constant");
  EXPECT_TRUE(report.entries[10].degenerate);
  EXPECT_FALSE(std::filesystem::exists(config.cache_dir / "zz_constant.mask.pgm"));
  EXPECT_EQ(read_manifest(config.cache_dir / "manifest.tsv").size(), 11u);
}

TEST(Pseudolabels, RerunIsByteIdenticalAndMatchesSingleImageRuns) {
  TempDir dir("pl_rerun");
  const auto corpus = make_synthetic_corpus(small_spec(), 4, 8);
  export_synthetic(corpus, dir / "features", dir / "gt");
  auto a = config_for(dir);
  auto b = a;
  b.cache_dir = dir / "cache_b";
  b.workers = 4;
  generate_pseudolabels(a);
  generate_pseudolabels(b);
  for (const auto& img : corpus) {
    const auto name = img.field.image_id + ".mask.pgm";
    EXPECT_EQ(read_file_bytes(a.cache_dir / name), read_file_bytes(b.cache_dir / name));
    const auto alone = segment_patches(img.field, a.segment_options());
    EXPECT_EQ(prob_map_to_mask(read_mask_pgm(a.cache_dir / name)), alone.mask);
  }
  EXPECT_EQ(read_file_bytes(a.cache_dir / "manifest.tsv"), read_file_bytes(b.cache_dir / "manifest.tsv"));
}

TEST(Pseudolabels, UnreadableFileIsRecordedAndEmptyDirectoryIsFatal) {
  TempDir dir("pl_bad");
  export_synthetic(make_synthetic_corpus(small_spec(), 2, 1), dir / "features", dir / "gt");
  write_text_atomic(dir / "features/broken.dpf", "DPF1 nope");
  const auto report = generate_pseudolabels(config_for(dir));
  EXPECT_EQ(report.entries.size(), 2u);
  ASSERT_EQ(report.failures.size(), 1u);
  EXPECT_EQ(report.failures[0].path.filename(), "broken.dpf");

  std::filesystem::create_directories(dir / "empty");
  auto c = config_for(dir);
  c.feature_dir = dir / "empty";
  EXPECT_THROW(generate_pseudolabels(c), ValidationError);
  c.feature_dir = dir / "missing";
  EXPECT_THROW(generate_pseudolabels(c), IoError);
}

TEST(TrainConfig, RejectsInvalidSettings) {
  TrainConfig c;
  c.epochs = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = TrainConfig{};
  c.weights = {0, 0, 0};
  EXPECT_THROW(c.validate(), ValidationError);
  c = TrainConfig{};
  c.lr = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  EXPECT_NO_THROW(TrainConfig{}.validate());
}

TEST(Train, DeterministicFiniteAndLossDecreases) {
  TempDir dir("train");
  export_synthetic(make_synthetic_corpus(small_spec(), 6, 2), dir / "features", dir / "gt");
  auto config = config_for(dir);
  generate_pseudolabels(config);
  const auto a = train_head(config);
  const auto b = train_head(config);
  EXPECT_EQ(encode_checkpoint(a.params), encode_checkpoint(b.params));
  EXPECT_EQ(format_train_log(a.log), format_train_log(b.log));
  EXPECT_TRUE(a.params.all_finite());
  ASSERT_EQ(a.log.epochs.size(), 3u);
  EXPECT_LT(a.log.epochs.back().mean.total, a.log.epochs.front().mean.total);
  for (const auto& e : a.log.epochs) {
    EXPECT_NEAR(e.mean.total, 0.1 * e.mean.con + e.mean.dice + e.mean.bce, 1e-7 * e.mean.total);
  }
  EXPECT_EQ(a.log.images.size(), 6u);

  config.seed = 6;
  EXPECT_NE(encode_checkpoint(train_head(config).params), encode_checkpoint(a.params));
}

TEST(Train, GridMismatchBetweenCacheAndFeaturesIsFatal) {
  TempDir dir("train_bad");
  const auto corpus = make_synthetic_corpus(small_spec(), 2, 2);
  export_synthetic(corpus, dir / "features", dir / "gt");
  const auto config = config_for(dir);
  generate_pseudolabels(config);
  write_mask_pgm(PatchMask(3, 3, 1), config.cache_dir / (corpus[0].field.image_id + ".mask.pgm"));
  EXPECT_THROW(train_head(config), ValidationError);
}

TEST(Infer, UniformProbabilityGridAndDimensionCheck) {
  auto field = testutil::field_from_rows(2, 3, std::vector<std::vector<float>>(6, {0.3f, -0.2f, 0.9f}));
  HeadParams p = HeadParams::initialize(3, 4, 4, 1);
  p.wc.setZero();
  p.bc << 0.0, std::log(0.7 / 0.3);
  const auto map = infer(field, p, 32, 48);
  EXPECT_EQ(map.height, 32u);
  EXPECT_EQ(map.width, 48u);
  for (double v : map.values) EXPECT_NEAR(v, 0.7, 1e-12);
  EXPECT_THROW(infer(field, HeadParams::initialize(4, 4, 4, 1), 8, 8), ValidationError);
}

TEST(Segment, KmeansWithoutIpoEqualsInitializer) {
  const auto img = make_synthetic_image(small_spec(), 9, 0);
  SegmentOptions o;
  o.init = InitMethod::kKmeans;
  o.ipo = false;
  o.seed = 4;
  EXPECT_EQ(segment_patches(img.field, o).mask, init_kmeans2(normalize_features(img.field), 5, 4).mask);
  o.init = InitMethod::kCls;
  EXPECT_THROW(segment_patches(img.field, o), ValidationError);
  EXPECT_EQ(segment_patches(img.field, o, &img.cls).mask, init_cls(img.field, img.cls));
}

TEST(Segment, InitMethodNames) {
  for (auto m : {InitMethod::kNcut, InitMethod::kKmeans, InitMethod::kCls}) EXPECT_EQ(parse_init_method(to_string(m)), m);
  EXPECT_THROW(parse_init_method("spectral"), ValidationError);
}
