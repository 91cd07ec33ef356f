#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "selfment/affinity.hpp"
#include "selfment/ipo.hpp"
#include "selfment/seg_head.hpp"
#include "selfment/tensor_io.hpp"

namespace selfment {

enum class InitMethod { kNcut, kKmeans, kCls };
/// Which NCut output seeds IPO: the seed's connected component or the full
/// mean-thresholded mask.
enum class IpoSource { kComponent, kMask };

InitMethod parse_init_method(const std::string& name);
std::string to_string(InitMethod method);

struct SegmentOptions {
  InitMethod init = InitMethod::kNcut;
  bool ipo = true;
  IpoSource ipo_source = IpoSource::kComponent;
  double tau = kDefaultTau;
  double eps_floor = kDefaultEpsFloor;
  int ipo_iterations = kDefaultIpoIterations;
  double solver_tol = 1e-6;
  int solver_max_iter = 2000;
  int kmeans_restarts = 5;
  std::uint64_t seed = 0;
};

struct SegmentOutcome {
  PatchMask mask;  ///< final patch labels (all zero when degenerate)
  bool degenerate = false;
  std::string reason;
  std::vector<IpoTraceRow> trace;
  int ipo_iterations = 0;
};

/// Initializer followed by optional IPO on one raw feature field.
/// `cls` is required for InitMethod::kCls.
SegmentOutcome segment_patches(const FeatureField& field, const SegmentOptions& options,
                               const std::vector<float>* cls = nullptr);

struct TrainConfig {
  int epochs = 3;
  double lr = 1e-3;
  double tau = kDefaultTau;
  double eps_floor = kDefaultEpsFloor;
  int ipo_iterations = kDefaultIpoIterations;
  bool ipo = true;
  IpoSource ipo_source = IpoSource::kComponent;
  LossWeights weights;
  double temperature = kDefaultTemperature;
  int contrastive_cap = kDefaultContrastiveCap;
  int hidden = kDefaultHidden;
  int embed = kDefaultEmbed;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::filesystem::path feature_dir;
  std::filesystem::path cache_dir;

  void validate() const;
  SegmentOptions segment_options() const;
};

/// One row of cache_dir/manifest.tsv.
struct ManifestEntry {
  std::string image_id;
  std::uint32_t h_patches = 0;
  std::uint32_t w_patches = 0;
  double fg_fraction = 0.0;
  int ipo_iters = 0;
  bool degenerate = false;
};

struct FileFailure {
  std::filesystem::path path;
  std::string message;
};

struct PseudoLabelReport {
  std::vector<ManifestEntry> entries;  ///< sorted by image id
  std::vector<FileFailure> failures;
};

/// Sorted list of *.dpf files in a directory. Throws IoError when the
/// directory is missing and ValidationError when it holds no DPF file.
std::vector<std::filesystem::path> list_feature_files(const std::filesystem::path& dir);

/// NCut -> IPO for every DPF in config.feature_dir; writes
/// <image_id>.mask.pgm for each non-degenerate image and manifest.tsv.
PseudoLabelReport generate_pseudolabels(const TrainConfig& config);

std::string format_manifest(const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

struct EpochRecord {
  int epoch = 0;
  LossBreakdown mean;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::vector<ManifestEntry> images;
};

struct TrainResult {
  HeadParams params;
  TrainLog log;
};

/// Trains the head on cached pseudo-labels. Features are loaded into memory
/// once; each epoch visits images in a seeded shuffled order with one Adam
/// step per image.
TrainResult train_head(const TrainConfig& config);

/// Loss columns only, so the file is reproducible byte for byte.
std::string format_train_log(const TrainLog& log);
std::string format_train_timing(const TrainLog& log);

/// Per-patch foreground probability, bilinearly resized to (out_h, out_w).
ProbMap infer(const FeatureField& field, const HeadParams& params, std::uint32_t out_h, std::uint32_t out_w);

}  // namespace selfment
