#include "selfment/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "selfment/errors.hpp"
#include "selfment/parallel.hpp"
#include "selfment/random.hpp"
#include "selfment/spectral.hpp"
#include "selfment/upsample.hpp"

namespace selfment {

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

bool single_class(const PatchMask& mask) {
  const std::size_t fg = mask.count_foreground();
  return fg == 0 || fg == mask.size();
}

}  // namespace

InitMethod parse_init_method(const std::string& name) {
  if (name == "ncut") return InitMethod::kNcut;
  if (name == "kmeans") return InitMethod::kKmeans;
  if (name == "cls") return InitMethod::kCls;
  throw ValidationError("unknown init method '" + name + "' (expected ncut, kmeans or cls)");
}

std::string to_string(InitMethod method) {
  switch (method) {
    case InitMethod::kNcut:
      return "ncut";
    case InitMethod::kKmeans:
      return "kmeans";
    case InitMethod::kCls:
      return "cls";
  }
  return "?";
}

SegmentOutcome segment_patches(const FeatureField& field, const SegmentOptions& options,
                               const std::vector<float>* cls) {
  const FeatureField normalized = normalize_features(field);
  SegmentOutcome out;

  PatchMask init;
  switch (options.init) {
    case InitMethod::kNcut: {
      const Bipartition bp = ncut_bipartition(normalized, options.tau, options.eps_floor, options.solver_tol,
                                              options.solver_max_iter);
      init = options.ipo && options.ipo_source == IpoSource::kMask ? bp.mask : bp.component;
      break;
    }
    case InitMethod::kKmeans: {
      KMeansResult km = init_kmeans2(normalized, options.kmeans_restarts, options.seed);
      if (km.degenerate) {
        out.mask = km.mask;
        out.degenerate = true;
        out.reason = "k-means found a single cluster";
        return out;
      }
      init = std::move(km.mask);
      break;
    }
    case InitMethod::kCls:
      if (cls == nullptr) throw ValidationError("cls initialization needs a CLS embedding");
      init = init_cls(field, *cls);
      break;
  }

  if (!options.ipo) {
    out.mask = std::move(init);
    if (single_class(out.mask)) {
      out.degenerate = true;
      out.reason = "initial bipartition is single-class";
    }
    return out;
  }
  if (single_class(init)) {
    out.mask = PatchMask(field.h_patches, field.w_patches);
    out.degenerate = true;
    out.reason = "initial bipartition is single-class";
    return out;
  }
  try {
    IpoResult refined = ipo_run(normalized, init, options.ipo_iterations);
    out.mask = std::move(refined.labels);
    out.trace = std::move(refined.trace);
    out.ipo_iterations = refined.state.iteration;
  } catch (const DegenerateInputError& e) {
    out.mask = PatchMask(field.h_patches, field.w_patches);
    out.degenerate = true;
    out.reason = e.what();
  }
  return out;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (!(lr > 0.0)) throw ValidationError("learning rate must be positive");
  if (!(tau > 0.0) || !(eps_floor > 0.0)) throw ValidationError("tau and eps_floor must be positive");
  if (ipo_iterations < 0) throw ValidationError("IPO iterations must be >= 0");
  if (weights.con < 0.0 || weights.dice < 0.0 || weights.bce < 0.0) {
    throw ValidationError("loss weights must be non-negative");
  }
  if (weights.con == 0.0 && weights.dice == 0.0 && weights.bce == 0.0) {
    throw ValidationError("at least one loss component must be enabled");
  }
  if (!(temperature > 0.0)) throw ValidationError("temperature must be positive");
  if (contrastive_cap < 2) throw ValidationError("contrastive cap must be >= 2");
  if (hidden < 1 || embed < 1) throw ValidationError("head dimensions must be >= 1");
  if (workers < 1) throw ValidationError("worker count must be >= 1");
}

SegmentOptions TrainConfig::segment_options() const {
  SegmentOptions o;
  o.init = InitMethod::kNcut;
  o.ipo = ipo;
  o.ipo_source = ipo_source;
  o.tau = tau;
  o.eps_floor = eps_floor;
  o.ipo_iterations = ipo_iterations;
  o.seed = seed;
  return o;
}

std::vector<std::filesystem::path> list_feature_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("feature directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".dpf") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ValidationError("no .dpf files in " + dir.string());
  return files;
}

std::string format_manifest(const std::vector<ManifestEntry>& entries) {
  std::ostringstream out;
  out << "image_id\th_patches\tw_patches\tfg_fraction\tipo_iters\tdegenerate_flag\n";
  for (const auto& e : entries) {
    out << e.image_id << '\t' << e.h_patches << '\t' << e.w_patches << '\t' << format_double(e.fg_fraction) << '\t'
        << e.ipo_iters << '\t' << (e.degenerate ? 1 : 0) << '\n';
  }
  return out.str();
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<ManifestEntry> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    ManifestEntry e;
    int degenerate = 0;
    if (!(std::getline(row, e.image_id, '\t') && row >> e.h_patches >> e.w_patches >> e.fg_fraction >> e.ipo_iters >>
          degenerate)) {
      throw FormatError(path.string() + ": malformed manifest line " + std::to_string(line_no));
    }
    e.degenerate = degenerate != 0;
    out.push_back(std::move(e));
  }
  return out;
}

PseudoLabelReport generate_pseudolabels(const TrainConfig& config) {
  config.validate();
  const auto files = list_feature_files(config.feature_dir);
  std::filesystem::create_directories(config.cache_dir);
  const SegmentOptions options = config.segment_options();

  struct Slot {
    std::optional<ManifestEntry> entry;
    std::optional<FileFailure> failure;
  };
  std::vector<Slot> slots(files.size());
  parallel_for(files.size(), config.workers, [&](std::size_t i) {
    try {
      const FeatureField field = read_dpf(files[i]);
      ManifestEntry e;
      e.image_id = field.image_id;
      e.h_patches = field.h_patches;
      e.w_patches = field.w_patches;
      SegmentOutcome seg;
      try {
        seg = segment_patches(field, options);
      } catch (const DegenerateInputError& err) {
        seg.degenerate = true;
        seg.reason = err.what();
      }
      e.degenerate = seg.degenerate;
      if (!seg.degenerate) {
        e.fg_fraction = static_cast<double>(seg.mask.count_foreground()) / static_cast<double>(seg.mask.size());
        e.ipo_iters = seg.ipo_iterations;
        write_mask_pgm(seg.mask, config.cache_dir / (field.image_id + ".mask.pgm"));
      }
      slots[i].entry = std::move(e);
    } catch (const Error& err) {
      slots[i].failure = FileFailure{files[i], err.what()};
    }
  });

  PseudoLabelReport report;
  for (auto& s : slots) {
    if (s.entry) report.entries.push_back(std::move(*s.entry));
    if (s.failure) report.failures.push_back(std::move(*s.failure));
  }
  std::sort(report.entries.begin(), report.entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.image_id < b.image_id; });
  for (std::size_t i = 1; i < report.entries.size(); ++i) {
    if (report.entries[i].image_id == report.entries[i - 1].image_id) {
      throw ValidationError("duplicate image id '" + report.entries[i].image_id + "' in " +
                            config.feature_dir.string());
    }
  }
  write_text_atomic(config.cache_dir / "manifest.tsv", format_manifest(report.entries));
  return report;
}

TrainResult train_head(const TrainConfig& config) {
  config.validate();
  const auto manifest = read_manifest(config.cache_dir / "manifest.tsv");

  std::map<std::string, FeatureField> fields;
  for (const auto& path : list_feature_files(config.feature_dir)) {
    FeatureField f = read_dpf(path);
    std::string id = f.image_id;
    fields.emplace(std::move(id), std::move(f));
  }

  struct Sample {
    std::string image_id;
    Eigen::MatrixXd features;
    std::vector<std::uint8_t> labels;
  };
  std::vector<Sample> samples;
  TrainResult result;
  for (const auto& entry : manifest) {
    if (entry.degenerate) continue;
    auto it = fields.find(entry.image_id);
    if (it == fields.end()) throw ValidationError("no features for cached image '" + entry.image_id + "'");
    const FeatureField& field = it->second;
    const PatchMask mask = prob_map_to_mask(read_mask_pgm(config.cache_dir / (entry.image_id + ".mask.pgm")));
    if (mask.h_patches != field.h_patches || mask.w_patches != field.w_patches) {
      throw ValidationError("pseudo-label grid does not match features for image '" + entry.image_id + "'");
    }
    samples.push_back({entry.image_id, feature_matrix(field), mask.labels});
    result.log.images.push_back(entry);
  }
  if (samples.empty()) throw ValidationError("no usable pseudo-labels in " + config.cache_dir.string());

  const int dim = static_cast<int>(samples.front().features.cols());
  for (const auto& s : samples) {
    if (s.features.cols() != dim) throw ValidationError("feature dimension differs for image '" + s.image_id + "'");
  }

  result.params = HeadParams::initialize(dim, config.hidden, config.embed, mix_seed(config.seed, 0x1417));
  AdamState adam = AdamState::for_params(result.params, config.lr);
  LossConfig loss_config;
  loss_config.weights = config.weights;
  loss_config.contrastive.temperature = config.temperature;
  loss_config.contrastive.cap = config.contrastive_cap;

  std::vector<std::size_t> order(samples.size());
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle(mix_seed(config.seed, 0x5000 + static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    LossBreakdown sum;
    for (std::size_t idx : order) {
      const Sample& s = samples[idx];
      loss_config.contrastive.seed = mix_seed(mix_seed(config.seed, static_cast<std::uint64_t>(epoch)), idx);
      const LossAndGrads lg = loss_total_and_grads(result.params, s.features, s.labels, loss_config);
      adam_step(adam, result.params, lg.grads);
      if (!result.params.all_finite()) {
        throw Error("training produced non-finite parameters at epoch " + std::to_string(epoch) + ", image '" +
                    s.image_id + "'");
      }
      sum.con += lg.loss.con;
      sum.dice += lg.loss.dice;
      sum.bce += lg.loss.bce;
      sum.total += lg.loss.total;
    }
    const double n = static_cast<double>(samples.size());
    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean = {sum.con / n, sum.dice / n, sum.bce / n, sum.total / n};
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.epochs.push_back(rec);
  }
  return result;
}

std::string format_train_log(const TrainLog& log) {
  std::ostringstream out;
  out << "epoch\tcon\tdice\tbce\ttotal\n";
  for (const auto& e : log.epochs) {
    out << e.epoch << '\t' << format_double(e.mean.con) << '\t' << format_double(e.mean.dice) << '\t'
        << format_double(e.mean.bce) << '\t' << format_double(e.mean.total) << '\n';
  }
  return out.str();
}

std::string format_train_timing(const TrainLog& log) {
  std::ostringstream out;
  out << "epoch\tseconds\n";
  for (const auto& e : log.epochs) out << e.epoch << '\t' << format_double(e.seconds) << '\n';
  return out.str();
}

ProbMap infer(const FeatureField& field, const HeadParams& params, std::uint32_t out_h, std::uint32_t out_w) {
  field.validate();
  params.validate();
  if (static_cast<int>(field.dim) != params.dim()) {
    throw ValidationError("checkpoint expects dimension " + std::to_string(params.dim()) + ", features of '" +
                          field.image_id + "' have " + std::to_string(field.dim));
  }
  const HeadForward fwd = head_forward(params, field);
  return upsample_bilinear(foreground_probabilities(fwd), field.h_patches, field.w_patches, out_h, out_w);
}

}  // namespace selfment
