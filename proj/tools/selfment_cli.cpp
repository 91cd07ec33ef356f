// selfment: unsupervised foreground segmentation from dense patch features.
//
// Exit codes: 0 success, 1 partial or data failure, 2 usage error.

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "selfment/errors.hpp"
#include "selfment/ipo.hpp"
#include "selfment/metrics.hpp"
#include "selfment/parallel.hpp"
#include "selfment/seg_head.hpp"
#include "selfment/synthetic.hpp"
#include "selfment/tensor_io.hpp"
#include "selfment/trainer.hpp"
#include "selfment/upsample.hpp"

namespace fs = std::filesystem;
using namespace selfment;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitData = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool parse_switch(const std::string& value, const char* flag) {
  if (value == "on" || value == "true" || value == "1") return true;
  if (value == "off" || value == "false" || value == "0") return false;
  throw UsageError(std::string(flag) + " expects on or off, got '" + value + "'");
}

/// Expands files and directories into a sorted list of .dpf paths.
std::vector<fs::path> collect_features(const std::vector<std::string>& inputs) {
  std::set<fs::path> files;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      for (const auto& entry : fs::directory_iterator(p))
        if (entry.is_regular_file() && entry.path().extension() == ".dpf") files.insert(entry.path());
    } else if (fs::is_regular_file(p)) {
      files.insert(p);
    } else {
      throw UsageError("no such file or directory: " + in);
    }
  }
  return {files.begin(), files.end()};
}

fs::path sidecar_for(const fs::path& dpf, const std::optional<fs::path>& cls_dir) {
  fs::path name = dpf.filename();
  name.replace_extension(".cls");
  return cls_dir ? *cls_dir / name : dpf.parent_path() / name;
}

std::pair<std::uint32_t, std::uint32_t> parse_size(const std::string& s) {
  const auto x = s.find('x');
  if (x == std::string::npos) throw UsageError("--size expects HxW, got '" + s + "'");
  try {
    const auto h = std::stoul(s.substr(0, x));
    const auto w = std::stoul(s.substr(x + 1));
    if (h == 0 || w == 0) throw UsageError("--size dimensions must be positive");
    return {static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(w)};
  } catch (const std::logic_error&) {
    throw UsageError("--size expects HxW, got '" + s + "'");
  }
}

void report_failures(const std::vector<FileFailure>& failures) {
  for (const auto& f : failures) std::cerr << "error: " << f.path.string() << ": " << f.message << '\n';
}

std::string default_cache_dir() {
  if (const char* env = std::getenv("SELFMENT_CACHE_DIR"); env != nullptr && *env != '\0') return env;
  return "selfment_cache";
}

/// Pixel-resolution {0,1} map of a patch mask (bilinear, binarized at 0.5).
ProbMap patch_mask_to_pixels(const PatchMask& mask, std::uint32_t h, std::uint32_t w) {
  return binarize(upsample_mask(mask, h, w));
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string feature_dir;
  std::string gt_dir;
  std::size_t count = 10;
  std::uint64_t seed = 0;
  SyntheticSpec spec;
};

int run_synth(const SynthArgs& a) {
  const auto corpus = make_synthetic_corpus(a.spec, a.count, a.seed);
  export_synthetic(corpus, a.feature_dir, a.gt_dir);
  std::cerr << "wrote " << corpus.size() << " synthetic images\n";
  return kExitOk;
}

struct SegmentArgs {
  std::vector<std::string> inputs;
  std::string out_dir;
  std::string patch_dir;
  std::string trace_dir;
  std::string cls_dir;
  std::string init = "ncut";
  std::string ipo = "on";
  std::string ipo_source = "component";
  std::string size;
  SegmentOptions options;
  unsigned jobs = 1;
};

int run_segment(SegmentArgs& a) {
  a.options.init = parse_init_method(a.init);
  a.options.ipo = parse_switch(a.ipo, "--ipo");
  if (a.ipo_source == "component") {
    a.options.ipo_source = IpoSource::kComponent;
  } else if (a.ipo_source == "mask") {
    a.options.ipo_source = IpoSource::kMask;
  } else {
    throw UsageError("--ipo-source expects component or mask");
  }
  const auto files = collect_features(a.inputs);
  if (files.empty()) throw UsageError("no .dpf inputs");
  std::optional<fs::path> cls_dir;
  if (!a.cls_dir.empty()) cls_dir = fs::path(a.cls_dir);
  if (a.options.init == InitMethod::kCls) {
    for (const auto& f : files) {
      if (!fs::is_regular_file(sidecar_for(f, cls_dir))) {
        throw UsageError("--init cls needs a CLS sidecar: missing " + sidecar_for(f, cls_dir).string());
      }
    }
  }
  std::optional<std::pair<std::uint32_t, std::uint32_t>> size;
  if (!a.size.empty()) size = parse_size(a.size);

  fs::create_directories(a.out_dir);
  if (!a.patch_dir.empty()) fs::create_directories(a.patch_dir);
  if (!a.trace_dir.empty()) fs::create_directories(a.trace_dir);

  std::vector<std::optional<FileFailure>> failures(files.size());
  std::vector<std::string> notes(files.size());
  parallel_for(files.size(), a.jobs, [&](std::size_t i) {
    try {
      const FeatureField field = read_dpf(files[i]);
      std::vector<float> cls;
      if (a.options.init == InitMethod::kCls) cls = read_cls_sidecar(sidecar_for(files[i], cls_dir));
      const SegmentOutcome seg = segment_patches(field, a.options, cls.empty() ? nullptr : &cls);
      if (seg.degenerate) notes[i] = field.image_id + ": degenerate (" + seg.reason + ")";
      const auto [h, w] = size.value_or(std::pair{field.source_h, field.source_w});
      write_prob_pgm(patch_mask_to_pixels(seg.mask, h, w), fs::path(a.out_dir) / (field.image_id + ".pgm"));
      if (!a.patch_dir.empty()) write_mask_pgm(seg.mask, fs::path(a.patch_dir) / (field.image_id + ".mask.pgm"));
      if (!a.trace_dir.empty() && a.options.ipo) {
        write_ipo_trace_csv(seg.trace, fs::path(a.trace_dir) / (field.image_id + ".ipo.csv"));
      }
    } catch (const Error& e) {
      failures[i] = FileFailure{files[i], e.what()};
    }
  });

  std::vector<FileFailure> failed;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (!notes[i].empty()) std::cerr << "warning: " << notes[i] << '\n';
    if (failures[i]) failed.push_back(*failures[i]);
  }
  report_failures(failed);
  std::cerr << "segmented " << files.size() - failed.size() << "/" << files.size() << " images\n";
  return failed.empty() ? kExitOk : kExitData;
}

struct TrainArgs {
  std::string features;
  std::string cache;
  std::string checkpoint;
  std::string log;
  std::string ipo = "on";
  std::string loss_con = "on";
  std::string loss_dice = "on";
  std::string loss_bce = "on";
  TrainConfig config;
};

void finish_config(TrainArgs& a, bool need_features) {
  if (need_features && !fs::is_directory(a.features)) throw UsageError("feature directory not found: " + a.features);
  a.config.feature_dir = a.features;
  a.config.cache_dir = a.cache.empty() ? default_cache_dir() : a.cache;
  a.config.ipo = parse_switch(a.ipo, "--ipo");
  if (!parse_switch(a.loss_con, "--loss-con")) a.config.weights.con = 0.0;
  if (!parse_switch(a.loss_dice, "--loss-dice")) a.config.weights.dice = 0.0;
  if (!parse_switch(a.loss_bce, "--loss-bce")) a.config.weights.bce = 0.0;
  try {
    a.config.validate();
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
}

int run_pseudolabel(TrainArgs& a) {
  finish_config(a, true);
  const PseudoLabelReport report = generate_pseudolabels(a.config);
  std::size_t degenerate = 0;
  for (const auto& e : report.entries) {
    if (e.degenerate) {
      ++degenerate;
      std::cerr << "warning: " << e.image_id << ": degenerate bipartition, skipped\n";
    }
  }
  report_failures(report.failures);
  std::cerr << "pseudo-labelled " << report.entries.size() - degenerate << " images (" << degenerate
            << " degenerate, " << report.failures.size() << " failed)\n";
  return report.failures.empty() ? kExitOk : kExitData;
}

int run_train(TrainArgs& a) {
  finish_config(a, true);
  const TrainResult result = train_head(a.config);
  write_checkpoint(result.params, a.checkpoint);
  const fs::path log = a.log.empty() ? fs::path(a.checkpoint).replace_extension(".log.tsv") : fs::path(a.log);
  write_text_atomic(log, format_train_log(result.log));
  fs::path timing = log;
  timing.replace_extension(".timing.tsv");
  write_text_atomic(timing, format_train_timing(result.log));
  for (const auto& e : result.log.epochs) {
    std::fprintf(stderr, "epoch %d  total %.6f  (con %.6f dice %.6f bce %.6f)  %.2fs\n", e.epoch, e.mean.total,
                 e.mean.con, e.mean.dice, e.mean.bce, e.seconds);
  }
  return kExitOk;
}

struct InferArgs {
  std::vector<std::string> inputs;
  std::string checkpoint;
  std::string out_dir;
  std::string size;
  unsigned jobs = 1;
};

int run_infer(const InferArgs& a) {
  if (!fs::is_regular_file(a.checkpoint)) throw UsageError("checkpoint not found: " + a.checkpoint);
  const HeadParams params = read_checkpoint(a.checkpoint);
  const auto files = collect_features(a.inputs);
  if (files.empty()) throw UsageError("no .dpf inputs");
  std::optional<std::pair<std::uint32_t, std::uint32_t>> size;
  if (!a.size.empty()) size = parse_size(a.size);
  fs::create_directories(a.out_dir);

  std::vector<std::optional<FileFailure>> failures(files.size());
  parallel_for(files.size(), a.jobs, [&](std::size_t i) {
    try {
      const FeatureField field = read_dpf(files[i]);
      const auto [h, w] = size.value_or(std::pair{field.source_h, field.source_w});
      write_prob_pgm(infer(field, params, h, w), fs::path(a.out_dir) / (field.image_id + ".pgm"));
    } catch (const Error& e) {
      failures[i] = FileFailure{files[i], e.what()};
    }
  });
  std::vector<FileFailure> failed;
  for (auto& f : failures)
    if (f) failed.push_back(*f);
  report_failures(failed);
  return failed.empty() ? kExitOk : kExitData;
}

std::map<std::string, fs::path> pgm_by_stem(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw UsageError("directory not found: " + dir.string());
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") out[entry.path().stem().string()] = entry.path();
  }
  return out;
}

struct EvalArgs {
  std::string pred;
  std::string gt;
  std::string out;
  unsigned jobs = 1;
};

int run_eval(const EvalArgs& a) {
  const auto preds = pgm_by_stem(a.pred);
  const auto gts = pgm_by_stem(a.gt);
  std::vector<std::string> stems;
  std::vector<std::string> unmatched;
  for (const auto& [stem, path] : preds) (gts.count(stem) ? stems : unmatched).push_back("pred:" + stem);
  for (auto& s : stems) s = s.substr(5);
  for (const auto& [stem, path] : gts)
    if (!preds.count(stem)) unmatched.push_back("gt:" + stem);

  std::vector<NamedReport> rows(stems.size());
  std::vector<std::optional<std::string>> errors(stems.size());
  parallel_for(stems.size(), a.jobs, [&](std::size_t i) {
    try {
      const ProbMap pred = read_mask_pgm(preds.at(stems[i]));
      const BinaryMap gt = ground_truth_from(read_mask_pgm(gts.at(stems[i])));
      rows[i] = {stems[i], evaluate(pred, gt)};
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });
  std::vector<NamedReport> ok;
  bool failed = !unmatched.empty();
  for (std::size_t i = 0; i < stems.size(); ++i) {
    if (errors[i]) {
      std::cerr << "error: " << stems[i] << ": " << *errors[i] << '\n';
      failed = true;
    } else {
      ok.push_back(rows[i]);
    }
  }
  for (const auto& u : unmatched) std::cerr << "unmatched: " << u << '\n';
  const std::string tsv = format_eval_tsv(ok);
  if (a.out.empty()) {
    std::cout << tsv;
  } else {
    write_text_atomic(a.out, tsv);
  }
  return failed ? kExitData : kExitOk;
}

struct CompareArgs {
  std::vector<std::string> inputs;
  std::string gt;
  std::string out;
  std::string cls_dir;
  SegmentOptions options;
  unsigned jobs = 1;
};

int run_compare_init(CompareArgs& a) {
  const auto files = collect_features(a.inputs);
  if (files.empty()) {
    std::cerr << "error: no .dpf inputs\n";
    return kExitData;
  }
  const auto gts = pgm_by_stem(a.gt);
  std::optional<fs::path> cls_dir;
  if (!a.cls_dir.empty()) cls_dir = fs::path(a.cls_dir);

  const std::vector<InitMethod> methods = {InitMethod::kCls, InitMethod::kKmeans, InitMethod::kNcut};
  struct Cell {
    std::optional<MetricReport> report;
    std::string error;
  };
  std::vector<std::array<Cell, 3>> cells(files.size());
  parallel_for(files.size(), a.jobs, [&](std::size_t i) {
    FeatureField field;
    BinaryMap gt;
    try {
      field = read_dpf(files[i]);
      auto it = gts.find(field.image_id);
      if (it == gts.end()) throw Error("no ground truth for '" + field.image_id + "'");
      gt = ground_truth_from(read_mask_pgm(it->second));
    } catch (const Error& e) {
      for (auto& c : cells[i]) c.error = e.what();
      return;
    }
    for (std::size_t m = 0; m < methods.size(); ++m) {
      try {
        SegmentOptions o = a.options;
        o.init = methods[m];
        o.ipo = false;
        std::vector<float> cls;
        if (o.init == InitMethod::kCls) cls = read_cls_sidecar(sidecar_for(files[i], cls_dir));
        const SegmentOutcome seg = segment_patches(field, o, cls.empty() ? nullptr : &cls);
        const ProbMap pred = patch_mask_to_pixels(seg.mask, gt.height, gt.width);
        const BinaryMap bin = binarize_prediction(pred);
        MetricReport r;
        r.f_max = f_max(pred, gt);
        r.iou = iou(bin, gt);
        r.acc = accuracy(bin, gt);
        cells[i][m].report = r;
      } catch (const Error& e) {
        cells[i][m].error = e.what();
      }
    }
  });

  bool failed = false;
  std::string tsv = "method\tf_max\tiou\tacc\timages\n";
  for (std::size_t m = 0; m < methods.size(); ++m) {
    std::vector<MetricReport> reports;
    for (std::size_t i = 0; i < files.size(); ++i) {
      if (cells[i][m].report) {
        reports.push_back(*cells[i][m].report);
      } else {
        failed = true;
        std::cerr << "error: " << to_string(methods[m]) << ": " << files[i].string() << ": " << cells[i][m].error
                  << '\n';
      }
    }
    const MetricReport mean = mean_report(reports);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s\t%.6f\t%.6f\t%.6f\t%zu\n", to_string(methods[m]).c_str(), mean.f_max, mean.iou,
                  mean.acc, reports.size());
    tsv += buf;
  }
  if (a.out.empty()) {
    std::cout << tsv;
  } else {
    write_text_atomic(a.out, tsv);
  }
  return failed ? kExitData : kExitOk;
}

void add_pipeline_flags(CLI::App* cmd, TrainArgs& a) {
  cmd->add_option("--features", a.features, "Directory of .dpf feature files")->required();
  cmd->add_option("--cache", a.cache, "Pseudo-label cache directory (default: $SELFMENT_CACHE_DIR)");
  cmd->add_option("--tau", a.config.tau, "Affinity threshold");
  cmd->add_option("--eps", a.config.eps_floor, "Affinity floor for sub-threshold pairs");
  cmd->add_option("--ipo", a.ipo, "Iterative patch optimization on|off");
  cmd->add_option("--ipo-iters", a.config.ipo_iterations, "Maximum IPO iterations");
  cmd->add_option("--seed", a.config.seed, "Random seed");
  cmd->add_option("--jobs", a.config.workers, "Worker threads");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"selfment: unsupervised foreground segmentation from dense patch features"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a planted two-cluster corpus (DPF + CLS sidecars + GT PGMs)");
  synth_cmd->add_option("--features", synth.feature_dir, "Output feature directory")->required();
  synth_cmd->add_option("--gt", synth.gt_dir, "Output ground-truth directory")->required();
  synth_cmd->add_option("--count", synth.count, "Number of images");
  synth_cmd->add_option("--seed", synth.seed, "Corpus seed");
  synth_cmd->add_option("--sigma", synth.spec.sigma, "Per-coordinate noise standard deviation");
  synth_cmd->add_option("--dim", synth.spec.dim, "Embedding dimension");
  synth_cmd->add_option("--grid", synth.spec.h_patches, "Patch grid side")->each([&](const std::string&) {
    synth.spec.w_patches = synth.spec.h_patches;
  });
  synth_cmd->add_option("--patch-size", synth.spec.patch_size, "Pixels per patch side");
  synth_cmd->add_option("--min-side", synth.spec.min_side, "Smallest block side (patches)");
  synth_cmd->add_option("--max-side", synth.spec.max_side, "Largest block side (patches)");
  synth_cmd->add_option("--distractors", synth.spec.distractor_fraction, "Distractor patches per foreground patch");
  synth_cmd->add_option("--distractor-blend", synth.spec.distractor_blend, "Foreground weight of distractors");
  synth_cmd->add_option("--corner-fraction", synth.spec.corner_fraction, "Share of blocks placed in a corner");

  SegmentArgs seg;
  auto* seg_cmd = app.add_subcommand("segment", "NCut / k-means / CLS initialization with optional IPO");
  seg_cmd->add_option("inputs", seg.inputs, "DPF files or directories")->required();
  seg_cmd->add_option("--out", seg.out_dir, "Output directory for pixel masks")->required();
  seg_cmd->add_option("--patch-out", seg.patch_dir, "Also write patch-grid masks here");
  seg_cmd->add_option("--trace-dir", seg.trace_dir, "Write per-image IPO traces (CSV)");
  seg_cmd->add_option("--init", seg.init, "ncut | kmeans | cls");
  seg_cmd->add_option("--ipo", seg.ipo, "on | off");
  seg_cmd->add_option("--ipo-source", seg.ipo_source, "component | mask");
  seg_cmd->add_option("--ipo-iters", seg.options.ipo_iterations, "Maximum IPO iterations");
  seg_cmd->add_option("--cls-dir", seg.cls_dir, "Directory of <stem>.cls sidecars (default: next to each DPF)");
  seg_cmd->add_option("--tau", seg.options.tau, "Affinity threshold");
  seg_cmd->add_option("--eps", seg.options.eps_floor, "Affinity floor");
  seg_cmd->add_option("--restarts", seg.options.kmeans_restarts, "k-means restarts");
  seg_cmd->add_option("--seed", seg.options.seed, "Random seed");
  seg_cmd->add_option("--size", seg.size, "Output size HxW (default: source size)");
  seg_cmd->add_option("--jobs", seg.jobs, "Worker threads");

  TrainArgs pl;
  auto* pl_cmd = app.add_subcommand("pseudolabel", "Cache NCut + IPO pseudo-labels for a feature directory");
  add_pipeline_flags(pl_cmd, pl);

  TrainArgs tr;
  auto* tr_cmd = app.add_subcommand("train", "Train the segmentation head on cached pseudo-labels");
  add_pipeline_flags(tr_cmd, tr);
  tr_cmd->add_option("--out", tr.checkpoint, "Checkpoint path")->required();
  tr_cmd->add_option("--log", tr.log, "Training log TSV (default: checkpoint path with .log.tsv extension)");
  tr_cmd->add_option("--epochs", tr.config.epochs, "Epochs");
  tr_cmd->add_option("--lr", tr.config.lr, "Adam learning rate");
  tr_cmd->add_option("--temperature", tr.config.temperature, "Contrastive temperature");
  tr_cmd->add_option("--contrastive-cap", tr.config.contrastive_cap, "Patches sampled for the contrastive loss");
  tr_cmd->add_option("--hidden", tr.config.hidden, "Projection hidden width");
  tr_cmd->add_option("--embed", tr.config.embed, "Projection output width");
  tr_cmd->add_option("--loss-con", tr.loss_con, "on | off");
  tr_cmd->add_option("--loss-dice", tr.loss_dice, "on | off");
  tr_cmd->add_option("--loss-bce", tr.loss_bce, "on | off");
  tr_cmd->add_option("--w-con", tr.config.weights.con, "Contrastive weight");
  tr_cmd->add_option("--w-dice", tr.config.weights.dice, "Dice weight");
  tr_cmd->add_option("--w-bce", tr.config.weights.bce, "BCE weight");

  InferArgs inf;
  auto* inf_cmd = app.add_subcommand("infer", "Predict probability maps with a trained head");
  inf_cmd->add_option("inputs", inf.inputs, "DPF files or directories")->required();
  inf_cmd->add_option("--checkpoint", inf.checkpoint, "Head checkpoint")->required();
  inf_cmd->add_option("--out", inf.out_dir, "Output directory")->required();
  inf_cmd->add_option("--size", inf.size, "Output size HxW (default: source size)");
  inf_cmd->add_option("--jobs", inf.jobs, "Worker threads");

  EvalArgs ev;
  auto* ev_cmd = app.add_subcommand("eval", "Score predictions against ground truth (paired by file stem)");
  ev_cmd->add_option("--pred", ev.pred, "Prediction PGM directory")->required();
  ev_cmd->add_option("--gt", ev.gt, "Ground-truth PGM directory")->required();
  ev_cmd->add_option("--out", ev.out, "Output TSV (default: stdout)");
  ev_cmd->add_option("--jobs", ev.jobs, "Worker threads");

  CompareArgs cmp;
  auto* cmp_cmd = app.add_subcommand("compare-init", "Compare CLS, k-means and NCut initial bipartitions");
  cmp_cmd->add_option("inputs", cmp.inputs, "DPF files or directories")->required();
  cmp_cmd->add_option("--gt", cmp.gt, "Ground-truth PGM directory")->required();
  cmp_cmd->add_option("--out", cmp.out, "Output TSV (default: stdout)");
  cmp_cmd->add_option("--cls-dir", cmp.cls_dir, "Directory of CLS sidecars");
  cmp_cmd->add_option("--tau", cmp.options.tau, "Affinity threshold");
  cmp_cmd->add_option("--eps", cmp.options.eps_floor, "Affinity floor");
  cmp_cmd->add_option("--restarts", cmp.options.kmeans_restarts, "k-means restarts");
  cmp_cmd->add_option("--seed", cmp.options.seed, "Random seed");
  cmp_cmd->add_option("--jobs", cmp.jobs, "Worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*synth_cmd) return run_synth(synth);
    if (*seg_cmd) return run_segment(seg);
    if (*pl_cmd) return run_pseudolabel(pl);
    if (*tr_cmd) return run_train(tr);
    if (*inf_cmd) return run_infer(inf);
    if (*ev_cmd) return run_eval(ev);
    if (*cmp_cmd) return run_compare_init(cmp);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
