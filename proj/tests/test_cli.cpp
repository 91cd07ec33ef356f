#include <cstdlib>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <sys/wait.h>

#include "selfment/affinity.hpp"
#include "selfment/metrics.hpp"
#include "selfment/spectral.hpp"
#include "selfment/tensor_io.hpp"
#include "support/test_util.hpp"

using namespace selfment;
using testutil::TempDir;

namespace {

int cli(const std::string& args) {
  const std::string cmd = std::string("'") + SELFMENT_CLI + "' " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Column `col` of the row whose first field is `key`.
double tsv_value(const std::string& text, const std::string& key, int col) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string field;
    std::getline(row, field, '\t');
    if (field != key) continue;
    for (int c = 1; c <= col; ++c) std::getline(row, field, '\t');
    return std::stod(field);
  }
  ADD_FAILURE() << "no row " << key;
  return -1;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("cli");
    ASSERT_EQ(cli("synth --features " + q(*dir_ / "f") + " --gt " + q(*dir_ / "g") +
                  " --count 6 --grid 24 --dim 32 --min-side 5 --max-side 10 --seed 3"),
              0);
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static std::filesystem::path path(const std::string& name) { return *dir_ / name; }
  static TempDir* dir_;
};

TempDir* Cli::dir_ = nullptr;

}  // namespace

TEST_F(Cli, UsageErrorsExitTwoAndHelpExitsZero) {
  EXPECT_EQ(cli("--help"), 0);
  EXPECT_EQ(cli(""), 2);
  EXPECT_EQ(cli("frobnicate"), 2);
  EXPECT_EQ(cli("segment " + q(path("f")) + " --out " + q(path("x")) + " --ipo maybe"), 2);
  EXPECT_EQ(cli("segment " + q(path("missing")) + " --out " + q(path("x"))), 2);
  EXPECT_EQ(cli("train --features " + q(path("f")) + " --cache " + q(path("c0")) + " --out " + q(path("h.sgh")) +
                " --epochs 0"),
            2);
}

TEST_F(Cli, SegmentWritesOneMaskPerImage) {
  EXPECT_EQ(cli("segment " + q(path("f")) + " --init ncut --ipo on --out " + q(path("seg")) + " --trace-dir " +
                q(path("trace"))),
            0);
  for (int i = 0; i < 6; ++i) {
    const std::string id = "synth_000" + std::to_string(i);
    const auto map = read_mask_pgm(path("seg/" + id + ".pgm"));
    EXPECT_EQ(map.height, 24u * 16u);
    EXPECT_TRUE(std::filesystem::exists(path("trace/" + id + ".ipo.csv")));
  }
}

TEST_F(Cli, ClsInitWithoutSidecarIsUsageError) {
  std::filesystem::create_directories(path("nocls"));
  std::filesystem::copy_file(path("f/synth_0000.dpf"), path("nocls/synth_0000.dpf"));
  EXPECT_EQ(cli("segment " + q(path("nocls")) + " --init cls --out " + q(path("segcls"))), 2);
  EXPECT_EQ(cli("segment " + q(path("f")) + " --init cls --out " + q(path("segcls"))), 0);
}

TEST_F(Cli, KmeansWithoutIpoMatchesInitializer) {
  ASSERT_EQ(cli("segment " + q(path("f")) + " --init kmeans --ipo off --seed 9 --out " + q(path("km")) +
                " --patch-out " + q(path("kmp"))),
            0);
  for (int i = 0; i < 6; ++i) {
    const std::string id = "synth_000" + std::to_string(i);
    const auto field = read_dpf(path("f/" + id + ".dpf"));
    const auto direct = init_kmeans2(normalize_features(field), 5, 9).mask;
    EXPECT_EQ(prob_map_to_mask(read_mask_pgm(path("kmp/" + id + ".mask.pgm"))), direct) << id;
  }
}

TEST_F(Cli, SegmentReportsPartialFailure) {
  std::filesystem::create_directories(path("mixed"));
  std::filesystem::copy_file(path("f/synth_0001.dpf"), path("mixed/synth_0001.dpf"));
  write_text_atomic(path("mixed/broken.dpf"), "DPF1");
  EXPECT_EQ(cli("segment " + q(path("mixed")) + " --out " + q(path("mixed_out"))), 1);
  EXPECT_TRUE(std::filesystem::exists(path("mixed_out/synth_0001.pgm")));
}

TEST_F(Cli, FullPipelineAndDeterministicTraining) {
  // Default synthetic corpus: 48x48 patch grid, sigma 0.05.
  ASSERT_EQ(cli("synth --features " + q(path("full_f")) + " --gt " + q(path("full_g")) + " --count 6 --seed 4"), 0);
  const std::string common = " --features " + q(path("full_f")) + " --cache " + q(path("cache")) + " --seed 7";
  ASSERT_EQ(cli("pseudolabel" + common), 0);
  // Six images need more epochs than a full corpus for a comparable step count.
  ASSERT_EQ(cli("train" + common + " --epochs 20 --out " + q(path("run1/head.sgh"))), 0);
  ASSERT_EQ(cli("train" + common + " --epochs 20 --out " + q(path("run2/head.sgh"))), 0);
  EXPECT_EQ(read_file_bytes(path("run1/head.sgh")), read_file_bytes(path("run2/head.sgh")));
  ASSERT_TRUE(std::filesystem::exists(path("run1/head.log.tsv")));
  EXPECT_EQ(slurp(path("run1/head.log.tsv")), slurp(path("run2/head.log.tsv")));

  ASSERT_EQ(cli("infer " + q(path("full_f")) + " --checkpoint " + q(path("run1/head.sgh")) + " --out " + q(path("pred"))), 0);
  ASSERT_EQ(cli("eval --pred " + q(path("pred")) + " --gt " + q(path("full_g")) + " --out " + q(path("eval.tsv"))), 0);
  const std::string tsv = slurp(path("eval.tsv"));
  EXPECT_GE(tsv_value(tsv, "MEAN", 2), 0.95) << tsv;
}

TEST_F(Cli, EvalWithDisjointStemsExitsOne) {
  std::filesystem::create_directories(path("other_pred"));
  write_prob_pgm(ProbMap(8, 8, 0.5), path("other_pred/unrelated.pgm"));
  EXPECT_EQ(cli("eval --pred " + q(path("other_pred")) + " --gt " + q(path("g"))), 1);
}

TEST_F(Cli, CompareInitOrderingAndDeterminism) {
  ASSERT_EQ(cli("compare-init " + q(path("f")) + " --gt " + q(path("g")) + " --seed 2 --out " + q(path("cmp1.tsv"))), 0);
  ASSERT_EQ(cli("compare-init " + q(path("f")) + " --gt " + q(path("g")) + " --seed 2 --jobs 3 --out " +
                q(path("cmp2.tsv"))),
            0);
  const std::string a = slurp(path("cmp1.tsv"));
  EXPECT_EQ(a, slurp(path("cmp2.tsv")));
  EXPECT_EQ(a.substr(0, a.find('\n')), "method\tf_max\tiou\tacc\timages");
  EXPECT_GE(tsv_value(a, "ncut", 2), tsv_value(a, "kmeans", 2));
  EXPECT_GE(tsv_value(a, "kmeans", 2), tsv_value(a, "cls", 2));

  std::filesystem::create_directories(path("empty"));
  EXPECT_NE(cli("compare-init " + q(path("empty")) + " --gt " + q(path("g"))), 0);
}
