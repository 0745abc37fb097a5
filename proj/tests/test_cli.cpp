#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <doctest.h>

#include "auxseg/cli/cli.hpp"
#include "auxseg/cli/config.hpp"
#include "auxseg/io_util.hpp"
#include "auxseg/volumes/manifest.hpp"
#include "auxseg/volumes/volume_io.hpp"

using namespace auxseg;
using namespace auxseg::cli;
namespace fs = std::filesystem;

#ifndef AUXSEG_TEST_DATA
#error "AUXSEG_TEST_DATA must point at tests/data"
#endif

namespace {

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "auxseg");
  args.push_back("-q");
  return run(args);
}

struct TempDir {
  fs::path path;
  explicit TempDir(const char* name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Volume block(int x0, int x1, int y0, int y1, int z0, int z1) {
  const Extent3 e{10, 10, 10};
  std::vector<float> v(e.count(), 0.f);
  for (int k = z0; k < z1; ++k)
    for (int j = y0; j < y1; ++j)
      for (int i = x0; i < x1; ++i) v[e.index(i, j, k)] = 1.f;
  return Volume({e}, std::move(v), VolumeKind::label);
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

const char* kSmallConfig = R"(
[paths]
data = "data/manifest.json"
output = "run"

[phantom]
shape = [24, 24, 16]
root_radius_mm = 3.0
branch_levels = 2

[gen]
n_triplets = 2
n_pairs = 1
n_test = 2
format = "raw"

[train]
regime = "ynet"
epochs = 1
seed = 3

[patch]
size = [16, 16, 8]
stride = [8, 8, 8]

[net]
base_width = 4
levels = 2
groupnorm_groups = 2

[frangi]
scales_mm = [1.0, 2.0]
c = "auto"
)";

}  // namespace

TEST_CASE("run configuration parsing") {
  const RunConfig cfg = parse_run_config(kSmallConfig, "/base");
  CHECK(*cfg.data == fs::path("/base/data/manifest.json"));
  CHECK(cfg.train.regime == train::Regime::ynet);
  CHECK(cfg.train.patch.patch_size == Extent3{16, 16, 8});
  CHECK(cfg.train.net.base_width == 4);
  CHECK(cfg.phantom.shape == Extent3{24, 24, 16});
  CHECK(cfg.gen.format == VolumeFormat::raw_json);
  CHECK_FALSE(cfg.frangi.c.has_value());
  CHECK(cfg.frangi.scales_mm == std::vector<double>{1.0, 2.0});

  CHECK_THROWS_AS(parse_run_config("[train]\nepoch = 3\n", "."), ArgumentError);
  CHECK_THROWS_AS(parse_run_config("[trian]\nepochs = 3\n", "."), ArgumentError);
  CHECK_THROWS_AS(parse_run_config("[train]\nepochs = \"three\"\n", "."), ArgumentError);
  CHECK_THROWS_AS(parse_run_config("[train\n", "."), ArgumentError);
  CHECK_THROWS_AS(parse_run_config("[frangi]\nc = \"sometimes\"\n", "."), ArgumentError);
  CHECK(parse_run_config("[frangi]\nc = 0.25\n", ".").frangi.c == 0.25);
  try {
    parse_run_config("[net]\nwidth = 3\n", ".");
    FAIL("expected an error");
  } catch (const ArgumentError& e) {
    CHECK(std::string(e.what()).find("net.width") != std::string::npos);
  }
}

TEST_CASE("exit codes") {
  CHECK(run_cli({"--help"}) == 0);
  CHECK(run_cli({"no-such-command"}) == 1);
  CHECK(run_cli({"train", "--epochs"}) == 1);
  CHECK(run_cli({"predict", "--checkpoint", "/nonexistent.ckpt"}) == 1);
  CHECK(run_cli({"eval", "--gt", "a.nii.gz"}) == 1);
  CHECK(run_cli({"gen"}) == 1);
  TempDir dir("auxseg_test_cli_exit");
  CHECK(run_cli({"report", "--runs", dir.path.string()}) == 1);
  write_file_atomic(dir.path / "broken.nii", "nope");
  CHECK(run_cli({"eval", "--gt", (dir.path / "broken.nii").string(), "--pred", (dir.path / "broken.nii").string()}) ==
        2);
}

TEST_CASE("eval matches the golden output") {
  TempDir dir("auxseg_test_cli_eval");
  save_volume(block(2, 6, 2, 6, 2, 6), dir.path / "gt.nii.gz");
  save_volume(block(3, 7, 2, 6, 2, 6), dir.path / "pred.nii.gz");
  save_volume(block(0, 10, 0, 10, 0, 10), dir.path / "liver.nii.gz");
  REQUIRE(run_cli({"eval", "--gt", (dir.path / "gt.nii.gz").string(), "--pred", (dir.path / "pred.nii.gz").string(),
                   "--liver", (dir.path / "liver.nii.gz").string(), "--out", (dir.path / "out").string(),
                   "--model", "m"}) == 0);
  const fs::path golden = fs::path(AUXSEG_TEST_DATA) / "eval_golden";
  for (const char* f : {"metrics.csv", "aggregate.csv", "stratified.csv"}) {
    CHECK_MESSAGE(read_file(dir.path / "out" / f) == read_file(golden / f), f);
  }
  // Hand-counted: the 4^3 blocks overlap in 48 voxels, 16 on each side are unmatched.
  const auto rows = lines(read_file(dir.path / "out" / "metrics.csv"));
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].rfind("gt,0.75,0.6,", 0) == 0);
  CHECK(rows[1].find(",15.625,15.625,0,48,16,16,920,") != std::string::npos);
  // 20 of the 56 surface voxels of each block lie 1 mm from the other surface: 20/56.
  CHECK(rows[1].find(",0.357143,") != std::string::npos);
  CHECK(lines(read_file(dir.path / "out" / "bland_altman.csv")).size() == 1);
}

TEST_CASE("gen, train, predict, eval, baseline and report") {
  TempDir dir("auxseg_test_cli_pipeline");
  write_file_atomic(dir.path / "run.toml", kSmallConfig);
  const std::string config = (dir.path / "run.toml").string();
  REQUIRE(run_cli({"gen", "-c", config, "--out", (dir.path / "data").string()}) == 0);
  const DatasetManifest m = load_manifest(dir.path / "data" / "manifest.json");
  CHECK(m.records.size() == 5);
  CHECK(fs::exists(dir.path / "data" / "provenance.json"));

  REQUIRE(run_cli({"train", "-c", config}) == 0);
  const fs::path ckpt = dir.path / "run" / "final.ckpt";
  REQUIRE(fs::exists(ckpt));

  const fs::path pred = dir.path / "run" / "pred";
  REQUIRE(run_cli({"predict", "--checkpoint", ckpt.string(), "--data", (dir.path / "data" / "manifest.json").string(),
                   "--out", pred.string(), "--format", "raw"}) == 0);
  for (const ManifestRecord* r : m.with_role(SampleRole::test)) {
    CHECK(fs::exists(pred / (r->id + "_seg.raw")));
    CHECK(fs::exists(pred / (r->id + "_prob.raw")));
    CHECK(fs::exists(pred / (r->id + "_trans.raw")));
  }

  const fs::path eval_dir = dir.path / "run" / "eval";
  REQUIRE(run_cli({"eval", "-c", config, "--pred-dir", pred.string(), "--out", eval_dir.string(), "--workers",
                   "2"}) == 0);
  const auto metric_rows = lines(read_file(eval_dir / "metrics.csv"));
  CHECK(metric_rows.size() == 3);
  CHECK(lines(read_file(eval_dir / "bland_altman.csv")).size() == 2);
  CHECK(lines(read_file(eval_dir / "stratified.csv")).size() == 1 + 2 * 4 * 8);

  // Same metrics with a single worker.
  setenv("AUXSEG_DETERMINISTIC", "1", 1);
  REQUIRE(run_cli({"eval", "-c", config, "--pred-dir", pred.string(), "--out", (dir.path / "eval1").string(),
                   "--workers", "4"}) == 0);
  unsetenv("AUXSEG_DETERMINISTIC");
  CHECK(read_file(eval_dir / "metrics.csv") == read_file(dir.path / "eval1" / "metrics.csv"));

  const fs::path frangi = dir.path / "frangi";
  REQUIRE(run_cli({"baseline-frangi", "-c", config, "--out", frangi.string(), "--format", "raw",
                   "--save-vesselness"}) == 0);
  for (const ManifestRecord* r : m.with_role(SampleRole::test)) {
    CHECK(fs::exists(frangi / (r->id + "_seg.raw")));
    CHECK(fs::exists(frangi / (r->id + "_vesselness.raw")));
  }

  REQUIRE(run_cli({"report", "--runs", dir.path.string(), "--out", (dir.path / "report").string()}) == 0);
  for (const char* f : {"table2.csv", "table5.csv", "few_annotations.csv", "few_annotations.svg"}) {
    CHECK_MESSAGE(fs::exists(dir.path / "report" / f), f);
  }
  const auto table = lines(read_file(dir.path / "report" / "few_annotations.csv"));
  REQUIRE(table.size() >= 2);
  CHECK(table[0] == "model,n_annotated,runs,dice_mean,dice_sd");
  // The standalone eval1 directory has no run.json, so its annotation count is blank.
  CHECK(std::any_of(table.begin(), table.end(), [](const std::string& l) { return l.rfind("ynet,2,1,", 0) == 0; }));
  CHECK(std::any_of(table.begin(), table.end(), [](const std::string& l) { return l.rfind("model,,1,", 0) == 0; }));
}
