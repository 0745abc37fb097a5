#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include <doctest.h>

#include "json.hpp"

#include "auxseg/io_util.hpp"
#include "auxseg/volumes/manifest.hpp"
#include "auxseg/volumes/preprocess.hpp"
#include "auxseg/volumes/volume_io.hpp"

using namespace auxseg;
namespace fs = std::filesystem;

namespace {

Volume random_volume(const Extent3& e, VolumeKind kind, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<float> n(3.0f, 2.0f);
  std::vector<float> v(e.count());
  for (float& x : v) x = kind == VolumeKind::label ? static_cast<float>(rng() % 2) : n(rng);
  return Volume({e, {0.8, 0.8, 2.5}, {-10.0, 4.5, 7.0}}, std::move(v), kind);
}

// Minimal uncompressed NIfTI-1 writer for 4D float32 data, written field by
// field so the reader is checked against an independent encoder.
void write_nifti4d(const fs::path& path, const Extent3& e, int channels, const std::vector<float>& values) {
  std::string h(352, '\0');
  auto put = [&](std::size_t off, auto v) { std::memcpy(h.data() + off, &v, sizeof v); };
  put(0, std::int32_t{348});
  const std::int16_t dims[8] = {4, static_cast<std::int16_t>(e.x), static_cast<std::int16_t>(e.y),
                                static_cast<std::int16_t>(e.z), static_cast<std::int16_t>(channels), 1, 1, 1};
  for (int i = 0; i < 8; ++i) put(40 + 2 * i, dims[i]);
  put(70, std::int16_t{16});  // float32
  put(72, std::int16_t{32});
  const float pixdim[8] = {1.f, 1.5f, 1.5f, 3.f, 1.f, 1.f, 1.f, 1.f};
  for (int i = 0; i < 8; ++i) put(76 + 4 * i, pixdim[i]);
  put(108, 352.f);
  put(112, 0.f);  // scl_slope 0 means unscaled
  put(254, std::int16_t{0});
  put(344, 'n');
  put(345, '+');
  put(346, '1');
  std::string bytes = h;
  bytes.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(float));
  write_file_atomic(path, bytes);
}

bool bit_equal(const Volume& a, const Volume& b) {
  return a.extent() == b.extent() && std::equal(a.values().begin(), a.values().end(), b.values().begin());
}

struct TempDir {
  fs::path path;
  explicit TempDir(const char* name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("volume invariants") {
  const Geometry g{{2, 2, 1}};
  CHECK_THROWS_AS(Volume(g, {0, 1, 2, 0}, VolumeKind::label), ArgumentError);
  CHECK_THROWS_AS(Volume(g, {0, 1.5f, 0, 0}, VolumeKind::probability), ArgumentError);
  CHECK_THROWS_AS(Volume(g, {0, 1, 0}, VolumeKind::intensity), ArgumentError);
  const Volume v(g, {0.2f, 0.7f, 0.5f, 0.9f}, VolumeKind::probability);
  const Volume b = binarize(v);
  CHECK(b.kind() == VolumeKind::label);
  CHECK(b.count_nonzero() == 3);
  CHECK(same_grid(v.geometry(), b.geometry()));
  CHECK_FALSE(same_grid(v.geometry(), Geometry{{2, 2, 1}, {1.0, 1.0, 1.1}}));
  Sample s;
  s.source = random_volume({4, 4, 4}, VolumeKind::intensity, 1);
  s.label = random_volume({4, 4, 3}, VolumeKind::label, 2);
  CHECK_THROWS_AS(s.validate(), ArgumentError);
}

TEST_CASE("volume round trips") {
  TempDir dir("auxseg_test_volumes");
  const Volume image = random_volume({7, 5, 3}, VolumeKind::intensity, 3);
  const Volume mask = random_volume({7, 5, 3}, VolumeKind::label, 4);
  for (const char* name : {"a.nii.gz", "a.nii", "a.raw"}) {
    CAPTURE(name);
    save_volume(image, dir.path / name);
    const Volume back = load_volume(dir.path / name);
    CHECK(bit_equal(image, back));
    for (int a = 0; a < 3; ++a) {
      CHECK(back.spacing()[a] == doctest::Approx(image.spacing()[a]));
      CHECK(back.origin()[a] == doctest::Approx(image.origin()[a]));
    }
    save_volume(mask, dir.path / (std::string("m_") + name));
    const Volume m = load_volume(dir.path / (std::string("m_") + name), VolumeKind::label);
    CHECK(m.kind() == VolumeKind::label);
    CHECK(bit_equal(mask, m));
  }
  CHECK(load_volume(dir.path / "m_a.raw").kind() == VolumeKind::label);
  CHECK(fs::exists(raw_sidecar_path(dir.path / "a.raw")));
  CHECK(raw_data_path(dir.path / "a.json") == dir.path / "a.raw");
}

TEST_CASE("corrupt and unknown files") {
  TempDir dir("auxseg_test_volumes_bad");
  CHECK_THROWS_AS(detect_format("x.mha"), FormatError);
  const Volume image = random_volume({6, 6, 6}, VolumeKind::intensity, 5);
  save_volume(image, dir.path / "a.nii");
  const std::string bytes = read_file(dir.path / "a.nii");
  write_file_atomic(dir.path / "t.nii", std::string_view(bytes).substr(0, bytes.size() - 100));
  CHECK_THROWS_AS(load_volume(dir.path / "t.nii"), FormatError);
  write_file_atomic(dir.path / "g.nii.gz", "not gzip at all");
  CHECK_THROWS_AS(load_volume(dir.path / "g.nii.gz"), FormatError);
  save_volume(image, dir.path / "b.raw");
  write_file_atomic(dir.path / "b.raw", read_file(dir.path / "b.raw").substr(4));
  CHECK_THROWS_AS(load_volume(dir.path / "b.raw"), FormatError);
  CHECK_THROWS_AS(load_volume(dir.path / "missing.nii"), Error);
}

TEST_CASE("z-score normalization") {
  const Volume v = random_volume({9, 8, 7}, VolumeKind::intensity, 6);
  const Volume z = zscore_normalize(v);
  double s = 0, s2 = 0;
  for (float x : z.values()) {
    s += x;
    s2 += static_cast<double>(x) * x;
  }
  const double n = static_cast<double>(z.size());
  CHECK(std::abs(s / n) < 1e-5);
  CHECK(s2 / n == doctest::Approx(1.0).epsilon(1e-4));
  const Volume c({{3, 3, 3}}, std::vector<float>(27, 4.2f), VolumeKind::intensity);
  CHECK(zscore_normalize(c).count_nonzero() == 0);
}

TEST_CASE("resampling") {
  const Volume v = random_volume({8, 6, 4}, VolumeKind::intensity, 7);
  const Volume same = resample(v, v.extent());
  CHECK(bit_equal(v, same));
  const Volume up = resample(v, {16, 12, 8});
  CHECK(up.spacing()[0] == doctest::Approx(0.4));
  CHECK(up.spacing()[2] == doctest::Approx(1.25));
  const Volume mask = random_volume({8, 6, 4}, VolumeKind::label, 8);
  const Volume mu = resample(mask, {16, 12, 8});
  CHECK(mu.kind() == VolumeKind::label);
  CHECK(mu.count_nonzero() == 8 * mask.count_nonzero());
}

TEST_CASE("manifests") {
  TempDir dir("auxseg_test_manifest");
  const Volume image = random_volume({4, 4, 4}, VolumeKind::intensity, 9);
  const Volume mask = random_volume({4, 4, 4}, VolumeKind::label, 10);
  save_volume(image, dir.path / "img.nii.gz");
  save_volume(mask, dir.path / "lab.nii.gz");

  DatasetManifest m;
  m.root = dir.path;
  m.records.push_back({"c0", SampleRole::triplet, dir.path / "img.nii.gz", dir.path / "img.nii.gz",
                       dir.path / "lab.nii.gz", std::nullopt, 7});
  m.records.push_back({"c1", SampleRole::pair, dir.path / "img.nii.gz", dir.path / "img.nii.gz", std::nullopt,
                       std::nullopt, std::nullopt});
  save_manifest(m, dir.path / "manifest.json");
  const auto j = nlohmann::json::parse(read_file(dir.path / "manifest.json"));
  CHECK(j["records"][0]["source"] == "img.nii.gz");

  const DatasetManifest back = load_manifest(dir.path / "manifest.json");
  REQUIRE(back.records.size() == 2);
  CHECK(back.find("c1").role == SampleRole::pair);
  CHECK(back.records[0].source == dir.path / "img.nii.gz");
  const Sample s = load_sample(back.records[0]);
  CHECK(s.is_triplet());
  CHECK(bit_equal(*s.label, mask));
  CHECK(load_sample(back.records[1]).is_pair());
  CHECK_THROWS_AS(back.find("nope"), ArgumentError);

  auto write_bad = [&](nlohmann::json records) {
    write_file_atomic(dir.path / "bad.json", nlohmann::json{{"records", records}}.dump());
    return dir.path / "bad.json";
  };
  CHECK_THROWS_AS(load_manifest(write_bad(nlohmann::json::array({j["records"][0], j["records"][0]}))), FormatError);
  auto missing = j["records"][0];
  missing["source"] = "gone.nii.gz";
  CHECK_THROWS(load_manifest(write_bad(nlohmann::json::array({missing}))));
  auto pair_without_aux = j["records"][1];
  pair_without_aux.erase("auxiliary");
  CHECK_THROWS(load_manifest(write_bad(nlohmann::json::array({pair_without_aux}))));
  CHECK(load_manifest(write_bad(nlohmann::json::array())).records.empty());
}

TEST_CASE("decathlon ingestion") {
  TempDir dir("auxseg_test_decathlon");
  const fs::path task = dir.path / "Task";
  fs::create_directories(task / "imagesTr");
  fs::create_directories(task / "labelsTr");
  const Extent3 e{6, 5, 4};
  nlohmann::json training = nlohmann::json::array();
  for (int c = 0; c < 5; ++c) {
    std::vector<float> img(2 * e.count()), lab(e.count());
    for (std::size_t i = 0; i < e.count(); ++i) {
      const int v = c * 1000 + static_cast<int>(i);
      img[i] = static_cast<float>(v);                  // channel 0
      img[e.count() + i] = static_cast<float>(-v);     // channel 1
      lab[i] = static_cast<float>(i % 4);
    }
    const std::string name = "case_" + std::to_string(c) + ".nii";
    write_nifti4d(task / "imagesTr" / name, e, 2, img);
    write_nifti4d(task / "labelsTr" / name, e, 1, lab);
    training.push_back({{"image", "./imagesTr/" + name}, {"label", "./labelsTr/" + name}});
  }
  const nlohmann::json doc = {{"modality", {{"0", "T2w"}, {"1", "T1gd"}}},
                              {"labels", {{"0", "bg"}, {"1", "a"}, {"2", "b"}, {"3", "c"}}},
                              {"training", training}};
  write_file_atomic(task / "dataset.json", doc.dump());

  DecathlonOptions opt;
  opt.n_triplets = 2;
  opt.n_pairs = 2;
  const DatasetManifest m = ingest_decathlon(task, dir.path / "out", opt);
  REQUIRE(m.records.size() == 5);
  CHECK(m.with_role(SampleRole::triplet).size() == 2);
  CHECK(m.with_role(SampleRole::pair).size() == 2);
  CHECK(m.with_role(SampleRole::test).size() == 1);

  const Sample t = load_sample(*m.with_role(SampleRole::triplet)[0]);
  CHECK(t.source.spacing()[2] == doctest::Approx(3.0));
  CHECK(t.source[7] == -(*t.auxiliary)[7]);
  CHECK(t.source[7] >= 0.f);
  // Labels 2 and 3 are vessel: i % 4 in {2, 3}.
  for (std::size_t i = 0; i < e.count(); ++i) CHECK((*t.label)[i] == (i % 4 >= 2 ? 1.f : 0.f));
  CHECK_FALSE(load_sample(*m.with_role(SampleRole::pair)[0]).label.has_value());
  CHECK_FALSE(load_sample(*m.with_role(SampleRole::test)[0]).auxiliary.has_value());

  opt.label_ids = {7};
  CHECK_THROWS_AS(ingest_decathlon(task, dir.path / "bad", opt), ArgumentError);
  opt.label_ids = {2};
  opt.source_channel = "flair";
  CHECK_THROWS_AS(ingest_decathlon(task, dir.path / "bad", opt), ArgumentError);
  opt.source_channel = "0";
  CHECK(ingest_decathlon(task, dir.path / "idx", opt).records.size() == 5);
}
