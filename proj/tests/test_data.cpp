#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "sggan/core.hpp"
#include "sggan/data.hpp"

using namespace sggan;
namespace fs = std::filesystem;

#ifndef FIXTURE_DIR
#define FIXTURE_DIR "tests/fixtures"
#endif

namespace {

double label_agreement(const std::vector<uint8_t>& a, const std::vector<int>& b) {
  int same = 0;
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i] == b[i]) same++;
  return static_cast<double>(same) / static_cast<double>(a.size());
}

}  // namespace

TEST_CASE("synth_dataset is seed-deterministic") {
  data::SampleSet a = data::synth_dataset(20, 3, 32, 99);
  data::SampleSet b = data::synth_dataset(20, 3, 32, 99);
  data::SampleSet c = data::synth_dataset(20, 3, 32, 100);
  REQUIRE(a.size() == 20);
  bool same = true, differs = false;
  for (int i = 0; i < 20; ++i) {
    if (a.samples[i].image != b.samples[i].image) same = false;
    if (a.samples[i].image != c.samples[i].image) differs = true;
  }
  CHECK(same);
  CHECK(differs);
  CHECK(a.attr_names == std::vector<std::string>{"SkinTone", "RimTone", "BrightBg"});
}

TEST_CASE("synthetic samples satisfy every core invariant") {
  data::SampleSet set = data::synth_dataset(50, 3, 32, 5);
  for (const auto& p : set.samples) {
    core::Sample s = data::unpack(p, set.n_s);
    CHECK(core::validate_sample(s).empty());
  }
}

TEST_CASE("attribute bits stay near balance and kappa spans its range") {
  data::SampleSet set = data::synth_dataset(1000, 3, 32, 7);
  for (int k = 0; k < 3; ++k) {
    int ones = 0;
    for (const auto& p : set.samples) ones += p.attrs[static_cast<size_t>(k)];
    double freq = ones / 1000.0;
    CHECK(freq >= 0.45);
    CHECK(freq <= 0.55);
  }
  double kmin = 1, kmax = -1;
  for (const auto& p : set.samples) {
    kmin = std::min(kmin, p.kappa);
    kmax = std::max(kmax, p.kappa);
  }
  CHECK(kmin < -0.9);
  CHECK(kmax > 0.9);
}

TEST_CASE("analytic segmentation matches the rasterized landmarks on >= 98% of pixels") {
  Rng rng(11);
  segmap::RegionTable table = data::synth_region_table();
  double worst = 1.0;
  for (int iter = 0; iter < 25; ++iter) {
    data::SynthFaceParams p = data::random_face_params(32, 3, rng);
    std::vector<uint8_t> analytic = data::synth_labels(p);
    core::SegmentationMap raster =
        segmap::rasterize(data::synth_landmarks(p), table, 32, 32);
    double agree = label_agreement(analytic, segmap::one_hot_to_labels(raster));
    worst = std::min(worst, agree);
  }
  CHECK(worst >= 0.98);
}

TEST_CASE("kappa only moves mouth pixels") {
  Rng rng(12);
  data::SynthFaceParams p = data::random_face_params(32, 3, rng);
  p.noise_sigma = 0;
  data::SynthFaceParams p0 = p, p1 = p;
  p0.kappa = 0;
  p1.kappa = 1;
  Rng r0(55), r1(55);
  core::Sample s0 = data::synth_sample(p0, r0);
  core::Sample s1 = data::synth_sample(p1, r1);
  std::vector<uint8_t> l0 = data::synth_labels(p0);
  std::vector<uint8_t> l1 = data::synth_labels(p1);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      size_t q = static_cast<size_t>(y) * 32 + x;
      bool mouth_band = l0[q] == 4 || l1[q] == 4;
      for (int c = 0; c < 3; ++c) {
        if (!mouth_band)
          CHECK(s0.image.at(y, x, c) == s1.image.at(y, x, c));
      }
    }
}

TEST_CASE("zero-noise synthesis is bitwise reproducible") {
  Rng rng(13);
  data::SynthFaceParams p = data::random_face_params(32, 3, rng);
  p.noise_sigma = 0;
  Rng r1(77), r2(77);
  core::Sample a = data::synth_sample(p, r1);
  core::Sample b = data::synth_sample(p, r2);
  CHECK(a.image.data == b.image.data);
}

TEST_CASE("attribute table round-trips and normalizes -1/1") {
  std::string path = "/tmp/sggan_attr_test.csv";
  {
    std::ofstream f(path);
    f << "filename,Smiling,Young\n";
    f << "a.png,1,-1\n";
    f << "b.png,0,1\n";
  }
  data::AttributeTable t = data::read_attribute_table(path);
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0].second == std::vector<uint8_t>{1, 0});
  CHECK(t.rows[1].second == std::vector<uint8_t>{0, 1});

  data::write_attribute_table(path, t);
  data::AttributeTable t2 = data::read_attribute_table(path);
  CHECK(t2.names == t.names);
  CHECK(t2.rows == t.rows);

  {
    std::ofstream f(path);
    f << "filename,Smiling\n";
    f << "a.png,2\n";
  }
  CHECK_THROWS_WITH_AS(data::read_attribute_table(path), doctest::Contains(":2:"),
                       std::runtime_error);
  fs::remove(path);
}

TEST_CASE("png io round-trips and jpeg ingests") {
  imageio::RawImage png = imageio::read_png(std::string(FIXTURE_DIR) + "/gradient.png");
  CHECK(png.height == 24);
  CHECK(png.width == 20);
  std::string tmp = "/tmp/sggan_io_test.png";
  imageio::write_png(tmp, png);
  imageio::RawImage back = imageio::read_png(tmp);
  CHECK(back.rgb == png.rgb);
  fs::remove(tmp);

  imageio::RawImage jpg = imageio::read_jpeg(std::string(FIXTURE_DIR) + "/gradient.jpg");
  CHECK(jpg.height == 24);
  CHECK(jpg.width == 20);
  // lossy but close
  double err = 0;
  for (size_t i = 0; i < jpg.rgb.size(); ++i)
    err += std::fabs(static_cast<double>(jpg.rgb[i]) - png.rgb[i]);
  CHECK(err / static_cast<double>(jpg.rgb.size()) < 6.0);

  CHECK_THROWS(imageio::read_image("/tmp/nope.bmp"));
  CHECK_THROWS(imageio::read_png("/tmp/definitely_missing.png"));
}

TEST_CASE("manifest loading, split determinism and exclusion counting") {
  std::string root = "/tmp/sggan_manifest_test";
  fs::remove_all(root);
  fs::create_directories(root);

  // two valid images, one with a bad 68-point detection
  imageio::RawImage img(24, 20);
  for (size_t i = 0; i < img.rgb.size(); ++i) img.rgb[i] = static_cast<uint8_t>(i % 251);
  imageio::write_png(root + "/a.png", img);
  imageio::write_png(root + "/b.png", img);

  {
    std::ofstream f(root + "/attributes.csv");
    f << "filename,Smiling\n";
    f << "a.png,1\n";
    f << "b.png,0\n";
  }
  std::vector<std::pair<std::string, core::LandmarkSet>> lms;
  core::LandmarkSet good;
  for (int i = 0; i < 68; ++i) good.points.push_back({5.0 + (i % 10), 4.0 + i / 10});
  core::LandmarkSet bad = good;
  for (auto& p : bad.points) p.x += 50;  // far from the reference
  lms.emplace_back("a.png", good);
  lms.emplace_back("b.png", bad);
  segmap::write_landmark_file(root + "/landmarks.txt", lms);

  auto mean_of = [&](const core::LandmarkSet& lm, int lo, int hi) {
    core::Point2d m{0, 0};
    for (int i = lo; i <= hi; ++i) {
      m.x += lm.points[static_cast<size_t>(i)].x;
      m.y += lm.points[static_cast<size_t>(i)].y;
    }
    m.x /= hi - lo + 1;
    m.y /= hi - lo + 1;
    return m;
  };
  std::vector<std::pair<std::string, core::LandmarkSet>> refs;
  core::LandmarkSet ref_a;
  ref_a.points = {mean_of(good, 36, 41), mean_of(good, 42, 47), good.points[30],
                  good.points[48], good.points[54]};
  refs.emplace_back("a.png", ref_a);
  refs.emplace_back("b.png", ref_a);  // b's detection is 50px off this
  segmap::write_landmark_file(root + "/landmarks5.txt", refs);

  data::DatasetManifest m1 = data::load_manifest(root);
  CHECK(m1.excluded == 1);
  CHECK(m1.train.size() + m1.test.size() == 1);

  data::DatasetManifest m2 = data::load_manifest(root);
  CHECK(m2.train.size() == m1.train.size());
  CHECK(m2.excluded == m1.excluded);

  // missing attribute table reported by name
  fs::remove(root + "/attributes.csv");
  CHECK_THROWS_WITH_AS(data::load_manifest(root), doctest::Contains("attribute table"),
                       std::runtime_error);
  fs::remove_all(root);
}

TEST_CASE("prepare_sample crops, rescales landmarks and passes validation") {
  std::string root = "/tmp/sggan_prepare_test";
  fs::remove_all(root);
  fs::create_directories(root);

  // 64x64 synthetic-face PNG so the rasterization has sane geometry
  Rng rng(21);
  data::SynthFaceParams p = data::random_face_params(64, 3, rng);
  Rng noise(3);
  core::Sample src = data::synth_sample(p, noise);
  imageio::RawImage img(64, 64);
  img.rgb = core::from_unit_range(src.image);
  imageio::write_png(root + "/face.png", img);

  data::ManifestEntry entry;
  entry.image_file = "face.png";
  entry.landmarks = *src.landmarks;
  entry.attrs = {1, 0, 1};

  segmap::RegionTable table = data::synth_region_table();
  core::Sample half = data::prepare_sample(root, entry, 32, table);
  CHECK(half.image.height == 32);
  CHECK(core::validate_sample(half).empty());
  // square input: crop is the identity, coordinates exactly halved
  for (size_t i = 0; i < src.landmarks->points.size(); ++i) {
    CHECK(half.landmarks->points[i].x ==
          doctest::Approx(src.landmarks->points[i].x / 2).epsilon(1e-12));
    CHECK(half.landmarks->points[i].y ==
          doctest::Approx(src.landmarks->points[i].y / 2).epsilon(1e-12));
  }

  // same-size target: image passes through up to the 8-bit round trip
  core::Sample same = data::prepare_sample(root, entry, 64, table);
  for (size_t i = 0; i < same.image.data.size(); ++i)
    CHECK(std::fabs(same.image.data[i] - src.image.data[i]) < 1.0 / 127.5 + 1e-9);
  fs::remove_all(root);
}

TEST_CASE("label transform commutes with rasterization within 2%") {
  Rng rng(31);
  segmap::RegionTable table = data::synth_region_table();
  for (int iter = 0; iter < 10; ++iter) {
    data::SynthFaceParams p = data::random_face_params(128, 3, rng);
    core::LandmarkSet big = data::synth_landmarks(p);
    // transform: scale 128 -> 64 (crop is identity on squares)
    core::LandmarkSet small;
    for (const auto& q : big.points) small.points.push_back({q.x / 2, q.y / 2});

    std::vector<int> direct = segmap::one_hot_to_labels(segmap::rasterize(small, table, 64, 64));
    std::vector<int> big_labels =
        segmap::one_hot_to_labels(segmap::rasterize(big, table, 128, 128));
    // nearest-neighbour downsample of the big label image
    int mismatch = 0;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        int from = big_labels[static_cast<size_t>(y * 2) * 128 + x * 2];
        if (from != direct[static_cast<size_t>(y) * 64 + x]) mismatch++;
      }
    CHECK(mismatch <= 0.02 * 64 * 64);
  }
}
