#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "sggan/rng.hpp"
#include "sggan/segmap.hpp"
#include "raster_oracle.hpp"

using namespace sggan;
using core::LandmarkSet;
using core::Point2d;
using segmap::FillRule;
using segmap::RegionSpec;
using segmap::RegionTable;


namespace {

LandmarkSet make_lm(std::initializer_list<Point2d> pts) {
  LandmarkSet lm;
  lm.points = pts;
  return lm;
}

}  // namespace

TEST_CASE("axis-aligned square covers exactly its pixel block") {
  LandmarkSet lm = make_lm({{2, 2}, {6, 2}, {6, 6}, {2, 6}});
  RegionTable t;
  t.n_s = 2;
  t.regions.push_back({"sq", 1, {0, 1, 2, 3}, FillRule::Polygon, 1});
  core::SegmentationMap m = segmap::rasterize(lm, t, 8, 8);
  int count1 = 0, count0 = 0;
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      if (m.at(y, x, 1) == 1.0) count1++;
      if (m.at(y, x, 0) == 1.0) count0++;
      bool expect = x >= 2 && x <= 5 && y >= 2 && y <= 5;
      CHECK(m.at(y, x, 1) == (expect ? 1.0 : 0.0));
    }
  CHECK(count1 == 16);
  CHECK(count0 == 48);
}

TEST_CASE("empty region list leaves everything background") {
  LandmarkSet lm;
  RegionTable t;
  t.n_s = 1;
  core::SegmentationMap m = segmap::rasterize(lm, t, 4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) CHECK(m.at(y, x, 0) == 1.0);
}

TEST_CASE("higher z-order paints over lower in the overlap") {
  LandmarkSet lm = make_lm({{0, 0}, {8, 0}, {8, 8}, {0, 8}, {3, 3}, {7, 3}, {7, 7}, {3, 7}});
  RegionTable t;
  t.n_s = 3;
  t.regions.push_back({"skin", 1, {0, 1, 2, 3}, FillRule::Polygon, 1});
  t.regions.push_back({"eye", 2, {4, 5, 6, 7}, FillRule::Polygon, 2});
  core::SegmentationMap m = segmap::rasterize(lm, t, 8, 8);
  CHECK(m.at(4, 4, 2) == 1.0);  // overlap -> eye
  CHECK(m.at(1, 1, 1) == 1.0);  // skin only
}

TEST_CASE("rasterize errors") {
  LandmarkSet lm = make_lm({{0, 0}, {4, 0}, {4, 4}});
  RegionTable t;
  t.n_s = 2;
  t.regions.push_back({"bad", 1, {0, 1, 9}, FillRule::Polygon, 0});
  CHECK_THROWS(segmap::rasterize(lm, t, 8, 8));
  RegionTable ok;
  ok.n_s = 2;
  ok.regions.push_back({"tri", 1, {0, 1, 2}, FillRule::Polygon, 0});
  CHECK_THROWS(segmap::rasterize(lm, ok, 0, 8));
  CHECK_THROWS(segmap::rasterize(lm, ok, 8, -1));
}

TEST_CASE("rasterize matches the independent oracle on random cases") {
  Rng rng(2024);
  for (int iter = 0; iter < 100; ++iter) {
    LandmarkSet lm;
    RegionTable table;
    raster_oracle::random_case(rng, 24, &lm, &table);
    core::SegmentationMap m = segmap::rasterize(lm, table, 24, 24);
    std::vector<int> got = segmap::one_hot_to_labels(m);
    std::vector<int> want = raster_oracle::rasterize_labels(lm, table, 24, 24);
    CHECK(got == want);
  }
}

TEST_CASE("rasterize output is strictly one-hot over random cases") {
  Rng rng(2025);
  for (int iter = 0; iter < 50; ++iter) {
    LandmarkSet lm;
    RegionTable table;
    raster_oracle::random_case(rng, 16, &lm, &table);
    core::SegmentationMap m = segmap::rasterize(lm, table, 16, 16);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        int ones = 0;
        for (int c = 0; c < m.classes; ++c) {
          CHECK((m.at(y, x, c) == 0.0 || m.at(y, x, c) == 1.0));
          if (m.at(y, x, c) == 1.0) ones++;
        }
        CHECK(ones == 1);
      }
  }
}

TEST_CASE("interpolate_landmarks endpoints and midpoint") {
  LandmarkSet a = make_lm({{10, 20}, {1, 1}});
  LandmarkSet b = make_lm({{30, 40}, {3, 5}});
  LandmarkSet at0 = segmap::interpolate_landmarks(a, b, 0.0);
  LandmarkSet at1 = segmap::interpolate_landmarks(a, b, 1.0);
  for (int i = 0; i < 2; ++i) {
    CHECK(at0.points[i].x == a.points[i].x);
    CHECK(at0.points[i].y == a.points[i].y);
    CHECK(at1.points[i].x == b.points[i].x);
    CHECK(at1.points[i].y == b.points[i].y);
  }
  LandmarkSet mid = segmap::interpolate_landmarks(a, b, 0.5);
  CHECK(mid.points[0].x == doctest::Approx(20));
  CHECK(mid.points[0].y == doctest::Approx(30));
  LandmarkSet c = make_lm({{1, 1}});
  CHECK_THROWS(segmap::interpolate_landmarks(a, c, 0.5));
}

TEST_CASE("interpolation is affine-symmetric") {
  Rng rng(7);
  for (int iter = 0; iter < 50; ++iter) {
    LandmarkSet a, b;
    int n = 1 + static_cast<int>(rng.randint(20));
    for (int i = 0; i < n; ++i) {
      a.points.push_back({rng.uniform(0, 64), rng.uniform(0, 64)});
      b.points.push_back({rng.uniform(0, 64), rng.uniform(0, 64)});
    }
    double t = rng.uniform01();
    LandmarkSet ab = segmap::interpolate_landmarks(a, b, t);
    LandmarkSet ba = segmap::interpolate_landmarks(b, a, 1.0 - t);
    for (int i = 0; i < n; ++i) {
      CHECK(std::fabs(ab.points[i].x - ba.points[i].x) < 1e-9);
      CHECK(std::fabs(ab.points[i].y - ba.points[i].y) < 1e-9);
    }
  }
}

TEST_CASE("morph_sequence hits the documented stages") {
  LandmarkSet a = make_lm({{2, 2}, {10, 2}, {10, 10}, {2, 10}});
  LandmarkSet b = make_lm({{4, 4}, {12, 4}, {12, 12}, {4, 12}});
  RegionTable t;
  t.n_s = 2;
  t.regions.push_back({"sq", 1, {0, 1, 2, 3}, FillRule::Polygon, 1});

  auto seq = segmap::morph_sequence(a, b, 4, t, 16, 16);
  REQUIRE(seq.size() == 4);
  for (int i = 0; i < 4; ++i) {
    double tt = i / 3.0;
    core::SegmentationMap direct =
        segmap::rasterize(segmap::interpolate_landmarks(a, b, tt), t, 16, 16);
    CHECK(seq[static_cast<size_t>(i)].data == direct.data);
  }

  auto two = segmap::morph_sequence(a, b, 2, t, 16, 16);
  REQUIRE(two.size() == 2);
  CHECK(two[0].data == segmap::rasterize(a, t, 16, 16).data);
  CHECK(two[1].data == segmap::rasterize(b, t, 16, 16).data);

  auto same = segmap::morph_sequence(a, a, 5, t, 16, 16);
  for (const auto& m : same) CHECK(m.data == same[0].data);

  CHECK_THROWS(segmap::morph_sequence(a, b, 1, t, 16, 16));
}

TEST_CASE("validate_landmarks against a 5-point reference") {
  // synthetic 68-point set on a grid
  LandmarkSet det;
  for (int i = 0; i < 68; ++i)
    det.points.push_back({10.0 + (i % 10), 20.0 + i / 10});

  auto mean_of = [&](int lo, int hi) {
    Point2d m{0, 0};
    for (int i = lo; i <= hi; ++i) {
      m.x += det.points[static_cast<size_t>(i)].x;
      m.y += det.points[static_cast<size_t>(i)].y;
    }
    m.x /= hi - lo + 1;
    m.y /= hi - lo + 1;
    return m;
  };
  LandmarkSet ref;
  ref.points = {mean_of(36, 41), mean_of(42, 47), det.points[30], det.points[48],
                det.points[54]};

  CHECK(segmap::validate_landmarks(det, ref, 0.5));

  LandmarkSet shifted = ref;
  for (auto& p : shifted.points) p.x += 10.0;  // mean distance exactly 10
  CHECK_FALSE(segmap::validate_landmarks(det, shifted, 5.0));
  CHECK(segmap::validate_landmarks(det, shifted, 20.0));

  LandmarkSet bad;
  bad.points = {{0, 0}, {1, 1}};
  CHECK_THROWS(segmap::validate_landmarks(det, bad, 5.0));
  LandmarkSet short_det;
  short_det.points.resize(10);
  CHECK_THROWS(segmap::validate_landmarks(short_det, ref, 5.0));
}

TEST_CASE("one_hot_to_labels argmax and tie-breaks") {
  core::SegmentationMap m(1, 3, 4, core::SegKind::Soft);
  // pixel 0: uniform -> class 0
  for (int c = 0; c < 4; ++c) m.at(0, 0, c) = 0.25;
  // pixel 1: max at class 3
  m.at(0, 1, 0) = 0.1;
  m.at(0, 1, 1) = 0.2;
  m.at(0, 1, 2) = 0.3;
  m.at(0, 1, 3) = 0.4;
  // pixel 2: tie between 1 and 2 -> lower index
  m.at(0, 2, 0) = 0.1;
  m.at(0, 2, 1) = 0.4;
  m.at(0, 2, 2) = 0.4;
  m.at(0, 2, 3) = 0.1;
  std::vector<int> labels = segmap::one_hot_to_labels(m);
  CHECK(labels == std::vector<int>{0, 3, 1});

  core::SegmentationMap onehot = segmap::labels_to_one_hot(labels, 1, 3, 4);
  CHECK(segmap::one_hot_to_labels(onehot) == labels);
}

TEST_CASE("region table serialization round-trips") {
  RegionTable t = RegionTable::default_face68();
  RegionTable back = RegionTable::parse(t.serialize());
  CHECK(back.n_s == t.n_s);
  REQUIRE(back.regions.size() == t.regions.size());
  for (size_t i = 0; i < t.regions.size(); ++i) {
    CHECK(back.regions[i].name == t.regions[i].name);
    CHECK(back.regions[i].class_index == t.regions[i].class_index);
    CHECK(back.regions[i].polygon == t.regions[i].polygon);
    CHECK(back.regions[i].fill_rule == t.regions[i].fill_rule);
    CHECK(back.regions[i].z_order == t.regions[i].z_order);
  }
  back.validate(68);

  CHECK_THROWS(RegionTable::parse("region x class 1\n"));
  CHECK_THROWS(RegionTable::parse("classes 3\nregion a class 1 fill wavy z 1 points 0 1 2\n"));

  RegionTable gap;
  gap.n_s = 3;
  gap.regions.push_back({"only2", 2, {0, 1, 2}, FillRule::Polygon, 0});
  CHECK_THROWS(gap.validate(10));  // class 1 uncovered
}

TEST_CASE("landmark file io round-trips") {
  std::string path = "/tmp/sggan_test_landmarks.txt";
  std::vector<std::pair<std::string, LandmarkSet>> records;
  records.emplace_back("a.png", make_lm({{1.25, 2.5}, {3.75, 4.0}}));
  records.emplace_back("b.png", make_lm({{0.5, 0.5}}));
  segmap::write_landmark_file(path, records);
  auto back = segmap::read_landmark_file(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].first == "a.png");
  CHECK(back[0].second.points[0].x == 1.25);
  CHECK(back[0].second.points[1].y == 4.0);
  CHECK(back[1].second.count() == 1);
  std::remove(path.c_str());
}
