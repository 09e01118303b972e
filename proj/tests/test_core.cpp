#include <doctest.h>

#include "sggan/core.hpp"
#include "sggan/data.hpp"
#include "sggan/rng.hpp"

using namespace sggan;

TEST_CASE("to_unit_range endpoints and symmetry") {
  core::ImageTensor img = core::to_unit_range(2, 2, std::vector<int>{0, 255, 128, 127, 0, 255,
                                                                     1, 254, 64, 191, 32, 223});
  CHECK(img.data[0] == doctest::Approx(-1.0));
  CHECK(img.data[1] == doctest::Approx(1.0));
  // the map sends the midpoint 127.5 to 0: values equidistant from it are
  // symmetric
  CHECK(img.data[2] + img.data[3] == doctest::Approx(0.0));
  CHECK(img.data[6] + img.data[7] == doctest::Approx(0.0));
}

TEST_CASE("to_unit_range rejects out-of-range input") {
  CHECK_THROWS(core::to_unit_range(1, 1, std::vector<int>{0, 0, 256}));
  CHECK_THROWS(core::to_unit_range(1, 1, std::vector<int>{-1, 0, 0}));
  CHECK_THROWS(core::to_unit_range(2, 2, std::vector<int>{0, 0, 0}));  // size mismatch
}

TEST_CASE("to_unit_range is strictly monotone and round-trips exactly") {
  std::vector<int> all(256 * 3);
  for (int v = 0; v < 256; ++v)
    for (int c = 0; c < 3; ++c) all[static_cast<size_t>(v) * 3 + c] = v;
  core::ImageTensor img = core::to_unit_range(16, 16, all);
  for (int v = 1; v < 256; ++v)
    CHECK(img.data[static_cast<size_t>(v) * 3] > img.data[static_cast<size_t>(v - 1) * 3]);
  std::vector<uint8_t> back = core::from_unit_range(img);
  for (int v = 0; v < 256; ++v) CHECK(back[static_cast<size_t>(v) * 3] == v);
}

TEST_CASE("validate_sample accepts synthetic samples") {
  Rng rng(42);
  for (int i = 0; i < 20; ++i) {
    data::SynthFaceParams p = data::random_face_params(32, 3, rng);
    core::Sample s = data::synth_sample(p, rng);
    CHECK(core::validate_sample(s).empty());
  }
}

TEST_CASE("validate_sample reports named violations") {
  Rng rng(43);
  data::SynthFaceParams p = data::random_face_params(32, 3, rng);
  core::Sample good = data::synth_sample(p, rng);

  SUBCASE("segmentation pixel summing to zero") {
    core::Sample s = good;
    s.segmentation.kind = core::SegKind::Soft;
    for (int c = 0; c < s.segmentation.classes; ++c) s.segmentation.at(3, 3, c) = 0.0;
    auto v = core::validate_sample(s);
    REQUIRE(v.size() == 1);
    CHECK(v[0].find("channel-sum") != std::string::npos);
  }
  SUBCASE("one-hot pixel summing to zero breaks both invariants") {
    core::Sample s = good;
    for (int c = 0; c < s.segmentation.classes; ++c) s.segmentation.at(3, 3, c) = 0.0;
    auto v = core::validate_sample(s);
    bool has_sum = false;
    for (const auto& msg : v) has_sum |= msg.find("channel-sum") != std::string::npos;
    CHECK(has_sum);
  }
  SUBCASE("image value outside range") {
    core::Sample s = good;
    s.image.at(1, 1, 0) = 1.5;
    auto v = core::validate_sample(s);
    REQUIRE(v.size() == 1);
    CHECK(v[0].find("range") != std::string::npos);
  }
  SUBCASE("non-finite image value") {
    core::Sample s = good;
    s.image.at(1, 1, 0) = std::numeric_limits<double>::quiet_NaN();
    auto v = core::validate_sample(s);
    REQUIRE(v.size() == 1);
    CHECK(v[0].find("finite") != std::string::npos);
  }
  SUBCASE("dimensions not divisible by four") {
    core::Sample s;
    s.image = core::ImageTensor(30, 30);
    s.segmentation = core::SegmentationMap(30, 30, 2, core::SegKind::OneHot);
    for (int y = 0; y < 30; ++y)
      for (int x = 0; x < 30; ++x) s.segmentation.at(y, x, 0) = 1.0;
    s.attributes = core::AttributeVector(core::AttrKind::Binary, {1, 0});
    auto v = core::validate_sample(s);
    REQUIRE(v.size() == 1);
    CHECK(v[0].find("divisible by 4") != std::string::npos);
  }
  SUBCASE("binary attributes with fractional entry") {
    core::Sample s = good;
    s.attributes.values[0] = 0.5;
    auto v = core::validate_sample(s);
    REQUIRE(v.size() == 1);
    CHECK(v[0].find("binary") != std::string::npos);
  }
  SUBCASE("one-hot map with a soft pixel") {
    core::Sample s = good;
    s.segmentation.at(2, 2, 0) = 0.5;
    s.segmentation.at(2, 2, 1) = 0.5;
    for (int c = 2; c < s.segmentation.classes; ++c) s.segmentation.at(2, 2, c) = 0.0;
    auto v = core::validate_sample(s);
    REQUIRE(v.size() == 1);
    CHECK(v[0].find("one-hot") != std::string::npos);
  }
}
