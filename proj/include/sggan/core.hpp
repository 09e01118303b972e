#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sggan::core {

// All core types are immutable-by-convention value types in channel-last
// (H x W x C) layout, which is the interchange convention at module
// boundaries. Pixel coordinates: origin top-left, x right, y down, pixel
// centers at half-integers.

struct ImageTensor {
  int height = 0;
  int width = 0;
  std::vector<double> data;  // h*w*3, values in [-1, 1]

  ImageTensor() = default;
  ImageTensor(int h, int w) : height(h), width(w), data(static_cast<size_t>(h) * w * 3, 0.0) {}

  double at(int y, int x, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
  double& at(int y, int x, int c) {
    return data[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
};

enum class SegKind { OneHot, Soft };

struct SegmentationMap {
  int height = 0;
  int width = 0;
  int classes = 0;
  SegKind kind = SegKind::OneHot;
  std::vector<double> data;  // h*w*classes

  SegmentationMap() = default;
  SegmentationMap(int h, int w, int n_s, SegKind k)
      : height(h), width(w), classes(n_s), kind(k),
        data(static_cast<size_t>(h) * w * n_s, 0.0) {}

  double at(int y, int x, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * classes + c];
  }
  double& at(int y, int x, int c) {
    return data[(static_cast<size_t>(y) * width + x) * classes + c];
  }
};

enum class AttrKind { Binary, Probability };

struct AttributeVector {
  AttrKind kind = AttrKind::Binary;
  std::vector<double> values;

  AttributeVector() = default;
  AttributeVector(AttrKind k, std::vector<double> v) : kind(k), values(std::move(v)) {}
  int size() const { return static_cast<int>(values.size()); }
};

struct Point2d {
  double x = 0;
  double y = 0;
};

struct LandmarkSet {
  std::vector<Point2d> points;
  int count() const { return static_cast<int>(points.size()); }
};

struct Sample {
  ImageTensor image;
  SegmentationMap segmentation;  // one-hot
  AttributeVector attributes;    // binary
  std::optional<LandmarkSet> landmarks;
};

// Empty result iff every invariant holds; each violation names the field
// and the failed invariant.
std::vector<std::string> validate_sample(const Sample& s);

// v -> v/127.5 - 1. Rejects values outside [0, 255].
ImageTensor to_unit_range(int height, int width, const std::vector<int>& raw);
ImageTensor to_unit_range(int height, int width, const std::vector<uint8_t>& raw);

// Inverse with clamped rounding; reproduces any 0-255 input exactly.
std::vector<uint8_t> from_unit_range(const ImageTensor& img);

}  // namespace sggan::core
