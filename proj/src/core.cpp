#include "sggan/core.hpp"

#include <cmath>
#include <stdexcept>

namespace sggan::core {
namespace {

const double kSumTol = 1e-5;

void check_raw_size(int height, int width, size_t n) {
  if (height <= 0 || width <= 0)
    throw std::invalid_argument("to_unit_range: non-positive dimensions");
  if (n != static_cast<size_t>(height) * width * 3)
    throw std::invalid_argument("to_unit_range: buffer size does not match h*w*3");
}

}  // namespace

std::vector<std::string> validate_sample(const Sample& s) {
  std::vector<std::string> v;
  const ImageTensor& img = s.image;

  if (img.height <= 0 || img.width <= 0 ||
      img.data.size() != static_cast<size_t>(img.height) * img.width * 3) {
    v.push_back("image: dimensions inconsistent with data size");
    return v;
  }
  if (img.height % 4 != 0 || img.width % 4 != 0)
    v.push_back("image: height and width must each be divisible by 4");

  bool range_ok = true, finite_ok = true;
  for (double x : img.data) {
    if (!std::isfinite(x)) finite_ok = false;
    else if (x < -1.0 || x > 1.0) range_ok = false;
  }
  if (!finite_ok) v.push_back("image: contains non-finite values");
  if (!range_ok) v.push_back("image: values outside range [-1, 1]");

  const SegmentationMap& seg = s.segmentation;
  if (seg.height != img.height || seg.width != img.width)
    v.push_back("segmentation: height/width differ from image");
  if (seg.classes <= 0 ||
      seg.data.size() != static_cast<size_t>(seg.height) * seg.width * seg.classes) {
    v.push_back("segmentation: dimensions inconsistent with data size");
    return v;
  }
  bool sum_ok = true, onehot_ok = true, seg_range_ok = true;
  for (int y = 0; y < seg.height; ++y)
    for (int x = 0; x < seg.width; ++x) {
      double sum = 0;
      int ones = 0;
      for (int c = 0; c < seg.classes; ++c) {
        double p = seg.at(y, x, c);
        if (!(p >= 0.0 && p <= 1.0)) seg_range_ok = false;
        sum += p;
        if (p == 1.0) ones++;
        else if (p != 0.0 && seg.kind == SegKind::OneHot) onehot_ok = false;
      }
      if (std::fabs(sum - 1.0) > kSumTol) sum_ok = false;
      if (seg.kind == SegKind::OneHot && ones != 1) onehot_ok = false;
    }
  if (!seg_range_ok) v.push_back("segmentation: values outside [0, 1]");
  if (!sum_ok) v.push_back("segmentation: per-pixel channel-sum differs from 1 beyond 1e-5");
  if (seg.kind == SegKind::OneHot && !onehot_ok)
    v.push_back("segmentation: kind one-hot but some pixel is not exactly one-hot");

  const AttributeVector& a = s.attributes;
  for (double b : a.values) {
    if (!std::isfinite(b) || b < 0.0 || b > 1.0) {
      v.push_back("attributes: values outside [0, 1]");
      break;
    }
  }
  if (a.kind == AttrKind::Binary) {
    for (double b : a.values)
      if (b != 0.0 && b != 1.0) {
        v.push_back("attributes: kind binary but entries not in {0, 1}");
        break;
      }
  }

  if (s.landmarks) {
    for (const Point2d& p : s.landmarks->points)
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
        v.push_back("landmarks: non-finite coordinates");
        break;
      }
  }
  return v;
}

ImageTensor to_unit_range(int height, int width, const std::vector<int>& raw) {
  check_raw_size(height, width, raw.size());
  ImageTensor img(height, width);
  for (size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] < 0 || raw[i] > 255)
      throw std::invalid_argument("to_unit_range: value " + std::to_string(raw[i]) +
                                  " outside [0, 255]");
    img.data[i] = raw[i] / 127.5 - 1.0;
  }
  return img;
}

ImageTensor to_unit_range(int height, int width, const std::vector<uint8_t>& raw) {
  check_raw_size(height, width, raw.size());
  ImageTensor img(height, width);
  for (size_t i = 0; i < raw.size(); ++i) img.data[i] = raw[i] / 127.5 - 1.0;
  return img;
}

std::vector<uint8_t> from_unit_range(const ImageTensor& img) {
  std::vector<uint8_t> out(img.data.size());
  for (size_t i = 0; i < img.data.size(); ++i) {
    double v = (img.data[i] + 1.0) * 127.5;
    double r = std::nearbyint(v);
    if (r < 0) r = 0;
    if (r > 255) r = 255;
    out[i] = static_cast<uint8_t>(r);
  }
  return out;
}

}  // namespace sggan::core
