#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sggan::imageio {

struct RawImage {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> rgb;  // h*w*3

  RawImage() = default;
  RawImage(int h, int w) : height(h), width(w), rgb(static_cast<size_t>(h) * w * 3, 0) {}
};

// PNG is the lossless interchange format; JPEG is accepted for ingest only.
RawImage read_png(const std::string& path);
void write_png(const std::string& path, const RawImage& img);  // atomic (tmp+rename)
RawImage read_jpeg(const std::string& path);
RawImage read_image(const std::string& path);  // dispatch on extension

// 8-bit single-channel PNG holding per-pixel class labels.
std::vector<int> read_label_png(const std::string& path, int* height, int* width);
void write_label_png(const std::string& path, const std::vector<int>& labels, int height,
                     int width);

}  // namespace sggan::imageio
