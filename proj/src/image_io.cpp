#include "sggan/image_io.hpp"

#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <memory>
#include <stdexcept>

#include <jpeglib.h>
#include <png.h>

namespace sggan::imageio {
namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

std::string lower_ext(const std::string& path) {
  auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return "";
  std::string e = path.substr(dot + 1);
  for (char& c : e) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return e;
}

void write_png_impl(const std::string& path, const uint8_t* data, int height, int width,
                    int channels) {
  std::string tmp = path + ".tmp";
  FilePtr f(std::fopen(tmp.c_str(), "wb"));
  if (!f) throw std::runtime_error("cannot open for write: " + tmp);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::remove(tmp.c_str());
    throw std::runtime_error("libpng write failed: " + path);
  }
  png_init_io(png, f.get());
  png_set_compression_level(png, 6);  // fixed settings keep outputs reproducible
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y)
    png_write_row(png, const_cast<png_bytep>(data + static_cast<size_t>(y) * width * channels));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  f.reset();

  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw std::runtime_error("cannot rename temporary file onto: " + path);
  }
}

std::vector<uint8_t> read_png_impl(const std::string& path, int* height, int* width,
                                   int want_channels) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw std::runtime_error("cannot open: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("libpng read failed: " + path);
  }
  png_init_io(png, f.get());
  png_read_info(png, info);

  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (want_channels == 3) {
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
      png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
  } else {
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
        color == PNG_COLOR_TYPE_PALETTE)
      png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    png_set_strip_alpha(png);
  }
  png_read_update_info(png, info);

  std::vector<uint8_t> out(static_cast<size_t>(h) * w * want_channels);
  for (png_uint_32 y = 0; y < h; ++y)
    png_read_row(png, out.data() + static_cast<size_t>(y) * w * want_channels, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  *height = static_cast<int>(h);
  *width = static_cast<int>(w);
  return out;
}

}  // namespace

RawImage read_png(const std::string& path) {
  RawImage img;
  img.rgb = read_png_impl(path, &img.height, &img.width, 3);
  return img;
}

void write_png(const std::string& path, const RawImage& img) {
  if (img.rgb.size() != static_cast<size_t>(img.height) * img.width * 3)
    throw std::invalid_argument("write_png: buffer size mismatch");
  write_png_impl(path, img.rgb.data(), img.height, img.width, 3);
}

namespace {
struct JpegErr {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
};
}  // namespace

RawImage read_jpeg(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw std::runtime_error("cannot open: " + path);

  jpeg_decompress_struct cinfo;
  JpegErr err;
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = [](j_common_ptr ci) {
    std::longjmp(reinterpret_cast<JpegErr*>(ci->err)->jump, 1);
  };
  jpeg_create_decompress(&cinfo);
  RawImage img;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw std::runtime_error("libjpeg: cannot decode " + path);
  }
  jpeg_stdio_src(&cinfo, f.get());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  img = RawImage(static_cast<int>(cinfo.output_height), static_cast<int>(cinfo.output_width));
  while (cinfo.output_scanline < cinfo.output_height) {
    uint8_t* row = img.rgb.data() + static_cast<size_t>(cinfo.output_scanline) * img.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return img;
}

RawImage read_image(const std::string& path) {
  std::string e = lower_ext(path);
  if (e == "png") return read_png(path);
  if (e == "jpg" || e == "jpeg") return read_jpeg(path);
  throw std::runtime_error("unsupported image extension: " + path);
}

std::vector<int> read_label_png(const std::string& path, int* height, int* width) {
  std::vector<uint8_t> gray = read_png_impl(path, height, width, 1);
  return std::vector<int>(gray.begin(), gray.end());
}

void write_label_png(const std::string& path, const std::vector<int>& labels, int height,
                     int width) {
  if (labels.size() != static_cast<size_t>(height) * width)
    throw std::invalid_argument("write_label_png: size mismatch");
  std::vector<uint8_t> gray(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] > 255)
      throw std::invalid_argument("write_label_png: label outside uint8 range");
    gray[i] = static_cast<uint8_t>(labels[i]);
  }
  write_png_impl(path, gray.data(), height, width, 1);
}

}  // namespace sggan::imageio
