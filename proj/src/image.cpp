#include "sac/image.hpp"

#include "sac/error.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

namespace sac {

void validate_image(const Image& image, std::size_t min_side) {
  if (image.height < min_side || image.width < min_side) {
    fail(ErrorKind::kShape, "image " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                                " is smaller than the minimum " + std::to_string(min_side) + "x" +
                                std::to_string(min_side));
  }
  if (image.pixels.shape() != Shape{kChannels, image.height, image.width}) {
    fail(ErrorKind::kShape, "image pixel tensor " + shape_string(image.pixels.shape()) +
                                " does not match declared size");
  }
  for (double v : image.pixels.values()) {
    if (!(v >= 0.0 && v <= 1.0)) fail(ErrorKind::kRange, "image value outside [0, 1]");
  }
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void write_rows(const std::filesystem::path& path, std::size_t height, std::size_t width, int color_type,
                const std::vector<std::uint8_t>& bytes) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::kIo, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::kIo, "failed to encode " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = bytes.size() / height;
  for (std::size_t r = 0; r < height; ++r) {
    png_write_row(png, const_cast<png_bytep>(bytes.data() + r * stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

Image read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) fail(ErrorKind::kIo, "cannot open image " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::kIo, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::kIo, "failed to decode " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);
  const std::size_t width = png_get_image_width(png, info);
  const std::size_t height = png_get_image_height(png, info);
  const std::size_t channels = png_get_channels(png, info);
  std::vector<std::uint8_t> row(png_get_rowbytes(png, info));
  Image image(height, width);
  for (std::size_t r = 0; r < height; ++r) {
    png_read_row(png, row.data(), nullptr);
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < kChannels; ++c) {
        const std::size_t src = channels >= 3 ? c : 0;
        image.at(c, r, x) = row[x * channels + src] / 255.0;
      }
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  std::vector<std::uint8_t> bytes(image.height * image.width * kChannels);
  for (std::size_t r = 0; r < image.height; ++r) {
    for (std::size_t x = 0; x < image.width; ++x) {
      for (std::size_t c = 0; c < kChannels; ++c) {
        bytes[(r * image.width + x) * kChannels + c] = to_byte(image.at(c, r, x));
      }
    }
  }
  write_rows(path, image.height, image.width, PNG_COLOR_TYPE_RGB, bytes);
}

void write_gray_png(const std::filesystem::path& path, const Tensor& map) {
  if (map.rank() != 2) fail(ErrorKind::kShape, "grayscale map must be 2-D, got " + shape_string(map.shape()));
  const auto [lo, hi] = std::minmax_element(map.values().begin(), map.values().end());
  const double range = *hi - *lo;
  std::vector<std::uint8_t> bytes(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) {
    bytes[i] = to_byte(range > 0.0 ? (map[i] - *lo) / range : 0.0);
  }
  write_rows(path, map.dim(0), map.dim(1), PNG_COLOR_TYPE_GRAY, bytes);
}

}  // namespace sac
