#pragma once

#include "sac/tensor.hpp"

#include <cstddef>
#include <filesystem>

namespace sac {

inline constexpr std::size_t kChannels = 3;

// RGB image stored channel-major (3 x H x W), values in [0, 1].
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  Tensor pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w, double fill = 0.0)
      : height(h), width(w), pixels({kChannels, h, w}, fill) {}

  double& at(std::size_t c, std::size_t r, std::size_t x) { return pixels[(c * height + r) * width + x]; }
  double at(std::size_t c, std::size_t r, std::size_t x) const { return pixels[(c * height + r) * width + x]; }

  friend bool operator==(const Image& a, const Image& b) = default;
};

// Throws unless the image is at least min_side on each side with values in [0, 1].
void validate_image(const Image& image, std::size_t min_side = 16);

// 8-bit PNG I/O. Grayscale PNGs are expanded to three equal channels.
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);
// Writes an H x W map as 8-bit grayscale after per-image min-max scaling.
void write_gray_png(const std::filesystem::path& path, const Tensor& map);

}  // namespace sac
