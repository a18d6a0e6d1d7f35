#include "sac/localization.hpp"

#include "sac/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sac::loc {

Tensor pool_correlation(const Tensor& M, std::size_t m, std::size_t n) {
  if (M.rank() != 2 || M.dim(0) != m * n) {
    fail(ErrorKind::kShape, "pool_correlation: attention map " + shape_string(M.shape()) + " vs grid " +
                                std::to_string(m) + "x" + std::to_string(n));
  }
  Tensor grid({m, n});
  grid.vec() = M.mat().rowwise().sum();
  return grid;
}

namespace {

struct Tap {
  std::size_t lo, hi;
  double w;  // weight of hi
};

Tap source_tap(std::size_t out, std::size_t out_size, std::size_t in_size) {
  if (in_size == 1 || out_size == 1) return {0, 0, 0.0};
  const double pos = static_cast<double>(out) * static_cast<double>(in_size - 1) / static_cast<double>(out_size - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  lo = std::min(lo, in_size - 1);
  const std::size_t hi = std::min(lo + 1, in_size - 1);
  return {lo, hi, pos - static_cast<double>(lo)};
}

// Interpolates one plane (rows x cols, row-major) into out_rows x out_cols.
void resize_plane(const double* src, std::size_t rows, std::size_t cols, double* dst, std::size_t out_rows,
                  std::size_t out_cols) {
  std::vector<Tap> col_taps(out_cols);
  for (std::size_t c = 0; c < out_cols; ++c) col_taps[c] = source_tap(c, out_cols, cols);
  for (std::size_t r = 0; r < out_rows; ++r) {
    const Tap rt = source_tap(r, out_rows, rows);
    for (std::size_t c = 0; c < out_cols; ++c) {
      const Tap& ct = col_taps[c];
      const double top = src[rt.lo * cols + ct.lo] * (1.0 - ct.w) + src[rt.lo * cols + ct.hi] * ct.w;
      const double bot = src[rt.hi * cols + ct.lo] * (1.0 - ct.w) + src[rt.hi * cols + ct.hi] * ct.w;
      dst[r * out_cols + c] = top * (1.0 - rt.w) + bot * rt.w;
    }
  }
}

}  // namespace

Tensor bilinear_upsample(const Tensor& grid, std::size_t H, std::size_t W) {
  if (H < 1 || W < 1) fail(ErrorKind::kRange, "bilinear_upsample: target size must be positive");
  if (grid.rank() != 2 || grid.dim(0) < 1 || grid.dim(1) < 1) {
    fail(ErrorKind::kShape, "bilinear_upsample: grid " + shape_string(grid.shape()));
  }
  if (H < grid.dim(0) || W < grid.dim(1)) {
    fail(ErrorKind::kShape, "bilinear_upsample: target " + std::to_string(H) + "x" + std::to_string(W) +
                                " smaller than grid " + shape_string(grid.shape()));
  }
  Tensor out({H, W});
  resize_plane(grid.data(), grid.dim(0), grid.dim(1), out.data(), H, W);
  return out;
}

namespace {
double checked_peak(const Tensor& heatmap, double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0)) fail(ErrorKind::kRange, "threshold ratio " + std::to_string(ratio) + " outside (0, 1)");
  if (heatmap.rank() != 2 || heatmap.empty()) fail(ErrorKind::kShape, "heatmap " + shape_string(heatmap.shape()));
  const double peak = *std::max_element(heatmap.values().begin(), heatmap.values().end());
  if (!(peak > 0.0)) fail(ErrorKind::kNoRegion, "no activated region: heatmap has no positive value");
  return peak;
}
}  // namespace

Tensor threshold_map(const Tensor& heatmap, double ratio) {
  const double gamma_min = ratio * checked_peak(heatmap, ratio);
  Tensor out(heatmap.shape());
  for (std::size_t i = 0; i < heatmap.size(); ++i) out[i] = heatmap[i] >= gamma_min ? heatmap[i] : 0.0;
  return out;
}

CropBox threshold_bbox(const Tensor& heatmap, double ratio) {
  const double gamma_min = ratio * checked_peak(heatmap, ratio);
  const std::size_t rows = heatmap.dim(0), cols = heatmap.dim(1);
  CropBox box{std::numeric_limits<std::size_t>::max(), std::numeric_limits<std::size_t>::max(), 0, 0};
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (heatmap[r * cols + c] < gamma_min) continue;
      box.x1 = std::min(box.x1, r);
      box.y1 = std::min(box.y1, c);
      box.x2 = std::max(box.x2, r);
      box.y2 = std::max(box.y2, c);
    }
  }
  return box;
}

Image resize_bilinear(const Image& image, std::size_t H, std::size_t W) {
  if (H < 1 || W < 1) fail(ErrorKind::kRange, "resize_bilinear: target size must be positive");
  Image out(H, W);
  for (std::size_t c = 0; c < kChannels; ++c) {
    resize_plane(image.pixels.data() + c * image.height * image.width, image.height, image.width,
                 out.pixels.data() + c * H * W, H, W);
  }
  return out;
}

Image crop(const Image& image, const CropBox& box, std::size_t out_h, std::size_t out_w) {
  if (box.x1 > box.x2 || box.y1 > box.y2 || box.x2 >= image.height || box.y2 >= image.width) {
    fail(ErrorKind::kRange, "crop: box (" + std::to_string(box.x1) + "," + std::to_string(box.y1) + ")-(" +
                                std::to_string(box.x2) + "," + std::to_string(box.y2) + ") outside image " +
                                std::to_string(image.height) + "x" + std::to_string(image.width));
  }
  Image sub(box.rows(), box.cols());
  for (std::size_t c = 0; c < kChannels; ++c) {
    for (std::size_t r = 0; r < sub.height; ++r) {
      for (std::size_t x = 0; x < sub.width; ++x) sub.at(c, r, x) = image.at(c, box.x1 + r, box.y1 + x);
    }
  }
  if (sub.height == out_h && sub.width == out_w) return sub;
  return resize_bilinear(sub, out_h, out_w);
}

Tensor class_heatmaps(const Tensor& M, std::size_t m, std::size_t n, std::size_t H, std::size_t W) {
  if (M.rank() != 2 || M.dim(0) != m * n || H < m || W < n) {
    fail(ErrorKind::kShape, "class_heatmaps: attention map " + shape_string(M.shape()) + " vs grid " +
                                std::to_string(m) + "x" + std::to_string(n));
  }
  if (H % m != 0 || W % n != 0) {
    fail(ErrorKind::kShape, "class_heatmaps: image " + std::to_string(H) + "x" + std::to_string(W) +
                                " is not a whole multiple of the grid");
  }
  const std::size_t k = M.dim(1);
  Tensor maps({k, H, W});
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t r = 0; r < H; ++r) {
      for (std::size_t c = 0; c < W; ++c) {
        maps[(j * H + r) * W + c] = M.at((r * m / H) * n + c * n / W, j);
      }
    }
  }
  return maps;
}

}  // namespace sac::loc
