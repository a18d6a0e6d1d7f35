#pragma once

#include "sac/image.hpp"
#include "sac/tensor.hpp"

#include <cstddef>

// Region localization from the attention map: pool over classes, upsample,
// threshold at a fraction of the peak and take the bounding box.
namespace sac::loc {

// Inclusive pixel box; x indexes rows, y indexes columns.
struct CropBox {
  std::size_t x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  std::size_t rows() const { return x2 - x1 + 1; }
  std::size_t cols() const { return y2 - y1 + 1; }
  bool contains(std::size_t row, std::size_t col) const { return row >= x1 && row <= x2 && col >= y1 && col <= y2; }
  friend bool operator==(const CropBox&, const CropBox&) = default;
};

inline constexpr double kDefaultRatio = 0.1;

// grid[r][c] = sum_j M[r*n + c][j]
Tensor pool_correlation(const Tensor& M, std::size_t m, std::size_t n);

// Align-corners bilinear interpolation of an m x n grid to H x W.
Tensor bilinear_upsample(const Tensor& grid, std::size_t H, std::size_t W);

// Cells >= ratio * max survive, everything else becomes zero.
Tensor threshold_map(const Tensor& heatmap, double ratio = kDefaultRatio);

// Box spanning every cell with value >= ratio * max(heatmap).
CropBox threshold_bbox(const Tensor& heatmap, double ratio = kDefaultRatio);

// Align-corners bilinear resize of an RGB image.
Image resize_bilinear(const Image& image, std::size_t H, std::size_t W);

// Inclusive sub-image, resized back to out_h x out_w.
Image crop(const Image& image, const CropBox& box, std::size_t out_h, std::size_t out_w);

// Per-class maps at image resolution using nearest-cell replication, so each
// map's mass stays proportional to its attention column. Result: k x H x W.
Tensor class_heatmaps(const Tensor& M, std::size_t m, std::size_t n, std::size_t H, std::size_t W);

}  // namespace sac::loc
