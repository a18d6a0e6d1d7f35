#include "sac/dropping.hpp"

#include "sac/error.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace sac::drop {

std::size_t KeepMask::kept() const {
  return static_cast<std::size_t>(std::count(values.begin(), values.end(), std::uint8_t{1}));
}

Combine parse_combine(std::string_view text) {
  if (text == "or") return Combine::kOr;
  if (text == "and") return Combine::kAnd;
  fail(ErrorKind::kConfig, "combine must be 'or' or 'and', got '" + std::string(text) + "'");
}

std::string_view to_string(Combine mode) { return mode == Combine::kOr ? "or" : "and"; }

DropMask drop_mask(std::span<const double> column, double d_phi, double global_max, std::size_t class_index) {
  if (!(d_phi > 0.0 && d_phi < 1.0)) {
    fail(ErrorKind::kRange, "drop_mask: d_phi " + std::to_string(d_phi) + " outside (0, 1)");
  }
  DropMask mask;
  mask.class_index = class_index;
  mask.threshold = d_phi * global_max;
  mask.values.resize(column.size());
  for (std::size_t i = 0; i < column.size(); ++i) mask.values[i] = column[i] > mask.threshold ? 0 : 1;
  return mask;
}

std::vector<DropMask> drop_masks(const Tensor& M, double d_phi) {
  if (M.rank() != 2 || M.empty()) fail(ErrorKind::kShape, "drop_masks: attention map " + shape_string(M.shape()));
  const double global_max = *std::max_element(M.values().begin(), M.values().end());
  const std::size_t f = M.dim(0), k = M.dim(1);
  std::vector<DropMask> masks;
  std::vector<double> column(f);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < f; ++i) column[i] = M.at(i, c);
    masks.push_back(drop_mask(column, d_phi, global_max, c));
  }
  return masks;
}

KeepMask combine_masks(const std::vector<DropMask>& masks, Combine mode) {
  if (masks.empty()) fail(ErrorKind::kShape, "combine_masks: no masks");
  const std::size_t f = masks.front().values.size();
  KeepMask keep;
  keep.values.assign(f, mode == Combine::kOr ? 0 : 1);
  for (const auto& m : masks) {
    if (m.values.size() != f) {
      fail(ErrorKind::kShape, "combine_masks: mask of length " + std::to_string(m.values.size()) + " vs " +
                                  std::to_string(f));
    }
    for (std::size_t i = 0; i < f; ++i) {
      keep.values[i] = mode == Combine::kOr ? (keep.values[i] | m.values[i]) : (keep.values[i] & m.values[i]);
    }
  }
  return keep;
}

Tensor apply_feature_drop(const Tensor& F, const KeepMask& keep) {
  if (F.rank() != 2 || F.dim(1) != keep.values.size()) {
    fail(ErrorKind::kShape, "apply_feature_drop: F " + shape_string(F.shape()) + " vs mask of length " +
                                std::to_string(keep.values.size()));
  }
  Tensor out = F;
  const std::size_t f = F.dim(1);
  for (std::size_t a = 0; a < F.dim(0); ++a) {
    for (std::size_t i = 0; i < f; ++i) {
      if (!keep.values[i]) out[a * f + i] = 0.0;
    }
  }
  return out;
}

Image image_level_erase(const Image& image, const KeepMask& keep, std::size_t m, std::size_t n) {
  if (m == 0 || n == 0 || keep.values.size() != m * n || image.height < m || image.width < n) {
    fail(ErrorKind::kShape, "image_level_erase: grid " + std::to_string(m) + "x" + std::to_string(n) +
                                " with mask of length " + std::to_string(keep.values.size()) + " vs image " +
                                std::to_string(image.height) + "x" + std::to_string(image.width));
  }
  Image out = image;
  for (std::size_t r = 0; r < image.height; ++r) {
    const std::size_t gr = r * m / image.height;
    for (std::size_t x = 0; x < image.width; ++x) {
      const std::size_t gc = x * n / image.width;
      if (keep.values[gr * n + gc]) continue;
      for (std::size_t c = 0; c < kChannels; ++c) out.at(c, r, x) = 0.0;
    }
  }
  return out;
}

}  // namespace sac::drop
