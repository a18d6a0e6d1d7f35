#pragma once

#include "sac/image.hpp"
#include "sac/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

// Attention-driven dropping of inter-class-similar regions.
namespace sac::drop {

struct DropMask {
  std::vector<std::uint8_t> values;  // 0 = drop, 1 = keep
  std::size_t class_index = 0;
  double threshold = 0.0;
};

struct KeepMask {
  std::vector<std::uint8_t> values;

  std::size_t kept() const;
  bool keeps_all() const { return kept() == values.size(); }
};

enum class Combine { kOr, kAnd };
Combine parse_combine(std::string_view text);
std::string_view to_string(Combine mode);

// mask[i] = 0 iff column[i] > d_phi * global_max (equality keeps).
DropMask drop_mask(std::span<const double> column, double d_phi, double global_max, std::size_t class_index = 0);

// One mask per column of the f x k attention map, thresholded against the map's global maximum.
std::vector<DropMask> drop_masks(const Tensor& M, double d_phi);

// kOr: a cell survives if any class keeps it. kAnd: it survives only if every class keeps it.
KeepMask combine_masks(const std::vector<DropMask>& masks, Combine mode = Combine::kOr);

// F' = F with column i scaled by keep[i]. F is d_f x f. Also serves as the
// backward rule, since the mask is a constant.
Tensor apply_feature_drop(const Tensor& F, const KeepMask& keep);

// Zeroes every pixel whose nearest m x n grid cell is dropped.
Image image_level_erase(const Image& image, const KeepMask& keep, std::size_t m, std::size_t n);

}  // namespace sac::drop
