#pragma once

#include "sac/image.hpp"
#include "sac/params.hpp"
#include "sac/tensor.hpp"

#include <cstddef>
#include <vector>

// Reference convolutional backbone and top-k coarse class search.
namespace sac::backbone {

struct Config {
  std::vector<std::size_t> widths{16, 32, 48, 64};
  // Leading blocks that end in a 2x2 average pool; later blocks keep resolution.
  std::size_t pooled_blocks = 3;
  std::size_t d_v = 128;

  std::size_t d_f() const { return widths.back(); }
  std::size_t downsample() const { return std::size_t{1} << pooled_blocks; }
  std::size_t min_side() const;
};

struct FeatureMap {
  Tensor F;  // d_f x m x n
  Tensor V;  // d_v
  std::size_t m = 0;
  std::size_t n = 0;
  std::size_t f() const { return m * n; }
  // F viewed as d_f x f.
  Tensor flat() const { return F.reshaped({F.dim(0), m * n}); }
};

struct TopKPrediction {
  std::vector<std::size_t> classes;
  std::vector<double> scores;
  std::size_t num_classes = 0;

  std::size_t k() const { return classes.size(); }
  bool contains(std::size_t cls) const;
};

// Non-owning view of the parameters the backbone reads.
struct Params {
  std::vector<Parameter*> conv_w;  // c_out x (c_in * 9)
  std::vector<Parameter*> conv_b;  // c_out
  Parameter* visual_w = nullptr;   // d_v x d_f
  Parameter* visual_b = nullptr;
  Parameter* head_w = nullptr;     // N x d_v
  Parameter* head_b = nullptr;
};

// Registers conv, visual and coarse head parameters under group "backbone".
Params add_parameters(ParameterSet& set, const Config& config, std::size_t num_classes, Rng& rng);
Params bind_parameters(ParameterSet& set, const Config& config);

// Intermediates kept for the backward pass.
struct Trace {
  std::vector<Tensor> inputs;   // per block: c_in x h x w
  std::vector<Tensor> cols;     // per block: (c_in*9) x (h*w)
  std::vector<Tensor> preacts;  // per block: c_out x (h*w)
  Tensor pooled;                // d_f global average
};

FeatureMap extract_features(const Image& image, const Config& config, const Params& params,
                            Trace* trace = nullptr);

Tensor coarse_logits(const Tensor& V, const Tensor& head_w, const Tensor& head_b);

// Accumulates into the parameters' grad tensors given cotangents of F
// (d_f x m x n or d_f x f) and V. Either cotangent may be empty.
void backward_features(const Config& config, const Params& params, const Trace& trace, const Tensor& dF,
                       const Tensor& dV);

TopKPrediction topk_search(const Tensor& scores, std::size_t k);

// Building blocks, exposed for tests.
Tensor im2col3x3(const Tensor& input);  // c x h x w -> (c*9) x (h*w), zero padding 1
Tensor col2im3x3(const Tensor& cols, std::size_t channels, std::size_t height, std::size_t width);
Tensor avg_pool2(const Tensor& input);  // c x h x w -> c x h/2 x w/2

}  // namespace sac::backbone
