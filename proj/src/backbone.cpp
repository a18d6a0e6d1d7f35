#include "sac/backbone.hpp"

#include "sac/diffcore.hpp"
#include "sac/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sac::backbone {

std::size_t Config::min_side() const { return std::max<std::size_t>(16, downsample()); }

bool TopKPrediction::contains(std::size_t cls) const {
  return std::find(classes.begin(), classes.end(), cls) != classes.end();
}

namespace {

std::string conv_name(std::size_t i, const char* suffix) {
  return "backbone.conv" + std::to_string(i + 1) + "." + suffix;
}

}  // namespace

Params add_parameters(ParameterSet& set, const Config& config, std::size_t num_classes, Rng& rng) {
  if (config.widths.empty() || config.pooled_blocks > config.widths.size()) {
    fail(ErrorKind::kConfig, "backbone: invalid block configuration");
  }
  std::size_t c_in = kChannels;
  for (std::size_t i = 0; i < config.widths.size(); ++i) {
    const std::size_t c_out = config.widths[i];
    const double bound = std::sqrt(6.0 / static_cast<double>(c_in * 9));
    set.add(conv_name(i, "weight"), "backbone", uniform_tensor({c_out, c_in * 9}, -bound, bound, rng));
    set.add(conv_name(i, "bias"), "backbone", Tensor({c_out}));
    c_in = c_out;
  }
  const double vb = 1.0 / std::sqrt(static_cast<double>(config.d_f()));
  set.add("backbone.visual.weight", "backbone", uniform_tensor({config.d_v, config.d_f()}, -vb, vb, rng));
  set.add("backbone.visual.bias", "backbone", Tensor({config.d_v}));
  const double hb = 1.0 / std::sqrt(static_cast<double>(config.d_v));
  set.add("backbone.coarse.weight", "backbone", uniform_tensor({num_classes, config.d_v}, -hb, hb, rng));
  set.add("backbone.coarse.bias", "backbone", Tensor({num_classes}));
  return bind_parameters(set, config);
}

Params bind_parameters(ParameterSet& set, const Config& config) {
  Params p;
  for (std::size_t i = 0; i < config.widths.size(); ++i) {
    p.conv_w.push_back(&set.get(conv_name(i, "weight")));
    p.conv_b.push_back(&set.get(conv_name(i, "bias")));
  }
  p.visual_w = &set.get("backbone.visual.weight");
  p.visual_b = &set.get("backbone.visual.bias");
  p.head_w = &set.get("backbone.coarse.weight");
  p.head_b = &set.get("backbone.coarse.bias");
  return p;
}

Tensor im2col3x3(const Tensor& input) {
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  Tensor cols({c * 9, h * w});
  double* out = cols.data();
  const double* in = input.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        double* row = out + ((ch * 3 + ky) * 3 + kx) * h * w;
        for (std::size_t y = 0; y < h; ++y) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
          const double* src = in + (ch * h + static_cast<std::size_t>(sy)) * w;
          for (std::size_t x = 0; x < w; ++x) {
            const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + kx) - 1;
            if (sx >= 0 && sx < static_cast<std::ptrdiff_t>(w)) row[y * w + x] = src[sx];
          }
        }
      }
    }
  }
  return cols;
}

Tensor col2im3x3(const Tensor& cols, std::size_t c, std::size_t h, std::size_t w) {
  Tensor image({c, h, w});
  double* out = image.data();
  const double* in = cols.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const double* row = in + ((ch * 3 + ky) * 3 + kx) * h * w;
        for (std::size_t y = 0; y < h; ++y) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
          double* dst = out + (ch * h + static_cast<std::size_t>(sy)) * w;
          for (std::size_t x = 0; x < w; ++x) {
            const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + kx) - 1;
            if (sx >= 0 && sx < static_cast<std::ptrdiff_t>(w)) dst[sx] += row[y * w + x];
          }
        }
      }
    }
  }
  return image;
}

Tensor avg_pool2(const Tensor& input) {
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  Tensor out({c, h / 2, w / 2});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h / 2; ++y) {
      for (std::size_t x = 0; x < w / 2; ++x) {
        const double* r0 = input.data() + (ch * h + 2 * y) * w + 2 * x;
        const double* r1 = r0 + w;
        out[(ch * (h / 2) + y) * (w / 2) + x] = 0.25 * (r0[0] + r0[1] + r1[0] + r1[1]);
      }
    }
  }
  return out;
}

namespace {

Tensor avg_unpool2(const Tensor& grad, std::size_t h, std::size_t w) {
  const std::size_t c = grad.dim(0);
  Tensor out({c, h, w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        out[(ch * h + y) * w + x] = 0.25 * grad[(ch * (h / 2) + y / 2) * (w / 2) + x / 2];
      }
    }
  }
  return out;
}

}  // namespace

FeatureMap extract_features(const Image& image, const Config& config, const Params& params, Trace* trace) {
  validate_image(image, config.min_side());
  const std::size_t ds = config.downsample();
  if (image.height % ds != 0 || image.width % ds != 0) {
    fail(ErrorKind::kShape, "image " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                                " is not divisible by the backbone stride " + std::to_string(ds));
  }
  if (trace) *trace = Trace{};

  Tensor x = image.pixels;
  for (std::size_t i = 0; i < config.widths.size(); ++i) {
    const std::size_t h = x.dim(1), w = x.dim(2);
    const Tensor& W = params.conv_w[i]->use();
    const Tensor& b = params.conv_b[i]->use();
    if (W.dim(1) != x.dim(0) * 9) {
      fail(ErrorKind::kShape, "backbone block " + std::to_string(i + 1) + ": weight " + shape_string(W.shape()) +
                                  " vs input " + shape_string(x.shape()));
    }
    Tensor cols = im2col3x3(x);
    Tensor z({W.dim(0), h * w});
    z.mat().noalias() = W.mat() * cols.mat();
    z.mat().colwise() += b.vec();
    Tensor a({W.dim(0), h, w});
    for (std::size_t j = 0; j < z.size(); ++j) a[j] = std::max(0.0, z[j]);
    if (trace) {
      trace->inputs.push_back(std::move(x));
      trace->cols.push_back(std::move(cols));
      trace->preacts.push_back(std::move(z));
    }
    x = i < config.pooled_blocks ? avg_pool2(a) : std::move(a);
  }

  FeatureMap fm;
  fm.m = x.dim(1);
  fm.n = x.dim(2);
  Tensor pooled({x.dim(0)});
  pooled.vec() = x.reshaped({x.dim(0), fm.f()}).mat().rowwise().mean();
  fm.V = diff::affine(pooled, params.visual_w->use(), params.visual_b->use());
  fm.F = std::move(x);
  if (trace) trace->pooled = std::move(pooled);
  return fm;
}

Tensor coarse_logits(const Tensor& V, const Tensor& head_w, const Tensor& head_b) {
  return diff::affine(V, head_w, head_b);
}

void backward_features(const Config& config, const Params& params, const Trace& trace, const Tensor& dF,
                       const Tensor& dV) {
  const std::size_t blocks = config.widths.size();
  if (trace.cols.size() != blocks) fail(ErrorKind::kShape, "backbone backward: trace is empty");
  const std::size_t d_f = config.d_f();
  const std::size_t last_hw = trace.preacts.back().dim(1) / (config.pooled_blocks >= blocks ? 4 : 1);

  Tensor grad({d_f, last_hw});
  if (!dF.empty()) {
    if (dF.size() != grad.size()) {
      fail(ErrorKind::kShape, "backbone backward: dF " + shape_string(dF.shape()) + " vs F (" +
                                  std::to_string(d_f) + ", " + std::to_string(last_hw) + ")");
    }
    grad.values() = dF.values();
  }
  if (!dV.empty()) {
    auto g = diff::affine_backward(trace.pooled, params.visual_w->value, dV);
    params.visual_w->grad.vec() += g.dW.vec();
    params.visual_b->grad.vec() += g.db.vec();
    grad.mat().colwise() += g.dx.vec() / static_cast<double>(last_hw);
  }

  for (std::size_t i = blocks; i-- > 0;) {
    const Tensor& input = trace.inputs[i];
    const std::size_t h = input.dim(1), w = input.dim(2);
    const Tensor& z = trace.preacts[i];
    Tensor dz = i < config.pooled_blocks ? avg_unpool2(grad.reshaped({z.dim(0), h / 2, w / 2}), h, w)
                                         : grad.reshaped({z.dim(0), h, w});
    dz = dz.reshaped(z.shape());
    for (std::size_t j = 0; j < dz.size(); ++j) {
      if (z[j] <= 0.0) dz[j] = 0.0;
    }
    params.conv_w[i]->grad.mat().noalias() += dz.mat() * trace.cols[i].mat().transpose();
    params.conv_b[i]->grad.vec() += dz.mat().rowwise().sum();
    if (i > 0) {
      Tensor dcols({trace.cols[i].dim(0), h * w});
      dcols.mat().noalias() = params.conv_w[i]->value.mat().transpose() * dz.mat();
      grad = col2im3x3(dcols, input.dim(0), h, w).reshaped({input.dim(0), h * w});
    }
  }
}

TopKPrediction topk_search(const Tensor& scores, std::size_t k) {
  const std::size_t n = scores.size();
  if (k < 1 || k > n) {
    fail(ErrorKind::kRange, "topk_search: k=" + std::to_string(k) + " must be in [1, " + std::to_string(n) + "]");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  TopKPrediction out;
  out.num_classes = n;
  out.classes.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  for (auto c : out.classes) out.scores.push_back(scores[c]);
  return out;
}

}  // namespace sac::backbone
