#pragma once

#include "sac/backbone.hpp"
#include "sac/params.hpp"
#include "sac/tensor.hpp"

#include <cstddef>
#include <optional>

// Fine-grained reassessment head, coarse/fine fusion and the joint loss.
namespace sac::assess {

struct Params {
  Parameter* W = nullptr;  // N x d_j
  Parameter* b = nullptr;  // N
};

Params add_parameters(ParameterSet& set, std::size_t d_j, std::size_t num_classes, Rng& rng);
Params bind_parameters(ParameterSet& set);

Tensor fine_logits(const Tensor& J, const Tensor& W, const Tensor& b);

struct FusedPrediction {
  Tensor pr1;
  Tensor pr2;
  double alpha = 0.5;
  Tensor pr;
  backbone::TopKPrediction topk2;  // empty unless requested
};

// pr = alpha * pr1 + (1 - alpha) * pr2
FusedPrediction fuse(const Tensor& pr1, const Tensor& pr2, double alpha);

struct LossBreakdown {
  double coarse_ce = 0.0;
  double fine_ce = 0.0;
  double aug_ce = 0.0;
  double total = 0.0;
};

struct LossWeights {
  double coarse = 1.0;
  double fine = 1.0;
  double aug = 1.0;
};

struct LossResult {
  LossBreakdown breakdown;
  Tensor d_coarse;
  Tensor d_fine;
  Tensor d_aug;  // empty when no augmentation logits were given
};

LossResult sac_loss(const Tensor& coarse_logits, const Tensor& fine_logits, const Tensor* aug_coarse_logits,
                    std::size_t target, const LossWeights& weights = {});

}  // namespace sac::assess
