#include "sac/assessment.hpp"

#include "sac/diffcore.hpp"
#include "sac/error.hpp"

#include <cmath>

namespace sac::assess {

Params add_parameters(ParameterSet& set, std::size_t d_j, std::size_t num_classes, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(d_j));
  set.add("assess.fine.weight", "assessment", uniform_tensor({num_classes, d_j}, -bound, bound, rng));
  set.add("assess.fine.bias", "assessment", Tensor({num_classes}));
  return bind_parameters(set);
}

Params bind_parameters(ParameterSet& set) { return {&set.get("assess.fine.weight"), &set.get("assess.fine.bias")}; }

Tensor fine_logits(const Tensor& J, const Tensor& W, const Tensor& b) { return diff::affine(J, W, b); }

FusedPrediction fuse(const Tensor& pr1, const Tensor& pr2, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    fail(ErrorKind::kRange, "fuse: alpha " + std::to_string(alpha) + " outside [0, 1]");
  }
  if (pr1.size() != pr2.size() || pr1.empty()) {
    fail(ErrorKind::kShape, "fuse: distributions " + shape_string(pr1.shape()) + " and " + shape_string(pr2.shape()));
  }
  FusedPrediction out{pr1, pr2, alpha, Tensor(pr1.shape()), {}};
  for (std::size_t i = 0; i < pr1.size(); ++i) out.pr[i] = alpha * pr1[i] + (1.0 - alpha) * pr2[i];
  return out;
}

LossResult sac_loss(const Tensor& coarse_logits, const Tensor& fine_logits, const Tensor* aug_coarse_logits,
                    std::size_t target, const LossWeights& weights) {
  LossResult out;
  auto coarse = diff::cross_entropy(coarse_logits, target);
  auto fine = diff::cross_entropy(fine_logits, target);
  out.breakdown.coarse_ce = coarse.loss;
  out.breakdown.fine_ce = fine.loss;
  out.d_coarse = std::move(coarse.dlogits);
  out.d_coarse.vec() *= weights.coarse;
  out.d_fine = std::move(fine.dlogits);
  out.d_fine.vec() *= weights.fine;
  if (aug_coarse_logits) {
    auto aug = diff::cross_entropy(*aug_coarse_logits, target);
    out.breakdown.aug_ce = aug.loss;
    out.d_aug = std::move(aug.dlogits);
    out.d_aug.vec() *= weights.aug;
  }
  out.breakdown.total = weights.coarse * out.breakdown.coarse_ce + weights.fine * out.breakdown.fine_ce +
                        weights.aug * out.breakdown.aug_ce;
  return out;
}

}  // namespace sac::assess
