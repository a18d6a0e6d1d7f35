#pragma once

#include "sac/diffcore.hpp"
#include "sac/params.hpp"
#include "sac/tensor.hpp"

#include <functional>

namespace sac::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  return uniform_tensor(std::move(shape), lo, hi, rng);
}

// Finite-difference check of one parameter. `loss` must run the forward pass
// and, when asked, zero the gradients and run the backward pass.
inline diff::GradientReport check_parameter(Parameter& p, const std::function<double(bool backward)>& loss,
                                            double eps = 1e-5) {
  const Tensor saved = p.value;
  auto report = diff::grad_check(
      [&](const Tensor& x, Tensor* grad) {
        p.value = x;
        const double value = loss(grad != nullptr);
        if (grad) *grad = p.grad;
        return value;
      },
      saved, eps);
  p.value = saved;
  return report;
}

}  // namespace sac::testing
