#pragma once

#include "sac/tensor.hpp"

#include <cstddef>
#include <functional>

// Differentiable primitives. Every op is a forward function plus a backward
// rule that maps the output cotangent to input cotangents.
namespace sac::diff {

// y = W x + b
Tensor affine(const Tensor& x, const Tensor& W, const Tensor& b);

struct AffineGrads {
  Tensor dx;
  Tensor dW;
  Tensor db;
};
AffineGrads affine_backward(const Tensor& x, const Tensor& W, const Tensor& dy);

// Max-subtracted softmax over every entry of v, regardless of rank.
Tensor softmax(const Tensor& v);
// Given s = softmax(v) and ds, returns dv = s * (ds - <s, ds>).
Tensor softmax_backward(const Tensor& s, const Tensor& ds);

double logsumexp(std::span<const double> v);

struct LossAndGrad {
  double loss = 0.0;
  Tensor dlogits;
};
// -log softmax(logits)[target] and its gradient w.r.t. logits.
LossAndGrad cross_entropy(const Tensor& logits, std::size_t target);

struct GradientReport {
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// A scalar function of x. When grad is non-null the callee writes the
// analytic gradient (same shape as x) into it.
using ScalarFn = std::function<double(const Tensor& x, Tensor* grad)>;

double relative_error(double analytic, double numeric);

// Central-difference check of every coordinate of x.
GradientReport grad_check(const ScalarFn& f, const Tensor& x, double eps = 1e-5);

}  // namespace sac::diff
