#include "sac/diffcore.hpp"

#include "sac/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sac::diff {

namespace {
void check_affine_shapes(const Tensor& x, const Tensor& W, const Tensor& b) {
  if (W.rank() != 2 || x.rank() != 1 || b.rank() != 1 || W.dim(1) != x.dim(0) || W.dim(0) != b.dim(0)) {
    fail(ErrorKind::kShape, "affine: x " + shape_string(x.shape()) + ", W " + shape_string(W.shape()) +
                                ", b " + shape_string(b.shape()) + " do not conform");
  }
}
}  // namespace

Tensor affine(const Tensor& x, const Tensor& W, const Tensor& b) {
  check_affine_shapes(x, W, b);
  Tensor y({W.dim(0)});
  y.vec().noalias() = W.mat() * x.vec() + b.vec();
  return y;
}

AffineGrads affine_backward(const Tensor& x, const Tensor& W, const Tensor& dy) {
  if (dy.rank() != 1 || dy.dim(0) != W.dim(0)) {
    fail(ErrorKind::kShape, "affine_backward: dy " + shape_string(dy.shape()) + " vs W " + shape_string(W.shape()));
  }
  AffineGrads g{Tensor(x.shape()), Tensor(W.shape()), dy};
  g.dx.vec().noalias() = W.mat().transpose() * dy.vec();
  g.dW.mat().noalias() = dy.vec() * x.vec().transpose();
  return g;
}

double logsumexp(std::span<const double> v) {
  if (v.empty()) fail(ErrorKind::kShape, "logsumexp of empty input");
  const double mx = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - mx);
  return mx + std::log(sum);
}

Tensor softmax(const Tensor& v) {
  if (v.empty()) fail(ErrorKind::kShape, "softmax of empty input");
  Tensor s(v.shape());
  const double mx = *std::max_element(v.values().begin(), v.values().end());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    s[i] = std::exp(v[i] - mx);
    sum += s[i];
  }
  for (auto& x : s.values()) x /= sum;
  return s;
}

Tensor softmax_backward(const Tensor& s, const Tensor& ds) {
  expect_same_shape(s, ds, "softmax_backward");
  const double dot = s.vec().dot(ds.vec());
  Tensor dv(s.shape());
  dv.vec() = s.vec().cwiseProduct((ds.vec().array() - dot).matrix());
  return dv;
}

LossAndGrad cross_entropy(const Tensor& logits, std::size_t target) {
  if (target >= logits.size()) {
    fail(ErrorKind::kRange, "cross_entropy: target " + std::to_string(target) + " outside [0, " +
                                std::to_string(logits.size()) + ")");
  }
  const double lse = logsumexp(logits.span());
  LossAndGrad out;
  out.loss = std::max(0.0, lse - logits[target]);
  out.dlogits = softmax(logits);
  out.dlogits[target] -= 1.0;
  return out;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradientReport grad_check(const ScalarFn& f, const Tensor& x, double eps) {
  if (!(eps > 0.0)) fail(ErrorKind::kRange, "grad_check: eps must be positive");
  Tensor analytic(x.shape());
  const double f0 = f(x, &analytic);
  if (!std::isfinite(f0)) fail(ErrorKind::kNumeric, "grad_check: non-finite value at x");

  GradientReport report;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double fp = f(probe, nullptr);
    probe[i] = orig - eps;
    const double fm = f(probe, nullptr);
    probe[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      fail(ErrorKind::kNumeric, "grad_check: non-finite evaluation at coordinate " + std::to_string(i));
    }
    const double numeric = (fp - fm) / (2.0 * eps);
    const double err = relative_error(analytic[i], numeric);
    if (i == 0 || err > report.max_rel_err) {
      report = {err, i, analytic[i], numeric};
    }
  }
  return report;
}

}  // namespace sac::diff
