#include "sac/backbone.hpp"
#include "sac/diffcore.hpp"
#include "sac/error.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

using namespace sac;
using sac::testing::check_parameter;
using sac::testing::random_tensor;

namespace {

Image random_image(std::size_t side, std::uint64_t seed) {
  Rng rng(seed);
  Image img(side, side);
  for (auto& v : img.pixels.values()) v = rng.uniform(0.0, 1.0);
  return img;
}

}  // namespace

TEST(Backbone, ZeroImageWithZeroVisualWeightsGivesBias) {
  backbone::Config cfg;
  ParameterSet set;
  Rng rng(1);
  auto p = backbone::add_parameters(set, cfg, 5, rng);
  p.visual_w->value.fill(0.0);
  for (std::size_t i = 0; i < cfg.d_v; ++i) p.visual_b->value[i] = 0.5 * static_cast<double>(i);
  auto fm = backbone::extract_features(Image(64, 64), cfg, p);
  EXPECT_EQ(fm.V, p.visual_b->value);
}

TEST(Backbone, ConstantImagesGiveIdenticalFeatures) {
  backbone::Config cfg;
  ParameterSet a, b;
  Rng ra(9), rb(9);
  auto pa = backbone::add_parameters(a, cfg, 3, ra);
  auto pb = backbone::add_parameters(b, cfg, 3, rb);
  auto fa = backbone::extract_features(Image(64, 64, 0.3), cfg, pa);
  auto fb = backbone::extract_features(Image(64, 64, 0.3), cfg, pb);
  EXPECT_EQ(fa.F, fb.F);
  EXPECT_EQ(fa.V, fb.V);
}

TEST(Backbone, DefaultArchitectureShapes) {
  backbone::Config cfg;
  ParameterSet set;
  Rng rng(5);
  auto p = backbone::add_parameters(set, cfg, 40, rng);
  auto fm = backbone::extract_features(random_image(64, 5), cfg, p);
  EXPECT_EQ(fm.F.shape(), (Shape{64, 8, 8}));
  EXPECT_EQ(fm.V.shape(), (Shape{128}));
  EXPECT_EQ(fm.f(), 64u);
  EXPECT_TRUE(fm.F.all_finite());
}

TEST(Backbone, RejectsTooSmallImage) {
  backbone::Config cfg;
  ParameterSet set;
  Rng rng(5);
  auto p = backbone::add_parameters(set, cfg, 4, rng);
  EXPECT_THROW(backbone::extract_features(Image(8, 8), cfg, p), Error);
  EXPECT_THROW(backbone::extract_features(Image(20, 20), cfg, p), Error);
}

TEST(CoarseLogits, ZeroWeightsReturnBias) {
  auto logits = backbone::coarse_logits(Tensor({4}), Tensor({3, 4}), Tensor::vector({1, 2, 3}));
  EXPECT_EQ(logits, Tensor::vector({1, 2, 3}));
}

TEST(CoarseLogits, SingleClassIsCertain) {
  Rng rng(2);
  auto logits = backbone::coarse_logits(random_tensor({6}, rng), random_tensor({1, 6}, rng), Tensor({1}));
  EXPECT_EQ(diff::softmax(logits), Tensor::vector({1.0}));
}

TEST(CoarseLogits, DimensionMismatchFails) {
  EXPECT_THROW(backbone::coarse_logits(Tensor({4}), Tensor({3, 5}), Tensor({3})), Error);
}

TEST(CoarseLogits, CrossEntropyGradientSeed13) {
  Rng rng(13);
  Tensor V = random_tensor({6}, rng), W = random_tensor({4, 6}, rng), b = random_tensor({4}, rng);
  auto loss = [&](const Tensor& v, const Tensor& w, const Tensor& bb) {
    return diff::cross_entropy(backbone::coarse_logits(v, w, bb), 1);
  };
  auto grads = [&](const Tensor& v, const Tensor& w) {
    return diff::affine_backward(v, w, loss(v, w, b).dlogits);
  };
  auto rw = diff::grad_check([&](const Tensor& x, Tensor* g) { if (g) *g = grads(V, x).dW; return loss(V, x, b).loss; }, W);
  auto rv = diff::grad_check([&](const Tensor& x, Tensor* g) { if (g) *g = grads(x, W).dx; return loss(x, W, b).loss; }, V);
  auto rb = diff::grad_check([&](const Tensor& x, Tensor* g) {
    if (g) *g = diff::affine_backward(V, W, loss(V, W, x).dlogits).db;
    return loss(V, W, x).loss;
  }, b);
  EXPECT_LT(rw.max_rel_err, 1e-4);
  EXPECT_LT(rv.max_rel_err, 1e-4);
  EXPECT_LT(rb.max_rel_err, 1e-4);
}

TEST(Backbone, GradientThroughFeaturesAndCoarseHead) {
  backbone::Config cfg;
  cfg.widths = {4, 6, 6, 8};
  cfg.d_v = 5;
  ParameterSet set;
  Rng rng(21);
  auto p = backbone::add_parameters(set, cfg, 4, rng);
  const Image image = random_image(16, 22);
  Rng rr(23);
  const Tensor rF = random_tensor({8, 2, 2}, rr);
  const std::size_t target = 3;

  auto loss = [&](bool backward) {
    backbone::Trace trace;
    auto fm = backbone::extract_features(image, cfg, p, &trace);
    auto logits = backbone::coarse_logits(fm.V, p.head_w->value, p.head_b->value);
    auto ce = diff::cross_entropy(logits, target);
    const double value = ce.loss + fm.F.vec().dot(rF.vec());
    if (backward) {
      set.zero_grad();
      auto hg = diff::affine_backward(fm.V, p.head_w->value, ce.dlogits);
      p.head_w->grad.vec() += hg.dW.vec();
      p.head_b->grad.vec() += hg.db.vec();
      backbone::backward_features(cfg, p, trace, rF, hg.dx);
    }
    return value;
  };
  for (auto& param : set) {
    auto rep = check_parameter(*param, loss);
    EXPECT_LT(rep.max_rel_err, 1e-3) << param->name << " worst index " << rep.worst_index;
  }
}

TEST(TopK, Inspection) {
  auto t = backbone::topk_search(Tensor::vector({0.1, 0.5, 0.2, 0.15, 0.05}), 3);
  EXPECT_EQ(t.classes, (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_EQ(t.scores, (std::vector<double>{0.5, 0.2, 0.15}));
  EXPECT_EQ(t.num_classes, 5u);
}

TEST(TopK, TiesBreakByLowerIndex) {
  auto t = backbone::topk_search(Tensor::vector({0.25, 0.25, 0.25, 0.25}), 2);
  EXPECT_EQ(t.classes, (std::vector<std::size_t>{0, 1}));
}

TEST(TopK, InvalidK) {
  EXPECT_THROW(backbone::topk_search(Tensor::vector({1, 2}), 3), Error);
  EXPECT_THROW(backbone::topk_search(Tensor::vector({1, 2}), 0), Error);
}

TEST(TopK, MatchesFullSortOracleSeed9) {
  Rng rng(9);
  Tensor scores = random_tensor({40}, rng, 0, 1);
  std::vector<std::size_t> order(40);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  auto t = backbone::topk_search(scores, 10);
  EXPECT_EQ(t.classes, std::vector<std::size_t>(order.begin(), order.begin() + 10));
}

TEST(TopK, FullKIsPermutationAndPrefixesAreLargest) {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.index(30);
    Tensor scores({n});
    for (auto& v : scores.values()) v = static_cast<double>(rng.index(6));  // many ties
    auto full = backbone::topk_search(scores, n);
    std::vector<std::size_t> sorted = full.classes;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(sorted[i], i);
    std::vector<double> desc(scores.values().begin(), scores.values().end());
    std::sort(desc.rbegin(), desc.rend());
    for (std::size_t k = 1; k <= n; ++k) {
      auto t = backbone::topk_search(scores, k);
      std::vector<double> got = t.scores;
      EXPECT_TRUE(std::is_sorted(got.rbegin(), got.rend()));
      EXPECT_EQ(got, std::vector<double>(desc.begin(), desc.begin() + static_cast<std::ptrdiff_t>(k)));
    }
  }
}
