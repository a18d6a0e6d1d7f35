#include "sac/dropping.hpp"
#include "sac/error.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace sac;
using namespace sac::drop;
using sac::testing::random_tensor;

TEST(DropMask, DirectRule) {
  const double col[] = {0.9, 0.05, 0.2};
  auto m = drop_mask(col, 0.1, 0.9);
  EXPECT_EQ(m.values, (std::vector<std::uint8_t>{0, 1, 0}));
  EXPECT_NEAR(m.threshold, 0.09, 1e-15);
}

TEST(DropMask, AllBelowThreshold) {
  const double col[] = {0.01, 0.02, 0.03};
  EXPECT_EQ(drop_mask(col, 0.5, 1.0).values, (std::vector<std::uint8_t>{1, 1, 1}));
}

TEST(DropMask, EqualityIsKept) {
  const double col[] = {0.25, 0.2500001};
  EXPECT_EQ(drop_mask(col, 0.5, 0.5).values, (std::vector<std::uint8_t>{1, 0}));
}

TEST(DropMask, InvalidThreshold) {
  const double col[] = {0.1};
  EXPECT_THROW(drop_mask(col, 0.0, 1.0), Error);
  EXPECT_THROW(drop_mask(col, 1.0, 1.0), Error);
}

TEST(DropMask, InvariantToJointRescaling) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor M = random_tensor({12, 3}, rng, 0.0, 1.0);
    const double s = rng.uniform(0.1, 8.0);
    Tensor S = M;
    S.vec() *= s;
    auto a = drop_masks(M, 0.3), b = drop_masks(S, 0.3);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(a[c].values, b[c].values);
  }
}

TEST(CombineMasks, OrTable) {
  std::vector<DropMask> masks{{{0, 1, 1}, 0, 0}, {{1, 1, 0}, 1, 0}};
  EXPECT_EQ(combine_masks(masks).values, (std::vector<std::uint8_t>{1, 1, 1}));
  EXPECT_EQ(combine_masks(masks, Combine::kAnd).values, (std::vector<std::uint8_t>{0, 1, 0}));
}

TEST(CombineMasks, AllZero) {
  std::vector<DropMask> masks(3, DropMask{{0, 0, 0, 0}, 0, 0});
  EXPECT_EQ(combine_masks(masks).values, (std::vector<std::uint8_t>(4, 0)));
}

TEST(CombineMasks, SingleIsIdentity) {
  std::vector<DropMask> masks{{{0, 1, 0, 1, 1}, 0, 0}};
  EXPECT_EQ(combine_masks(masks).values, masks[0].values);
}

TEST(CombineMasks, LengthMismatch) {
  std::vector<DropMask> masks{{{0, 1}, 0, 0}, {{1, 1, 0}, 1, 0}};
  EXPECT_THROW(combine_masks(masks), Error);
  EXPECT_THROW(combine_masks({}), Error);
}

TEST(CombineMasks, SingleClassDropsExactlyAboveThresholdCells) {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor M = random_tensor({16, 1}, rng, 0.0, 1.0);
    const double mx = *std::max_element(M.values().begin(), M.values().end());
    auto keep = combine_masks(drop_masks(M, 0.4));
    for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(keep.values[i] == 0, M[i] > 0.4 * mx);
  }
}

TEST(FeatureDrop, IdentityAndZero) {
  Rng rng(7);
  Tensor F = random_tensor({3, 4}, rng);
  EXPECT_EQ(apply_feature_drop(F, KeepMask{{1, 1, 1, 1}}), F);
  EXPECT_EQ(apply_feature_drop(F, KeepMask{{0, 0, 0, 0}}), Tensor({3, 4}));
  EXPECT_THROW(apply_feature_drop(F, KeepMask{{1, 1}}), Error);
}

TEST(FeatureDrop, ElementwiseOracleSeed14) {
  Rng rng(14);
  Tensor F = random_tensor({5, 4}, rng);
  const KeepMask keep{{1, 0, 1, 0}};
  auto out = apply_feature_drop(F, keep);
  for (std::size_t a = 0; a < 5; ++a) {
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(out.at(a, i), F.at(a, i) * static_cast<double>(keep.values[i]));
  }
  EXPECT_EQ(apply_feature_drop(out, keep), out);
}

TEST(ImageErase, Identity) {
  Image img(8, 8, 0.7);
  EXPECT_EQ(image_level_erase(img, KeepMask{std::vector<std::uint8_t>(4, 1)}, 2, 2), img);
  EXPECT_EQ(image_level_erase(img, KeepMask{std::vector<std::uint8_t>(4, 0)}, 2, 2), Image(8, 8));
}

TEST(ImageErase, BlockOracle) {
  Image img(4, 4, 0.5);
  auto out = image_level_erase(img, KeepMask{{1, 0, 0, 1}}, 2, 2);
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t x = 0; x < 4; ++x) {
      const bool dropped = (r < 2) != (x < 2);  // anti-diagonal blocks
      for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(out.at(c, r, x), dropped ? 0.0 : 0.5);
    }
  }
}

TEST(ImageErase, GridMismatch) {
  EXPECT_THROW(image_level_erase(Image(4, 4), KeepMask{{1, 0, 1}}, 2, 2), Error);
  EXPECT_THROW(image_level_erase(Image(4, 4), KeepMask{std::vector<std::uint8_t>(25, 1)}, 5, 5), Error);
}
