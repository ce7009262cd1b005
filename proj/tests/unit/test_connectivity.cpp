#include <gtest/gtest.h>

#include <random>

#include "../common/oracles.hpp"
#include "styletopo/connectivity/ccl.hpp"
#include "styletopo/errors.hpp"

using namespace styletopo;
using namespace styletopo::connectivity;
namespace oracle = styletopo::testing_oracles;

TEST(Binarize, ThresholdIsInclusive) {
  ScalarField rho(1, 3, 1);
  rho.data = {0.05, 0.1, 0.95};
  const Mask m = binarize(rho, 0.1);
  EXPECT_EQ(m.bits, (std::vector<std::uint8_t>{0, 1, 1}));
  EXPECT_EQ(m.count(), 2u);
  EXPECT_EQ(binarize(ScalarField(3, 3, 1, 0.0), 0.1).count(), 0u);
  EXPECT_EQ(binarize(ScalarField(3, 3, 1, 1.0), 0.1).count(), 9u);
  EXPECT_THROW(binarize(rho, 0.0), ValidationError);
  EXPECT_THROW(binarize(rho, 1.0), ValidationError);
}

TEST(Ccl, FullMaskIsOneComponentWithTheLargestLabel) {
  const Mask m = binarize(ScalarField(7, 9, 1, 1.0), 0.5);
  const auto lab = ccl_labels(m, 2000);
  EXPECT_TRUE(lab.converged);
  ASSERT_EQ(lab.counts.size(), 1u);
  EXPECT_EQ(lab.counts.begin()->first, 7 * 9);
  for (auto l : lab.labels) EXPECT_EQ(l, 63);
}

TEST(Ccl, EmptyMaskHasNoComponents) {
  const auto lab = ccl_labels(oracle::make_mask(5, 5), 10);
  EXPECT_TRUE(lab.counts.empty());
  EXPECT_TRUE(lab.converged);
  for (auto l : lab.labels) EXPECT_EQ(l, 0);
}

TEST(Ccl, DiagonalNeighboursAreConnected) {
  auto m = oracle::make_mask(4, 4);
  for (int k = 0; k < 4; ++k) oracle::set(m, k, k);
  const auto lab = ccl_labels(m, 100);
  EXPECT_EQ(lab.counts.size(), 1u);
}

TEST(Ccl, TwoBlobsMatchFloodFill) {
  auto m = oracle::make_mask(10, 12);
  for (int i = 1; i < 4; ++i) {
    for (int j = 1; j < 5; ++j) oracle::set(m, i, j);
  }
  for (int i = 6; i < 9; ++i) {
    for (int j = 7; j < 11; ++j) oracle::set(m, i, j);
  }
  const auto lab = ccl_labels(m, 500);
  EXPECT_EQ(lab.counts.size(), 2u);
  EXPECT_TRUE(oracle::same_partition(oracle::flood_fill(m), lab.labels));
}

TEST(Ccl, RandomMasksMatchFloodFill) {
  std::mt19937_64 rng(1234);
  for (int t = 0; t < 30; ++t) {
    const Mask m = oracle::random_mask(24, 20, 0.3 + 0.02 * t, rng);
    const auto lab = ccl_labels(m, 2000);
    EXPECT_TRUE(lab.converged);
    EXPECT_TRUE(oracle::same_partition(oracle::flood_fill(m), lab.labels)) << t;
    EXPECT_TRUE(is_fixed_point(m, lab));
  }
}

TEST(Ccl, StructuredMasksMatchFloodFill) {
  const auto masks = oracle::structured_masks();
  EXPECT_EQ(masks.size(), 20u);
  for (const auto& [name, m] : masks) {
    const auto lab = ccl_labels(m, 2000);
    EXPECT_TRUE(oracle::same_partition(oracle::flood_fill(m), lab.labels)) << name;
  }
}

TEST(Ccl, LabelsAreIdempotent) {
  std::mt19937_64 rng(99);
  const Mask m = oracle::random_mask(16, 16, 0.5, rng);
  const auto a = ccl_labels(m, 2000);
  const auto b = ccl_labels(m, 2000);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_TRUE(is_fixed_point(m, a));
}

TEST(Ccl, IterationCapIsReportedWhenHit) {
  auto m = oracle::make_mask(1, 40);
  for (int j = 0; j < 40; ++j) oracle::set(m, 0, j);
  const auto lab = ccl_labels(m, 3);
  EXPECT_FALSE(lab.converged);
  EXPECT_EQ(lab.iterations, 3);
  EXPECT_FALSE(is_fixed_point(m, lab));
}

TEST(ConnLoss, SmallBlobContributesItsDensity) {
  // 64 x 64, delta 0.3: a 2000-cell blob and a 50-cell blob at density 0.9
  ScalarField rho(64, 64, 1, 0.0);
  int placed = 0;
  for (int i = 0; i < 64 && placed < 2000; ++i) {
    for (int j = 0; j < 40 && placed < 2000; ++j, ++placed) rho.at(i, j) = 1.0;
  }
  for (int i = 54; i < 59; ++i) {
    for (int j = 50; j < 60; ++j) rho.at(i, j) = 0.9;
  }
  auto lab = ccl_labels(binarize(rho, 0.1), 2000);
  ASSERT_EQ(lab.counts.size(), 2u);
  const ConnLoss c = conn_loss(rho, lab, 0.3);
  EXPECT_NEAR(c.value, 45.0, 1e-12);
  EXPECT_EQ(c.flagged_components, 1u);
  EXPECT_EQ(c.gradient.at(55, 55), 1.0);
  EXPECT_EQ(c.gradient.at(0, 0), 0.0);
  EXPECT_EQ(lab.disconnected[55 * 64 + 55], 1);
}

TEST(ConnLoss, LargestComponentIsAlwaysKept) {
  // every component is below delta * h * w, only the smaller ones count
  ScalarField rho(20, 20, 1, 0.0);
  for (int j = 0; j < 6; ++j) rho.at(2, j) = 0.5;
  for (int j = 0; j < 3; ++j) rho.at(10, j) = 0.5;
  auto lab = ccl_labels(binarize(rho, 0.1), 100);
  const ConnLoss c = conn_loss(rho, lab, 0.9);
  EXPECT_NEAR(c.value, 1.5, 1e-15);
  EXPECT_EQ(c.flagged_components, 1u);
}

TEST(ConnLoss, ConnectedStructureHasZeroLoss) {
  ScalarField rho(16, 16, 1, 0.8);
  auto lab = ccl_labels(binarize(rho, 0.1), 100);
  const ConnLoss c = conn_loss(rho, lab, 0.3);
  EXPECT_EQ(c.value, 0.0);
  EXPECT_EQ(c.flagged_components, 0u);
  ScalarField wrong(8, 8, 1);
  EXPECT_THROW(conn_loss(wrong, lab, 0.3), DimensionError);
}
