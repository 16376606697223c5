#include <gtest/gtest.h>

#include <cmath>

#include "cyctrack/appearance.hpp"
#include "cyctrack/assignment.hpp"
#include "cyctrack/random.hpp"
#include "oracles.hpp"

using namespace cyctrack;

namespace {

std::vector<double> random_vec(Rng& rng, int dim) {
  std::vector<double> v(dim);
  for (double& x : v) x = rng.normal();
  return v;
}

AppearanceState random_state(Rng& rng, int dim) {
  return {random_vec(rng, dim), random_vec(rng, dim), random_vec(rng, dim)};
}

double cosine(const std::vector<double>& u, const std::vector<double>& v) {
  double uv = 0, uu = 0, vv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uv += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  return uv / std::sqrt(uu * vv);
}

}  // namespace

TEST(InnerProduct, BasicCases) {
  const std::vector<double> u{1, 1}, v{1, 0}, w{0, 1};
  EXPECT_NEAR(normalized_inner_product(u, u), 1.0, 1e-12);
  EXPECT_EQ(normalized_inner_product(v, w), 0.0);
  EXPECT_NEAR(normalized_inner_product(u, v), 0.7071, 1e-4);
  EXPECT_NEAR(normalized_inner_product(u, v), 1.0 / std::sqrt(2.0), 1e-12);
}

TEST(InnerProduct, ZeroVectorAndMismatch) {
  const std::vector<double> z{0, 0}, u{1, 2}, three{1, 2, 3};
  EXPECT_EQ(normalized_inner_product(z, u), 0.0);
  EXPECT_THROW(normalized_inner_product(u, three), ContractViolation);
}

TEST(InnerProduct, InvariantToPositiveScaling) {
  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    auto u = random_vec(rng, 8), v = random_vec(rng, 8);
    const double base = normalized_inner_product(u, v);
    const double s = rng.uniform(1e-3, 1e3);
    for (double& x : u) x *= s;
    EXPECT_NEAR(normalized_inner_product(u, v), base, 1e-9);
  }
}

TEST(MultiClue, IdenticalStatesGiveOne) {
  Rng rng(1);
  const AppearanceState a = random_state(rng, 8);
  EXPECT_NEAR(multi_clue_similarity(a, a, ClueWeights{}), 1.0, 1e-12);
}

TEST(MultiClue, ZeroWeightedCluesVanish) {
  AppearanceState a{{1, 0}, {1, 0}, {1, 0}};
  AppearanceState b{{1, 0}, {0, 1}, {0, 1}};
  EXPECT_NEAR(multi_clue_similarity(a, b, ClueWeights{1, 0, 0}), 1.0, 1e-12);
}

TEST(MultiClue, MatchesTermByTermOracle) {
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    const int dim = 1 + static_cast<int>(rng.index(16));
    const AppearanceState a = random_state(rng, dim), b = random_state(rng, dim);
    ClueWeights w{rng.uniform(), rng.uniform(), rng.uniform()};
    const double expect = w.w_img * cosine(a.e_img, b.e_img) + w.w_bev * cosine(a.e_bev, b.e_bev) +
                          w.w_head * cosine(a.e_head, b.e_head);
    EXPECT_NEAR(multi_clue_similarity(a, b, w), expect, 1e-9);
  }
}

TEST(SimilarityMatrix, SinglePairCostMinusOne) {
  Rng rng(3);
  const AppearanceState a = random_state(rng, 4);
  std::vector<AppearanceState> d{a}, t{a};
  const CostMatrix c = build_similarity_matrix(d, t, ClueWeights{}, 0.5);
  ASSERT_EQ(c.rows(), 1u);
  EXPECT_NEAR(c.value(0, 0), -1.0, 1e-12);
  EXPECT_TRUE(c.admissible(0, 0));
  EXPECT_EQ(solve_assignment(c).size(), 1u);
}

TEST(SimilarityMatrix, EmptyDetections) {
  Rng rng(4);
  std::vector<AppearanceState> d, t{random_state(rng, 4), random_state(rng, 4)};
  const CostMatrix c = build_similarity_matrix(d, t, ClueWeights{}, 0.3);
  EXPECT_EQ(c.rows(), 0u);
  EXPECT_EQ(c.cols(), 2u);
  EXPECT_TRUE(solve_assignment(c).empty());
}

TEST(SimilarityMatrix, GateEqualsThresholdOracle) {
  Rng rng(5);
  std::vector<AppearanceState> d, t;
  for (int i = 0; i < 3; ++i) d.push_back(random_state(rng, 6));
  for (int i = 0; i < 3; ++i) t.push_back(random_state(rng, 6));
  const double theta = 0.05;
  const CostMatrix c = build_similarity_matrix(d, t, ClueWeights{}, theta);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double sim = multi_clue_similarity(d[i], t[j], ClueWeights{});
      EXPECT_EQ(c.admissible(i, j), sim >= theta);
      EXPECT_DOUBLE_EQ(c.value(i, j), -sim);
    }
  }
}

TEST(SimilarityMatrix, PermutationEquivariant) {
  Rng rng(8);
  std::vector<AppearanceState> d, t;
  for (int i = 0; i < 4; ++i) d.push_back(random_state(rng, 5));
  for (int i = 0; i < 3; ++i) t.push_back(random_state(rng, 5));
  const std::vector<std::size_t> pd{2, 0, 3, 1}, pt{1, 2, 0};
  std::vector<AppearanceState> dp, tp;
  for (auto i : pd) dp.push_back(d[i]);
  for (auto j : pt) tp.push_back(t[j]);
  const CostMatrix a = build_similarity_matrix(d, t, ClueWeights{}, 0.0);
  const CostMatrix b = build_similarity_matrix(dp, tp, ClueWeights{}, 0.0);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_EQ(b.value(i, j), a.value(pd[i], pt[j]));
      EXPECT_EQ(b.admissible(i, j), a.admissible(pd[i], pt[j]));
    }
  }
}

TEST(Assignment, DiagonalOptimum) {
  CostMatrix c(2, 2);
  c.value(0, 0) = -1;
  c.value(1, 1) = -1;
  const auto a = solve_assignment(c);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0], (Assignment{0, 0}));
  EXPECT_EQ(a[1], (Assignment{1, 1}));
}

TEST(Assignment, AntiDiagonalOptimum) {
  CostMatrix c(2, 2);
  c.value(0, 0) = -0.9;
  c.value(0, 1) = -1.0;
  c.value(1, 0) = -1.0;
  c.value(1, 1) = -0.2;
  const auto a = solve_assignment(c);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0], (Assignment{0, 1}));
  EXPECT_EQ(a[1], (Assignment{1, 0}));
  EXPECT_DOUBLE_EQ(assignment_cost(c, a), -2.0);
}

TEST(Assignment, GatedPairsNeverReturned) {
  CostMatrix c(2, 2);
  c.value(0, 0) = -5;
  c.set_admissible(0, 0, false);
  c.set_admissible(1, 1, false);
  const auto a = solve_assignment(c);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0], (Assignment{0, 1}));
  EXPECT_EQ(a[1], (Assignment{1, 0}));

  CostMatrix none(2, 3, 0.0, false);
  EXPECT_TRUE(solve_assignment(none).empty());
}

TEST(Assignment, PrefersMorePairsOverLowerCost) {
  // One very cheap pair would block two admissible pairs.
  CostMatrix c(2, 2, 0.0, false);
  c.value(0, 0) = -10;
  c.set_admissible(0, 0, true);
  c.value(0, 1) = -1;
  c.set_admissible(0, 1, true);
  c.value(1, 0) = -1;
  c.set_admissible(1, 0, true);
  EXPECT_EQ(solve_assignment(c).size(), 2u);
}

TEST(Assignment, RectangularBothOrientations) {
  CostMatrix wide(2, 4);
  CostMatrix tall(4, 2);
  Rng rng(6);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      wide.value(i, j) = rng.uniform(-1, 1);
      tall.value(j, i) = wide.value(i, j);
    }
  }
  const auto a = solve_assignment(wide);
  const auto b = solve_assignment(tall);
  ASSERT_EQ(a.size(), 2u);
  ASSERT_EQ(b.size(), 2u);
  EXPECT_NEAR(assignment_cost(wide, a), assignment_cost(tall, b), 1e-12);
  for (std::size_t k = 1; k < b.size(); ++k) EXPECT_LT(b[k - 1].row, b[k].row);
}

TEST(Assignment, MatchesBruteForceWithGates) {
  Rng rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.index(6), m = 1 + rng.index(6);
    CostMatrix c(n, m);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        c.value(i, j) = static_cast<double>(static_cast<int>(rng.index(21)) - 10);
        c.set_admissible(i, j, rng.bernoulli(0.7));
      }
    }
    const auto a = solve_assignment(c);
    const auto ref = oracle::brute_force_assignment(c);
    for (const auto& p : a) EXPECT_TRUE(c.admissible(p.row, p.col));
    EXPECT_EQ(a.size(), ref.count);
    EXPECT_EQ(assignment_cost(c, a), ref.cost);
  }
}

TEST(Assignment, TiesAreDeterministic) {
  CostMatrix c(3, 3, 1.0);
  const auto a = solve_assignment(c);
  const auto b = solve_assignment(c);
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a, b);
}

TEST(Assignment, InfiniteCostIsRejected) {
  CostMatrix c(1, 1);
  c.value(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(solve_assignment(c), ContractViolation);
}
