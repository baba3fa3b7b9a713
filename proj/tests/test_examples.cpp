#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "nbchain/examples.hpp"
#include "nbchain/no_backtrack.hpp"
#include "nbchain/variance.hpp"
#include "oracle.hpp"

using namespace nbchain;

namespace {

constexpr std::size_t A = 0, TOP = 1, B = 2, BOTTOM = 3;

void expect_consistent(const ExampleSpec& s) {
  SCOPED_TRACE(s.name);
  EXPECT_LE((s.chain.matrix().rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
  EXPECT_GE(s.chain.matrix().minCoeff(), 0.0);
  EXPECT_TRUE(check_invariant(s.chain, s.dist, 1e-12));
  EXPECT_TRUE(check_irreducible(s.chain));
  EXPECT_EQ(check_detailed_balance(s.chain, s.dist, 1e-12), s.reversible);
  EXPECT_EQ(s.f.size(), s.chain.size());
  EXPECT_LE((oracle::stationary_by_eigen(s.chain.matrix()) - s.dist.probabilities()).cwiseAbs().maxCoeff(), 1e-12);
}

}  // namespace

TEST(Counterexample, OldChainStructure) {
  const auto [o, n] = peskun_counterexample();
  EXPECT_EQ(o.chain.labels(), (std::vector<std::string>{"A", "top", "B", "bottom"}));
  EXPECT_EQ(o.chain(A, TOP), 0.5);
  EXPECT_EQ(o.chain(A, A), 0.5);
  EXPECT_EQ(o.chain(TOP, B), 1.0);
  EXPECT_EQ(o.chain(B, BOTTOM), 0.5);
  EXPECT_EQ(o.chain(B, B), 0.5);
  EXPECT_EQ(o.chain(BOTTOM, A), 1.0);
  EXPECT_EQ(o.f.values(), Vector((Vector(4) << 0.0, 1.0, 0.0, -1.0).finished()));
  EXPECT_NEAR(o.dist[A], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(o.dist[TOP], 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(o.f.mean(o.dist), 0.0, 1e-15);
  EXPECT_FALSE(o.reversible);
  EXPECT_FALSE(n.reversible);
}

TEST(Counterexample, NewChainMovesSelfLoopMass) {
  for (const double d : {0.1, 0.25, 0.5}) {
    const auto [o, n] = peskun_counterexample(d);
    EXPECT_NEAR(n.chain(A, B), d, 1e-15);
    EXPECT_NEAR(n.chain(B, A), d, 1e-15);
    EXPECT_NEAR(n.chain(A, A), 0.5 - d, 1e-15);
    EXPECT_NEAR(n.chain(B, B), 0.5 - d, 1e-15);
    for (std::size_t x = 0; x < 4; ++x) {
      for (std::size_t y = 0; y < 4; ++y) {
        if (x != y) {
          EXPECT_GE(n.chain(x, y), o.chain(x, y));
        }
      }
    }
    EXPECT_TRUE(check_invariant(n.chain, o.dist, 1e-12));
  }
}

TEST(Counterexample, DeltaOutOfRange) {
  for (const double d : {0.0, -0.1, 0.51, std::nan("")}) {
    try {
      peskun_counterexample(d);
      ADD_FAILURE() << d;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::DeltaOutOfRange);
    }
  }
}

TEST(Counterexample, OldEstimateWithinOneOverN) {
  const auto [o, n] = peskun_counterexample();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Trajectory t = simulate(o.chain, 997, seed, A);
    EXPECT_LE(std::abs(empirical_estimate(t, o.f)), 1.0 / 997.0 + 1e-15);
  }
}

TEST(Counterexample, VariancesAgainstOracle) {
  const auto [o, n] = peskun_counterexample();
  EXPECT_NEAR(oracle::autocovariance_variance(o.chain.matrix(), o.dist.probabilities(), o.f.values()), 0.0, 1e-10);
  const double v_new = oracle::autocovariance_variance(n.chain.matrix(), n.dist.probabilities(), n.f.values());
  EXPECT_GT(v_new, 0.01);
  EXPECT_NEAR(exact_asymptotic_variance(n.chain, n.dist, n.f), v_new, 1e-8);
}

TEST(PeskunMatricesTest, PrintedValues) {
  const PeskunMatrices pm = peskun_matrices();
  for (Eigen::Index i = 0; i < 3; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(pm.old_chain.matrix()(i, j), i == 2 || j < 2 ? (j == 2 ? 0.2 : 0.4) : 0.2);
  }
  EXPECT_DOUBLE_EQ(pm.middle(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(pm.middle(1, 1), 0.3);
  EXPECT_DOUBLE_EQ(pm.new_chain(1, 2), 0.3);
  EXPECT_DOUBLE_EQ(pm.new_chain(2, 1), 0.6);
  EXPECT_DOUBLE_EQ(pm.new_chain(2, 2), 0.0);
  for (const auto* c : {&pm.old_chain, &pm.middle, &pm.new_chain}) {
    EXPECT_TRUE(check_detailed_balance(*c, pm.dist, 1e-12));
  }
}

TEST(LineWalk, Structure) {
  const ExampleSpec s = line_walk(5);
  EXPECT_EQ(s.chain.label(0), "1");
  EXPECT_EQ(s.f[4], 5.0);
  EXPECT_EQ(s.chain(0, 0), 0.5);
  EXPECT_EQ(s.chain(0, 1), 0.5);
  EXPECT_EQ(s.chain(4, 4), 0.5);
  EXPECT_EQ(s.chain(2, 1), 0.5);
  EXPECT_EQ(s.chain(2, 3), 0.5);
  EXPECT_EQ(s.chain(2, 2), 0.0);
  for (StateIndex x = 0; x < 5; ++x) EXPECT_NEAR(s.dist[x], 0.2, 1e-15);
}

TEST(LineWalk, LiftIsOneCycleThroughAllPairs) {
  for (const std::size_t N : {2u, 3u, 5u, 8u}) {
    const ExampleSpec lw = line_walk(N);
    const ExpandedChain e = build_nobacktrack(lw.chain, liu_kernel(lw.chain));
    ASSERT_EQ(e.size(), 2 * N);
    const Matrix& P = e.chain().matrix();
    EXPECT_TRUE(((P.array() == 0.0) || (P.array() == 1.0)).all());
    EXPECT_TRUE((P.colwise().sum().array() == 1.0).all());
    std::set<StateIndex> seen;
    StateIndex s = 0;
    for (std::size_t k = 0; k < e.size(); ++k) {
      seen.insert(s);
      s = e.chain().successors(s).front();
    }
    EXPECT_EQ(s, 0u);
    EXPECT_EQ(seen.size(), e.size());
  }
}

TEST(Rectangle, Structure) {
  const ExampleSpec s = rectangle(4, 3);
  EXPECT_EQ(s.chain.size(), 12u);
  EXPECT_EQ(s.chain.label(5), "2,3");
  EXPECT_EQ(s.f[5], 2.0);
  EXPECT_EQ(s.chain(0, 0), 0.5);
  EXPECT_EQ(s.chain(1, 1), 0.25);
  EXPECT_EQ(s.chain(4, 4), 0.0);
  // One pair-state per positive entry.
  EXPECT_EQ(expand_states(rectangle(6, 3).chain).size(), static_cast<std::size_t>((rectangle(6, 3).chain.matrix().array() > 0).count()));
  for (StateIndex x = 0; x < 12; ++x) {
    for (const StateIndex y : s.chain.successors(x)) {
      if (x == y) continue;
      const int di = std::abs(static_cast<int>(x / 3) - static_cast<int>(y / 3));
      const int dj = std::abs(static_cast<int>(x % 3) - static_cast<int>(y % 3));
      EXPECT_EQ(di + dj, 1);
    }
  }
}

TEST(Examples, AllSpecsConsistent) {
  expect_consistent(line_walk(2));
  expect_consistent(line_walk(9));
  expect_consistent(rectangle(2, 2));
  expect_consistent(rectangle(8, 6));
  const auto [o, n] = peskun_counterexample(0.3);
  expect_consistent(o);
  expect_consistent(n);
  for (std::uint64_t seed = 0; seed < 25; ++seed) expect_consistent(random_reversible(2 + seed % 7, 0.4, seed));
}

TEST(Examples, InvalidSizes) {
  EXPECT_THROW(line_walk(1), Error);
  EXPECT_THROW(rectangle(1, 4), Error);
  EXPECT_THROW(random_reversible(1, 0.5, 0), Error);
  EXPECT_THROW(random_reversible(4, 0.0, 0), Error);
}

TEST(RandomReversible, SeedStable) {
  const ExampleSpec a = random_reversible(6, 0.5, 42);
  const ExampleSpec b = random_reversible(6, 0.5, 42);
  const ExampleSpec c = random_reversible(6, 0.5, 43);
  EXPECT_EQ(a.chain.matrix(), b.chain.matrix());
  EXPECT_EQ(a.f.values(), b.f.values());
  EXPECT_NE(a.chain.matrix(), c.chain.matrix());
}

TEST(RandomReversible, EqualWeightsFullDensityIsUniform) {
  const ExampleSpec s = random_reversible(5, 1.0, 3, {true, false});
  EXPECT_LE((s.chain.matrix().array() - 0.2).abs().maxCoeff(), 1e-15);
  EXPECT_LE((s.dist.probabilities().array() - 0.2).abs().maxCoeff(), 1e-15);
}

TEST(RandomReversible, FunctionRangeAndSelfLoops) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ExampleSpec s = random_reversible(6, 0.3, seed, {false, true});
    EXPECT_LE(s.f.values().cwiseAbs().maxCoeff(), 5.0);
    EXPECT_TRUE((s.f.values().array() == s.f.values().array().round()).all());
    EXPECT_TRUE((s.chain.matrix().diagonal().array() > 0.0).all());
  }
}

TEST(RandomElementaryPair, DominatesAndBalances) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ElementaryPairExample ex = random_elementary_pair(5, seed);
    EXPECT_NE(ex.a, ex.b);
    EXPECT_TRUE(check_detailed_balance(ex.new_chain, ex.old_spec.dist, 1e-12));
    EXPECT_GT(ex.new_chain(ex.a, ex.b), ex.old_spec.chain(ex.a, ex.b));
    const Matrix d = ex.new_chain.matrix() - ex.old_spec.chain.matrix();
    EXPECT_EQ((d.array() != 0.0).count(), 4);
  }
}

TEST(BlockLaws, GeneratedLawsValidate) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const BlockLawSpec spec = random_block_law(seed, 1.0);
    EXPECT_NO_THROW(spec.validate());
    EXPECT_GT(spec.h, 0.0);
    EXPECT_LT(spec.h, 1.0);
    const BlockLawSpec same = random_block_law(seed, 0.0, true);
    ASSERT_EQ(same.q0.atoms.size(), same.q1.atoms.size());
    for (std::size_t i = 0; i < same.q0.atoms.size(); ++i) EXPECT_EQ(same.q0.atoms[i].H, same.q1.atoms[i].H);
    const FiniteChain t = symmetric_type_chain(seed);
    const Distribution rho = stationary_distribution(t);
    EXPECT_NEAR(rho[0], rho[1], 1e-12);
  }
}
