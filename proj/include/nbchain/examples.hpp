#pragma once

// Named example chains and seeded random generators for tests and the CLI.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nbchain/chain.hpp"
#include "nbchain/peskun_blocks.hpp"
#include "nbchain/rng.hpp"

namespace nbchain {

struct ExampleSpec {
  std::string name;
  FiniteChain chain;
  StateFunction f;
  Distribution dist;
  bool reversible = false;
};

/// Walk on 1..N moving to each neighbour w.p. 1/2; the blocked move at an
/// endpoint becomes a self-loop. f(x) = x.
inline ExampleSpec line_walk(std::size_t N) {
  if (N < 2) throw Error(ErrorKind::InvalidArgument, "line_walk needs N >= 2");
  const auto n = static_cast<Eigen::Index>(N);
  Matrix T = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    T(i, i > 0 ? i - 1 : i) += 0.5;
    T(i, i + 1 < n ? i + 1 : i) += 0.5;
  }
  std::vector<std::string> labels;
  Vector f(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    labels.push_back(std::to_string(i + 1));
    f[i] = static_cast<double>(i + 1);
  }
  return {"line_walk(" + std::to_string(N) + ")", validate_chain(T, kTolStochastic, labels), StateFunction(f),
          Distribution::uniform(N), true};
}

/// Grid walk on {1..N} x {1..M}: up/down/left/right w.p. 1/4 each, blocked
/// moves stay put. State (i, j) has index (i-1)*M + (j-1), label "i,j";
/// f is the column index i.
inline ExampleSpec rectangle(std::size_t N, std::size_t M) {
  if (N < 2 || M < 2) throw Error(ErrorKind::InvalidArgument, "rectangle needs N, M >= 2");
  const auto n = static_cast<Eigen::Index>(N * M);
  Matrix T = Matrix::Zero(n, n);
  std::vector<std::string> labels;
  Vector f(n);
  auto idx = [M](std::size_t i, std::size_t j) { return static_cast<Eigen::Index>(i * M + j); };
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < M; ++j) {
      const Eigen::Index s = idx(i, j);
      T(s, i > 0 ? idx(i - 1, j) : s) += 0.25;
      T(s, i + 1 < N ? idx(i + 1, j) : s) += 0.25;
      T(s, j > 0 ? idx(i, j - 1) : s) += 0.25;
      T(s, j + 1 < M ? idx(i, j + 1) : s) += 0.25;
      labels.push_back(std::to_string(i + 1) + "," + std::to_string(j + 1));
      f[s] = static_cast<double>(i + 1);
    }
  }
  return {"rectangle(" + std::to_string(N) + "x" + std::to_string(M) + ")", validate_chain(T, kTolStochastic, labels),
          StateFunction(f), Distribution::uniform(N * M), true};
}

/// Four-state cycle A -> top -> B -> bottom -> A with self-loops 1/2 at A and
/// B (old chain); the new chain moves delta of each self-loop to the opposite
/// cross-link A <-> B. f = (0, +1, 0, -1), pi = (1/3, 1/6, 1/3, 1/6).
inline std::pair<ExampleSpec, ExampleSpec> peskun_counterexample(double delta = 0.5) {
  if (!(delta > 0.0 && delta <= 0.5)) throw Error(ErrorKind::DeltaOutOfRange, "delta must lie in (0, 1/2]");
  constexpr Eigen::Index A = 0, top = 1, B = 2, bottom = 3;
  const std::vector<std::string> labels{"A", "top", "B", "bottom"};
  Matrix T = Matrix::Zero(4, 4);
  T(A, top) = 0.5;
  T(A, A) = 0.5;
  T(top, B) = 1.0;
  T(B, bottom) = 0.5;
  T(B, B) = 0.5;
  T(bottom, A) = 1.0;
  Matrix Tn = T;
  Tn(A, A) -= delta;
  Tn(A, B) += delta;
  Tn(B, B) -= delta;
  Tn(B, A) += delta;
  Vector f(4);
  f << 0.0, 1.0, 0.0, -1.0;
  Vector pi(4);
  pi << 1.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0, 1.0 / 6.0;
  const Distribution dist(pi);
  return {ExampleSpec{"counterexample_old", validate_chain(T, kTolStochastic, labels), StateFunction(f), dist, false},
          ExampleSpec{"counterexample_new", validate_chain(Tn, kTolStochastic, labels), StateFunction(f), dist, false}};
}

struct PeskunMatrices {
  FiniteChain old_chain;
  FiniteChain middle;
  FiniteChain new_chain;
  Distribution dist;
};

/// The three 3x3 chains reversible w.r.t. (0.4, 0.4, 0.2) used to illustrate
/// one elementary step at a time.
inline PeskunMatrices peskun_matrices() {
  Matrix T(3, 3), C(3, 3), Tn(3, 3);
  T << 0.4, 0.4, 0.2,
       0.4, 0.4, 0.2,
       0.4, 0.4, 0.2;
  C << 0.3, 0.5, 0.2,
       0.5, 0.3, 0.2,
       0.4, 0.4, 0.2;
  Tn << 0.3, 0.5, 0.2,
        0.5, 0.2, 0.3,
        0.4, 0.6, 0.0;
  Vector pi(3);
  pi << 0.4, 0.4, 0.2;
  return {validate_chain(T), validate_chain(C), validate_chain(Tn), Distribution(pi)};
}

struct RandomChainOptions {
  bool equal_weights = false;
  bool force_self_loops = false;
};

/**
 * @brief Random walk on a random connected weighted graph.
 *
 * A random spanning tree guarantees connectivity; every other unordered pair
 * (self-loops included) becomes an edge with probability `density`. Weights
 * are uniform on [0.2, 1.2) unless equal. f is integer-valued in [-5, 5].
 */
inline ExampleSpec random_reversible(std::size_t n_states, double density, std::uint64_t seed,
                                     RandomChainOptions options = {}) {
  if (n_states < 2) throw Error(ErrorKind::InvalidArgument, "random_reversible needs >= 2 states");
  if (!(density > 0.0 && density <= 1.0)) throw Error(ErrorKind::InvalidArgument, "density must lie in (0, 1]");
  Rng rng(seed);
  const auto n = static_cast<Eigen::Index>(n_states);
  auto weight = [&] { return options.equal_weights ? 1.0 : 0.2 + rng.uniform(); };

  Matrix W = Matrix::Zero(n, n);
  for (Eigen::Index i = 1; i < n; ++i) {
    const auto parent = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(i)));
    W(i, parent) = W(parent, i) = weight();
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const bool forced = options.force_self_loops && i == j;
      if (W(i, j) > 0.0) continue;
      if (forced || rng.bernoulli(density)) W(i, j) = W(j, i) = weight();
    }
  }
  const Vector degree = W.rowwise().sum();
  Matrix T = W;
  for (Eigen::Index i = 0; i < n; ++i) T.row(i) /= degree[i];
  Vector f(n);
  for (Eigen::Index i = 0; i < n; ++i) f[i] = static_cast<double>(static_cast<int>(rng.below(11)) - 5);
  return {"random_reversible(" + std::to_string(n_states) + ",seed=" + std::to_string(seed) + ")",
          validate_chain(T), StateFunction(f), Distribution(degree / degree.sum()), true};
}

/// Integer-valued function on n states, entries in [lo, hi].
inline StateFunction random_integer_function(std::size_t n, int lo, int hi, std::uint64_t seed) {
  Rng rng(seed);
  Vector f(static_cast<Eigen::Index>(n));
  const auto span = static_cast<std::uint64_t>(hi - lo + 1);
  for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = static_cast<double>(lo + static_cast<int>(rng.below(span)));
  return StateFunction(f);
}

struct ElementaryPairExample {
  ExampleSpec old_spec;
  FiniteChain new_chain;
  StateIndex a = 0;
  StateIndex b = 0;
};

/// Reversible chain plus a copy in which self-loop mass at two random states
/// a, b is moved onto the link between them, keeping detailed balance.
inline ElementaryPairExample random_elementary_pair(std::size_t n_states, std::uint64_t seed) {
  ExampleSpec spec = random_reversible(n_states, 0.6, derive_seed(seed, 0), {false, true});
  Rng rng(derive_seed(seed, 1));
  const auto a = static_cast<StateIndex>(rng.below(n_states));
  auto b = static_cast<StateIndex>(rng.below(n_states - 1));
  if (b >= a) ++b;
  const double pa = spec.dist[a];
  const double pb = spec.dist[b];
  const double cap = std::min(spec.chain(a, a), pb * spec.chain(b, b) / pa);
  const double delta_a = cap * (0.2 + 0.8 * rng.uniform());
  const double delta_b = pa * delta_a / pb;
  Matrix Tn = spec.chain.matrix();
  const auto ia = static_cast<Eigen::Index>(a);
  const auto ib = static_cast<Eigen::Index>(b);
  Tn(ia, ia) -= delta_a;
  Tn(ia, ib) += delta_a;
  Tn(ib, ib) -= delta_b;
  Tn(ib, ia) += delta_b;
  FiniteChain new_chain = validate_chain(Tn, kTolStochastic, spec.chain.labels());
  return {std::move(spec), std::move(new_chain), a, b};
}

/// Law with `atoms` equally likely (H, L) pairs: L in 1..4, H = L * (shift + U(-1, 1)).
inline ContentLaw random_content_law(std::size_t atoms, double shift, Rng& rng) {
  ContentLaw law;
  for (std::size_t i = 0; i < atoms; ++i) {
    const double L = static_cast<double>(1 + rng.below(4));
    law.atoms.push_back({L * (shift + 2.0 * rng.uniform() - 1.0), L, 1.0 / static_cast<double>(atoms)});
  }
  return law;
}

/// Block law with Q0 and Q1 centred at +shift and -shift (equal if shift = 0
/// and `identical_01`), Q2 centred at 0.
inline BlockLawSpec random_block_law(std::uint64_t seed, double shift, bool identical_01 = false) {
  Rng rng(seed);
  BlockLawSpec spec;
  spec.h = 0.2 + 0.6 * rng.uniform();
  spec.q0 = random_content_law(3, shift, rng);
  spec.q1 = identical_01 ? spec.q0 : random_content_law(3, -shift, rng);
  spec.q2 = random_content_law(3, 0.0, rng);
  return spec;
}

/// Three-state chain [[a, b, 1-a-b], [b, a, 1-a-b], [c, c, 1-2c]], symmetric
/// in its first two states so rho(0) = rho(1).
inline FiniteChain symmetric_type_chain(std::uint64_t seed) {
  Rng rng(seed);
  const double a = 0.1 + 0.3 * rng.uniform();
  const double b = 0.1 + 0.3 * rng.uniform();
  const double c = 0.1 + 0.3 * rng.uniform();
  Matrix T(3, 3);
  T << a, b, 1.0 - a - b,
       b, a, 1.0 - a - b,
       c, c, 1.0 - 2.0 * c;
  return validate_chain(T);
}

}  // namespace nbchain
