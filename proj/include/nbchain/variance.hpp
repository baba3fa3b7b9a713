#pragma once

/**
 * @file variance.hpp
 * @brief Exact asymptotic variance through the Poisson equation, seeded
 * simulation, and replicated empirical estimates of n Var(mu_hat_n).
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <variant>
#include <vector>

#include "nbchain/chain.hpp"
#include "nbchain/rng.hpp"

namespace nbchain {

/// Visited states X_1..X_n. `marks[t]`, when present, flags the transition
/// X_t -> X_{t+1} (so marks.size() == states.size() - 1).
struct Trajectory {
  std::vector<StateIndex> states;
  std::uint64_t seed = 0;
  std::vector<bool> marks;
};

struct VarianceReport {
  double exact = 0.0;
  double empirical = 0.0;
  double empirical_stderr = 0.0;
  std::size_t n = 0;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
};

/**
 * @brief Inverse-CDF transition sampler.
 *
 * For each row, [0, 1) is cut into consecutive intervals [l(x,y), h(x,y)) of
 * width T(x,y) in state order; only positive entries are stored.
 */
class TransitionSampler {
 public:
  explicit TransitionSampler(const FiniteChain& chain) : rows_(chain.size()) {
    for (StateIndex x = 0; x < chain.size(); ++x) {
      double upper = 0.0;
      for (StateIndex y = 0; y < chain.size(); ++y) {
        const double p = chain(x, y);
        if (p > 0.0) {
          upper += p;
          rows_[x].push_back({upper, y});
        }
      }
    }
  }

  StateIndex next(StateIndex x, double u) const { return pick(rows_[x], u); }

  std::size_t size() const noexcept { return rows_.size(); }

  static StateIndex draw(const Distribution& dist, double u) {
    double upper = 0.0;
    StateIndex last = 0;
    for (StateIndex i = 0; i < dist.size(); ++i) {
      if (dist[i] <= 0.0) continue;
      upper += dist[i];
      last = i;
      if (u < upper) return i;
    }
    return last;
  }

 private:
  struct Cut {
    double upper;
    StateIndex target;
  };

  static StateIndex pick(const std::vector<Cut>& row, double u) {
    const auto it = std::upper_bound(row.begin(), row.end(), u,
                                     [](double value, const Cut& c) { return value < c.upper; });
    // u can exceed the last cut only through rounding of the row sum.
    return it == row.end() ? row.back().target : it->target;
  }

  std::vector<std::vector<Cut>> rows_;
};

using InitialState = std::variant<StateIndex, Distribution>;

namespace detail {

inline StateIndex initial_state(const InitialState& init, std::size_t n_states, Rng& rng) {
  if (const auto* x = std::get_if<StateIndex>(&init)) {
    if (*x >= n_states) throw Error(ErrorKind::InvalidInit, "initial state " + std::to_string(*x) + " out of range");
    return *x;
  }
  const auto& dist = std::get<Distribution>(init);
  if (dist.size() != n_states) throw Error(ErrorKind::InvalidInit, "initial distribution has wrong length");
  return TransitionSampler::draw(dist, rng.uniform());
}

}  // namespace detail

/// Simulate n states X_1..X_n. One uniform per draw, in order: the initial
/// state (only when `init` is a distribution), then each transition.
inline Trajectory simulate(const FiniteChain& chain, std::size_t n, std::uint64_t seed, const InitialState& init) {
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "trajectory length must be >= 1");
  const TransitionSampler sampler(chain);
  Rng rng(seed);
  Trajectory traj;
  traj.seed = seed;
  traj.states.reserve(n);
  StateIndex x = detail::initial_state(init, chain.size(), rng);
  traj.states.push_back(x);
  for (std::size_t t = 1; t < n; ++t) {
    x = sampler.next(x, rng.uniform());
    traj.states.push_back(x);
  }
  return traj;
}

/// mu_hat_n = (1/n) sum_t f(X_t)
inline double empirical_estimate(const Trajectory& traj, const StateFunction& f) {
  if (traj.states.empty()) throw Error(ErrorKind::InvalidArgument, "empty trajectory");
  double sum = 0.0;
  for (const StateIndex x : traj.states) {
    if (x >= f.size()) throw Error(ErrorKind::DimensionMismatch, "trajectory state outside function domain");
    sum += f[x];
  }
  return sum / static_cast<double>(traj.states.size());
}

/**
 * @brief Solve (I - T) g = f - (pi.f) 1 subject to pi.g = 0.
 *
 * Uses the fundamental matrix (I - T + 1 pi^T), which is invertible for any
 * chain with a single recurrent class, periodic or not.
 */
inline StateFunction solve_poisson(const FiniteChain& chain, const Distribution& dist, const StateFunction& f,
                                   double tol = kTolLinear) {
  const auto n = static_cast<Eigen::Index>(chain.size());
  if (dist.size() != chain.size() || f.size() != chain.size()) {
    throw Error(ErrorKind::DimensionMismatch, "chain/distribution/function sizes");
  }
  const Vector& pi = dist.probabilities();
  const Vector fc = f.values().array() - pi.dot(f.values());
  const Matrix I_minus_T = Matrix::Identity(n, n) - chain.matrix();
  const Matrix A = I_minus_T + Vector::Ones(n) * pi.transpose();

  Eigen::FullPivLU<Matrix> lu(A);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) throw Error(ErrorKind::SingularSystem, "fundamental matrix is singular");
  Vector g = lu.solve(fc);
  const double residual = (I_minus_T * g - fc).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
  if (!std::isfinite(residual) || residual > tol * scale) {
    throw Error(ErrorKind::NumericalFailure, "Poisson residual " + std::to_string(residual));
  }
  return StateFunction(std::move(g));
}

/// V = sum_x pi(x) f_c(x) (2 g(x) - f_c(x)) for a given stationary pi.
inline double exact_asymptotic_variance(const FiniteChain& chain, const Distribution& dist, const StateFunction& f,
                                        double tol = kTolLinear) {
  if (!check_irreducible(chain)) throw Error(ErrorKind::NotIrreducible, "asymptotic variance needs an irreducible chain");
  const Vector& pi = dist.probabilities();
  const Vector fc = f.values().array() - pi.dot(f.values());
  const Vector g = solve_poisson(chain, dist, f, tol).values();

  const double v = (pi.array() * fc.array() * (2.0 * g.array() - fc.array())).sum();
  const double scale = (pi.array() * fc.array().abs() * (2.0 * g.array().abs() + fc.array().abs())).sum();
  if (v < 0.0) {
    if (v >= -tol * std::max(1.0, scale)) return 0.0;
    throw Error(ErrorKind::NumericalFailure, "negative asymptotic variance " + std::to_string(v));
  }
  return v;
}

inline double exact_asymptotic_variance(const FiniteChain& chain, const StateFunction& f, double tol = kTolLinear) {
  if (!check_irreducible(chain)) throw Error(ErrorKind::NotIrreducible, "asymptotic variance needs an irreducible chain");
  return exact_asymptotic_variance(chain, stationary_distribution(chain, tol), f, tol);
}

/// E[mu_hat_n] from initial law `init`, by evolving the state distribution.
inline double expected_estimate(const FiniteChain& chain, const Distribution& init, const StateFunction& f,
                                std::size_t n) {
  if (init.size() != chain.size() || f.size() != chain.size()) {
    throw Error(ErrorKind::DimensionMismatch, "chain/distribution/function sizes");
  }
  Eigen::RowVectorXd p = init.probabilities().transpose();
  const Matrix& T = chain.matrix();
  double total = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    total += p.dot(f.values());
    p = p * T;
  }
  return total / static_cast<double>(n);
}

namespace detail {

/// Unbiased sample variance.
inline double sample_variance(const std::vector<double>& xs) {
  const auto k = static_cast<double>(xs.size());
  double mean = 0.0;
  for (const double x : xs) mean += x;
  mean /= k;
  double ss = 0.0;
  for (const double x : xs) ss += (x - mean) * (x - mean);
  return ss / (k - 1.0);
}

}  // namespace detail

/**
 * @brief n * sample variance of mu_hat_n over independent replicates started
 * from pi, beside the exact value.
 *
 * Replicate r uses seed derive_seed(seed, r). The standard error assumes
 * approximately normal replicate means: se(s^2) = s^2 sqrt(2 / (reps - 1)).
 */
inline VarianceReport replicated_variance(const FiniteChain& chain, const StateFunction& f, std::size_t n,
                                          std::size_t reps, std::uint64_t seed) {
  if (reps < 2) throw Error(ErrorKind::InvalidArgument, "replicated_variance needs reps >= 2");
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "replicated_variance needs n >= 1");
  if (f.size() != chain.size()) throw Error(ErrorKind::DimensionMismatch, "function/chain size");
  if (!check_irreducible(chain)) throw Error(ErrorKind::NotIrreducible, "replicated_variance needs an irreducible chain");

  const Distribution pi = stationary_distribution(chain);
  const TransitionSampler sampler(chain);
  std::vector<double> means(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    Rng rng(derive_seed(seed, r));
    StateIndex x = TransitionSampler::draw(pi, rng.uniform());
    double sum = f[x];
    for (std::size_t t = 1; t < n; ++t) {
      x = sampler.next(x, rng.uniform());
      sum += f[x];
    }
    means[r] = sum / static_cast<double>(n);
  }

  VarianceReport report;
  report.exact = exact_asymptotic_variance(chain, pi, f);
  report.empirical = static_cast<double>(n) * detail::sample_variance(means);
  report.empirical_stderr = report.empirical * std::sqrt(2.0 / static_cast<double>(reps - 1));
  report.n = n;
  report.reps = reps;
  report.seed = seed;
  return report;
}

}  // namespace nbchain
