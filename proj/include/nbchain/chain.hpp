#pragma once

/**
 * @file chain.hpp
 * @brief Finite Markov chains: validation, stationary distributions,
 * invariance / detailed-balance / irreducibility checks and
 * Metropolis-Hastings construction.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nbchain/error.hpp"

namespace nbchain {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using StateIndex = std::size_t;

/// Default tolerance for probability rows and vectors summing to one.
inline constexpr double kTolStochastic = 1e-9;
/// Default tolerance for residuals of linear solves and balance identities.
inline constexpr double kTolLinear = 1e-10;

/**
 * @brief Probability vector aligned with a chain's state ordering.
 *
 * Entries in [-tol, 0) are clamped to zero on construction; anything more
 * negative, or a sum further than tol from one, is rejected.
 */
class Distribution {
 public:
  Distribution() = default;

  explicit Distribution(Vector p, double tol = kTolStochastic) : p_(std::move(p)) {
    if (p_.size() == 0) throw Error(ErrorKind::InvalidDistribution, "empty probability vector");
    for (Eigen::Index i = 0; i < p_.size(); ++i) {
      if (!std::isfinite(p_[i]) || p_[i] < -tol) {
        throw Error(ErrorKind::InvalidDistribution,
                    "entry " + std::to_string(i) + " = " + std::to_string(p_[i]));
      }
      if (p_[i] < 0.0) p_[i] = 0.0;
    }
    const double total = p_.sum();
    if (std::abs(total - 1.0) > tol) {
      throw Error(ErrorKind::InvalidDistribution, "entries sum to " + std::to_string(total));
    }
  }

  static Distribution uniform(std::size_t n) {
    return Distribution(Vector::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n)));
  }

  static Distribution point_mass(std::size_t n, StateIndex at) {
    Vector p = Vector::Zero(static_cast<Eigen::Index>(n));
    p[static_cast<Eigen::Index>(at)] = 1.0;
    return Distribution(std::move(p));
  }

  std::size_t size() const noexcept { return static_cast<std::size_t>(p_.size()); }
  double operator[](StateIndex i) const { return p_[static_cast<Eigen::Index>(i)]; }
  const Vector& probabilities() const noexcept { return p_; }

 private:
  Vector p_;
};

/// Real-valued function of state (the estimand's integrand).
class StateFunction {
 public:
  StateFunction() = default;

  explicit StateFunction(Vector values) : values_(std::move(values)) {
    for (Eigen::Index i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) {
        throw Error(ErrorKind::InvalidArgument, "non-finite function value at " + std::to_string(i));
      }
    }
  }

  explicit StateFunction(const std::vector<double>& values)
      : StateFunction(Vector(Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size())))) {}

  static StateFunction constant(std::size_t n, double c) {
    return StateFunction(Vector::Constant(static_cast<Eigen::Index>(n), c));
  }

  std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }
  double operator[](StateIndex i) const { return values_[static_cast<Eigen::Index>(i)]; }
  const Vector& values() const noexcept { return values_; }

  /// E_dist[f].
  double mean(const Distribution& dist) const {
    if (dist.size() != size()) throw Error(ErrorKind::DimensionMismatch, "function/distribution length");
    return dist.probabilities().dot(values_);
  }

 private:
  Vector values_;
};

class FiniteChain;
FiniteChain validate_chain(Matrix T, double tol, std::vector<std::string> labels);

/**
 * @brief Labelled finite state space with a row-stochastic transition matrix.
 *
 * Only obtainable through validate_chain(), so every instance satisfies the
 * stochasticity invariants. Immutable.
 */
class FiniteChain {
 public:
  std::size_t size() const noexcept { return labels_.size(); }
  const Matrix& matrix() const noexcept { return T_; }
  double operator()(StateIndex x, StateIndex y) const {
    return T_(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
  }

  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::string& label(StateIndex i) const { return labels_.at(i); }

  std::optional<StateIndex> find(std::string_view label) const {
    const auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) return std::nullopt;
    return static_cast<StateIndex>(it - labels_.begin());
  }

  /// States y with T(x, y) > 0, in state order.
  std::vector<StateIndex> successors(StateIndex x) const {
    std::vector<StateIndex> out;
    for (StateIndex y = 0; y < size(); ++y) {
      if ((*this)(x, y) > 0.0) out.push_back(y);
    }
    return out;
  }

 private:
  friend FiniteChain validate_chain(Matrix T, double tol, std::vector<std::string> labels);
  FiniteChain(std::vector<std::string> labels, Matrix T) : labels_(std::move(labels)), T_(std::move(T)) {}

  std::vector<std::string> labels_;
  Matrix T_;
};

inline std::vector<std::string> index_labels(std::size_t n) {
  std::vector<std::string> labels;
  labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) labels.push_back(std::to_string(i));
  return labels;
}

/**
 * @brief Validate a transition matrix and wrap it as a chain.
 *
 * Entries within tol of the [0, 1] bounds are clipped onto them; rows are never
 * renormalised. Empty `labels` means "0", "1", ...
 */
inline FiniteChain validate_chain(Matrix T, double tol = kTolStochastic, std::vector<std::string> labels = {}) {
  if (T.rows() != T.cols()) {
    throw Error(ErrorKind::NotSquare,
                std::to_string(T.rows()) + "x" + std::to_string(T.cols()) + " transition matrix");
  }
  if (T.rows() == 0) throw Error(ErrorKind::NotSquare, "empty transition matrix");
  const auto n = static_cast<std::size_t>(T.rows());
  if (labels.empty()) labels = index_labels(n);
  if (labels.size() != n) {
    throw Error(ErrorKind::DimensionMismatch,
                std::to_string(labels.size()) + " labels for " + std::to_string(n) + " states");
  }
  {
    std::unordered_set<std::string> seen(labels.begin(), labels.end());
    if (seen.size() != labels.size()) throw Error(ErrorKind::InvalidArgument, "duplicate state labels");
  }
  for (Eigen::Index r = 0; r < T.rows(); ++r) {
    for (Eigen::Index c = 0; c < T.cols(); ++c) {
      double& v = T(r, c);
      if (!std::isfinite(v) || v < -tol) {
        throw Error(ErrorKind::NegativeEntry, "row " + std::to_string(r) + ", col " + std::to_string(c) +
                                                  " = " + std::to_string(v));
      }
      if (v < 0.0) v = 0.0;
      if (v > 1.0 && v <= 1.0 + tol) v = 1.0;
    }
    const double sum = T.row(r).sum();
    if (std::abs(sum - 1.0) > tol) {
      throw Error(ErrorKind::RowSumViolation, "row " + std::to_string(r) + " sums to " + std::to_string(sum));
    }
  }
  return FiniteChain(std::move(labels), std::move(T));
}

/// max_y |(pi T - pi)_y|
inline double invariance_residual(const FiniteChain& chain, const Distribution& dist) {
  if (dist.size() != chain.size()) throw Error(ErrorKind::DimensionMismatch, "distribution/chain size");
  const Vector& p = dist.probabilities();
  return (chain.matrix().transpose() * p - p).cwiseAbs().maxCoeff();
}

/// max_{x,y} |pi(x) T(x,y) - pi(y) T(y,x)|
inline double detailed_balance_residual(const FiniteChain& chain, const Distribution& dist) {
  if (dist.size() != chain.size()) throw Error(ErrorKind::DimensionMismatch, "distribution/chain size");
  const Matrix flow = dist.probabilities().asDiagonal() * chain.matrix();
  return (flow - flow.transpose()).cwiseAbs().maxCoeff();
}

inline bool check_invariant(const FiniteChain& chain, const Distribution& dist, double tol = kTolLinear) {
  return invariance_residual(chain, dist) <= tol;
}

inline bool check_detailed_balance(const FiniteChain& chain, const Distribution& dist, double tol = kTolLinear) {
  return detailed_balance_residual(chain, dist) <= tol;
}

namespace detail {

inline std::size_t reachable_count(const Matrix& T, bool transpose) {
  const auto n = static_cast<std::size_t>(T.rows());
  std::vector<char> seen(n, 0);
  std::vector<std::size_t> stack{0};
  seen[0] = 1;
  std::size_t count = 1;
  while (!stack.empty()) {
    const std::size_t x = stack.back();
    stack.pop_back();
    for (std::size_t y = 0; y < n; ++y) {
      const double w = transpose ? T(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(x))
                                 : T(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
      if (w > 0.0 && !seen[y]) {
        seen[y] = 1;
        ++count;
        stack.push_back(y);
      }
    }
  }
  return count;
}

}  // namespace detail

/// Strong connectivity of the graph of positive transitions.
inline bool check_irreducible(const FiniteChain& chain) {
  const Matrix& T = chain.matrix();
  return detail::reachable_count(T, false) == chain.size() && detail::reachable_count(T, true) == chain.size();
}

/**
 * @brief Stationary distribution by a direct solve of pi (T - I) = 0 with the
 * normalisation row appended.
 *
 * Periodic chains are fine. Throws NonUniqueStationary when the system has
 * more than one solution (several closed classes).
 */
inline Distribution stationary_distribution(const FiniteChain& chain, double tol = kTolLinear) {
  const auto n = static_cast<Eigen::Index>(chain.size());
  Matrix A(n + 1, n);
  A.topRows(n) = chain.matrix().transpose() - Matrix::Identity(n, n);
  A.row(n).setOnes();
  Vector b = Vector::Zero(n + 1);
  b[n] = 1.0;

  Eigen::ColPivHouseholderQR<Matrix> qr(A);
  qr.setThreshold(1e-12);
  if (qr.rank() < n) {
    throw Error(ErrorKind::NonUniqueStationary,
                "stationary system has rank " + std::to_string(qr.rank()) + " < " + std::to_string(n));
  }
  Vector p = qr.solve(b);
  const double residual = (A * p - b).cwiseAbs().maxCoeff();
  if (!std::isfinite(residual) || residual > tol) {
    throw Error(ErrorKind::NumericalFailure, "stationary residual " + std::to_string(residual));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (p[i] < -tol) throw Error(ErrorKind::NumericalFailure, "negative stationary mass at " + std::to_string(i));
    if (p[i] < 0.0) p[i] = 0.0;
  }
  p /= p.sum();
  return Distribution(std::move(p));
}

/**
 * @brief Metropolis-Hastings chain with proposal S and target pi.
 *
 * Off-diagonal T(x,y) = S(x,y) min[1, pi(y) S(y,x) / (pi(x) S(x,y))]; rejected
 * mass stays on the diagonal. A one-way proposal (S(y,x) = 0) is never
 * accepted.
 */
inline FiniteChain metropolize(const FiniteChain& proposal, const Distribution& target) {
  const std::size_t n = proposal.size();
  if (target.size() != n) throw Error(ErrorKind::DimensionMismatch, "target/proposal size");
  for (StateIndex x = 0; x < n; ++x) {
    if (!(target[x] > 0.0)) throw Error(ErrorKind::ZeroTargetProbability, "state " + proposal.label(x));
  }
  Matrix T = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (StateIndex x = 0; x < n; ++x) {
    double moved = 0.0;
    for (StateIndex y = 0; y < n; ++y) {
      if (y == x) continue;
      const double s_xy = proposal(x, y);
      if (s_xy <= 0.0) continue;
      // S(x,y) min[1, ratio] written as a symmetric flow over pi(x).
      const double t = std::min(target[x] * s_xy, target[y] * proposal(y, x)) / target[x];
      T(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) = t;
      moved += t;
    }
    T(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(x)) = std::max(0.0, 1.0 - moved);
  }
  return validate_chain(std::move(T), kTolStochastic, proposal.labels());
}

}  // namespace nbchain
