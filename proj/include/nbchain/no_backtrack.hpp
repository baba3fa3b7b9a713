#pragma once

/**
 * @file no_backtrack.hpp
 * @brief Lifting a reversible chain to pairs of consecutive states, and the
 * non-reversible chain that swaps the pair and then updates the second
 * component with a kernel that avoids returning to the previous state.
 *
 * A pair-state (x, y) means "came from x, now at y". One transition of the
 * lifted chain is: swap to (y, x), then redraw the second component from
 * U_y(x, .). With U_y(x, z) = T(y, z) this replays the base chain exactly;
 * with Liu's modified Gibbs kernel it avoids backtracking.
 */

#include <algorithm>
#include <compare>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nbchain/chain.hpp"
#include "nbchain/rng.hpp"
#include "nbchain/variance.hpp"

namespace nbchain {

struct StatePair {
  StateIndex first = 0;
  StateIndex second = 0;
  auto operator<=>(const StatePair&) const = default;
};

/// {(x, y) : T(x, y) > 0}, lexicographic in (x, y).
inline std::vector<StatePair> expand_states(const FiniteChain& chain) {
  std::vector<StatePair> pairs;
  for (StateIndex x = 0; x < chain.size(); ++x) {
    for (StateIndex y = 0; y < chain.size(); ++y) {
      if (chain(x, y) > 0.0) pairs.push_back({x, y});
    }
  }
  return pairs;
}

/// pi(x) T(x, y) over expand_states(chain). Requires detailed balance.
inline Distribution lift_distribution(const FiniteChain& chain, const Distribution& dist, double tol = kTolLinear) {
  if (!check_detailed_balance(chain, dist, tol)) {
    throw Error(ErrorKind::NotReversible, "base chain is not reversible with respect to the given distribution");
  }
  const auto pairs = expand_states(chain);
  Vector mass(static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    mass[static_cast<Eigen::Index>(k)] = dist[pairs[k].first] * chain(pairs[k].first, pairs[k].second);
  }
  return Distribution(std::move(mass));
}

/**
 * @brief Second-component update probabilities U_x(y, z), one block per
 * anchor x.
 *
 * Rows exist only for y with T(x, y) > 0 and are supported on the same set;
 * other entries read as zero.
 */
class UpdateKernel {
 public:
  struct Anchor {
    std::vector<StateIndex> support;
    Matrix rows;  // rows(i, j) = U_x(support[i], support[j])
  };

  UpdateKernel() = default;
  explicit UpdateKernel(std::vector<Anchor> anchors) : anchors_(std::move(anchors)) {
    for (const auto& a : anchors_) {
      if (a.rows.rows() != static_cast<Eigen::Index>(a.support.size()) || a.rows.cols() != a.rows.rows()) {
        throw Error(ErrorKind::DimensionMismatch, "kernel block does not match its support");
      }
    }
  }

  std::size_t size() const noexcept { return anchors_.size(); }
  const Anchor& anchor(StateIndex x) const { return anchors_.at(x); }

  std::optional<std::size_t> position(StateIndex x, StateIndex y) const {
    const auto& s = anchors_.at(x).support;
    const auto it = std::lower_bound(s.begin(), s.end(), y);
    if (it == s.end() || *it != y) return std::nullopt;
    return static_cast<std::size_t>(it - s.begin());
  }

  double operator()(StateIndex x, StateIndex y, StateIndex z) const {
    const auto i = position(x, y);
    const auto j = position(x, z);
    if (!i || !j) return 0.0;
    return anchors_[x].rows(static_cast<Eigen::Index>(*i), static_cast<Eigen::Index>(*j));
  }

  /// Copy with U_x(y, z) replaced; y and z must lie in the support of x.
  UpdateKernel with_entry(StateIndex x, StateIndex y, StateIndex z, double value) const {
    const auto i = position(x, y);
    const auto j = position(x, z);
    if (!i || !j) throw Error(ErrorKind::InvalidArgument, "kernel entry outside the support of its anchor");
    UpdateKernel copy = *this;
    copy.anchors_[x].rows(static_cast<Eigen::Index>(*i), static_cast<Eigen::Index>(*j)) = value;
    return copy;
  }

 private:
  std::vector<Anchor> anchors_;
};

/// U_x(y, z) = T(x, z): the plain lift, which reproduces the base chain.
inline UpdateKernel degenerate_kernel(const FiniteChain& chain) {
  std::vector<UpdateKernel::Anchor> anchors;
  anchors.reserve(chain.size());
  for (StateIndex x = 0; x < chain.size(); ++x) {
    UpdateKernel::Anchor a;
    a.support = chain.successors(x);
    const auto m = static_cast<Eigen::Index>(a.support.size());
    a.rows.resize(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) a.rows(i, j) = chain(x, a.support[static_cast<std::size_t>(j)]);
    }
    anchors.push_back(std::move(a));
  }
  return UpdateKernel(std::move(anchors));
}

/// Liu's off-current probability min[T(x,z)/(1-T(x,y)), T(x,z)/(1-T(x,z))].
inline double liu_move_probability(double t_current, double t_proposed) {
  if (t_current >= 1.0) return 0.0;
  return std::min(t_proposed / (1.0 - t_current), t_proposed / (1.0 - t_proposed));
}

/// Liu's modified Gibbs update of the second component; U_x(y, y) takes the
/// remaining mass, so T(x, y) = 1 gives U_x(y, y) = 1.
inline UpdateKernel liu_kernel(const FiniteChain& chain) {
  std::vector<UpdateKernel::Anchor> anchors;
  anchors.reserve(chain.size());
  for (StateIndex x = 0; x < chain.size(); ++x) {
    UpdateKernel::Anchor a;
    a.support = chain.successors(x);
    const auto m = static_cast<Eigen::Index>(a.support.size());
    a.rows = Matrix::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double t_y = chain(x, a.support[static_cast<std::size_t>(i)]);
      double moved = 0.0;
      for (Eigen::Index j = 0; j < m; ++j) {
        if (j == i) continue;
        const double u = liu_move_probability(t_y, chain(x, a.support[static_cast<std::size_t>(j)]));
        a.rows(i, j) = u;
        moved += u;
      }
      a.rows(i, i) = std::max(0.0, 1.0 - moved);
    }
    anchors.push_back(std::move(a));
  }
  return UpdateKernel(std::move(anchors));
}

struct ConditionViolation {
  enum class Kind {
    Balance,     // T(x,y) U_x(y,z) = T(x,z) U_x(z,y)
    Domination,  // U_x(y,z) >= T(x,z), y != z
    RowSum,      // U_x(y, .) sums to one, entries >= 0
    Support,     // kernel support differs from {z : T(x,z) > 0}
  };
  Kind kind;
  StateIndex x = 0;
  StateIndex y = 0;
  StateIndex z = 0;
  double lhs = 0.0;
  double rhs = 0.0;
};

inline const char* to_string(ConditionViolation::Kind kind) {
  switch (kind) {
    case ConditionViolation::Kind::Balance: return "balance";
    case ConditionViolation::Kind::Domination: return "domination";
    case ConditionViolation::Kind::RowSum: return "row-sum";
    case ConditionViolation::Kind::Support: return "support";
  }
  return "unknown";
}

/// Every (x, y, z) at which the kernel breaks the conditions for a valid
/// no-backtracking update. Empty means the kernel is admissible.
inline std::vector<ConditionViolation> verify_update_conditions(const FiniteChain& chain, const UpdateKernel& kernel,
                                                                double tol = kTolLinear) {
  using Kind = ConditionViolation::Kind;
  std::vector<ConditionViolation> out;
  if (kernel.size() != chain.size()) throw Error(ErrorKind::DimensionMismatch, "kernel/chain size");
  for (StateIndex x = 0; x < chain.size(); ++x) {
    const auto& a = kernel.anchor(x);
    if (a.support != chain.successors(x)) {
      out.push_back({Kind::Support, x, x, x, static_cast<double>(a.support.size()),
                     static_cast<double>(chain.successors(x).size())});
      continue;
    }
    const auto m = static_cast<Eigen::Index>(a.support.size());
    for (Eigen::Index i = 0; i < m; ++i) {
      const StateIndex y = a.support[static_cast<std::size_t>(i)];
      const double row_sum = a.rows.row(i).sum();
      if (std::abs(row_sum - 1.0) > tol || a.rows.row(i).minCoeff() < -tol) {
        out.push_back({Kind::RowSum, x, y, y, row_sum, 1.0});
      }
      for (Eigen::Index j = 0; j < m; ++j) {
        if (j == i) continue;
        const StateIndex z = a.support[static_cast<std::size_t>(j)];
        const double lhs = chain(x, y) * a.rows(i, j);
        const double rhs = chain(x, z) * a.rows(j, i);
        if (std::abs(lhs - rhs) > tol) out.push_back({Kind::Balance, x, y, z, lhs, rhs});
        if (a.rows(i, j) < chain(x, z) - tol) out.push_back({Kind::Domination, x, y, z, a.rows(i, j), chain(x, z)});
      }
    }
  }
  return out;
}

class ExpandedChain;
ExpandedChain build_nobacktrack(const FiniteChain& chain, const UpdateKernel& kernel, double tol);

/// Chain on pair-states together with its pair indexing and invariant law.
class ExpandedChain {
 public:
  const FiniteChain& base() const noexcept { return base_; }
  const std::vector<StatePair>& pairs() const noexcept { return pairs_; }
  const FiniteChain& chain() const noexcept { return chain_; }
  const Distribution& lifted_dist() const noexcept { return lifted_dist_; }
  std::size_t size() const noexcept { return pairs_.size(); }

  const StatePair& pair(StateIndex k) const { return pairs_.at(k); }

  std::optional<StateIndex> index_of(StateIndex x, StateIndex y) const {
    const auto it = std::lower_bound(pairs_.begin(), pairs_.end(), StatePair{x, y});
    if (it == pairs_.end() || *it != StatePair{x, y}) return std::nullopt;
    return static_cast<StateIndex>(it - pairs_.begin());
  }

  StateIndex require_index(StateIndex x, StateIndex y) const {
    const auto k = index_of(x, y);
    if (!k) throw Error(ErrorKind::InvalidArgument, "(" + base_.label(x) + "|" + base_.label(y) + ") is not a pair-state");
    return *k;
  }

 private:
  friend ExpandedChain build_nobacktrack(const FiniteChain& chain, const UpdateKernel& kernel, double tol);
  ExpandedChain(FiniteChain base, std::vector<StatePair> pairs, FiniteChain chain, Distribution lifted)
      : base_(std::move(base)), pairs_(std::move(pairs)), chain_(std::move(chain)), lifted_dist_(std::move(lifted)) {}

  FiniteChain base_;
  std::vector<StatePair> pairs_;
  FiniteChain chain_;
  Distribution lifted_dist_;
};

inline std::string pair_label(const FiniteChain& base, const StatePair& p) {
  return "(" + base.label(p.first) + "|" + base.label(p.second) + ")";
}

/**
 * @brief Assemble T'((x0,x1),(y0,y1)) = delta(x1,y0) U_{x1}(x0,y1) as a dense
 * chain over pair-states.
 *
 * The base chain must have a unique stationary law and be reversible with
 * respect to it; the kernel must pass verify_update_conditions().
 */
inline ExpandedChain build_nobacktrack(const FiniteChain& chain, const UpdateKernel& kernel, double tol = kTolLinear) {
  const auto violations = verify_update_conditions(chain, kernel, tol);
  if (!violations.empty()) {
    const auto& v = violations.front();
    throw Error(ErrorKind::KernelConditionViolation,
                std::to_string(violations.size()) + " violation(s), first: " + to_string(v.kind) + " at x=" +
                    chain.label(v.x) + ", y=" + chain.label(v.y) + ", z=" + chain.label(v.z));
  }
  const Distribution pi = stationary_distribution(chain);
  Distribution lifted = lift_distribution(chain, pi, tol);

  auto pairs = expand_states(chain);
  const auto m = static_cast<Eigen::Index>(pairs.size());
  auto index = [&](StateIndex x, StateIndex y) {
    return static_cast<Eigen::Index>(std::lower_bound(pairs.begin(), pairs.end(), StatePair{x, y}) - pairs.begin());
  };
  Matrix T = Matrix::Zero(m, m);
  std::vector<std::string> labels;
  labels.reserve(pairs.size());
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto [x0, x1] = pairs[static_cast<std::size_t>(k)];
    labels.push_back(pair_label(chain, pairs[static_cast<std::size_t>(k)]));
    const auto& a = kernel.anchor(x1);
    const auto row = kernel.position(x1, x0);  // x0 is a successor of x1 by reversibility
    for (std::size_t j = 0; j < a.support.size(); ++j) {
      T(k, index(x1, a.support[j])) = a.rows(static_cast<Eigen::Index>(*row), static_cast<Eigen::Index>(j));
    }
  }
  FiniteChain lifted_chain = validate_chain(std::move(T), kTolStochastic, std::move(labels));
  return ExpandedChain(chain, std::move(pairs), std::move(lifted_chain), std::move(lifted));
}

/// Plain lift: swap then a Gibbs draw of the second component from T.
inline ExpandedChain lift_chain(const FiniteChain& chain, double tol = kTolLinear) {
  return build_nobacktrack(chain, degenerate_kernel(chain), tol);
}

/// f(x, y) = f(y).
inline StateFunction lift_function(const StateFunction& f, const ExpandedChain& expanded) {
  if (f.size() != expanded.base().size()) throw Error(ErrorKind::DimensionMismatch, "function/base chain size");
  Vector values(static_cast<Eigen::Index>(expanded.size()));
  for (std::size_t k = 0; k < expanded.size(); ++k) values[static_cast<Eigen::Index>(k)] = f[expanded.pair(k).second];
  return StateFunction(std::move(values));
}

namespace detail {

struct SparseEntry {
  StateIndex state;
  double prob;
};

inline std::vector<SparseEntry> sparse_row(const FiniteChain& chain, StateIndex x) {
  std::vector<SparseEntry> row;
  for (StateIndex y = 0; y < chain.size(); ++y) {
    if (chain(x, y) > 0.0) row.push_back({y, chain(x, y)});
  }
  return row;
}

/**
 * Draw z ~ U'_x(y, .) for Liu's kernel from the row T(x, .) alone.
 *
 * T(x,y) >= 1/2: propose z* from T(x, .) restricted to z* != y (one uniform
 * through the inverse CDF with y's interval removed), accept with
 * (1 - T(x,y)) / (1 - T(x,z*)), which is <= 1 on this branch.
 * T(x,y) < 1/2: draw z* from T(x, .) until z* != y (fewer than two draws on
 * average), accept with min[1, (1 - T(x,y)) / (1 - T(x,z*))].
 * Either way the off-current probability is
 * T(x,z)/(1-T(x,y)) min[1, (1-T(x,y))/(1-T(x,z))].
 */
inline StateIndex liu_update(const std::vector<SparseEntry>& row, StateIndex y, Rng& rng) {
  double t_current = -1.0;
  double off_mass = 0.0;
  double total = 0.0;
  for (const auto& e : row) {
    total += e.prob;
    if (e.state == y) {
      t_current = e.prob;
    } else {
      off_mass += e.prob;
    }
  }
  if (t_current <= 0.0) throw Error(ErrorKind::InvalidArgument, "sample_update requires T(x, y) > 0");
  if (off_mass <= 0.0) return y;

  const SparseEntry* proposal = nullptr;
  if (t_current >= 0.5) {
    const double u = rng.uniform() * off_mass;
    double upper = 0.0;
    for (const auto& e : row) {
      if (e.state == y) continue;
      upper += e.prob;
      proposal = &e;
      if (u < upper) break;
    }
  } else {
    do {
      const double u = rng.uniform() * total;
      double upper = 0.0;
      proposal = &row.back();
      for (const auto& e : row) {
        upper += e.prob;
        if (u < upper) {
          proposal = &e;
          break;
        }
      }
    } while (proposal->state == y);
  }
  const double accept = std::min(1.0, (1.0 - t_current) / (1.0 - proposal->prob));
  return rng.uniform() < accept ? proposal->state : y;
}

}  // namespace detail

/// One draw from Liu's U'_x(y, .) without building the kernel row.
inline StateIndex sample_update(const FiniteChain& chain, StateIndex x, StateIndex y, Rng& rng) {
  return detail::liu_update(detail::sparse_row(chain, x), y, rng);
}

inline StateIndex sample_update(const FiniteChain& chain, StateIndex x, StateIndex y, std::uint64_t seed) {
  Rng rng(seed);
  return sample_update(chain, x, y, rng);
}

/**
 * @brief On-the-fly simulator of the Liu no-backtracking chain: swap, then
 * sample_update on the second component. Caches the sparse rows of T.
 */
class NoBacktrackSampler {
 public:
  explicit NoBacktrackSampler(const FiniteChain& chain) {
    rows_.reserve(chain.size());
    for (StateIndex x = 0; x < chain.size(); ++x) rows_.push_back(detail::sparse_row(chain, x));
  }

  StateIndex update(StateIndex x, StateIndex y, Rng& rng) const { return detail::liu_update(rows_.at(x), y, rng); }

  StatePair step(const StatePair& s, Rng& rng) const { return {s.second, update(s.second, s.first, rng)}; }

 private:
  std::vector<std::vector<detail::SparseEntry>> rows_;
};

/// n pair-states of the Liu chain from `start`, reported as indices into
/// expanded.pairs(). `expanded` must have been built with liu_kernel().
inline Trajectory simulate_nobacktrack(const ExpandedChain& expanded, std::size_t n, std::uint64_t seed,
                                       StateIndex start) {
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "trajectory length must be >= 1");
  if (start >= expanded.size()) throw Error(ErrorKind::InvalidInit, "start pair out of range");
  const NoBacktrackSampler sampler(expanded.base());
  Rng rng(seed);
  Trajectory traj;
  traj.seed = seed;
  traj.states.reserve(n);
  StatePair s = expanded.pair(start);
  traj.states.push_back(start);
  for (std::size_t t = 1; t < n; ++t) {
    s = sampler.step(s, rng);
    traj.states.push_back(*expanded.index_of(s.first, s.second));
  }
  return traj;
}

}  // namespace nbchain
