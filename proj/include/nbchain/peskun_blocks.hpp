#pragma once

/**
 * @file peskun_blocks.hpp
 * @brief Machinery for comparing an "old" and a "new" chain that differ only
 * in how a small amount of probability mass is routed between two states:
 * pairwise decomposition of dominated pairs, coupled simulation with marked
 * delta transitions, segmentation into AA/AB/BA/BB blocks, block-level
 * stratified simulation, and replication harnesses for the two limit lemmas
 * (fixed-count vs fixed-length estimators, stratified block sampling).
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nbchain/chain.hpp"
#include "nbchain/no_backtrack.hpp"
#include "nbchain/rng.hpp"
#include "nbchain/variance.hpp"

namespace nbchain {

// ---------------------------------------------------------------------------
// Dominated pairs and their decomposition

/// Increments on one unordered state pair {a, b}: T'(a,b) = T(a,b) + delta_a,
/// T'(b,a) = T(b,a) + delta_b, with the diagonals absorbing the difference.
struct PairDelta {
  StateIndex a = 0;
  StateIndex b = 0;
  double delta_a = 0.0;
  double delta_b = 0.0;
};

/// Old chain T, new chain T', common invariant law, and the per-pair
/// increments T' - T. Built by make_peskun_pair().
struct PeskunPair {
  FiniteChain old_chain;
  FiniteChain new_chain;
  Distribution dist;
  std::vector<PairDelta> deltas;

  bool is_elementary() const noexcept { return deltas.size() == 1; }
};

/**
 * @brief Validate a dominated pair and extract its increments.
 *
 * Requires T'(x,y) >= T(x,y) - tol off the diagonal, both chains leaving dist
 * invariant, and pi(a) delta_a = pi(b) delta_b on every changed pair. Entries
 * differing by at most tol count as unchanged.
 */
inline PeskunPair make_peskun_pair(const FiniteChain& old_chain, const FiniteChain& new_chain,
                                   const Distribution& dist, double tol = kTolLinear) {
  const std::size_t n = old_chain.size();
  if (new_chain.size() != n || dist.size() != n) throw Error(ErrorKind::DimensionMismatch, "pair sizes differ");
  if (!check_invariant(old_chain, dist, tol)) throw Error(ErrorKind::NotInvariant, "old chain does not leave dist invariant");
  if (!check_invariant(new_chain, dist, tol)) throw Error(ErrorKind::NotInvariant, "new chain does not leave dist invariant");

  PeskunPair pair{old_chain, new_chain, dist, {}};
  for (StateIndex x = 0; x < n; ++x) {
    for (StateIndex y = 0; y < n; ++y) {
      if (x != y && new_chain(x, y) < old_chain(x, y) - tol) {
        throw Error(ErrorKind::DominationViolation,
                    "T'(" + old_chain.label(x) + "," + old_chain.label(y) + ") < T(" + old_chain.label(x) + "," +
                        old_chain.label(y) + ")");
      }
    }
  }
  for (StateIndex a = 0; a < n; ++a) {
    for (StateIndex b = a + 1; b < n; ++b) {
      double da = new_chain(a, b) - old_chain(a, b);
      double db = new_chain(b, a) - old_chain(b, a);
      if (std::abs(da) <= tol) da = 0.0;
      if (std::abs(db) <= tol) db = 0.0;
      if (da == 0.0 && db == 0.0) continue;
      if (std::abs(dist[a] * da - dist[b] * db) > tol) {
        throw Error(ErrorKind::DeltaImbalance, "pi(a) delta_a != pi(b) delta_b on pair (" + old_chain.label(a) + "," +
                                                   old_chain.label(b) + ")");
      }
      pair.deltas.push_back({a, b, da, db});
    }
  }
  return pair;
}

/**
 * @brief Chain of intermediate matrices C_1, ..., C_m = T' from C_0 = T, each
 * step changing the four entries of one unordered pair (lexicographic).
 *
 * Both chains must be reversible with respect to dist and T' must dominate T
 * off the diagonal. Every intermediate is then reversible as well.
 */
inline std::vector<FiniteChain> pairwise_decomposition(const FiniteChain& old_chain, const FiniteChain& new_chain,
                                                       const Distribution& dist, double tol = kTolLinear) {
  if (!check_detailed_balance(old_chain, dist, tol) || !check_detailed_balance(new_chain, dist, tol)) {
    throw Error(ErrorKind::NotReversible, "pairwise decomposition needs both chains reversible");
  }
  const PeskunPair pair = make_peskun_pair(old_chain, new_chain, dist, tol);
  const auto n = static_cast<Eigen::Index>(old_chain.size());
  const Matrix& target = new_chain.matrix();

  Matrix C = old_chain.matrix();
  std::vector<FiniteChain> steps;
  steps.reserve(pair.deltas.size());
  auto settle_row = [&](Eigen::Index r, double removed) {
    bool finished = true;
    for (Eigen::Index c = 0; c < n; ++c) {
      if (c != r && C(r, c) != target(r, c)) finished = false;
    }
    // A row whose off-diagonal part already matches T' takes T's diagonal verbatim.
    C(r, r) = finished ? target(r, r) : C(r, r) - removed;
  };
  for (const auto& d : pair.deltas) {
    const auto a = static_cast<Eigen::Index>(d.a);
    const auto b = static_cast<Eigen::Index>(d.b);
    const double removed_a = target(a, b) - C(a, b);
    const double removed_b = target(b, a) - C(b, a);
    C(a, b) = target(a, b);
    C(b, a) = target(b, a);
    settle_row(a, removed_a);
    settle_row(b, removed_b);
    steps.push_back(validate_chain(C, kTolStochastic, old_chain.labels()));
  }
  return steps;
}

// ---------------------------------------------------------------------------
// Coupled simulation with delta transitions

/**
 * @brief Where an old/new pair of chains differs.
 *
 * From `row_a`, a uniform below delta_a is a delta transition: the old chain
 * goes to `stay_a`, the new chain to `stay_b`; symmetrically from `row_b`.
 * Blocks start at stay_a / stay_b and end at row_a / row_b. For a Peskun pair
 * on states A, B this is row_a = stay_a = A and row_b = stay_b = B; for a
 * kernel change at anchor O on the lifted chain it is row_a = (A,O),
 * stay_a = (O,A), row_b = (B,O), stay_b = (O,B).
 */
struct DeltaCoupling {
  StateIndex row_a = 0;
  StateIndex row_b = 0;
  StateIndex stay_a = 0;
  StateIndex stay_b = 0;
  double delta_a = 0.0;
  double delta_b = 0.0;
};

/**
 * @brief Identify an elementary difference between two chains.
 *
 * Exactly two rows may differ, each on the same two columns, each losing mass
 * on one column and gaining it on the other, and the changes must balance:
 * dist(row_a) delta_a = dist(row_b) delta_b. Otherwise NotElementaryPair
 * (or DeltaImbalance).
 */
inline DeltaCoupling extract_coupling(const FiniteChain& old_chain, const FiniteChain& new_chain,
                                      const Distribution& dist, double tol = kTolLinear) {
  const std::size_t n = old_chain.size();
  if (new_chain.size() != n || dist.size() != n) throw Error(ErrorKind::DimensionMismatch, "pair sizes differ");

  struct RowChange {
    StateIndex row;
    StateIndex lost;
    StateIndex gained;
    double delta;
  };
  std::vector<RowChange> changes;
  for (StateIndex x = 0; x < n; ++x) {
    std::vector<StateIndex> cols;
    for (StateIndex y = 0; y < n; ++y) {
      if (std::abs(new_chain(x, y) - old_chain(x, y)) > tol) cols.push_back(y);
    }
    if (cols.empty()) continue;
    if (cols.size() != 2) throw Error(ErrorKind::NotElementaryPair, "row " + old_chain.label(x) + " differs in " + std::to_string(cols.size()) + " entries");
    const double d0 = new_chain(x, cols[0]) - old_chain(x, cols[0]);
    const double d1 = new_chain(x, cols[1]) - old_chain(x, cols[1]);
    if (std::abs(d0 + d1) > tol || std::abs(d0) <= tol) {
      throw Error(ErrorKind::NotElementaryPair, "row " + old_chain.label(x) + " does not move mass between two entries");
    }
    changes.push_back(d0 < 0.0 ? RowChange{x, cols[0], cols[1], -d0} : RowChange{x, cols[1], cols[0], d0});
  }
  if (changes.size() != 2) throw Error(ErrorKind::NotElementaryPair, std::to_string(changes.size()) + " rows differ, expected 2");
  const auto& ca = changes[0];
  const auto& cb = changes[1];
  if (ca.lost != cb.gained || ca.gained != cb.lost) {
    throw Error(ErrorKind::NotElementaryPair, "the two changed rows do not exchange mass between the same targets");
  }
  if (std::abs(dist[ca.row] * ca.delta - dist[cb.row] * cb.delta) > tol) {
    throw Error(ErrorKind::DeltaImbalance, "dist(row_a) delta_a != dist(row_b) delta_b");
  }
  return DeltaCoupling{ca.row, cb.row, ca.lost, cb.lost, ca.delta, cb.delta};
}

struct CoupledTrajectories {
  Trajectory old_traj;
  Trajectory new_traj;
};

namespace detail {

/// Inverse-CDF rows of the old chain, with the `stay` interval first on the
/// two delta rows so that [0, delta) sits inside it.
class CouplingPartition {
 public:
  CouplingPartition(const FiniteChain& chain, const DeltaCoupling& c) : rows_(chain.size()) {
    for (StateIndex x = 0; x < chain.size(); ++x) {
      std::vector<StateIndex> order;
      const bool delta_row = x == c.row_a || x == c.row_b;
      const StateIndex first = x == c.row_a ? c.stay_a : c.stay_b;
      if (delta_row) order.push_back(first);
      for (StateIndex y = 0; y < chain.size(); ++y) {
        if (!(delta_row && y == first)) order.push_back(y);
      }
      double upper = 0.0;
      for (const StateIndex y : order) {
        if (chain(x, y) <= 0.0) continue;
        upper += chain(x, y);
        rows_[x].push_back({upper, y});
      }
    }
  }

  StateIndex next(StateIndex x, double u) const {
    const auto& row = rows_[x];
    for (const auto& cut : row) {
      if (u < cut.first) return cut.second;
    }
    return row.back().second;
  }

 private:
  std::vector<std::vector<std::pair<double, StateIndex>>> rows_;
};

}  // namespace detail

/**
 * @brief Run old and new chains from one uniform stream, marking delta
 * transitions.
 *
 * The initial state is stay_a or stay_b with probability 1/2 each (one shared
 * uniform), so both trajectories begin at the start of a block. Each
 * trajectory holds n states.
 */
inline CoupledTrajectories delta_coupled_simulate(const FiniteChain& old_chain, const DeltaCoupling& c, std::size_t n,
                                                  std::uint64_t seed) {
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "trajectory length must be >= 1");
  if (old_chain(c.row_a, c.stay_a) < c.delta_a - kTolLinear || old_chain(c.row_b, c.stay_b) < c.delta_b - kTolLinear) {
    throw Error(ErrorKind::InvalidArgument, "delta exceeds the mass it is carved from");
  }
  const detail::CouplingPartition partition(old_chain, c);
  Rng rng(seed);
  CoupledTrajectories out;
  for (auto* traj : {&out.old_traj, &out.new_traj}) {
    traj->seed = seed;
    traj->states.reserve(n);
    traj->marks.reserve(n > 0 ? n - 1 : 0);
  }
  StateIndex xo = rng.uniform() < 0.5 ? c.stay_a : c.stay_b;
  StateIndex xn = xo;
  out.old_traj.states.push_back(xo);
  out.new_traj.states.push_back(xn);
  for (std::size_t t = 1; t < n; ++t) {
    const double u = rng.uniform();
    bool mark_old = true;
    if (xo == c.row_a && u < c.delta_a) {
      xo = c.stay_a;
    } else if (xo == c.row_b && u < c.delta_b) {
      xo = c.stay_b;
    } else {
      xo = partition.next(xo, u);
      mark_old = false;
    }
    bool mark_new = true;
    if (xn == c.row_a && u < c.delta_a) {
      xn = c.stay_b;
    } else if (xn == c.row_b && u < c.delta_b) {
      xn = c.stay_a;
    } else {
      xn = partition.next(xn, u);
      mark_new = false;
    }
    out.old_traj.states.push_back(xo);
    out.old_traj.marks.push_back(mark_old);
    out.new_traj.states.push_back(xn);
    out.new_traj.marks.push_back(mark_new);
  }
  return out;
}

/// Coupled simulation of an elementary Peskun pair on states a and b.
inline CoupledTrajectories delta_coupled_simulate(const PeskunPair& pair, StateIndex a, StateIndex b, std::size_t n,
                                                  std::uint64_t seed) {
  if (!pair.is_elementary()) {
    throw Error(ErrorKind::NotElementaryPair, std::to_string(pair.deltas.size()) + " state pairs differ");
  }
  const auto& d = pair.deltas.front();
  if (!((d.a == a && d.b == b) || (d.a == b && d.b == a))) {
    throw Error(ErrorKind::NotElementaryPair, "chains differ on a different state pair");
  }
  const bool same = d.a == a;
  const DeltaCoupling c{a, b, a, b, same ? d.delta_a : d.delta_b, same ? d.delta_b : d.delta_a};
  return delta_coupled_simulate(pair.old_chain, c, n, seed);
}

// ---------------------------------------------------------------------------
// Blocks

enum class BlockType { AA = 0, AB = 1, BA = 2, BB = 3 };
enum class ChainRole { Old, New };

inline const char* to_string(BlockType t) {
  switch (t) {
    case BlockType::AA: return "AA";
    case BlockType::AB: return "AB";
    case BlockType::BA: return "BA";
    case BlockType::BB: return "BB";
  }
  return "??";
}

inline BlockType make_block_type(bool starts_a, bool ends_a) {
  if (starts_a) return ends_a ? BlockType::AA : BlockType::AB;
  return ends_a ? BlockType::BA : BlockType::BB;
}

inline bool is_homogeneous(BlockType t) { return t == BlockType::AA || t == BlockType::BB; }

/// States that open and close blocks, by role.
struct BlockAnchors {
  StateIndex start_a = 0;
  StateIndex start_b = 0;
  StateIndex end_a = 0;
  StateIndex end_b = 0;

  static BlockAnchors on_states(StateIndex a, StateIndex b) { return {a, b, a, b}; }
  static BlockAnchors from(const DeltaCoupling& c) { return {c.stay_a, c.stay_b, c.row_a, c.row_b}; }
};

struct Block {
  BlockType type = BlockType::AA;
  double H = 0.0;         // sum of f over the block
  std::size_t L = 0;      // number of states
  std::size_t begin = 0;  // offset of the first state in the source trajectory (0 for synthetic blocks)
};

struct BlockTrace {
  std::vector<Block> blocks;
  /// States after the last mark; excluded from statistics. `type` is unset.
  std::optional<Block> trailing;
  /// States before the first mark when the trajectory did not begin at a block start.
  std::optional<Block> leading;
  ChainRole source = ChainRole::Old;
};

/**
 * @brief Cut a marked trajectory into blocks at its delta transitions.
 *
 * A mark on transition t closes a block at state t. Single-state blocks are
 * allowed. With no marks at all the whole trajectory is one open block.
 */
inline BlockTrace segment_blocks(const Trajectory& traj, const StateFunction& f, const BlockAnchors& anchors,
                                 ChainRole source = ChainRole::Old) {
  if (traj.states.empty()) throw Error(ErrorKind::InvalidArgument, "empty trajectory");
  if (traj.marks.size() + 1 != traj.states.size()) throw Error(ErrorKind::InvalidArgument, "trajectory is not marked");
  BlockTrace trace;
  trace.source = source;

  auto content = [&](std::size_t from, std::size_t to_inclusive) {
    Block b;
    b.begin = from;
    b.L = to_inclusive - from + 1;
    for (std::size_t t = from; t <= to_inclusive; ++t) b.H += f[traj.states[t]];
    return b;
  };

  std::size_t start = 0;
  for (std::size_t t = 0; t < traj.marks.size(); ++t) {
    if (!traj.marks[t]) continue;
    Block b = content(start, t);
    const StateIndex first = traj.states[start];
    const StateIndex last = traj.states[t];
    const bool starts_a = first == anchors.start_a;
    const bool starts_b = first == anchors.start_b;
    const bool ends_a = last == anchors.end_a;
    if (!ends_a && last != anchors.end_b) throw Error(ErrorKind::InvalidArgument, "mark on a transition that leaves no end anchor");
    if (starts_a || starts_b) {
      b.type = make_block_type(starts_a, ends_a);
      trace.blocks.push_back(b);
    } else if (start == 0) {
      trace.leading = b;
    } else {
      throw Error(ErrorKind::InvalidArgument, "block opens away from a start anchor");
    }
    start = t + 1;
  }
  trace.trailing = content(start, traj.states.size() - 1);
  return trace;
}

inline BlockTrace segment_blocks(const Trajectory& traj, const StateFunction& f, StateIndex a, StateIndex b,
                                 ChainRole source = ChainRole::Old) {
  return segment_blocks(traj, f, BlockAnchors::on_states(a, b), source);
}

struct BlockTypeStats {
  std::size_t count = 0;
  double mean_H = 0.0;
  double var_H = 0.0;
  double mean_L = 0.0;
  double var_L = 0.0;
};

struct BlockStatistics {
  std::array<BlockTypeStats, 4> by_type{};  // indexed by BlockType
  std::size_t total = 0;

  const BlockTypeStats& operator[](BlockType t) const { return by_type[static_cast<std::size_t>(t)]; }
  std::size_t count(BlockType t) const { return (*this)[t].count; }
  double fraction(BlockType t) const { return static_cast<double>(count(t)) / static_cast<double>(total); }
  /// Fraction of homogeneous (AA or BB) blocks.
  double homogeneous_fraction() const {
    return static_cast<double>(count(BlockType::AA) + count(BlockType::BB)) / static_cast<double>(total);
  }
  /// Ratio of summed content to summed length over complete blocks.
  double ratio_estimate = 0.0;
};

inline BlockStatistics block_statistics(const BlockTrace& trace) {
  if (trace.blocks.empty()) throw Error(ErrorKind::InvalidArgument, "no complete blocks");
  BlockStatistics s;
  s.total = trace.blocks.size();
  double sum_h = 0.0;
  double sum_l = 0.0;
  for (const auto& b : trace.blocks) {
    auto& t = s.by_type[static_cast<std::size_t>(b.type)];
    ++t.count;
    t.mean_H += b.H;
    t.mean_L += static_cast<double>(b.L);
    sum_h += b.H;
    sum_l += static_cast<double>(b.L);
  }
  for (auto& t : s.by_type) {
    if (t.count == 0) continue;
    t.mean_H /= static_cast<double>(t.count);
    t.mean_L /= static_cast<double>(t.count);
  }
  for (const auto& b : trace.blocks) {
    auto& t = s.by_type[static_cast<std::size_t>(b.type)];
    t.var_H += (b.H - t.mean_H) * (b.H - t.mean_H);
    t.var_L += (static_cast<double>(b.L) - t.mean_L) * (static_cast<double>(b.L) - t.mean_L);
  }
  for (auto& t : s.by_type) {
    if (t.count < 2) {
      t.var_H = t.var_L = 0.0;
      continue;
    }
    t.var_H /= static_cast<double>(t.count - 1);
    t.var_L /= static_cast<double>(t.count - 1);
  }
  s.ratio_estimate = sum_h / sum_l;
  return s;
}

// ---------------------------------------------------------------------------
// Block-level simulation

/// Finite-support law of a block's (H, L).
struct ContentLaw {
  struct Atom {
    double H;
    double L;
    double prob;
  };
  std::vector<Atom> atoms;

  void validate() const {
    if (atoms.empty()) throw Error(ErrorKind::InvalidArgument, "content law has no atoms");
    double total = 0.0;
    for (const auto& a : atoms) {
      if (!(a.L > 0.0)) throw Error(ErrorKind::InvalidArgument, "block length must be positive");
      if (a.prob < 0.0) throw Error(ErrorKind::InvalidArgument, "negative atom probability");
      total += a.prob;
    }
    if (std::abs(total - 1.0) > kTolStochastic) throw Error(ErrorKind::InvalidArgument, "atom probabilities do not sum to 1");
  }

  const Atom& sample(Rng& rng) const {
    const double u = rng.uniform();
    double upper = 0.0;
    for (const auto& a : atoms) {
      upper += a.prob;
      if (u < upper) return a;
    }
    return atoms.back();
  }
};

/// h = P(block is homogeneous); content laws for AA (q0), BB (q1) and
/// AB/BA (q2) blocks.
struct BlockLawSpec {
  double h = 0.5;
  ContentLaw q0;
  ContentLaw q1;
  ContentLaw q2;

  void validate() const {
    if (!(h >= 0.0 && h <= 1.0)) throw Error(ErrorKind::InvalidArgument, "h outside [0, 1]");
    q0.validate();
    q1.validate();
    q2.validate();
  }

  const ContentLaw& law(BlockType t) const {
    switch (t) {
      case BlockType::AA: return q0;
      case BlockType::BB: return q1;
      default: return q2;
    }
  }
};

/**
 * @brief Simulate blocks one at a time.
 *
 * A shared Bernoulli(h) stream decides homogeneity (same draws in both
 * modes). The old chain starts each block in the state the previous block
 * ended in; the new chain starts it in the other state, so its homogeneous
 * blocks alternate AA, BB, AA, ... A non-homogeneous block is AB when it
 * starts at A and the reversal BA otherwise; reversal keeps (H, L).
 */
inline BlockTrace stratified_block_simulate(const BlockLawSpec& spec, std::size_t n_blocks, ChainRole mode,
                                            std::uint64_t seed) {
  spec.validate();
  if (n_blocks == 0) throw Error(ErrorKind::InvalidArgument, "n_blocks must be >= 1");
  Rng homogeneity(derive_seed(seed, 0));
  Rng content(derive_seed(seed, mode == ChainRole::Old ? 1 : 2));
  bool previous_end_a = Rng(derive_seed(seed, 3)).uniform() < 0.5;

  BlockTrace trace;
  trace.source = mode;
  trace.blocks.reserve(n_blocks);
  for (std::size_t i = 0; i < n_blocks; ++i) {
    const bool homogeneous = homogeneity.bernoulli(spec.h);
    const bool starts_a = mode == ChainRole::Old ? previous_end_a : !previous_end_a;
    const bool ends_a = homogeneous ? starts_a : !starts_a;
    Block b;
    b.type = make_block_type(starts_a, ends_a);
    const auto& atom = spec.law(b.type).sample(content);
    b.H = atom.H;
    b.L = static_cast<std::size_t>(std::llround(atom.L));
    trace.blocks.push_back(b);
    previous_end_a = ends_a;
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Replication harnesses

struct Estimate {
  double est = 0.0;
  double stderr_ = 0.0;
};

/// Two scaled-variance estimates and the z statistic of their difference.
struct ComparisonReport {
  Estimate old_est;
  Estimate new_est;
  double z = 0.0;
  bool pass = false;
  std::size_t n = 0;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
};

namespace detail {

inline Estimate scaled_variance(const std::vector<double>& values, std::size_t n) {
  Estimate e;
  e.est = static_cast<double>(n) * sample_variance(values);
  e.stderr_ = e.est * std::sqrt(2.0 / static_cast<double>(values.size() - 1));
  return e;
}

inline double difference_z(const Estimate& a, const Estimate& b) {
  const double se = std::sqrt(a.stderr_ * a.stderr_ + b.stderr_ * b.stderr_);
  const double diff = a.est - b.est;
  if (se == 0.0) return diff == 0.0 ? 0.0 : (diff > 0.0 ? HUGE_VAL : -HUGE_VAL);
  return diff / se;
}

}  // namespace detail

/**
 * @brief Fixed-length vs fixed-visit-count estimators.
 *
 * Each replicate starts from pi and yields mu_hat_n over the first n states
 * and mu_tilde_k over the first N(k) states, N(k) being the time of the k-th
 * visit to S, k = ceil(n pi(S)); both come from the same path. `old_est` is
 * n Var(mu_hat_n), `new_est` is n Var(mu_tilde_k); pass means |z| < 4.
 */
inline ComparisonReport lemma1_check(const FiniteChain& chain, const std::vector<StateIndex>& subset,
                                     const StateFunction& f, std::size_t n, std::size_t reps, std::uint64_t seed) {
  if (subset.empty()) throw Error(ErrorKind::EmptySubset, "visit set S is empty");
  if (reps < 2 || n == 0) throw Error(ErrorKind::InvalidArgument, "lemma1_check needs n >= 1 and reps >= 2");
  if (f.size() != chain.size()) throw Error(ErrorKind::DimensionMismatch, "function/chain size");
  if (!check_irreducible(chain)) throw Error(ErrorKind::NotIrreducible, "lemma1_check needs an irreducible chain");

  std::vector<char> in_subset(chain.size(), 0);
  for (const StateIndex s : subset) {
    if (s >= chain.size()) throw Error(ErrorKind::InvalidArgument, "subset state out of range");
    in_subset[s] = 1;
  }
  const Distribution pi = stationary_distribution(chain);
  double pi_s = 0.0;
  for (StateIndex x = 0; x < chain.size(); ++x) {
    if (in_subset[x]) pi_s += pi[x];
  }
  const auto k = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * pi_s - 1e-9));

  const TransitionSampler sampler(chain);
  std::vector<double> fixed_length(reps);
  std::vector<double> fixed_visits(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    Rng rng(derive_seed(seed, r));
    StateIndex x = TransitionSampler::draw(pi, rng.uniform());
    double sum = 0.0;
    std::size_t visits = 0;
    std::size_t t = 0;
    bool have_fixed_length = false;
    bool have_fixed_visits = false;
    while (true) {
      sum += f[x];
      visits += in_subset[x];
      ++t;
      if (t == n) {
        fixed_length[r] = sum / static_cast<double>(n);
        have_fixed_length = true;
      }
      if (!have_fixed_visits && visits == k) {
        fixed_visits[r] = sum / static_cast<double>(t);
        have_fixed_visits = true;
      }
      if (have_fixed_length && have_fixed_visits) break;
      x = sampler.next(x, rng.uniform());
    }
  }
  ComparisonReport report;
  report.old_est = detail::scaled_variance(fixed_length, n);
  report.new_est = detail::scaled_variance(fixed_visits, n);
  report.z = detail::difference_z(report.old_est, report.new_est);
  report.pass = std::abs(report.z) < 4.0;
  report.n = n;
  report.reps = reps;
  report.seed = seed;
  return report;
}

/**
 * @brief Unstratified vs stratified block sampling.
 *
 * Z_1..Z_n is simulated from `types` (Z_1 ~ rho); Z' keeps every 2 and
 * replaces the run of 0/1 symbols by an alternating sequence starting at the
 * first such symbol. (H, L) draws for Z and Z' are independent given the
 * symbols. `old_est` is n Var(R_n), `new_est` is n Var(R'_n), z is
 * (new - old) / se; the check fails only if new exceeds old by more than 4
 * standard errors.
 */
inline ComparisonReport lemma2_check(const BlockLawSpec& spec, const Distribution& rho, const FiniteChain& types,
                                     std::size_t n, std::size_t reps, std::uint64_t seed, double tol = kTolStochastic) {
  spec.validate();
  if (types.size() != 3 || rho.size() != 3) throw Error(ErrorKind::DimensionMismatch, "block-type chain must have 3 states");
  if (std::abs(rho[0] - rho[1]) > tol) throw Error(ErrorKind::RhoAsymmetric, "rho(0) != rho(1)");
  if (!check_irreducible(types)) throw Error(ErrorKind::NotIrreducible, "block-type chain is reducible");
  if (!check_invariant(types, rho, tol)) throw Error(ErrorKind::NotInvariant, "rho is not invariant for the block-type chain");
  if (reps < 2 || n == 0) throw Error(ErrorKind::InvalidArgument, "lemma2_check needs n >= 1 and reps >= 2");

  const TransitionSampler sampler(types);
  const std::array<const ContentLaw*, 3> laws{&spec.q0, &spec.q1, &spec.q2};
  std::vector<double> plain(reps);
  std::vector<double> stratified(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    Rng symbols(derive_seed(seed, 3 * r));
    Rng content(derive_seed(seed, 3 * r + 1));
    Rng content_strat(derive_seed(seed, 3 * r + 2));
    StateIndex z = TransitionSampler::draw(rho, symbols.uniform());
    std::optional<StateIndex> first_binary;
    std::size_t binary_seen = 0;
    double h = 0.0, l = 0.0, hs = 0.0, ls = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      StateIndex zs = z;
      if (z != 2) {
        if (!first_binary) first_binary = z;
        zs = (*first_binary + binary_seen) % 2;
        ++binary_seen;
      }
      const auto& a = laws[z]->sample(content);
      const auto& as = laws[zs]->sample(content_strat);
      h += a.H;
      l += a.L;
      hs += as.H;
      ls += as.L;
      z = sampler.next(z, symbols.uniform());
    }
    plain[r] = h / l;
    stratified[r] = hs / ls;
  }
  ComparisonReport report;
  report.old_est = detail::scaled_variance(plain, n);
  report.new_est = detail::scaled_variance(stratified, n);
  report.z = detail::difference_z(report.new_est, report.old_est);
  report.pass = report.z <= 4.0;
  report.n = n;
  report.reps = reps;
  report.seed = seed;
  return report;
}

// ---------------------------------------------------------------------------
// Kernel-level elementary changes (blocks on the lifted chain)

/**
 * @brief U' = U except at anchor o on {a, b}: U'_o(a,b) += delta_a,
 * U'_o(a,a) -= delta_a, U'_o(b,a) += delta_b, U'_o(b,b) -= delta_b with
 * T(o,a) delta_a = T(o,b) delta_b.
 */
inline UpdateKernel elementary_kernel_step(const FiniteChain& chain, const UpdateKernel& kernel, StateIndex o,
                                           StateIndex a, StateIndex b, double delta_a) {
  if (a == b || !(chain(o, a) > 0.0) || !(chain(o, b) > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "a and b must be distinct successors of the anchor");
  }
  const double delta_b = chain(o, a) * delta_a / chain(o, b);
  if (delta_a <= 0.0 || kernel(o, a, a) < delta_a || kernel(o, b, b) < delta_b) {
    throw Error(ErrorKind::InvalidArgument, "kernel has too little self-mass for this step");
  }
  return kernel.with_entry(o, a, a, kernel(o, a, a) - delta_a)
      .with_entry(o, a, b, kernel(o, a, b) + delta_a)
      .with_entry(o, b, b, kernel(o, b, b) - delta_b)
      .with_entry(o, b, a, kernel(o, b, a) + delta_b);
}

}  // namespace nbchain
