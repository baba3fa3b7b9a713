#pragma once

// Reference computations that deliberately avoid the library's solvers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <boost/math/distributions/chi_squared.hpp>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Left Perron vector via the eigen-decomposition of T^T.
inline Vector stationary_by_eigen(const Matrix& T) {
  Eigen::EigenSolver<Matrix> es(T.transpose());
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < es.eigenvalues().size(); ++i) {
    if (std::abs(es.eigenvalues()[i] - 1.0) < std::abs(es.eigenvalues()[best] - 1.0)) best = i;
  }
  Vector v = es.eigenvectors().col(best).real();
  return v / v.sum();
}

/// Small splitmix64 generator so test fixtures do not depend on the
/// standard library's distribution implementations.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(unit() * static_cast<double>(n)); }
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::uint64_t state_;
};

namespace detail {

/// Var + 2 sum_k f_c' diag(pi) T^k f_c; returns false if T^k f_c fails to
/// settle within `cap` steps.
inline bool autocovariance_sum(const Matrix& T, const Vector& pi, const Vector& fc, std::size_t cap, double& out) {
  const Vector w = pi.cwiseProduct(fc);
  double total = w.dot(fc);
  Vector v = fc;
  for (std::size_t k = 1; k <= cap; ++k) {
    v = T * v;
    const double term = w.dot(v);
    total += 2.0 * term;
    if (std::abs(term) < 1e-15 && v.cwiseAbs().maxCoeff() < 1e-14) {
      out = total;
      return true;
    }
  }
  return false;
}

}  // namespace detail

/// Truncated autocovariance series for the asymptotic variance. Periodic
/// chains never settle, so they go through the lazy chain (I + T) / 2 whose
/// variance is 2 V + Var_pi(f).
inline double autocovariance_variance(const Matrix& T, const Vector& pi, const Vector& f, std::size_t cap = 2000000) {
  const Vector fc = f.array() - pi.dot(f);
  double v = 0.0;
  if (detail::autocovariance_sum(T, pi, fc, 20000, v)) return v;
  const Matrix lazy = 0.5 * (Matrix::Identity(T.rows(), T.cols()) + T);
  double v_lazy = 0.0;
  if (!detail::autocovariance_sum(lazy, pi, fc, cap, v_lazy)) return std::nan("");
  const double var = pi.dot(fc.cwiseProduct(fc));
  return 0.5 * (v_lazy - var);
}

/// Pearson goodness-of-fit p-value; cells with zero expectation must be empty.
inline double chi_square_p(const std::vector<double>& observed, const std::vector<double>& expected_prob) {
  double total = 0.0;
  for (const double o : observed) total += o;
  double stat = 0.0;
  int cells = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double e = expected_prob[i] * total;
    if (e <= 0.0) {
      if (observed[i] > 0.0) return 0.0;
      continue;
    }
    stat += (observed[i] - e) * (observed[i] - e) / e;
    ++cells;
  }
  if (cells <= 1) return 1.0;
  boost::math::chi_squared dist(cells - 1);
  return boost::math::cdf(boost::math::complement(dist, stat));
}

/// Two-sample chi-square homogeneity p-value on binned counts.
inline double homogeneity_p(const std::vector<double>& a, const std::vector<double>& b) {
  double na = 0, nb = 0;
  for (const double x : a) na += x;
  for (const double x : b) nb += x;
  double stat = 0.0;
  int cells = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double col = a[i] + b[i];
    if (col == 0.0) continue;
    const double ea = col * na / (na + nb);
    const double eb = col * nb / (na + nb);
    stat += (a[i] - ea) * (a[i] - ea) / ea + (b[i] - eb) * (b[i] - eb) / eb;
    ++cells;
  }
  if (cells <= 1) return 1.0;
  boost::math::chi_squared dist(cells - 1);
  return boost::math::cdf(boost::math::complement(dist, stat));
}

/// Random row-stochastic matrix with a Hamiltonian cycle (so irreducible)
/// plus random extra positive entries. Generally not reversible.
inline Matrix random_irreducible(std::size_t n, std::uint64_t seed, double density = 0.4) {
  Gen gen(seed);
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  gen.shuffle(perm);
  const auto m = static_cast<Eigen::Index>(n);
  Matrix W = Matrix::Zero(m, m);
  for (std::size_t i = 0; i < n; ++i) {
    W(static_cast<Eigen::Index>(perm[i]), static_cast<Eigen::Index>(perm[(i + 1) % n])) = 0.1 + gen.unit();
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      if (W(i, j) == 0.0 && gen.unit() < density) W(i, j) = 0.1 + gen.unit();
    }
  }
  for (Eigen::Index i = 0; i < m; ++i) W.row(i) /= W.row(i).sum();
  return W;
}

/// Random doubly-stochastic matrix as a convex combination of permutations.
inline Matrix random_doubly_stochastic(std::size_t n, std::uint64_t seed, int terms = 4) {
  Gen gen(seed);
  const auto m = static_cast<Eigen::Index>(n);
  Matrix D = Matrix::Zero(m, m);
  std::vector<double> w(static_cast<std::size_t>(terms));
  double total = 0.0;
  for (auto& x : w) total += (x = 0.1 + gen.unit());
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (const double x : w) {
    gen.shuffle(perm);
    for (std::size_t i = 0; i < n; ++i) D(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(perm[i])) += x / total;
  }
  return D;
}

}  // namespace oracle
