#pragma once

// Projected subgradient steps over the spectrahedron and the sparse PCA
// instance on which a single step from a near-optimal rank-one point already
// leaves the rank-one manifold.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "specgrad/linalg.hpp"
#include "specgrad/spectrahedron.hpp"

namespace specgrad {

/// Pi[X - eta G] for an explicit subgradient G.
inline LowRankPsd projected_subgradient_step(const LowRankPsd& x, const SymMatrix& g, double eta) {
  detail::require(eta >= 0.0 && std::isfinite(eta), "projected_subgradient_step: eta must be non-negative");
  Matrix p = x.dense() - eta * g;
  p = 0.5 * (p + p.transpose()).eval();
  return exact_project(p, x.tau);
}

/// One step on min <X, -M> + lambda ||X||_1 with the subgradient -M + lambda sign(X).
inline LowRankPsd subgradient_step_sparse_pca(const SymMatrix& m_hat, double lambda, const LowRankPsd& x, double eta) {
  detail::require(m_hat.rows() == x.n && m_hat.cols() == x.n, "subgradient_step_sparse_pca: size mismatch");
  const Matrix g = -m_hat + lambda * sign_of(x.dense());
  return projected_subgradient_step(x, g, eta);
}

enum class VChoice { ExactZ, Perturbed };

/// g(X) = -<z z^T + zp zp^T, X> + ||X||_1 / (2k) with z uniform on the first k
/// coordinates and zp uniform on the remaining n - k.
struct CounterexampleInstance {
  Index n = 0;
  Index k = 0;
  double eta = 0.0;
  Vector z;
  Vector z_perp;
  Vector v;

  Matrix m_hat() const { return z * z.transpose() + z_perp * z_perp.transpose(); }
  double penalty() const { return 1.0 / (2.0 * static_cast<double>(k)); }
  double alignment_bound() const { return 1.0 - 1.0 / (2.0 * static_cast<double>(k * k)); }
  double objective(const Matrix& x) const { return -inner(m_hat(), x) + penalty() * x.cwiseAbs().sum(); }
};

/// Builds the instance; a perturbed v is z plus Gaussian noise on the support
/// of z, renormalized and resampled until <z, v>^2 >= 1 - 1/(2k^2).
inline CounterexampleInstance make_counterexample(Index n, Index k, double eta, VChoice choice, std::uint64_t seed) {
  detail::require(k >= 1 && 4 * k <= n, "counterexample: need 1 <= k <= n/4");
  detail::require(eta > 0.0 && eta < 2.0 / 3.0, "counterexample: eta must satisfy 0 < eta < 2/3");
  CounterexampleInstance c;
  c.n = n;
  c.k = k;
  c.eta = eta;
  const double kd = static_cast<double>(k);
  c.z = Vector::Zero(n);
  c.z.head(k).setConstant(1.0 / std::sqrt(kd));
  c.z_perp = Vector::Zero(n);
  c.z_perp.tail(n - k).setConstant(1.0 / std::sqrt(static_cast<double>(n - k)));

  if (choice == VChoice::ExactZ) {
    c.v = c.z;
    return c;
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.3 / (kd * std::sqrt(kd)));
  for (;;) {
    Vector v = c.z;
    for (Index i = 0; i < k; ++i) v(i) += g(rng);
    v.normalize();
    const double a = c.z.dot(v);
    if (a * a >= c.alignment_bound()) {
      c.v = v;
      return c;
    }
  }
}

struct BlowupResult {
  Index rank = 0;
  Vector spectrum;  // eigenvalues of the projected point, non-increasing
  LowRankPsd point;
};

/// One projected subgradient step from v v^T with the subgradient
/// -z z^T - zp zp^T + sign(v v^T) / (2k); reports the rank of the result.
inline BlowupResult rank_blowup_step(const CounterexampleInstance& c) {
  const LowRankPsd start = LowRankPsd::rank_one(1.0, c.v);
  BlowupResult out;
  out.point = subgradient_step_sparse_pca(c.m_hat(), c.penalty(), start, c.eta);
  out.spectrum = out.point.eigenvalues;
  out.rank = numerical_rank(out.point.eigenvalues, 1.0);
  return out;
}

inline BlowupResult rank_blowup_experiment(Index n, Index k, double eta, VChoice choice, std::uint64_t seed) {
  return rank_blowup_step(make_counterexample(n, k, eta, choice, seed));
}

}  // namespace specgrad
