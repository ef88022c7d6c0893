#pragma once

// Dense symmetric eigensolvers (full and top-k), simplex thresholding and
// small matrix utilities shared by the projection and solver layers.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "specgrad/error.hpp"

namespace specgrad {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dense real symmetric matrix. Symmetry is validated at API boundaries.
using SymMatrix = Eigen::MatrixXd;

inline constexpr double kSymmetryTol = 1e-12;
inline constexpr double kEigResidualTol = 1e-10;
inline constexpr double kNumericalRankTol = 1e-9;

inline bool all_finite(const Eigen::Ref<const Matrix>& a) { return a.allFinite(); }

/// max_{ij} |A_ij - A_ji| relative to max(1, max |A_ij|).
inline double symmetry_defect(const Eigen::Ref<const Matrix>& a) {
  if (a.size() == 0) return 0.0;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() / scale;
}

inline void validate_symmetric(const Eigen::Ref<const Matrix>& a, const char* what) {
  detail::require(a.rows() == a.cols() && a.rows() > 0,
                  std::string(what) + ": matrix must be square and non-empty");
  detail::require(all_finite(a), std::string(what) + ": non-finite entries");
  detail::require(symmetry_defect(a) <= kSymmetryTol, std::string(what) + ": matrix is not symmetric");
}

/// Frobenius inner product.
inline double inner(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& b) {
  return a.cwiseProduct(b).sum();
}

/// Entrywise sign with sign(0) = 0.
inline Matrix sign_of(const Eigen::Ref<const Matrix>& a) {
  return a.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

/// A (partial) eigendecomposition with eigenvalues in non-increasing order.
struct Spectrum {
  Vector eigenvalues;   // k values, non-increasing
  Matrix eigenvectors;  // n x k, orthonormal columns
  double residual_tol = kEigResidualTol;
  bool dense_fallback = false;  // top-k solve did not converge and used full_eigh
  Index matvecs = 0;

  Index k() const { return eigenvalues.size(); }
  Index n() const { return eigenvectors.rows(); }

  /// max_i ||A v_i - lambda_i v_i|| / max(1, |lambda_1|).
  double relative_residual(const Eigen::Ref<const Matrix>& a) const {
    if (k() == 0) return 0.0;
    const Matrix r = a * eigenvectors - eigenvectors * eigenvalues.asDiagonal();
    return r.colwise().norm().maxCoeff() / std::max(1.0, std::abs(eigenvalues(0)));
  }

  /// Sum of lambda_i v_i v_i^T.
  Matrix reconstruct() const { return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose(); }
};

/// Complete eigendecomposition of a dense symmetric matrix.
inline Spectrum full_eigh(const SymMatrix& a) {
  validate_symmetric(a, "full_eigh");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a);
  if (solver.info() != Eigen::Success) throw InvalidInput("full_eigh: eigensolver failed");
  Spectrum s;
  s.eigenvalues = solver.eigenvalues().reverse();
  s.eigenvectors = solver.eigenvectors().rowwise().reverse();
  s.residual_tol = kEigResidualTol;
  s.matvecs = a.rows();
  return s;
}

struct TopkOptions {
  double tol = kEigResidualTol;
  Index block = 0;         // 0: min(n, k + 1)
  Index max_basis = 0;     // 0: min(n, max(4 * block, 48))
  Index matvec_factor = 10;  // cap = matvec_factor * n
  Matrix start;            // optional n x j initial directions (j <= block); the rest are random
};

namespace detail {

inline void fill_gaussian(Eigen::Ref<Matrix> out, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index j = 0; j < out.cols(); ++j)
    for (Index i = 0; i < out.rows(); ++i) out(i, j) = normal(rng);
}

// Appends the columns of `w` to the orthonormal basis q(:, 0:m), orthogonalizing
// twice against everything already present. Columns that collapse are replaced
// by random directions. Returns the new basis size.
inline Index extend_basis(Matrix& q, Index m, Matrix w, std::mt19937_64& rng) {
  const Index n = q.rows();
  for (Index j = 0; j < w.cols() && m < n; ++j) {
    Vector v = w.col(j);
    for (int attempt = 0; attempt < 3; ++attempt) {
      const double norm0 = v.norm();
      if (norm0 > 0.0 && std::isfinite(norm0)) {
        for (int pass = 0; pass < 2; ++pass) {
          if (m > 0) v.noalias() -= q.leftCols(m) * (q.leftCols(m).transpose() * v);
        }
        const double norm1 = v.norm();
        if (norm1 > 1e-10 * norm0) {
          q.col(m) = v / norm1;
          ++m;
          break;
        }
      }
      Matrix fresh(n, 1);
      fill_gaussian(fresh, rng);
      v = fresh.col(0);
    }
  }
  return m;
}

}  // namespace detail

/// The k algebraically largest eigenpairs of the symmetric operator `apply`
/// (a callable mapping an n x b block to A times that block).
///
/// Block Krylov iteration with full reorthogonalization and an explicit
/// Rayleigh-Ritz step on the accumulated basis; the basis is thick-restarted
/// onto the leading Ritz vectors when it reaches `max_basis`. Convergence
/// requires ||A v_i - theta_i v_i|| <= tol * max(1, |theta_1|) for all i <= k.
/// When the matrix-vector budget is exhausted the operator is materialized and
/// solved densely; `dense_fallback` reports that event.
template <class Apply>
Spectrum topk_eigh_op(Apply&& apply, Index n, Index k, std::uint64_t seed, const TopkOptions& opt = {}) {
  detail::require(n >= 1, "topk_eigh: empty operator");
  detail::require(k >= 1 && k <= n, "topk_eigh: k must satisfy 1 <= k <= n");

  const Index block = std::min(n, opt.block > 0 ? opt.block : k + 1);
  const Index max_basis = std::min(n, std::max(opt.max_basis > 0 ? opt.max_basis : std::max<Index>(4 * block, 48),
                                               k + block));
  const Index cap = opt.matvec_factor * n;

  std::mt19937_64 rng(seed);
  Matrix q(n, max_basis);
  Matrix aq(n, max_basis);
  Matrix h = Matrix::Zero(max_basis, max_basis);
  Index m = 0;
  Index matvecs = 0;

  Matrix start(n, block);
  detail::fill_gaussian(start, rng);
  if (opt.start.rows() == n) {
    const Index given = std::min(block, opt.start.cols());
    start.leftCols(given) = opt.start.leftCols(given);
  }
  Matrix pending = std::move(start);

  Spectrum out;
  out.residual_tol = opt.tol;

  while (true) {
    const Index m0 = m;
    m = detail::extend_basis(q, m, std::move(pending), rng);
    const Index added = m - m0;
    if (added > 0) {
      const Matrix fresh = apply(q.middleCols(m0, added));
      aq.middleCols(m0, added) = fresh;
      matvecs += added;
      const Matrix coupling = q.leftCols(m).transpose() * aq.middleCols(m0, added);
      h.block(0, m0, m, added) = coupling;
      h.block(m0, 0, added, m) = coupling.transpose();
    }

    Eigen::SelfAdjointEigenSolver<Matrix> small(0.5 * (h.topLeftCorner(m, m) + h.topLeftCorner(m, m).transpose()));
    const Vector theta = small.eigenvalues().reverse();
    const Matrix s = small.eigenvectors().rowwise().reverse();

    const Index want = std::min(m, std::max(k, block));
    const Matrix ritz = q.leftCols(m) * s.leftCols(want);
    const Matrix aritz = aq.leftCols(m) * s.leftCols(want);
    const Matrix resid = aritz - ritz * theta.head(want).asDiagonal();

    bool converged = m >= k;
    if (converged) {
      const double scale = std::max(1.0, std::abs(theta(0)));
      for (Index i = 0; i < k; ++i) {
        if (!(resid.col(i).norm() <= opt.tol * scale)) {
          converged = false;
          break;
        }
      }
    }
    if (converged) {
      out.eigenvalues = theta.head(k);
      out.eigenvectors = ritz.leftCols(k);
      out.matvecs = matvecs;
      return out;
    }
    if (m == n || added == 0 || matvecs >= cap) break;

    if (max_basis < n && m + block > max_basis) {
      // Thick restart onto the leading Ritz vectors.
      const Index keep = std::min(want, max_basis - block);
      q.leftCols(keep) = ritz.leftCols(keep);
      aq.leftCols(keep) = aritz.leftCols(keep);
      h.setZero();
      h.topLeftCorner(keep, keep) = theta.head(keep).asDiagonal();
      m = keep;
    }
    pending = resid.leftCols(std::min(block, want));
  }

  // Budget exhausted or breakdown: materialize and solve densely.
  Matrix dense = apply(Matrix::Identity(n, n));
  dense = 0.5 * (dense + dense.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> full(dense);
  out.eigenvalues = full.eigenvalues().reverse().head(k);
  out.eigenvectors = full.eigenvectors().rowwise().reverse().leftCols(k);
  out.dense_fallback = true;
  out.matvecs = matvecs + n;
  return out;
}

/// The k algebraically largest eigenpairs of a dense symmetric matrix.
inline Spectrum topk_eigh(const SymMatrix& a, Index k, std::uint64_t seed, const TopkOptions& opt = {}) {
  validate_symmetric(a, "topk_eigh");
  detail::require(k >= 1 && k <= a.rows(), "topk_eigh: k must satisfy 1 <= k <= n");
  return topk_eigh_op([&a](const auto& block) -> Matrix { return a * block; }, a.rows(), k, seed, opt);
}

/// The unique lambda with sum_i max(0, values_i - lambda) = tau, for
/// non-increasing `values` (sort-and-scan).
inline double simplex_threshold(const Eigen::Ref<const Vector>& values, double tau) {
  detail::require(values.size() > 0, "simplex_threshold: empty value list");
  detail::require(tau > 0.0 && std::isfinite(tau), "simplex_threshold: tau must be positive");
  detail::require(values.allFinite(), "simplex_threshold: non-finite value");
  const Index n = values.size();
  for (Index i = 1; i < n; ++i) {
    detail::require(values(i) <= values(i - 1) + 1e-12 * std::max(1.0, std::abs(values(i - 1))),
                    "simplex_threshold: values must be non-increasing");
  }
  double cumsum = 0.0;
  Index active = n;
  for (Index i = 0; i < n; ++i) {
    cumsum += values(i);
    const double candidate = (cumsum - tau) / static_cast<double>(i + 1);
    if (i + 1 == n || candidate >= values(i + 1)) {
      active = i + 1;
      break;
    }
  }
  // Recompute the active-set mean in pairwise fashion to tighten the residual.
  const double total = values.head(active).sum();
  return (total - tau) / static_cast<double>(active);
}

/// Euclidean projection onto {z >= 0, sum z = tau}.
inline Vector project_simplex(const Eigen::Ref<const Vector>& v, double tau) {
  detail::require(v.allFinite(), "project_simplex: non-finite input");
  Vector sorted = v;
  std::sort(sorted.data(), sorted.data() + sorted.size(), std::greater<>());
  const double lambda = simplex_threshold(sorted, tau);
  return (v.array() - lambda).max(0.0).matrix();
}

/// Count of values above kNumericalRankTol * tau.
inline Index numerical_rank(const Eigen::Ref<const Vector>& eigenvalues, double tau) {
  const double cut = kNumericalRankTol * tau;
  return static_cast<Index>((eigenvalues.array() > cut).count());
}

inline Index numerical_rank(const Spectrum& s, double tau) { return numerical_rank(s.eigenvalues, tau); }

/// Mixes a base seed with stream identifiers (splitmix64 finalizer).
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xbf58476d1ce4e5b9ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace specgrad
