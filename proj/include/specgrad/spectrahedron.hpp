#pragma once

// Euclidean projections onto the tau-scaled spectrahedron
// {X symmetric, X >= 0, Tr(X) = tau}, exact and rank-r truncated, plus the
// one-extra-eigenpair certificate that tells when the two coincide.

#include <cmath>
#include <cstdint>
#include <utility>

#include "specgrad/linalg.hpp"

namespace specgrad {

/// A point of the tau-spectrahedron stored in factored form V diag(lambda) V^T.
struct LowRankPsd {
  Index n = 0;
  double tau = 1.0;
  Vector eigenvalues;   // positive, non-increasing
  Matrix eigenvectors;  // n x k, orthonormal

  Index rank() const { return eigenvalues.size(); }
  double trace() const { return eigenvalues.sum(); }

  Matrix dense() const {
    if (rank() == 0) return Matrix::Zero(n, n);
    return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose();
  }

  /// <X, G> evaluated without materializing X.
  double inner(const Eigen::Ref<const Matrix>& g) const {
    double s = 0.0;
    for (Index i = 0; i < rank(); ++i) s += eigenvalues(i) * eigenvectors.col(i).dot(g * eigenvectors.col(i));
    return s;
  }

  static LowRankPsd from_factors(double tau, Vector values, Matrix vectors) {
    LowRankPsd x;
    x.n = vectors.rows();
    x.tau = tau;
    x.eigenvalues = std::move(values);
    x.eigenvectors = std::move(vectors);
    return x;
  }

  /// tau * u u^T for a unit vector u.
  static LowRankPsd rank_one(double tau, const Eigen::Ref<const Vector>& u) {
    return from_factors(tau, Vector::Constant(1, tau), u.normalized());
  }
};

/// Frobenius distance between two factored points.
inline double frobenius_distance(const LowRankPsd& a, const LowRankPsd& b) { return (a.dense() - b.dense()).norm(); }

/// Result of a truncated projection together with its certificate.
struct ProjectionOutcome {
  LowRankPsd point;
  bool certified = false;
  bool fallback_used = false;
  bool near_boundary = false;   // margin in [-1e-10 tau, 0)
  bool eigensolver_fallback = false;
  double certificate_margin = 0.0;  // sum_{i<=r} lambda_i - tau - r lambda_{r+1}
  Matrix basis;  // the r + 1 leading eigenvectors of the input, reusable as a warm start
};

inline constexpr double kNearBoundaryTol = 1e-10;

/// Tests sum_{i<=r} lambda_i >= tau + r lambda_{r+1} with zero slack; returns
/// (holds, margin).
inline std::pair<bool, double> certify_rank(const Eigen::Ref<const Vector>& top_eigs, double tau, Index r) {
  detail::require(r >= 1, "certify_rank: r must be positive");
  detail::require(top_eigs.size() == r + 1, "certify_rank: expected exactly r + 1 eigenvalues");
  detail::require(tau > 0.0, "certify_rank: tau must be positive");
  const double margin = top_eigs.head(r).sum() - tau - static_cast<double>(r) * top_eigs(r);
  return {margin >= 0.0, margin};
}

namespace detail {

// Keeps the strictly positive part of max(0, lambda_i - threshold).
inline LowRankPsd threshold_spectrum(const Vector& values, const Matrix& vectors, double tau) {
  const double lambda = simplex_threshold(values, tau);
  Index keep = 0;
  while (keep < values.size() && values(keep) - lambda > 0.0) ++keep;
  Vector kept = (values.head(keep).array() - lambda).matrix();
  return LowRankPsd::from_factors(tau, std::move(kept), vectors.leftCols(keep));
}

}  // namespace detail

/// Exact projection: full eigendecomposition, then eigenvalue thresholding.
inline LowRankPsd exact_project(const SymMatrix& a, double tau) {
  detail::require(tau > 0.0 && std::isfinite(tau), "exact_project: tau must be positive");
  const Spectrum s = full_eigh(a);
  return detail::threshold_spectrum(s.eigenvalues, s.eigenvectors, tau);
}

/// Projection assembled from an already computed full spectrum.
inline LowRankPsd project_from_spectrum(const Spectrum& s, double tau) {
  return detail::threshold_spectrum(s.eigenvalues, s.eigenvectors, tau);
}

/// Rank-r truncated projection: a rank-(r+1) partial eigendecomposition, the
/// top r eigenvalues projected onto the tau-simplex of R^r, and the
/// certificate from the (r+1)-th eigenvalue. With `fallback` set, an
/// uncertified result is replaced by exact_project. `warm` optionally seeds the
/// eigensolver with approximate leading eigenvectors.
inline ProjectionOutcome truncated_project(const SymMatrix& a, double tau, Index r, std::uint64_t seed,
                                           bool fallback = false, const Matrix& warm = Matrix()) {
  detail::require(tau > 0.0 && std::isfinite(tau), "truncated_project: tau must be positive");
  detail::require(r >= 1 && r < a.rows(), "truncated_project: r must satisfy 1 <= r < n");
  TopkOptions opt;
  if (warm.rows() == a.rows()) opt.start = warm;
  const Spectrum s = topk_eigh(a, r + 1, seed, opt);

  ProjectionOutcome out;
  out.basis = s.eigenvectors;
  out.eigensolver_fallback = s.dense_fallback;
  const auto [ok, margin] = certify_rank(s.eigenvalues, tau, r);
  out.certified = ok;
  out.certificate_margin = margin;
  out.near_boundary = !ok && margin >= -kNearBoundaryTol * tau;
  out.point = detail::threshold_spectrum(s.eigenvalues.head(r), s.eigenvectors.leftCols(r), tau);
  if (!ok && fallback) {
    out.point = exact_project(a, tau);
    out.fallback_used = true;
  }
  return out;
}

}  // namespace specgrad
