#pragma once

// Property suites behind `specgrad check`. Each compares library routines to
// a deliberately naive reference implementation on seeded random inputs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "specgrad/linalg.hpp"
#include "specgrad/problems.hpp"
#include "specgrad/saddle.hpp"
#include "specgrad/spectrahedron.hpp"

namespace specgrad {

struct CheckOutcome {
  std::string name;
  bool passed = false;
  double worst = 0.0;      // largest observed error (or violation count)
  double tolerance = 0.0;
  std::size_t cases = 0;
};

namespace oracle {

/// Tries every active-set size j and returns the threshold of the one that is
/// self-consistent: v_j > t_j and v_{j+1} <= t_j with t_j = (sum_{i<=j} v_i - tau) / j.
inline double threshold_by_scan(std::vector<double> v, double tau) {
  std::sort(v.begin(), v.end(), std::greater<>());
  double prefix = 0.0;
  for (std::size_t j = 1; j <= v.size(); ++j) {
    prefix += v[j - 1];
    const double t = (prefix - tau) / static_cast<double>(j);
    const bool inside = v[j - 1] > t;
    const bool next_out = j == v.size() || v[j] <= t;
    if (inside && next_out) return t;
  }
  return (prefix - tau) / static_cast<double>(v.size());
}

/// Dense reference projection onto tau*S_n.
inline Matrix project(const Matrix& a, double tau) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  const Vector vals = es.eigenvalues();
  const double t = threshold_by_scan(std::vector<double>(vals.data(), vals.data() + vals.size()), tau);
  const Vector kept = (vals.array() - t).max(0.0).matrix();
  return es.eigenvectors() * kept.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace oracle

/// Random symmetric matrix whose spectrum cycles through several shapes:
/// Gaussian, a dominant spike, a clustered top, low rank with negative tail,
/// and a tiny-scale spread.
inline Matrix random_mixed_symmetric(Index n, std::size_t variant, std::mt19937_64& rng) {
  Matrix g(n, n);
  detail::fill_gaussian(g, rng);
  const Eigen::HouseholderQR<Matrix> qr(g);
  const Matrix q = qr.householderQ();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Vector vals(n);
  switch (variant % 5) {
    case 0:
      for (Index i = 0; i < n; ++i) vals(i) = normal(rng);
      break;
    case 1:
      for (Index i = 0; i < n; ++i) vals(i) = 0.1 * normal(rng);
      vals(0) = 1.5 + unit(rng);
      break;
    case 2: {
      const double top = 0.5 + unit(rng);
      for (Index i = 0; i < n; ++i) vals(i) = i < 3 ? top + 1e-3 * normal(rng) : 0.2 * normal(rng);
      break;
    }
    case 3:
      for (Index i = 0; i < n; ++i) vals(i) = i < 2 ? 1.0 + unit(rng) : -unit(rng);
      break;
    default:
      for (Index i = 0; i < n; ++i) vals(i) = 1e-3 * normal(rng);
      break;
  }
  Matrix a = q * vals.asDiagonal() * q.transpose();
  a = 0.5 * (a + a.transpose()).eval();
  return a;
}

/// Exact projection versus the active-set oracle, plus feasibility,
/// idempotence and nonexpansiveness.
inline std::vector<CheckOutcome> check_projections(std::uint64_t seed, std::size_t count = 500, Index n = 20) {
  std::mt19937_64 rng(seed);
  CheckOutcome oracle_eq{"exact_project matches active-set oracle", true, 0.0, 1e-8, count};
  CheckOutcome feasible{"outputs have trace tau and are PSD", true, 0.0, 1e-8, count};
  CheckOutcome idempotent{"projection is idempotent", true, 0.0, 1e-9, count};
  CheckOutcome nonexpansive{"projection is nonexpansive", true, 0.0, 1e-8, count};
  std::uniform_real_distribution<double> tau_dist(0.5, 3.0);

  for (std::size_t i = 0; i < count; ++i) {
    const Matrix a = random_mixed_symmetric(n, i, rng);
    const Matrix b = random_mixed_symmetric(n, i + 1, rng);
    const double tau = tau_dist(rng);
    const LowRankPsd pa = exact_project(a, tau);
    const Matrix da = pa.dense();

    oracle_eq.worst = std::max(oracle_eq.worst, (da - oracle::project(a, tau)).norm());

    const double min_eig = pa.rank() > 0 ? pa.eigenvalues.minCoeff() : 0.0;
    const double feas = std::max(std::abs(da.trace() - tau) / tau, std::max(0.0, -min_eig) / tau);
    feasible.worst = std::max(feasible.worst, feas);

    idempotent.worst = std::max(idempotent.worst, (exact_project(da, tau).dense() - da).norm());

    const double expand = (da - exact_project(b, tau).dense()).norm() - (a - b).norm();
    nonexpansive.worst = std::max(nonexpansive.worst, expand);
  }
  std::vector<CheckOutcome> out{oracle_eq, feasible, idempotent, nonexpansive};
  for (auto& o : out) o.passed = o.worst <= o.tolerance;
  return out;
}

/// Certificate soundness: certified truncated projections equal the exact
/// projection; uncertified-without-fallback points have rank <= r.
inline std::vector<CheckOutcome> check_certificates(std::uint64_t seed, std::size_t count = 500, Index n = 20) {
  std::mt19937_64 rng(seed);
  CheckOutcome sound{"certified truncated projection equals exact", true, 0.0, 1e-8, 0};
  CheckOutcome violations{"certificate soundness violations", true, 0.0, 0.0, count};
  CheckOutcome consistent{"certified iff margin >= 0", true, 0.0, 0.0, count};
  CheckOutcome rank_bound{"truncated output rank <= r", true, 0.0, 0.0, count};
  CheckOutcome fallback{"fallback reproduces exact projection", true, 0.0, 1e-8, 0};

  for (std::size_t i = 0; i < count; ++i) {
    const Matrix a = random_mixed_symmetric(n, i, rng);
    const Index r = 1 + static_cast<Index>(i % 3);
    const double tau = 1.0;
    const ProjectionOutcome t = truncated_project(a, tau, r, mix_seed(seed, i));
    const Matrix exact = oracle::project(a, tau);
    if ((t.certificate_margin >= 0.0) != t.certified) consistent.worst += 1.0;
    if (numerical_rank(t.point.eigenvalues, tau) > r) rank_bound.worst += 1.0;
    if (t.certified) {
      ++sound.cases;
      const double err = (t.point.dense() - exact).norm();
      sound.worst = std::max(sound.worst, err);
      if (err > sound.tolerance) violations.worst += 1.0;
    } else {
      ++fallback.cases;
      const ProjectionOutcome f = truncated_project(a, tau, r, mix_seed(seed, i), true);
      fallback.worst = std::max(fallback.worst, (f.point.dense() - exact).norm());
    }
  }
  std::vector<CheckOutcome> out{sound, violations, consistent, rank_bound, fallback};
  for (auto& o : out) o.passed = o.worst <= o.tolerance;
  return out;
}

/// Small instances of every benchmark problem for finite-difference checks.
inline std::vector<ProblemInstance> gradient_check_instances(std::uint64_t seed) {
  std::vector<ProblemInstance> out;
  out.push_back(gen_sparse_pca(12, 1.0, NoiseKind::Uniform01, 0.05, seed));
  out.push_back(gen_lowrank_sparse(12, 2, 2.4, 0.01, seed));
  out.push_back(gen_robust_pca(12, 1, seed));
  out.push_back(gen_phase_sync(6, 20.0, seed));
  out.push_back(gen_lin_constrained(10, 8, 2.0, seed));
  return out;
}

inline std::vector<CheckOutcome> check_gradient_suite(std::uint64_t seed, std::size_t samples = 20) {
  std::vector<CheckOutcome> out;
  for (const ProblemInstance& inst : gradient_check_instances(seed)) {
    CheckOutcome o{"finite differences: " + inst.problem->name(), true, 0.0, 1e-5, samples};
    o.worst = check_gradients(*inst.problem, samples, mix_seed(seed, 11));
    o.passed = o.worst <= o.tolerance;
    out.push_back(o);
  }
  return out;
}

}  // namespace specgrad
