#include <gtest/gtest.h>

#include <random>

#include "specgrad/linalg.hpp"

using namespace specgrad;

namespace {

Matrix random_symmetric(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Matrix a(n, n);
  detail::fill_gaussian(a, rng);
  return (0.5 * (a + a.transpose())).eval();
}

// Threshold by bisection on the monotone map lambda -> sum max(0, v - lambda).
double threshold_bisect(const Vector& v, double tau) {
  double lo = v.minCoeff() - tau, hi = v.maxCoeff();
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double s = (v.array() - mid).max(0.0).sum();
    (s > tau ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST(FullEigh, DiagonalMatrix) {
  Matrix a = Vector((Vector(3) << 2.0, 0.0, -1.0).finished()).asDiagonal();
  const Spectrum s = full_eigh(a);
  EXPECT_NEAR(s.eigenvalues(0), 2.0, 1e-14);
  EXPECT_NEAR(s.eigenvalues(1), 0.0, 1e-14);
  EXPECT_NEAR(s.eigenvalues(2), -1.0, 1e-14);
  EXPECT_NEAR(std::abs(s.eigenvectors(0, 0)), 1.0, 1e-14);
  EXPECT_NEAR(std::abs(s.eigenvectors(1, 1)), 1.0, 1e-14);
  EXPECT_NEAR(std::abs(s.eigenvectors(2, 2)), 1.0, 1e-14);
}

TEST(FullEigh, Identity) {
  const Spectrum s = full_eigh(Matrix::Identity(3, 3));
  for (Index i = 0; i < 3; ++i) EXPECT_NEAR(s.eigenvalues(i), 1.0, 1e-14);
}

TEST(FullEigh, ReconstructsRandomMatrix) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix a = random_symmetric(6, seed);
    const Spectrum s = full_eigh(a);
    EXPECT_LE((s.reconstruct() - a).norm(), 1e-9 * std::max(1.0, a.norm()));
    EXPECT_LE((s.eigenvectors.transpose() * s.eigenvectors - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-8);
    for (Index i = 0; i + 1 < 6; ++i) EXPECT_GE(s.eigenvalues(i), s.eigenvalues(i + 1));
  }
}

TEST(FullEigh, RejectsNonFiniteAndAsymmetric) {
  Matrix a = Matrix::Identity(3, 3);
  a(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(full_eigh(a), InvalidInput);
  Matrix b = Matrix::Identity(3, 3);
  b(0, 1) = 1.0;
  EXPECT_THROW(full_eigh(b), InvalidInput);
}

TEST(TopkEigh, DiagonalMatrix) {
  Matrix a = Vector((Vector(4) << 5.0, 3.0, 1.0, 0.0).finished()).asDiagonal();
  const Spectrum s = topk_eigh(a, 2, 1);
  EXPECT_NEAR(s.eigenvalues(0), 5.0, 1e-10);
  EXPECT_NEAR(s.eigenvalues(1), 3.0, 1e-10);
}

TEST(TopkEigh, RankOne) {
  Vector v = Vector::LinSpaced(7, 1.0, 7.0).normalized();
  const Spectrum s = topk_eigh(v * v.transpose(), 1, 3);
  EXPECT_NEAR(s.eigenvalues(0), 1.0, 1e-10);
  EXPECT_NEAR(std::abs(s.eigenvectors.col(0).dot(v)), 1.0, 1e-10);
}

TEST(TopkEigh, MatchesFullOnRandomMatrices) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix a = random_symmetric(50, 100 + seed);
    const Spectrum top = topk_eigh(a, 5, seed);
    const Spectrum full = full_eigh(a);
    for (Index i = 0; i < 5; ++i) EXPECT_NEAR(top.eigenvalues(i), full.eigenvalues(i), 1e-8);
    EXPECT_LE(top.relative_residual(a), 1e-10);
  }
}

TEST(TopkEigh, DeterministicForSeed) {
  const Matrix a = random_symmetric(40, 5);
  const Spectrum s1 = topk_eigh(a, 3, 11);
  const Spectrum s2 = topk_eigh(a, 3, 11);
  EXPECT_EQ(s1.eigenvalues, s2.eigenvalues);
  EXPECT_EQ(s1.eigenvectors, s2.eigenvectors);
}

TEST(TopkEigh, RejectsTooManyPairs) {
  EXPECT_THROW(topk_eigh(Matrix::Identity(3, 3), 4, 0), InvalidInput);
  EXPECT_THROW(topk_eigh(Matrix::Identity(3, 3), 0, 0), InvalidInput);
}

TEST(TopkEigh, DegenerateClusterKeepsEigenvalues) {
  Matrix a = Vector((Vector(6) << 2.0, 2.0, 2.0, 1.0, 0.0, -1.0).finished()).asDiagonal();
  const Spectrum s = topk_eigh(a, 2, 4);
  EXPECT_NEAR(s.eigenvalues(0), 2.0, 1e-10);
  EXPECT_NEAR(s.eigenvalues(1), 2.0, 1e-10);
}

TEST(TopkEigh, WarmStartGivesSameEigenvalues) {
  const Matrix a = random_symmetric(60, 8);
  const Spectrum cold = topk_eigh(a, 2, 1);
  TopkOptions opt;
  opt.start = cold.eigenvectors;
  const Spectrum warm = topk_eigh(a, 2, 1, opt);
  EXPECT_NEAR(warm.eigenvalues(0), cold.eigenvalues(0), 1e-9);
  EXPECT_NEAR(warm.eigenvalues(1), cold.eigenvalues(1), 1e-9);
  EXPECT_LE(warm.matvecs, cold.matvecs);
}

TEST(SimplexThreshold, HandExamples) {
  EXPECT_NEAR(simplex_threshold((Vector(3) << 2, 0, 0).finished(), 1.0), 1.0, 1e-15);
  EXPECT_NEAR(simplex_threshold((Vector(2) << 1, 1).finished(), 1.0), 0.5, 1e-15);
  EXPECT_NEAR(simplex_threshold((Vector(2) << 3, 1).finished(), 1.0), 2.0, 1e-15);
}

TEST(SimplexThreshold, ResidualAndMonotonicity) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix raw(12, 1);
    detail::fill_gaussian(raw, rng);
    Vector v = raw.col(0);
    std::sort(v.data(), v.data() + v.size(), std::greater<>());
    double prev = std::numeric_limits<double>::infinity();
    for (double tau : {0.1, 0.5, 1.0, 2.0, 5.0}) {
      const double l = simplex_threshold(v, tau);
      EXPECT_NEAR((v.array() - l).max(0.0).sum(), tau, 1e-12 * tau);
      EXPECT_NEAR(l, threshold_bisect(v, tau), 1e-10);
      EXPECT_LE(l, prev);
      prev = l;
    }
  }
}

TEST(SimplexThreshold, RejectsBadInput) {
  EXPECT_THROW(simplex_threshold(Vector(), 1.0), InvalidInput);
  EXPECT_THROW(simplex_threshold((Vector(2) << 1, 2).finished(), 1.0), InvalidInput);
  EXPECT_THROW(simplex_threshold((Vector(2) << 2, 1).finished(), 0.0), InvalidInput);
}

TEST(ProjectSimplex, Examples) {
  const Vector a = project_simplex((Vector(2) << 0.2, 0.8).finished(), 1.0);
  EXPECT_NEAR(a(0), 0.2, 1e-15);
  EXPECT_NEAR(a(1), 0.8, 1e-15);
  const Vector b = project_simplex((Vector(2) << 2, 0).finished(), 1.0);
  EXPECT_NEAR(b(0), 1.0, 1e-15);
  EXPECT_NEAR(b(1), 0.0, 1e-15);
}

// Exhaustive search over active sets: for every subset S, the candidate
// max(0, v - t_S) with t_S = (sum_S v - tau) / |S| is feasible iff consistent;
// the projection is the closest feasible candidate.
TEST(ProjectSimplex, MatchesExhaustiveActiveSetSearch) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix raw(10, 1);
    detail::fill_gaussian(raw, rng);
    const Vector v = raw.col(0);
    const double tau = 1.5;
    double best = std::numeric_limits<double>::infinity();
    Vector best_x;
    for (unsigned mask = 1; mask < (1u << 10); ++mask) {
      double sum = 0.0;
      int count = 0;
      for (int i = 0; i < 10; ++i)
        if (mask & (1u << i)) {
          sum += v(i);
          ++count;
        }
      const double t = (sum - tau) / count;
      Vector x = Vector::Zero(10);
      bool ok = true;
      for (int i = 0; i < 10; ++i) {
        if (mask & (1u << i)) {
          x(i) = v(i) - t;
          ok = ok && x(i) >= 0.0;
        }
      }
      if (!ok) continue;
      const double d = (x - v).squaredNorm();
      if (d < best) {
        best = d;
        best_x = x;
      }
    }
    const Vector p = project_simplex(v, tau);
    EXPECT_LE((p - best_x).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_NEAR(p.sum(), tau, 1e-10);
    EXPECT_GE(p.minCoeff(), 0.0);
  }
}

TEST(NumericalRank, Examples) {
  EXPECT_EQ(numerical_rank((Vector(3) << 1, 1e-15, 0).finished(), 1.0), 1);
  EXPECT_EQ(numerical_rank((Vector(2) << 0.5, 0.5).finished(), 1.0), 2);
}
