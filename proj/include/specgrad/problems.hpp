#pragma once

// Seeded benchmark instances: sparse PCA, low-rank and sparse covariance
// recovery, robust PCA, phase synchronization (real 2n embedding) and
// linearly constrained low-rank estimation.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <string>

#include <Eigen/Eigenvalues>

#include "specgrad/dual.hpp"
#include "specgrad/linalg.hpp"
#include "specgrad/saddle.hpp"
#include "specgrad/spectrahedron.hpp"

namespace specgrad {

enum class ProblemKind { SparsePca, LowRankSparse, RobustPca, PhaseSync, LinConstrained };
enum class NoiseKind { Uniform01, GaussianHalf };

inline std::string to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::SparsePca: return "sparse_pca";
    case ProblemKind::LowRankSparse: return "lowrank_sparse";
    case ProblemKind::RobustPca: return "robust_pca";
    case ProblemKind::PhaseSync: return "phase_sync";
    case ProblemKind::LinConstrained: return "lin_constrained";
  }
  return "unknown";
}

inline ProblemKind parse_problem_kind(const std::string& s) {
  for (ProblemKind k : {ProblemKind::SparsePca, ProblemKind::LowRankSparse, ProblemKind::RobustPca,
                        ProblemKind::PhaseSync, ProblemKind::LinConstrained}) {
    if (to_string(k) == s) return k;
  }
  throw InvalidInput("unknown problem kind '" + s + "'");
}

inline std::string to_string(NoiseKind k) { return k == NoiseKind::Uniform01 ? "uniform01" : "gaussian_half"; }

inline NoiseKind parse_noise_kind(const std::string& s) {
  if (s == "uniform01") return NoiseKind::Uniform01;
  if (s == "gaussian_half") return NoiseKind::GaussianHalf;
  throw InvalidInput("unknown noise kind '" + s + "' (expected uniform01 | gaussian_half)");
}

namespace detail {

inline double min_eigenvalue(const Matrix& g) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

inline Vector normalized_or_zero(const Vector& v) {
  const double nv = v.norm();
  return nv > 0.0 ? Vector(v / nv) : Vector::Zero(v.size());
}

inline Vector flatten(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

}  // namespace detail

/// f(X, Y) = <X, -M> + lambda <X, Y> over the infinity-ball.
class SparsePcaProblem : public SaddleProblem {
 public:
  SparsePcaProblem(Matrix m, double lambda, double tau) : m_(std::move(m)), lambda_(lambda), tau_(tau) {}

  std::string name() const override { return "sparse_pca"; }
  Index dim() const override { return m_.rows(); }
  double trace_radius() const override { return tau_; }
  DualDomain dual_domain() const override { return MatInfBall{dim()}; }
  SmoothnessConstants constants() const override { return {0.0, 0.0, lambda_, lambda_}; }

  double value(const Matrix& x, const DualPoint& y) const override {
    return -inner(x, m_) + lambda_ * inner(x, y.matrix());
  }
  Matrix grad_x(const Matrix&, const DualPoint& y) const override { return -m_ + lambda_ * y.matrix(); }
  Vector grad_y(const Matrix& x, const DualPoint&) const override { return lambda_ * detail::flatten(x); }
  double max_over_dual(const Matrix& x) const override {
    return -inner(x, m_) + lambda_ * x.cwiseAbs().sum();
  }
  double min_over_primal(const DualPoint& y) const override {
    return tau_ * detail::min_eigenvalue(grad_x(Matrix(), y));
  }

  const Matrix& observation() const { return m_; }
  double lambda() const { return lambda_; }

 private:
  Matrix m_;
  double lambda_;
  double tau_;
};

/// f(X, Y) = 1/2 ||X - M||_F^2 + lambda <X, Y> over the infinity-ball.
class LowRankSparseProblem : public SaddleProblem {
 public:
  LowRankSparseProblem(Matrix m, double lambda, double tau) : m_(std::move(m)), lambda_(lambda), tau_(tau) {}

  std::string name() const override { return "lowrank_sparse"; }
  Index dim() const override { return m_.rows(); }
  double trace_radius() const override { return tau_; }
  DualDomain dual_domain() const override { return MatInfBall{dim()}; }
  SmoothnessConstants constants() const override { return {1.0, 0.0, lambda_, lambda_}; }

  double value(const Matrix& x, const DualPoint& y) const override {
    return 0.5 * (x - m_).squaredNorm() + lambda_ * inner(x, y.matrix());
  }
  Matrix grad_x(const Matrix& x, const DualPoint& y) const override { return x - m_ + lambda_ * y.matrix(); }
  Vector grad_y(const Matrix& x, const DualPoint&) const override { return lambda_ * detail::flatten(x); }
  double max_over_dual(const Matrix& x) const override {
    return 0.5 * (x - m_).squaredNorm() + lambda_ * x.cwiseAbs().sum();
  }
  // The minimizer is the projection of M - lambda Y.
  double min_over_primal(const DualPoint& y) const override {
    const Matrix target = m_ - lambda_ * y.matrix();
    return value(exact_project(target, tau_).dense(), y);
  }

 private:
  Matrix m_;
  double lambda_;
  double tau_;
};

/// f(X, Y) = <X - M, Y> over the infinity-ball, i.e. min ||X - M||_1.
class RobustPcaProblem : public SaddleProblem {
 public:
  RobustPcaProblem(Matrix m, double tau) : m_(std::move(m)), tau_(tau) {}

  std::string name() const override { return "robust_pca"; }
  Index dim() const override { return m_.rows(); }
  double trace_radius() const override { return tau_; }
  DualDomain dual_domain() const override { return MatInfBall{dim()}; }
  SmoothnessConstants constants() const override { return {0.0, 0.0, 1.0, 1.0}; }

  double value(const Matrix& x, const DualPoint& y) const override { return inner(x - m_, y.matrix()); }
  Matrix grad_x(const Matrix&, const DualPoint& y) const override { return y.matrix(); }
  Vector grad_y(const Matrix& x, const DualPoint&) const override { return detail::flatten(x - m_); }
  double max_over_dual(const Matrix& x) const override { return (x - m_).cwiseAbs().sum(); }
  double min_over_primal(const DualPoint& y) const override {
    const Matrix ym = y.matrix();
    return tau_ * detail::min_eigenvalue(ym) - inner(m_, ym);
  }

 private:
  Matrix m_;
  double tau_;
};

/// Real embedding of the complex Hermitian map H -> [[Re H, -Im H], [Im H, Re H]].
inline Matrix embed_hermitian(const Eigen::MatrixXcd& h) {
  const Index n = h.rows();
  Matrix out(2 * n, 2 * n);
  out.topLeftCorner(n, n) = h.real();
  out.topRightCorner(n, n) = -h.imag();
  out.bottomLeftCorner(n, n) = h.imag();
  out.bottomRightCorner(n, n) = h.real();
  return out;
}

/// Largest deviation of a 2n x 2n matrix from the embedding block pattern.
inline double embedding_residual(const Matrix& a) {
  detail::require(a.rows() == a.cols() && a.rows() % 2 == 0, "embedding_residual: need an even square matrix");
  const Index n = a.rows() / 2;
  const double re = (a.topLeftCorner(n, n) - a.bottomRightCorner(n, n)).cwiseAbs().maxCoeff();
  const double im = (a.topRightCorner(n, n) + a.bottomLeftCorner(n, n)).cwiseAbs().maxCoeff();
  return std::max(re, im);
}

/// Phase synchronization over the real embedding (ambient 2n, trace 2n):
///   f(X, y) = 1/2 <X, -M> + lambda <d(X) - 1, y>,  d_j = (X_jj + X_{n+j,n+j}) / 2.
/// On embedded points both terms equal their complex counterparts.
class PhaseSyncProblem : public SaddleProblem {
 public:
  PhaseSyncProblem(Matrix m_embedded, double lambda)
      : m_(std::move(m_embedded)), lambda_(lambda), n_(m_.rows() / 2) {}

  std::string name() const override { return "phase_sync"; }
  Index dim() const override { return 2 * n_; }
  double trace_radius() const override { return 2.0 * static_cast<double>(n_); }
  DualDomain dual_domain() const override { return VecL2Ball{n_}; }
  // The diagonal-extraction map has operator norm at most 1.
  SmoothnessConstants constants() const override { return {0.0, 0.0, lambda_, lambda_}; }

  Vector diag_part(const Matrix& x) const {
    return 0.5 * (x.diagonal().head(n_) + x.diagonal().tail(n_));
  }
  double diag_residual(const Matrix& x) const { return (diag_part(x) - Vector::Ones(n_)).norm(); }

  double value(const Matrix& x, const DualPoint& y) const override {
    return -0.5 * inner(x, m_) + lambda_ * (diag_part(x) - Vector::Ones(n_)).dot(y.values);
  }
  Matrix grad_x(const Matrix&, const DualPoint& y) const override {
    Matrix g = -0.5 * m_;
    for (Index j = 0; j < n_; ++j) {
      g(j, j) += 0.5 * lambda_ * y.values(j);
      g(n_ + j, n_ + j) += 0.5 * lambda_ * y.values(j);
    }
    return g;
  }
  Vector grad_y(const Matrix& x, const DualPoint&) const override {
    return lambda_ * (diag_part(x) - Vector::Ones(n_));
  }
  double max_over_dual(const Matrix& x) const override {
    return -0.5 * inner(x, m_) + lambda_ * diag_residual(x);
  }
  double min_over_primal(const DualPoint& y) const override {
    return trace_radius() * detail::min_eigenvalue(grad_x(Matrix(), y)) - lambda_ * y.values.sum();
  }

 private:
  Matrix m_;
  double lambda_;
  Index n_;
};

/// f(X, y) = <X, -M> + lambda <A(X) - b, y> over the l2-ball, A(X)_i = v_i^T X v_i.
class LinConstrainedProblem : public SaddleProblem {
 public:
  LinConstrainedProblem(Matrix m, Matrix v, Vector b, double lambda, double tau, double a_norm)
      : m_(std::move(m)), v_(std::move(v)), b_(std::move(b)), lambda_(lambda), tau_(tau), a_norm_(a_norm) {}

  std::string name() const override { return "lin_constrained"; }
  Index dim() const override { return m_.rows(); }
  double trace_radius() const override { return tau_; }
  DualDomain dual_domain() const override { return VecL2Ball{v_.cols()}; }
  SmoothnessConstants constants() const override {
    return {0.0, 0.0, lambda_ * a_norm_, lambda_ * a_norm_};
  }

  Vector apply(const Matrix& x) const { return (v_.array() * (x * v_).array()).colwise().sum().transpose(); }
  Matrix adjoint(const Vector& y) const { return v_ * y.asDiagonal() * v_.transpose(); }
  double constraint_residual(const Matrix& x) const { return (apply(x) - b_).norm(); }

  double value(const Matrix& x, const DualPoint& y) const override {
    return -inner(x, m_) + lambda_ * (apply(x) - b_).dot(y.values);
  }
  Matrix grad_x(const Matrix&, const DualPoint& y) const override { return -m_ + lambda_ * adjoint(y.values); }
  Vector grad_y(const Matrix& x, const DualPoint&) const override { return lambda_ * (apply(x) - b_); }
  double max_over_dual(const Matrix& x) const override {
    return -inner(x, m_) + lambda_ * constraint_residual(x);
  }
  double min_over_primal(const DualPoint& y) const override {
    return tau_ * detail::min_eigenvalue(grad_x(Matrix(), y)) - lambda_ * b_.dot(y.values);
  }

  const Vector& rhs() const { return b_; }
  double operator_norm() const { return a_norm_; }

 private:
  Matrix m_;
  Matrix v_;
  Vector b_;
  double lambda_;
  double tau_;
  double a_norm_;
};

/// Generator parameters; raw matrices are always regenerated from these.
/// How the target SNR sets the noise amplitude. Amplitude: ||noise||_F =
/// ||M0||_F / SNR (the c formula read literally). Squared: ||M0||_F^2 /
/// ||noise||_F^2 = SNR, the convention the benchmark rows follow.
enum class SnrConvention { Amplitude, Squared };

inline std::string to_string(SnrConvention c) { return c == SnrConvention::Amplitude ? "amplitude" : "squared"; }

inline SnrConvention parse_snr_convention(const std::string& s) {
  if (s == "amplitude") return SnrConvention::Amplitude;
  if (s == "squared") return SnrConvention::Squared;
  throw InvalidInput("unknown SNR convention '" + s + "' (expected amplitude | squared)");
}

struct ProblemSpec {
  ProblemKind kind = ProblemKind::SparsePca;
  Index n = 100;
  Index r = 1;                      // rank of the ground truth (complex rank for phase sync)
  double snr = 1.0;                 // target for sparse PCA / low-rank and sparse
  NoiseKind noise = NoiseKind::Uniform01;
  std::optional<double> lambda;     // defaults from the benchmark tables
  Index m = 0;                      // constraints; 0 means m = n
  std::uint64_t seed = 0;
  SnrConvention snr_convention = SnrConvention::Amplitude;
};

struct ProblemInstance {
  ProblemSpec spec;
  Index dim = 0;             // ambient dimension (2n for phase sync)
  Index rank = 1;            // truncation rank used by the solver
  double lambda = 0.0;
  double tau = 1.0;
  double noise_scale = 0.0;  // the constant c of the noise model
  double target_snr = std::numeric_limits<double>::quiet_NaN();
  double measured_snr = std::numeric_limits<double>::quiet_NaN();  // ||M0||_F^2 / ||noise||_F^2
  Matrix m0;                 // ground truth (embedded for phase sync)
  Matrix m;                  // observation
  std::shared_ptr<const SaddleProblem> problem;
  LowRankPsd x1;
  DualPoint y1;
  double default_eta = 0.0;
  std::size_t default_iterations = 0;
};

namespace detail {

inline constexpr std::array<Index, 4> kTableDims = {100, 200, 400, 600};

inline std::optional<std::size_t> table_column(Index n) {
  for (std::size_t i = 0; i < kTableDims.size(); ++i)
    if (kTableDims[i] == n) return i;
  return std::nullopt;
}

inline bool same(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); }

// Entry law of the sparse factors: 0 with probability 0.9, otherwise U{1..10}.
inline double sparse_entry(std::mt19937_64& rng) {
  std::bernoulli_distribution nonzero(0.1);
  std::uniform_int_distribution<int> level(1, 10);
  return nonzero(rng) ? static_cast<double>(level(rng)) : 0.0;
}

inline Matrix noise_matrix(Index n, NoiseKind kind, std::mt19937_64& rng) {
  Matrix out(n, n);
  if (kind == NoiseKind::Uniform01) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < n; ++i) out(i, j) = u(rng);
  } else {
    std::normal_distribution<double> g(0.5, 1.0);
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < n; ++i) out(i, j) = g(rng);
  }
  return out;
}

inline Matrix sym_sum(const Matrix& a) { return (a + a.transpose()).eval(); }

/// The amplitude ratio ||M0||_F / ||noise||_F that realizes `snr`.
inline double amplitude_snr(double snr, SnrConvention c) {
  return c == SnrConvention::Squared ? std::sqrt(snr) : snr;
}

inline double measured_snr(const Matrix& m0, const Matrix& noise) {
  const double nn = noise.squaredNorm();
  return nn > 0.0 ? m0.squaredNorm() / nn : std::numeric_limits<double>::infinity();
}

}  // namespace detail

/// Penalty used by the published benchmark rows, when (kind, n, ...) matches one.
inline std::optional<double> table_lambda(const ProblemSpec& s) {
  const auto col = detail::table_column(s.n);
  switch (s.kind) {
    case ProblemKind::SparsePca: {
      if (!col) return std::nullopt;
      static constexpr double uni1[] = {0.008, 0.004, 0.002, 0.0013};
      static constexpr double uni005[] = {0.04, 0.02, 0.01, 0.0067};
      static constexpr double gau1[] = {0.006, 0.003, 0.0015, 0.001};
      static constexpr double gau005[] = {0.04, 0.02, 0.01, 0.005};
      const bool uniform = s.noise == NoiseKind::Uniform01;
      if (detail::same(s.snr, 1.0)) return uniform ? uni1[*col] : gau1[*col];
      if (detail::same(s.snr, 0.05)) return uniform ? uni005[*col] : gau005[*col];
      return std::nullopt;
    }
    case ProblemKind::LowRankSparse: {
      if (!col) return std::nullopt;
      // n = 100 uses 0.007 rather than the printed 0.0012 (see README)
      static constexpr double r1[] = {0.007, 0.0035, 0.0016, 0.001};
      static constexpr double r5[] = {0.0012, 0.0006, 0.0003, 0.0002};
      static constexpr double r10[] = {0.0007, 0.0004, 0.0002, 0.0001};
      if (s.r == 1) return r1[*col];
      if (s.r == 5) return r5[*col];
      if (s.r == 10) return r10[*col];
      return std::nullopt;
    }
    case ProblemKind::RobustPca: return 0.0;
    case ProblemKind::PhaseSync: {
      if (!col) return std::nullopt;
      static constexpr double lam[] = {200.0, 600.0, 1600.0, 2800.0};
      return lam[*col];
    }
    case ProblemKind::LinConstrained: return 2.0;
  }
  return std::nullopt;
}

/// Target SNR of the low-rank and sparse rows (r = 1, 5, 10).
inline std::optional<double> table_lowrank_snr(Index r) {
  if (r == 1) return 0.48;
  if (r == 5) return 2.4;
  if (r == 10) return 4.8;
  return std::nullopt;
}

inline double resolve_lambda(const ProblemSpec& s) {
  if (s.lambda) {
    detail::require(std::isfinite(*s.lambda) && *s.lambda >= 0.0, "lambda must be non-negative");
    return *s.lambda;
  }
  const auto l = table_lambda(s);
  if (!l) throw InvalidInput("no default lambda for " + to_string(s.kind) + " at n=" + std::to_string(s.n) +
                             "; set lambda explicitly");
  return *l;
}

/// Sparse PCA: M = z z^T + (c/2)(N + N^T) with c = 2 / (SNR ||N + N^T||_F)
/// (SNR taken as an amplitude ratio, see SnrConvention); snr = +inf gives the
/// noiseless instance.
inline ProblemInstance gen_sparse_pca(Index n, double snr, NoiseKind noise, double lambda, std::uint64_t seed,
                                      SnrConvention conv = SnrConvention::Amplitude) {
  detail::require(n >= 2, "gen_sparse_pca: n must be at least 2");
  detail::require(snr > 0.0, "gen_sparse_pca: snr must be positive");
  detail::require(lambda > 0.0 && std::isfinite(lambda), "gen_sparse_pca: lambda must be positive");
  std::mt19937_64 rng(mix_seed(seed, 1));

  Vector z(n);
  do {
    for (Index i = 0; i < n; ++i) z(i) = detail::sparse_entry(rng);
  } while (z.squaredNorm() == 0.0);
  z.normalize();

  ProblemInstance inst;
  inst.spec = {ProblemKind::SparsePca, n, 1, snr, noise, lambda, 0, seed, conv};
  inst.dim = n;
  inst.rank = 1;
  inst.lambda = lambda;
  inst.tau = 1.0;
  inst.target_snr = snr;
  inst.m0 = z * z.transpose();

  const Matrix nn = detail::sym_sum(detail::noise_matrix(n, noise, rng));
  inst.noise_scale = std::isinf(snr) ? 0.0 : 2.0 / (detail::amplitude_snr(snr, conv) * nn.norm());
  const Matrix noise_part = (0.5 * inst.noise_scale) * nn;
  inst.m = inst.m0 + noise_part;
  inst.measured_snr = detail::measured_snr(inst.m0, noise_part);

  inst.problem = std::make_shared<SparsePcaProblem>(inst.m, lambda, inst.tau);
  const Spectrum top = topk_eigh(inst.m, 1, mix_seed(seed, 2));
  inst.x1 = LowRankPsd::rank_one(inst.tau, top.eigenvectors.col(0));
  inst.y1 = DualPoint::from_matrix(sign_of(inst.x1.dense()));
  inst.default_eta = 1.0 / (2.0 * lambda);
  inst.default_iterations = 1000;
  return inst;
}

/// Low-rank and sparse covariance: Z0 (n x r) sparse with unit Frobenius norm,
/// M = Z0 Z0^T + (c/2)(N + N^T), c = 2 ||Z0 Z0^T||_F / (SNR ||N + N^T||_F).
inline ProblemInstance gen_lowrank_sparse(Index n, Index r, double snr, double lambda, std::uint64_t seed,
                                          SnrConvention conv = SnrConvention::Amplitude) {
  detail::require(r >= 1 && r < n, "gen_lowrank_sparse: need 1 <= r < n");
  detail::require(snr > 0.0, "gen_lowrank_sparse: snr must be positive");
  detail::require(lambda >= 0.0 && std::isfinite(lambda), "gen_lowrank_sparse: lambda must be non-negative");
  std::mt19937_64 rng(mix_seed(seed, 3));

  Matrix z0(n, r);
  for (;;) {
    for (Index j = 0; j < r; ++j)
      for (Index i = 0; i < n; ++i) z0(i, j) = detail::sparse_entry(rng);
    if (z0.squaredNorm() == 0.0) continue;
    Eigen::JacobiSVD<Matrix> svd(z0);
    const Vector sv = svd.singularValues();
    if (sv(r - 1) > 1e-8 * sv(0)) break;
  }
  z0 /= z0.norm();

  ProblemInstance inst;
  inst.spec = {ProblemKind::LowRankSparse, n, r, snr, NoiseKind::GaussianHalf, lambda, 0, seed, conv};
  inst.dim = n;
  inst.rank = r;
  inst.lambda = lambda;
  inst.m0 = z0 * z0.transpose();
  inst.tau = 0.7 * inst.m0.trace();
  inst.target_snr = snr;

  const Matrix nn = detail::sym_sum(detail::noise_matrix(n, NoiseKind::GaussianHalf, rng));
  inst.noise_scale = std::isinf(snr) ? 0.0 : 2.0 * inst.m0.norm() / (detail::amplitude_snr(snr, conv) * nn.norm());
  const Matrix noise_part = (0.5 * inst.noise_scale) * nn;
  inst.m = inst.m0 + noise_part;
  inst.measured_snr = detail::measured_snr(inst.m0, noise_part);

  inst.problem = std::make_shared<LowRankSparseProblem>(inst.m, lambda, inst.tau);
  // Warm start: the top-r eigenvalues of M projected onto the tau-simplex of R^r.
  const Spectrum top = topk_eigh(inst.m, r, mix_seed(seed, 4));
  const Vector vals = project_simplex(top.eigenvalues, inst.tau);
  Index keep = 0;
  while (keep < r && vals(keep) > 0.0) ++keep;
  inst.x1 = LowRankPsd::from_factors(inst.tau, vals.head(keep), top.eigenvectors.leftCols(keep));
  inst.y1 = DualPoint::from_matrix(sign_of(inst.x1.dense()));
  inst.default_eta = 1.0;
  inst.default_iterations = 2000;
  return inst;
}

/// Robust PCA: M0 = r Z0 Z0^T (Gaussian Z0, unit Frobenius), M = M0 + (N + N^T)/2
/// with N_ij in {0, +1, -1}, nonzero with probability 1/sqrt(n).
inline ProblemInstance gen_robust_pca(Index n, Index r, std::uint64_t seed) {
  detail::require(r >= 1 && r < n, "gen_robust_pca: need 1 <= r < n");
  std::mt19937_64 rng(mix_seed(seed, 5));

  Matrix z0(n, r);
  detail::fill_gaussian(z0, rng);
  z0 /= z0.norm();

  std::bernoulli_distribution corrupt(1.0 / std::sqrt(static_cast<double>(n)));
  std::bernoulli_distribution positive(0.5);
  Matrix nn(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) nn(i, j) = corrupt(rng) ? (positive(rng) ? 1.0 : -1.0) : 0.0;

  ProblemInstance inst;
  inst.spec = {ProblemKind::RobustPca, n, r, std::numeric_limits<double>::quiet_NaN(), NoiseKind::Uniform01,
               0.0, 0, seed};
  inst.dim = n;
  inst.rank = r;
  inst.m0 = static_cast<double>(r) * z0 * z0.transpose();
  inst.tau = 0.95 * inst.m0.trace();
  inst.noise_scale = 1.0;
  const Matrix noise_part = 0.5 * detail::sym_sum(nn);
  inst.m = inst.m0 + noise_part;
  inst.measured_snr = detail::measured_snr(inst.m0, noise_part);

  inst.problem = std::make_shared<RobustPcaProblem>(inst.m, inst.tau);
  inst.x1 = exact_project(inst.m, inst.tau);
  inst.y1 = DualPoint::from_matrix(sign_of(inst.x1.dense() - inst.m));
  inst.default_eta = r == 1 ? static_cast<double>(n) / 10.0 : 1.0;
  inst.default_iterations = r == 1 ? 3000 : (r <= 5 ? 20000 : 30000);
  return inst;
}

/// Default step sizes of the phase synchronization rows.
inline std::optional<double> table_phase_eta(Index n) {
  const auto col = detail::table_column(n);
  if (!col) return std::nullopt;
  static constexpr double eta[] = {1.0 / 400, 1.0 / 800, 1.0 / 1800, 1.0 / 1800};
  return eta[*col];
}

/// Phase synchronization: M = z0 z0^* + c N with z0_j = e^{i theta_j},
/// Hermitian Gaussian N with zero diagonal and c = 0.18 sqrt(n) (noise_scale
/// overrides c when non-negative). Stored through the real embedding.
inline ProblemInstance gen_phase_sync(Index n, double lambda, std::uint64_t seed, double noise_scale = -1.0) {
  detail::require(n >= 2, "gen_phase_sync: n must be at least 2");
  detail::require(lambda > 0.0 && std::isfinite(lambda), "gen_phase_sync: lambda must be positive");
  std::mt19937_64 rng(mix_seed(seed, 6));
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> g(0.0, 1.0);

  Eigen::VectorXcd z0(n);
  for (Index j = 0; j < n; ++j) z0(j) = std::polar(1.0, angle(rng));
  Eigen::MatrixXcd noise = Eigen::MatrixXcd::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index k = j + 1; k < n; ++k) {
      const double re = g(rng);
      const double im = g(rng);
      noise(j, k) = {re, im};
      noise(k, j) = {re, -im};
    }
  }

  ProblemInstance inst;
  inst.spec = {ProblemKind::PhaseSync, n, 1, std::numeric_limits<double>::quiet_NaN(), NoiseKind::GaussianHalf,
               lambda, 0, seed};
  inst.dim = 2 * n;
  inst.rank = 2;
  inst.lambda = lambda;
  inst.tau = 2.0 * static_cast<double>(n);
  inst.noise_scale = noise_scale >= 0.0 ? noise_scale : 0.18 * std::sqrt(static_cast<double>(n));
  const Eigen::MatrixXcd truth = z0 * z0.adjoint();
  inst.m0 = embed_hermitian(truth);
  inst.m = embed_hermitian(truth + inst.noise_scale * noise);
  inst.measured_snr = inst.noise_scale > 0.0 ? truth.squaredNorm() / (inst.noise_scale * inst.noise_scale * noise.squaredNorm())
                                             : std::numeric_limits<double>::infinity();

  auto problem = std::make_shared<PhaseSyncProblem>(inst.m, lambda);
  // n u1 u1^* embeds as n (v1 v1^T + v2 v2^T) for the top eigenvalue pair.
  const Spectrum top = topk_eigh(inst.m, 2, mix_seed(seed, 7));
  inst.x1 = LowRankPsd::from_factors(inst.tau, Vector::Constant(2, static_cast<double>(n)), top.eigenvectors);
  inst.y1 = DualPoint(VecL2Ball{n}, detail::normalized_or_zero(problem->diag_part(inst.x1.dense()) - Vector::Ones(n)));
  inst.problem = std::move(problem);
  inst.default_eta = table_phase_eta(n).value_or(1.0 / (2.0 * lambda));
  inst.default_iterations = 10000;
  return inst;
}

/// Largest eigenvalue of the Gram matrix K_ij = (v_i^T v_j)^2 by power
/// iteration; its square root is ||A||_op.
inline double constraint_operator_norm(const Matrix& v, std::uint64_t seed, int iterations = 100) {
  const Matrix gram = (v.transpose() * v).array().square().matrix();
  std::mt19937_64 rng(seed);
  Matrix x(gram.rows(), 1);
  detail::fill_gaussian(x, rng);
  Vector q = x.col(0).normalized();
  double est = 0.0;
  for (int i = 0; i < iterations; ++i) {
    const Vector next = gram * q;
    est = q.dot(next);
    const double nn = next.norm();
    if (nn == 0.0) return 0.0;
    q = next / nn;
  }
  return std::sqrt(std::max(0.0, est));
}

/// Noise level of the linearly constrained model, chosen so that
/// ||M0||_F^2 / ||noise||_F^2 is about 15 / n.
inline double lin_constrained_noise_scale(Index n) { return std::sqrt(2.0 / 15.0) / std::sqrt(static_cast<double>(n)); }

/// Linearly constrained estimation: M = z0 z0^T + (c/2)(N + N^T) with Gaussian
/// N, A_i = v_i v_i^T for uniformly random unit v_i, b = A(z0 z0^T).
/// noise_scale < 0 picks the default c.
inline ProblemInstance gen_lin_constrained(Index n, Index m, double lambda, std::uint64_t seed,
                                           double noise_scale = -1.0) {
  detail::require(n >= 2, "gen_lin_constrained: n must be at least 2");
  detail::require(m >= 1, "gen_lin_constrained: m must be positive");
  detail::require(lambda > 0.0 && std::isfinite(lambda), "gen_lin_constrained: lambda must be positive");
  std::mt19937_64 rng(mix_seed(seed, 8));

  Matrix zm(n, 1);
  detail::fill_gaussian(zm, rng);
  const Vector z0 = zm.col(0).normalized();
  Matrix nn(n, n);
  std::normal_distribution<double> g(0.0, 1.0);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) nn(i, j) = g(rng);
  Matrix v(n, m);
  detail::fill_gaussian(v, rng);
  // Unit directions keep ||A||_op = O(1); raw Gaussian v_i make it grow like n.
  v.colwise().normalize();

  ProblemInstance inst;
  inst.spec = {ProblemKind::LinConstrained, n, 1, std::numeric_limits<double>::quiet_NaN(), NoiseKind::GaussianHalf,
               lambda, m, seed};
  inst.dim = n;
  inst.rank = 1;
  inst.lambda = lambda;
  inst.tau = 1.0;
  inst.noise_scale = noise_scale >= 0.0 ? noise_scale : lin_constrained_noise_scale(n);
  inst.m0 = z0 * z0.transpose();
  const Matrix noise_part = (0.5 * inst.noise_scale) * detail::sym_sum(nn);
  inst.m = inst.m0 + noise_part;
  inst.measured_snr = detail::measured_snr(inst.m0, noise_part);

  const Vector proj = v.transpose() * z0;
  const Vector b = proj.array().square().matrix();
  const double a_norm = constraint_operator_norm(v, mix_seed(seed, 9));
  auto problem = std::make_shared<LinConstrainedProblem>(inst.m, v, b, lambda, inst.tau, a_norm);

  const Spectrum top = topk_eigh(inst.m, 1, mix_seed(seed, 10));
  inst.x1 = LowRankPsd::rank_one(inst.tau, top.eigenvectors.col(0));
  inst.y1 = DualPoint(VecL2Ball{m}, detail::normalized_or_zero(problem->apply(inst.x1.dense()) - b));
  inst.problem = std::move(problem);
  inst.default_eta = 1.0 / (2.0 * lambda);
  inst.default_iterations = 2000;
  return inst;
}

/// Builds the instance described by `spec`, filling table defaults.
inline ProblemInstance generate(const ProblemSpec& spec) {
  switch (spec.kind) {
    case ProblemKind::SparsePca:
      return gen_sparse_pca(spec.n, spec.snr, spec.noise, resolve_lambda(spec), spec.seed, spec.snr_convention);
    case ProblemKind::LowRankSparse:
      return gen_lowrank_sparse(spec.n, spec.r, spec.snr, resolve_lambda(spec), spec.seed, spec.snr_convention);
    case ProblemKind::RobustPca:
      return gen_robust_pca(spec.n, spec.r, spec.seed);
    case ProblemKind::PhaseSync:
      return gen_phase_sync(spec.n, resolve_lambda(spec), spec.seed);
    case ProblemKind::LinConstrained:
      return gen_lin_constrained(spec.n, spec.m > 0 ? spec.m : spec.n, resolve_lambda(spec), spec.seed);
  }
  throw InvalidInput("unknown problem kind");
}

/// ||(Tr(M0)/tau) X - M0||_F^2 / ||M0||_F^2.
inline double relative_error(const ProblemInstance& inst, const Matrix& x) {
  const double scale = inst.m0.trace() / inst.tau;
  return (scale * x - inst.m0).squaredNorm() / inst.m0.squaredNorm();
}

inline double relative_error(const ProblemInstance& inst, const LowRankPsd& x) {
  return relative_error(inst, x.dense());
}

/// ||A(X) - b||_2 for linear constraints, ||d(X) - 1||_2 for phase
/// synchronization, NaN otherwise.
inline double constraint_residual(const ProblemInstance& inst, const LowRankPsd& x) {
  if (const auto* p = dynamic_cast<const LinConstrainedProblem*>(inst.problem.get()))
    return p->constraint_residual(x.dense());
  if (const auto* p = dynamic_cast<const PhaseSyncProblem*>(inst.problem.get())) return p->diag_residual(x.dense());
  return std::numeric_limits<double>::quiet_NaN();
}

struct RecoveryMetrics {
  double init_error = 0.0;
  double recovery_error = 0.0;
  double dual_gap = 0.0;
  double comp_gap = std::numeric_limits<double>::quiet_NaN();  // delta(rank)
  std::size_t certificate_violations = 0;
  double constraint_residual = std::numeric_limits<double>::quiet_NaN();
};

inline RecoveryMetrics recovery_metrics(const ProblemInstance& inst, const LowRankPsd& x, const SolverReport& report) {
  RecoveryMetrics out;
  out.init_error = relative_error(inst, inst.x1);
  out.recovery_error = relative_error(inst, x);
  out.dual_gap = report.best.gap;
  if (report.complementarity && inst.rank <= report.complementarity->r_max)
    out.comp_gap = report.complementarity->delta_at(inst.rank);
  out.certificate_violations = report.certificate_violations;
  out.constraint_residual = constraint_residual(inst, x);
  return out;
}

}  // namespace specgrad
