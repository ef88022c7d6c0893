#include <gtest/gtest.h>

#include <random>

#include "specgrad/problems.hpp"
#include "specgrad/saddle.hpp"

using namespace specgrad;

namespace {

// f(X) = <X, G> with no dual block.
class LinearToy : public SaddleProblem {
 public:
  LinearToy(Matrix g, double tau) : g_(std::move(g)), tau_(tau) {}
  std::string name() const override { return "linear_toy"; }
  Index dim() const override { return g_.rows(); }
  double trace_radius() const override { return tau_; }
  DualDomain dual_domain() const override { return VecL2Ball{0}; }
  SmoothnessConstants constants() const override { return {0.0, 0.0, 0.0, 0.0}; }
  double value(const Matrix& x, const DualPoint&) const override { return inner(x, g_); }
  Matrix grad_x(const Matrix&, const DualPoint&) const override { return g_; }
  Vector grad_y(const Matrix&, const DualPoint&) const override { return Vector(0); }
  double max_over_dual(const Matrix& x) const override { return inner(x, g_); }
  double min_over_primal(const DualPoint&) const override {
    return tau_ * Eigen::SelfAdjointEigenSolver<Matrix>(g_).eigenvalues()(0);
  }

 private:
  Matrix g_;
  double tau_;
};

// f(X) = 1/2 ||X - M||^2 with no dual block.
class QuadraticToy : public SaddleProblem {
 public:
  explicit QuadraticToy(Matrix m) : m_(std::move(m)) {}
  std::string name() const override { return "quadratic_toy"; }
  Index dim() const override { return m_.rows(); }
  double trace_radius() const override { return 1.0; }
  DualDomain dual_domain() const override { return VecL2Ball{0}; }
  SmoothnessConstants constants() const override { return {1.0, 0.0, 0.0, 0.0}; }
  double value(const Matrix& x, const DualPoint&) const override { return 0.5 * (x - m_).squaredNorm(); }
  Matrix grad_x(const Matrix& x, const DualPoint&) const override { return x - m_; }
  Vector grad_y(const Matrix&, const DualPoint&) const override { return Vector(0); }
  double max_over_dual(const Matrix& x) const override { return value(x, DualPoint()); }
  double min_over_primal(const DualPoint&) const override {
    return value(exact_project(m_, 1.0).dense(), DualPoint());
  }

 private:
  Matrix m_;
};

Matrix diag(std::initializer_list<double> v) {
  Vector d(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) d(i++) = x;
  return d.asDiagonal();
}

}  // namespace

TEST(SmoothnessConstants, FullConstant) {
  const SmoothnessConstants c{1.0, 0.0, 0.5, 0.5};
  EXPECT_NEAR(c.beta(), std::sqrt(2.0) * std::sqrt(1.25), 1e-15);
}

TEST(TheoreticalStepSize, SparsePca) {
  EXPECT_NEAR(theoretical_step_size({0, 0, 0.008, 0.008}), 62.5, 1e-12);
}

TEST(TheoreticalStepSize, RobustPca) { EXPECT_NEAR(theoretical_step_size({0, 0, 1, 1}), 0.5, 1e-15); }

TEST(TheoreticalStepSize, LowRankSparse) {
  const double lam = 0.0012;
  // Branches: 1/(2 sqrt(1 + lam^2)), 1/(2 lam), 1/(1 + lam), 1/lam.
  const double expected = std::min({1.0 / (2.0 * std::sqrt(1.0 + lam * lam)), 1.0 / (2.0 * lam),
                                    1.0 / (1.0 + lam), 1.0 / lam});
  EXPECT_NEAR(theoretical_step_size({1, 0, lam, lam}), expected, 1e-15);
  EXPECT_NEAR(expected, 0.4999997, 1e-7);
}

TEST(TheoreticalStepSize, RejectsAllZero) { EXPECT_THROW(theoretical_step_size({0, 0, 0, 0}), InvalidInput); }

TEST(EgStep, BilinearToyStep) {
  // X - eta G = diag(0.8, 0.6); threshold (1.4 - 1) / 2 = 0.2 gives diag(0.6, 0.4).
  const LinearToy p(-diag({3, 1}), 1.0);
  const auto x1 = LowRankPsd::from_factors(1.0, Vector::Constant(2, 0.5), Matrix::Identity(2, 2));
  const SaddleState s = SaddleState::initial(x1, DualPoint::zero(VecL2Ball{0}));
  const StepResult step = eg_step(p, s, 0.1, 1, ProjectionMode::Full, 0);
  EXPECT_LE((step.state.z.dense() - diag({0.6, 0.4})).norm(), 1e-12);
  EXPECT_LE((step.state.x.dense() - diag({0.6, 0.4})).norm(), 1e-12);
  EXPECT_EQ(step.state.iteration, 2u);
}

TEST(EgStep, SaddlePointIsFixed) {
  const LinearToy p(-diag({3, 1, 0}), 1.0);
  const auto star = LowRankPsd::rank_one(1.0, Vector::Unit(3, 0));
  const SaddleState s = SaddleState::initial(star, DualPoint::zero(VecL2Ball{0}));
  for (ProjectionMode mode : {ProjectionMode::Full, ProjectionMode::Truncated, ProjectionMode::CertifiedFallback}) {
    const StepResult step = eg_step(p, s, 0.3, 1, mode, 0);
    EXPECT_LE((step.state.x.dense() - star.dense()).norm(), 1e-8);
    EXPECT_LE((step.state.z.dense() - star.dense()).norm(), 1e-8);
    EXPECT_TRUE(step.probe.certified);
  }
}

TEST(EgStep, SparsePcaWarmStartIsCertified) {
  const ProblemInstance inst = gen_sparse_pca(100, 1.0, NoiseKind::Uniform01, 0.008, 0);
  const SaddleState s = SaddleState::initial(inst.x1, inst.y1);
  const StepResult step = eg_step(*inst.problem, s, inst.default_eta, 1, ProjectionMode::Truncated, 0);
  EXPECT_TRUE(step.probe.certified);
  EXPECT_TRUE(step.update.certified);
}

TEST(EgStep, NonFiniteGradientRaises) {
  Matrix g = -diag({3, 1});
  g(0, 0) = std::numeric_limits<double>::quiet_NaN();
  const LinearToy p(g, 1.0);
  const SaddleState s = SaddleState::initial(LowRankPsd::rank_one(1.0, Vector::Unit(2, 0)), DualPoint::zero(VecL2Ball{0}));
  try {
    eg_step(p, s, 0.1, 1, ProjectionMode::Full, 0);
    FAIL() << "expected NumericalFailure";
  } catch (const NumericalFailure& e) {
    EXPECT_EQ(e.iteration(), 1u);
  }
}

TEST(EgRun, RejectsZeroIterations) {
  const LinearToy p(-diag({3, 1}), 1.0);
  SolverOptions opt;
  opt.eta = 0.1;
  opt.iterations = 0;
  EXPECT_THROW(eg_run(p, LowRankPsd::rank_one(1.0, Vector::Unit(2, 0)), DualPoint::zero(VecL2Ball{0}), opt),
               InvalidInput);
}

TEST(EgRun, BestGapIsMinimumOfRecords) {
  const ProblemInstance inst = gen_sparse_pca(30, 1.0, NoiseKind::Uniform01, 0.02, 3);
  SolverOptions opt;
  opt.eta = inst.default_eta;
  opt.iterations = 100;
  const SolverReport rep = eg_run(*inst.problem, inst.x1, inst.y1, opt);
  double best = dual_gap(*inst.problem, inst.x1, inst.y1);
  for (const auto& r : rep.records) best = std::min({best, r.gap_probe, r.gap_iterate});
  EXPECT_NEAR(rep.best.gap, best, 1e-9);
  EXPECT_EQ(rep.records.size(), 100u);
}

TEST(EgRun, TruncatedMatchesFullWhenCertified) {
  const ProblemInstance inst = gen_sparse_pca(30, 1.0, NoiseKind::Uniform01, 0.02, 5);
  SolverOptions base;
  base.eta = inst.default_eta;
  base.iterations = 60;
  base.gap_every = 0;
  std::vector<Matrix> full_x, trunc_x;
  bool all_certified = true;
  SolverOptions f = base;
  f.mode = ProjectionMode::Full;
  f.observer = [&](const SaddleState&, const StepResult& s) { full_x.push_back(s.state.x.dense()); };
  SolverOptions t = base;
  t.mode = ProjectionMode::Truncated;
  t.observer = [&](const SaddleState&, const StepResult& s) {
    trunc_x.push_back(s.state.x.dense());
    all_certified = all_certified && s.probe.certified && s.update.certified;
  };
  eg_run(*inst.problem, inst.x1, inst.y1, f);
  eg_run(*inst.problem, inst.x1, inst.y1, t);
  ASSERT_TRUE(all_certified);
  for (std::size_t i = 0; i < full_x.size(); ++i) EXPECT_LE((full_x[i] - trunc_x[i]).norm(), 1e-8);
}

TEST(DualGap, ZeroAtSaddleOfToy) {
  const LinearToy p(-diag({3, 1, 0}), 1.0);
  EXPECT_NEAR(dual_gap(p, LowRankPsd::rank_one(1.0, Vector::Unit(3, 0)), DualPoint::zero(VecL2Ball{0})), 0.0, 1e-10);
}

TEST(DualGap, NonNegativeAtRandomPoints) {
  const ProblemInstance inst = gen_sparse_pca(15, 1.0, NoiseKind::GaussianHalf, 0.05, 1);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    Matrix b(15, 2);
    detail::fill_gaussian(b, rng);
    const LowRankPsd z = exact_project((b * b.transpose()).eval(), 1.0);
    Vector y(15 * 15);
    for (Index k = 0; k < y.size(); ++k) y(k) = u(rng);
    EXPECT_GE(dual_gap(*inst.problem, z, DualPoint(MatInfBall{15}, y)), -1e-10);
  }
}

TEST(CheckGradients, LinearAndQuadratic) {
  std::mt19937_64 rng(0);
  Matrix m(6, 6);
  detail::fill_gaussian(m, rng);
  m = (0.5 * (m + m.transpose())).eval();
  const SparsePcaProblem linear(m, 0.3, 1.0);
  EXPECT_LE(check_gradients(linear, 10, 1), 1e-9);
  const QuadraticToy quad(m);
  EXPECT_LE(check_gradients(quad, 10, 2), 1e-6);
}

TEST(Complementarity, RankOneGapOfHalf) {
  const Vector z = Vector::Ones(8).normalized();
  const LinearToy p(-0.5 * z * z.transpose(), 1.0);
  const auto rep = complementarity_report(p, LowRankPsd::rank_one(1.0, z), DualPoint::zero(VecL2Ball{0}), 4, 0.5);
  EXPECT_EQ(rep.r_tilde, 1);
  EXPECT_NEAR(rep.delta_at(1), 0.5, 1e-12);
  for (Index r = 1; r < 4; ++r) {
    EXPECT_LE(rep.delta_at(r), rep.delta_at(r + 1) + 1e-15);
    EXPECT_LE(rep.radius_at(r), rep.radius_at(r + 1) + 1e-15);
  }
}

TEST(Complementarity, ConstantSpectrum) {
  const LinearToy p(2.0 * Matrix::Identity(5, 5), 1.0);
  const auto rep = complementarity_report(p, LowRankPsd::rank_one(1.0, Vector::Unit(5, 0)),
                                          DualPoint::zero(VecL2Ball{0}), 4, 0.5);
  EXPECT_EQ(rep.r_tilde, 5);
  for (Index r = 0; r <= 4; ++r) EXPECT_EQ(rep.delta_at(r), 0.0);
}

TEST(Complementarity, RadiusFormula) {
  // Spectrum of G: -1 (once), then 0, 1, 2, ... ; r_tilde = 1, delta(r) = r.
  Matrix g = diag({-1, 0, 1, 2, 3});
  const LinearToy p(g, 1.0);
  const double eta = 0.25;
  const auto rep = complementarity_report(p, LowRankPsd::rank_one(1.0, Vector::Unit(5, 0)),
                                          DualPoint::zero(VecL2Ball{0}), 3, eta);
  ASSERT_EQ(rep.r_tilde, 1);
  // constants are all zero, so the prefactor is eta / (1 + sqrt 2)
  for (Index r = 1; r <= 3; ++r) {
    const double expected = eta / (1.0 + std::sqrt(2.0)) * std::max(0.5 * rep.delta_at(r), rep.delta_at(r) / 2.0);
    EXPECT_NEAR(rep.radius_at(r), expected, 1e-14);
  }
}
