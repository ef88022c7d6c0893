#pragma once

// Projected extragradient method for min_{X in tau*S_n} max_{y in K} f(X, y)
// with rank-r truncated spectrahedron projections, dual-gap monitoring and
// strict-complementarity diagnostics.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "specgrad/dual.hpp"
#include "specgrad/linalg.hpp"
#include "specgrad/spectrahedron.hpp"

namespace specgrad {

/// Lipschitz constants of the partial gradients of f.
struct SmoothnessConstants {
  double beta_x = 0.0;   // grad_X in X
  double beta_y = 0.0;   // grad_y in y
  double beta_xy = 0.0;  // grad_X in y
  double beta_yx = 0.0;  // grad_y in X

  /// Lipschitz constant of the full monotone operator (grad_X f, -grad_y f).
  double beta() const {
    return std::sqrt(2.0) * std::max(std::hypot(beta_x, beta_yx), std::hypot(beta_y, beta_xy));
  }
};

namespace detail {
inline double safe_inverse(double v) { return v > 0.0 ? 1.0 / v : std::numeric_limits<double>::infinity(); }
}  // namespace detail

/// Fixed step size for which truncated projections are guaranteed near a
/// strictly complementary saddle point:
/// min{1/(2 sqrt(bX^2+byX^2)), 1/(2 sqrt(by^2+bXy^2)), 1/(bX+bXy), 1/(by+byX)}.
inline double theoretical_step_size(const SmoothnessConstants& c) {
  detail::require(c.beta_x >= 0 && c.beta_y >= 0 && c.beta_xy >= 0 && c.beta_yx >= 0,
                  "theoretical_step_size: constants must be non-negative");
  detail::require(c.beta_x > 0 || c.beta_y > 0 || c.beta_xy > 0 || c.beta_yx > 0,
                  "theoretical_step_size: all smoothness constants are zero");
  const double a = detail::safe_inverse(2.0 * std::hypot(c.beta_x, c.beta_yx));
  const double b = detail::safe_inverse(2.0 * std::hypot(c.beta_y, c.beta_xy));
  const double d = detail::safe_inverse(c.beta_x + c.beta_xy);
  const double e = detail::safe_inverse(c.beta_y + c.beta_yx);
  return std::min({a, b, d, e});
}

/// A smooth convex-concave f(X, y) over tau*S_n x K.
///
/// Implementations are read-only after construction. Gradients take a dense X
/// so they can also be evaluated off the spectrahedron (finite differences);
/// the solver materializes its factored iterates per evaluation.
class SaddleProblem {
 public:
  virtual ~SaddleProblem() = default;

  virtual std::string name() const = 0;
  virtual Index dim() const = 0;
  virtual double trace_radius() const = 0;
  virtual DualDomain dual_domain() const = 0;
  virtual SmoothnessConstants constants() const = 0;

  virtual double value(const Matrix& x, const DualPoint& y) const = 0;
  virtual Matrix grad_x(const Matrix& x, const DualPoint& y) const = 0;
  virtual Vector grad_y(const Matrix& x, const DualPoint& y) const = 0;

  /// g(X) = max_{y in K} f(X, y).
  virtual double max_over_dual(const Matrix& x) const = 0;
  /// min_{X in tau*S_n} f(X, y).
  virtual double min_over_primal(const DualPoint& y) const = 0;

  /// sup distance between two points of tau*S_n x K.
  virtual double diameter() const {
    const double tau = trace_radius();
    const double dk = dual_diameter(dual_domain());
    return std::sqrt(2.0 * tau * tau + dk * dk);
  }
};

/// Iterates of the extragradient loop: (X_t, y_t) and the probe (Z_t, w_t).
struct SaddleState {
  LowRankPsd x;
  DualPoint y;
  LowRankPsd z;
  DualPoint w;
  std::size_t iteration = 1;
  Matrix basis;  // leading eigenvectors from the last projection (eigensolver warm start)

  static SaddleState initial(LowRankPsd x, DualPoint y) {
    SaddleState s;
    s.z = x;
    s.w = y;
    s.x = std::move(x);
    s.y = std::move(y);
    return s;
  }
};

enum class ProjectionMode { Truncated, Full, CertifiedFallback };

inline std::string to_string(ProjectionMode m) {
  switch (m) {
    case ProjectionMode::Truncated: return "truncated-only";
    case ProjectionMode::Full: return "full-only";
    case ProjectionMode::CertifiedFallback: return "certified-fallback";
  }
  return "unknown";
}

inline ProjectionMode parse_projection_mode(const std::string& s) {
  if (s == "truncated" || s == "truncated-only") return ProjectionMode::Truncated;
  if (s == "full" || s == "full-only") return ProjectionMode::Full;
  if (s == "certified-fallback") return ProjectionMode::CertifiedFallback;
  throw InvalidInput("unknown projection mode '" + s + "' (expected truncated-only | full-only | certified-fallback)");
}

/// Projection of P onto tau*S_n according to `mode`. Full mode still reports
/// the rank-r certificate computed from the complete spectrum.
inline ProjectionOutcome project_with_mode(const SymMatrix& p, double tau, Index r, ProjectionMode mode,
                                           std::uint64_t seed, const Matrix& warm = Matrix()) {
  if (mode == ProjectionMode::Full || r >= p.rows()) {
    const Spectrum s = full_eigh(p);
    ProjectionOutcome out;
    out.point = project_from_spectrum(s, tau);
    out.basis = s.eigenvectors.leftCols(std::min(r + 1, p.rows()));
    if (r >= 1 && r < p.rows()) {
      const auto [ok, margin] = certify_rank(s.eigenvalues.head(r + 1), tau, r);
      out.certified = ok;
      out.certificate_margin = margin;
      out.near_boundary = !ok && margin >= -kNearBoundaryTol * tau;
    } else {
      out.certified = true;
    }
    return out;
  }
  return truncated_project(p, tau, r, seed, mode == ProjectionMode::CertifiedFallback, warm);
}

struct StepResult {
  SaddleState state;
  ProjectionOutcome probe;   // projection producing Z_{t+1}
  ProjectionOutcome update;  // projection producing X_{t+1}
};

namespace detail {

inline void check_finite(const Matrix& g, const char* what, std::size_t t) {
  if (!g.allFinite()) throw NumericalFailure(std::string(what) + " returned non-finite values", t);
}

inline Matrix symmetrized(Matrix m) {
  m = 0.5 * (m + m.transpose()).eval();
  return m;
}

}  // namespace detail

/// One iteration of the projected extragradient method:
///   Z = Pi[X - eta grad_X f(X, y)],  w = Pi_K[y + eta grad_y f(X, y)],
///   X+ = Pi[X - eta grad_X f(Z, w)], y+ = Pi_K[y + eta grad_y f(Z, w)].
inline StepResult eg_step(const SaddleProblem& p, const SaddleState& s, double eta, Index r, ProjectionMode mode,
                          std::uint64_t seed) {
  detail::require(eta > 0.0 && std::isfinite(eta), "eg_step: eta must be positive");
  const double tau = p.trace_radius();
  const DualDomain domain = p.dual_domain();
  const std::size_t t = s.iteration;

  const Matrix x_dense = s.x.dense();
  const Matrix gx = p.grad_x(x_dense, s.y);
  const Vector gy = p.grad_y(x_dense, s.y);
  detail::check_finite(gx, "grad_x", t);
  detail::check_finite(gy, "grad_y", t);

  StepResult out;
  out.probe = project_with_mode(detail::symmetrized(x_dense - eta * gx), tau, r, mode, mix_seed(seed, t, 0), s.basis);
  DualPoint w(domain, dual_project(domain, s.y.values + eta * gy));

  const Matrix z_dense = out.probe.point.dense();
  const Matrix gx_probe = p.grad_x(z_dense, w);
  const Vector gy_probe = p.grad_y(z_dense, w);
  detail::check_finite(gx_probe, "grad_x", t);
  detail::check_finite(gy_probe, "grad_y", t);

  out.update = project_with_mode(detail::symmetrized(x_dense - eta * gx_probe), tau, r, mode, mix_seed(seed, t, 1),
                                 out.probe.basis);
  DualPoint y_next(domain, dual_project(domain, s.y.values + eta * gy_probe));

  out.state.z = out.probe.point;
  out.state.w = std::move(w);
  out.state.x = out.update.point;
  out.state.y = std::move(y_next);
  out.state.iteration = t + 1;
  out.state.basis = out.update.basis;
  return out;
}

/// Pieces of the dual-gap bound at a feasible (Z, w).
struct DualGapParts {
  double primal = 0.0;  // <Z, G> - tau lambda_min(G)
  double dual = 0.0;    // max_y <y, grad_y> - <w, grad_y>
  double total() const { return primal + dual; }
};

/// Dual gap max_X <Z - X, G> - min_y <w - y, grad_y f> with G = grad_X f(Z, w);
/// the primal maximizer is tau v v^T for the bottom eigenvector of G. `warm`,
/// when given, seeds the eigensolver and receives the new bottom eigenvector.
inline DualGapParts dual_gap_parts(const SaddleProblem& p, const LowRankPsd& z, const DualPoint& w,
                                   std::uint64_t seed = 0x5eed, Matrix* warm = nullptr) {
  const Matrix z_dense = z.dense();
  const Matrix g = p.grad_x(z_dense, w);
  const Vector gy = p.grad_y(z_dense, w);
  const Matrix neg = detail::symmetrized(-g);
  TopkOptions opt;
  if (warm && warm->rows() == neg.rows()) opt.start = *warm;
  const Spectrum bottom = topk_eigh(neg, 1, seed, opt);
  if (warm) *warm = bottom.eigenvectors;
  const double lambda_min = -bottom.eigenvalues(0);
  DualGapParts parts;
  parts.primal = z.inner(g) - p.trace_radius() * lambda_min;
  parts.dual = dual_support(p.dual_domain(), gy) - w.values.dot(gy);
  return parts;
}

inline double dual_gap(const SaddleProblem& p, const LowRankPsd& z, const DualPoint& w,
                       std::uint64_t seed = 0x5eed, Matrix* warm = nullptr) {
  return dual_gap_parts(p, z, w, seed, warm).total();
}

/// max_y f(Z, y) - min_X f(X, w), evaluated with the problem's closed forms.
inline double saddle_gap(const SaddleProblem& p, const LowRankPsd& z, const DualPoint& w) {
  return p.max_over_dual(z.dense()) - p.min_over_primal(w);
}

/// Eigengap diagnostics of G* = grad_X f(X*, y*).
struct ComplementarityReport {
  Vector spectrum;     // eigenvalues of G*, ascending
  Index r_tilde = 0;   // multiplicity of the smallest eigenvalue
  Index r_max = 0;
  std::vector<double> delta;          // delta[r] = lambda_{n-r} - lambda_n, r = 0..r_max
  std::vector<double> radius;         // warm-start radius of the convergence guarantee, NaN for r < r_tilde
  std::vector<double> radius_per_step;  // the per-step radius variant, NaN where eta*beta >= 1

  double delta_at(Index r) const {
    detail::require(r >= 0 && r <= r_max, "ComplementarityReport: rank out of range");
    return delta[static_cast<std::size_t>(r)];
  }
  double radius_at(Index r) const {
    detail::require(r >= 0 && r <= r_max, "ComplementarityReport: rank out of range");
    return radius[static_cast<std::size_t>(r)];
  }
};

inline constexpr double kMultiplicityTol = 1e-6;

/// Computes r~, delta(r) and the warm-start radii for r <= r_max from the
/// full spectrum of the gradient at (x_star, y_star).
inline ComplementarityReport complementarity_report(const SaddleProblem& p, const LowRankPsd& x_star,
                                                    const DualPoint& y_star, Index r_max, double eta) {
  const Index n = p.dim();
  detail::require(r_max >= 1 && r_max < n, "complementarity_report: r_max must satisfy 1 <= r_max < n");
  const Matrix g = detail::symmetrized(p.grad_x(x_star.dense(), y_star));
  const Spectrum full = full_eigh(g);

  ComplementarityReport rep;
  rep.spectrum = full.eigenvalues.reverse();
  rep.r_max = r_max;
  const double lo = rep.spectrum(0);
  const double spread = rep.spectrum(n - 1) - lo;
  rep.r_tilde = 0;
  for (Index i = 0; i < n; ++i) {
    if (rep.spectrum(i) - lo <= kMultiplicityTol * spread) ++rep.r_tilde;
  }

  rep.delta.resize(static_cast<std::size_t>(r_max) + 1);
  for (Index r = 0; r <= r_max; ++r) rep.delta[static_cast<std::size_t>(r)] = rep.spectrum(r) - lo;

  const SmoothnessConstants c = p.constants();
  const double bmax = std::max(c.beta_x, c.beta_xy);
  const double coeff = eta / ((1.0 + std::sqrt(2.0)) * (1.0 + (2.0 + std::sqrt(2.0)) * eta * bmax));
  const double eb = eta * c.beta();
  const double coeff_step = eb < 1.0 ? eta / (1.0 + std::sqrt(2.0) * eta * bmax * (1.0 + 1.0 / std::sqrt(1.0 - eb * eb)))
                                 : std::numeric_limits<double>::quiet_NaN();
  const double rt = static_cast<double>(rep.r_tilde);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  rep.radius.assign(rep.delta.size(), nan);
  rep.radius_per_step.assign(rep.delta.size(), nan);
  for (Index r = rep.r_tilde; r <= r_max; ++r) {
    const double shifted = (r >= 2 * rep.r_tilde - 1) ? rep.delta[static_cast<std::size_t>(r - rep.r_tilde + 1)] : 0.0;
    const double inner_max = std::max(std::sqrt(rt) * shifted / 2.0,
                                      rep.delta[static_cast<std::size_t>(r)] / (1.0 + 1.0 / std::sqrt(rt)));
    rep.radius[static_cast<std::size_t>(r)] = coeff * inner_max;
    rep.radius_per_step[static_cast<std::size_t>(r)] = coeff_step * inner_max;
  }
  return rep;
}

/// Per-iteration solver record.
struct IterationRecord {
  std::size_t t = 0;
  double gap_probe = std::numeric_limits<double>::quiet_NaN();   // dual gap at (Z_{t+1}, w_{t+1})
  double gap_iterate = std::numeric_limits<double>::quiet_NaN(); // dual gap at (X_{t+1}, y_{t+1})
  double saddle_gap = std::numeric_limits<double>::quiet_NaN();  // max_y f(Z,y) - min_X f(X,w)
  double margin_probe = 0.0;
  double margin_update = 0.0;
  bool certified_probe = true;
  bool certified_update = true;
  int fallbacks = 0;
  double elapsed_ms = 0.0;
};

struct BestIterate {
  LowRankPsd x;
  DualPoint y;
  double gap = std::numeric_limits<double>::infinity();
  std::size_t iteration = 1;
  bool from_probe = false;
};

struct SolverReport {
  double eta = 0.0;
  Index rank = 0;
  ProjectionMode mode = ProjectionMode::CertifiedFallback;
  std::vector<IterationRecord> records;
  BestIterate best;
  SaddleState final_state;
  std::size_t certificate_violations = 0;  // uncertified projections
  std::size_t fallbacks = 0;               // exact recomputations after a failed certificate
  std::size_t near_boundary = 0;
  std::size_t eigensolver_fallbacks = 0;
  double wallclock_ms = 0.0;
  std::optional<ComplementarityReport> complementarity;

  /// Mean of the recorded saddle gaps (the ergodic quantity of the O(1/T) bound).
  double mean_saddle_gap() const {
    double s = 0.0;
    std::size_t c = 0;
    for (const auto& r : records) {
      if (std::isfinite(r.saddle_gap)) {
        s += r.saddle_gap;
        ++c;
      }
    }
    return c ? s / static_cast<double>(c) : std::numeric_limits<double>::quiet_NaN();
  }
};

using IterationObserver = std::function<void(const SaddleState& before, const StepResult& step)>;

struct SolverOptions {
  double eta = 0.0;
  std::size_t iterations = 0;
  Index rank = 1;
  ProjectionMode mode = ProjectionMode::CertifiedFallback;
  std::uint64_t seed = 0;
  std::size_t gap_every = 1;  // 0 disables dual-gap tracking
  bool track_saddle_gap = false;
  Index complementarity_rank_max = 0;  // 0: min(n - 1, 2 rank + 1); negative disables the report
  IterationObserver observer;
};

/// Default dual-gap cadence: every iteration up to n = 200, every 10th above.
inline std::size_t default_gap_every(Index n) { return n <= 200 ? 1 : 10; }

/// Runs T extragradient iterations from (x1, y1). The returned best iterate is
/// the point of either sequence with the smallest dual gap.
inline SolverReport eg_run(const SaddleProblem& p, const LowRankPsd& x1, const DualPoint& y1,
                           const SolverOptions& opt) {
  detail::require(opt.iterations >= 1, "eg_run: T must be at least 1");
  detail::require(opt.eta > 0.0, "eg_run: eta must be positive");
  detail::require(opt.rank >= 1, "eg_run: rank must be positive");
  const auto start = std::chrono::steady_clock::now();
  const auto elapsed = [&start] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  };

  SolverReport rep;
  rep.eta = opt.eta;
  rep.rank = opt.rank;
  rep.mode = opt.mode;
  rep.records.reserve(opt.iterations);

  SaddleState state = SaddleState::initial(x1, y1);
  Matrix warm_probe;
  Matrix warm_iterate;
  const bool track_gap = opt.gap_every > 0;
  auto consider = [&rep](const LowRankPsd& x, const DualPoint& y, double gap, std::size_t t, bool probe) {
    if (gap < rep.best.gap) {
      rep.best.x = x;
      rep.best.y = y;
      rep.best.gap = gap;
      rep.best.iteration = t;
      rep.best.from_probe = probe;
    }
  };
  if (track_gap) {
    consider(state.x, state.y, dual_gap(p, state.x, state.y, mix_seed(opt.seed, 0, 7), &warm_iterate), 1, false);
  }

  for (std::size_t t = 1; t <= opt.iterations; ++t) {
    StepResult step = eg_step(p, state, opt.eta, opt.rank, opt.mode, opt.seed);
    IterationRecord rec;
    rec.t = t;
    rec.margin_probe = step.probe.certificate_margin;
    rec.margin_update = step.update.certificate_margin;
    rec.certified_probe = step.probe.certified;
    rec.certified_update = step.update.certified;
    for (const ProjectionOutcome* o : {&step.probe, &step.update}) {
      if (!o->certified && opt.mode != ProjectionMode::Full) ++rep.certificate_violations;
      if (o->fallback_used) {
        ++rep.fallbacks;
        ++rec.fallbacks;
      }
      if (o->near_boundary) ++rep.near_boundary;
      if (o->eigensolver_fallback) ++rep.eigensolver_fallbacks;
    }

    const bool gap_now = track_gap && (t % opt.gap_every == 0 || t == opt.iterations);
    if (gap_now) {
      rec.gap_probe = dual_gap(p, step.state.z, step.state.w, mix_seed(opt.seed, t, 2), &warm_probe);
      rec.gap_iterate = dual_gap(p, step.state.x, step.state.y, mix_seed(opt.seed, t, 3), &warm_iterate);
      if (!std::isfinite(rec.gap_probe) || !std::isfinite(rec.gap_iterate))
        throw NumericalFailure("dual gap is non-finite", t);
      consider(step.state.z, step.state.w, rec.gap_probe, t + 1, true);
      consider(step.state.x, step.state.y, rec.gap_iterate, t + 1, false);
    }
    if (opt.track_saddle_gap) rec.saddle_gap = saddle_gap(p, step.state.z, step.state.w);
    rec.elapsed_ms = elapsed();
    if (opt.observer) opt.observer(state, step);
    state = std::move(step.state);
    rep.records.push_back(rec);
  }

  if (!track_gap) {
    rep.best.x = state.x;
    rep.best.y = state.y;
    rep.best.gap = std::numeric_limits<double>::quiet_NaN();
    rep.best.iteration = state.iteration;
  }
  rep.final_state = std::move(state);

  const Index n = p.dim();
  if (opt.complementarity_rank_max >= 0 && n >= 2) {
    const Index r_max = opt.complementarity_rank_max > 0 ? std::min(opt.complementarity_rank_max, n - 1)
                                                         : std::min(n - 1, 2 * opt.rank + 1);
    rep.complementarity = complementarity_report(p, rep.best.x, rep.best.y, r_max, opt.eta);
  }
  rep.wallclock_ms = elapsed();
  return rep;
}

/// Central finite-difference check of grad_x and grad_y at random feasible
/// points; returns the largest relative error |fd - analytic| / max(1, |analytic|).
inline double check_gradients(const SaddleProblem& p, std::size_t samples, std::uint64_t seed) {
  detail::require(samples >= 1, "check_gradients: samples must be positive");
  const Index n = p.dim();
  const double tau = p.trace_radius();
  const DualDomain domain = p.dual_domain();
  const Index dy = dual_size(domain);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> radius(0.0, 1.0);

  double worst = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    Matrix b(n, n);
    detail::fill_gaussian(b, rng);
    Matrix x = b * b.transpose();
    x *= tau / x.trace();

    Vector yv(dy);
    if (is_matrix_domain(domain)) {
      for (Index i = 0; i < dy; ++i) yv(i) = unit(rng);
    } else if (dy > 0) {
      Matrix tmp(dy, 1);
      detail::fill_gaussian(tmp, rng);
      yv = tmp.col(0).normalized() * radius(rng);
    }
    const DualPoint y(domain, yv);

    Matrix e(n, n);
    detail::fill_gaussian(e, rng);
    e = detail::symmetrized(e);
    e /= e.norm();
    const double hx = 1e-5 * std::max(1.0, x.norm());
    const double fd_x = (p.value(x + hx * e, y) - p.value(x - hx * e, y)) / (2.0 * hx);
    const double an_x = inner(p.grad_x(x, y), e);
    worst = std::max(worst, std::abs(fd_x - an_x) / std::max(1.0, std::abs(an_x)));

    if (dy > 0) {
      Matrix d(dy, 1);
      detail::fill_gaussian(d, rng);
      const Vector dir = d.col(0).normalized();
      const double hy = 1e-5 * std::max(1.0, yv.norm());
      const DualPoint yp(domain, yv + hy * dir);
      const DualPoint ym(domain, yv - hy * dir);
      const double fd_y = (p.value(x, yp) - p.value(x, ym)) / (2.0 * hy);
      const double an_y = p.grad_y(x, y).dot(dir);
      worst = std::max(worst, std::abs(fd_y - an_y) / std::max(1.0, std::abs(an_y)));
    }
  }
  return worst;
}

}  // namespace specgrad
