#pragma once

// Dual domains K: the entrywise infinity-ball of n x n matrices and the
// Euclidean unit ball of R^m. Points are stored flat (column-major for the
// matrix case) so the solver can treat both uniformly.

#include <cmath>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>

#include "specgrad/linalg.hpp"

namespace specgrad {

/// {Y in R^{n x n} : max |Y_ij| <= 1}
struct MatInfBall {
  Index n = 0;
};

/// {y in R^m : ||y||_2 <= 1}; m = 0 models a problem without a dual block.
struct VecL2Ball {
  Index m = 0;
};

using DualDomain = std::variant<MatInfBall, VecL2Ball>;

inline Index dual_size(const DualDomain& d) {
  return std::visit(
      [](const auto& k) -> Index {
        if constexpr (std::is_same_v<std::decay_t<decltype(k)>, MatInfBall>)
          return k.n * k.n;
        else
          return k.m;
      },
      d);
}

inline bool is_matrix_domain(const DualDomain& d) { return std::holds_alternative<MatInfBall>(d); }

inline std::string dual_domain_name(const DualDomain& d) { return is_matrix_domain(d) ? "mat_inf_ball" : "vec_l2_ball"; }

/// Euclidean diameter of K.
inline double dual_diameter(const DualDomain& d) {
  if (const auto* k = std::get_if<MatInfBall>(&d)) return 2.0 * static_cast<double>(k->n);
  return std::get<VecL2Ball>(d).m > 0 ? 2.0 : 0.0;
}

/// Euclidean projection onto K: entrywise clamp, or radial scaling.
inline Vector dual_project(const DualDomain& d, Vector raw) {
  detail::require(raw.size() == dual_size(d), "dual_project: size mismatch");
  if (is_matrix_domain(d)) return raw.cwiseMax(-1.0).cwiseMin(1.0);
  const double norm = raw.norm();
  if (norm > 1.0) raw /= norm;
  return raw;
}

/// max_{y in K} <y, g>: the l1 norm for the infinity-ball, l2 norm for the l2-ball.
inline double dual_support(const DualDomain& d, const Eigen::Ref<const Vector>& g) {
  if (g.size() == 0) return 0.0;
  return is_matrix_domain(d) ? g.lpNorm<1>() : g.norm();
}

/// A maximizer of <y, g> over K (sign(g), or g / ||g||).
inline Vector dual_maximizer(const DualDomain& d, const Eigen::Ref<const Vector>& g) {
  if (is_matrix_domain(d)) {
    return g.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
  }
  const double norm = g.norm();
  return norm > 0.0 ? Vector(g / norm) : Vector::Zero(g.size());
}

/// A point of the dual domain.
struct DualPoint {
  DualDomain domain = VecL2Ball{0};
  Vector values;

  DualPoint() = default;
  DualPoint(DualDomain d, Vector v) : domain(std::move(d)), values(std::move(v)) {
    detail::require(values.size() == dual_size(domain), "DualPoint: size mismatch");
  }

  static DualPoint zero(const DualDomain& d) { return DualPoint(d, Vector::Zero(dual_size(d))); }

  static DualPoint from_matrix(const Eigen::Ref<const Matrix>& y) {
    detail::require(y.rows() == y.cols(), "DualPoint: matrix dual must be square");
    Matrix copy = y;
    return DualPoint(MatInfBall{y.rows()}, Eigen::Map<Vector>(copy.data(), copy.size()));
  }

  /// Matrix view for MatInfBall points.
  Eigen::Map<const Matrix> matrix() const {
    const Index n = std::get<MatInfBall>(domain).n;
    return Eigen::Map<const Matrix>(values.data(), n, n);
  }

  /// Norm-bound violation: max(0, ||y|| - 1) in the domain's norm.
  double infeasibility() const {
    if (values.size() == 0) return 0.0;
    const double norm = is_matrix_domain(domain) ? values.cwiseAbs().maxCoeff() : values.norm();
    return std::max(0.0, norm - 1.0);
  }
};

}  // namespace specgrad
