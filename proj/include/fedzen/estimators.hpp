#pragma once

/**
 * @file estimators.hpp
 * @brief Zeroth-order gradient and incremental Hessian estimators.
 *
 * Both estimators read the same ProbeResult. The Hessian estimate is built by
 * the rank-one recursion
 *
 *     H <- H + (c_j - u_j^T H u_j) u_j u_j^T,
 *
 * where c_j is the second central difference of f along u_j, so after each
 * update the estimate reproduces the probed curvature along u_j. The
 * gradient is the central-difference expansion on the first d (orthonormal)
 * probe directions and costs no extra queries.
 */

#include "fedzen/direction_set.hpp"
#include "fedzen/oracle.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace fedzen {

struct HessianEstimate {
  Matrix H;
  std::uint64_t updates_applied = 0;
  std::optional<Vector> last_center;

  static HessianEstimate zero(Index d) { return {Matrix::Zero(d, d), 0, std::nullopt}; }
  Index dim() const { return H.rows(); }
};

struct GradientEstimate {
  Vector g;
  double mu_used = 0.0;
  DirectionSet basis;
};

/// (f(x + mu u_j) - 2 f(x) + f(x - mu u_j)) / mu^2
inline double directional_curvature(const ProbeResult& probe, Index j) {
  if (j < 0 || j >= probe.count()) throw std::out_of_range("directional_curvature: bad index");
  return (probe.plus_values[j] - 2.0 * probe.center_value + probe.minus_values[j]) /
         (probe.mu * probe.mu);
}

/// u^T H u
inline double quadratic_form(const Matrix& h, const Eigen::Ref<const Vector>& u) {
  return u.dot(h * u);
}

/**
 * One step of the rank-one recursion. The update is written entry by entry
 * so that H(i,j) and H(j,i) receive the same rounded value.
 */
inline HessianEstimate& hessian_rank_one_update(HessianEstimate& est,
                                                const Eigen::Ref<const Vector>& u,
                                                double curvature) {
  if (u.size() != est.dim()) throw DimensionMismatch(est.dim(), u.size());
  require_unit(u, "hessian_rank_one_update");
  const double scale = curvature - quadratic_form(est.H, u);
  const Index d = est.dim();
  for (Index j = 0; j < d; ++j) {
    for (Index i = j; i < d; ++i) {
      const double v = est.H(i, j) + scale * (u(i) * u(j));
      est.H(i, j) = v;
      est.H(j, i) = v;
    }
  }
  ++est.updates_applied;
  return est;
}

/// Applies the updates for probe directions [first, first + n) in order.
inline void apply_probe_updates(HessianEstimate& est, const ProbeResult& probe, Index first,
                                Index n) {
  for (Index j = first; j < first + n; ++j) {
    hessian_rank_one_update(est, probe.directions.direction(j), directional_curvature(probe, j));
  }
}

/**
 * Probes f at x along every direction (2r + 1 evaluations) and runs the
 * recursion from `warm_start`, or from the zero matrix when absent. The probe
 * is returned so the gradient can be built from it for free.
 */
inline std::pair<HessianEstimate, ProbeResult> estimate_hessian(
    Oracle& oracle, const Vector& x, const DirectionSet& directions, double mu,
    const std::optional<HessianEstimate>& warm_start = std::nullopt) {
  if (directions.count() < 1) throw std::invalid_argument("estimate_hessian: no directions");
  HessianEstimate est = warm_start ? *warm_start : HessianEstimate::zero(oracle.dim());
  if (est.dim() != oracle.dim()) throw DimensionMismatch(oracle.dim(), est.dim());
  ProbeResult probe = probe_batch(oracle, x, directions, mu);
  apply_probe_updates(est, probe, 0, probe.count());
  est.last_center = x;
  return {std::move(est), std::move(probe)};
}

class InsufficientDirections : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/**
 * g = sum_{j<d} (f(x + mu u_j) - f(x - mu u_j)) / (2 mu) u_j over the first
 * d probe directions, which must be orthonormal. With an exact orthonormal
 * basis the error is at most d L2 mu^2 / 6, L2 being the Hessian Lipschitz
 * constant.
 */
inline GradientEstimate estimate_gradient(const ProbeResult& probe) {
  const Index d = probe.directions.dim();
  if (probe.count() < d || !probe.directions.leading_orthonormal(d)) {
    throw InsufficientDirections(
        "estimate_gradient: need " + std::to_string(d) +
        " orthonormal leading directions; enlarge r to at least d with an orthonormal frame");
  }
  GradientEstimate out;
  out.g = Vector::Zero(d);
  for (Index j = 0; j < d; ++j) {
    const double slope = (probe.plus_values[j] - probe.minus_values[j]) / (2.0 * probe.mu);
    out.g += slope * probe.directions.direction(j);
  }
  out.mu_used = probe.mu;
  out.basis = probe.directions.head(d);
  return out;
}

/// Expected per-update contraction of the squared Frobenius error for
/// directions uniform on the sphere: 1 - 2 / (d^2 + 2d).
inline double eta_rate(Index d) {
  if (d < 1) throw std::invalid_argument("eta_rate: d must be positive");
  const double dd = static_cast<double>(d);
  return 1.0 - 2.0 / (dd * dd + 2.0 * dd);
}

/// d L2 mu^2 / 6
inline double gradient_error_bound(Index d, double l2, double mu) {
  return static_cast<double>(d) * l2 * mu * mu / 6.0;
}

}  // namespace fedzen
