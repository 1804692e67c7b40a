#pragma once

/**
 * @file solver.hpp
 * @brief Zeroth-order Newton iteration with incremental Hessian estimates.
 *
 * One iteration at x_k:
 *   1. draw an orthonormal frame of d directions, probe it, build g_k;
 *   2. stop if ||g_k|| <= d L2 mu^2 / 6 (when L2 and m are known);
 *   3. choose r_k (fixed or adaptive), probe r_k - d further directions at
 *      the same center and apply all r_k rank-one updates to the Hessian
 *      estimate carried over from the previous iteration;
 *   4. clip the spectrum of H_k into [lambda_min, lambda_max], invert to get
 *      Z_k, and set x_{k+1} = x_k - alpha Z_k g_k.
 * The iteration costs 2 r_k + 1 function evaluations.
 *
 * The solver is written against a Prober so the same loop drives a single
 * oracle or a federation of clients (see fedsim.hpp).
 */

#include "fedzen/estimators.hpp"
#include "fedzen/oracle.hpp"
#include "fedzen/sampling.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace fedzen {

// ---------------------------------------------------------------------------
// Closed-form pieces

/**
 * Z = Q clamp(L)^{-1} Q^T where H = Q L Q^T and clamp projects every
 * eigenvalue onto [lambda_min, lambda_max]. The spectrum of Z lies in
 * [1/lambda_max, 1/lambda_min]; when the spectrum of H already lies in the
 * bracket, Z = H^{-1}.
 */
inline Matrix eigenvalue_clip(const Matrix& h, double lambda_min, double lambda_max) {
  if (h.rows() != h.cols()) throw std::invalid_argument("eigenvalue_clip: matrix not square");
  if (!(lambda_min > 0.0) || !(lambda_min <= lambda_max)) {
    throw std::invalid_argument("eigenvalue_clip: need 0 < lambda_min <= lambda_max");
  }
  const double asym = (h - h.transpose()).norm();
  if (asym > 1e-8 * std::max(1.0, h.norm())) {
    throw std::invalid_argument("eigenvalue_clip: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (h + h.transpose()));
  if (eig.info() != Eigen::Success) throw std::runtime_error("eigenvalue_clip: eigensolver failed");
  const Vector clipped = eig.eigenvalues().cwiseMax(lambda_min).cwiseMin(lambda_max);
  const Matrix& q = eig.eigenvectors();
  Matrix z = q * clipped.cwiseInverse().asDiagonal() * q.transpose();
  return 0.5 * (z + z.transpose());
}

/// x - alpha Z g
inline Vector newton_step(const Vector& x, const Matrix& z, const Vector& g, double alpha) {
  if (z.rows() != x.size() || z.cols() != g.size() || g.size() != x.size()) {
    throw DimensionMismatch(x.size(), g.size());
  }
  return x - alpha * (z * g);
}

/// lambda_min / L1, the stepsize maximizing the global linear rate.
inline double optimal_stepsize(double lambda_min, double l1) {
  if (!(l1 > 0.0)) throw std::invalid_argument("optimal_stepsize: L1 must be positive");
  return lambda_min / l1;
}

/// Per-iteration f-gap decrease factor gamma(alpha) of the global linear rate.
inline double linear_rate_gamma(double alpha, double m, double lambda_min, double lambda_max,
                                double l1) {
  return (2.0 * m * alpha / lambda_max) * (1.0 - l1 * alpha / (2.0 * lambda_min));
}

/// gamma at alpha = lambda_min / L1, equal to m lambda_min / (L1 lambda_max).
inline double optimal_linear_rate_gamma(double m, double lambda_min, double lambda_max, double l1) {
  return m * lambda_min / (l1 * lambda_max);
}

/**
 * Zeroth-order precision test. When ||g|| <= d L2 mu^2 / 6 the iterate is
 * within d L2 mu^2 / (3 m) of the minimizer; that distance is returned.
 */
inline std::optional<double> zo_floor_stop(double g_norm, Index d, double l2, double mu,
                                           double m) {
  if (g_norm <= gradient_error_bound(d, l2, mu)) {
    return static_cast<double>(d) * l2 * mu * mu / (3.0 * m);
  }
  return std::nullopt;
}

/**
 * Direction count for one iteration. Targets a Hessian error of
 * eps_k = (||g|| - d L2 mu^2 / 6) / L1 and assumes the error contracts like
 * sqrt(eta) per update from `error_proxy`, giving
 * r_k = d + ceil(log(eps_k^2 / error_proxy^2) / log(eta)), clamped to
 * [d, r_max]. Returns d when error_proxy <= eps_k and r_max when eps_k <= 0.
 */
inline Index adaptive_direction_count(double g_norm, Index d, double l1, double l2, double mu,
                                      double eta, double error_proxy, Index r_max) {
  const Index hi = std::max(d, r_max);
  const double eps = (g_norm - gradient_error_bound(d, l2, mu)) / l1;
  if (!(eps > 0.0)) return hi;
  if (error_proxy <= eps) return d;
  const double s = std::ceil(std::log((eps * eps) / (error_proxy * error_proxy)) / std::log(eta));
  if (!(s < static_cast<double>(hi - d))) return hi;
  return d + std::max<Index>(0, static_cast<Index>(s));
}

/**
 * Surrogate for ||H - hess f||_F from curvature residuals rho_j =
 * c_j - u_j^T H u_j along sphere-distributed directions: for such u,
 * E[(u^T D u)^2] = (2 ||D||_F^2 + tr(D)^2) / (d (d + 2)), so
 * sqrt(mean rho^2 * d (d + 2) / 2) tracks ||D||_F. Heuristic.
 */
inline double hessian_error_proxy(const Matrix& h, const ProbeResult& probe, Index n) {
  const Index d = h.rows();
  double sum = 0.0;
  for (Index j = 0; j < n; ++j) {
    const double rho = directional_curvature(probe, j) - quadratic_form(h, probe.directions.direction(j));
    sum += rho * rho;
  }
  const double mean = sum / static_cast<double>(n);
  return std::sqrt(mean * static_cast<double>(d * (d + 2)) / 2.0);
}

// ---------------------------------------------------------------------------
// Configuration and state

struct FixedR {
  Index r = 0;  ///< 0 means r = d
};

struct AdaptiveR {
  double delta = 0.1;  ///< recorded only; no explicit bound on r uses it
  Index r_max = 0;     ///< 0 means d * d
  Index r_min = 0;     ///< 0 means d
};

using RPolicy = std::variant<FixedR, AdaptiveR>;

struct SolverConfig {
  double mu = 1e-6;
  std::optional<double> alpha;  ///< unset: lambda_min / L1 if L1 known, else 1
  double lambda_min = 1e-6;
  double lambda_max = 1e6;
  RPolicy r_policy = FixedR{};
  std::uint64_t max_iterations = 100;
  std::optional<double> L0, L1, L2, m;
  bool stop_on_zo_floor = true;

  double resolved_alpha() const {
    if (alpha) return *alpha;
    if (L1) return optimal_stepsize(lambda_min, *L1);
    return 1.0;
  }

  void validate(Index d) const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("SolverConfig: " + what); };
    if (!(mu > 0.0)) fail("mu must be positive");
    if (alpha && !(*alpha > 0.0)) fail("alpha must be positive");
    if (!(lambda_min > 0.0) || !(lambda_min <= lambda_max)) fail("need 0 < lambda_min <= lambda_max");
    if (max_iterations < 1) fail("max_iterations must be at least 1");
    if (L1 && !(*L1 > 0.0)) fail("L1 must be positive");
    if (L2 && !(*L2 >= 0.0)) fail("L2 must be non-negative");
    if (m && !(*m > 0.0)) fail("m must be positive");
    if (const auto* fixed = std::get_if<FixedR>(&r_policy)) {
      if (fixed->r != 0 && fixed->r < d) {
        fail("fixed r = " + std::to_string(fixed->r) + " is below d = " + std::to_string(d) +
             "; the gradient needs d orthonormal directions");
      }
    } else {
      const auto& adaptive = std::get<AdaptiveR>(r_policy);
      if (!L1) fail("adaptive r needs L1");
      if (!(adaptive.delta > 0.0 && adaptive.delta < 1.0)) fail("delta must lie in (0, 1)");
      if (adaptive.r_max != 0 && adaptive.r_max < d) fail("r_max must be at least d");
      if (adaptive.r_max != 0 && adaptive.r_min > adaptive.r_max) fail("r_min exceeds r_max");
    }
  }
};

enum class Status { running, stopped_zo_floor, stopped_max_iter, stopped_budget };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::running: return "running";
    case Status::stopped_zo_floor: return "stopped_zo_floor";
    case Status::stopped_max_iter: return "stopped_max_iter";
    case Status::stopped_budget: return "stopped_budget";
  }
  return "unknown";
}

struct SolverState {
  Vector x;
  HessianEstimate H;
  std::optional<GradientEstimate> g;
  std::uint64_t k = 0;
  std::uint64_t evals = 0;
  Status status = Status::running;
  std::optional<double> zo_bound;  ///< distance guarantee when stopped at the floor

  static SolverState initial(const Vector& x0) {
    SolverState s;
    s.x = x0;
    s.H = HessianEstimate::zero(x0.size());
    return s;
  }
};

/// Closed forms used only for reporting errors in the trace.
struct GroundTruth {
  std::optional<Vector> x_star;
  std::optional<double> f_star;
  std::function<Matrix(const Vector&)> hessian;
};

struct TraceRecord {
  std::uint64_t k = 0;
  std::uint64_t evals = 0;  ///< cumulative, after this iteration
  double f_value = 0.0;     ///< f(x_k), the probe center
  std::optional<double> f_gap;
  double grad_norm_est = 0.0;
  Index r_used = 0;
  double alpha = 0.0;
  double step_norm = 0.0;
  std::optional<double> x_err;          ///< ||x_k - x*||
  std::optional<double> hess_err_fro;   ///< ||H_k - hess f(x_k)||_F after this iteration's updates
  std::optional<std::uint64_t> up_scalars;
  std::optional<std::uint64_t> down_scalars;
};

struct RunTrace {
  std::vector<TraceRecord> records;
  Status status = Status::running;
  Vector x_final;
  std::uint64_t total_evals = 0;
  std::optional<double> zo_bound;
  std::optional<double> delta;
  std::vector<std::uint64_t> client_evals;  ///< federated runs only
};

// ---------------------------------------------------------------------------
// Probers

/// Scalars exchanged between server and clients during one probe call.
struct Traffic {
  std::uint64_t up = 0;
  std::uint64_t down = 0;
};

template <class P>
concept Prober = requires(P p, const Vector& x, const DirectionSet& dirs, ProbeResult& probe) {
  { p.dim() } -> std::convertible_to<Index>;
  { p.probe(x, dirs, 1.0) } -> std::same_as<ProbeResult>;
  { p.extend(probe, x, dirs) } -> std::same_as<void>;
  { p.evaluations() } -> std::convertible_to<std::uint64_t>;
  { p.take_traffic() } -> std::same_as<std::optional<Traffic>>;
};

/// Probes a single oracle.
class OracleProber {
 public:
  explicit OracleProber(Oracle& oracle) : oracle_(&oracle) {}

  Index dim() const { return oracle_->dim(); }
  ProbeResult probe(const Vector& x, const DirectionSet& dirs, double mu) {
    return probe_batch(*oracle_, x, dirs, mu);
  }
  void extend(ProbeResult& probe, const Vector& x, const DirectionSet& dirs) {
    probe_extend(*oracle_, probe, x, dirs);
  }
  std::uint64_t evaluations() const { return oracle_->eval_count(); }
  std::optional<Traffic> take_traffic() { return std::nullopt; }

 private:
  Oracle* oracle_;
};

// ---------------------------------------------------------------------------
// Iteration

namespace detail {

inline Index resolve_r(const SolverConfig& config, const SolverState& state,
                       const ProbeResult& probe, const GradientEstimate& grad, Index d) {
  if (const auto* fixed = std::get_if<FixedR>(&config.r_policy)) {
    return fixed->r == 0 ? d : fixed->r;
  }
  const auto& adaptive = std::get<AdaptiveR>(config.r_policy);
  const Index r_max = adaptive.r_max == 0 ? d * d : adaptive.r_max;
  const Index r_min = std::max(d, adaptive.r_min);
  const double proxy = hessian_error_proxy(state.H.H, probe, d);
  const Index r = adaptive_direction_count(grad.g.norm(), d, *config.L1, config.L2.value_or(0.0),
                                           config.mu, eta_rate(d), proxy, r_max);
  return std::max(r, std::min(r_min, r_max));
}

}  // namespace detail

/**
 * Advances `state` by one iteration and appends a record to `trace` when it
 * is non-null. Budget exhaustion leaves x unchanged, sets stopped_budget and
 * appends nothing.
 */
template <Prober P>
SolverState fedzen_iterate(SolverState state, P& prober, const SolverConfig& config,
                           RngStream& rng, const GroundTruth& truth = {},
                           RunTrace* trace = nullptr) {
  if (state.status != Status::running) throw std::logic_error("fedzen_iterate: state is not running");
  const Index d = prober.dim();
  if (state.x.size() != d) throw DimensionMismatch(d, state.x.size());
  const double alpha = config.resolved_alpha();

  TraceRecord rec;
  rec.k = state.k;
  rec.alpha = alpha;
  Traffic traffic;
  bool has_traffic = false;
  auto collect = [&] {
    if (auto t = prober.take_traffic()) {
      traffic.up += t->up;
      traffic.down += t->down;
      has_traffic = true;
    }
  };

  try {
    // (i) orthonormal frame and gradient
    ProbeResult probe = prober.probe(state.x, stiefel_sample(d, d, rng), config.mu);
    collect();
    GradientEstimate grad = estimate_gradient(probe);
    const double g_norm = grad.g.norm();
    rec.f_value = probe.center_value;
    rec.grad_norm_est = g_norm;

    // (ii) zeroth-order floor
    std::optional<double> floor_bound;
    if (config.stop_on_zo_floor && config.L2 && config.m) {
      floor_bound = zo_floor_stop(g_norm, d, *config.L2, config.mu, *config.m);
    }

    // (iii) remaining directions and Hessian updates
    Index r = d;
    if (!floor_bound) {
      r = detail::resolve_r(config, state, probe, grad, d);
      if (r > d) {
        prober.extend(probe, state.x, stiefel_sample(d, r - d, rng));
        collect();
      }
    }
    apply_probe_updates(state.H, probe, 0, r);
    state.H.last_center = state.x;
    rec.r_used = r;

    if (truth.f_star) rec.f_gap = rec.f_value - *truth.f_star;
    if (truth.x_star) rec.x_err = (state.x - *truth.x_star).norm();
    if (truth.hessian) rec.hess_err_fro = (state.H.H - truth.hessian(state.x)).norm();

    // (iv) clipped Newton step
    if (floor_bound) {
      state.status = Status::stopped_zo_floor;
      state.zo_bound = floor_bound;
      rec.step_norm = 0.0;
    } else {
      const Matrix z = eigenvalue_clip(state.H.H, config.lambda_min, config.lambda_max);
      const Vector next = newton_step(state.x, z, grad.g, alpha);
      rec.step_norm = (next - state.x).norm();
      state.x = next;
    }
    state.g = std::move(grad);
    ++state.k;
  } catch (const BudgetExhausted&) {
    state.status = Status::stopped_budget;
    state.evals = prober.evaluations();
    prober.take_traffic();
    return state;
  }

  state.evals = prober.evaluations();
  rec.evals = state.evals;
  if (has_traffic) {
    rec.up_scalars = traffic.up;
    rec.down_scalars = traffic.down;
  }
  if (trace) trace->records.push_back(rec);
  return state;
}

/// Iterates until the floor test fires, the budget runs out or
/// max_iterations records exist, in that order of precedence.
template <Prober P>
RunTrace fedzen_run_with(const Vector& x0, P& prober, const SolverConfig& config, RngStream& rng,
                         const GroundTruth& truth = {}) {
  config.validate(prober.dim());
  if (x0.size() != prober.dim()) throw DimensionMismatch(prober.dim(), x0.size());
  RunTrace trace;
  if (const auto* adaptive = std::get_if<AdaptiveR>(&config.r_policy)) trace.delta = adaptive->delta;
  SolverState state = SolverState::initial(x0);
  state.evals = prober.evaluations();
  while (state.status == Status::running) {
    if (state.k >= config.max_iterations) {
      state.status = Status::stopped_max_iter;
      break;
    }
    state = fedzen_iterate(std::move(state), prober, config, rng, truth, &trace);
  }
  trace.status = state.status;
  trace.x_final = state.x;
  trace.total_evals = state.evals;
  trace.zo_bound = state.zo_bound;
  return trace;
}

inline RunTrace fedzen_run(const Vector& x0, Oracle& oracle, const SolverConfig& config,
                           RngStream& rng, const GroundTruth& truth = {}) {
  OracleProber prober(oracle);
  return fedzen_run_with(x0, prober, config, rng, truth);
}

}  // namespace fedzen
