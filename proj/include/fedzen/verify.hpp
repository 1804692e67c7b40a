#pragma once

/**
 * @file verify.hpp
 * @brief Monte-Carlo and run-based checks of the estimator and solver
 * guarantees. Each check returns a report with the measured quantities and a
 * pass flag; thresholds are fixed here and in the option defaults.
 *
 * Trial t of an experiment seeded with s draws from RngStream(s + t + 1);
 * stream s itself builds the problem instance.
 */

#include "fedzen/estimators.hpp"
#include "fedzen/fedsim.hpp"
#include "fedzen/oracle.hpp"
#include "fedzen/problems.hpp"
#include "fedzen/sampling.hpp"
#include "fedzen/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <tuple>
#include <vector>

namespace fedzen::verify {

// ---------------------------------------------------------------------------
// Rank-one matching property

struct MatchingReport {
  std::size_t trials = 0;
  double max_rel_error = 0.0;
  bool pass = false;
};

/// After an update along u with curvature c, |u^T H' u - c| <= tol (1 + |c|)
/// for random (d <= 8, symmetric H, unit u, c).
inline MatchingReport matching_property(std::size_t trials, std::uint64_t seed, double tol = 1e-9) {
  RngStream rng(seed);
  MatchingReport rep;
  rep.trials = trials;
  for (std::size_t t = 0; t < trials; ++t) {
    const Index d = 1 + static_cast<Index>(rng.uniform_index(8));
    Matrix h(d, d);
    for (Index j = 0; j < d; ++j)
      for (Index i = 0; i <= j; ++i) h(i, j) = h(j, i) = 10.0 * rng.normal();
    HessianEstimate est{h, 0, std::nullopt};
    const Vector u = gaussian_sphere_sample(d, 1, rng).columns.col(0);
    const double c = 10.0 * rng.normal();
    hessian_rank_one_update(est, u, c);
    const double err = std::abs(quadratic_form(est.H, u) - c) / (1.0 + std::abs(c));
    rep.max_rel_error = std::max(rep.max_rel_error, err);
  }
  rep.pass = rep.max_rel_error <= tol;
  return rep;
}

// ---------------------------------------------------------------------------
// Contraction rate of the incremental estimator

struct EtaRateOptions {
  Index d = 5;
  std::size_t trials = 2000;
  Index updates = 0;  ///< 0 means d (d + 2)
  double mu = 1e-6;
  double condition = 10.0;
  double slack = 0.02;
  std::uint64_t seed = 7;
};

struct EtaRateReport {
  double eta = 0.0;
  double ratio = 0.0;           ///< geometric mean per-update ratio
  double max_step_ratio = 0.0;  ///< largest single-step ratio of the means
  std::vector<double> mean_sq_error;  ///< index k: mean ||H^k - A||_F^2
  bool pass = false;
};

/**
 * Runs the recursion from H = 0 on f(x) = 1/2 x^T A x probed at x = 0 with
 * i.i.d. sphere directions, averages ||H^k - A||_F^2 over trials, and
 * compares the per-update ratio (mean_K / mean_0)^(1/K) against eta (1 + slack).
 */
inline EtaRateReport eta_rate_experiment(const EtaRateOptions& opt) {
  const Index d = opt.d;
  const Index updates = opt.updates == 0 ? d * (d + 2) : opt.updates;
  RngStream setup(opt.seed);
  const Matrix a = random_spd(d, opt.condition, setup);
  const ProblemSpec problem = make_quadratic(a, Vector::Zero(d));
  const Vector x = Vector::Zero(d);

  EtaRateReport rep;
  rep.eta = eta_rate(d);
  rep.mean_sq_error.assign(static_cast<std::size_t>(updates) + 1, 0.0);
  for (std::size_t t = 0; t < opt.trials; ++t) {
    RngStream rng = RngStream::derive(opt.seed, t + 1);
    Oracle oracle = problem.make_oracle();
    const DirectionSet dirs = gaussian_sphere_sample(d, updates, rng);
    const ProbeResult probe = probe_batch(oracle, x, dirs, opt.mu);
    HessianEstimate est = HessianEstimate::zero(d);
    rep.mean_sq_error[0] += (est.H - a).squaredNorm();
    for (Index k = 0; k < updates; ++k) {
      hessian_rank_one_update(est, dirs.direction(k), directional_curvature(probe, k));
      rep.mean_sq_error[static_cast<std::size_t>(k) + 1] += (est.H - a).squaredNorm();
    }
  }
  for (double& v : rep.mean_sq_error) v /= static_cast<double>(opt.trials);
  for (std::size_t k = 1; k < rep.mean_sq_error.size(); ++k) {
    rep.max_step_ratio = std::max(rep.max_step_ratio, rep.mean_sq_error[k] / rep.mean_sq_error[k - 1]);
  }
  rep.ratio = std::pow(rep.mean_sq_error.back() / rep.mean_sq_error.front(), 1.0 / static_cast<double>(updates));
  rep.pass = rep.ratio <= rep.eta * (1.0 + opt.slack);
  return rep;
}

// ---------------------------------------------------------------------------
// Gradient error bound

struct GradientBoundOptions {
  Index d = 4;
  double box_radius = 1.0;
  std::vector<double> mus{1e-1, 1e-2, 1e-3};
  std::size_t points = 100;
  std::uint64_t seed = 11;
};

struct GradientBoundReport {
  std::size_t checks = 0;
  std::size_t violations = 0;
  double max_error_over_bound = 0.0;
  bool pass = false;
};

/// ||grad f(x) - g(x)|| <= d L2 mu^2 / 6 + 1e-12 (1 + ||grad f(x)||) on the
/// cubic-box problem at random points with random orthonormal bases.
inline GradientBoundReport gradient_bound_experiment(const GradientBoundOptions& opt) {
  const ProblemSpec problem = make_cubic_box(opt.d, opt.box_radius);
  const double l2 = *problem.known->L2;
  GradientBoundReport rep;
  for (std::size_t t = 0; t < opt.points; ++t) {
    RngStream rng = RngStream::derive(opt.seed, t + 1);
    Vector x(opt.d);
    for (Index i = 0; i < opt.d; ++i) x(i) = rng.uniform(-opt.box_radius, opt.box_radius);
    const DirectionSet basis = stiefel_sample(opt.d, opt.d, rng);
    const Vector exact = problem.known->gradient(x);
    for (double mu : opt.mus) {
      Oracle oracle = problem.make_oracle();
      const GradientEstimate g = estimate_gradient(probe_batch(oracle, x, basis, mu));
      const double bound = gradient_error_bound(opt.d, l2, mu);
      const double err = (exact - g.g).norm();
      ++rep.checks;
      if (err > bound + 1e-12 * (1.0 + exact.norm())) ++rep.violations;
      rep.max_error_over_bound = std::max(rep.max_error_over_bound, err / bound);
    }
  }
  rep.pass = rep.violations == 0;
  return rep;
}

// ---------------------------------------------------------------------------
// Global linear rate

struct LinearRateOptions {
  Index d = 10;
  double condition = 100.0;
  double mu = 1e-6;
  double gap_floor = 1e-9;
  double slack = 1e-3;
  std::uint64_t max_iterations = 20000;
  std::uint64_t seed = 3;
};

struct LinearRateReport {
  double gamma = 0.0;
  double alpha = 0.0;
  double max_contraction = 0.0;
  std::uint64_t iterations = 0;  ///< checked iterations
  double final_gap = 0.0;
  bool reached_floor = false;
  bool pass = false;
};

/**
 * Quadratic with spectrum in [1, condition], clipping bounds [m, L1],
 * stepsize lambda_min / L1. Every f-gap ratio until the gap drops below the
 * floor must be at most 1 - gamma(alpha*) + slack.
 */
inline LinearRateReport linear_rate_experiment(const LinearRateOptions& opt) {
  RngStream setup(opt.seed);
  const Matrix a = random_spd(opt.d, opt.condition, setup);
  Vector b(opt.d);
  for (Index i = 0; i < opt.d; ++i) b(i) = setup.normal();
  const ProblemSpec problem = make_quadratic(a, b);
  const auto& known = *problem.known;
  Vector x0 = *known.x_star + gaussian_sphere_sample(opt.d, 1, setup).columns.col(0);

  SolverConfig cfg;
  cfg.mu = opt.mu;
  cfg.lambda_min = *known.m;
  cfg.lambda_max = *known.L1;
  cfg.L1 = known.L1;
  cfg.L2 = known.L2;
  cfg.m = known.m;
  cfg.max_iterations = opt.max_iterations;

  LinearRateReport rep;
  rep.alpha = cfg.resolved_alpha();
  rep.gamma = optimal_linear_rate_gamma(*known.m, cfg.lambda_min, cfg.lambda_max, *known.L1);

  Oracle oracle = problem.make_oracle();
  OracleProber prober(oracle);
  RngStream rng(opt.seed + 1);
  SolverState state = SolverState::initial(x0);
  double gap = problem.objective(x0) - *known.f_star;
  while (state.status == Status::running && state.k < opt.max_iterations) {
    state = fedzen_iterate(std::move(state), prober, cfg, rng);
    const double next_gap = problem.objective(state.x) - *known.f_star;
    rep.max_contraction = std::max(rep.max_contraction, next_gap / gap);
    ++rep.iterations;
    gap = next_gap;
    if (gap <= opt.gap_floor) {
      rep.reached_floor = true;
      break;
    }
  }
  rep.final_gap = gap;
  rep.pass = rep.reached_floor && rep.max_contraction <= 1.0 - rep.gamma + opt.slack;
  return rep;
}

// ---------------------------------------------------------------------------
// Local quadratic rate on logistic regression

struct QuadraticRateOptions {
  std::size_t samples = 200;
  Index d = 10;
  double ridge = 0.1;
  double feature_scale = 2.0;
  double mu = 1e-7;
  Index r = 0;                ///< 0 means d^2; the fixed r, or the floor of the adaptive r
  /// r_k from the adaptive rule, never below r (r_max = 20 d^2). With a fixed
  /// r the warm-started estimate lags the moving Hessian and the assumption
  /// ||hess f(x_k) - H_k|| <= eps_k behind the quadratic rate does not hold.
  bool adaptive = true;
  double start_distance = 0.1;
  double error_floor = 1e-6;  ///< iterations with e_k below this are at the precision floor
  std::uint64_t iterations = 8;
  std::size_t min_checks = 3;
  bool extended_precision = true;  ///< centered long-double objective
  std::uint64_t seed = 5;
};

struct QuadraticRateReport {
  std::vector<double> errors;        ///< e_k = ||x_k - x*||
  std::vector<double> hess_errors;   ///< ||hess f(x_k) - H_k|| (spectral)
  std::vector<double> step_bounds;   ///< bound on e_{k+1}
  double k_fit = 0.0;
  double k_theory = 0.0;             ///< (L2 + 2) / (2 lambda_min)
  std::size_t checks = 0;
  double max_bound_excess = -std::numeric_limits<double>::infinity();  ///< max (e_{k+1} - bound) / bound
  bool quadratic_pass = false;
  bool bound_pass = false;
  bool pass = false;
  double l2 = 0.0;
  double lambda_min = 0.0;
};

/**
 * Newton regime (alpha = 1, Z = H^{-1}, r_k >= d^2 per iteration) started at
 * distance `start_distance` from x*. Two checks:
 *  - quadratic rate: with K the largest e_{k+1}/e_k^2 over consecutive
 *    iterations whose e_k is above the floor, at least `min_checks` such
 *    iterations exist and K <= (L2 + 2) / (2 lambda_min);
 *  - per-iteration bound: e_{k+1} <= L2/(2 lambda_min) e_k^2 +
 *    ||hess f(x_k) - H_k|| / lambda_min e_k + d L2 mu^2 / (6 lambda_min),
 *    within 1e-10 relative, on the same iterations.
 */
inline QuadraticRateReport quadratic_rate_experiment(const QuadraticRateOptions& opt) {
  RngStream setup(opt.seed);
  const Dataset data = synthetic_classification(opt.samples, opt.d, opt.feature_scale, setup);
  ProblemSpec reference = make_logistic(data, opt.ridge);
  attach_reference_minimizer(reference, data, opt.ridge);
  LogisticOptions centered;
  centered.extended_precision = opt.extended_precision;
  centered.offset = opt.extended_precision ? *reference.known->f_star : 0.0;
  ProblemSpec problem = make_logistic(data, opt.ridge, centered);
  problem.known->x_star = reference.known->x_star;
  problem.known->f_star = *reference.known->f_star - centered.offset;
  const auto& known = *problem.known;
  const Vector xs = *known.x_star;
  const Matrix h_star = known.hessian(xs);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(h_star, Eigen::EigenvaluesOnly);

  QuadraticRateReport rep;
  rep.l2 = *known.L2;
  rep.lambda_min = 0.5 * eig.eigenvalues().minCoeff();
  rep.k_theory = (rep.l2 + 2.0) / (2.0 * rep.lambda_min);

  SolverConfig cfg;
  cfg.mu = opt.mu;
  cfg.alpha = 1.0;
  cfg.lambda_min = rep.lambda_min;
  cfg.lambda_max = 2.0 * eig.eigenvalues().maxCoeff() + *known.L1;
  const Index r = opt.r == 0 ? opt.d * opt.d : opt.r;
  cfg.r_policy = FixedR{r};
  if (opt.adaptive) {
    cfg.r_policy = AdaptiveR{0.1, 20 * opt.d * opt.d, r};
    cfg.L1 = known.L1;
    cfg.L2 = known.L2;
  }
  cfg.stop_on_zo_floor = false;
  cfg.max_iterations = opt.iterations;

  const Vector x0 = xs + opt.start_distance * gaussian_sphere_sample(opt.d, 1, setup).columns.col(0);
  Oracle oracle = problem.make_oracle();
  OracleProber prober(oracle);
  RngStream rng(opt.seed + 1);
  SolverState state = SolverState::initial(x0);
  const double zo_term = gradient_error_bound(opt.d, rep.l2, opt.mu) / rep.lambda_min;

  rep.errors.push_back((state.x - xs).norm());
  while (state.status == Status::running && state.k < opt.iterations) {
    const Vector xk = state.x;
    state = fedzen_iterate(std::move(state), prober, cfg, rng);
    const Matrix diff = known.hessian(xk) - state.H.H;
    Eigen::SelfAdjointEigenSolver<Matrix> de(diff, Eigen::EigenvaluesOnly);
    const double herr = de.eigenvalues().cwiseAbs().maxCoeff();
    const double ek = rep.errors.back();
    rep.hess_errors.push_back(herr);
    rep.step_bounds.push_back(rep.l2 / (2.0 * rep.lambda_min) * ek * ek + herr / rep.lambda_min * ek + zo_term);
    rep.errors.push_back((state.x - xs).norm());
  }

  // Leading run of iterations above the floor.
  for (std::size_t k = 0; k + 1 < rep.errors.size(); ++k) {
    const double ek = rep.errors[k];
    if (ek < opt.error_floor) break;
    const double next = rep.errors[k + 1];
    ++rep.checks;
    rep.k_fit = std::max(rep.k_fit, next / (ek * ek));
    const double bound = rep.step_bounds[k];
    rep.max_bound_excess = std::max(rep.max_bound_excess, (next - bound) / bound);
  }
  rep.quadratic_pass = rep.checks >= opt.min_checks && rep.k_fit <= rep.k_theory;
  rep.bound_pass = rep.checks >= 1 && rep.max_bound_excess <= 1e-10;
  rep.pass = rep.quadratic_pass && rep.bound_pass;
  return rep;
}

// ---------------------------------------------------------------------------
// Zeroth-order stopping rule

struct StoppingOptions {
  Index d = 4;
  double box_radius = 0.4;
  double mu = 1e-2;
  double start_radius = 0.2;
  std::uint64_t max_iterations = 500;
  std::uint64_t seed = 13;
};

struct StoppingReport {
  Status status = Status::running;
  std::uint64_t iterations = 0;
  double final_grad_norm = 0.0;
  double threshold = 0.0;
  double true_distance = 0.0;
  double guaranteed_distance = 0.0;
  bool stayed_in_box = true;
  bool pass = false;
};

inline StoppingReport stopping_experiment(const StoppingOptions& opt) {
  const ProblemSpec problem = make_cubic_box(opt.d, opt.box_radius);
  const auto& known = *problem.known;
  RngStream setup(opt.seed);
  Vector x0(opt.d);
  for (Index i = 0; i < opt.d; ++i) x0(i) = setup.uniform(-opt.start_radius, opt.start_radius);

  SolverConfig cfg;
  cfg.mu = opt.mu;
  cfg.alpha = 1.0;
  cfg.lambda_min = *known.m;
  cfg.lambda_max = *known.L1;
  cfg.r_policy = FixedR{2 * opt.d};
  cfg.L1 = known.L1;
  cfg.L2 = known.L2;
  cfg.m = known.m;
  cfg.max_iterations = opt.max_iterations;

  Oracle oracle = problem.make_oracle();
  RngStream rng(opt.seed + 1);
  const RunTrace trace = fedzen_run(x0, oracle, cfg, rng);

  StoppingReport rep;
  rep.status = trace.status;
  rep.iterations = trace.records.size();
  rep.final_grad_norm = trace.records.empty() ? 0.0 : trace.records.back().grad_norm_est;
  rep.threshold = gradient_error_bound(opt.d, *known.L2, opt.mu);
  rep.true_distance = (trace.x_final - *known.x_star).norm();
  rep.guaranteed_distance = static_cast<double>(opt.d) * *known.L2 * opt.mu * opt.mu / (3.0 * *known.m);
  rep.stayed_in_box = trace.x_final.cwiseAbs().maxCoeff() <= opt.box_radius;
  rep.pass = rep.status == Status::stopped_zo_floor && rep.final_grad_norm <= rep.threshold &&
             rep.true_distance <= rep.guaranteed_distance && rep.stayed_in_box;
  return rep;
}

// ---------------------------------------------------------------------------
// Stiefel versus normalized-Gaussian directions

struct SamplingOptions {
  Index d = 20;
  Index r = 20;
  std::size_t trials = 200;
  double mu = 1e-6;
  double condition = 10.0;
  double required_ratio = 0.95;
  std::uint64_t seed = 17;
};

struct SamplingReport {
  double stiefel_mean = 0.0, stiefel_stderr = 0.0;
  double gaussian_mean = 0.0, gaussian_stderr = 0.0;
  bool pass = false;
};

/// ||H^r - A||_F from H^0 = 0 at x = 0 with both samplers on one random SPD
/// quadratic; pass iff the Stiefel mean is at most 0.95 times the Gaussian mean.
inline SamplingReport compare_sampling(const SamplingOptions& opt) {
  RngStream setup(opt.seed);
  const Matrix a = random_spd(opt.d, opt.condition, setup);
  const ProblemSpec problem = make_quadratic(a, Vector::Zero(opt.d));
  const Vector x = Vector::Zero(opt.d);
  std::vector<double> st, ga;
  for (std::size_t t = 0; t < opt.trials; ++t) {
    RngStream rng = RngStream::derive(opt.seed, t + 1);
    Oracle o1 = problem.make_oracle();
    Oracle o2 = problem.make_oracle();
    st.push_back((estimate_hessian(o1, x, stiefel_sample(opt.d, opt.r, rng), opt.mu).first.H - a).norm());
    ga.push_back((estimate_hessian(o2, x, gaussian_sphere_sample(opt.d, opt.r, rng), opt.mu).first.H - a).norm());
  }
  auto stats = [](const std::vector<double>& v) {
    double mean = 0.0;
    for (double e : v) mean += e;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double e : v) var += (e - mean) * (e - mean);
    var /= static_cast<double>(v.size() > 1 ? v.size() - 1 : 1);
    return std::make_pair(mean, std::sqrt(var / static_cast<double>(v.size())));
  };
  SamplingReport rep;
  std::tie(rep.stiefel_mean, rep.stiefel_stderr) = stats(st);
  std::tie(rep.gaussian_mean, rep.gaussian_stderr) = stats(ga);
  rep.pass = rep.stiefel_mean <= opt.required_ratio * rep.gaussian_mean;
  return rep;
}

// ---------------------------------------------------------------------------
// Federated / centralized equivalence

struct FederatedOptions {
  std::size_t n_clients = 5;
  Index d = 6;
  Index r = 0;  ///< 0 means 2d
  double mu = 1e-5;
  std::uint64_t iterations = 20;
  double tol = 1e-10;
  std::uint64_t seed = 19;
};

struct FederatedReport {
  std::uint64_t iterations = 0;
  double max_iterate_gap = 0.0;
  bool traffic_ok = true;
  std::uint64_t up_per_round = 0;
  bool pass = false;
};

/**
 * Clients hold f_i(x) = 1/2 x^T A_i x - b_i^T x; the centralized oracle is
 * the mean objective. Both solvers share seed and config; iterates must
 * agree within `tol` and each round must upload n (2r + 1) scalars.
 */
inline FederatedReport federated_equivalence(const FederatedOptions& opt) {
  RngStream setup(opt.seed);
  std::vector<std::function<double(const Vector&)>> parts;
  std::vector<ClientNode> clients;
  for (std::size_t c = 0; c < opt.n_clients; ++c) {
    Vector b(opt.d);
    const Matrix a = random_spd(opt.d, 10.0, setup);
    for (Index i = 0; i < opt.d; ++i) b(i) = setup.normal();
    ProblemSpec p = make_quadratic(a, b);
    parts.push_back(p.objective);
    clients.push_back(ClientNode{c, p.make_oracle()});
  }
  Oracle central(opt.d, mean_objective(parts));
  const Vector x0 = Vector::Constant(opt.d, 1.0);
  const Index r = opt.r == 0 ? 2 * opt.d : opt.r;

  SolverConfig cfg;
  cfg.mu = opt.mu;
  cfg.alpha = 1.0;
  cfg.lambda_min = 1e-3;
  cfg.lambda_max = 1e3;
  cfg.r_policy = FixedR{r};
  cfg.max_iterations = opt.iterations;

  FederatedProber fed(clients);
  OracleProber cen(central);
  RngStream rng_fed(opt.seed + 1), rng_cen(opt.seed + 1);
  SolverState sf = SolverState::initial(x0), sc = SolverState::initial(x0);
  RunTrace tf;
  FederatedReport rep;
  rep.up_per_round = opt.n_clients * static_cast<std::uint64_t>(2 * r + 1);
  while (sf.k < opt.iterations && sf.status == Status::running && sc.status == Status::running) {
    sf = fedzen_iterate(std::move(sf), fed, cfg, rng_fed, {}, &tf);
    sc = fedzen_iterate(std::move(sc), cen, cfg, rng_cen);
    rep.max_iterate_gap = std::max(rep.max_iterate_gap, (sf.x - sc.x).cwiseAbs().maxCoeff());
    if (!tf.records.back().up_scalars || *tf.records.back().up_scalars != rep.up_per_round) {
      rep.traffic_ok = false;
    }
    ++rep.iterations;
  }
  rep.pass = rep.iterations == opt.iterations && rep.max_iterate_gap <= opt.tol && rep.traffic_ok;
  return rep;
}

}  // namespace fedzen::verify
