// Command-line front end: solver runs with CSV traces and the verification
// experiments. Exit codes: 0 success or pass, 1 verification failure or
// runtime error, 2 usage error.

#include "fedzen/experiment_config.hpp"
#include "fedzen/fedsim.hpp"
#include "fedzen/problems.hpp"
#include "fedzen/solver.hpp"
#include "fedzen/trace_csv.hpp"
#include "fedzen/verify.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

using namespace fedzen;

namespace {

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Solver flags shared by run and fedrun. Each flag maps onto a config key so
// the override order stays file first, then flags.
struct SolverFlags {
  std::string config_path;
  std::map<std::string, std::string> values;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "key = value experiment file");
    const std::vector<std::pair<std::string, std::string>> flags = {
        {"--problem", "problem"},       {"--dataset", "dataset_path"}, {"--d", "d"},
        {"--mu", "mu"},                 {"--r", "r"},                  {"--r-policy", "r_policy"},
        {"--alpha", "alpha"},           {"--lambda-min", "lambda_min"}, {"--lambda-max", "lambda_max"},
        {"--max-iters", "max_iters"},   {"--budget", "budget"},        {"--seed", "seed"},
        {"--n-clients", "n_clients"},   {"--partition", "partition"},  {"--out", "out_path"},
        {"--cond", "cond"},             {"--ridge", "ridge"},          {"--box-radius", "box_radius"},
        {"--samples", "samples"},       {"--r-max", "r_max"},          {"--delta", "delta"}};
    for (const auto& [flag, key] : flags) app->add_option(flag, values[key], "sets '" + key + "'");
  }

  ExperimentConfig resolve() const {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    for (const auto& [key, value] : values) {
      if (!value.empty()) cfg.set(key, value);
    }
    cfg.validate();
    return cfg;
  }
};

struct Built {
  ProblemSpec problem;
  Vector x0;
  GroundTruth truth;
};

GroundTruth truth_of(const ProblemSpec& p) {
  GroundTruth t;
  if (p.known) {
    t.x_star = p.known->x_star;
    t.f_star = p.known->f_star;
    t.hessian = p.known->hessian;
  }
  return t;
}

Dataset dataset_for(const ExperimentConfig& cfg) {
  if (!cfg.dataset_path.empty()) return load_libsvm(cfg.dataset_path);
  RngStream rng(cfg.seed);
  return synthetic_classification(cfg.samples, cfg.d, 1.0, rng);
}

Built build_problem(const ExperimentConfig& cfg) {
  Built b;
  RngStream setup(cfg.seed);
  if (cfg.problem == "quadratic") {
    const Matrix a = random_spd(cfg.d, cfg.cond, setup);
    Vector rhs(cfg.d);
    for (Index i = 0; i < cfg.d; ++i) rhs(i) = setup.normal();
    b.problem = make_quadratic(a, rhs);
    b.x0 = Vector::Zero(cfg.d);
  } else if (cfg.problem == "cubic") {
    b.problem = make_cubic_box(cfg.d, cfg.box_radius);
    b.x0.resize(cfg.d);
    for (Index i = 0; i < cfg.d; ++i) b.x0(i) = setup.uniform(-cfg.box_radius / 2, cfg.box_radius / 2);
  } else {
    const Dataset ds = dataset_for(cfg);
    b.problem = make_logistic(ds, cfg.ridge);
    attach_reference_minimizer(b.problem, ds, cfg.ridge, cfg.dataset_path);
    b.x0 = Vector::Zero(b.problem.dim);
  }
  b.truth = truth_of(b.problem);
  return b;
}

// With known constants and no explicit choice, the curvature bracket is
// [m, L1] and the stepsize lambda_min / L1.
SolverConfig solver_config(const ExperimentConfig& cfg, const ProblemSpec& problem) {
  SolverConfig sc;
  sc.mu = cfg.mu;
  sc.max_iterations = cfg.max_iters;
  if (problem.known) {
    sc.L1 = problem.known->L1;
    sc.L2 = problem.known->L2;
    sc.m = problem.known->m;
  }
  const bool have_bracket = problem.known && problem.known->m && problem.known->L1;
  sc.lambda_min = cfg.lambda_min.value_or(have_bracket ? *problem.known->m : 1e-6);
  sc.lambda_max = cfg.lambda_max.value_or(have_bracket ? *problem.known->L1 : 1e6);
  if (sc.lambda_min > sc.lambda_max) throw UsageError("lambda_min exceeds lambda_max");
  if (cfg.alpha) {
    if (*cfg.alpha == "opt") {
      if (!sc.L1) throw UsageError("alpha = opt needs a problem with known L1");
      sc.alpha = optimal_stepsize(sc.lambda_min, *sc.L1);
    } else {
      sc.alpha = std::stod(*cfg.alpha);
    }
  }
  if (cfg.r_policy == "adaptive") {
    if (!sc.L1) throw UsageError("adaptive r needs a problem with known L1");
    sc.r_policy = AdaptiveR{cfg.delta, cfg.r_max.value_or(0), cfg.r.value_or(0)};
  } else {
    sc.r_policy = FixedR{cfg.r.value_or(0)};
  }
  return sc;
}

void emit(const RunTrace& trace, const ExperimentConfig& cfg) {
  if (!cfg.out_path.empty()) write_trace_csv(trace, cfg.out_path);
  std::printf("status=%s iterations=%zu evals=%llu", to_string(trace.status), trace.records.size(),
              static_cast<unsigned long long>(trace.total_evals));
  if (!trace.records.empty() && trace.records.back().f_gap) {
    std::printf(" f_gap=%.6e", *trace.records.back().f_gap);
  }
  if (!trace.records.empty() && trace.records.back().x_err) {
    std::printf(" x_err=%.6e", *trace.records.back().x_err);
  }
  std::printf("\n");
}

int cmd_run(const SolverFlags& flags) {
  const ExperimentConfig cfg = flags.resolve();
  if (cfg.n_clients != 1) throw UsageError("run is centralized; use fedrun for n_clients > 1");
  Built b = build_problem(cfg);
  const SolverConfig sc = solver_config(cfg, b.problem);
  Oracle oracle = b.problem.make_oracle(cfg.budget);
  RngStream rng(cfg.seed + 1);
  emit(fedzen_run(b.x0, oracle, sc, rng, b.truth), cfg);
  return kPass;
}

int cmd_fedrun(const SolverFlags& flags) {
  const ExperimentConfig cfg = flags.resolve();
  RngStream setup(cfg.seed);
  std::vector<ClientNode> clients;
  ProblemSpec global;
  if (cfg.problem == "logistic") {
    const Dataset ds = dataset_for(cfg);
    FederationConfig fc;
    fc.n_clients = cfg.n_clients;
    fc.partition = cfg.partition == "iid" ? PartitionPolicy::iid_shuffle : PartitionPolicy::contiguous;
    clients = make_logistic_clients(ds, fc, setup, cfg.ridge, cfg.budget);
    global = make_logistic(ds, cfg.ridge);
    attach_reference_minimizer(global, ds, cfg.ridge, cfg.dataset_path);
  } else if (cfg.problem == "quadratic") {
    Matrix a_sum = Matrix::Zero(cfg.d, cfg.d);
    Vector b_sum = Vector::Zero(cfg.d);
    for (std::size_t c = 0; c < cfg.n_clients; ++c) {
      const Matrix a = random_spd(cfg.d, cfg.cond, setup);
      Vector b(cfg.d);
      for (Index i = 0; i < cfg.d; ++i) b(i) = setup.normal();
      a_sum += a;
      b_sum += b;
      clients.push_back(ClientNode{c, make_quadratic(a, b).make_oracle(cfg.budget)});
    }
    const double n = static_cast<double>(cfg.n_clients);
    global = make_quadratic(a_sum / n, b_sum / n);
  } else {
    throw UsageError("fedrun supports problem = quadratic or logistic");
  }
  const SolverConfig sc = solver_config(cfg, global);
  RngStream rng(cfg.seed + 1);
  const RunTrace trace =
      fedzen_federated_run(Vector::Zero(global.dim), clients, sc, rng, truth_of(global));
  emit(trace, cfg);
  return kPass;
}

const char* verdict(bool pass) { return pass ? "PASS" : "FAIL"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fedzen: zeroth-order Newton solver and verification experiments"};
  app.require_subcommand(1);

  SolverFlags run_flags, fed_flags;
  auto* run = app.add_subcommand("run", "centralized solver run");
  run_flags.attach(run);
  auto* fedrun = app.add_subcommand("fedrun", "federated solver run");
  fed_flags.attach(fedrun);

  verify::EtaRateOptions eta;
  auto* vrate = app.add_subcommand("verify-rate", "Hessian estimator contraction rate");
  vrate->add_option("--d", eta.d);
  vrate->add_option("--trials", eta.trials);
  vrate->add_option("--updates", eta.updates);
  vrate->add_option("--mu", eta.mu);
  vrate->add_option("--seed", eta.seed);

  verify::GradientBoundOptions lem;
  auto* vlem = app.add_subcommand("verify-gradient", "gradient estimator error bound");
  vlem->add_option("--d", lem.d);
  vlem->add_option("--points", lem.points);
  vlem->add_option("--box-radius", lem.box_radius);
  vlem->add_option("--seed", lem.seed);

  verify::LinearRateOptions lin;
  auto* vlin = app.add_subcommand("verify-linear", "global linear rate at the optimal stepsize");
  vlin->add_option("--d", lin.d);
  vlin->add_option("--cond", lin.condition);
  vlin->add_option("--mu", lin.mu);
  vlin->add_option("--seed", lin.seed);

  verify::QuadraticRateOptions quad;
  auto* vquad = app.add_subcommand("verify-quadratic", "local quadratic rate on logistic regression");
  vquad->add_option("--d", quad.d);
  vquad->add_option("--samples", quad.samples);
  vquad->add_option("--ridge", quad.ridge);
  vquad->add_option("--mu", quad.mu);
  bool fixed_r = false;
  vquad->add_option("--r", quad.r, "floor of the adaptive r, or the fixed r (default d^2)");
  vquad->add_flag("--fixed-r", fixed_r, "keep r fixed instead of adapting it per iteration");
  vquad->add_option("--feature-scale", quad.feature_scale);
  vquad->add_option("--seed", quad.seed);

  verify::SamplingOptions smp;
  auto* vsmp = app.add_subcommand("compare-sampling", "Stiefel versus Gaussian directions");
  vsmp->add_option("--d", smp.d);
  vsmp->add_option("--r", smp.r);
  vsmp->add_option("--trials", smp.trials);
  vsmp->add_option("--mu", smp.mu);
  vsmp->add_option("--seed", smp.seed);

  std::uint64_t cost_d = 1;
  auto* costs = app.add_subcommand("costs", "deterministic finite-difference evaluation counts");
  costs->add_option("--d", cost_d)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kUsage;
  }

  try {
    if (*run) return cmd_run(run_flags);
    if (*fedrun) return cmd_fedrun(fed_flags);
    if (*vrate) {
      if (eta.d < 1 || eta.trials < 1) throw UsageError("need d >= 1 and trials >= 1");
      const auto rep = verify::eta_rate_experiment(eta);
      const double bound = rep.eta * (1.0 + eta.slack);
      std::printf("ratio=%.6f eta=%.5f bound=%.6f %s\n", rep.ratio, rep.eta, bound, verdict(rep.pass));
      return rep.pass ? kPass : kFail;
    }
    if (*vlem) {
      if (lem.d < 1 || lem.points < 1) throw UsageError("need d >= 1 and points >= 1");
      const auto rep = verify::gradient_bound_experiment(lem);
      std::printf("checks=%zu violations=%zu max_error_over_bound=%.4f %s\n", rep.checks,
                  rep.violations, rep.max_error_over_bound, verdict(rep.pass));
      return rep.pass ? kPass : kFail;
    }
    if (*vlin) {
      if (lin.d < 1 || !(lin.condition >= 1.0)) throw UsageError("need d >= 1 and cond >= 1");
      const auto rep = verify::linear_rate_experiment(lin);
      std::printf("gamma=%.6e max_contraction=%.6f limit=%.6f final_gap=%.3e %s\n", rep.gamma,
                  rep.max_contraction, 1.0 - rep.gamma + lin.slack, rep.final_gap, verdict(rep.pass));
      return rep.pass ? kPass : kFail;
    }
    if (*vquad) {
      if (quad.d < 1 || quad.samples < 1) throw UsageError("need d >= 1 and samples >= 1");
      quad.adaptive = !fixed_r;
      const auto rep = verify::quadratic_rate_experiment(quad);
      std::printf("K_fit=%.4g K_theory=%.4g checks=%zu bound_excess=%.3g %s\n", rep.k_fit,
                  rep.k_theory, rep.checks, rep.max_bound_excess, verdict(rep.pass));
      return rep.pass ? kPass : kFail;
    }
    if (*vsmp) {
      if (smp.trials < 30) throw UsageError("compare-sampling needs trials >= 30");
      if (smp.d < 1 || smp.r < 1) throw UsageError("need d >= 1 and r >= 1");
      const auto rep = verify::compare_sampling(smp);
      std::printf("stiefel=%.6f+-%.6f gaussian=%.6f+-%.6f %s\n", rep.stiefel_mean, rep.stiefel_stderr,
                  rep.gaussian_mean, rep.gaussian_stderr, verdict(rep.pass));
      return rep.pass ? kPass : kFail;
    }
    if (*costs) {
      if (cost_d < 1) throw UsageError("d must be positive");
      const FdCosts c = deterministic_fd_costs(cost_d);
      std::printf("forward=%llu symmetric=%llu\n", static_cast<unsigned long long>(c.forward),
                  static_cast<unsigned long long>(c.symmetric));
      return kPass;
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid argument: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFail;
  }
  return kUsage;
}
