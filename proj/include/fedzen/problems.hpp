#pragma once

/**
 * @file problems.hpp
 * @brief Test objectives with known minimizers and regularity constants.
 *
 * Constants follow the usual conventions: m is the strong convexity modulus,
 * L1 the gradient Lipschitz constant and L2 the Hessian Lipschitz constant
 * (spectral norm), each valid on the domain named in `domain`.
 */

#include "fedzen/direction_set.hpp"
#include "fedzen/oracle.hpp"
#include "fedzen/rng.hpp"
#include "fedzen/sampling.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fedzen {

struct KnownSolution {
  std::optional<Vector> x_star;
  std::optional<double> f_star;
  std::function<Vector(const Vector&)> gradient;
  std::function<Matrix(const Vector&)> hessian;
  std::optional<double> m, L1, L2;
  std::string domain = "R^d";
  std::string notes;
};

struct ProblemSpec {
  Index dim = 0;
  std::function<double(const Vector&)> objective;
  std::optional<KnownSolution> known;

  Oracle make_oracle(std::optional<std::uint64_t> budget = std::nullopt) const {
    return Oracle(dim, objective, budget);
  }
};

// ---------------------------------------------------------------------------
// Quadratic

/// f(x) = 1/2 x^T A x - b^T x with A symmetric positive definite.
inline ProblemSpec make_quadratic(const Matrix& a, const Vector& b) {
  const Index d = a.rows();
  if (a.cols() != d || b.size() != d) throw std::invalid_argument("make_quadratic: shape mismatch");
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument("make_quadratic: A is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() <= 0.0) {
    throw std::invalid_argument("make_quadratic: A is not positive definite");
  }
  auto shared_a = std::make_shared<const Matrix>(a);
  auto shared_b = std::make_shared<const Vector>(b);

  ProblemSpec p;
  p.dim = d;
  p.objective = [shared_a, shared_b](const Vector& x) {
    return 0.5 * x.dot(*shared_a * x) - shared_b->dot(x);
  };
  KnownSolution k;
  const Vector xs = a.ldlt().solve(b);
  k.x_star = xs;
  k.f_star = -0.5 * b.dot(xs);
  k.gradient = [shared_a, shared_b](const Vector& x) -> Vector { return *shared_a * x - *shared_b; };
  k.hessian = [shared_a](const Vector&) -> Matrix { return *shared_a; };
  k.m = eig.eigenvalues().minCoeff();
  k.L1 = eig.eigenvalues().maxCoeff();
  k.L2 = 0.0;
  p.known = std::move(k);
  return p;
}

/// Q diag(spectrum) Q^T with Q a uniform random orthogonal matrix and the
/// spectrum log-spaced between 1 and `condition`.
inline Matrix random_spd(Index d, double condition, RngStream& rng) {
  if (!(condition >= 1.0)) throw std::invalid_argument("random_spd: condition must be >= 1");
  Vector spectrum(d);
  for (Index i = 0; i < d; ++i) {
    const double t = d == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(d - 1);
    spectrum(i) = std::pow(condition, t);
  }
  const Matrix q = stiefel_sample(d, d, rng).columns;
  Matrix a = q * spectrum.asDiagonal() * q.transpose();
  return 0.5 * (a + a.transpose());
}

// ---------------------------------------------------------------------------
// Cubic

/**
 * f(x) = sum_i x_i^3 / 3 + x_i^2 / 2, minimized at 0. Hessian diag(2 x_i + 1),
 * so L2 = 2 everywhere. On the box |x_i| <= R, L1 = 1 + 2R and, for R < 1/2,
 * m = 1 - 2R.
 */
inline ProblemSpec make_cubic_box(Index d, double box_radius) {
  if (d < 1) throw std::invalid_argument("make_cubic_box: d must be positive");
  if (!(box_radius > 0.0)) throw std::invalid_argument("make_cubic_box: box radius must be positive");
  ProblemSpec p;
  p.dim = d;
  p.objective = [](const Vector& x) {
    double s = 0.0;
    for (Index i = 0; i < x.size(); ++i) s += x(i) * x(i) * x(i) / 3.0 + x(i) * x(i) / 2.0;
    return s;
  };
  KnownSolution k;
  k.x_star = Vector::Zero(d);
  k.f_star = 0.0;
  k.gradient = [](const Vector& x) -> Vector { return x.array().square().matrix() + x; };
  k.hessian = [](const Vector& x) -> Matrix {
    return (2.0 * x.array() + 1.0).matrix().asDiagonal();
  };
  k.L2 = 2.0;
  k.L1 = 1.0 + 2.0 * box_radius;
  if (1.0 - 2.0 * box_radius > 0.0) k.m = 1.0 - 2.0 * box_radius;
  k.domain = "||x||_inf <= " + std::to_string(box_radius);
  p.known = std::move(k);
  return p;
}

// ---------------------------------------------------------------------------
// Datasets

struct SparseRow {
  std::vector<Index> index;  ///< 0-based, strictly increasing
  std::vector<double> value;

  double dot(const Vector& x) const {
    double s = 0.0;
    for (std::size_t t = 0; t < index.size(); ++t) s += value[t] * x(index[t]);
    return s;
  }
  double squared_norm() const {
    double s = 0.0;
    for (double v : value) s += v * v;
    return s;
  }
};

struct Dataset {
  std::vector<int> labels;  ///< each -1 or +1
  std::vector<SparseRow> rows;
  Index dim = 0;

  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

namespace detail {

inline int parse_label(const std::string& token, std::size_t line) {
  double v = 0.0;
  try {
    std::size_t used = 0;
    v = std::stod(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
  } catch (const std::exception&) {
    throw ParseError(line, "bad label '" + token + "'");
  }
  if (v == 1.0) return 1;
  if (v == -1.0 || v == 0.0) return -1;
  throw ParseError(line, "label '" + token + "' is not one of -1, 0, +1");
}

}  // namespace detail

/// Parses LIBSVM text: "label idx:val idx:val ..." with 1-based, strictly
/// increasing indices. Labels 0 map to -1. Blank lines and text after '#'
/// are ignored.
inline Dataset parse_libsvm(std::istream& in, std::optional<Index> dim_override = std::nullopt) {
  Dataset ds;
  std::string raw;
  std::size_t line_no = 0;
  Index max_index = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream tokens(raw);
    std::string token;
    if (!(tokens >> token)) continue;
    ds.labels.push_back(detail::parse_label(token, line_no));
    SparseRow row;
    Index prev = 0;
    while (tokens >> token) {
      const auto colon = token.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == token.size()) {
        throw ParseError(line_no, "malformed feature '" + token + "'");
      }
      long long idx = 0;
      double val = 0.0;
      try {
        std::size_t used = 0;
        idx = std::stoll(token.substr(0, colon), &used);
        if (used != colon) throw std::invalid_argument(token);
        const std::string vs = token.substr(colon + 1);
        val = std::stod(vs, &used);
        if (used != vs.size()) throw std::invalid_argument(token);
      } catch (const std::exception&) {
        throw ParseError(line_no, "malformed feature '" + token + "'");
      }
      if (idx < 1) throw ParseError(line_no, "feature index must be >= 1");
      if (idx <= prev) throw ParseError(line_no, "non-increasing index at line " + std::to_string(line_no));
      prev = static_cast<Index>(idx);
      row.index.push_back(prev - 1);
      row.value.push_back(val);
    }
    max_index = std::max(max_index, prev);
    ds.rows.push_back(std::move(row));
  }
  ds.dim = max_index;
  if (dim_override) {
    if (*dim_override < max_index) {
      throw std::invalid_argument("parse_libsvm: dimension override smaller than largest index");
    }
    ds.dim = *dim_override;
  }
  return ds;
}

inline Dataset load_libsvm(const std::string& path, std::optional<Index> dim_override = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_libsvm: cannot open " + path);
  return parse_libsvm(in, dim_override);
}

inline void write_libsvm(std::ostream& out, const Dataset& ds) {
  char buf[64];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << (ds.labels[i] > 0 ? "+1" : "-1");
    for (std::size_t t = 0; t < ds.rows[i].index.size(); ++t) {
      std::snprintf(buf, sizeof buf, " %lld:%.17g", static_cast<long long>(ds.rows[i].index[t] + 1),
                    ds.rows[i].value[t]);
      out << buf;
    }
    out << '\n';
  }
}

/// Dense Gaussian features scaled by `feature_scale`; labels from a random
/// linear model with 10% flips so the data is not separable.
inline Dataset synthetic_classification(std::size_t n, Index d, double feature_scale, RngStream& rng) {
  Dataset ds;
  ds.dim = d;
  Vector w(d);
  for (Index i = 0; i < d; ++i) w(i) = rng.normal();
  for (std::size_t s = 0; s < n; ++s) {
    SparseRow row;
    Vector a(d);
    for (Index i = 0; i < d; ++i) {
      a(i) = feature_scale * rng.normal();
      row.index.push_back(i);
      row.value.push_back(a(i));
    }
    int label = a.dot(w) >= 0.0 ? 1 : -1;
    if (rng.uniform01() < 0.1) label = -label;
    ds.labels.push_back(label);
    ds.rows.push_back(std::move(row));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Logistic regression

namespace detail {

/// log(1 + exp(t)) without overflow.
inline double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }
inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

struct LogisticData {
  Dataset data;
  double ridge;
  double weight;  ///< multiplies the summed loss
  bool extended = false;
  double offset = 0.0;
};

inline long double softplus_ext(long double t) {
  return t > 0.0L ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

inline double logistic_value(const LogisticData& p, const Vector& x) {
  if (p.extended) {
    long double loss = 0.0L;
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      const auto& row = p.data.rows[i];
      long double z = 0.0L;
      for (std::size_t t = 0; t < row.index.size(); ++t) {
        z += static_cast<long double>(row.value[t]) * x(row.index[t]);
      }
      loss += softplus_ext(-p.data.labels[i] * z);
    }
    long double sq = 0.0L;
    for (Index i = 0; i < x.size(); ++i) sq += static_cast<long double>(x(i)) * x(i);
    return static_cast<double>(static_cast<long double>(p.weight) * loss +
                               0.5L * static_cast<long double>(p.ridge) * sq -
                               static_cast<long double>(p.offset));
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < p.data.size(); ++i) {
    loss += softplus(-p.data.labels[i] * p.data.rows[i].dot(x));
  }
  return p.weight * loss + 0.5 * p.ridge * x.squaredNorm() - p.offset;
}

inline Vector logistic_gradient(const LogisticData& p, const Vector& x) {
  Vector g = p.ridge * x;
  for (std::size_t i = 0; i < p.data.size(); ++i) {
    const auto& row = p.data.rows[i];
    const double y = p.data.labels[i];
    const double coef = -p.weight * y * sigmoid(-y * row.dot(x));
    for (std::size_t t = 0; t < row.index.size(); ++t) g(row.index[t]) += coef * row.value[t];
  }
  return g;
}

inline Matrix logistic_hessian(const LogisticData& p, const Vector& x) {
  const Index d = x.size();
  Matrix h = p.ridge * Matrix::Identity(d, d);
  for (std::size_t i = 0; i < p.data.size(); ++i) {
    const auto& row = p.data.rows[i];
    const double s = sigmoid(row.dot(x));
    const double w = p.weight * s * (1.0 - s);
    for (std::size_t a = 0; a < row.index.size(); ++a)
      for (std::size_t b = 0; b < row.index.size(); ++b)
        h(row.index[a], row.index[b]) += w * row.value[a] * row.value[b];
  }
  return h;
}

}  // namespace detail

/// Sampling parameters for the empirical Hessian-Lipschitz estimate.
struct L2EstimateOptions {
  int samples = 400;
  double radius = 2.0;      ///< sample points drawn with norm up to this
  double step = 1e-3;       ///< third-difference step
  double safety = 1.5;
  std::uint64_t seed = 12345;
};

/**
 * max |D^3 f(x)[u,u,u]| over sampled (x, u), each from the centered fourth-
 * order stencil (f(x+2hu) - 2f(x+hu) + 2f(x-hu) - f(x-2hu)) / (2h^3), times
 * a safety factor. For a symmetric third derivative the maximum over unit u
 * equals its operator norm, so this estimates the Hessian Lipschitz constant.
 */
inline double estimate_hessian_lipschitz(const std::function<double(const Vector&)>& f, Index d,
                                         const L2EstimateOptions& opt, const Vector& center) {
  RngStream rng(opt.seed);
  double best = 0.0;
  const double h = opt.step;
  for (int s = 0; s < opt.samples; ++s) {
    Vector x = gaussian_sphere_sample(d, 1, rng).columns.col(0);
    x = center + opt.radius * rng.uniform01() * x;
    const Vector u = gaussian_sphere_sample(d, 1, rng).columns.col(0);
    const double t = (f(x + 2 * h * u) - 2 * f(x + h * u) + 2 * f(x - h * u) - f(x - 2 * h * u)) /
                     (2 * h * h * h);
    best = std::max(best, std::abs(t));
  }
  return opt.safety * best;
}

namespace detail {

inline ProblemSpec logistic_problem(std::shared_ptr<const LogisticData> p, const L2EstimateOptions& opt) {
  ProblemSpec spec;
  spec.dim = p->data.dim;
  spec.objective = [p](const Vector& x) { return logistic_value(*p, x); };
  KnownSolution k;
  k.gradient = [p](const Vector& x) -> Vector { return logistic_gradient(*p, x); };
  k.hessian = [p](const Vector& x) -> Matrix { return logistic_hessian(*p, x); };
  k.m = p->ridge;
  double sq = 0.0;
  for (const auto& row : p->data.rows) sq += row.squared_norm();
  k.L1 = p->ridge + 0.25 * p->weight * sq;
  k.L2 = estimate_hessian_lipschitz(spec.objective, spec.dim, opt, Vector::Zero(spec.dim));
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "L2 estimated: max |third directional difference| over %d samples, radius %g, "
                "step %g, times %g",
                opt.samples, opt.radius, opt.step, opt.safety);
  k.notes = buf;
  spec.known = std::move(k);
  return spec;
}

}  // namespace detail

struct LogisticOptions {
  L2EstimateOptions l2;
  /// Accumulate in long double and subtract `offset` before rounding to
  /// double. Second differences at mu ~ 1e-7 divide the rounding error of f
  /// by mu^2, so values near an offset close to f* keep curvature probes
  /// accurate.
  bool extended_precision = false;
  double offset = 0.0;
};

/**
 * f(x) = (1/n) sum_i log(1 + exp(-y_i a_i^T x)) + ridge/2 ||x||^2 - offset.
 * m = ridge and L1 = ridge + (1/(4n)) sum ||a_i||^2; L2 is estimated
 * numerically. x* is not filled in here; see reference_minimizer().
 */
inline ProblemSpec make_logistic(const Dataset& dataset, double ridge,
                                 const LogisticOptions& options = {}) {
  if (!(ridge > 0.0)) throw std::invalid_argument("make_logistic: ridge must be positive");
  if (dataset.empty()) throw std::invalid_argument("make_logistic: empty dataset");
  auto p = std::make_shared<const detail::LogisticData>(
      detail::LogisticData{dataset, ridge, 1.0 / static_cast<double>(dataset.size()),
                           options.extended_precision, options.offset});
  return detail::logistic_problem(std::move(p), options.l2);
}

/**
 * Client share of a logistic objective: (1/N) * n_clients * sum over the
 * client's samples + ridge/2 ||x||^2, so that averaging all clients'
 * objectives gives the logistic objective on the full N-sample dataset.
 */
inline ProblemSpec make_logistic_share(const Dataset& part, std::size_t total_samples,
                                       std::size_t n_clients, double ridge,
                                       const L2EstimateOptions& l2_options = {}) {
  if (!(ridge > 0.0)) throw std::invalid_argument("make_logistic_share: ridge must be positive");
  if (part.empty()) throw std::invalid_argument("make_logistic_share: empty partition");
  auto p = std::make_shared<const detail::LogisticData>(detail::LogisticData{
      part, ridge, static_cast<double>(n_clients) / static_cast<double>(total_samples)});
  return detail::logistic_problem(std::move(p), l2_options);
}

// ---------------------------------------------------------------------------
// Reference minimizer

struct Minimizer {
  Vector x;
  double f = 0.0;
  double grad_norm = 0.0;
  std::uint64_t iterations = 0;
};

/**
 * Fixed-step gradient descent (step 1/L1) with Nesterov momentum for
 * strongly convex problems, run until ||grad f|| <= tol. Deterministic.
 */
inline Minimizer reference_minimizer(const ProblemSpec& problem, double tol = 1e-12,
                                     std::uint64_t max_iterations = 1000000) {
  if (!problem.known || !problem.known->gradient || !problem.known->L1) {
    throw std::invalid_argument("reference_minimizer: needs a closed-form gradient and L1");
  }
  const auto& grad = problem.known->gradient;
  const double step = 1.0 / *problem.known->L1;
  const double m = problem.known->m.value_or(0.0);
  const double q = m * step;
  const double momentum = (1.0 - std::sqrt(q)) / (1.0 + std::sqrt(q));
  Vector x = Vector::Zero(problem.dim);
  Vector y = x;
  Minimizer out;
  for (std::uint64_t it = 0; it < max_iterations; ++it) {
    const Vector gx = grad(x);
    out.grad_norm = gx.norm();
    out.iterations = it;
    if (out.grad_norm <= tol) break;
    const Vector next = y - step * grad(y);
    y = next + momentum * (next - x);
    x = next;
  }
  out.x = x;
  out.f = problem.objective(x);
  return out;
}

/// Flat text: "dim f_star" on line one, then the d coordinates.
inline void save_minimizer(const std::string& path, const Vector& x, double f_star) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_minimizer: cannot write " + path);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%lld %.17g\n", static_cast<long long>(x.size()), f_star);
  out << buf;
  for (Index i = 0; i < x.size(); ++i) {
    std::snprintf(buf, sizeof buf, i == 0 ? "%.17g" : " %.17g", x(i));
    out << buf;
  }
  out << '\n';
}

inline std::optional<std::pair<Vector, double>> load_minimizer(const std::string& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  long long dim = 0;
  double f_star = 0.0;
  if (!(in >> dim >> f_star) || dim < 1) throw std::runtime_error("load_minimizer: bad header in " + path);
  Vector x(dim);
  for (long long i = 0; i < dim; ++i) {
    if (!(in >> x(i))) throw std::runtime_error("load_minimizer: truncated " + path);
  }
  return std::make_pair(std::move(x), f_star);
}

/// FNV-1a over a byte string.
inline std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h = 14695981039346656037ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Hash of the dataset contents and ridge, used to key cached minimizers.
inline std::uint64_t logistic_config_hash(const Dataset& ds, double ridge) {
  std::ostringstream s;
  write_libsvm(s, ds);
  char buf[64];
  std::snprintf(buf, sizeof buf, "ridge=%.17g dim=%lld", ridge, static_cast<long long>(ds.dim));
  s << buf;
  return fnv1a(s.str());
}

inline std::string minimizer_cache_path(const std::string& dataset_path, std::uint64_t hash) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return dataset_path + ".xstar-" + buf + ".txt";
}

/**
 * Fills known->x_star and known->f_star of a logistic problem, reading the
 * cache file beside `dataset_path` when present and writing it otherwise.
 * An empty `dataset_path` skips the cache.
 */
inline void attach_reference_minimizer(ProblemSpec& problem, const Dataset& ds, double ridge,
                                       const std::string& dataset_path = {}) {
  std::string cache;
  if (!dataset_path.empty()) {
    cache = minimizer_cache_path(dataset_path, logistic_config_hash(ds, ridge));
    if (auto hit = load_minimizer(cache); hit && hit->first.size() == problem.dim) {
      problem.known->x_star = hit->first;
      problem.known->f_star = hit->second;
      return;
    }
  }
  const Minimizer ref = reference_minimizer(problem);
  problem.known->x_star = ref.x;
  problem.known->f_star = ref.f;
  if (!cache.empty()) save_minimizer(cache, ref.x, ref.f);
}

}  // namespace fedzen
