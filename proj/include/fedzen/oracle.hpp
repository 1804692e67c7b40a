#pragma once

/**
 * @file oracle.hpp
 * @brief Black-box objective with exact evaluation accounting.
 *
 * Every scalar query goes through Oracle::operator(), which bumps a 64-bit
 * counter and enforces an optional budget. probe_batch() collects the values
 * f(x) and f(x +/- mu u_j) needed by both derivative estimators, evaluating
 * the center once, so a batch of r directions costs exactly 2r + 1 queries.
 */

#include "fedzen/direction_set.hpp"

#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fedzen {

class BudgetExhausted : public std::runtime_error {
 public:
  BudgetExhausted(std::uint64_t budget, std::uint64_t consumed_in_batch)
      : std::runtime_error("evaluation budget of " + std::to_string(budget) +
                           " exhausted (" + std::to_string(consumed_in_batch) +
                           " evaluations consumed by the interrupted batch)"),
        budget_(budget),
        consumed_(consumed_in_batch) {}

  std::uint64_t budget() const { return budget_; }
  /// Evaluations spent by the batch that was interrupted.
  std::uint64_t consumed() const { return consumed_; }

 private:
  std::uint64_t budget_;
  std::uint64_t consumed_;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  DimensionMismatch(Index expected, Index got)
      : std::invalid_argument("dimension mismatch: expected " + std::to_string(expected) +
                              ", got " + std::to_string(got)) {}
};

/**
 * Counting wrapper around a scalar objective. The counter is atomic so that
 * concurrent callers (parallel clients) see exact totals; everything else is
 * immutable after construction.
 */
class Oracle {
 public:
  using Function = std::function<double(const Vector&)>;

  Oracle(Index dim, Function f, std::optional<std::uint64_t> budget = std::nullopt)
      : dim_(dim), f_(std::move(f)), budget_(budget) {
    if (dim_ < 1) throw std::invalid_argument("Oracle: dimension must be positive");
    if (budget_ && *budget_ == 0) throw std::invalid_argument("Oracle: budget must be positive");
  }

  Oracle(Oracle&& other) noexcept
      : dim_(other.dim_),
        f_(std::move(other.f_)),
        budget_(other.budget_),
        count_(other.count_.load()) {}

  Oracle(const Oracle&) = delete;
  Oracle& operator=(const Oracle&) = delete;

  double operator()(const Vector& x) {
    if (x.size() != dim_) throw DimensionMismatch(dim_, x.size());
    reserve();
    return f_(x);
  }

  Index dim() const { return dim_; }
  std::uint64_t eval_count() const { return count_.load(); }
  std::optional<std::uint64_t> budget() const { return budget_; }
  bool exhausted() const { return budget_ && eval_count() >= *budget_; }

 private:
  void reserve() {
    std::uint64_t seen = count_.load();
    do {
      if (budget_ && seen >= *budget_) throw BudgetExhausted(*budget_, 0);
    } while (!count_.compare_exchange_weak(seen, seen + 1));
  }

  Index dim_;
  Function f_;
  std::optional<std::uint64_t> budget_;
  std::atomic<std::uint64_t> count_{0};
};

/// Function values of one probe batch around a center point.
struct ProbeResult {
  double center_value = 0.0;
  std::vector<double> plus_values;
  std::vector<double> minus_values;
  double mu = 0.0;
  DirectionSet directions;

  Index count() const { return static_cast<Index>(plus_values.size()); }
};

namespace detail {

inline void check_probe_args(const Oracle& oracle, const Vector& x,
                             const DirectionSet& directions, double mu) {
  if (!(mu > 0.0)) throw std::invalid_argument("probe: mu must be positive");
  if (x.size() != oracle.dim()) throw DimensionMismatch(oracle.dim(), x.size());
  if (directions.count() > 0 && directions.dim() != oracle.dim()) {
    throw DimensionMismatch(oracle.dim(), directions.dim());
  }
  for (Index j = 0; j < directions.count(); ++j) require_unit(directions.direction(j), "probe");
}

/// Evaluates f(x +/- mu u_j) for every direction. Rethrows budget exhaustion
/// with the number of evaluations this batch had already spent.
inline std::pair<std::vector<double>, std::vector<double>> probe_pairs(
    Oracle& oracle, const Vector& x, const DirectionSet& directions, double mu,
    std::uint64_t already_spent) {
  std::vector<double> plus, minus;
  plus.reserve(directions.count());
  minus.reserve(directions.count());
  std::uint64_t spent = already_spent;
  Vector point(x.size());
  try {
    for (Index j = 0; j < directions.count(); ++j) {
      point = x + mu * directions.direction(j);
      plus.push_back(oracle(point));
      ++spent;
      point = x - mu * directions.direction(j);
      minus.push_back(oracle(point));
      ++spent;
    }
  } catch (const BudgetExhausted& e) {
    throw BudgetExhausted(e.budget(), spent);
  }
  return {std::move(plus), std::move(minus)};
}

}  // namespace detail

inline double evaluate(Oracle& oracle, const Vector& x) { return oracle(x); }

/**
 * Queries f(x) once and f(x +/- mu u_j) for every direction: 2r + 1
 * evaluations. On budget exhaustion the partial batch is discarded and
 * BudgetExhausted::consumed() reports what it spent.
 */
inline ProbeResult probe_batch(Oracle& oracle, const Vector& x, const DirectionSet& directions,
                               double mu) {
  detail::check_probe_args(oracle, x, directions, mu);
  ProbeResult out;
  out.mu = mu;
  out.directions = directions;
  try {
    out.center_value = oracle(x);
  } catch (const BudgetExhausted& e) {
    throw BudgetExhausted(e.budget(), 0);
  }
  auto [plus, minus] = detail::probe_pairs(oracle, x, directions, mu, 1);
  out.plus_values = std::move(plus);
  out.minus_values = std::move(minus);
  return out;
}

/**
 * Extends an existing batch around the same center with more directions,
 * reusing its center value: 2r' evaluations for r' extra directions.
 */
inline void probe_extend(Oracle& oracle, ProbeResult& probe, const Vector& x,
                         const DirectionSet& extra) {
  if (extra.count() == 0) return;
  detail::check_probe_args(oracle, x, extra, probe.mu);
  auto [plus, minus] = detail::probe_pairs(oracle, x, extra, probe.mu, 0);
  probe.plus_values.insert(probe.plus_values.end(), plus.begin(), plus.end());
  probe.minus_values.insert(probe.minus_values.end(), minus.begin(), minus.end());
  probe.directions = concat(probe.directions, extra);
}

struct FdCosts {
  std::uint64_t forward;
  std::uint64_t symmetric;
};

/**
 * Evaluation counts of the two deterministic finite-difference Hessians:
 * forward differences on the canonical basis, (d+1)(d/2+1) = (d+1)(d+2)/2,
 * and symmetric differences, 2d^2 + 1. For comparison output only.
 */
inline FdCosts deterministic_fd_costs(std::uint64_t d) {
  if (d < 1) throw std::invalid_argument("deterministic_fd_costs: d must be positive");
  return {(d + 1) * (d + 2) / 2, 2 * d * d + 1};
}

}  // namespace fedzen
