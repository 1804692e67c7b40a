#pragma once

/**
 * @file fedsim.hpp
 * @brief In-process federated simulation.
 *
 * The global objective is f = (1/n) sum_i f_i with f_i held by client i.
 * Finite differences are linear in f, so the server can assemble the global
 * probe from client function values alone: it broadcasts the query points,
 * each client returns its 2r + 1 local values, and the server averages them
 * value by value in ascending client-id order. The resulting ProbeResult is
 * the probe of the mean objective, and the ordinary solver runs on top of it.
 */

#include "fedzen/oracle.hpp"
#include "fedzen/problems.hpp"
#include "fedzen/rng.hpp"
#include "fedzen/solver.hpp"

#include <cstdint>
#include <future>
#include <memory>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedzen {

/// A client only exposes scalar evaluations of its local objective.
struct ClientNode {
  std::size_t id = 0;
  Oracle oracle;

  std::uint64_t eval_count() const { return oracle.eval_count(); }
};

enum class PartitionPolicy { iid_shuffle, contiguous };

struct FederationConfig {
  std::size_t n_clients = 1;
  PartitionPolicy partition = PartitionPolicy::iid_shuffle;
};

class ClientFailure : public std::runtime_error {
 public:
  ClientFailure(std::size_t id, const std::string& what)
      : std::runtime_error("client " + std::to_string(id) + " failed: " + what), id_(id) {}
  std::size_t client_id() const { return id_; }

 private:
  std::size_t id_;
};

/**
 * Sample indices per client. iid_shuffle permutes with a Fisher-Yates
 * shuffle driven by `rng`; both policies then split evenly, the first
 * (N mod n) clients receiving one extra sample.
 */
inline std::vector<std::vector<std::size_t>> partition_indices(std::size_t n_samples,
                                                               const FederationConfig& config,
                                                               RngStream& rng) {
  if (config.n_clients < 1) throw std::invalid_argument("partition: need at least one client");
  if (config.n_clients > n_samples) {
    throw std::invalid_argument("partition: " + std::to_string(config.n_clients) +
                                " clients for " + std::to_string(n_samples) + " samples");
  }
  std::vector<std::size_t> order(n_samples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (config.partition == PartitionPolicy::iid_shuffle) {
    for (std::size_t i = n_samples; i > 1; --i) {
      const std::size_t j = rng.uniform_index(i);
      std::swap(order[i - 1], order[j]);
    }
  }
  std::vector<std::vector<std::size_t>> parts(config.n_clients);
  const std::size_t base = n_samples / config.n_clients;
  const std::size_t extra = n_samples % config.n_clients;
  std::size_t pos = 0;
  for (std::size_t c = 0; c < config.n_clients; ++c) {
    const std::size_t size = base + (c < extra ? 1 : 0);
    parts[c].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                    order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  return parts;
}

inline std::vector<Dataset> partition_dataset(const Dataset& dataset, const FederationConfig& config,
                                              RngStream& rng) {
  std::vector<Dataset> out;
  for (const auto& idx : partition_indices(dataset.size(), config, rng)) {
    Dataset part;
    part.dim = dataset.dim;
    for (std::size_t i : idx) {
      part.labels.push_back(dataset.labels[i]);
      part.rows.push_back(dataset.rows[i]);
    }
    out.push_back(std::move(part));
  }
  return out;
}

/// Clients holding logistic shares whose average is the full-data objective.
inline std::vector<ClientNode> make_logistic_clients(const Dataset& dataset,
                                                     const FederationConfig& config, RngStream& rng,
                                                     double ridge,
                                                     std::optional<std::uint64_t> budget = std::nullopt) {
  std::vector<ClientNode> clients;
  const auto parts = partition_dataset(dataset, config, rng);
  L2EstimateOptions cheap;
  cheap.samples = 1;
  for (std::size_t c = 0; c < parts.size(); ++c) {
    ProblemSpec share = make_logistic_share(parts[c], dataset.size(), parts.size(), ridge, cheap);
    clients.push_back(ClientNode{c, share.make_oracle(budget)});
  }
  return clients;
}

/// The mean objective (1/n) sum_i f_i, summed in ascending id order.
inline std::function<double(const Vector&)> mean_objective(
    std::vector<std::function<double(const Vector&)>> parts) {
  return [parts = std::move(parts)](const Vector& x) {
    double s = 0.0;
    for (const auto& f : parts) s += f(x);
    return s / static_cast<double>(parts.size());
  };
}

struct FederatedProbe {
  ProbeResult probe;
  Traffic traffic;
};

namespace detail {

inline void check_clients(const std::vector<ClientNode>& clients) {
  if (clients.empty()) throw std::invalid_argument("federated probe: no clients");
  const Index d = clients.front().oracle.dim();
  for (std::size_t c = 0; c < clients.size(); ++c) {
    if (clients[c].id != c) throw std::invalid_argument("federated probe: client ids must be 0..n-1 in order");
    if (clients[c].oracle.dim() != d) throw DimensionMismatch(d, clients[c].oracle.dim());
  }
}

/// Runs `fn(client)` on every client, optionally in parallel, and returns
/// results in id order. Any failure aborts the round.
template <class Fn>
auto gather(std::vector<ClientNode>& clients, bool parallel, Fn fn) {
  using R = decltype(fn(clients.front()));
  std::vector<std::optional<R>> results(clients.size());
  if (parallel && clients.size() > 1) {
    std::vector<std::future<R>> futures;
    futures.reserve(clients.size());
    for (auto& c : clients) futures.push_back(std::async(std::launch::async, [&fn, &c] { return fn(c); }));
    std::exception_ptr first;
    for (std::size_t c = 0; c < futures.size(); ++c) {
      try {
        results[c] = futures[c].get();
      } catch (...) {
        if (!first) first = std::current_exception();
      }
    }
    if (first) std::rethrow_exception(first);
  } else {
    for (std::size_t c = 0; c < clients.size(); ++c) results[c] = fn(clients[c]);
  }
  std::vector<R> out;
  out.reserve(results.size());
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

/// Element-wise mean of client value vectors in ascending id order.
inline std::vector<double> average(const std::vector<std::vector<double>>& per_client) {
  std::vector<double> acc(per_client.front().size(), 0.0);
  for (const auto& v : per_client)
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
  const double n = static_cast<double>(per_client.size());
  for (double& a : acc) a /= n;
  return acc;
}

/// Local values of one client: [f(x)] when `with_center`, then
/// f(x+mu u_j), f(x-mu u_j) for each direction.
inline std::vector<double> client_values(ClientNode& client, const Vector& x, const DirectionSet& dirs,
                                         double mu, bool with_center) {
  try {
    std::vector<double> v;
    if (with_center) {
      const ProbeResult p = probe_batch(client.oracle, x, dirs, mu);
      v.push_back(p.center_value);
      for (Index j = 0; j < p.count(); ++j) {
        v.push_back(p.plus_values[j]);
        v.push_back(p.minus_values[j]);
      }
    } else {
      ProbeResult p;
      p.mu = mu;
      probe_extend(client.oracle, p, x, dirs);
      for (Index j = 0; j < p.count(); ++j) {
        v.push_back(p.plus_values[j]);
        v.push_back(p.minus_values[j]);
      }
    }
    return v;
  } catch (const BudgetExhausted&) {
    throw;
  } catch (const std::exception& e) {
    throw ClientFailure(client.id, e.what());
  }
}

inline void unpack_pairs(const std::vector<double>& mean, std::size_t offset, ProbeResult& out) {
  for (std::size_t i = offset; i + 1 < mean.size(); i += 2) {
    out.plus_values.push_back(mean[i]);
    out.minus_values.push_back(mean[i + 1]);
  }
}

}  // namespace detail

/**
 * Server-side probe of the mean objective. Each client spends 2r + 1
 * evaluations; traffic is n (2r + 1) scalars up and (2r + 1) d scalars down.
 */
inline FederatedProbe federated_probe(std::vector<ClientNode>& clients, const Vector& x,
                                      const DirectionSet& directions, double mu, bool parallel = false) {
  detail::check_clients(clients);
  auto values = detail::gather(clients, parallel, [&](ClientNode& c) {
    return detail::client_values(c, x, directions, mu, true);
  });
  const auto mean = detail::average(values);
  FederatedProbe out;
  out.probe.mu = mu;
  out.probe.directions = directions;
  out.probe.center_value = mean[0];
  detail::unpack_pairs(mean, 1, out.probe);
  const auto points = static_cast<std::uint64_t>(2 * directions.count() + 1);
  out.traffic.up = clients.size() * points;
  out.traffic.down = points * static_cast<std::uint64_t>(directions.dim());
  return out;
}

/// Adds directions to an existing federated probe around the same center:
/// 2r' evaluations per client.
inline Traffic federated_extend(std::vector<ClientNode>& clients, ProbeResult& probe, const Vector& x,
                                const DirectionSet& extra, bool parallel = false) {
  if (extra.count() == 0) return {};
  detail::check_clients(clients);
  auto values = detail::gather(clients, parallel, [&](ClientNode& c) {
    return detail::client_values(c, x, extra, probe.mu, false);
  });
  detail::unpack_pairs(detail::average(values), 0, probe);
  probe.directions = concat(probe.directions, extra);
  const auto points = static_cast<std::uint64_t>(2 * extra.count());
  return {clients.size() * points, points * static_cast<std::uint64_t>(extra.dim())};
}

/// Prober adapter that routes solver probes through the federation. Its
/// evaluation count is the number of global (averaged) function values.
class FederatedProber {
 public:
  explicit FederatedProber(std::vector<ClientNode>& clients, bool parallel = false)
      : clients_(&clients), parallel_(parallel) {
    detail::check_clients(clients);
  }

  Index dim() const { return clients_->front().oracle.dim(); }

  ProbeResult probe(const Vector& x, const DirectionSet& dirs, double mu) {
    auto fp = federated_probe(*clients_, x, dirs, mu, parallel_);
    add(fp.traffic);
    evals_ += static_cast<std::uint64_t>(2 * dirs.count() + 1);
    return std::move(fp.probe);
  }

  void extend(ProbeResult& probe, const Vector& x, const DirectionSet& dirs) {
    add(federated_extend(*clients_, probe, x, dirs, parallel_));
    evals_ += static_cast<std::uint64_t>(2 * dirs.count());
  }

  std::uint64_t evaluations() const { return evals_; }

  std::optional<Traffic> take_traffic() {
    Traffic t = pending_;
    pending_ = {};
    return t;
  }

 private:
  void add(const Traffic& t) {
    pending_.up += t.up;
    pending_.down += t.down;
  }

  std::vector<ClientNode>* clients_;
  bool parallel_;
  std::uint64_t evals_ = 0;
  Traffic pending_;
};

/// Solver loop over the federation; the trace carries per-round traffic and
/// per-client evaluation totals.
inline RunTrace fedzen_federated_run(const Vector& x0, std::vector<ClientNode>& clients,
                                     const SolverConfig& config, RngStream& rng,
                                     const GroundTruth& truth = {}, bool parallel = false) {
  FederatedProber prober(clients, parallel);
  RunTrace trace = fedzen_run_with(x0, prober, config, rng, truth);
  for (const auto& c : clients) trace.client_evals.push_back(c.eval_count());
  return trace;
}

}  // namespace fedzen
