#include "fedzen/fedsim.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace fedzen;

namespace {

Dataset indexed(std::size_t n) {
  Dataset ds;
  ds.dim = 1;
  for (std::size_t i = 0; i < n; ++i) {
    ds.labels.push_back(i % 2 ? 1 : -1);
    ds.rows.push_back(SparseRow{{0}, {static_cast<double>(i)}});
  }
  return ds;
}

std::vector<std::size_t> ids_of(const Dataset& part) {
  std::vector<std::size_t> out;
  for (const auto& r : part.rows) out.push_back(static_cast<std::size_t>(r.value[0]));
  return out;
}

struct Split {
  std::vector<ClientNode> clients;
  std::vector<std::function<double(const Vector&)>> parts;
  Matrix mean_a;
};

Split quadratic_split(std::size_t n, Index d, std::uint64_t seed) {
  RngStream rng(seed);
  Split s;
  s.mean_a = Matrix::Zero(d, d);
  for (std::size_t c = 0; c < n; ++c) {
    const Matrix a = random_spd(d, 10.0, rng);
    s.mean_a += a / static_cast<double>(n);
    ProblemSpec p = make_quadratic(a, Vector::Zero(d));
    s.parts.push_back(p.objective);
    s.clients.push_back(ClientNode{c, p.make_oracle()});
  }
  return s;
}

}  // namespace

TEST(Partition, ContiguousHalves) {
  FederationConfig cfg{2, PartitionPolicy::contiguous};
  RngStream rng(1);
  const auto parts = partition_dataset(indexed(10), cfg, rng);
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_EQ(ids_of(parts[0]), (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  EXPECT_EQ(ids_of(parts[1]), (std::vector<std::size_t>{5, 6, 7, 8, 9}));
}

TEST(Partition, RemainderGoesToLowestIds) {
  FederationConfig cfg{3, PartitionPolicy::contiguous};
  RngStream rng(1);
  const auto parts = partition_dataset(indexed(10), cfg, rng);
  EXPECT_EQ(parts[0].size(), 4u);
  EXPECT_EQ(parts[1].size(), 3u);
  EXPECT_EQ(parts[2].size(), 3u);
}

TEST(Partition, ShuffleIsDeterministicAndCovers) {
  FederationConfig cfg{3, PartitionPolicy::iid_shuffle};
  RngStream a(4), b(4);
  const auto pa = partition_indices(17, cfg, a);
  const auto pb = partition_indices(17, cfg, b);
  EXPECT_EQ(pa, pb);
  std::vector<std::size_t> all;
  for (const auto& p : pa) all.insert(all.end(), p.begin(), p.end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expect(17);
  std::iota(expect.begin(), expect.end(), 0);
  EXPECT_EQ(all, expect);
}

TEST(Partition, TooManyClients) {
  FederationConfig cfg{11, PartitionPolicy::contiguous};
  RngStream rng(1);
  EXPECT_THROW(partition_dataset(indexed(10), cfg, rng), std::invalid_argument);
}

TEST(FederatedProbe, SingleClientMatchesCentral) {
  ProblemSpec p = make_cubic_box(3, 1.0);
  std::vector<ClientNode> clients;
  clients.push_back(ClientNode{0, p.make_oracle()});
  Oracle central = p.make_oracle();
  RngStream rng(2);
  const DirectionSet dirs = stiefel_sample(3, 5, rng);
  const Vector x = Eigen::Vector3d(0.1, 0.2, -0.3);
  const FederatedProbe fp = federated_probe(clients, x, dirs, 1e-3);
  const ProbeResult cp = probe_batch(central, x, dirs, 1e-3);
  EXPECT_EQ(fp.probe.center_value, cp.center_value);
  EXPECT_EQ(fp.probe.plus_values, cp.plus_values);
  EXPECT_EQ(fp.probe.minus_values, cp.minus_values);
  EXPECT_EQ(fp.traffic.up, 11u);
  EXPECT_EQ(fp.traffic.down, 33u);
}

TEST(FederatedProbe, HessianMatchesCentralizedMean) {
  Split s = quadratic_split(5, 4, 3);
  Oracle central(4, mean_objective(s.parts));
  RngStream rng(5);
  const DirectionSet dirs = stiefel_sample(4, 16, rng);
  const Vector x = Vector::Constant(4, 0.5);
  FederatedProbe fp = federated_probe(s.clients, x, dirs, 1e-3);
  HessianEstimate hf = HessianEstimate::zero(4);
  apply_probe_updates(hf, fp.probe, 0, fp.probe.count());
  auto [hc, cp] = estimate_hessian(central, x, dirs, 1e-3);
  EXPECT_LE((hf.H - hc.H).cwiseAbs().maxCoeff(), 1e-12);
  // the last update matches the curvature of the averaged objective
  const Vector u = dirs.direction(15);
  EXPECT_NEAR(u.dot(hf.H * u), u.dot(s.mean_a * u), 1e-6);
  for (const auto& c : s.clients) EXPECT_EQ(c.eval_count(), 33u);
  EXPECT_EQ(fp.traffic.up, 5u * 33u);
}

TEST(FederatedProbe, IdenticalClientsEqualAnyClient) {
  ProblemSpec p = make_cubic_box(2, 1.0);
  std::vector<ClientNode> clients;
  for (std::size_t c = 0; c < 4; ++c) clients.push_back(ClientNode{c, p.make_oracle()});
  Oracle single = p.make_oracle();
  const Vector x = Eigen::Vector2d(0.3, -0.1);
  const FederatedProbe fp = federated_probe(clients, x, canonical_basis(2), 1e-2);
  const ProbeResult sp = probe_batch(single, x, canonical_basis(2), 1e-2);
  EXPECT_DOUBLE_EQ(fp.probe.center_value, sp.center_value);
  for (std::size_t j = 0; j < 2; ++j) EXPECT_DOUBLE_EQ(fp.probe.plus_values[j], sp.plus_values[j]);
}

TEST(FederatedProbe, ExtendTraffic) {
  Split s = quadratic_split(3, 4, 6);
  RngStream rng(7);
  FederatedProbe fp = federated_probe(s.clients, Vector::Zero(4), stiefel_sample(4, 4, rng), 1e-3);
  const Traffic t = federated_extend(s.clients, fp.probe, Vector::Zero(4), stiefel_sample(4, 6, rng));
  EXPECT_EQ(t.up, 3u * 12u);
  EXPECT_EQ(t.down, 12u * 4u);
  EXPECT_EQ(fp.probe.count(), 10);
  for (const auto& c : s.clients) EXPECT_EQ(c.eval_count(), 9u + 12u);
}

TEST(FederatedProbe, ClientFailureAbortsRound) {
  std::vector<ClientNode> clients;
  clients.push_back(ClientNode{0, Oracle(2, [](const Vector& x) { return x.sum(); })});
  clients.push_back(ClientNode{1, Oracle(2, [](const Vector&) -> double { throw std::runtime_error("down"); })});
  try {
    federated_probe(clients, Vector::Zero(2), canonical_basis(2), 0.1);
    FAIL() << "expected ClientFailure";
  } catch (const ClientFailure& e) {
    EXPECT_EQ(e.client_id(), 1u);
  }
}

TEST(FederatedProbe, ParallelEqualsSerial) {
  Split a = quadratic_split(4, 3, 8), b = quadratic_split(4, 3, 8);
  RngStream rng(9);
  const DirectionSet dirs = stiefel_sample(3, 7, rng);
  const FederatedProbe serial = federated_probe(a.clients, Vector::Ones(3), dirs, 1e-3, false);
  const FederatedProbe par = federated_probe(b.clients, Vector::Ones(3), dirs, 1e-3, true);
  EXPECT_EQ(serial.probe.plus_values, par.probe.plus_values);
  EXPECT_EQ(serial.probe.center_value, par.probe.center_value);
}

TEST(FederatedRun, SingleClientReducesToCentral) {
  ProblemSpec p = make_cubic_box(3, 0.4);
  std::vector<ClientNode> clients;
  clients.push_back(ClientNode{0, p.make_oracle()});
  Oracle central = p.make_oracle();
  SolverConfig cfg;
  cfg.alpha = 1.0;
  cfg.max_iterations = 8;
  RngStream r1(10), r2(10);
  const Vector x0 = Eigen::Vector3d(0.1, -0.2, 0.05);
  const RunTrace ft = fedzen_federated_run(x0, clients, cfg, r1);
  const RunTrace ct = fedzen_run(x0, central, cfg, r2);
  EXPECT_LE((ft.x_final - ct.x_final).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(ft.records.size(), ct.records.size());
  ASSERT_EQ(ft.client_evals.size(), 1u);
  EXPECT_EQ(ft.client_evals[0], ct.total_evals);
}

TEST(FederatedRun, RoundTrafficAccounting) {
  Split s = quadratic_split(5, 3, 11);
  SolverConfig cfg;
  cfg.r_policy = FixedR{7};
  cfg.max_iterations = 4;
  RngStream rng(12);
  const RunTrace t = fedzen_federated_run(Vector::Ones(3), s.clients, cfg, rng);
  ASSERT_EQ(t.records.size(), 4u);
  for (const auto& rec : t.records) {
    EXPECT_EQ(*rec.up_scalars, 5u * 15u);
    EXPECT_EQ(*rec.down_scalars, 15u * 3u);
  }
  for (auto e : t.client_evals) EXPECT_EQ(e, 4u * 15u);
}

TEST(FederatedRun, LogisticConvergesToGlobalMinimizer) {
  RngStream data_rng(13);
  const Dataset ds = synthetic_classification(200, 5, 1.0, data_rng);
  FederationConfig fc{5, PartitionPolicy::iid_shuffle};
  RngStream part_rng(14);
  std::vector<ClientNode> clients = make_logistic_clients(ds, fc, part_rng, 0.1);
  ProblemSpec global = make_logistic(ds, 0.1);
  attach_reference_minimizer(global, ds, 0.1);

  SolverConfig cfg;
  cfg.mu = 1e-7;
  cfg.alpha = 1.0;
  cfg.lambda_min = *global.known->m;
  cfg.lambda_max = *global.known->L1;
  cfg.r_policy = FixedR{10};
  cfg.max_iterations = 60;
  RngStream rng(15);
  const RunTrace t = fedzen_federated_run(Vector::Zero(5), clients, cfg, rng,
                                          {global.known->x_star, global.known->f_star, {}});
  EXPECT_LE((t.x_final - *global.known->x_star).norm(), 1e-5);
}

TEST(FederatedRun, SharesAverageToGlobalObjective) {
  RngStream data_rng(16);
  const Dataset ds = synthetic_classification(23, 3, 1.0, data_rng);
  FederationConfig fc{4, PartitionPolicy::iid_shuffle};
  RngStream part_rng(17);
  std::vector<ClientNode> clients = make_logistic_clients(ds, fc, part_rng, 0.2);
  ProblemSpec global = make_logistic(ds, 0.2);
  const Vector x = Eigen::Vector3d(0.3, -0.7, 1.1);
  double s = 0.0;
  for (auto& c : clients) s += c.oracle(x);
  EXPECT_NEAR(s / 4.0, global.objective(x), 1e-14);
}
