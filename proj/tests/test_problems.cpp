#include "fedzen/problems.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

using namespace fedzen;

namespace {

// Closed-form gradient and Hessian diagonal against central differences at
// mu = 1e-5 on 10 seeded points.
void check_derivatives(const ProblemSpec& p, double radius, std::uint64_t seed) {
  ASSERT_TRUE(p.known && p.known->gradient && p.known->hessian);
  RngStream rng(seed);
  const double mu = 1e-5;
  for (int t = 0; t < 10; ++t) {
    Vector x(p.dim);
    for (Index i = 0; i < p.dim; ++i) x(i) = rng.uniform(-radius, radius);
    const Vector g = p.known->gradient(x);
    const Matrix h = p.known->hessian(x);
    Vector fd(p.dim);
    for (Index i = 0; i < p.dim; ++i) {
      Vector e = Vector::Zero(p.dim);
      e(i) = mu;
      fd(i) = (p.objective(x + e) - p.objective(x - e)) / (2 * mu);
      const Vector gd = (p.known->gradient(x + e) - p.known->gradient(x - e)) / (2 * mu);
      EXPECT_NEAR(gd(i), h(i, i), 1e-3 * std::max(1.0, std::abs(h(i, i))));
    }
    EXPECT_LE((fd - g).norm(), 1e-4 * std::max(1.0, g.norm()));
  }
}

Dataset one_sample() {
  Dataset ds;
  ds.dim = 1;
  ds.labels = {1};
  ds.rows = {SparseRow{{0}, {1.0}}};
  return ds;
}

Dataset small_dense() {
  std::istringstream in(
      "+1 1:1.0 3:2.0\n"
      "-1 2:-1.5 3:0.5\n"
      "1 1:0.3 2:0.7\n"
      "0 1:2.0 3:-1.0\n");
  return parse_libsvm(in);
}

}  // namespace

TEST(Quadratic, IdentityCase) {
  ProblemSpec p = make_quadratic(Matrix::Identity(3, 3), Vector::Zero(3));
  EXPECT_EQ(*p.known->x_star, Vector::Zero(3));
  EXPECT_EQ(*p.known->f_star, 0.0);
  EXPECT_DOUBLE_EQ(*p.known->m, 1.0);
  EXPECT_DOUBLE_EQ(*p.known->L1, 1.0);
  EXPECT_EQ(*p.known->L2, 0.0);
}

TEST(Quadratic, TwoByTwo) {
  ProblemSpec p = make_quadratic(Eigen::Vector2d(1, 100).asDiagonal(), Eigen::Vector2d(1, 100));
  EXPECT_NEAR((*p.known->x_star - Eigen::Vector2d(1, 1)).norm(), 0.0, 1e-14);
  EXPECT_NEAR(*p.known->f_star, -50.5, 1e-12);
  EXPECT_NEAR(p.objective(Eigen::Vector2d(1, 1)), -50.5, 1e-12);
}

TEST(Quadratic, ConstantsMatchSpectrum) {
  RngStream rng(1);
  const Matrix a = random_spd(7, 50.0, rng);
  ProblemSpec p = make_quadratic(a, Vector::Ones(7));
  EXPECT_NEAR(*p.known->m, 1.0, 1e-10);
  EXPECT_NEAR(*p.known->L1, 50.0, 1e-10);
  check_derivatives(p, 2.0, 2);
}

TEST(Quadratic, RejectsNonSpd) {
  EXPECT_THROW(make_quadratic(Eigen::Vector2d(1, -1).asDiagonal(), Vector::Zero(2)), std::invalid_argument);
  Matrix a(2, 2);
  a << 1, 0.5, 0, 1;
  EXPECT_THROW(make_quadratic(a, Vector::Zero(2)), std::invalid_argument);
}

TEST(Cubic, DerivativesAndConstants) {
  ProblemSpec p = make_cubic_box(1, 2.0);
  EXPECT_DOUBLE_EQ(p.known->hessian(Vector::Ones(1))(0, 0), 3.0);
  EXPECT_EQ(*p.known->L2, 2.0);
  EXPECT_FALSE(p.known->m);
  ProblemSpec q = make_cubic_box(4, 0.4);
  EXPECT_NEAR(*q.known->m, 0.2, 1e-15);
  EXPECT_NEAR(*q.known->L1, 1.8, 1e-15);
  check_derivatives(q, 0.4, 3);
}

TEST(Logistic, OneSampleAtOrigin) {
  ProblemSpec p = make_logistic(one_sample(), 1.0);
  EXPECT_NEAR(p.objective(Vector::Zero(1)), std::log(2.0), 1e-15);
  EXPECT_NEAR(p.known->gradient(Vector::Zero(1))(0), -0.5, 1e-15);
  const double mu = 1e-5;
  const double fd = (p.objective(Vector::Constant(1, mu)) - p.objective(Vector::Constant(1, -mu))) / (2 * mu);
  EXPECT_NEAR(fd, -0.5, 1e-8);
  EXPECT_EQ(*p.known->m, 1.0);
}

TEST(Logistic, FrozenAgainstNumpy) {
  ProblemSpec p = make_logistic(small_dense(), 0.3);
  const Vector x = Eigen::Vector3d(0.2, -0.4, 0.1);
  EXPECT_NEAR(p.objective(x), 0.8431527128804468, 1e-15);
  const Vector g_ref = Eigen::Vector3d(0.2052847308009014, -0.46346528964632466, -0.2321404913125014);
  EXPECT_LE((p.known->gradient(x) - g_ref).cwiseAbs().maxCoeff(), 1e-15);
  Matrix h_ref(3, 3);
  h_ref << 0.6100809809226522, 0.01296745985855609, -0.00209878297460836, 0.01296745985855609,
      0.4570154958053486, -0.04225269648957259, -0.00209878297460836, -0.04225269648957259,
      0.6154595558274065;
  EXPECT_LE((p.known->hessian(x) - h_ref).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_NEAR(*p.known->L1, 1.1175, 1e-15);
  check_derivatives(p, 1.0, 4);
}

TEST(Logistic, ReferenceMinimizerMatchesScipy) {
  const Dataset ds = small_dense();
  ProblemSpec p = make_logistic(ds, 0.3);
  attach_reference_minimizer(p, ds, 0.3);
  const Vector ref = Eigen::Vector3d(-0.15889982111664042, 0.6498308557262846, 0.5637405518248135);
  EXPECT_LE((*p.known->x_star - ref).norm(), 1e-11);
  EXPECT_NEAR(*p.known->f_star, 0.5108040720582427, 1e-15);
}

TEST(Logistic, ExtendedPrecisionAgrees) {
  RngStream rng(5);
  const Dataset ds = synthetic_classification(50, 4, 1.0, rng);
  ProblemSpec plain = make_logistic(ds, 0.1);
  LogisticOptions opt;
  opt.extended_precision = true;
  opt.offset = 0.25;
  ProblemSpec ext = make_logistic(ds, 0.1, opt);
  const Vector x = Eigen::Vector4d(0.1, -0.2, 0.3, 0.05);
  EXPECT_NEAR(ext.objective(x), plain.objective(x) - 0.25, 1e-14);
}

TEST(Logistic, HessianLipschitzEstimateIsPositive) {
  RngStream rng(6);
  const Dataset ds = synthetic_classification(40, 3, 1.0, rng);
  ProblemSpec p = make_logistic(ds, 0.1);
  ASSERT_TRUE(p.known->L2);
  EXPECT_GT(*p.known->L2, 0.0);
  EXPECT_FALSE(p.known->notes.empty());
}

TEST(Logistic, RejectsBadInput) {
  EXPECT_THROW(make_logistic(Dataset{}, 1.0), std::invalid_argument);
  EXPECT_THROW(make_logistic(one_sample(), 0.0), std::invalid_argument);
}

TEST(Libsvm, ParsesFeatures) {
  std::istringstream in("+1 1:0.5 3:2.0\n");
  const Dataset ds = parse_libsvm(in);
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.labels[0], 1);
  EXPECT_EQ(ds.rows[0].index, (std::vector<Index>{0, 2}));
  EXPECT_EQ(ds.rows[0].value, (std::vector<double>{0.5, 2.0}));
  EXPECT_GE(ds.dim, 3);
}

TEST(Libsvm, ZeroLabelMapsToMinusOne) {
  std::istringstream in("0 1:1\n");
  EXPECT_EQ(parse_libsvm(in).labels[0], -1);
}

TEST(Libsvm, NonIncreasingIndex) {
  std::istringstream in("+1 1:1\n1 3:1 2:1\n");
  try {
    parse_libsvm(in);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("non-increasing index at line 2"), std::string::npos);
  }
}

TEST(Libsvm, MalformedLines) {
  for (const char* text : {"+1 1=2\n", "x 1:1\n", "+1 0:1\n", "2 1:1\n", "+1 1:abc\n"}) {
    std::istringstream in(text);
    EXPECT_THROW(parse_libsvm(in), ParseError) << text;
  }
}

TEST(Libsvm, CommentsBlankLinesAndOverride) {
  std::istringstream in("# header\n\n-1 2:1 # trailing\n");
  const Dataset ds = parse_libsvm(in, 5);
  EXPECT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.dim, 5);
}

TEST(Libsvm, RoundTrip) {
  RngStream rng(7);
  const Dataset ds = synthetic_classification(20, 5, 1.3, rng);
  std::stringstream s;
  write_libsvm(s, ds);
  const Dataset back = parse_libsvm(s);
  EXPECT_EQ(back.labels, ds.labels);
  for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_EQ(back.rows[i].value, ds.rows[i].value);
}

TEST(MinimizerCache, WritesAndReuses) {
  const auto dir = std::filesystem::temp_directory_path() / "fedzen_cache_test";
  std::filesystem::create_directories(dir);
  const std::string data_path = (dir / "small.svm").string();
  const Dataset ds = small_dense();
  const std::string cache = minimizer_cache_path(data_path, logistic_config_hash(ds, 0.3));
  std::filesystem::remove(cache);

  ProblemSpec p = make_logistic(ds, 0.3);
  attach_reference_minimizer(p, ds, 0.3, data_path);
  ASSERT_TRUE(std::filesystem::exists(cache));
  auto loaded = load_minimizer(cache);
  ASSERT_TRUE(loaded);
  EXPECT_EQ(loaded->first, *p.known->x_star);
  EXPECT_EQ(loaded->second, *p.known->f_star);

  ProblemSpec q = make_logistic(ds, 0.3);
  attach_reference_minimizer(q, ds, 0.3, data_path);
  EXPECT_EQ(*q.known->x_star, *p.known->x_star);
  EXPECT_NE(logistic_config_hash(ds, 0.3), logistic_config_hash(ds, 0.31));
  std::filesystem::remove_all(dir);
}

TEST(MinimizerCache, HashReference) {
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(fnv1a(""), 14695981039346656037ull);
}
