#include <gtest/gtest.h>

#include <cmath>

#include "sysid/metrics.hpp"
#include "sysid/model.hpp"
#include "test_util.hpp"

namespace sysid {
namespace {

using testing::random_matrix;
using testing::random_spd;

TEST(ParamError, Examples) {
  EXPECT_EQ(param_error(Matrix::Identity(3, 3), Matrix::Identity(3, 3)), 0.0);
  Matrix a(2, 2);
  a << 3.0, 0.0, 0.0, -1.0;
  EXPECT_NEAR(param_error(a, Matrix::Zero(2, 2)), 3.0, 1e-10);
  EXPECT_NEAR(param_error(Matrix::Zero(2, 2), 0.9 * Matrix::Identity(2, 2)), 0.9, 1e-10);
  Matrix r1 = Matrix::Constant(3, 3, 1.0);  // rank one, norm 3
  EXPECT_NEAR(param_error(r1, Matrix::Zero(3, 3)), 3.0, 1e-9);
  EXPECT_THROW(param_error(Matrix::Zero(2, 2), Matrix::Zero(3, 3)), DimensionError);
}

TEST(ParamError, IsANorm) {
  SeededRng rng(1);
  for (int t = 0; t < 20; ++t) {
    const Matrix x = random_matrix(4, 4, rng), y = random_matrix(4, 4, rng), z = random_matrix(4, 4, rng);
    EXPECT_NEAR(param_error(x, y), param_error(y, x), 1e-9 * param_error(x, y));
    EXPECT_LE(param_error(x, z), (param_error(x, y) + param_error(y, z)) * (1 + 1e-9));
    EXPECT_NEAR(param_error(x, y), testing::svd_norm(x - y), 1e-9 * testing::svd_norm(x - y));
  }
}

TEST(PredExcess, Examples) {
  EXPECT_EQ(pred_excess(Matrix::Identity(2, 2), Matrix::Identity(2, 2), Matrix::Identity(2, 2)), 0.0);
  // Delta = I, G = diag(2, 3) -> tr(G) = 5.
  Matrix g = Matrix::Zero(2, 2);
  g.diagonal() << 2.0, 3.0;
  EXPECT_NEAR(pred_excess(Matrix::Identity(2, 2), Matrix::Zero(2, 2), g), 5.0, 1e-14);
  // Scalar: (0.5 - 0.3)^2 * 4 = 0.16.
  EXPECT_NEAR(pred_excess(Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 0.3), Matrix::Constant(1, 1, 4.0)), 0.16,
              1e-14);
  EXPECT_THROW(pred_excess(Matrix::Zero(2, 2), Matrix::Zero(2, 2), Matrix::Zero(3, 3)), DimensionError);
}

TEST(PredExcess, SandwichBound) {
  SeededRng rng(2);
  for (int t = 0; t < 30; ++t) {
    const Matrix g = random_spd(4, rng);
    const Matrix delta = random_matrix(4, 4, rng);
    const double fro2 = delta.squaredNorm();
    const double p = pred_excess(delta, Matrix::Zero(4, 4), g);
    EXPECT_GE(p, testing::min_eig(g) * fro2 * (1 - 1e-12));
    EXPECT_LE(p, testing::max_eig(g) * fro2 * (1 + 1e-12));
    EXPECT_NEAR(p, (delta.transpose() * delta * g).trace(), 1e-10 * p);
  }
}

TEST(PredExcess, MatchesMonteCarloExcessLoss) {
  SeededRng rng(3);
  const Matrix a_star = rand_bimod(3, 0.8, rng);
  const Matrix sigma = Matrix::Identity(3, 3);
  const Matrix g = solve_lyapunov(a_star, sigma, 1e-13);
  const Matrix a_hat = a_star + 0.2 * random_matrix(3, 3, rng);
  const Matrix chol = cholesky(g);
  const int n = 200000;
  double sum = 0.0;
  Vector x(3);
  for (int i = 0; i < n; ++i) {
    gaussian_vector(rng, chol, x);
    sum += ((a_hat - a_star) * x).squaredNorm();
  }
  const double expected = pred_excess(a_hat, a_star, g);
  EXPECT_NEAR(sum / n, expected, 0.02 * expected);
}

TEST(Summarize, MeanStdAndRatios) {
  auto curve = [](EstimatorKind k, std::uint64_t seed, double p, double q) {
    ErrorCurve c;
    c.estimator = k;
    c.seed = seed;
    c.records.push_back({0, 10, 100.0, 100.0, true});
    c.records.push_back({1, 20, p, q, false});
    return c;
  };
  const std::vector<ErrorCurve> curves{
      curve(EstimatorKind::sgd_rer, 1, 1.0, 2.0), curve(EstimatorKind::sgd_rer, 2, 3.0, 6.0),
      curve(EstimatorKind::ols, 1, 1.0, 1.0),     curve(EstimatorKind::ols, 2, 1.0, 3.0),
      curve(EstimatorKind::sgd, 1, 5.0, 5.0),     ErrorCurve{EstimatorKind::sgd_er, 1, {}},
  };
  const auto rows = summarize(curves);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].estimator, EstimatorKind::sgd_rer);
  EXPECT_EQ(rows[1].estimator, EstimatorKind::ols);
  EXPECT_EQ(rows[2].estimator, EstimatorKind::sgd);
  EXPECT_EQ(rows[0].runs, 2u);
  EXPECT_DOUBLE_EQ(rows[0].param_err_mean, 2.0);
  EXPECT_DOUBLE_EQ(rows[0].param_err_std, std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(rows[0].pred_excess_mean, 4.0);
  EXPECT_DOUBLE_EQ(*rows[0].param_err_ratio_ols, 2.0);
  EXPECT_DOUBLE_EQ(*rows[0].pred_excess_ratio_ols, 2.0);
  EXPECT_DOUBLE_EQ(*rows[1].param_err_ratio_ols, 1.0);
  EXPECT_EQ(rows[2].runs, 1u);
  EXPECT_EQ(rows[2].param_err_std, 0.0);
}

TEST(Summarize, NoOlsMeansNoRatio) {
  ErrorCurve c{EstimatorKind::sgd, 1, {{0, 5, 1.0, 1.0, false}}};
  const auto rows = summarize(std::vector<ErrorCurve>{c});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_FALSE(rows[0].param_err_ratio_ols.has_value());
  EXPECT_TRUE(summarize(std::vector<ErrorCurve>{}).empty());
}

TEST(EstimatorKind, RoundTrip) {
  for (EstimatorKind k : {EstimatorKind::sgd_rer, EstimatorKind::sgd, EstimatorKind::sgd_er, EstimatorKind::ols,
                          EstimatorKind::sparse_rer})
    EXPECT_EQ(parse_estimator(to_string(k)), k);
  EXPECT_THROW(parse_estimator("adam"), ValidationError);
}

}  // namespace
}  // namespace sysid
