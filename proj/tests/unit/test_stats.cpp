#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "covbound/errors.hpp"
#include "covbound/stats.hpp"
#include "oracles.hpp"

using namespace covbound;

TEST(Stats, MedianUsesMidpointForEvenCounts) {
  const std::vector<double> even{4.0, 1.0, 3.0, 2.0};
  const std::vector<double> odd{5.0, 1.0, 3.0};
  EXPECT_DOUBLE_EQ(median(even), 2.5);
  EXPECT_DOUBLE_EQ(median(odd), 3.0);
  EXPECT_DOUBLE_EQ(mean(even), 2.5);
}

TEST(Stats, OrderQuantileTakesCeilingIndex) {
  std::vector<double> xs;
  for (int i = 1; i <= 10; ++i) xs.push_back(i);
  // ceil(0.63 * 10) = 7 -> 7th smallest.
  EXPECT_DOUBLE_EQ(order_quantile(xs, 0.63), 7.0);
  EXPECT_DOUBLE_EQ(order_quantile(xs, 0.7), 7.0);
  EXPECT_DOUBLE_EQ(order_quantile(xs, 1.0), 10.0);
}

TEST(Stats, StandardErrorOfMean) {
  const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
  // sample variance 5/3
  EXPECT_NEAR(std_error_of_mean(xs), std::sqrt(5.0 / 3.0 / 4.0), 1e-15);
}

TEST(LeastSquares, ExactLineHasUnitRSquared) {
  const std::vector<double> x{-3.0, -2.0, -1.0, 0.5};
  std::vector<double> y;
  for (double v : x) y.push_back(0.5 * v);
  const auto fit = least_squares(x, y);
  EXPECT_NEAR(fit.slope, 0.5, 1e-15);
  EXPECT_NEAR(fit.intercept, 0.0, 1e-15);
  EXPECT_NEAR(fit.r_squared, 1.0, 1e-15);
}

TEST(Orlicz, ZeroSamplesAndEmptyInput) {
  const std::vector<double> zeros(10, 0.0);
  EXPECT_EQ(empirical_orlicz_norm(zeros, OrliczKind::psi2), 0.0);
  EXPECT_THROW(empirical_orlicz_norm(std::vector<double>{}, OrliczKind::psi1), ConfigError);
}

TEST(Orlicz, GaussianPsi2MatchesAnalyticValue) {
  // E exp(Z^2/C^2) = 1/sqrt(1 - 2/C^2) = 2 at C^2 = 8/3.
  const double c = std::sqrt(8.0 / 3.0);
  EXPECT_NEAR(oracle::gaussian_exp_square_moment(c), 2.0, 1e-9);

  std::mt19937_64 gen(8);
  std::normal_distribution<double> z;
  std::vector<double> xs(1000000);
  for (auto& x : xs) x = z(gen);
  EXPECT_NEAR(empirical_orlicz_norm(xs, OrliczKind::psi2), c, 0.02);
}

TEST(Orlicz, ExponentialPsi1) {
  // For Exp(1): E exp(X/C) = C/(C-1) = 2 at C = 2.
  std::mt19937_64 gen(9);
  std::exponential_distribution<double> e(1.0);
  std::vector<double> xs(1000000);
  for (auto& x : xs) x = e(gen);
  EXPECT_NEAR(empirical_orlicz_norm(xs, OrliczKind::psi1), 2.0, 0.05);
}

TEST(Orlicz, HomogeneityAndDomination) {
  std::mt19937_64 gen(10);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> shrink(0.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    std::vector<double> a(200), b(200);
    for (std::size_t i = 0; i < a.size(); ++i) {
      b[i] = z(gen);
      a[i] = b[i] * shrink(gen);
    }
    for (auto kind : {OrliczKind::psi1, OrliczKind::psi2}) {
      const double nb = empirical_orlicz_norm(b, kind);
      for (double c : {-3.0, 0.25, 7.0}) {
        std::vector<double> scaled(b);
        for (auto& x : scaled) x *= c;
        EXPECT_NEAR(empirical_orlicz_norm(scaled, kind), std::abs(c) * nb, 1e-9 * std::abs(c) * nb);
      }
      EXPECT_LE(empirical_orlicz_norm(a, kind), nb * (1 + 1e-9));
    }
  }
}
