#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "covbound/covmodel.hpp"
#include "covbound/errors.hpp"
#include "covbound/opnorm.hpp"
#include "covbound/sampler.hpp"
#include "oracles.hpp"

using namespace covbound;

namespace {

constexpr NormGeometry kAll[] = {NormGeometry::euclidean, NormGeometry::sup_norm,
                                 NormGeometry::one_norm};

Eigen::MatrixXd random_symmetric(std::mt19937_64& gen, int d) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j <= i; ++j) a(i, j) = a(j, i) = z(gen);
  }
  return a;
}

Eigen::MatrixXd random_integer_symmetric(std::mt19937_64& gen, int d) {
  std::uniform_int_distribution<int> v(-9, 9);
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j <= i; ++j) a(i, j) = a(j, i) = v(gen);
  }
  return a;
}

}  // namespace

TEST(OperatorNorm, SmallExamples) {
  Eigen::MatrixXd diag = Eigen::Vector2d(3.0, 1.0).asDiagonal();
  EXPECT_DOUBLE_EQ(operator_norm(diag, NormGeometry::euclidean).value, 3.0);

  Eigen::MatrixXd swap(2, 2);
  swap << 0.0, 1.0, 1.0, 0.0;
  const auto sup = operator_norm(swap, NormGeometry::sup_norm);
  EXPECT_DOUBLE_EQ(sup.value, 1.0);
  EXPECT_EQ(sup.method, OpNormMethod::max_entry);

  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(2, 2);
  const auto one = operator_norm(id, NormGeometry::one_norm);
  EXPECT_DOUBLE_EQ(one.value, 2.0);
  EXPECT_EQ(one.method, OpNormMethod::sign_enumeration);
  EXPECT_DOUBLE_EQ(oracle::brute_force_sign_pairs(id), 2.0);
}

TEST(OperatorNorm, IterativeMatchesDenseOnSmallMatrices) {
  std::mt19937_64 gen(1);
  OpNormOptions iterative;
  iterative.euclidean_method = OpNormMethod::eigen_iterative;
  iterative.tol = 1e-13;
  OpNormOptions dense;
  dense.euclidean_method = OpNormMethod::eigen_dense;
  for (int k = 0; k < 200; ++k) {
    const int d = 1 + k % 8;
    const Eigen::MatrixXd a = random_symmetric(gen, d);
    iterative.seed = static_cast<std::uint64_t>(k);
    const auto it = operator_norm(a, NormGeometry::euclidean, iterative);
    const auto de = operator_norm(a, NormGeometry::euclidean, dense);
    EXPECT_NEAR(it.value, de.value, 1e-10 * de.value) << "instance " << k;
  }
}

TEST(OperatorNorm, IterativeMatchesDenseAboveThreshold) {
  std::mt19937_64 gen(2);
  const Eigen::MatrixXd a = random_symmetric(gen, 120);
  const auto it = operator_norm(a, NormGeometry::euclidean);
  EXPECT_EQ(it.method, OpNormMethod::eigen_iterative);
  OpNormOptions dense;
  dense.euclidean_method = OpNormMethod::eigen_dense;
  const auto de = operator_norm(a, NormGeometry::euclidean, dense);
  EXPECT_NEAR(it.value, de.value, 1e-9 * de.value);
  EXPECT_LE(it.residual, 1e-9 * a.norm());
}

TEST(OperatorNorm, DenseFallbackIsFlagged) {
  std::mt19937_64 gen(3);
  const Eigen::MatrixXd a = random_symmetric(gen, 80);
  OpNormOptions opts;
  opts.euclidean_method = OpNormMethod::eigen_iterative;
  opts.max_iterations = 2;
  const auto r = operator_norm(a, NormGeometry::euclidean, opts);
  EXPECT_TRUE(r.fell_back);
  EXPECT_EQ(r.method, OpNormMethod::eigen_dense);
}

TEST(OperatorNorm, SignEnumerationMatchesBruteForceExactly) {
  std::mt19937_64 gen(4);
  for (int d = 1; d <= 6; ++d) {
    for (int k = 0; k < 6; ++k) {
      const Eigen::MatrixXd a = random_integer_symmetric(gen, d);
      EXPECT_EQ(operator_norm(a, NormGeometry::one_norm).value, oracle::brute_force_sign_pairs(a))
          << "d=" << d;
    }
  }
}

TEST(OperatorNorm, NormOrdering) {
  std::mt19937_64 gen(5);
  for (int k = 0; k < 200; ++k) {
    const int d = 1 + k % 8;
    const Eigen::MatrixXd a = random_symmetric(gen, d);
    const double m = operator_norm(a, NormGeometry::sup_norm).value;
    const double e = operator_norm(a, NormGeometry::euclidean).value;
    const double o = operator_norm(a, NormGeometry::one_norm).value;
    EXPECT_LE(m, e * (1 + 1e-12));
    EXPECT_LE(e, o * (1 + 1e-12));
  }
}

TEST(OperatorNorm, HomogeneityAndTriangleInequality) {
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> scale(-5.0, 5.0);
  for (int k = 0; k < 1000; ++k) {
    const int d = 1 + k % 8;
    const Eigen::MatrixXd a = random_symmetric(gen, d);
    const Eigen::MatrixXd b = random_symmetric(gen, d);
    const double c = scale(gen);
    const NormGeometry g = kAll[k % 3];
    const double na = operator_norm(a, g).value;
    const double nb = operator_norm(b, g).value;
    EXPECT_NEAR(operator_norm(c * a, g).value, std::abs(c) * na, 1e-12 * std::abs(c) * na + 1e-300);
    EXPECT_LE(operator_norm(a + b, g).value, na + nb + 1e-12 * (na + nb));
  }
}

TEST(OperatorNorm, Errors) {
  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 2.0, 0.0, 1.0;
  EXPECT_THROW(operator_norm(asym, NormGeometry::euclidean), ConfigError);
  EXPECT_THROW(operator_norm(Eigen::MatrixXd::Identity(25, 25), NormGeometry::one_norm),
               UnsupportedSizeError);
  EXPECT_NO_THROW(operator_norm(Eigen::MatrixXd::Identity(12, 12), NormGeometry::one_norm));
}

TEST(OperatorNormDeviation, RankOneBatchAgainstZeroModel) {
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(1, 2);
  const auto zero = CovarianceModel::from_factors(f, NormGeometry::euclidean, "zero");
  SampleBatch batch;
  batch.data.resize(1, 2);
  batch.data << 1.0, 2.0;
  EXPECT_NEAR(operator_norm_deviation(batch, zero), 5.0, 1e-12);
}

TEST(OperatorNormDeviation, ExactEigenvectorRowsGiveZero) {
  const auto m = build_model(spectrum::PolyDecay{3, 1.0}, NormGeometry::euclidean);
  // Rows sqrt(n) * factor_k reproduce Sigma exactly with n = factor count.
  SampleBatch batch;
  const double n = m.factor_count();
  batch.data = std::sqrt(n) * m.factors();
  EXPECT_NEAR(operator_norm_deviation(batch, m), 0.0, 1e-14);
}

TEST(OperatorNormDeviation, OneDimensionalMatchesScalarArithmetic) {
  const auto m = build_model(spectrum::Identity{1}, NormGeometry::euclidean);
  const auto batch = sample_gaussian(m, 100, 314);
  double sum = 0.0;
  for (Eigen::Index j = 0; j < batch.n(); ++j) sum += batch.data(j, 0) * batch.data(j, 0);
  EXPECT_NEAR(operator_norm_deviation(batch, m), std::abs(sum / 100.0 - 1.0), 1e-14);
}
