#include <cmath>

#include <gtest/gtest.h>

#include "covbound/covmodel.hpp"
#include "covbound/errors.hpp"
#include "oracles.hpp"

using namespace covbound;

TEST(BuildModel, IdentityHasUnitFactors) {
  const auto m = build_model(spectrum::Identity{3}, NormGeometry::euclidean);
  EXPECT_EQ(m.dimension(), 3);
  EXPECT_EQ(m.factor_count(), 3);
  EXPECT_TRUE(m.covariance().isApprox(Eigen::MatrixXd::Identity(3, 3)));
  EXPECT_TRUE(m.factors().cwiseAbs().isApprox(Eigen::MatrixXd::Identity(3, 3)));
  EXPECT_EQ(m.label(), "identity(d=3)");
}

TEST(BuildModel, PolyDecaySpectrumAndTrace) {
  const auto m = build_model(spectrum::PolyDecay{4, 1.0}, NormGeometry::euclidean);
  ASSERT_EQ(m.eigenvalues().size(), 4);
  EXPECT_NEAR(m.eigenvalues()(0), 1.0, 1e-15);
  EXPECT_NEAR(m.eigenvalues()(1), 0.5, 1e-15);
  EXPECT_NEAR(m.eigenvalues()(2), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(m.eigenvalues()(3), 0.25, 1e-15);
  EXPECT_NEAR(m.trace(), 25.0 / 12.0, 1e-14);
}

TEST(BuildModel, SpikedAndExpDecay) {
  const auto s = build_model(spectrum::Spiked{5, 2, 3.0}, NormGeometry::euclidean);
  EXPECT_NEAR(s.eigenvalues()(0), 4.0, 1e-14);
  EXPECT_NEAR(s.eigenvalues()(1), 4.0, 1e-14);
  EXPECT_NEAR(s.eigenvalues()(4), 1.0, 1e-14);
  const auto e = build_model(spectrum::ExpDecay{3, 0.5}, NormGeometry::euclidean);
  EXPECT_NEAR(e.eigenvalues()(2), std::exp(-1.0), 1e-15);
  const auto l = build_model(spectrum::LowRank{6, 2}, NormGeometry::euclidean);
  EXPECT_EQ(l.factor_count(), 2);
  EXPECT_NEAR(l.trace(), 2.0, 1e-15);
}

TEST(BuildModel, ExplicitNearlySingularMatchesClosedForm) {
  Eigen::MatrixXd a(2, 2);
  a << 1.0, 0.999, 0.999, 1.0;
  const auto m = build_model(spectrum::Explicit{a}, NormGeometry::euclidean);
  const auto [hi, lo] = oracle::sym2x2_eigenvalues(1.0, 0.999, 1.0);
  ASSERT_EQ(m.eigenvalues().size(), 2);
  EXPECT_NEAR(m.eigenvalues()(0), hi, 1e-13);
  EXPECT_NEAR(m.eigenvalues()(1), lo, 1e-13);
  EXPECT_NEAR(hi, 1.999, 1e-15);
  EXPECT_TRUE(m.covariance().isApprox(a, 1e-13));
}

TEST(BuildModel, RejectsInvalidInput) {
  Eigen::MatrixXd neg(2, 2);
  neg << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3, -1
  try {
    build_model(spectrum::Explicit{neg}, NormGeometry::euclidean);
    FAIL() << "expected NotPositiveSemidefiniteError";
  } catch (const NotPositiveSemidefiniteError& e) {
    EXPECT_NEAR(e.most_negative_eigenvalue(), -1.0, 1e-12);
  }
  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.5, 0.0, 1.0;
  EXPECT_THROW(build_model(spectrum::Explicit{asym}, NormGeometry::euclidean), ConfigError);
  EXPECT_THROW(build_model(spectrum::Identity{0}, NormGeometry::euclidean), ConfigError);
  EXPECT_THROW(build_model(spectrum::Spiked{3, 4, 1.0}, NormGeometry::euclidean), ConfigError);
}

TEST(BuildModel, TruncationNeverIncreasesTrace) {
  const auto full = build_model(spectrum::PolyDecay{10, 0.7}, NormGeometry::euclidean);
  double previous = full.trace();
  for (int m = 10; m >= 1; --m) {
    const auto t = build_model(spectrum::PolyDecay{10, 0.7}, NormGeometry::euclidean, m);
    EXPECT_EQ(t.factor_count(), m);
    EXPECT_LE(t.trace(), previous + 1e-15);
    previous = t.trace();
  }
}

TEST(BuildModel, TraceIsSumOfSquaredFactorNorms) {
  Eigen::MatrixXd f(2, 3);
  f << 1.0, 2.0, 0.0, 0.5, -1.0, 3.0;
  const auto m = CovarianceModel::from_factors(f, NormGeometry::sup_norm, "custom");
  EXPECT_NEAR(m.trace(), f.rowwise().squaredNorm().sum(), 1e-14);
  EXPECT_TRUE(m.covariance().isApprox(f.transpose() * f));
}

TEST(EffectiveRank, OneDimensionalIsTwoOverPi) {
  for (double sigma2 : {1.0, 0.01, 250.0}) {
    const auto m = build_model(spectrum::Identity{1}, NormGeometry::euclidean).scaled(sigma2);
    const auto r = effective_rank(m);
    EXPECT_TRUE(r.closed_form);
    EXPECT_NEAR(r.r, 2.0 / M_PI, 1e-14);
  }
}

TEST(EffectiveRank, TwoDimensionalIdentityMatchesChiQuadrature) {
  const auto r = effective_rank(build_model(spectrum::Identity{2}, NormGeometry::euclidean));
  const double e = oracle::chi_mean(2);
  EXPECT_NEAR(e, 1.2533141373155, 1e-10);  // sqrt(pi/2)
  EXPECT_NEAR(r.r, e * e, 1e-9);
  EXPECT_NEAR(r.r, M_PI / 2.0, 1e-12);
  EXPECT_NEAR(chi_mean(3), oracle::chi_mean(3), 1e-9);
  EXPECT_NEAR(chi_mean(3), 1.5957691216057308, 1e-12);
}

TEST(EffectiveRank, RankOneAnyGeometryIsTwoOverPi) {
  Eigen::MatrixXd f(1, 3);
  f << 0.3, -1.2, 2.0;
  for (auto g : {NormGeometry::euclidean, NormGeometry::sup_norm, NormGeometry::one_norm}) {
    const auto r = effective_rank(CovarianceModel::from_factors(f, g, "rank1"));
    EXPECT_NEAR(r.r, 2.0 / M_PI, 1e-12) << to_string(g);
  }
}

TEST(EffectiveRank, IdentityRTildeIsDimension) {
  for (int d : {1, 5, 40}) {
    const auto r = effective_rank(build_model(spectrum::Identity{d}, NormGeometry::euclidean));
    EXPECT_NEAR(r.r_tilde, d, 1e-12);
    EXPECT_LE(r.r, r.r_tilde);
  }
}

TEST(EffectiveRank, ScaleInvariance) {
  const auto base = build_model(spectrum::Identity{6}, NormGeometry::euclidean);
  const auto a = effective_rank(base);
  const auto b = effective_rank(base.scaled(7.5));
  EXPECT_NEAR(a.r, b.r, 1e-12 * a.r);
  EXPECT_NEAR(a.r_tilde, b.r_tilde, 1e-12 * a.r_tilde);

  // Monte Carlo path under a shared seed.
  const auto spiked = build_model(spectrum::Spiked{8, 2, 1.5}, NormGeometry::euclidean);
  const auto c = effective_rank(spiked, 20000, 3);
  const auto d = effective_rank(spiked.scaled(0.2), 20000, 3);
  EXPECT_FALSE(c.closed_form);
  EXPECT_NEAR(c.r, d.r, 3.0 * 2.0 * c.e_norm_x * c.mc_std_error / c.op_norm + 1e-12);
}

TEST(EffectiveRank, JensenAndRankOrdering) {
  for (const SpectrumSpec& spec :
       {SpectrumSpec{spectrum::Spiked{10, 3, 2.0}}, SpectrumSpec{spectrum::PolyDecay{12, 1.0}},
        SpectrumSpec{spectrum::LowRank{9, 4}}}) {
    const auto m = build_model(spec, NormGeometry::euclidean);
    const auto r = effective_rank(m, 20000, 1);
    EXPECT_LE(r.r, r.r_tilde + 3.0 * r.mc_std_error * 2.0 * r.e_norm_x / r.op_norm);
    EXPECT_LE(r.r_tilde, static_cast<double>(m.eigenvalues().size()) + 1e-12);
  }
}

TEST(EffectiveRank, MonteCarloAgreesWithFlatClosedForm) {
  // A flat spectrum given explicitly forces the Monte Carlo path.
  Eigen::MatrixXd f = Eigen::MatrixXd::Identity(4, 4) * 2.0;
  const auto m = CovarianceModel::from_factors(f, NormGeometry::euclidean, "flat");
  const auto r = effective_rank(m, 200000, 11);
  const double exact = 4.0 * std::pow(oracle::chi_mean(4), 2) / 4.0;
  EXPECT_NEAR(r.r, exact, 0.02);
}

TEST(EffectiveRank, ErrorsOnZeroModelAndSmallBudget) {
  const auto zero = build_model(spectrum::Identity{3}, NormGeometry::euclidean).scaled(0.0);
  EXPECT_TRUE(zero.is_zero());
  EXPECT_THROW(effective_rank(zero), UndefinedRankError);
  const auto spiked = build_model(spectrum::Spiked{4, 1, 1.0}, NormGeometry::euclidean);
  EXPECT_THROW(effective_rank(spiked, 100), ConfigError);
}
