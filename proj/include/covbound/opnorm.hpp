#pragma once

// Operator norms ||A|| = sup_{||u||<=1, ||v||<=1} |<Au, v>| of symmetric
// matrices, with u, v ranging over the unit ball of the dual space E*.
//
//   euclidean : largest |eigenvalue|
//   sup_norm  : E = l-inf, E* = l1, so the sup is the largest |A_ij|
//   one_norm  : E = l1, E* = l-inf, the l-inf -> l1 norm. For fixed u the best
//               v is sign(Au), so the search is max_u ||Au||_1 over 2^(d-1)
//               sign vectors (u and -u give the same value).

#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "covbound/covmodel.hpp"
#include "covbound/geometry.hpp"
#include "covbound/sampler.hpp"

namespace covbound {

enum class OpNormMethod { eigen_iterative, eigen_dense, max_entry, sign_enumeration };

std::string to_string(OpNormMethod method);

inline constexpr int kMaxOneNormDimension = 24;
inline constexpr Eigen::Index kDenseEigenMaxDimension = 64;
inline constexpr double kDefaultOpNormTolerance = 1e-9;

struct OpNormResult {
  double value = 0.0;
  OpNormMethod method = OpNormMethod::eigen_dense;
  int iterations = 0;
  /// ||Av - lambda v||_2 for the eigen methods; zero for exact enumerations.
  double residual = 0.0;
  /// Set when the iterative solver did not converge and the dense solve ran.
  bool fell_back = false;
};

struct OpNormOptions {
  /// Residual target relative to ||A||_F for the iterative solver.
  double tol = kDefaultOpNormTolerance;
  /// Forces eigen_iterative or eigen_dense in the euclidean geometry.
  std::optional<OpNormMethod> euclidean_method;
  /// Seeds the Lanczos start vector.
  std::uint64_t seed = 0;
  int max_iterations = 300;
};

/// Operator norm of a symmetric matrix. Throws ConfigError on asymmetry beyond
/// 1e-12 relative and UnsupportedSizeError for one_norm with d > 24.
OpNormResult operator_norm(const Eigen::MatrixXd& a, NormGeometry geometry,
                           const OpNormOptions& options = {});
OpNormResult operator_norm(const Eigen::MatrixXd& a, NormGeometry geometry, double tol);

/// ||Sigma_hat - Sigma|| in the model's geometry.
double operator_norm_deviation(const SampleBatch& batch, const CovarianceModel& model,
                               const OpNormOptions& options = {});
double operator_norm_deviation(const SampleBatch& batch, const CovarianceModel& model,
                               double tol);

}  // namespace covbound
