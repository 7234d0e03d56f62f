#include "covbound/opnorm.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "covbound/errors.hpp"
#include "covbound/rng.hpp"

namespace covbound {

namespace {

void check_symmetric(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw ConfigError("operator_norm: matrix is not square");
  const double scale = a.cwiseAbs().maxCoeff();
  if (scale == 0.0) return;
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * scale) {
    throw ConfigError("operator_norm: matrix is not symmetric (relative asymmetry " +
                      std::to_string(asym / scale) + ")");
  }
}

OpNormResult dense_eigen(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
  if (solver.info() != Eigen::Success) throw NumericalError("dense eigensolve failed");
  const auto& values = solver.eigenvalues();
  const Eigen::Index last = values.size() - 1;
  const Eigen::Index pick = std::abs(values(0)) > std::abs(values(last)) ? 0 : last;
  OpNormResult result;
  result.value = std::abs(values(pick));
  result.method = OpNormMethod::eigen_dense;
  const Eigen::VectorXd v = solver.eigenvectors().col(pick);
  result.residual = (a * v - values(pick) * v).norm();
  return result;
}

struct LanczosOutcome {
  bool converged = false;
  OpNormResult result;
};

// Lanczos with full reorthogonalization. Both extreme Ritz pairs must meet the
// residual target before the larger magnitude is accepted.
LanczosOutcome lanczos(const Eigen::MatrixXd& a, double target, std::uint64_t key,
                       int max_iterations) {
  const Eigen::Index d = a.rows();
  const Eigen::Index steps = std::min<Eigen::Index>(d, std::max(1, max_iterations));
  Eigen::MatrixXd basis(d, steps);
  Eigen::VectorXd alpha(steps), beta(steps);

  rng::NormalStream stream(key);
  Eigen::VectorXd q(d);
  for (Eigen::Index i = 0; i < d; ++i) q(i) = stream();
  q.normalize();
  basis.col(0) = q;

  const double breakdown = std::numeric_limits<double>::epsilon() * std::max(1.0, a.norm());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
  LanczosOutcome out;
  for (Eigen::Index j = 0; j < steps; ++j) {
    Eigen::VectorXd w = a * basis.col(j);
    alpha(j) = basis.col(j).dot(w);
    w -= alpha(j) * basis.col(j);
    if (j > 0) w -= beta(j - 1) * basis.col(j - 1);
    for (int pass = 0; pass < 2; ++pass) {
      const auto active = basis.leftCols(j + 1);
      w -= active * (active.transpose() * w);
    }
    beta(j) = w.norm();

    const Eigen::Index k = j + 1;
    if (k == 1) {
      tri.compute(Eigen::MatrixXd::Constant(1, 1, alpha(0)));
    } else {
      Eigen::VectorXd diag = alpha.head(k);
      Eigen::VectorXd sub = beta.head(k - 1);
      tri.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    }
    const auto& theta = tri.eigenvalues();
    const auto& s = tri.eigenvectors();
    const double res_low = beta(j) * std::abs(s(k - 1, 0));
    const double res_high = beta(j) * std::abs(s(k - 1, k - 1));
    const bool exhausted = k == d || beta(j) <= breakdown;
    if ((res_low <= target && res_high <= target) || exhausted) {
      const Eigen::Index pick = std::abs(theta(0)) > std::abs(theta(k - 1)) ? 0 : k - 1;
      const Eigen::VectorXd v = basis.leftCols(k) * s.col(pick);
      out.converged = true;
      out.result.value = std::abs(theta(pick));
      out.result.method = OpNormMethod::eigen_iterative;
      out.result.iterations = static_cast<int>(k);
      out.result.residual = (a * v - theta(pick) * v).norm();
      return out;
    }
    if (j + 1 < steps) basis.col(j + 1) = w / beta(j);
    out.result.iterations = static_cast<int>(k);
  }
  return out;
}

OpNormResult euclidean_norm(const Eigen::MatrixXd& a, const OpNormOptions& options) {
  const Eigen::Index d = a.rows();
  const OpNormMethod method = options.euclidean_method.value_or(
      d > kDenseEigenMaxDimension ? OpNormMethod::eigen_iterative : OpNormMethod::eigen_dense);
  if (method == OpNormMethod::eigen_dense) return dense_eigen(a);
  if (method != OpNormMethod::eigen_iterative) {
    throw ConfigError("euclidean operator norm supports eigen_dense or eigen_iterative only");
  }

  const double target = options.tol * a.norm();
  int total_iterations = 0;
  for (std::uint64_t attempt = 0; attempt < 2; ++attempt) {
    LanczosOutcome run =
        lanczos(a, target, rng::mix(options.seed, attempt), options.max_iterations);
    total_iterations += run.result.iterations;
    if (run.converged) {
      run.result.iterations = total_iterations;
      return run.result;
    }
  }
  OpNormResult fallback = dense_eigen(a);
  fallback.iterations = total_iterations;
  fallback.fell_back = true;
  return fallback;
}

OpNormResult sign_enumeration(const Eigen::MatrixXd& a) {
  const Eigen::Index d = a.rows();
  if (d > kMaxOneNormDimension) {
    throw UnsupportedSizeError("one_norm operator norm is exact sign enumeration, limited to d <= " +
                               std::to_string(kMaxOneNormDimension) + " (got d = " +
                               std::to_string(d) + ")");
  }
  OpNormResult result;
  result.method = OpNormMethod::sign_enumeration;
  // u(0) stays +1: u and -u give the same ||Au||_1.
  Eigen::VectorXd u = Eigen::VectorXd::Ones(d);
  Eigen::VectorXd y = a * u;
  double best = y.cwiseAbs().sum();
  const std::uint64_t count = std::uint64_t{1} << (d - 1);
  for (std::uint64_t g = 1; g < count; ++g) {
    const int flip = std::countr_zero(g) + 1;
    y -= (2.0 * u(flip)) * a.col(flip);
    u(flip) = -u(flip);
    if ((g & 0xFFFu) == 0) y = a * u;  // bound accumulated round-off
    best = std::max(best, y.cwiseAbs().sum());
  }
  result.value = best;
  result.iterations = static_cast<int>(std::min<std::uint64_t>(
      count, static_cast<std::uint64_t>(std::numeric_limits<int>::max())));
  return result;
}

}  // namespace

std::string to_string(OpNormMethod method) {
  switch (method) {
    case OpNormMethod::eigen_iterative:
      return "eigen_iterative";
    case OpNormMethod::eigen_dense:
      return "eigen_dense";
    case OpNormMethod::max_entry:
      return "max_entry";
    case OpNormMethod::sign_enumeration:
      return "sign_enumeration";
  }
  return "unknown";
}

OpNormResult operator_norm(const Eigen::MatrixXd& a, NormGeometry geometry,
                           const OpNormOptions& options) {
  if (!(options.tol > 0.0)) throw ConfigError("operator_norm: tol must be positive");
  check_symmetric(a);
  if (a.size() == 0) return {};
  switch (geometry) {
    case NormGeometry::euclidean:
      if (a.isZero(0.0)) return OpNormResult{0.0, OpNormMethod::eigen_dense, 0, 0.0, false};
      return euclidean_norm(a, options);
    case NormGeometry::sup_norm: {
      OpNormResult result;
      result.value = a.cwiseAbs().maxCoeff();
      result.method = OpNormMethod::max_entry;
      return result;
    }
    case NormGeometry::one_norm:
      return sign_enumeration(a);
  }
  return {};
}

OpNormResult operator_norm(const Eigen::MatrixXd& a, NormGeometry geometry, double tol) {
  OpNormOptions options;
  options.tol = tol;
  return operator_norm(a, geometry, options);
}

double operator_norm_deviation(const SampleBatch& batch, const CovarianceModel& model,
                               const OpNormOptions& options) {
  if (batch.dimension() != model.dimension()) {
    throw ConfigError("operator_norm_deviation: batch dimension " +
                      std::to_string(batch.dimension()) + " != model dimension " +
                      std::to_string(model.dimension()));
  }
  Eigen::MatrixXd diff = sample_covariance(batch.data);
  diff -= model.covariance();
  return operator_norm(diff, model.geometry(), options).value;
}

double operator_norm_deviation(const SampleBatch& batch, const CovarianceModel& model,
                               double tol) {
  OpNormOptions options;
  options.tol = tol;
  return operator_norm_deviation(batch, model, options);
}

}  // namespace covbound
