#pragma once

// Covariance models. A model is a finite list of factor vectors x_k in R^d;
// the induced covariance is Sigma = sum_k x_k x_k^T and a centered Gaussian with
// that covariance is X = sum_k Z_k x_k with i.i.d. standard normal Z_k.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include <Eigen/Core>

#include "covbound/geometry.hpp"

namespace covbound {

namespace spectrum {
struct Identity {
  int dimension;
};
/// k leading eigenvalues equal to 1 + strength, the remaining d - k equal to 1.
struct Spiked {
  int dimension;
  int spikes;
  double strength;
};
/// lambda_k = k^(-alpha), k = 1..d.
struct PolyDecay {
  int dimension;
  double alpha;
};
/// lambda_k = exp(-beta (k - 1)), k = 1..d.
struct ExpDecay {
  int dimension;
  double beta;
};
/// k unit eigenvalues, the rest zero.
struct LowRank {
  int dimension;
  int rank;
};
struct Explicit {
  Eigen::MatrixXd matrix;
};
}  // namespace spectrum

using SpectrumSpec = std::variant<spectrum::Identity, spectrum::Spiked, spectrum::PolyDecay,
                                  spectrum::ExpDecay, spectrum::LowRank, spectrum::Explicit>;

/// Relative PSD tolerance for explicit matrices (fraction of max |eigenvalue|).
inline constexpr double kPsdTolerance = 1e-10;

class CovarianceModel {
 public:
  /// Builds a model directly from factor rows (m x d). The spectrum is
  /// recomputed from the factor Gram matrix.
  static CovarianceModel from_factors(Eigen::MatrixXd factors, NormGeometry geometry,
                                      std::string label);

  int dimension() const { return static_cast<int>(factors_.cols()); }
  int factor_count() const { return static_cast<int>(factors_.rows()); }
  /// Factor vectors, one per row.
  const Eigen::MatrixXd& factors() const { return factors_; }
  /// Nonzero spectrum of Sigma, descending.
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  NormGeometry geometry() const { return geometry_; }
  const std::string& label() const { return label_; }
  const std::optional<SpectrumSpec>& spec() const { return spec_; }
  std::optional<int> truncation() const { return truncation_; }

  const Eigen::MatrixXd& covariance() const { return covariance_; }
  double trace() const;
  /// Scale applied on top of the spectrum spec by scaled(); 1 otherwise.
  double scale() const { return scale_; }
  bool is_zero() const { return eigenvalues_.size() == 0 || eigenvalues_(0) <= 0.0; }

  /// Model for c * Sigma (factors scaled by sqrt(c)); c >= 0.
  CovarianceModel scaled(double c) const;
  /// Same factors, different ambient norm.
  CovarianceModel with_geometry(NormGeometry geometry) const;
  CovarianceModel with_label(std::string label) const;

 private:
  friend CovarianceModel build_model(const SpectrumSpec&, NormGeometry, std::optional<int>,
                                     std::string);
  CovarianceModel() = default;
  void finalize();

  Eigen::MatrixXd factors_;
  Eigen::MatrixXd covariance_;
  Eigen::VectorXd eigenvalues_;
  NormGeometry geometry_ = NormGeometry::euclidean;
  std::string label_;
  std::optional<SpectrumSpec> spec_;
  std::optional<int> truncation_;
  double scale_ = 1.0;
};

/// Builds a model from a spectrum family. Factors are sqrt(lambda_k) v_k in
/// descending order of lambda_k; `truncation` keeps the leading m factors.
/// An empty label is replaced by a canonical description of the spectrum.
CovarianceModel build_model(const SpectrumSpec& spec, NormGeometry geometry,
                            std::optional<int> truncation = std::nullopt,
                            std::string label = {});

std::string describe(const SpectrumSpec& spec);

struct EffectiveRankResult {
  double r = 0.0;        ///< (E||X||)^2 / ||Sigma||
  double r_tilde = 0.0;  ///< E||X||^2 / ||Sigma||; tr(Sigma)/||Sigma|| when euclidean
  double op_norm = 0.0;
  double e_norm_x = 0.0;
  double e_norm_x_sq = 0.0;
  /// Standard error of the E||X|| estimate; zero on closed-form paths.
  double mc_std_error = 0.0;
  bool closed_form = false;
};

inline constexpr std::size_t kDefaultRankBudget = 100000;

/// Effective rank of a model. Closed forms cover d = 1, rank one, and the
/// euclidean case with a flat nonzero spectrum (chi mean). Everything else is
/// Monte Carlo over `mc_budget` draws keyed by `seed`.
EffectiveRankResult effective_rank(const CovarianceModel& model,
                                   std::size_t mc_budget = kDefaultRankBudget,
                                   std::uint64_t seed = 0);

/// E of a chi variable with k degrees of freedom.
double chi_mean(int k);

}  // namespace covbound
