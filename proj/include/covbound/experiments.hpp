#pragma once

// Monte Carlo campaigns on ||Sigma_hat - Sigma||: deviation statistics,
// log-log scaling fits against r/n, concentration-constant fits, the
// median/mean gap, L_p moments and the large-r lower bound.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "covbound/bounds.hpp"
#include "covbound/covmodel.hpp"
#include "covbound/opnorm.hpp"
#include "covbound/sampler.hpp"
#include "covbound/stats.hpp"

namespace covbound {

inline constexpr int kSchemaVersion = 1;
inline const std::vector<double> kDefaultTGrid = {1.0, 2.0, 3.0, 4.0};

struct McConfig {
  Eigen::Index n = 1;
  std::size_t replicates = 100;
  std::uint64_t seed = 0;
  SamplerKind kind = SamplerKind::gaussian;
  /// Quantile levels t (quantile at 1 - e^-t). Empty selects the default grid
  /// filtered to levels the replicate count supports.
  std::vector<double> quantile_t;
  unsigned workers = 1;
  double tol = kDefaultOpNormTolerance;
};

struct DeviationStats {
  std::vector<double> replicates;
  double mean = 0.0;
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
  double mc_std_error_mean = 0.0;
  /// t -> (1 - e^-t)-quantile.
  std::map<double, double> quantiles;

  std::string model_label;
  Eigen::Index n = 0;
  std::uint64_t seed = 0;
  SamplerKind kind = SamplerKind::gaussian;
};

/// Replicates a required for quantile level t: 30 e^t.
double replicates_needed_for(double t);

/// R independent replicates; replicate i samples with key (seed, i).
DeviationStats run_deviation_mc(const CovarianceModel& model, const McConfig& config);

/// Rebuilds the summary from stored replicate values.
DeviationStats summarize(std::vector<double> replicates, std::vector<double> quantile_t = {});

// --- scaling -------------------------------------------------------------------

enum class FitRegime { r_le_n, r_ge_n };
std::string to_string(FitRegime regime);

inline constexpr double kSmallRatioWindow = 0.25;
inline constexpr double kLargeRatioWindow = 4.0;

struct ScalingPoint {
  double log_ratio = 0.0;      ///< log(r/n)
  double log_deviation = 0.0;  ///< log(mean deviation / ||Sigma||)
};

struct ScalingFit {
  FitRegime regime = FitRegime::r_le_n;
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::vector<ScalingPoint> points;
};

/// Least-squares fit of log deviation on log(r/n). Returns nullopt with a
/// diagnostic when there are fewer than 4 points or fewer than 2 distinct x.
std::optional<ScalingFit> fit_scaling(const std::vector<ScalingPoint>& points, FitRegime regime,
                                      std::string* diagnostic = nullptr);

struct GridEntry {
  CovarianceModel model;
  std::vector<Eigen::Index> n_values;
};

struct ScalingOptions {
  std::size_t replicates = 200;
  std::uint64_t seed = 0;
  SamplerKind kind = SamplerKind::gaussian;
  unsigned workers = 1;
  std::size_t rank_budget = kDefaultRankBudget;
};

struct GridPointResult {
  std::string model_label;
  Eigen::Index n = 0;
  double r = 0.0;
  double op_norm = 0.0;
  double ratio_r_n = 0.0;
  DeviationStats stats;
  /// mean / (||Sigma|| max(sqrt(r/n), r/n))
  double normalized_mean = 0.0;
};

struct ScalingReport {
  std::vector<GridPointResult> points;
  std::optional<ScalingFit> small_r;
  std::optional<ScalingFit> large_r;
  std::vector<std::string> diagnostics;
  double ratio_min = 0.0;
  double ratio_max = 0.0;
};

/// Runs every (model, n) pair, fits slopes on r/n <= 1/4 and r/n >= 4, and
/// reports the band of normalized means over all points.
ScalingReport verify_expectation_scaling(const std::vector<GridEntry>& grid,
                                         const ScalingOptions& options);

// --- lower bound ---------------------------------------------------------------

struct LowerBoundCheck {
  bool applicable = false;
  bool holds = false;
  double r = 0.0;
  double mean = 0.0;
  double std_error = 0.0;
  double threshold = 0.0;  ///< 0.5 ||Sigma|| r / n
  double margin = 0.0;     ///< mean + 3 se - threshold
  std::string reason;
};

/// For r >= 2n: mean deviation >= 0.5 ||Sigma|| r / n - 3 se.
LowerBoundCheck verify_lower_bound_large_r(const CovarianceModel& model, Eigen::Index n,
                                           std::size_t replicates, std::uint64_t seed,
                                           unsigned workers = 1);

// --- concentration -------------------------------------------------------------

enum class Centering { median, mean };
std::string to_string(Centering centering);
Centering parse_centering(std::string_view name);

inline constexpr double kConstantGridStep = 0.05;
inline constexpr double kConstantGridMax = 1000.0;

struct ConcentrationFit {
  Centering centering = Centering::median;
  FitRegime regime = FitRegime::r_le_n;
  double fitted_constant = 0.0;
  double center = 0.0;
  std::vector<double> t_grid;
  std::map<double, double> exceedance_rates;  ///< at the fitted constant
  std::map<double, double> radius;            ///< theorem radius per t, constant 1
  std::size_t replicates = 0;
};

struct ConcentrationOptions {
  std::vector<double> t_grid = kDefaultTGrid;
  Centering centering = Centering::median;
  SamplerKind kind = SamplerKind::gaussian;
  unsigned workers = 1;
  /// Levels above 6 need this and R > 1e4 e^2.
  bool allow_large_t = false;
  std::size_t rank_budget = kDefaultRankBudget;
};

/// Radius ||Sigma|| (sqrt(t/n) v t/n) for r <= n and
/// ||Sigma|| (sqrt(r/n) sqrt(t/n) v t/n) for r >= n.
double concentration_radius(double op_norm, double r, double n, double t);

/// Smallest C on the 0.05 grid with exceedance rate of |dev - center| over
/// C * radius(t) at most e^-t for every t.
ConcentrationFit fit_concentration(const CovarianceModel& model, Eigen::Index n,
                                   std::size_t replicates, std::uint64_t seed,
                                   const ConcentrationOptions& options = {});

/// Same fit from precomputed replicates and model quantities.
ConcentrationFit fit_concentration_from(const std::vector<double>& replicates, double op_norm,
                                        double r, Eigen::Index n, const std::vector<double>& t_grid,
                                        Centering centering);

// --- gap, moments --------------------------------------------------------------

struct GapResult {
  double gap = 0.0;     ///< |mean - median|
  double radius = 0.0;  ///< ||Sigma|| / sqrt(n), times sqrt(r/n) when r >= n
  FitRegime regime = FitRegime::r_le_n;
};

GapResult median_mean_gap(const DeviationStats& stats, const CovarianceModel& model,
                          std::size_t rank_budget = kDefaultRankBudget);
GapResult median_mean_gap(const DeviationStats& stats, double op_norm, double r);

/// (mean of replicate^p)^(1/p).
double lp_moment(const DeviationStats& stats, double p);
double lp_moment(const CovarianceModel& model, Eigen::Index n, std::size_t replicates, double p,
                 std::uint64_t seed, unsigned workers = 1);

}  // namespace covbound
