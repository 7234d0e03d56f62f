#include "covbound/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "covbound/errors.hpp"
#include "covbound/parallel.hpp"
#include "covbound/rng.hpp"

namespace covbound {

namespace {

constexpr std::uint64_t kRankStreamTag = 0x7261'6e6b;  // "rank"

std::uint64_t rank_seed(std::uint64_t seed) { return rng::mix(seed, kRankStreamTag); }

std::vector<double> resolve_quantile_levels(std::vector<double> requested, std::size_t replicates) {
  const auto r = static_cast<double>(replicates);
  if (requested.empty()) {
    for (double t : kDefaultTGrid) {
      if (r >= replicates_needed_for(t)) requested.push_back(t);
    }
    return requested;
  }
  for (double t : requested) {
    if (!(t > 0.0)) throw ConfigError("quantile level t must be positive");
    if (r < replicates_needed_for(t)) {
      throw ConfigError("quantile level t = " + std::to_string(t) + " needs R >= " +
                        std::to_string(static_cast<long long>(std::ceil(replicates_needed_for(t)))) +
                        " replicates (got " + std::to_string(replicates) + ")");
    }
  }
  std::sort(requested.begin(), requested.end());
  requested.erase(std::unique(requested.begin(), requested.end()), requested.end());
  return requested;
}

FitRegime fit_regime_for(double r, double n) {
  return r <= n ? FitRegime::r_le_n : FitRegime::r_ge_n;
}

}  // namespace

double replicates_needed_for(double t) { return 30.0 * std::exp(t); }

DeviationStats summarize(std::vector<double> replicates, std::vector<double> quantile_t) {
  if (replicates.empty()) throw ConfigError("summarize: no replicates");
  DeviationStats stats;
  const auto levels = resolve_quantile_levels(std::move(quantile_t), replicates.size());
  stats.mean = mean(replicates);
  stats.median = median(replicates);
  const auto [lo, hi] = std::minmax_element(replicates.begin(), replicates.end());
  stats.min = *lo;
  stats.max = *hi;
  stats.mc_std_error_mean = std_error_of_mean(replicates);
  for (double t : levels) stats.quantiles[t] = order_quantile(replicates, 1.0 - std::exp(-t));
  stats.replicates = std::move(replicates);
  return stats;
}

DeviationStats run_deviation_mc(const CovarianceModel& model, const McConfig& config) {
  if (config.n < 1) throw ConfigError("run_deviation_mc: n must be >= 1");
  if (config.replicates < 100) {
    throw ConfigError("run_deviation_mc: need R >= 100 replicates (got " +
                      std::to_string(config.replicates) + ")");
  }
  const auto levels = resolve_quantile_levels(config.quantile_t, config.replicates);

  std::vector<double> values(config.replicates);
  parallel_for(config.replicates, config.workers, [&](std::size_t i) {
    const auto replicate = static_cast<std::uint64_t>(i);
    const SampleBatch batch = sample(config.kind, model, config.n, config.seed, replicate);
    OpNormOptions options;
    options.tol = config.tol;
    options.seed = rng::mix(config.seed, replicate);
    values[i] = operator_norm_deviation(batch, model, options);
  });

  DeviationStats stats = summarize(std::move(values), levels);
  stats.model_label = model.label();
  stats.n = config.n;
  stats.seed = config.seed;
  stats.kind = config.kind;
  return stats;
}

std::string to_string(FitRegime regime) {
  return regime == FitRegime::r_le_n ? "r_le_n" : "r_ge_n";
}

std::optional<ScalingFit> fit_scaling(const std::vector<ScalingPoint>& points, FitRegime regime,
                                      std::string* diagnostic) {
  auto skip = [&](const std::string& why) -> std::optional<ScalingFit> {
    if (diagnostic) *diagnostic = "fit " + to_string(regime) + " skipped: " + why;
    return std::nullopt;
  };
  if (points.size() < 4) {
    return skip("need at least 4 grid points, have " + std::to_string(points.size()));
  }
  std::vector<double> x, y;
  for (const auto& p : points) {
    x.push_back(p.log_ratio);
    y.push_back(p.log_deviation);
  }
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  if (*lo == *hi) return skip("all grid points share one value of r/n");

  const LinearFit lin = least_squares(x, y);
  ScalingFit fit;
  fit.regime = regime;
  fit.slope = lin.slope;
  fit.intercept = lin.intercept;
  fit.r_squared = lin.r_squared;
  fit.points = points;
  return fit;
}

ScalingReport verify_expectation_scaling(const std::vector<GridEntry>& grid,
                                         const ScalingOptions& options) {
  ScalingReport report;
  std::vector<ScalingPoint> small, large;
  std::uint64_t point_index = 0;
  for (std::size_t e = 0; e < grid.size(); ++e) {
    const auto& entry = grid[e];
    const EffectiveRankResult er =
        effective_rank(entry.model, options.rank_budget, rank_seed(rng::mix(options.seed, e)));
    for (Eigen::Index n : entry.n_values) {
      McConfig mc;
      mc.n = n;
      mc.replicates = options.replicates;
      mc.seed = rng::mix(options.seed, 0x1000 + point_index++);
      mc.kind = options.kind;
      mc.workers = options.workers;

      GridPointResult point;
      point.model_label = entry.model.label();
      point.n = n;
      point.r = er.r;
      point.op_norm = er.op_norm;
      point.ratio_r_n = er.r / static_cast<double>(n);
      point.stats = run_deviation_mc(entry.model, mc);
      const double scale = er.op_norm * std::max(std::sqrt(point.ratio_r_n), point.ratio_r_n);
      point.normalized_mean = point.stats.mean / scale;

      const ScalingPoint sp{std::log(point.ratio_r_n), std::log(point.stats.mean / er.op_norm)};
      if (point.ratio_r_n <= kSmallRatioWindow) small.push_back(sp);
      if (point.ratio_r_n >= kLargeRatioWindow) large.push_back(sp);
      report.points.push_back(std::move(point));
    }
  }
  if (report.points.empty()) throw ConfigError("verify_expectation_scaling: empty model grid");

  std::string diag;
  report.small_r = fit_scaling(small, FitRegime::r_le_n, &diag);
  if (!report.small_r) report.diagnostics.push_back(diag);
  report.large_r = fit_scaling(large, FitRegime::r_ge_n, &diag);
  if (!report.large_r) report.diagnostics.push_back(diag);

  report.ratio_min = report.ratio_max = report.points.front().normalized_mean;
  for (const auto& p : report.points) {
    report.ratio_min = std::min(report.ratio_min, p.normalized_mean);
    report.ratio_max = std::max(report.ratio_max, p.normalized_mean);
  }
  return report;
}

LowerBoundCheck verify_lower_bound_large_r(const CovarianceModel& model, Eigen::Index n,
                                           std::size_t replicates, std::uint64_t seed,
                                           unsigned workers) {
  LowerBoundCheck check;
  EffectiveRankResult er;
  try {
    er = effective_rank(model, kDefaultRankBudget, rank_seed(seed));
  } catch (const UndefinedRankError& e) {
    check.reason = e.what();
    return check;
  }
  check.r = er.r;
  const auto nd = static_cast<double>(n);
  if (er.r < 2.0 * nd) {
    check.reason = "requires r >= 2n (r = " + std::to_string(er.r) + ", n = " +
                   std::to_string(n) + ")";
    return check;
  }
  McConfig mc;
  mc.n = n;
  mc.replicates = replicates;
  mc.seed = seed;
  mc.workers = workers;
  const DeviationStats stats = run_deviation_mc(model, mc);
  check.applicable = true;
  check.mean = stats.mean;
  check.std_error = stats.mc_std_error_mean;
  check.threshold = 0.5 * er.op_norm * er.r / nd;
  check.margin = check.mean + 3.0 * check.std_error - check.threshold;
  check.holds = check.margin >= 0.0;
  return check;
}

std::string to_string(Centering centering) {
  return centering == Centering::median ? "median" : "mean";
}

Centering parse_centering(std::string_view name) {
  if (name == "median") return Centering::median;
  if (name == "mean") return Centering::mean;
  throw ConfigError("unknown centering '" + std::string(name) + "' (expected median or mean)");
}

double concentration_radius(double op_norm, double r, double n, double t) {
  if (r <= n) return op_norm * std::max(std::sqrt(t / n), t / n);
  return op_norm * std::max(std::sqrt(r / n) * std::sqrt(t / n), t / n);
}

ConcentrationFit fit_concentration_from(const std::vector<double>& replicates, double op_norm,
                                        double r, Eigen::Index n, const std::vector<double>& t_grid,
                                        Centering centering) {
  if (replicates.empty()) throw ConfigError("fit_concentration: no replicates");
  if (t_grid.empty()) throw ConfigError("fit_concentration: empty t grid");
  const auto nd = static_cast<double>(n);
  ConcentrationFit fit;
  fit.centering = centering;
  fit.regime = fit_regime_for(r, nd);
  fit.t_grid = t_grid;
  fit.replicates = replicates.size();
  fit.center = centering == Centering::median ? median(replicates) : mean(replicates);

  std::vector<double> spread(replicates.size());
  std::transform(replicates.begin(), replicates.end(), spread.begin(),
                 [&](double v) { return std::abs(v - fit.center); });
  std::vector<double> descending = spread;
  std::sort(descending.begin(), descending.end(), std::greater<>());

  auto exceed = [&](double limit) {
    return static_cast<std::size_t>(std::count_if(spread.begin(), spread.end(),
                                                  [limit](double s) { return s > limit; }));
  };
  const auto max_steps = static_cast<long long>(std::llround(kConstantGridMax / kConstantGridStep));
  long long steps = 1;
  for (double t : t_grid) {
    const double radius = concentration_radius(op_norm, r, nd, t);
    fit.radius[t] = radius;
    const auto allowed =
        static_cast<std::size_t>(std::floor(std::exp(-t) * static_cast<double>(spread.size())));
    const double must_cover = allowed < descending.size() ? descending[allowed] : 0.0;
    long long k = 1;
    if (radius > 0.0) {
      k = std::max<long long>(1, static_cast<long long>(std::ceil(must_cover / radius /
                                                                   kConstantGridStep)) - 1);
    } else if (must_cover > 0.0) {
      throw NumericalError("fit_concentration: zero radius with nonzero spread");
    }
    while (k <= max_steps && exceed(static_cast<double>(k) * kConstantGridStep * radius) > allowed) {
      ++k;
    }
    if (k > max_steps) {
      throw NumericalError("fit_concentration: no constant <= " + std::to_string(kConstantGridMax) +
                           " on the grid satisfies t = " + std::to_string(t));
    }
    steps = std::max(steps, k);
  }
  fit.fitted_constant = static_cast<double>(steps) * kConstantGridStep;
  const auto count = static_cast<double>(spread.size());
  for (double t : t_grid) {
    fit.exceedance_rates[t] =
        static_cast<double>(exceed(fit.fitted_constant * fit.radius[t])) / count;
  }
  return fit;
}

ConcentrationFit fit_concentration(const CovarianceModel& model, Eigen::Index n,
                                   std::size_t replicates, std::uint64_t seed,
                                   const ConcentrationOptions& options) {
  if (options.t_grid.empty()) throw ConfigError("fit_concentration: empty t grid");
  const double t_max = *std::max_element(options.t_grid.begin(), options.t_grid.end());
  for (double t : options.t_grid) {
    if (t < 1.0) throw ConfigError("fit_concentration: t grid values must be >= 1");
    if (t > 6.0 && !options.allow_large_t) {
      throw ConfigError("fit_concentration: t > 6 is opt-in (allow_large_t)");
    }
  }
  const auto r_count = static_cast<double>(replicates);
  if (r_count < replicates_needed_for(t_max)) {
    throw ConfigError("fit_concentration: t_max = " + std::to_string(t_max) + " requires R >= " +
                      std::to_string(static_cast<long long>(std::ceil(replicates_needed_for(t_max)))) +
                      " (got " + std::to_string(replicates) + ")");
  }
  if (t_max > 6.0 && r_count <= 1e4 * std::exp(2.0)) {
    throw ConfigError("fit_concentration: t > 6 requires R > 1e4 e^2");
  }

  double op_norm = 0.0;
  double r = 0.0;
  if (!model.is_zero()) {
    const EffectiveRankResult er = effective_rank(model, options.rank_budget, rank_seed(seed));
    op_norm = er.op_norm;
    r = er.r;
  }
  McConfig mc;
  mc.n = n;
  mc.replicates = replicates;
  mc.seed = seed;
  mc.kind = options.kind;
  mc.workers = options.workers;
  const DeviationStats stats = run_deviation_mc(model, mc);
  return fit_concentration_from(stats.replicates, op_norm, r, n, options.t_grid, options.centering);
}

GapResult median_mean_gap(const DeviationStats& stats, double op_norm, double r) {
  if (stats.n < 1) throw ConfigError("median_mean_gap: stats carry no sample size");
  const auto nd = static_cast<double>(stats.n);
  GapResult out;
  out.gap = std::abs(stats.mean - stats.median);
  out.regime = fit_regime_for(r, nd);
  out.radius = op_norm / std::sqrt(nd);
  if (out.regime == FitRegime::r_ge_n) out.radius *= std::sqrt(r / nd);
  return out;
}

GapResult median_mean_gap(const DeviationStats& stats, const CovarianceModel& model,
                          std::size_t rank_budget) {
  if (model.is_zero()) return median_mean_gap(stats, 0.0, 0.0);
  const EffectiveRankResult er = effective_rank(model, rank_budget, rank_seed(stats.seed));
  return median_mean_gap(stats, er.op_norm, er.r);
}

double lp_moment(const DeviationStats& stats, double p) {
  if (!(p >= 1.0)) throw ConfigError("lp_moment: p must be >= 1");
  if (stats.replicates.empty()) throw ConfigError("lp_moment: no replicates");
  if (p == 1.0) return stats.mean;
  double sum = 0.0;
  for (double v : stats.replicates) sum += std::pow(v, p);
  return std::pow(sum / static_cast<double>(stats.replicates.size()), 1.0 / p);
}

double lp_moment(const CovarianceModel& model, Eigen::Index n, std::size_t replicates, double p,
                 std::uint64_t seed, unsigned workers) {
  if (replicates < 1000) throw ConfigError("lp_moment: need R >= 1000 replicates");
  if (!(p >= 1.0) || p > 8.0) throw ConfigError("lp_moment: p must be in [1, 8]");
  McConfig mc;
  mc.n = n;
  mc.replicates = replicates;
  mc.seed = seed;
  mc.workers = workers;
  return lp_moment(run_deviation_mc(model, mc), p);
}

}  // namespace covbound
