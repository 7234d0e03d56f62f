#include "covbound/stats.hpp"

#include <algorithm>
#include <cmath>

#include "covbound/errors.hpp"

namespace covbound {

namespace {

void require_nonempty(std::span<const double> xs, const char* what) {
  if (xs.empty()) throw ConfigError(std::string(what) + ": empty input");
}

}  // namespace

double mean(std::span<const double> xs) {
  require_nonempty(xs, "mean");
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

double median(std::span<const double> xs) {
  require_nonempty(xs, "median");
  std::vector<double> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  return n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

double order_quantile(std::span<const double> xs, double p) {
  require_nonempty(xs, "order_quantile");
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("order_quantile: p must be in [0, 1]");
  std::vector<double> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  auto index = static_cast<std::size_t>(std::ceil(p * n));
  index = std::clamp<std::size_t>(index, 1, sorted.size());
  return sorted[index - 1];
}

double std_error_of_mean(std::span<const double> xs) {
  require_nonempty(xs, "std_error_of_mean");
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  const auto n = static_cast<double>(xs.size());
  return std::sqrt(ss / (n - 1.0) / n);
}

LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ConfigError("least_squares: x and y differ in length");
  if (x.size() < 2) throw ConfigError("least_squares: need at least two points");
  const double mx = mean(x);
  const double my = mean(y);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw ConfigError("least_squares: x values are all equal");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (fit.slope * x[i] + fit.intercept);
    ss_res += e * e;
  }
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  return fit;
}

double empirical_orlicz_norm(std::span<const double> samples, OrliczKind kind) {
  require_nonempty(samples, "empirical_orlicz_norm");
  double scale = 0.0;
  for (double s : samples) {
    if (!std::isfinite(s)) throw ConfigError("empirical_orlicz_norm: non-finite sample");
    scale = std::max(scale, std::abs(s));
  }
  if (scale == 0.0) return 0.0;

  // Work on |x| / max|x| in [0, 1]; the answer is scale * c.
  std::vector<double> a(samples.size());
  std::transform(samples.begin(), samples.end(), a.begin(),
                 [scale](double s) { return std::abs(s) / scale; });
  auto excess = [&](double c) {
    double sum = 0.0;
    for (double v : a) {
      const double u = v / c;
      sum += kind == OrliczKind::psi2 ? std::expm1(u * u) : std::expm1(u);
    }
    return sum / static_cast<double>(a.size());
  };

  double lo = 1.0 / 50.0;  // mean psi > 1 here
  double hi = 50.0;        // mean psi <= psi(1/50) < 1 here
  for (int iter = 0; iter < 200 && hi - lo > 1e-12 * hi; ++iter) {
    const double mid = std::sqrt(lo * hi);
    if (excess(mid) > 1.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return scale * hi;
}

}  // namespace covbound
