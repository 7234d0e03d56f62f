#pragma once

#include <span>
#include <vector>

namespace covbound {

double mean(std::span<const double> xs);
/// Average of the two central order statistics when the size is even.
double median(std::span<const double> xs);
/// Order statistic at 1-based index ceil(p * size), no interpolation.
double order_quantile(std::span<const double> xs, double p);
/// Sample standard deviation over sqrt(size).
double std_error_of_mean(std::span<const double> xs);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares y = slope x + intercept. Needs two distinct x.
LinearFit least_squares(std::span<const double> x, std::span<const double> y);

enum class OrliczKind { psi1, psi2 };

/// inf{C > 0 : mean psi(|x_i| / C) <= 1} for the empirical distribution of
/// `samples`, by bisection over [max|x|/50, 50 max|x|]. Zero for all-zero input.
double empirical_orlicz_norm(std::span<const double> samples, OrliczKind kind);

}  // namespace covbound
