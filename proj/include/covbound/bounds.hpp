#pragma once

// Closed-form evaluators for the expectation and concentration bounds on
// ||Sigma_hat - Sigma||. Every bound is "constant x shape"; the absolute
// constants are not known, so each evaluator takes one explicitly.
//
// Shorthand: a(t) = sqrt(t/n) v t/n,   rho(r) = sqrt(r/n) v r/n.
//
//   classical_thm21              C ||S|| (sqrt(d/n) v d/n v a(t))
//   lounici_logd                 C ||S|| max(sqrt(q/n), q log(n)/n),  q = r~ log d + t
//   rudelson                     C max(||S||^1/2 E^1/2 sqrt(log d/n), E log d/n),
//                                E = E max_j ||X_j||^2
//   expectation_upper_thm24      C ||S|| rho(r)
//   expectation_lower_thm24      C ||S|| rho(r)
//   concentration_thm25          C ||S|| a(t)                          if r <= n
//                                C ||S|| (sqrt(r/n) sqrt(t/n) v t/n)   if r >= n
//   concentration_implicit_thm26 C (||S|| a(t) v ||S||^1/2 M^1/2 sqrt(t/n))
//   corollary_21                 2M + C ||S|| a(t)
//   corollary_23                 C ||S|| (rho(r) v a(t))
//   crude_lemma34                C ||S|| (r a(t) + r + 1)
//   subgaussian_thm27            C ||S|| (rho(r) v a(t))
//   bernstein_psi1               C ||xi||_psi1 a(t)

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "covbound/geometry.hpp"
#include "covbound/sampler.hpp"

namespace covbound {

enum class BoundTheorem {
  classical_thm21,
  lounici_logd,
  rudelson,
  expectation_upper_thm24,
  expectation_lower_thm24,
  concentration_thm25,
  concentration_implicit_thm26,
  corollary_21,
  corollary_23,
  crude_lemma34,
  subgaussian_thm27,
  bernstein_psi1,
};

std::string to_string(BoundTheorem theorem);
/// Accepts the full enum name or its prefix before the trailing theorem tag
/// (e.g. "expectation_upper", "bernstein").
BoundTheorem parse_theorem(std::string_view name);
const std::vector<BoundTheorem>& all_theorems();
/// Input names required by a theorem, in evaluation order.
const std::vector<std::string>& required_inputs(BoundTheorem theorem);

enum class Regime { r_le_n, r_ge_n, not_applicable };
std::string to_string(Regime regime);

/// r <= n maps to r_le_n; at r = n both concentration branches coincide.
Regime regime_for(double r, double n);

struct BoundSpec {
  BoundTheorem theorem = BoundTheorem::expectation_upper_thm24;
  double constant = 1.0;
  std::map<std::string, double> inputs;
};

struct BoundReport {
  BoundSpec spec;
  double value = 0.0;
  Regime regime = Regime::not_applicable;
};

/// Literal formula value. Throws ConfigError naming the missing or invalid
/// input field.
BoundReport eval_bound(const BoundSpec& spec);

/// Unique fixed point of delta = A + B sqrt(delta): s^2 with
/// s = (B + sqrt(B^2 + 4A)) / 2. Returns 0 when A = B = 0.
double fixed_point_delta(double a, double b);

/// Plug-in version of the corollary_23 bound: Sigma_hat, ||Sigma_hat|| and
/// r_hat = (mean_j ||X_j||)^2 / ||Sigma_hat|| replace the population values.
struct ConfidenceReport {
  BoundReport report;
  double sigma_hat_norm = 0.0;
  double mean_norm = 0.0;
  double r_hat = 0.0;
};

ConfidenceReport confidence_bound(const SampleBatch& batch, double t, double calibrated_constant,
                                  NormGeometry geometry = NormGeometry::euclidean);
ConfidenceReport confidence_bound(const Eigen::MatrixXd& data, double t,
                                  double calibrated_constant,
                                  NormGeometry geometry = NormGeometry::euclidean);

/// Calibrated constants keyed by theorem name, with provenance comments.
/// Text form:
///   # experiment=<id>
///   # date=<YYYY-MM-DD>
///   # seed=<seed>
///   <key> = <value>
/// Keys are theorem names, optionally suffixed ".median" / ".mean" for the
/// two centerings of concentration_thm25.
struct ConstantsFile {
  std::map<std::string, std::string> provenance;
  std::map<std::string, double> constants;

  /// Constant for `theorem`; concentration_thm25 falls back to its ".median"
  /// entry. Returns nullopt when absent.
  std::optional<double> lookup(BoundTheorem theorem) const;
};

std::string format_constants(const ConstantsFile& file);
ConstantsFile parse_constants(std::string_view text);
ConstantsFile read_constants(const std::string& path);
void write_constants(const std::string& path, const ConstantsFile& file);

}  // namespace covbound
