#include "covbound/covmodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "covbound/errors.hpp"
#include "covbound/opnorm.hpp"
#include "covbound/sampler.hpp"

namespace covbound {

namespace {

std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

// Eigenpairs for the built-in spectra: standard basis vectors, descending values.
struct Eigenpairs {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // d x m, column k pairs with values(k)
};

Eigenpairs diagonal(int d, Eigen::VectorXd values) {
  Eigenpairs out;
  out.vectors = Eigen::MatrixXd::Identity(d, values.size());
  out.values = std::move(values);
  return out;
}

Eigenpairs eigenpairs_of(const SpectrumSpec& spec) {
  using namespace spectrum;
  if (const auto* s = std::get_if<Identity>(&spec)) {
    require(s->dimension >= 1, "identity: dimension must be >= 1");
    return diagonal(s->dimension, Eigen::VectorXd::Ones(s->dimension));
  }
  if (const auto* s = std::get_if<Spiked>(&spec)) {
    require(s->dimension >= 1, "spiked: dimension must be >= 1");
    require(s->spikes >= 0 && s->spikes <= s->dimension, "spiked: spike count must be in [0, d]");
    require(s->strength > 0.0, "spiked: strength must be > 0");
    Eigen::VectorXd v = Eigen::VectorXd::Ones(s->dimension);
    v.head(s->spikes).array() += s->strength;
    return diagonal(s->dimension, std::move(v));
  }
  if (const auto* s = std::get_if<PolyDecay>(&spec)) {
    require(s->dimension >= 1, "poly_decay: dimension must be >= 1");
    require(s->alpha > 0.0, "poly_decay: alpha must be > 0");
    Eigen::VectorXd v(s->dimension);
    for (int k = 0; k < s->dimension; ++k) v(k) = std::pow(static_cast<double>(k + 1), -s->alpha);
    return diagonal(s->dimension, std::move(v));
  }
  if (const auto* s = std::get_if<ExpDecay>(&spec)) {
    require(s->dimension >= 1, "exp_decay: dimension must be >= 1");
    require(s->beta > 0.0, "exp_decay: beta must be > 0");
    Eigen::VectorXd v(s->dimension);
    for (int k = 0; k < s->dimension; ++k) v(k) = std::exp(-s->beta * k);
    return diagonal(s->dimension, std::move(v));
  }
  if (const auto* s = std::get_if<LowRank>(&spec)) {
    require(s->dimension >= 1, "low_rank: dimension must be >= 1");
    require(s->rank >= 0 && s->rank <= s->dimension, "low_rank: rank must be in [0, d]");
    return diagonal(s->dimension, Eigen::VectorXd::Ones(s->rank));
  }

  const auto& m = std::get<Explicit>(spec).matrix;
  require(m.rows() >= 1 && m.rows() == m.cols(), "explicit: matrix must be square and non-empty");
  const double scale = m.cwiseAbs().maxCoeff();
  if (scale > 0.0) {
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    require(asym <= kPsdTolerance * scale, "explicit: matrix is not symmetric");
  }
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success) throw NumericalError("explicit: eigensolve failed");
  const Eigen::VectorXd& values = solver.eigenvalues();  // ascending
  const double largest = values.cwiseAbs().maxCoeff();
  const double floor = kPsdTolerance * largest;
  if (values(0) < -floor) {
    throw NotPositiveSemidefiniteError(
        "explicit: matrix is not positive semidefinite (most negative eigenvalue " +
            fmt_double(values(0)) + ")",
        values(0));
  }
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = values.size() - 1; i >= 0; --i) {
    if (values(i) > floor) keep.push_back(i);
  }
  Eigenpairs out;
  out.values.resize(static_cast<Eigen::Index>(keep.size()));
  out.vectors.resize(m.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const auto idx = static_cast<Eigen::Index>(k);
    out.values(idx) = values(keep[k]);
    out.vectors.col(idx) = solver.eigenvectors().col(keep[k]);
  }
  return out;
}

int dimension_of(const SpectrumSpec& spec) {
  return std::visit(
      [](const auto& s) -> int {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, spectrum::Explicit>) {
          return static_cast<int>(s.matrix.rows());
        } else {
          return s.dimension;
        }
      },
      spec);
}

Eigen::VectorXd gram_spectrum(const Eigen::MatrixXd& factors) {
  if (factors.rows() == 0) return Eigen::VectorXd();
  const Eigen::MatrixXd gram = factors * factors.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& ascending = solver.eigenvalues();
  const double largest = std::max(0.0, ascending(ascending.size() - 1));
  std::vector<double> kept;
  for (Eigen::Index i = ascending.size() - 1; i >= 0; --i) {
    if (ascending(i) > 1e-12 * largest && ascending(i) > 0.0) kept.push_back(ascending(i));
  }
  return Eigen::Map<Eigen::VectorXd>(kept.data(), static_cast<Eigen::Index>(kept.size()));
}

}  // namespace

std::string describe(const SpectrumSpec& spec) {
  using namespace spectrum;
  if (const auto* s = std::get_if<Identity>(&spec)) {
    return "identity(d=" + std::to_string(s->dimension) + ")";
  }
  if (const auto* s = std::get_if<Spiked>(&spec)) {
    return "spiked(d=" + std::to_string(s->dimension) + ",k=" + std::to_string(s->spikes) +
           ",strength=" + fmt_double(s->strength) + ")";
  }
  if (const auto* s = std::get_if<PolyDecay>(&spec)) {
    return "poly_decay(d=" + std::to_string(s->dimension) + ",alpha=" + fmt_double(s->alpha) + ")";
  }
  if (const auto* s = std::get_if<ExpDecay>(&spec)) {
    return "exp_decay(d=" + std::to_string(s->dimension) + ",beta=" + fmt_double(s->beta) + ")";
  }
  if (const auto* s = std::get_if<LowRank>(&spec)) {
    return "low_rank(d=" + std::to_string(s->dimension) + ",k=" + std::to_string(s->rank) + ")";
  }
  return "explicit(d=" + std::to_string(std::get<Explicit>(spec).matrix.rows()) + ")";
}

void CovarianceModel::finalize() {
  const Eigen::Index d = factors_.cols();
  covariance_ = Eigen::MatrixXd::Zero(d, d);
  if (factors_.rows() > 0) {
    covariance_.selfadjointView<Eigen::Lower>().rankUpdate(factors_.transpose());
    Eigen::MatrixXd full = covariance_.selfadjointView<Eigen::Lower>();
    covariance_ = std::move(full);
  }
}

CovarianceModel CovarianceModel::from_factors(Eigen::MatrixXd factors, NormGeometry geometry,
                                              std::string label) {
  require(factors.cols() >= 1, "from_factors: dimension must be >= 1");
  require(factors.allFinite(), "from_factors: factors must be finite");
  CovarianceModel model;
  model.eigenvalues_ = gram_spectrum(factors);
  model.factors_ = std::move(factors);
  model.geometry_ = geometry;
  model.label_ = label.empty() ? "factors(d=" + std::to_string(model.factors_.cols()) +
                                     ",m=" + std::to_string(model.factors_.rows()) + ")"
                               : std::move(label);
  model.finalize();
  return model;
}

CovarianceModel build_model(const SpectrumSpec& spec, NormGeometry geometry,
                            std::optional<int> truncation, std::string label) {
  Eigenpairs pairs = eigenpairs_of(spec);
  Eigen::Index m = pairs.values.size();
  if (truncation) {
    require(*truncation >= 0, "truncation must be >= 0");
    m = std::min<Eigen::Index>(m, *truncation);
  }
  CovarianceModel model;
  model.eigenvalues_ = pairs.values.head(m);
  model.factors_.resize(m, dimension_of(spec));
  for (Eigen::Index k = 0; k < m; ++k) {
    model.factors_.row(k) = std::sqrt(pairs.values(k)) * pairs.vectors.col(k).transpose();
  }
  model.geometry_ = geometry;
  model.spec_ = spec;
  model.truncation_ = truncation;
  if (label.empty()) {
    label = describe(spec);
    if (m < pairs.values.size()) label += "[m=" + std::to_string(m) + "]";
  }
  model.label_ = std::move(label);
  model.finalize();
  return model;
}

double CovarianceModel::trace() const { return factors_.squaredNorm(); }

CovarianceModel CovarianceModel::scaled(double c) const {
  require(c >= 0.0 && std::isfinite(c), "scaled: factor must be finite and >= 0");
  CovarianceModel out = *this;
  out.factors_ *= std::sqrt(c);
  out.eigenvalues_ *= c;
  out.scale_ *= c;
  if (c == 0.0) out.eigenvalues_.resize(0);
  out.finalize();
  return out;
}

CovarianceModel CovarianceModel::with_geometry(NormGeometry geometry) const {
  CovarianceModel out = *this;
  out.geometry_ = geometry;
  return out;
}

CovarianceModel CovarianceModel::with_label(std::string label) const {
  CovarianceModel out = *this;
  out.label_ = std::move(label);
  return out;
}

double chi_mean(int k) {
  if (k <= 0) return 0.0;
  return std::numbers::sqrt2 * std::exp(std::lgamma(0.5 * (k + 1)) - std::lgamma(0.5 * k));
}

EffectiveRankResult effective_rank(const CovarianceModel& model, std::size_t mc_budget,
                                   std::uint64_t seed) {
  if (model.is_zero()) {
    throw UndefinedRankError("effective rank is undefined for the zero covariance operator");
  }
  EffectiveRankResult out;
  out.op_norm = operator_norm(model.covariance(), model.geometry()).value;
  if (!(out.op_norm > 0.0)) {
    throw UndefinedRankError("effective rank is undefined: ||Sigma|| = 0");
  }
  const NormGeometry geometry = model.geometry();
  const Eigen::VectorXd& spectrum = model.eigenvalues();

  // Rank one: X = g x, so ||X|| = |g| ||x|| in every geometry.
  if (spectrum.size() == 1 || model.dimension() == 1) {
    Eigen::VectorXd x;
    if (model.factor_count() == 1) {
      x = model.factors().row(0).transpose();
    } else {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(model.covariance());
      const Eigen::Index top = solver.eigenvalues().size() - 1;
      x = std::sqrt(std::max(0.0, solver.eigenvalues()(top))) * solver.eigenvectors().col(top);
    }
    const double norm_x = vector_norm(x, geometry);
    out.e_norm_x = std::sqrt(2.0 / std::numbers::pi) * norm_x;
    out.e_norm_x_sq = norm_x * norm_x;
    out.r = (2.0 / std::numbers::pi) * out.e_norm_x_sq / out.op_norm;
    out.r_tilde = out.e_norm_x_sq / out.op_norm;
    out.closed_form = true;
    return out;
  }

  if (geometry == NormGeometry::euclidean) {
    const double top = spectrum(0);
    const bool flat = (spectrum.array() - top).abs().maxCoeff() <= 1e-12 * top;
    out.e_norm_x_sq = model.trace();
    out.r_tilde = out.e_norm_x_sq / out.op_norm;
    if (flat) {
      out.e_norm_x = std::sqrt(top) * chi_mean(static_cast<int>(spectrum.size()));
      out.r = out.e_norm_x * out.e_norm_x / out.op_norm;
      out.closed_form = true;
      return out;
    }
  }

  if (mc_budget < 10000) {
    throw ConfigError("effective_rank: Monte Carlo budget must be >= 10000 (got " +
                      std::to_string(mc_budget) + ")");
  }
  constexpr std::size_t kChunk = 4096;
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t start = 0, chunk = 0; start < mc_budget; start += kChunk, ++chunk) {
    const auto rows = static_cast<Eigen::Index>(std::min(kChunk, mc_budget - start));
    const SampleBatch batch = sample_gaussian(model, rows, seed, chunk);
    for (Eigen::Index j = 0; j < rows; ++j) {
      const double norm = vector_norm(batch.data.row(j).transpose(), geometry);
      sum += norm;
      sum_sq += norm * norm;
    }
  }
  const double count = static_cast<double>(mc_budget);
  const double mean = sum / count;
  const double mean_sq = sum_sq / count;
  const double variance = std::max(0.0, (sum_sq - count * mean * mean) / (count - 1.0));
  out.e_norm_x = mean;
  out.mc_std_error = std::sqrt(variance / count);
  out.r = mean * mean / out.op_norm;
  if (geometry != NormGeometry::euclidean) {
    out.e_norm_x_sq = mean_sq;
    out.r_tilde = mean_sq / out.op_norm;
  }
  return out;
}

}  // namespace covbound
