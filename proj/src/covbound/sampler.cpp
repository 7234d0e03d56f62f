#include "covbound/sampler.hpp"

#include "covbound/errors.hpp"
#include "covbound/rng.hpp"

namespace covbound {

namespace {

void check_n(Eigen::Index n) {
  if (n < 1) throw ConfigError("sample size n must be >= 1");
}

SampleBatch make_batch(Eigen::MatrixXd data, const CovarianceModel& model, SamplerKind kind,
                       std::uint64_t seed, std::uint64_t replicate) {
  SampleBatch batch;
  batch.data = std::move(data);
  batch.model_label = model.label();
  batch.sampler_kind = kind;
  batch.seed = seed;
  batch.replicate = replicate;
  return batch;
}

}  // namespace

std::string to_string(SamplerKind kind) {
  return kind == SamplerKind::gaussian ? "gaussian" : "rademacher_series";
}

SamplerKind parse_sampler_kind(std::string_view name) {
  if (name == "gaussian") return SamplerKind::gaussian;
  if (name == "rademacher_series" || name == "rademacher") return SamplerKind::rademacher_series;
  throw ConfigError("unknown sampler kind '" + std::string(name) +
                    "' (expected gaussian or rademacher_series)");
}

SampleBatch sample_gaussian(const CovarianceModel& model, Eigen::Index n, std::uint64_t seed,
                            std::uint64_t replicate) {
  check_n(n);
  const Eigen::Index m = model.factor_count();
  Eigen::MatrixXd coeffs(n, m);
  for (Eigen::Index j = 0; j < n; ++j) {
    rng::NormalStream stream(rng::derive(seed, replicate, static_cast<std::uint64_t>(j)));
    for (Eigen::Index k = 0; k < m; ++k) coeffs(j, k) = stream();
  }
  Eigen::MatrixXd data = m > 0 ? Eigen::MatrixXd(coeffs * model.factors())
                               : Eigen::MatrixXd::Zero(n, model.dimension());
  return make_batch(std::move(data), model, SamplerKind::gaussian, seed, replicate);
}

SampleBatch sample_rademacher_series(const CovarianceModel& model, Eigen::Index n,
                                     std::uint64_t seed, std::uint64_t replicate) {
  check_n(n);
  const Eigen::Index m = model.factor_count();
  Eigen::MatrixXd signs(n, m);
  for (Eigen::Index j = 0; j < n; ++j) {
    rng::Xoshiro256 gen(rng::derive(seed, replicate, static_cast<std::uint64_t>(j)));
    std::uint64_t bits = 0;
    for (Eigen::Index k = 0; k < m; ++k) {
      if (k % 64 == 0) bits = gen();
      signs(j, k) = (bits & 1ULL) ? 1.0 : -1.0;
      bits >>= 1;
    }
  }
  Eigen::MatrixXd data = m > 0 ? Eigen::MatrixXd(signs * model.factors())
                               : Eigen::MatrixXd::Zero(n, model.dimension());
  return make_batch(std::move(data), model, SamplerKind::rademacher_series, seed, replicate);
}

SampleBatch sample(SamplerKind kind, const CovarianceModel& model, Eigen::Index n,
                   std::uint64_t seed, std::uint64_t replicate) {
  return kind == SamplerKind::gaussian ? sample_gaussian(model, n, seed, replicate)
                                       : sample_rademacher_series(model, n, seed, replicate);
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& data) {
  const Eigen::Index d = data.cols();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  if (data.rows() == 0) return cov;
  cov.selfadjointView<Eigen::Lower>().rankUpdate(data.transpose(),
                                                 1.0 / static_cast<double>(data.rows()));
  Eigen::MatrixXd full = cov.selfadjointView<Eigen::Lower>();
  cov = std::move(full);
  return cov;
}

}  // namespace covbound
