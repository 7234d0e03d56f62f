#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "covbound/covmodel.hpp"

namespace covbound {

enum class SamplerKind { gaussian, rademacher_series };

std::string to_string(SamplerKind kind);
SamplerKind parse_sampler_kind(std::string_view name);

/// n i.i.d. draws of a centered random vector, one per row of `data`.
struct SampleBatch {
  Eigen::MatrixXd data;  // n x d
  std::string model_label;
  SamplerKind sampler_kind = SamplerKind::gaussian;
  std::uint64_t seed = 0;
  std::uint64_t replicate = 0;

  Eigen::Index n() const { return data.rows(); }
  Eigen::Index dimension() const { return data.cols(); }
};

/// Rows are sum_k Z_kj x_k with Z_kj i.i.d. standard normal. Row j of
/// replicate `replicate` draws from the stream keyed by (seed, replicate, j).
SampleBatch sample_gaussian(const CovarianceModel& model, Eigen::Index n, std::uint64_t seed,
                            std::uint64_t replicate = 0);

/// Rows are sum_k eps_kj x_k with eps_kj uniform on {-1, +1}. Same covariance
/// as the Gaussian sampler, subgaussian and pregaussian by construction.
SampleBatch sample_rademacher_series(const CovarianceModel& model, Eigen::Index n,
                                     std::uint64_t seed, std::uint64_t replicate = 0);

SampleBatch sample(SamplerKind kind, const CovarianceModel& model, Eigen::Index n,
                   std::uint64_t seed, std::uint64_t replicate = 0);

/// Biased sample covariance (1/n) data^T data.
Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& data);

}  // namespace covbound
