#pragma once

// File formats.
//
// Matrix CSV: a `# d=<d>` header line, then d comma-separated rows.
// Batch CSV: `# model=`, `# seed=`, `# kind=`, `# replicate=`, `# n=`, `# d=`
//   header lines, then n rows of d values.
// Replicate CSV: provenance header lines, a `replicate,deviation` column
//   header, then one row per replicate.
// All numbers are written with 17 significant digits so they round-trip.

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "covbound/bounds.hpp"
#include "covbound/covmodel.hpp"
#include "covbound/experiments.hpp"
#include "covbound/sampler.hpp"

namespace covbound::io {

using Json = nlohmann::json;
using Headers = std::map<std::string, std::string>;

std::string format_number(double value);

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& matrix);
Eigen::MatrixXd read_matrix_csv(std::istream& in);
Eigen::MatrixXd read_matrix_csv_file(const std::string& path);

void write_batch_csv(std::ostream& out, const SampleBatch& batch, const Headers& extra = {});

struct CsvTable {
  Headers headers;
  Eigen::MatrixXd data;
};
/// Reads `#`-prefixed `key=value` header lines and a dense numeric body.
/// A non-numeric first body line is treated as a column header and skipped.
CsvTable read_csv_table(std::istream& in);
CsvTable read_csv_table_file(const std::string& path);

void write_replicates_csv(std::ostream& out, const std::vector<double>& replicates,
                          const Headers& headers);

struct ReplicateFile {
  Headers headers;
  std::vector<double> replicates;
};
ReplicateFile read_replicates_csv(std::istream& in);
ReplicateFile read_replicates_csv_file(const std::string& path);

/// Model spec as structured text:
///   {"spectrum": {"kind": "spiked", "d": 16, "k": 1, "strength": 2},
///    "geometry": "euclidean", "truncation": 8, "scale": 1, "label": "..."}
/// Kinds: identity(d), spiked(d, k, strength), poly_decay(d, alpha),
/// exp_decay(d, beta), low_rank(d, k), explicit(matrix | matrix_csv),
/// factors(factors). Unknown keys are rejected.
Json model_to_json(const CovarianceModel& model);
CovarianceModel model_from_json(const Json& spec, const std::string& base_dir = {});

Json effective_rank_to_json(const EffectiveRankResult& result);
Json stats_to_json(const DeviationStats& stats);
Json bound_report_to_json(const BoundReport& report);
Json scaling_fit_to_json(const std::optional<ScalingFit>& fit);
Json concentration_fit_to_json(const ConcentrationFit& fit);

/// 64-bit FNV-1a of a JSON document's compact dump, as 16 hex digits.
std::string config_hash(const Json& config);

}  // namespace covbound::io
