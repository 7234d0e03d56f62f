#include "covbound/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "covbound/errors.hpp"

namespace covbound::io {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  const auto e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

bool parse_row(const std::string& line, std::vector<double>& out) {
  out.clear();
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    cell = trim(cell);
    if (cell.empty()) return false;
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str() || *end != '\0') return false;
    out.push_back(v);
  }
  return !out.empty();
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  return in;
}

void write_row(std::ostream& out, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    if (j) out << ',';
    out << format_number(row(j));
  }
  out << '\n';
}

// --- JSON field access with key checking ---------------------------------------

class Section {
 public:
  Section(const Json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const std::string& key) const { return node_.contains(key); }

  const Json& at(const std::string& key) {
    seen_.insert(key);
    if (!node_.contains(key)) throw ConfigError(path_ + "." + key + ": missing required field");
    return node_.at(key);
  }

  double number(const std::string& key) {
    const Json& v = at(key);
    if (!v.is_number()) throw ConfigError(path_ + "." + key + ": expected a number");
    return v.get<double>();
  }

  int integer(const std::string& key) {
    const Json& v = at(key);
    if (!v.is_number_integer()) throw ConfigError(path_ + "." + key + ": expected an integer");
    return v.get<int>();
  }

  std::string text(const std::string& key) {
    const Json& v = at(key);
    if (!v.is_string()) throw ConfigError(path_ + "." + key + ": expected a string");
    return v.get<std::string>();
  }

  void reject_unknown() const {
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.count(key)) throw ConfigError(path_ + "." + key + ": unknown key");
    }
  }

  const std::string& path() const { return path_; }

 private:
  const Json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

Eigen::MatrixXd matrix_from_json(const Json& rows, const std::string& path) {
  if (!rows.is_array() || rows.empty()) throw ConfigError(path + ": expected a non-empty array");
  const auto r = static_cast<Eigen::Index>(rows.size());
  if (!rows[0].is_array() || rows[0].empty()) {
    throw ConfigError(path + ": expected an array of rows");
  }
  const auto c = static_cast<Eigen::Index>(rows[0].size());
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    const Json& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != c) {
      throw ConfigError(path + ": rows must all have " + std::to_string(c) + " entries");
    }
    for (Eigen::Index j = 0; j < c; ++j) {
      const Json& v = row[static_cast<std::size_t>(j)];
      if (!v.is_number()) throw ConfigError(path + ": entries must be numbers");
      m(i, j) = v.get<double>();
    }
  }
  return m;
}

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json spectrum_to_json(const SpectrumSpec& spec) {
  using namespace spectrum;
  if (const auto* s = std::get_if<Identity>(&spec)) return {{"kind", "identity"}, {"d", s->dimension}};
  if (const auto* s = std::get_if<Spiked>(&spec)) {
    return {{"kind", "spiked"}, {"d", s->dimension}, {"k", s->spikes}, {"strength", s->strength}};
  }
  if (const auto* s = std::get_if<PolyDecay>(&spec)) {
    return {{"kind", "poly_decay"}, {"d", s->dimension}, {"alpha", s->alpha}};
  }
  if (const auto* s = std::get_if<ExpDecay>(&spec)) {
    return {{"kind", "exp_decay"}, {"d", s->dimension}, {"beta", s->beta}};
  }
  if (const auto* s = std::get_if<LowRank>(&spec)) {
    return {{"kind", "low_rank"}, {"d", s->dimension}, {"k", s->rank}};
  }
  return {{"kind", "explicit"}, {"matrix", matrix_to_json(std::get<Explicit>(spec).matrix)}};
}

}  // namespace

std::string format_number(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& matrix) {
  out << "# d=" << matrix.rows() << '\n';
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) write_row(out, matrix.row(i));
}

CsvTable read_csv_table(std::istream& in) {
  CsvTable table;
  std::string line;
  std::vector<std::vector<double>> rows;
  std::vector<double> row;
  bool body_started = false;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      const auto eq = t.find('=');
      if (eq != std::string::npos) table.headers[trim(t.substr(1, eq - 1))] = trim(t.substr(eq + 1));
      continue;
    }
    if (!parse_row(t, row)) {
      if (!body_started && rows.empty()) {
        body_started = true;  // column header line
        continue;
      }
      throw ConfigError("csv line " + std::to_string(line_no) + ": malformed numeric row");
    }
    body_started = true;
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ConfigError("csv line " + std::to_string(line_no) + ": expected " +
                        std::to_string(rows.front().size()) + " columns");
    }
    rows.push_back(row);
  }
  const auto r = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index c = rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size());
  table.data.resize(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) table.data(i, j) = rows[static_cast<std::size_t>(i)][j];
  }
  return table;
}

CsvTable read_csv_table_file(const std::string& path) {
  auto in = open_or_throw(path);
  return read_csv_table(in);
}

Eigen::MatrixXd read_matrix_csv(std::istream& in) {
  CsvTable table = read_csv_table(in);
  if (table.data.rows() == 0) throw ConfigError("matrix csv: no rows");
  if (table.data.rows() != table.data.cols()) throw ConfigError("matrix csv: matrix is not square");
  if (auto it = table.headers.find("d"); it != table.headers.end()) {
    if (std::to_string(table.data.rows()) != it->second) {
      throw ConfigError("matrix csv: header d=" + it->second + " does not match " +
                        std::to_string(table.data.rows()) + " rows");
    }
  }
  return table.data;
}

Eigen::MatrixXd read_matrix_csv_file(const std::string& path) {
  auto in = open_or_throw(path);
  return read_matrix_csv(in);
}

void write_batch_csv(std::ostream& out, const SampleBatch& batch, const Headers& extra) {
  out << "# model=" << batch.model_label << '\n';
  out << "# seed=" << batch.seed << '\n';
  out << "# kind=" << to_string(batch.sampler_kind) << '\n';
  out << "# replicate=" << batch.replicate << '\n';
  out << "# n=" << batch.n() << '\n';
  out << "# d=" << batch.dimension() << '\n';
  for (const auto& [k, v] : extra) out << "# " << k << '=' << v << '\n';
  for (Eigen::Index i = 0; i < batch.data.rows(); ++i) write_row(out, batch.data.row(i));
}

void write_replicates_csv(std::ostream& out, const std::vector<double>& replicates,
                          const Headers& headers) {
  for (const auto& [k, v] : headers) out << "# " << k << '=' << v << '\n';
  out << "replicate,deviation\n";
  for (std::size_t i = 0; i < replicates.size(); ++i) {
    out << i << ',' << format_number(replicates[i]) << '\n';
  }
}

ReplicateFile read_replicates_csv(std::istream& in) {
  CsvTable table = read_csv_table(in);
  if (table.data.cols() != 2) throw ConfigError("replicate csv: expected 2 columns");
  ReplicateFile file;
  file.headers = std::move(table.headers);
  file.replicates.resize(static_cast<std::size_t>(table.data.rows()));
  for (Eigen::Index i = 0; i < table.data.rows(); ++i) {
    file.replicates[static_cast<std::size_t>(i)] = table.data(i, 1);
  }
  return file;
}

ReplicateFile read_replicates_csv_file(const std::string& path) {
  auto in = open_or_throw(path);
  return read_replicates_csv(in);
}

Json model_to_json(const CovarianceModel& model) {
  Json out;
  if (model.spec()) {
    out["spectrum"] = spectrum_to_json(*model.spec());
  } else {
    out["spectrum"] = {{"kind", "factors"}, {"factors", matrix_to_json(model.factors())}};
  }
  out["geometry"] = to_string(model.geometry());
  if (model.truncation()) out["truncation"] = *model.truncation();
  if (model.scale() != 1.0) out["scale"] = model.scale();
  out["label"] = model.label();
  return out;
}

CovarianceModel model_from_json(const Json& spec, const std::string& base_dir) {
  Section top(spec, "model");
  Section sp(top.at("spectrum"), "model.spectrum");
  const std::string kind = sp.text("kind");

  const NormGeometry geometry =
      top.has("geometry") ? parse_geometry(top.text("geometry")) : NormGeometry::euclidean;
  std::optional<int> truncation;
  if (top.has("truncation")) truncation = top.integer("truncation");
  const double scale = top.has("scale") ? top.number("scale") : 1.0;
  std::string label = top.has("label") ? top.text("label") : std::string();

  CovarianceModel model = [&] {
    if (kind == "factors") {
      if (truncation) throw ConfigError("model.truncation: not supported for factor models");
      return CovarianceModel::from_factors(matrix_from_json(sp.at("factors"), sp.path() + ".factors"),
                                           geometry, label);
    }
    SpectrumSpec parsed = [&]() -> SpectrumSpec {
      if (kind == "identity") return spectrum::Identity{sp.integer("d")};
      if (kind == "spiked") {
        return spectrum::Spiked{sp.integer("d"), sp.integer("k"), sp.number("strength")};
      }
      if (kind == "poly_decay") return spectrum::PolyDecay{sp.integer("d"), sp.number("alpha")};
      if (kind == "exp_decay") return spectrum::ExpDecay{sp.integer("d"), sp.number("beta")};
      if (kind == "low_rank") return spectrum::LowRank{sp.integer("d"), sp.integer("k")};
      if (kind == "explicit") {
        if (sp.has("matrix")) return spectrum::Explicit{matrix_from_json(sp.at("matrix"), sp.path() + ".matrix")};
        std::filesystem::path file = sp.text("matrix_csv");
        if (file.is_relative() && !base_dir.empty()) file = std::filesystem::path(base_dir) / file;
        return spectrum::Explicit{read_matrix_csv_file(file.string())};
      }
      throw ConfigError("model.spectrum.kind: unknown kind '" + kind + "'");
    }();
    return build_model(parsed, geometry, truncation, label);
  }();
  sp.reject_unknown();
  top.reject_unknown();

  if (scale != 1.0) {
    model = model.scaled(scale);
    if (label.empty()) {
      model = model.with_label(model.label() + "*" + format_number(scale));
    }
  }
  return model;
}

Json effective_rank_to_json(const EffectiveRankResult& result) {
  return {{"r", result.r},
          {"r_tilde", result.r_tilde},
          {"op_norm", result.op_norm},
          {"e_norm_x", result.e_norm_x},
          {"e_norm_x_sq", result.e_norm_x_sq},
          {"mc_std_error", result.mc_std_error},
          {"closed_form", result.closed_form}};
}

Json stats_to_json(const DeviationStats& stats) {
  Json quantiles = Json::object();
  for (const auto& [t, q] : stats.quantiles) quantiles[format_number(t)] = q;
  return {{"replicates", stats.replicates.size()},
          {"mean", stats.mean},
          {"median", stats.median},
          {"min", stats.min},
          {"max", stats.max},
          {"mc_std_error_mean", stats.mc_std_error_mean},
          {"quantiles", quantiles},
          {"config",
           {{"model", stats.model_label},
            {"n", stats.n},
            {"R", stats.replicates.size()},
            {"seed", stats.seed},
            {"sampler", to_string(stats.kind)}}}};
}

Json bound_report_to_json(const BoundReport& report) {
  Json inputs = Json::object();
  for (const auto& [k, v] : report.spec.inputs) inputs[k] = v;
  return {{"theorem", to_string(report.spec.theorem)},
          {"constant", report.spec.constant},
          {"inputs", inputs},
          {"value", report.value},
          {"regime", to_string(report.regime)}};
}

Json scaling_fit_to_json(const std::optional<ScalingFit>& fit) {
  if (!fit) return {{"status", "skipped"}};
  Json points = Json::array();
  for (const auto& p : fit->points) points.push_back({p.log_ratio, p.log_deviation});
  return {{"status", "fitted"},
          {"regime", to_string(fit->regime)},
          {"slope", fit->slope},
          {"intercept", fit->intercept},
          {"r_squared", fit->r_squared},
          {"points", points}};
}

Json concentration_fit_to_json(const ConcentrationFit& fit) {
  Json rates = Json::object();
  Json radius = Json::object();
  for (const auto& [t, v] : fit.exceedance_rates) rates[format_number(t)] = v;
  for (const auto& [t, v] : fit.radius) radius[format_number(t)] = v;
  return {{"centering", to_string(fit.centering)},
          {"regime", to_string(fit.regime)},
          {"fitted_constant", fit.fitted_constant},
          {"center", fit.center},
          {"t_grid", fit.t_grid},
          {"exceedance_rates", rates},
          {"radius", radius},
          {"replicates", fit.replicates}};
}

std::string config_hash(const Json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace covbound::io
