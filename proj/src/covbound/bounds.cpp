#include "covbound/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "covbound/errors.hpp"
#include "covbound/opnorm.hpp"

namespace covbound {

namespace {

struct TheoremInfo {
  BoundTheorem theorem;
  const char* name;
  std::vector<std::string> inputs;
  double min_t;  // lower limit on t; negative when t is not an input
  bool has_regime;
};

const std::vector<TheoremInfo>& theorem_table() {
  static const std::vector<TheoremInfo> table = {
      {BoundTheorem::classical_thm21, "classical_thm21", {"op_norm", "d", "n", "t"}, 1.0, false},
      {BoundTheorem::lounici_logd, "lounici_logd", {"op_norm", "r_tilde", "d", "n", "t"}, 1.0,
       false},
      {BoundTheorem::rudelson, "rudelson", {"op_norm", "e_max_sq", "d", "n"}, -1.0, false},
      {BoundTheorem::expectation_upper_thm24, "expectation_upper_thm24", {"op_norm", "r", "n"},
       -1.0, true},
      {BoundTheorem::expectation_lower_thm24, "expectation_lower_thm24", {"op_norm", "r", "n"},
       -1.0, true},
      {BoundTheorem::concentration_thm25, "concentration_thm25", {"op_norm", "r", "n", "t"}, 1.0,
       true},
      {BoundTheorem::concentration_implicit_thm26, "concentration_implicit_thm26",
       {"op_norm", "M", "n", "t"}, 1.0, false},
      {BoundTheorem::corollary_21, "corollary_21", {"op_norm", "M", "n", "t"}, 1.0, false},
      {BoundTheorem::corollary_23, "corollary_23", {"op_norm", "r", "n", "t"}, 1.0, true},
      {BoundTheorem::crude_lemma34, "crude_lemma34", {"op_norm", "r", "n", "t"}, 0.0, false},
      {BoundTheorem::subgaussian_thm27, "subgaussian_thm27", {"op_norm", "r", "n", "t"}, 1.0, true},
      {BoundTheorem::bernstein_psi1, "bernstein_psi1", {"psi1_norm", "n", "t"}, 0.0, false},
  };
  return table;
}

const TheoremInfo& info(BoundTheorem theorem) {
  for (const auto& entry : theorem_table()) {
    if (entry.theorem == theorem) return entry;
  }
  throw ConfigError("unknown theorem");
}

// sqrt(x/n) v x/n
double root_or_linear(double x, double n) { return std::max(std::sqrt(x / n), x / n); }

}  // namespace

std::string to_string(BoundTheorem theorem) { return info(theorem).name; }

BoundTheorem parse_theorem(std::string_view name) {
  for (const auto& entry : theorem_table()) {
    const std::string_view full = entry.name;
    if (name == full) return entry.theorem;
    const auto cut = full.rfind('_');
    if (cut != std::string_view::npos && name == full.substr(0, cut)) return entry.theorem;
  }
  if (name == "concentration") return BoundTheorem::concentration_thm25;
  if (name == "concentration_implicit") return BoundTheorem::concentration_implicit_thm26;
  if (name == "lounici") return BoundTheorem::lounici_logd;
  if (name == "crude") return BoundTheorem::crude_lemma34;
  if (name == "subgaussian") return BoundTheorem::subgaussian_thm27;
  throw ConfigError("unknown theorem '" + std::string(name) + "'");
}

const std::vector<BoundTheorem>& all_theorems() {
  static const std::vector<BoundTheorem> all = [] {
    std::vector<BoundTheorem> out;
    for (const auto& entry : theorem_table()) out.push_back(entry.theorem);
    return out;
  }();
  return all;
}

const std::vector<std::string>& required_inputs(BoundTheorem theorem) {
  return info(theorem).inputs;
}

std::string to_string(Regime regime) {
  switch (regime) {
    case Regime::r_le_n:
      return "r_le_n";
    case Regime::r_ge_n:
      return "r_ge_n";
    case Regime::not_applicable:
      return "not_applicable";
  }
  return "not_applicable";
}

Regime regime_for(double r, double n) { return r <= n ? Regime::r_le_n : Regime::r_ge_n; }

BoundReport eval_bound(const BoundSpec& spec) {
  const TheoremInfo& theorem = info(spec.theorem);
  if (!(spec.constant > 0.0) || !std::isfinite(spec.constant)) {
    throw ConfigError(std::string(theorem.name) + ": constant must be positive and finite");
  }
  auto get = [&](const std::string& key) {
    const auto it = spec.inputs.find(key);
    if (it == spec.inputs.end()) {
      throw ConfigError(std::string(theorem.name) + ": missing input '" + key + "'");
    }
    const double value = it->second;
    if (!std::isfinite(value) || value < 0.0) {
      throw ConfigError(std::string(theorem.name) + ": input '" + key +
                        "' must be finite and nonnegative");
    }
    return value;
  };
  for (const auto& key : theorem.inputs) get(key);

  const double n = get("n");
  if (!(n > 0.0)) throw ConfigError(std::string(theorem.name) + ": input 'n' must be positive");
  double t = 0.0;
  if (theorem.min_t >= 0.0) {
    t = get("t");
    const bool ok = theorem.min_t > 0.0 ? t >= theorem.min_t
                                        : (spec.theorem == BoundTheorem::crude_lemma34 ? t > 0.0
                                                                                       : t >= 0.0);
    if (!ok) {
      throw ConfigError(std::string(theorem.name) + ": input 't' must be " +
                        (theorem.min_t > 0.0 ? ">= 1" : "positive"));
    }
  }
  double d = 1.0;
  if (spec.inputs.count("d") && std::find(theorem.inputs.begin(), theorem.inputs.end(), "d") !=
                                    theorem.inputs.end()) {
    d = get("d");
    if (d < 1.0) throw ConfigError(std::string(theorem.name) + ": input 'd' must be >= 1");
  }

  const double c = spec.constant;
  BoundReport report;
  report.spec = spec;
  switch (spec.theorem) {
    case BoundTheorem::classical_thm21:
      report.value = c * get("op_norm") * std::max(root_or_linear(d, n), root_or_linear(t, n));
      break;
    case BoundTheorem::lounici_logd: {
      const double q = get("r_tilde") * std::log(d) + t;
      report.value = c * get("op_norm") * std::max(std::sqrt(q / n), q * std::log(n) / n);
      break;
    }
    case BoundTheorem::rudelson: {
      const double e = get("e_max_sq");
      const double log_d = std::log(d);
      report.value = c * std::max(std::sqrt(get("op_norm") * e) * std::sqrt(log_d / n),
                                  e * log_d / n);
      break;
    }
    case BoundTheorem::expectation_upper_thm24:
    case BoundTheorem::expectation_lower_thm24:
      report.value = c * get("op_norm") * root_or_linear(get("r"), n);
      break;
    case BoundTheorem::concentration_thm25: {
      const double r = get("r");
      const double op = get("op_norm");
      report.value = r <= n ? c * op * root_or_linear(t, n)
                            : c * op * std::max(std::sqrt(r / n) * std::sqrt(t / n), t / n);
      break;
    }
    case BoundTheorem::concentration_implicit_thm26: {
      const double op = get("op_norm");
      report.value =
          c * std::max(op * root_or_linear(t, n), std::sqrt(op * get("M")) * std::sqrt(t / n));
      break;
    }
    case BoundTheorem::corollary_21:
      report.value = 2.0 * get("M") + c * get("op_norm") * root_or_linear(t, n);
      break;
    case BoundTheorem::corollary_23:
    case BoundTheorem::subgaussian_thm27:
      report.value =
          c * get("op_norm") * std::max(root_or_linear(get("r"), n), root_or_linear(t, n));
      break;
    case BoundTheorem::crude_lemma34: {
      const double r = get("r");
      report.value = c * get("op_norm") * (r * root_or_linear(t, n) + r + 1.0);
      break;
    }
    case BoundTheorem::bernstein_psi1:
      report.value = c * get("psi1_norm") * root_or_linear(t, n);
      break;
  }
  if (theorem.has_regime) report.regime = regime_for(get("r"), n);
  if (!std::isfinite(report.value)) {
    throw NumericalError(std::string(theorem.name) + ": bound evaluated to a non-finite value");
  }
  return report;
}

double fixed_point_delta(double a, double b) {
  if (!(a >= 0.0) || !(b >= 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
    throw ConfigError("fixed_point_delta: A and B must be finite and nonnegative");
  }
  if (a == 0.0 && b == 0.0) return 0.0;
  const double s = 0.5 * (b + std::sqrt(b * b + 4.0 * a));
  return s * s;
}

ConfidenceReport confidence_bound(const Eigen::MatrixXd& data, double t,
                                  double calibrated_constant, NormGeometry geometry) {
  const Eigen::Index n = data.rows();
  if (n < 2) throw ConfigError("confidence_bound: need n >= 2 rows");
  if (!(t >= 1.0)) throw ConfigError("confidence_bound: t must be >= 1");
  ConfidenceReport out;
  out.sigma_hat_norm = operator_norm(sample_covariance(data), geometry).value;
  if (!(out.sigma_hat_norm > 0.0)) {
    throw NumericalError("confidence_bound: ||Sigma_hat|| = 0, plug-in effective rank undefined");
  }
  double total = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) total += vector_norm(data.row(j).transpose(), geometry);
  out.mean_norm = total / static_cast<double>(n);
  out.r_hat = out.mean_norm * out.mean_norm / out.sigma_hat_norm;

  BoundSpec spec;
  spec.theorem = BoundTheorem::corollary_23;
  spec.constant = calibrated_constant;
  spec.inputs = {{"op_norm", out.sigma_hat_norm},
                 {"r", out.r_hat},
                 {"n", static_cast<double>(n)},
                 {"t", t}};
  out.report = eval_bound(spec);
  return out;
}

ConfidenceReport confidence_bound(const SampleBatch& batch, double t, double calibrated_constant,
                                  NormGeometry geometry) {
  return confidence_bound(batch.data, t, calibrated_constant, geometry);
}

std::optional<double> ConstantsFile::lookup(BoundTheorem theorem) const {
  const std::string name = to_string(theorem);
  if (auto it = constants.find(name); it != constants.end()) return it->second;
  if (auto it = constants.find(name + ".median"); it != constants.end()) return it->second;
  return std::nullopt;
}

std::string format_constants(const ConstantsFile& file) {
  std::ostringstream out;
  out.precision(17);
  out << "# covbound calibrated constants\n";
  for (const auto& [key, value] : file.provenance) out << "# " << key << "=" << value << "\n";
  for (const auto& [key, value] : file.constants) out << key << " = " << value << "\n";
  return out.str();
}

ConstantsFile parse_constants(std::string_view text) {
  ConstantsFile file;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos) {
        file.provenance[trim(line.substr(1, eq - 1))] = trim(line.substr(eq + 1));
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("constants file line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string raw_key = trim(line.substr(0, eq));
    const auto dot = raw_key.find('.');
    const std::string suffix = dot == std::string::npos ? std::string() : raw_key.substr(dot);
    if (!suffix.empty() && suffix != ".median" && suffix != ".mean") {
      throw ConfigError("constants file line " + std::to_string(line_no) +
                        ": unknown key suffix '" + suffix + "'");
    }
    const std::string key = to_string(parse_theorem(raw_key.substr(0, dot))) + suffix;
    try {
      std::size_t used = 0;
      const std::string value_text = trim(line.substr(eq + 1));
      const double value = std::stod(value_text, &used);
      if (used != value_text.size() || !(value > 0.0)) throw std::invalid_argument("bad");
      file.constants[key] = value;
    } catch (const std::exception&) {
      throw ConfigError("constants file line " + std::to_string(line_no) +
                        ": value must be a positive number");
    }
  }
  return file;
}

ConstantsFile read_constants(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open constants file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_constants(buffer.str());
}

void write_constants(const std::string& path, const ConstantsFile& file) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write constants file '" + path + "'");
  out << format_constants(file);
}

}  // namespace covbound
