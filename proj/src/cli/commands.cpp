#include "covbound/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "covbound/bounds.hpp"
#include "covbound/cli/svg.hpp"
#include "covbound/covmodel.hpp"
#include "covbound/errors.hpp"
#include "covbound/experiments.hpp"
#include "covbound/io.hpp"
#include "covbound/rng.hpp"

namespace fs = std::filesystem;

namespace covbound::cli {

namespace {

constexpr std::uint64_t kRankTag = 0x636c'6972;        // per-model effective-rank stream
constexpr std::uint64_t kLowerBoundTag = 0x2000;
constexpr std::uint64_t kLpTag = 0x3000;

void check_schema_version(ConfigSection& top) {
  const long long version = top.integer_or("schema_version", kSchemaVersion);
  if (version != kSchemaVersion) {
    throw ConfigError("config.schema_version: unsupported version " + std::to_string(version) +
                      " (expected " + std::to_string(kSchemaVersion) + ")");
  }
}

long long positive(ConfigSection& s, const std::string& key) {
  const long long v = s.integer(key);
  if (v < 1) throw ConfigError(s.key_path(key) + ": must be >= 1");
  return v;
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
}

std::string dump(const Json& doc) { return doc.dump(2) + "\n"; }

struct XyTable {
  std::string x_name;
  std::string y_name;
  std::vector<double> x;
  std::vector<double> y;
};

void write_xy_csv(const std::string& path, const io::Headers& headers, const XyTable& table) {
  std::ostringstream out;
  for (const auto& [k, v] : headers) out << "# " << k << '=' << v << '\n';
  out << "# x=" << table.x_name << '\n' << "# y=" << table.y_name << '\n' << "x,y\n";
  for (std::size_t i = 0; i < table.x.size(); ++i) {
    out << io::format_number(table.x[i]) << ',' << io::format_number(table.y[i]) << '\n';
  }
  write_text(path, out.str());
}

double rate_scale(double op, double r, double n) {
  const double ratio = r / n;
  return op * std::max(std::sqrt(ratio), ratio);
}

std::string today_utc() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[16];
  std::strftime(buf, sizeof buf, "%Y-%m-%d", &tm);
  return buf;
}

struct Check {
  std::string name;
  std::string status;  // pass | fail | skipped
  Json detail;
};

Json checks_to_json(const std::vector<Check>& checks) {
  Json out = Json::array();
  for (const auto& c : checks) {
    out.push_back({{"name", c.name}, {"status", c.status}, {"detail", c.detail}});
  }
  return out;
}

bool all_pass(const std::vector<Check>& checks) {
  return std::none_of(checks.begin(), checks.end(),
                      [](const Check& c) { return c.status == "fail"; });
}

// --- scaling output shared by verify, calibrate and report -----------------------

Json point_to_json(const GridPointResult& p, const GapResult& gap) {
  return {{"model", p.model_label},
          {"n", p.n},
          {"r", p.r},
          {"op_norm", p.op_norm},
          {"ratio_r_n", p.ratio_r_n},
          {"mean", p.stats.mean},
          {"median", p.stats.median},
          {"mc_std_error_mean", p.stats.mc_std_error_mean},
          {"replicates", p.stats.replicates.size()},
          {"normalized_mean", p.normalized_mean},
          {"gap", gap.gap},
          {"gap_radius", gap.radius},
          {"regime", to_string(gap.regime)}};
}

struct ScalingBlock {
  Json json;
  std::vector<GapResult> gaps;
};

ScalingBlock scaling_block(const ScalingReport& report) {
  ScalingBlock block;
  Json points = Json::array();
  for (const auto& p : report.points) {
    block.gaps.push_back(median_mean_gap(p.stats, p.op_norm, p.r));
    points.push_back(point_to_json(p, block.gaps.back()));
  }
  const double band = report.ratio_min > 0.0 ? report.ratio_max / report.ratio_min
                                             : std::numeric_limits<double>::infinity();
  block.json = {{"points", points},
                {"small_r", io::scaling_fit_to_json(report.small_r)},
                {"large_r", io::scaling_fit_to_json(report.large_r)},
                {"ratio_band",
                 {{"min", report.ratio_min},
                  {"max", report.ratio_max},
                  {"max_over_min", std::isfinite(band) ? Json(band) : Json(nullptr)}}},
                {"diagnostics", report.diagnostics}};
  return block;
}

void emit_scaling_plots(const ScalingReport& report, const std::vector<GapResult>& gaps,
                        const std::string& dir, const std::string& prefix,
                        const io::Headers& headers, bool svg, std::vector<std::string>& files) {
  XyTable scaling{"log(r/n)", "log(mean deviation/||Sigma||)", {}, {}};
  XyTable ratio{"log(r/n)", "mean/(||Sigma|| max(sqrt(r/n), r/n))", {}, {}};
  XyTable gap{"log(r/n)", "|mean-median|/gap radius", {}, {}};
  for (std::size_t i = 0; i < report.points.size(); ++i) {
    const auto& p = report.points[i];
    if (p.op_norm <= 0.0 || p.stats.mean <= 0.0) continue;
    const double x = std::log(p.ratio_r_n);
    scaling.x.push_back(x);
    scaling.y.push_back(std::log(p.stats.mean / p.op_norm));
    ratio.x.push_back(x);
    ratio.y.push_back(p.normalized_mean);
    gap.x.push_back(x);
    gap.y.push_back(gaps[i].radius > 0.0 ? gaps[i].gap / gaps[i].radius : 0.0);
  }
  for (const auto& [suffix, table] :
       {std::pair<std::string, const XyTable*>{"scaling", &scaling}, {"ratio", &ratio},
        {"gap", &gap}}) {
    const std::string path = join_path(dir, prefix + "_" + suffix + ".csv");
    write_xy_csv(path, headers, *table);
    files.push_back(path);
  }
  if (!svg) return;

  std::vector<PlotSeries> series{{"replicate means", scaling.x, scaling.y, false}};
  for (const auto* fit : {&report.small_r, &report.large_r}) {
    if (!*fit || (*fit)->points.empty()) continue;
    double lo = (*fit)->points.front().log_ratio, hi = lo;
    for (const auto& pt : (*fit)->points) lo = std::min(lo, pt.log_ratio), hi = std::max(hi, pt.log_ratio);
    char name[64];
    std::snprintf(name, sizeof name, "%s fit, slope %.3f", to_string((*fit)->regime).c_str(),
                  (*fit)->slope);
    series.push_back({name,
                      {lo, hi},
                      {(*fit)->intercept + (*fit)->slope * lo, (*fit)->intercept + (*fit)->slope * hi},
                      true});
  }
  std::string path = join_path(dir, prefix + "_scaling.svg");
  write_text(path, render_svg("Mean deviation against r/n", scaling.x_name, scaling.y_name, series));
  files.push_back(path);

  path = join_path(dir, prefix + "_ratio.svg");
  write_text(path, render_svg("Normalized mean deviation", ratio.x_name, ratio.y_name,
                              {{"points", ratio.x, ratio.y, false}}));
  files.push_back(path);
}

// --- campaign config shared by verify and calibrate --------------------------------

struct Thresholds {
  double slope_small_lo = 0.4;
  double slope_small_hi = 0.6;
  double slope_large_lo = 0.9;
  double slope_large_hi = 1.1;
  double r_squared_min = 0.98;
  double ratio_band_max = 10.0;
  double gap_factor = 3.0;
  double exceedance_se = 2.0;
  double seed_spread = 0.2;
  double subgaussian_factor = 3.0;
  double lp_ratio_max = 10.0;
};

std::pair<double, double> read_interval(ConfigSection& s, const std::string& key,
                                        std::pair<double, double> fallback) {
  if (!s.has(key)) {
    s.find(key);
    return fallback;
  }
  const auto v = s.numbers(key);
  if (v.size() != 2 || v[0] > v[1]) throw ConfigError(s.key_path(key) + ": expected [lo, hi]");
  return {v[0], v[1]};
}

Thresholds read_thresholds(ConfigSection& top) {
  Thresholds t;
  if (!top.has("thresholds")) {
    top.find("thresholds");
    return t;
  }
  ConfigSection s = top.section("thresholds");
  std::tie(t.slope_small_lo, t.slope_small_hi) =
      read_interval(s, "slope_small", {t.slope_small_lo, t.slope_small_hi});
  std::tie(t.slope_large_lo, t.slope_large_hi) =
      read_interval(s, "slope_large", {t.slope_large_lo, t.slope_large_hi});
  t.r_squared_min = s.number_or("r_squared_min", t.r_squared_min);
  t.ratio_band_max = s.number_or("ratio_band_max", t.ratio_band_max);
  t.gap_factor = s.number_or("gap_factor", t.gap_factor);
  t.exceedance_se = s.number_or("exceedance_se", t.exceedance_se);
  t.seed_spread = s.number_or("seed_spread", t.seed_spread);
  t.subgaussian_factor = s.number_or("subgaussian_factor", t.subgaussian_factor);
  t.lp_ratio_max = s.number_or("lp_ratio_max", t.lp_ratio_max);
  s.finish();
  return t;
}

struct ConcentrationCase {
  CovarianceModel model;
  Eigen::Index n;
  std::size_t replicates;
  std::vector<double> t_grid;
  std::vector<std::uint64_t> seeds;
  std::vector<Centering> centerings;
  bool allow_large_t;
};

struct LowerBoundCase {
  CovarianceModel model;
  std::vector<Eigen::Index> n_values;
  std::size_t replicates;
};

struct LpCase {
  CovarianceModel model;
  Eigen::Index n;
  std::size_t replicates;
  std::vector<double> p_values;
};

struct Campaign {
  std::string experiment;
  std::uint64_t seed = 0;
  SamplerKind kind = SamplerKind::gaussian;
  std::size_t replicates = 200;
  std::size_t rank_budget = kDefaultRankBudget;
  std::vector<GridEntry> grid;
  std::vector<ConcentrationCase> concentration;
  std::vector<LowerBoundCase> lower_bound;
  std::vector<LpCase> lp;
  bool subgaussian = false;
  std::size_t subgaussian_replicates = 200;
  Thresholds thresholds;
  std::string out_dir_config;
  std::string prefix;
  bool write_replicates = false;
  bool svg = false;
  std::string constants_path;
  std::string date;
};

std::vector<Eigen::Index> read_n_values(ConfigSection& s) {
  const Json& raw = s.at("n");
  std::vector<long long> values;
  if (raw.is_number_integer()) {
    values.push_back(raw.get<long long>());
  } else {
    values = s.integers("n");
  }
  if (values.empty()) throw ConfigError(s.key_path("n") + ": empty list");
  std::vector<Eigen::Index> out;
  for (long long v : values) {
    if (v < 1) throw ConfigError(s.key_path("n") + ": values must be >= 1");
    out.push_back(static_cast<Eigen::Index>(v));
  }
  return out;
}

const Json& array_at(ConfigSection& top, const std::string& key) {
  const Json& node = top.at(key);
  if (!node.is_array()) throw ConfigError(top.key_path(key) + ": expected an array");
  return node;
}

Campaign read_campaign(const Json& config, const RunContext& ctx, bool calibrate) {
  ConfigSection top(config, "config");
  check_schema_version(top);
  Campaign c;
  c.experiment = top.text_or("experiment", calibrate ? "calibrate" : "verify");
  c.seed = top.uint64("seed");
  c.kind = parse_sampler_kind(top.text_or("sampler", "gaussian"));
  c.replicates = static_cast<std::size_t>(top.integer_or("replicates", 200));
  c.rank_budget = static_cast<std::size_t>(top.integer_or("rank_budget", kDefaultRankBudget));

  const Json& models = array_at(top, "models");
  if (models.empty()) throw ConfigError("config.models: empty model list");
  for (std::size_t i = 0; i < models.size(); ++i) {
    ConfigSection entry(models[i], "config.models." + std::to_string(i));
    GridEntry g{io::model_from_json(entry.at("model"), ctx.config_dir), read_n_values(entry)};
    entry.finish();
    c.grid.push_back(std::move(g));
  }

  if (top.has("concentration")) {
    const Json& cases = array_at(top, "concentration");
    for (std::size_t i = 0; i < cases.size(); ++i) {
      ConfigSection s(cases[i], "config.concentration." + std::to_string(i));
      ConcentrationCase cc{io::model_from_json(s.at("model"), ctx.config_dir),
                           static_cast<Eigen::Index>(positive(s, "n")),
                           static_cast<std::size_t>(positive(s, "replicates")),
                           s.has("t_grid") ? s.numbers("t_grid") : kDefaultTGrid,
                           {},
                           {},
                           s.boolean_or("allow_large_t", false)};
      s.find("t_grid");
      if (s.has("seeds")) {
        for (long long v : s.integers("seeds")) {
          if (v < 0) throw ConfigError(s.key_path("seeds") + ": seeds must be nonnegative");
          cc.seeds.push_back(static_cast<std::uint64_t>(v));
        }
      } else {
        s.find("seeds");
        cc.seeds = {c.seed};
      }
      if (cc.seeds.empty()) throw ConfigError(s.key_path("seeds") + ": empty list");
      if (s.has("centering")) {
        for (const auto& name : s.at("centering")) {
          if (!name.is_string()) throw ConfigError(s.key_path("centering") + ": expected strings");
          cc.centerings.push_back(parse_centering(name.get<std::string>()));
        }
      } else {
        s.find("centering");
        cc.centerings = {Centering::median, Centering::mean};
      }
      s.finish();
      c.concentration.push_back(std::move(cc));
    }
  } else {
    top.find("concentration");
  }

  if (top.has("lower_bound")) {
    const Json& cases = array_at(top, "lower_bound");
    for (std::size_t i = 0; i < cases.size(); ++i) {
      ConfigSection s(cases[i], "config.lower_bound." + std::to_string(i));
      LowerBoundCase lb{io::model_from_json(s.at("model"), ctx.config_dir), read_n_values(s),
                        static_cast<std::size_t>(s.integer_or("replicates", 400))};
      s.finish();
      c.lower_bound.push_back(std::move(lb));
    }
  } else {
    top.find("lower_bound");
  }

  if (top.has("lp_moment")) {
    const Json& cases = array_at(top, "lp_moment");
    for (std::size_t i = 0; i < cases.size(); ++i) {
      ConfigSection s(cases[i], "config.lp_moment." + std::to_string(i));
      LpCase lp{io::model_from_json(s.at("model"), ctx.config_dir),
                static_cast<Eigen::Index>(positive(s, "n")),
                static_cast<std::size_t>(s.integer_or("replicates", 1000)), s.numbers("p")};
      if (lp.replicates < 1000) throw ConfigError(s.key_path("replicates") + ": need >= 1000");
      for (double p : lp.p_values) {
        if (!(p >= 1.0) || p > 8.0) throw ConfigError(s.key_path("p") + ": values must be in [1, 8]");
      }
      s.finish();
      c.lp.push_back(std::move(lp));
    }
  } else {
    top.find("lp_moment");
  }

  if (top.has("subgaussian")) {
    ConfigSection s = top.section("subgaussian");
    c.subgaussian = s.boolean_or("enabled", true);
    c.subgaussian_replicates =
        static_cast<std::size_t>(s.integer_or("replicates", static_cast<long long>(c.replicates)));
    s.finish();
  } else {
    top.find("subgaussian");
  }

  c.thresholds = read_thresholds(top);

  if (top.has("output")) {
    ConfigSection s = top.section("output");
    c.out_dir_config = s.text_or("dir", "");
    c.prefix = s.text_or("prefix", c.experiment);
    c.write_replicates = s.boolean_or("replicates", false);
    c.svg = s.boolean_or("svg", false);
    s.finish();
  } else {
    top.find("output");
    c.prefix = c.experiment;
  }

  if (top.has("constants")) {
    ConfigSection s = top.section("constants");
    c.constants_path = s.text_or("path", "");
    c.date = s.text_or("date", "");
    s.finish();
  } else {
    top.find("constants");
  }
  top.finish();
  return c;
}

struct CampaignResult {
  Json report;
  std::vector<std::string> files;
  ScalingReport gaussian;
  std::optional<ScalingReport> subgaussian;
  std::map<std::string, double> concentration_constants;  // centering -> max fitted C
};

Json seed_list(const std::vector<std::uint64_t>& seeds) {
  Json out = Json::array();
  for (auto s : seeds) out.push_back(s);
  return out;
}

CampaignResult run_campaign(const Json& config, const Campaign& c, const RunContext& ctx,
                            const std::string& command) {
  CampaignResult result;
  const std::string hash = io::config_hash(config);
  const std::string dir = resolve_output_dir(ctx.out_dir, c.out_dir_config);
  ensure_dir(dir);
  const io::Headers headers{{"config_hash", hash},
                            {"experiment", c.experiment},
                            {"schema_version", std::to_string(kSchemaVersion)},
                            {"seed", std::to_string(c.seed)}};
  const Thresholds& th = c.thresholds;
  std::vector<Check> checks;

  ScalingOptions options;
  options.replicates = c.replicates;
  options.seed = c.seed;
  options.kind = c.kind;
  options.workers = ctx.workers;
  options.rank_budget = c.rank_budget;
  result.gaussian = verify_expectation_scaling(c.grid, options);
  const ScalingReport& scaling = result.gaussian;
  ScalingBlock block = scaling_block(scaling);

  auto slope_check = [&](const char* name, const std::optional<ScalingFit>& fit, double lo,
                         double hi) {
    if (!fit) {
      checks.push_back({name, "skipped", {{"reason", "fit skipped"}}});
      return;
    }
    const bool ok = fit->slope >= lo && fit->slope <= hi && fit->r_squared >= th.r_squared_min;
    checks.push_back({name,
                      ok ? "pass" : "fail",
                      {{"slope", fit->slope},
                       {"r_squared", fit->r_squared},
                       {"slope_range", {lo, hi}},
                       {"r_squared_min", th.r_squared_min}}});
  };
  slope_check("scaling.small_r", scaling.small_r, th.slope_small_lo, th.slope_small_hi);
  slope_check("scaling.large_r", scaling.large_r, th.slope_large_lo, th.slope_large_hi);

  {
    const bool ok = scaling.ratio_min > 0.0 &&
                    scaling.ratio_max / scaling.ratio_min <= th.ratio_band_max;
    checks.push_back({"ratio_band",
                      ok ? "pass" : "fail",
                      {{"min", scaling.ratio_min},
                       {"max", scaling.ratio_max},
                       {"limit", th.ratio_band_max}}});
  }
  {
    double worst = 0.0;
    for (const auto& g : block.gaps) {
      if (g.radius > 0.0) worst = std::max(worst, g.gap / g.radius);
    }
    checks.push_back({"median_mean_gap",
                      worst <= th.gap_factor ? "pass" : "fail",
                      {{"worst_gap_over_radius", worst}, {"limit", th.gap_factor}}});
  }

  if (c.write_replicates) {
    const std::string rep_dir = join_path(dir, c.prefix + "_replicates");
    ensure_dir(rep_dir);
    for (std::size_t i = 0; i < scaling.points.size(); ++i) {
      const auto& p = scaling.points[i];
      char name[32];
      std::snprintf(name, sizeof name, "point_%03zu.csv", i);
      io::Headers h = headers;
      h["model"] = p.model_label;
      h["n"] = std::to_string(p.n);
      h["seed"] = std::to_string(p.stats.seed);
      h["sampler"] = to_string(p.stats.kind);
      h["op_norm"] = io::format_number(p.op_norm);
      h["r"] = io::format_number(p.r);
      const std::string path = join_path(rep_dir, name);
      std::ostringstream out;
      io::write_replicates_csv(out, p.stats.replicates, h);
      write_text(path, out.str());
      result.files.push_back(path);
    }
  }
  emit_scaling_plots(scaling, block.gaps, dir, c.prefix, headers, c.svg, result.files);

  // Concentration fits.
  Json conc_json = Json::array();
  for (std::size_t i = 0; i < c.concentration.size(); ++i) {
    const auto& cc = c.concentration[i];
    Json case_json = {{"model", cc.model.label()},
                      {"n", cc.n},
                      {"replicates", cc.replicates},
                      {"t_grid", cc.t_grid},
                      {"seeds", seed_list(cc.seeds)}};
    Json fits = Json::array();
    for (Centering centering : cc.centerings) {
      std::vector<double> constants;
      bool exceed_ok = true;
      std::string failure;
      for (std::uint64_t seed : cc.seeds) {
        ConcentrationOptions co;
        co.t_grid = cc.t_grid;
        co.centering = centering;
        co.workers = ctx.workers;
        co.allow_large_t = cc.allow_large_t;
        co.rank_budget = c.rank_budget;
        try {
          const ConcentrationFit fit = fit_concentration(cc.model, cc.n, cc.replicates, seed, co);
          constants.push_back(fit.fitted_constant);
          for (const auto& [t, rate] : fit.exceedance_rates) {
            const double p = std::exp(-t);
            const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(fit.replicates));
            if (rate > p + th.exceedance_se * se) exceed_ok = false;
          }
          Json fj = io::concentration_fit_to_json(fit);
          fj["seed"] = seed;
          fits.push_back(fj);
          if (seed == cc.seeds.front()) {
            XyTable table{"t", "exceedance rate at fitted constant", {}, {}};
            for (const auto& [t, rate] : fit.exceedance_rates) {
              table.x.push_back(t);
              table.y.push_back(rate);
            }
            const std::string path = join_path(
                dir, c.prefix + "_concentration_" + std::to_string(i) + "_" + to_string(centering) + ".csv");
            write_xy_csv(path, headers, table);
            result.files.push_back(path);
          }
        } catch (const NumericalError& e) {
          failure = e.what();
        }
      }
      const std::string name = "concentration." + std::to_string(i) + "." + to_string(centering);
      if (!failure.empty()) {
        checks.push_back({name, "fail", {{"reason", failure}}});
        continue;
      }
      const auto [lo, hi] = std::minmax_element(constants.begin(), constants.end());
      const double spread = *hi - *lo;
      const bool ok = exceed_ok && spread <= th.seed_spread;
      checks.push_back({name,
                        ok ? "pass" : "fail",
                        {{"constants", constants},
                         {"seed_spread", spread},
                         {"spread_limit", th.seed_spread},
                         {"exceedance_within_limit", exceed_ok}}});
      double& best = result.concentration_constants[to_string(centering)];
      best = std::max(best, *hi);
    }
    case_json["fits"] = fits;
    conc_json.push_back(case_json);
  }

  // Lower bound at large r.
  Json lb_json = Json::array();
  std::size_t lb_index = 0;
  for (const auto& lb : c.lower_bound) {
    for (Eigen::Index n : lb.n_values) {
      const LowerBoundCheck check = verify_lower_bound_large_r(
          lb.model, n, lb.replicates, rng::mix(c.seed, kLowerBoundTag + lb_index), ctx.workers);
      Json j = {{"model", lb.model.label()},
                {"n", n},
                {"applicable", check.applicable},
                {"holds", check.holds},
                {"r", check.r},
                {"mean", check.mean},
                {"std_error", check.std_error},
                {"threshold", check.threshold},
                {"margin", check.margin},
                {"reason", check.reason}};
      lb_json.push_back(j);
      checks.push_back({"lower_bound." + std::to_string(lb_index),
                        !check.applicable ? "skipped" : (check.holds ? "pass" : "fail"), j});
      ++lb_index;
    }
  }

  // L_p moments.
  Json lp_json = Json::array();
  for (std::size_t i = 0; i < c.lp.size(); ++i) {
    const auto& lp = c.lp[i];
    McConfig mc;
    mc.n = lp.n;
    mc.replicates = lp.replicates;
    mc.seed = rng::mix(c.seed, kLpTag + i);
    mc.kind = c.kind;
    mc.workers = ctx.workers;
    const DeviationStats stats = run_deviation_mc(lp.model, mc);
    const EffectiveRankResult er =
        effective_rank(lp.model, c.rank_budget, rng::mix(mc.seed, kRankTag));
    const double scale = rate_scale(er.op_norm, er.r, static_cast<double>(lp.n));
    Json moments = Json::array();
    double worst = 0.0;
    for (double p : lp.p_values) {
      const double m = lp_moment(stats, p);
      worst = std::max(worst, m / scale);
      moments.push_back({{"p", p}, {"moment", m}, {"normalized", m / scale}});
    }
    Json j = {{"model", lp.model.label()}, {"n", lp.n}, {"r", er.r}, {"op_norm", er.op_norm},
              {"replicates", lp.replicates}, {"moments", moments}};
    lp_json.push_back(j);
    checks.push_back({"lp_moment." + std::to_string(i),
                      worst <= th.lp_ratio_max ? "pass" : "fail",
                      {{"worst_normalized", worst}, {"limit", th.lp_ratio_max}}});
  }

  // Rademacher-series rerun of the scaling grid.
  Json sub_json = nullptr;
  if (c.subgaussian) {
    ScalingOptions sub = options;
    sub.kind = SamplerKind::rademacher_series;
    sub.replicates = c.subgaussian_replicates;
    result.subgaussian = verify_expectation_scaling(c.grid, sub);
    const double limit = th.subgaussian_factor * scaling.ratio_max;
    const bool ok = result.subgaussian->ratio_max <= limit;
    sub_json = {{"ratio_min", result.subgaussian->ratio_min},
                {"ratio_max", result.subgaussian->ratio_max},
                {"gaussian_ratio_max", scaling.ratio_max},
                {"factor", th.subgaussian_factor},
                {"scaling", scaling_block(*result.subgaussian).json}};
    checks.push_back({"subgaussian",
                      ok ? "pass" : "fail",
                      {{"ratio_max", result.subgaussian->ratio_max}, {"limit", limit}}});
  }

  result.report = {{"schema_version", kSchemaVersion},
                   {"command", command},
                   {"experiment", c.experiment},
                   {"config_hash", hash},
                   {"seed", c.seed},
                   {"sampler", to_string(c.kind)},
                   {"replicates", c.replicates},
                   {"scaling", block.json},
                   {"concentration", conc_json},
                   {"lower_bound", lb_json},
                   {"lp_moment", lp_json},
                   {"subgaussian", sub_json},
                   {"checks", checks_to_json(checks)},
                   {"all_pass", all_pass(checks)}};
  const std::string report_path = join_path(dir, c.prefix + "_report.json");
  write_text(report_path, dump(result.report));
  result.files.insert(result.files.begin(), report_path);
  return result;
}

double resolve_constant(const BoundArgs& args, BoundTheorem theorem, std::string& source) {
  if (args.constant) {
    source = "flag";
    return *args.constant;
  }
  if (!args.constants_file.empty()) {
    const ConstantsFile file = read_constants(args.constants_file);
    if (auto c = file.lookup(theorem)) {
      source = args.constants_file;
      return *c;
    }
    throw ConfigError("constants file '" + args.constants_file + "' has no entry for " +
                      to_string(theorem));
  }
  source = "default";
  return 1.0;
}

double required_input(const BoundArgs& args, const std::string& key, const std::string& flag) {
  auto it = args.inputs.find(key);
  if (it == args.inputs.end()) throw ConfigError("bound: missing required input " + flag);
  return it->second;
}

}  // namespace

std::string resolve_output_dir(const std::string& flag, const std::string& from_config) {
  if (!flag.empty()) return flag;
  if (!from_config.empty()) return from_config;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return ".";
}

CommandOutput cmd_simulate(const Json& config, const RunContext& ctx) {
  ConfigSection top(config, "config");
  check_schema_version(top);
  const std::string experiment = top.text_or("experiment", "simulate");
  const CovarianceModel model = io::model_from_json(top.at("model"), ctx.config_dir);
  McConfig mc;
  mc.seed = top.uint64("seed");
  mc.n = static_cast<Eigen::Index>(positive(top, "n"));
  mc.replicates = static_cast<std::size_t>(positive(top, "replicates"));
  mc.kind = parse_sampler_kind(top.text_or("sampler", "gaussian"));
  if (top.has("quantile_t")) mc.quantile_t = top.numbers("quantile_t");
  top.find("quantile_t");
  mc.tol = top.number_or("tol", kDefaultOpNormTolerance);
  mc.workers = ctx.workers;
  const auto rank_budget = static_cast<std::size_t>(top.integer_or("rank_budget", kDefaultRankBudget));
  std::string out_dir_config;
  std::string prefix = experiment;
  if (top.has("output")) {
    ConfigSection out = top.section("output");
    out_dir_config = out.text_or("dir", "");
    prefix = out.text_or("prefix", prefix);
    out.finish();
  } else {
    top.find("output");
  }
  top.finish();

  const DeviationStats stats = run_deviation_mc(model, mc);
  Json rank = nullptr;
  io::Headers headers{{"config_hash", io::config_hash(config)},
                      {"experiment", experiment},
                      {"schema_version", std::to_string(kSchemaVersion)},
                      {"model", model.label()},
                      {"seed", std::to_string(mc.seed)},
                      {"n", std::to_string(mc.n)},
                      {"R", std::to_string(mc.replicates)},
                      {"sampler", to_string(mc.kind)}};
  if (!model.is_zero()) {
    const EffectiveRankResult er = effective_rank(model, rank_budget, rng::mix(mc.seed, kRankTag));
    rank = io::effective_rank_to_json(er);
    headers["op_norm"] = io::format_number(er.op_norm);
    headers["r"] = io::format_number(er.r);
  }

  const std::string dir = resolve_output_dir(ctx.out_dir, out_dir_config);
  ensure_dir(dir);
  CommandOutput output;
  const std::string csv_path = join_path(dir, prefix + "_replicates.csv");
  {
    std::ostringstream out;
    io::write_replicates_csv(out, stats.replicates, headers);
    write_text(csv_path, out.str());
  }
  Json doc = {{"schema_version", kSchemaVersion},
              {"command", "simulate"},
              {"experiment", experiment},
              {"config_hash", headers["config_hash"]},
              {"model", io::model_to_json(model)},
              {"effective_rank", rank},
              {"stats", io::stats_to_json(stats)}};
  const std::string json_path = join_path(dir, prefix + "_stats.json");
  write_text(json_path, dump(doc));
  output.files = {csv_path, json_path};
  output.summary = doc;
  output.summary["files"] = output.files;
  return output;
}

CommandOutput cmd_verify(const Json& config, const RunContext& ctx) {
  const Campaign campaign = read_campaign(config, ctx, false);
  CampaignResult result = run_campaign(config, campaign, ctx, "verify");
  CommandOutput output{result.report, result.files};
  output.summary["files"] = output.files;
  return output;
}

CommandOutput cmd_calibrate(const Json& config, const RunContext& ctx) {
  const Campaign campaign = read_campaign(config, ctx, true);
  CampaignResult result = run_campaign(config, campaign, ctx, "calibrate");

  ConstantsFile constants;
  constants.provenance = {{"experiment", campaign.experiment},
                          {"date", campaign.date.empty() ? today_utc() : campaign.date},
                          {"seed", std::to_string(campaign.seed)},
                          {"config_hash", result.report["config_hash"].get<std::string>()}};
  constants.constants[to_string(BoundTheorem::expectation_upper_thm24)] = result.gaussian.ratio_max;
  constants.constants[to_string(BoundTheorem::expectation_lower_thm24)] = result.gaussian.ratio_min;
  for (const auto& [centering, value] : result.concentration_constants) {
    constants.constants[to_string(BoundTheorem::concentration_thm25) + "." + centering] = value;
  }
  if (result.subgaussian) {
    constants.constants[to_string(BoundTheorem::subgaussian_thm27)] = result.subgaussian->ratio_max;
  }

  const std::string dir = resolve_output_dir(ctx.out_dir, campaign.out_dir_config);
  std::string path = campaign.constants_path;
  if (path.empty()) {
    path = join_path(dir, campaign.prefix + "_constants.txt");
  } else if (fs::path(path).is_relative()) {
    path = join_path(dir, path);
  }
  write_constants(path, constants);

  CommandOutput output{result.report, result.files};
  output.files.push_back(path);
  Json values = Json::object();
  for (const auto& [k, v] : constants.constants) values[k] = v;
  output.summary["constants"] = values;
  output.summary["constants_file"] = path;
  output.summary["files"] = output.files;
  return output;
}

CommandOutput cmd_report(const ReportArgs& args, const RunContext& ctx) {
  if (args.replicate_files.empty()) throw ConfigError("report: no replicate files given");
  ScalingReport report;
  Json inputs = Json::array();
  std::vector<ScalingPoint> small, large;
  for (const auto& path : args.replicate_files) {
    io::ReplicateFile file = io::read_replicates_csv_file(path);
    auto header = [&](const std::string& key) {
      auto it = file.headers.find(key);
      if (it == file.headers.end()) throw ConfigError(path + ": missing header '" + key + "'");
      return it->second;
    };
    auto number = [&](const std::string& key) {
      try {
        return std::stod(header(key));
      } catch (const std::logic_error&) {
        throw ConfigError(path + ": header '" + key + "' is not a number");
      }
    };
    GridPointResult p;
    p.model_label = header("model");
    p.n = static_cast<Eigen::Index>(number("n"));
    p.op_norm = number("op_norm");
    p.r = number("r");
    if (p.n < 1 || !(p.op_norm > 0.0)) throw ConfigError(path + ": need n >= 1 and op_norm > 0");
    p.ratio_r_n = p.r / static_cast<double>(p.n);
    p.stats = summarize(file.replicates);
    p.stats.model_label = p.model_label;
    p.stats.n = p.n;
    p.normalized_mean = p.stats.mean / rate_scale(p.op_norm, p.r, static_cast<double>(p.n));
    Json h = Json::object();
    for (const auto& [k, v] : file.headers) h[k] = v;
    h["replicates"] = file.replicates.size();
    inputs.push_back(h);
    if (p.stats.mean > 0.0) {
      const ScalingPoint sp{std::log(p.ratio_r_n), std::log(p.stats.mean / p.op_norm)};
      if (p.ratio_r_n <= kSmallRatioWindow) small.push_back(sp);
      if (p.ratio_r_n >= kLargeRatioWindow) large.push_back(sp);
    }
    report.points.push_back(std::move(p));
  }
  std::string diag;
  report.small_r = fit_scaling(small, FitRegime::r_le_n, &diag);
  if (!diag.empty()) report.diagnostics.push_back(diag);
  diag.clear();
  report.large_r = fit_scaling(large, FitRegime::r_ge_n, &diag);
  if (!diag.empty()) report.diagnostics.push_back(diag);
  report.ratio_min = report.ratio_max = report.points.front().normalized_mean;
  for (const auto& p : report.points) {
    report.ratio_min = std::min(report.ratio_min, p.normalized_mean);
    report.ratio_max = std::max(report.ratio_max, p.normalized_mean);
  }

  const std::string hash = io::config_hash(inputs);
  const std::string dir = resolve_output_dir(ctx.out_dir, "");
  ensure_dir(dir);
  ScalingBlock block = scaling_block(report);
  CommandOutput output;
  emit_scaling_plots(report, block.gaps, dir, args.prefix,
                     {{"config_hash", hash}, {"schema_version", std::to_string(kSchemaVersion)}},
                     args.svg, output.files);
  output.summary = {{"schema_version", kSchemaVersion},
                    {"command", "report"},
                    {"config_hash", hash},
                    {"inputs", inputs},
                    {"scaling", block.json},
                    {"files", output.files}};
  return output;
}

Json cmd_bound(const BoundArgs& args) {
  Json doc = {{"schema_version", kSchemaVersion}, {"command", "bound"}};
  if (args.theorem == "fixed_point") {
    const double a = required_input(args, "a", "--a");
    const double b = required_input(args, "b", "--b");
    if (!(a >= 0.0) || !(b >= 0.0)) throw ConfigError("bound: --a and --b must be nonnegative");
    doc["theorem"] = "fixed_point";
    doc["inputs"] = {{"a", a}, {"b", b}};
    doc["value"] = fixed_point_delta(a, b);
    return doc;
  }
  if (args.theorem == "confidence") {
    if (args.data_file.empty()) throw ConfigError("bound: missing required input --data");
    const double t = required_input(args, "t", "--t");
    std::string source;
    const double c = resolve_constant(args, BoundTheorem::corollary_23, source);
    const io::CsvTable table = io::read_csv_table_file(args.data_file);
    const ConfidenceReport report =
        confidence_bound(table.data, t, c, parse_geometry(args.geometry));
    doc["theorem"] = "confidence";
    doc["value"] = report.report.value;
    doc["constant"] = c;
    doc["constant_source"] = source;
    doc["n"] = table.data.rows();
    doc["d"] = table.data.cols();
    doc["r_hat"] = report.r_hat;
    doc["sigma_hat_norm"] = report.sigma_hat_norm;
    doc["mean_norm"] = report.mean_norm;
    doc["report"] = io::bound_report_to_json(report.report);
    return doc;
  }

  const BoundTheorem theorem = parse_theorem(args.theorem);
  BoundSpec spec;
  spec.theorem = theorem;
  std::string source;
  spec.constant = resolve_constant(args, theorem, source);
  for (const auto& [k, v] : args.inputs) {
    const auto& needed = required_inputs(theorem);
    if (std::find(needed.begin(), needed.end(), k) != needed.end()) spec.inputs[k] = v;
  }
  const BoundReport report = eval_bound(spec);
  doc.update(io::bound_report_to_json(report));
  doc["constant_source"] = source;
  return doc;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Monte Carlo checks and bound calculator for sample covariance deviations",
               "covbound"};
  app.require_subcommand(1);

  RunContext ctx;
  std::string config_path;
  std::vector<std::string> overrides;
  auto add_config_opts = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--out", ctx.out_dir, "output directory (overrides config and $" +
                                              std::string(kOutputDirEnv) + ")");
    sub->add_option("--workers", ctx.workers, "worker threads; results do not depend on it")
        ->check(CLI::Range(1u, 1024u));
    sub->add_option("--set", overrides, "override a config key, e.g. --set n=200");
  };
  CLI::App* simulate = app.add_subcommand("simulate", "run one deviation Monte Carlo experiment");
  add_config_opts(simulate);
  CLI::App* verify = app.add_subcommand("verify", "scaling, concentration and gap checks");
  add_config_opts(verify);
  CLI::App* calibrate = app.add_subcommand("calibrate", "fit constants and write a constants file");
  add_config_opts(calibrate);

  ReportArgs report_args;
  CLI::App* report = app.add_subcommand("report", "re-render plot data from replicate CSVs");
  report->add_option("--replicates", report_args.replicate_files, "replicate CSV files")
      ->required();
  report->add_option("--prefix", report_args.prefix, "output file prefix");
  report->add_flag("--svg", report_args.svg, "also write SVG plots");
  report->add_option("--out", ctx.out_dir, "output directory");

  BoundArgs bound_args;
  double constant = 0.0;
  CLI::App* bound = app.add_subcommand("bound", "evaluate a bound");
  bound->add_option("--theorem", bound_args.theorem,
                    "theorem name, or fixed_point / confidence")->required();
  auto* c_opt = bound->add_option("--c,--constant", constant, "absolute constant");
  bound->add_option("--constants", bound_args.constants_file, "calibrated constants file");
  bound->add_option("--data", bound_args.data_file, "sample CSV for the confidence bound");
  bound->add_option("--geometry", bound_args.geometry, "euclidean, sup_norm or one_norm");
  const std::vector<std::pair<std::string, std::string>> input_flags = {
      {"--opnorm,--op-norm", "op_norm"}, {"--r", "r"}, {"--r-tilde", "r_tilde"},
      {"--d", "d"}, {"--n", "n"}, {"--t", "t"}, {"--M,--m", "M"},
      {"--e-max-sq", "e_max_sq"}, {"--psi1", "psi1_norm"}, {"--a", "a"}, {"--b", "b"}};
  std::vector<double> input_values(input_flags.size());
  std::vector<CLI::Option*> input_opts;
  for (std::size_t i = 0; i < input_flags.size(); ++i) {
    input_opts.push_back(bound->add_option(input_flags[i].first, input_values[i]));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    Json summary;
    if (*bound) {
      if (c_opt->count()) bound_args.constant = constant;
      for (std::size_t i = 0; i < input_flags.size(); ++i) {
        if (input_opts[i]->count()) bound_args.inputs[input_flags[i].second] = input_values[i];
      }
      summary = cmd_bound(bound_args);
    } else if (*report) {
      summary = cmd_report(report_args, ctx).summary;
    } else {
      Json config = load_config(config_path);
      for (const auto& o : overrides) apply_override(config, o);
      ctx.config_dir = fs::path(config_path).parent_path().string();
      if (*simulate) summary = cmd_simulate(config, ctx).summary;
      if (*verify) summary = cmd_verify(config, ctx).summary;
      if (*calibrate) summary = cmd_calibrate(config, ctx).summary;
    }
    out << summary.dump(2) << '\n';
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const Json::exception& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace covbound::cli
