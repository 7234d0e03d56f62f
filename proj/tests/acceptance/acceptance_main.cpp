// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
//
//   covbound_acceptance [--workers N] [--only K]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "covbound/cli/commands.hpp"
#include "covbound/covmodel.hpp"
#include "covbound/experiments.hpp"
#include "covbound/io.hpp"
#include "covbound/opnorm.hpp"
#include "oracles.hpp"

using namespace covbound;
namespace fs = std::filesystem;

namespace {

unsigned g_workers = 1;

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

CovarianceModel identity(int d) { return build_model(spectrum::Identity{d}, NormGeometry::euclidean); }

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<GridEntry> full_grid() {
  const auto path = fs::path(COVBOUND_SOURCE_DIR) / "configs" / "full_grid.json";
  const auto config = cli::load_config(path.string());
  std::vector<GridEntry> grid;
  for (const auto& entry : config.at("models")) {
    std::vector<Eigen::Index> n;
    for (const auto& v : entry.at("n")) n.push_back(v.get<Eigen::Index>());
    grid.push_back({io::model_from_json(entry.at("model")), n});
  }
  return grid;
}

// The scaling run feeds criteria 2, 3, 6 and 10; compute it once.
struct GridRun {
  ScalingReport gaussian;
  double seconds = 0.0;
  int max_d = 0;
  Eigen::Index max_n = 0;
};

const GridRun& grid_run() {
  static const GridRun run = [] {
    GridRun out;
    const auto grid = full_grid();
    for (const auto& g : grid) {
      out.max_d = std::max(out.max_d, g.model.dimension());
      for (auto n : g.n_values) out.max_n = std::max(out.max_n, n);
    }
    ScalingOptions opts;
    opts.replicates = 200;
    opts.seed = 20240611;
    opts.workers = g_workers;
    const auto t0 = std::chrono::steady_clock::now();
    out.gaussian = verify_expectation_scaling(grid, opts);
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
  }();
  return run;
}

Outcome criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  McConfig mc;
  mc.n = 100;
  mc.replicates = 100000;
  mc.seed = 1;
  mc.workers = g_workers;
  const auto stats = run_deviation_mc(identity(1), mc);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double exact = oracle::chi2_mean_abs_deviation(100);
  const double z = std::abs(stats.mean - exact) / stats.mc_std_error_mean;
  return {z <= 3.0 && secs < 60.0,
          fmt("mean=%.6f oracle=%.6f |diff|/se=%.2f (<=3) time=%.1fs (<60)", stats.mean, exact, z, secs)};
}

Outcome criterion2() {
  const auto& run = grid_run();
  const auto& rep = run.gaussian;
  double lo = INFINITY, hi = 0.0;
  for (const auto& p : rep.points) lo = std::min(lo, p.ratio_r_n), hi = std::max(hi, p.ratio_r_n);
  const bool span = lo >= 1e-2 && hi <= 1e2 && run.max_d <= 256 && run.max_n <= 4096;
  auto ok = [](const std::optional<ScalingFit>& f, double target) {
    return f && std::abs(f->slope - target) <= 0.1 && f->r_squared >= 0.98;
  };
  const bool pass = span && ok(rep.small_r, 0.5) && ok(rep.large_r, 1.0) && run.seconds < 1200.0;
  return {pass, fmt("small slope=%.3f R2=%.4f, large slope=%.3f R2=%.4f, r/n in [%.4g, %.4g], "
                    "%zu points, time=%.1fs",
                    rep.small_r ? rep.small_r->slope : NAN, rep.small_r ? rep.small_r->r_squared : NAN,
                    rep.large_r ? rep.large_r->slope : NAN, rep.large_r ? rep.large_r->r_squared : NAN,
                    lo, hi, rep.points.size(), run.seconds)};
}

Outcome criterion3() {
  const auto& rep = grid_run().gaussian;
  const double band = rep.ratio_max / rep.ratio_min;
  return {band <= 10.0, fmt("ratio band [%.4f, %.4f], max/min=%.3f (<=10)", rep.ratio_min, rep.ratio_max, band)};
}

Outcome criterion4() {
  bool pass = true;
  std::string detail;
  for (int n : {8, 16, 32}) {
    const auto check = verify_lower_bound_large_r(identity(4 * n), n, 400, 4000 + n, g_workers);
    pass &= check.applicable && check.holds;
    detail += fmt("n=%d mean=%.4f half r/n=%.4f margin=%.4f; ", n, check.mean, check.threshold, check.margin);
  }
  return {pass, detail};
}

Outcome criterion5() {
  bool pass = true;
  std::string detail;
  struct Case {
    int d;
    Eigen::Index n;
    std::uint64_t seeds[2];
  };
  for (const Case c : {Case{4, 200, {101, 202}}, Case{64, 16, {303, 404}}}) {
    for (Centering centering : {Centering::median, Centering::mean}) {
      ConcentrationOptions opts;
      opts.centering = centering;
      opts.workers = g_workers;
      double constants[2];
      for (int s = 0; s < 2; ++s) {
        const auto fit = fit_concentration(identity(c.d), c.n, 10000, c.seeds[s], opts);
        constants[s] = fit.fitted_constant;
        for (const auto& [t, rate] : fit.exceedance_rates) {
          const double p = std::exp(-t);
          pass &= rate <= p + 2.0 * std::sqrt(p * (1 - p) / 10000.0);
        }
        if (c.d == 64) pass &= fit.regime == FitRegime::r_ge_n;
      }
      pass &= std::abs(constants[0] - constants[1]) <= 0.2 + 1e-12;
      detail += fmt("d=%d n=%ld %s C=(%.2f, %.2f); ", c.d, static_cast<long>(c.n),
                    to_string(centering).c_str(), constants[0], constants[1]);
    }
  }
  return {pass, detail};
}

Outcome criterion6() {
  const auto& rep = grid_run().gaussian;
  double worst = 0.0;
  for (const auto& p : rep.points) {
    const auto gap = median_mean_gap(p.stats, p.op_norm, p.r);
    worst = std::max(worst, gap.gap / gap.radius);
  }
  return {worst <= 3.0, fmt("worst |mean-median| / radius = %.3f (<=3) over %zu points", worst, rep.points.size())};
}

Outcome criterion7() {
  std::mt19937_64 gen(7);
  std::normal_distribution<double> z;
  std::uniform_int_distribution<int> small(-9, 9);
  auto sym = [&](int d, bool integer) {
    Eigen::MatrixXd a(d, d);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j <= i; ++j) a(i, j) = a(j, i) = integer ? small(gen) : z(gen);
    }
    return a;
  };
  double worst_rel = 0.0;
  OpNormOptions it, de;
  it.euclidean_method = OpNormMethod::eigen_iterative;
  it.tol = 1e-13;
  de.euclidean_method = OpNormMethod::eigen_dense;
  for (int k = 0; k < 200; ++k) {
    const auto a = sym(1 + k % 8, false);
    it.seed = k;
    const double x = operator_norm(a, NormGeometry::euclidean, it).value;
    const double y = operator_norm(a, NormGeometry::euclidean, de).value;
    worst_rel = std::max(worst_rel, std::abs(x - y) / y);
  }
  int enum_mismatch = 0;
  for (int d = 1; d <= 6; ++d) {
    for (int k = 0; k < 10; ++k) {
      const auto a = sym(d, true);
      enum_mismatch += operator_norm(a, NormGeometry::one_norm).value != oracle::brute_force_sign_pairs(a);
    }
  }
  int property_failures = 0;
  const NormGeometry geoms[] = {NormGeometry::euclidean, NormGeometry::sup_norm, NormGeometry::one_norm};
  for (int k = 0; k < 1000; ++k) {
    const int d = 1 + k % 8;
    const auto a = sym(d, false), b = sym(d, false);
    const double c = z(gen) * 3.0;
    const NormGeometry g = geoms[k % 3];
    const double na = operator_norm(a, g).value, nb = operator_norm(b, g).value;
    property_failures += std::abs(operator_norm(c * a, g).value - std::abs(c) * na) > 1e-12 * std::abs(c) * na;
    property_failures += operator_norm(a + b, g).value > (na + nb) * (1 + 1e-12);
  }
  return {worst_rel <= 1e-10 && enum_mismatch == 0 && property_failures == 0,
          fmt("iterative/dense worst rel=%.2e (<=1e-10), enumeration mismatches=%d/60, "
              "property failures=%d/2000",
              worst_rel, enum_mismatch, property_failures)};
}

Outcome criterion8() {
  int band_fail = 0;
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    for (int j = 0; j < 50; ++j) {
      const double a = std::pow(10.0, -3.0 + 6.0 * i / 49.0);
      const double b = std::pow(10.0, -3.0 + 6.0 * j / 49.0);
      const double delta = fixed_point_delta(a, b);
      const double ref = std::max(a, b * b);
      band_fail += delta < ref * (1 - 1e-14) || delta > 3.0 * ref;
      const double it = oracle::fixed_point_iteration(a, b, 2.0 * delta + 1.0);
      worst = std::max(worst, std::abs(it - delta) / delta);
    }
  }
  return {band_fail == 0 && worst <= 1e-12,
          fmt("band violations=%d/2500, iteration oracle worst rel=%.2e (<=1e-12)", band_fail, worst)};
}

Outcome criterion9() {
  std::mt19937_64 gen(9);
  std::normal_distribution<double> z;
  std::vector<double> xs(1000000);
  for (auto& x : xs) x = z(gen);
  const double est = empirical_orlicz_norm(xs, OrliczKind::psi2);
  const double target = std::sqrt(8.0 / 3.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int failures = 0;
  for (int k = 0; k < 100; ++k) {
    std::vector<double> b(100), a(100), scaled(100);
    const double c = 0.1 + 10.0 * u(gen);
    for (int i = 0; i < 100; ++i) {
      b[i] = z(gen);
      a[i] = b[i] * u(gen);
      scaled[i] = -c * b[i];
    }
    for (auto kind : {OrliczKind::psi1, OrliczKind::psi2}) {
      const double nb = empirical_orlicz_norm(b, kind);
      failures += std::abs(empirical_orlicz_norm(scaled, kind) - c * nb) > 1e-9 * c * nb;
      failures += empirical_orlicz_norm(a, kind) > nb * (1 + 1e-9);
    }
  }
  return {std::abs(est - target) <= 0.02 && failures == 0,
          fmt("psi2 estimate=%.4f target=%.4f (+-0.02), property failures=%d/400", est, target, failures)};
}

Outcome criterion10() {
  const auto& gauss = grid_run().gaussian;
  ScalingOptions opts;
  opts.replicates = 200;
  opts.seed = 20240611;
  opts.kind = SamplerKind::rademacher_series;
  opts.workers = g_workers;
  const auto rad = verify_expectation_scaling(full_grid(), opts);
  const double limit = 3.0 * gauss.ratio_max;
  return {rad.ratio_max <= limit,
          fmt("rademacher max ratio=%.4f, gaussian-calibrated constant=%.4f, limit=%.4f", rad.ratio_max,
              gauss.ratio_max, limit)};
}

Outcome criterion11() {
  const fs::path root = fs::temp_directory_path() / "covbound_acceptance_determinism";
  fs::remove_all(root);
  bool pass = true;
  std::string detail;
  const auto source = fs::path(COVBOUND_SOURCE_DIR) / "configs";
  struct Job {
    const char* command;
    const char* config;
    const char* file;
  };
  for (const Job job : {Job{"simulate", "simulate_spiked.json", "spiked_64_stats.json"},
                        Job{"simulate", "simulate_d1.json", "d1_exact_stats.json"},
                        Job{"verify", "verify_small_r.json", "small_r_report.json"}}) {
    std::string outputs[3];
    const char* workers[3] = {"1", "1", "8"};
    for (int k = 0; k < 3; ++k) {
      const auto dir = root / (std::string(job.config) + "_" + std::to_string(k));
      const std::string cfg = (source / job.config).string();
      const std::string out_dir = dir.string();
      const char* argv[] = {"covbound", job.command, "--config", cfg.c_str(),
                            "--out", out_dir.c_str(), "--workers", workers[k]};
      std::ostringstream out, err;
      if (cli::run(8, argv, out, err) != 0) {
        pass = false;
        detail += std::string(job.config) + " failed: " + err.str();
      }
      outputs[k] = read_file(dir / job.file);
    }
    const bool same = !outputs[0].empty() && outputs[0] == outputs[1] && outputs[0] == outputs[2];
    pass &= same;
    detail += fmt("%s %s; ", job.config, same ? "identical" : "DIFFERENT");
  }
  fs::remove_all(root);
  return {pass, detail + "workers 1, 1, 8"};
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i + 1 < argc; ++i) {
    const std::string flag = argv[i];
    if (flag == "--workers") g_workers = static_cast<unsigned>(std::stoul(argv[++i]));
    else if (flag == "--only") only = std::stoi(argv[++i]);
  }
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"d=1 exact mean vs chi-square quadrature", criterion1},
      {"scaling exponents 0.5 and 1.0", criterion2},
      {"two-sided ratio band", criterion3},
      {"lower bound at large r", criterion4},
      {"concentration constant fit", criterion5},
      {"median-mean gap", criterion6},
      {"operator-norm oracles and properties", criterion7},
      {"fixed point band and recursion", criterion8},
      {"Orlicz estimator", criterion9},
      {"subgaussian sampler ratio", criterion10},
      {"determinism across reruns and workers", criterion11},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only && static_cast<int>(i + 1) != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::printf("[%s] %2zu %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failed);
  return failed ? 1 : 0;
}
