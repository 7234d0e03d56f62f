#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "covbound/bounds.hpp"
#include "covbound/cli/commands.hpp"
#include "covbound/covmodel.hpp"
#include "covbound/errors.hpp"
#include "covbound/experiments.hpp"
#include "covbound/io.hpp"
#include "covbound/opnorm.hpp"
#include "covbound/sampler.hpp"
#include "covbound/stats.hpp"

namespace py = pybind11;
using namespace covbound;

namespace {

CovarianceModel model_from_text(const std::string& text, const std::string& base_dir) {
  return io::model_from_json(io::Json::parse(text), base_dir);
}

py::dict stats_dict(const DeviationStats& s) {
  py::dict d;
  d["replicates"] = s.replicates;
  d["mean"] = s.mean;
  d["median"] = s.median;
  d["min"] = s.min;
  d["max"] = s.max;
  d["mc_std_error_mean"] = s.mc_std_error_mean;
  d["quantiles"] = s.quantiles;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sample covariance deviation toolkit (C++ core)";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.attr("SCHEMA_VERSION") = kSchemaVersion;

  py::class_<CovarianceModel>(m, "CovarianceModel")
      .def_property_readonly("dimension", &CovarianceModel::dimension)
      .def_property_readonly("label", &CovarianceModel::label)
      .def_property_readonly("geometry",
                             [](const CovarianceModel& c) { return to_string(c.geometry()); })
      .def_property_readonly("covariance", &CovarianceModel::covariance)
      .def_property_readonly("factors", &CovarianceModel::factors)
      .def_property_readonly("eigenvalues", &CovarianceModel::eigenvalues)
      .def_property_readonly("trace", &CovarianceModel::trace)
      .def("scaled", &CovarianceModel::scaled)
      .def("to_json", [](const CovarianceModel& c) { return io::model_to_json(c).dump(); })
      .def("__repr__", [](const CovarianceModel& c) { return "<CovarianceModel " + c.label() + ">"; });

  m.def("_model_from_json", &model_from_text, py::arg("text"), py::arg("base_dir") = "");
  m.def("_from_factors",
        [](const Eigen::MatrixXd& f, const std::string& geometry, const std::string& label) {
          return CovarianceModel::from_factors(f, parse_geometry(geometry), label);
        });

  m.def(
      "effective_rank",
      [](const CovarianceModel& model, std::size_t budget, std::uint64_t seed) {
        const auto r = effective_rank(model, budget, seed);
        py::dict d;
        d["r"] = r.r;
        d["r_tilde"] = r.r_tilde;
        d["op_norm"] = r.op_norm;
        d["e_norm_x"] = r.e_norm_x;
        d["e_norm_x_sq"] = r.e_norm_x_sq;
        d["mc_std_error"] = r.mc_std_error;
        d["closed_form"] = r.closed_form;
        return d;
      },
      py::arg("model"), py::arg("mc_budget") = kDefaultRankBudget, py::arg("seed") = 0);

  m.def(
      "sample",
      [](const CovarianceModel& model, Eigen::Index n, std::uint64_t seed, const std::string& kind,
         std::uint64_t replicate) {
        return sample(parse_sampler_kind(kind), model, n, seed, replicate).data;
      },
      py::arg("model"), py::arg("n"), py::arg("seed"), py::arg("kind") = "gaussian",
      py::arg("replicate") = 0);

  m.def(
      "operator_norm",
      [](const Eigen::MatrixXd& a, const std::string& geometry, double tol) {
        const auto r = operator_norm(a, parse_geometry(geometry), tol);
        return py::make_tuple(r.value, to_string(r.method));
      },
      py::arg("matrix"), py::arg("geometry") = "euclidean",
      py::arg("tol") = kDefaultOpNormTolerance);

  m.def(
      "eval_bound",
      [](const std::string& theorem, const std::map<std::string, double>& inputs, double constant) {
        const auto rep = eval_bound(BoundSpec{parse_theorem(theorem), constant, inputs});
        return py::make_tuple(rep.value, to_string(rep.regime));
      },
      py::arg("theorem"), py::arg("inputs"), py::arg("constant") = 1.0);
  m.def("fixed_point_delta", &fixed_point_delta, py::arg("a"), py::arg("b"));
  m.def(
      "confidence_bound",
      [](const Eigen::MatrixXd& data, double t, double constant, const std::string& geometry) {
        const auto rep = confidence_bound(data, t, constant, parse_geometry(geometry));
        py::dict d;
        d["value"] = rep.report.value;
        d["r_hat"] = rep.r_hat;
        d["sigma_hat_norm"] = rep.sigma_hat_norm;
        d["mean_norm"] = rep.mean_norm;
        return d;
      },
      py::arg("data"), py::arg("t"), py::arg("constant") = 1.0, py::arg("geometry") = "euclidean");

  m.def(
      "run_deviation_mc",
      [](const CovarianceModel& model, Eigen::Index n, std::size_t replicates, std::uint64_t seed,
         const std::string& kind, unsigned workers) {
        McConfig c;
        c.n = n;
        c.replicates = replicates;
        c.seed = seed;
        c.kind = parse_sampler_kind(kind);
        c.workers = workers;
        py::gil_scoped_release release;
        auto stats = run_deviation_mc(model, c);
        py::gil_scoped_acquire acquire;
        return stats_dict(stats);
      },
      py::arg("model"), py::arg("n"), py::arg("replicates"), py::arg("seed"),
      py::arg("kind") = "gaussian", py::arg("workers") = 1);

  m.def(
      "empirical_orlicz_norm",
      [](const std::vector<double>& xs, const std::string& kind) {
        if (kind != "psi1" && kind != "psi2") throw ConfigError("kind must be psi1 or psi2");
        return empirical_orlicz_norm(xs, kind == "psi1" ? OrliczKind::psi1 : OrliczKind::psi2);
      },
      py::arg("samples"), py::arg("kind") = "psi2");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<std::string> full{"covbound"};
        full.insert(full.end(), args.begin(), args.end());
        std::vector<const char*> argv;
        for (const auto& a : full) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
