// Python bindings: config loading, the bound-constant chain, envelope
// evaluation, and the fundamental-solution evaluator.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <vector>

#include "levi/bounds.hpp"
#include "levi/config.hpp"
#include "levi/iteration.hpp"
#include "levi/kernels.hpp"
#include "levi/oracle.hpp"

namespace py = pybind11;
using namespace levi;

namespace {

KernelQuery make_query(const std::vector<double>& x, double t, const std::vector<double>& xi,
                       double tau) {
  if (x.size() != xi.size()) throw std::invalid_argument("x and xi must have the same length");
  return KernelQuery::from_points(x, t, xi, tau);
}

py::dict constants_dict(const BoundConstants& k) {
  py::dict d;
  d["n"] = k.n;
  d["alpha"] = k.alpha;
  d["kappa"] = k.kappa;
  d["M"] = k.M;
  d["N1"] = k.N1;
  d["N2"] = k.N2;
  d["beta"] = k.beta;
  d["c"] = k.c;
  d["C"] = k.C;
  d["Ctilde"] = k.Ctilde;
  d["Cbar"] = k.Cbar;
  d["Lambda"] = k.Lambda;
  d["S"] = k.S;
  d["Chat"] = k.Chat;
  d["aleph2"] = k.aleph2;
  d["aleph3"] = k.aleph3;
  d["nu"] = k.nu;
  d["d"] = k.d;
  d["mu"] = k.mu;
  d["delta"] = k.delta;
  d["C0"] = k.C0;
  d["aleph0"] = k.aleph0;
  d["aleph1"] = k.aleph1;
  d["log_C"] = k.log_C;
  d["log_Lambda"] = k.log_Lambda;
  d["log_S"] = k.log_S;
  d["log_Chat"] = k.log_Chat;
  d["log_delta"] = k.log_delta;
  d["log_aleph0"] = k.log_aleph0;
  d["log_aleph2"] = k.log_aleph2;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() =
      "Fundamental solutions of variable-coefficient parabolic operators via "
      "the frozen-coefficient iteration, with certified two-sided Gaussian "
      "envelopes.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<RunConfig>(m, "Config", "Parsed run configuration")
      .def_readonly("n", &RunConfig::n)
      .def_readonly("alpha", &RunConfig::alpha)
      .def_readonly("kappa", &RunConfig::kappa)
      .def_readonly("M", &RunConfig::M)
      .def_readonly("N1", &RunConfig::N1)
      .def_readonly("N1_auto", &RunConfig::N1_auto)
      .def_readonly("N2", &RunConfig::N2)
      .def_readonly("x_lo", &RunConfig::x_lo)
      .def_readonly("x_hi", &RunConfig::x_hi)
      .def_readonly("tau", &RunConfig::tau)
      .def_readonly("dt_max", &RunConfig::dt_max)
      .def_readonly("rho_max", &RunConfig::rho_max);

  m.def(
      "load_config",
      [](const std::string& path) {
        RunConfig cfg = load_config_file(path);
        if (cfg.N1_auto) resolve_auto_n1(cfg);
        return cfg;
      },
      py::arg("path"), "Load a configuration file (resolves N1 = auto).");
  m.def(
      "load_config_text",
      [](const std::string& text) {
        RunConfig cfg = load_config_text(text);
        if (cfg.N1_auto) resolve_auto_n1(cfg);
        return cfg;
      },
      py::arg("text"), "Parse configuration text (resolves N1 = auto).");

  py::class_<SeriesDiagnostics>(m, "SeriesDiagnostics")
      .def_readonly("terms_used", &SeriesDiagnostics::terms_used)
      .def_readonly("tail_bound", &SeriesDiagnostics::tail_bound)
      .def_readonly("log_tail_bound", &SeriesDiagnostics::log_tail_bound)
      .def_readonly("degenerate_gap", &SeriesDiagnostics::degenerate_gap)
      .def_readonly("empirical_converged", &SeriesDiagnostics::empirical_converged)
      .def_readonly("truncation_failure", &SeriesDiagnostics::truncation_failure)
      .def_readonly("composed", &SeriesDiagnostics::composed)
      .def_readonly("composition_slices", &SeriesDiagnostics::composition_slices);

  py::class_<EvalResult>(m, "EvalResult")
      .def_readonly("value", &EvalResult::value)
      .def_readonly("z_value", &EvalResult::z_value)
      .def_readonly("correction", &EvalResult::correction)
      .def_readonly("diag", &EvalResult::diag);

  m.def("constants_for", [](const RunConfig& cfg) { return constants_dict(compute_constants(*cfg.field)); },
        py::arg("config"), "The full bound-constant chain for a configured field.");
  m.def("constants_json", [](const RunConfig& cfg) { return constants_to_json(compute_constants(*cfg.field)); },
        py::arg("config"), "Constant chain as a JSON string with defining formulas.");

  m.def(
      "log_upper_envelope",
      [](const RunConfig& cfg, double dt, double rho2_scaled) {
        return log_upper_envelope(compute_constants(*cfg.field), dt, rho2_scaled);
      },
      py::arg("config"), py::arg("dt"), py::arg("rho2_scaled"),
      "log of the upper envelope at gap dt and scaled squared offset |dx|^2/dt.");
  m.def(
      "log_lower_envelope",
      [](const RunConfig& cfg, double dt, double rho2_scaled) {
        return log_lower_envelope(compute_constants(*cfg.field), dt, rho2_scaled);
      },
      py::arg("config"), py::arg("dt"), py::arg("rho2_scaled"),
      "log of the lower envelope at gap dt and scaled squared offset |dx|^2/dt.");

  m.def("gauss_kernel", &gauss_kernel, py::arg("rho2"), py::arg("dt"), py::arg("n"),
        "Scalar heat kernel (4 pi dt)^(-n/2) exp(-rho2/(4 dt)).");

  py::class_<LeviEvaluator, std::shared_ptr<LeviEvaluator>>(m, "Evaluator",
                                                            "Fundamental-solution evaluator")
      .def(py::init([](const RunConfig& cfg) {
             if (!cfg.field) throw std::invalid_argument("config has no field");
             return std::make_shared<LeviEvaluator>(cfg.field, cfg.quad, cfg.levi);
           }),
           py::arg("config"))
      .def(
          "evaluate",
          [](const LeviEvaluator& ev, const std::vector<double>& x, double t,
             const std::vector<double>& xi, double tau) {
            py::gil_scoped_release release;
            return ev.evaluate(make_query(x, t, xi, tau));
          },
          py::arg("x"), py::arg("t"), py::arg("xi"), py::arg("tau"),
          "E(x, t; xi, tau); long gaps are composed automatically.")
      .def(
          "evaluate_full",
          [](const LeviEvaluator& ev, const std::vector<double>& x, double t,
             const std::vector<double>& xi, double tau) {
            py::gil_scoped_release release;
            return ev.evaluate_full(make_query(x, t, xi, tau));
          },
          py::arg("x"), py::arg("t"), py::arg("xi"), py::arg("tau"),
          "E plus the frozen-coefficient part and series diagnostics.")
      .def(
          "parametrix",
          [](const LeviEvaluator& ev, const std::vector<double>& x, double t,
             const std::vector<double>& xi, double tau) {
            return ev.parametrix().value(make_query(x, t, xi, tau));
          },
          py::arg("x"), py::arg("t"), py::arg("xi"), py::arg("tau"),
          "Frozen-coefficient Gaussian part Z alone.")
      .def(
          "reproducing_check",
          [](const LeviEvaluator& ev, const std::vector<double>& x, double t,
             const std::vector<double>& xi, double tau, double sigma) {
            ReproducingResult r;
            {
              py::gil_scoped_release release;
              r = ev.reproducing_check(make_query(x, t, xi, tau), sigma);
            }
            return py::make_tuple(r.lhs, r.rhs, r.rel_residual);
          },
          py::arg("x"), py::arg("t"), py::arg("xi"), py::arg("tau"), py::arg("sigma"),
          "Semigroup identity at intermediate time sigma: (lhs, rhs, rel_residual).")
      .def("direct_horizon", &LeviEvaluator::direct_horizon)
      .def("constants", [](const LeviEvaluator& ev) { return constants_dict(ev.constants()); });

#ifdef LEVI_VERSION_INFO
  m.attr("__version__") = LEVI_VERSION_INFO;
#else
  m.attr("__version__") = "dev";
#endif
}
