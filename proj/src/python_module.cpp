#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "pmhmc/cli.hpp"
#include "pmhmc/config.hpp"
#include "pmhmc/datasets.hpp"
#include "pmhmc/diagnostics.hpp"
#include "pmhmc/estimator.hpp"
#include "pmhmc/samplers.hpp"

namespace py = pybind11;
using namespace pmhmc;

namespace {

Config config_from(const std::map<std::string, std::string>& entries) {
  Config cfg;
  for (const auto& [k, v] : entries) cfg.set(k, v);
  check_config_keys(cfg);
  return cfg;
}

/// A model plus the spec and data it was built from.
struct PyModel {
  ModelSpec spec;
  Dataset data;
  std::shared_ptr<LatentVariableModel> model;
  std::uint64_t data_seed = 1;
};

PyModel make_py_model(const std::map<std::string, std::string>& entries) {
  const Config cfg = config_from(entries);
  PyModel m;
  m.spec = model_spec_from_config(cfg);
  m.data_seed = cfg.get_size("data.seed", cfg.get_size("seed", 1));
  m.data = load_or_generate_data(cfg, m.spec);
  m.model = make_model(m.spec, m.data);
  return m;
}

py::dict evaluate_py(const PyModel& m, const Vector& theta, const py::array_t<double>& u) {
  if (u.ndim() != 3) throw std::invalid_argument("u must have shape (T, N, p)");
  const AuxShape shape{static_cast<std::size_t>(u.shape(0)), static_cast<std::size_t>(u.shape(1)),
                       static_cast<std::size_t>(u.shape(2))};
  const auto c = py::array_t<double, py::array::c_style | py::array::forcecast>::ensure(u);
  const Vector flat = Eigen::Map<const Vector>(c.data(), static_cast<Eigen::Index>(shape.size()));
  const EstimatorEvaluation e = evaluate(*m.model, theta, AuxiliaryBlock(shape, flat));
  py::dict out;
  out["log_phat"] = e.log_phat;
  out["zero_estimate"] = e.zero_estimate;
  out["per_datum_log"] = e.per_datum_log;
  out["grad_theta"] = e.grad_theta;
  py::array_t<double> gu({u.shape(0), u.shape(1), u.shape(2)});
  if (e.has_gradients) std::copy(e.grad_u.flat().data(), e.grad_u.flat().data() + shape.size(), gu.mutable_data());
  out["grad_u"] = gu;
  return out;
}

py::dict chain_to_dict(const Chain& chain) {
  const std::size_t n = chain.records.size();
  const std::size_t d = chain.dim();
  py::array_t<double> theta({n, d});
  py::array_t<double> log_phat(n), hamiltonian(n);
  py::array_t<bool> accepted(n), burn_in(n);
  auto t = theta.mutable_unchecked<2>();
  auto lp = log_phat.mutable_unchecked<1>();
  auto hm = hamiltonian.mutable_unchecked<1>();
  auto ac = accepted.mutable_unchecked<1>();
  auto bi = burn_in.mutable_unchecked<1>();
  for (std::size_t i = 0; i < n; ++i) {
    const ChainRecord& r = chain.records[i];
    for (std::size_t j = 0; j < d; ++j) t(i, j) = r.theta[static_cast<Eigen::Index>(j)];
    lp(i) = r.log_phat;
    hm(i) = r.hamiltonian;
    ac(i) = r.accepted;
    bi(i) = r.burn_in;
  }
  py::dict out;
  out["theta"] = theta;
  out["log_phat"] = log_phat;
  out["hamiltonian"] = hamiltonian;
  out["accepted"] = accepted;
  out["burn_in"] = burn_in;
  out["acceptance_rate"] = chain.acceptance_rate();
  out["step_size"] = chain.step_size;
  out["proposal_scales"] = chain.proposal_scales;
  out["seconds"] = chain.seconds;
  return out;
}

py::dict sample_py(const PyModel& m, const std::map<std::string, std::string>& entries,
                   const std::optional<Vector>& theta0) {
  const SamplerConfig cfg = sampler_config_from(config_from(entries));
  const Vector start = theta0 ? *theta0 : default_initial_theta(m.spec, m.data_seed);
  Chain chain;
  {
    py::gil_scoped_release release;
    chain = run_chain(*m.model, cfg, start);
  }
  return chain_to_dict(chain);
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
  mod.doc() = "Pseudo-marginal HMC samplers and diagnostics";

  py::register_exception<ConfigError>(mod, "ConfigError", PyExc_ValueError);
  py::register_exception<SamplerError>(mod, "SamplerError", PyExc_RuntimeError);
  py::register_exception<DiagnosticError>(mod, "DiagnosticError", PyExc_ValueError);

  py::class_<PyModel>(mod, "Model")
      .def(py::init(&make_py_model), py::arg("config"),
           "Build a model from `model.*`, `seed`, `data.seed` and `data_file` keys (string values).")
      .def_property_readonly("name", [](const PyModel& m) { return m.model->name(); })
      .def_property_readonly("dim_theta", [](const PyModel& m) { return m.model->dim_theta(); })
      .def_property_readonly("data_count", [](const PyModel& m) { return m.model->data_count(); })
      .def_property_readonly("latent_dim", [](const PyModel& m) { return m.model->latent_dim(); })
      .def_property_readonly("parameter_names", [](const PyModel& m) { return parameter_names(m.spec); })
      .def("initial_theta", [](const PyModel& m) { return default_initial_theta(m.spec, m.data_seed); })
      .def("prior_logpdf", [](const PyModel& m, const Vector& theta) { return m.model->prior_logpdf(theta); })
      .def("evaluate", &evaluate_py, py::arg("theta"), py::arg("u"),
           "log p_hat and its gradients for u of shape (T, N, p).")
      .def("posterior",
           [](const PyModel& m) -> py::object {
             const auto* g = dynamic_cast<const GaussianHierarchicalModel*>(m.model.get());
             if (!g) return py::none();
             const NormalSummary s = g->posterior();
             return py::make_tuple(s.mean, s.sd);
           },
           "(mean, sd) of the conjugate posterior for the gaussian model, else None.");

  mod.def("sample", &sample_py, py::arg("model"), py::arg("config"), py::arg("theta0") = py::none(),
          "Run one chain configured by `sampler.*` and `seed` keys.");
  mod.def("ess", &ess, py::arg("x"));
  mod.def(
      "autocorrelation",
      [](const std::vector<double>& x, std::size_t max_lag) { return autocorrelation(x, max_lag).acf; },
      py::arg("x"), py::arg("max_lag"));
  mod.def(
      "cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"pmhmc"};
        for (const auto& a : args) argv.push_back(a.c_str());
        return cli_main(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"), "Run the command-line interface; returns the exit code.");
}
