#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>
#include <sstream>

#include "sfspec/errors.hpp"
#include "sfspec/harness.hpp"
#include "sfspec/linalg.hpp"
#include "sfspec/optimizers.hpp"
#include "sfspec/polar.hpp"
#include "sfspec/theory.hpp"
#include "sfspec/verify.hpp"

namespace py = pybind11;
using namespace sfspec;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw ConfigError("expected a 2-d array");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return Matrix(rows, cols, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Matrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

std::vector<Matrix> to_matrices(const std::vector<Array>& xs) {
  std::vector<Matrix> out;
  for (const auto& x : xs) out.push_back(to_matrix(x));
  return out;
}

py::list to_arrays(const std::vector<Matrix>& ms) {
  py::list out;
  for (const auto& m : ms) out.append(to_array(m));
  return out;
}

TheoryInputs theory_inputs(double delta, double smoothness, double diameter, std::int64_t r, double sigma,
                           std::int64_t batch, double beta, double mu, double eta, std::int64_t horizon,
                           const std::string& norm) {
  TheoryInputs in;
  in.delta = delta;
  in.smoothness = smoothness;
  in.diameter = diameter;
  in.r = r;
  in.sigma = sigma;
  in.batch = batch;
  in.beta = beta;
  in.mu = mu;
  in.eta = eta;
  in.horizon = horizon;
  in.norm_mode = parse_norm_mode(norm);
  return in;
}

py::dict step_info_dict(const StepInfo& s) {
  py::dict d;
  d["eta_t"] = s.eta_t;
  d["c"] = s.c;
  d["alpha"] = s.alpha;
  d["z_norm_before"] = s.z_norm_before;
  d["z_norm_after"] = s.z_norm_after;
  d["decay_rate"] = s.decay_rate;
  d["update_norm"] = s.update_norm;
  return d;
}

// Hyperparameters arrive as the same JSON object a run config accepts.
Hyperparams parse_hyperparams(const std::string& kind, const std::string& hp_json) {
  nlohmann::json j = {{"optimizer", kind}, {"hyperparams", nlohmann::json::parse(hp_json)}};
  return effective_hyperparams(parse_run_config(j.dump()));
}

}  // namespace

PYBIND11_MODULE(_sfspec, m) {
  m.doc() = "Schedule-free spectral optimizers, theory calculators and the experiment harness.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_FloatingPointError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def(
      "svd",
      [](const Array& a) {
        const SvdResult s = svd(to_matrix(a));
        return py::make_tuple(to_array(s.u), py::array(py::cast(s.singular_values)), to_array(s.v));
      },
      py::arg("a"), "Thin SVD (U, s, V) with A = U diag(s) V^T.");
  m.def("nuclear_norm", [](const Array& a) { return nuclear_norm(to_matrix(a)); }, py::arg("a"));
  m.def("operator_norm", [](const Array& a) { return operator_norm(to_matrix(a)); }, py::arg("a"));
  m.def("frobenius_norm", [](const Array& a) { return frobenius_norm(to_matrix(a)); }, py::arg("a"));
  m.def(
      "polar",
      [](const Array& a, const std::string& backend, int steps, bool reduced_precision) {
        PolarConfig cfg;
        cfg.steps = steps;
        cfg.reduced_precision = reduced_precision;
        return to_array(polar(to_matrix(a), parse_polar_backend(backend), cfg));
      },
      py::arg("a"), py::arg("backend") = "exact", py::arg("steps") = 5, py::arg("reduced_precision") = false,
      "Orthogonal polar factor, exact or by Newton-Schulz iteration.");
  m.def(
      "dual_pairing", [](const Array& g, const Array& u) { return dual_pairing(to_matrix(g), to_matrix(u)); },
      py::arg("g"), py::arg("u"));

  m.def(
      "stationarity_terms",
      [](double delta, double smoothness, double diameter, std::int64_t r, double sigma, std::int64_t batch,
         double beta, double mu, double eta, std::int64_t horizon, const std::string& norm) {
        const BoundTerms t = stationarity_terms(
            theory_inputs(delta, smoothness, diameter, r, sigma, batch, beta, mu, eta, horizon, norm));
        py::dict d;
        d["descent"] = t.descent;
        d["noise"] = t.noise;
        d["drift"] = t.drift;
        d["tracking"] = t.tracking;
        d["total"] = t.total();
        return d;
      },
      py::kw_only(), py::arg("delta"), py::arg("smoothness"), py::arg("diameter"), py::arg("r"),
      py::arg("sigma") = 0.0, py::arg("batch") = 1, py::arg("beta") = 0.0, py::arg("mu") = 0.0,
      py::arg("eta") = 1.0, py::arg("horizon") = 1, py::arg("norm") = "frobenius");
  m.def(
      "tuned_hyperparams",
      [](double delta, double smoothness, double diameter, std::int64_t r, double sigma, std::int64_t batch,
         double beta, std::int64_t horizon, const std::string& norm) {
        const TunedHyperparams t = tuned_hyperparams(
            theory_inputs(delta, smoothness, diameter, r, sigma, batch, beta, 0.0, 1.0, horizon, norm));
        py::dict d;
        d["mu"] = t.mu;
        d["eta"] = t.eta;
        d["alpha"] = t.alpha;
        d["predicted_bound"] = t.predicted_bound;
        return d;
      },
      py::kw_only(), py::arg("delta"), py::arg("smoothness"), py::arg("diameter"), py::arg("r"),
      py::arg("sigma") = 0.0, py::arg("batch") = 1, py::arg("beta") = 0.0, py::arg("horizon") = 1,
      py::arg("norm") = "frobenius");
  m.def("z_norm_cap", &z_norm_cap, py::arg("z0_norm"), py::arg("t"), py::arg("eta"), py::arg("lam"), py::arg("m"),
        py::arg("n"));
  m.def("steady_state_rms", &steady_state_rms, py::arg("alpha"), py::arg("eta"), py::arg("lam"));
  m.def("decay_at_y_growth", &decay_at_y_growth, py::arg("beta"), py::arg("eta"), py::arg("lam"));
  m.def(
      "state_size",
      [](const std::string& kind, std::int64_t rows, std::int64_t cols) {
        return state_size(parse_optimizer_kind(kind), rows, cols);
      },
      py::arg("optimizer"), py::arg("m"), py::arg("n"));

  m.def(
      "_run",
      [](const std::string& config_json) {
        const RunConfig cfg = parse_run_config(config_json);
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run(cfg);
        }
        std::ostringstream csv;
        write_trajectory_csv(csv, r.records);
        return py::make_tuple(summary_json(r.summary), csv.str(), resolved_config_json(cfg));
      },
      py::arg("config_json"));
  m.def("_predict", &predict, py::arg("calc"), py::arg("inputs_json"));
  m.def(
      "_verify", [](const std::string& suite) { return report_json(verify(suite)); }, py::arg("suite"));

  py::class_<Optimizer>(m, "_Optimizer")
      .def(py::init([](const std::string& kind, const std::vector<Array>& params, const std::string& hp_json) {
             std::vector<bool> is_matrix;
             for (const auto& p : params) is_matrix.push_back(p.ndim() == 2 && p.shape(0) > 1 && p.shape(1) > 1);
             return Optimizer(parse_optimizer_kind(kind), parse_hyperparams(kind, hp_json), to_matrices(params),
                              is_matrix);
           }),
           py::arg("kind"), py::arg("params"), py::arg("hyperparams_json"))
      .def("step",
           [](Optimizer& o, const std::vector<Array>& grads) {
             py::list out;
             for (const auto& s : o.step(to_matrices(grads))) out.append(step_info_dict(s));
             return out;
           })
      .def("set_mode",
           [](Optimizer& o, const std::string& mode) {
             if (mode != "train" && mode != "eval") throw ConfigError("mode must be 'train' or 'eval'");
             o.set_mode(mode == "eval" ? Mode::eval : Mode::train);
           })
      .def("live", [](const Optimizer& o) { return to_arrays(o.live()); })
      .def("x", [](const Optimizer& o) { return to_arrays(o.x()); })
      .def("z", [](const Optimizer& o) { return to_arrays(o.z()); });
}
