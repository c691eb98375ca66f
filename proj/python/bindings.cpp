// Python bindings for the nplme core. Configs cross the boundary as JSON text.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "json.hpp"
#include "nplme/baselines.hpp"
#include "nplme/bench.hpp"
#include "nplme/error.hpp"
#include "nplme/estimator.hpp"
#include "nplme/hmc.hpp"
#include "nplme/kernels.hpp"

namespace py = pybind11;
using namespace nplme;
using nlohmann::json;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

PointSet to_points(const Array& a) {
  if (a.ndim() == 1) return PointSet(1, std::vector<double>(a.data(), a.data() + a.size()));
  if (a.ndim() != 2) throw InvalidInput("expected a 1-d or 2-d array");
  const auto d = static_cast<std::size_t>(a.shape(1));
  return PointSet(d, std::vector<double>(a.data(), a.data() + a.size()));
}

std::vector<double> to_vec(const Array& a) { return {a.data(), a.data() + a.size()}; }

Array to_matrix(const std::vector<double>& flat, std::size_t rows, std::size_t cols) {
  Array out({rows, cols});
  std::copy(flat.begin(), flat.end(), out.mutable_data());
  return out;
}

ExperimentConfig config_from(const std::string& text) {
  if (text.empty()) return parse_config(json::object());
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return parse_config(doc);
}

Dataset make_dataset(const Array& w, const Array& y, const std::optional<Array>& x) {
  Dataset d;
  d.w = to_vec(w);
  d.y = to_vec(y);
  if (x) d.x_latent = to_vec(*x);
  d.validate();
  return d;
}

py::dict simulate(const std::string& config, double sigma_N, std::size_t n, std::uint64_t seed) {
  const ExperimentConfig cfg = config_from(config);
  Rng rng = Rng::stream(seed, {0x51});
  const Dataset d = simulate_from_config(cfg, sigma_N, n, rng);
  py::dict out;
  out["w"] = Array(static_cast<py::ssize_t>(n), d.w.data());
  out["y"] = Array(static_cast<py::ssize_t>(n), d.y.data());
  out["x"] = Array(static_cast<py::ssize_t>(n), d.x_latent->data());
  return out;
}

py::dict fit_py(const Array& w, const Array& y, const std::string& config, std::uint64_t seed) {
  const ExperimentConfig cfg = config_from(config);
  const Dataset data = make_dataset(w, y, std::nullopt);
  const FamilyPtr model = make_family(cfg.dgp.model);
  NPLConfig npl = cfg.npl;
  npl.seed = seed;
  BootstrapEnsemble e;
  {
    py::gil_scoped_release release;
    Rng rng = Rng::stream(seed, {0xF1});
    e = fit(data, model, cfg.dgp.me, npl, rng);
  }
  py::dict out;
  out["theta"] = to_matrix(e.theta_draws, e.size(), e.dim_theta);
  out["objective"] = e.objective_values;
  out["converged"] = std::vector<bool>(e.converged_flags.begin(), e.converged_flags.end());
  out["theta_mean"] = e.mean();
  out["config_hash"] = config_hash(cfg);
  return out;
}

py::dict estimate_py(const Array& w, const Array& y, const std::optional<Array>& x, const std::string& config,
                     const std::vector<std::string>& methods, std::uint64_t seed) {
  const ExperimentConfig cfg = config_from(config);
  const Dataset data = make_dataset(w, y, x);
  for (const auto& m : methods) parse_method_list(m);
  std::vector<MethodEstimate> est;
  {
    py::gil_scoped_release release;
    Rng rng = Rng::stream(seed, {0xF2});
    est = estimate_methods(data, make_family(cfg.dgp.model), cfg.dgp.me, cfg, methods, rng);
  }
  py::dict out;
  for (const auto& e : est) {
    if (e.ok)
      out[py::str(e.method)] = e.theta;
    else
      out[py::str(e.method)] = py::none();
  }
  return out;
}

py::list bench_py(const std::string& config) {
  const ExperimentConfig cfg = config_from(config);
  RmseTable t;
  {
    py::gil_scoped_release release;
    t = run_bench(cfg);
  }
  py::list rows;
  for (const auto& r : t.rows) {
    py::dict d;
    d["method"] = r.method;
    d["me_scale"] = r.me_scale;
    d["theta_rmse"] = r.theta_rmse;
    d["y_rmse"] = r.y_rmse;
    d["count"] = r.count;
    d["failures"] = r.failures;
    rows.append(d);
  }
  return rows;
}

py::dict two_sample_py(const Array& a, const Array& b, std::size_t n_perm, std::size_t n_boot, std::uint64_t seed) {
  Rng rng(seed);
  const auto r = two_sample_test(to_points(a), to_points(b), n_perm, n_boot, rng);
  py::dict out;
  out["mmd2_u"] = r.mmd2_u;
  out["p_value"] = r.p_value;
  out["ci"] = py::make_tuple(r.ci_low, r.ci_high);
  out["bandwidth"] = r.bandwidth;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Nonparametric learning under measurement error";

  static py::exception<Error> base_exc(m, "NplmeError", PyExc_RuntimeError);
  static py::exception<ConfigError> config_exc(m, "ConfigError", base_exc.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      PyErr_SetString(config_exc.ptr(), e.what());
    } catch (const Error& e) {
      PyErr_SetString(base_exc.ptr(), e.what());
    }
  });

  m.def("mmd2_unbiased",
        [](const Array& a, const Array& b, double bandwidth) {
          return mmd2_unbiased(to_points(a), to_points(b), KernelSpec::gaussian(bandwidth));
        },
        py::arg("a"), py::arg("b"), py::arg("bandwidth"));
  m.def("mmd2_weighted",
        [](const Array& a, const Array& wa, const Array& b, const Array& wb, double bandwidth) {
          return mmd2_weighted({to_points(a), to_vec(wa)}, {to_points(b), to_vec(wb)}, KernelSpec::gaussian(bandwidth));
        },
        py::arg("a"), py::arg("wa"), py::arg("b"), py::arg("wb"), py::arg("bandwidth"));
  m.def("median_heuristic", [](const Array& a) { return median_heuristic(to_points(a)); }, py::arg("a"));
  m.def("two_sample_test", &two_sample_py, py::arg("a"), py::arg("b"), py::arg("n_perm") = 1000,
        py::arg("n_boot") = 200, py::arg("seed") = 1);

  m.def("split_rhat", &split_rhat, py::arg("chains"));
  m.def("ess_bulk", &ess_bulk, py::arg("chains"));
  m.def("ess_tail", &ess_tail, py::arg("chains"));

  m.def("nls_fit",
        [](const Array& w, const Array& y, const std::string& model) {
          return nls_fit(to_vec(w), to_vec(y), *make_family(model)).theta_hat;
        },
        py::arg("w"), py::arg("y"), py::arg("model") = "sigmoid");
  m.def("simex_fit",
        [](const Array& w, const Array& y, const std::string& model, double sigma_N, std::size_t B_sim,
           std::uint64_t seed) {
          SimexConfig cfg;
          cfg.sigma_N_assumed = sigma_N;
          cfg.B_sim = B_sim;
          Rng rng(seed);
          return simex_fit(to_vec(w), to_vec(y), *make_family(model), cfg, rng).theta_hat;
        },
        py::arg("w"), py::arg("y"), py::arg("model") = "sigmoid", py::arg("sigma_N") = 1.0, py::arg("B_sim") = 50,
        py::arg("seed") = 1);

  m.def("canonical_config", [](const std::string& c) { return to_json(config_from(c)).dump(); }, py::arg("config"));
  m.def("config_hash", [](const std::string& c) { return config_hash(config_from(c)); }, py::arg("config"));
  m.def("simulate", &simulate, py::arg("config"), py::arg("sigma_N"), py::arg("n"), py::arg("seed") = 1);
  m.def("fit", &fit_py, py::arg("w"), py::arg("y"), py::arg("config"), py::arg("seed") = 1);
  m.def("estimate_methods", &estimate_py, py::arg("w"), py::arg("y"), py::arg("x"), py::arg("config"),
        py::arg("methods"), py::arg("seed") = 1);
  m.def("run_bench", &bench_py, py::arg("config"));
}
