#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mrhet/aggregate.hpp"
#include "mrhet/errors.hpp"
#include "mrhet/harness.hpp"
#include "mrhet/io.hpp"
#include "mrhet/ivw.hpp"
#include "mrhet/metrics.hpp"
#include "mrhet/rng.hpp"
#include "mrhet/simulate.hpp"

namespace py = pybind11;
using namespace mrhet;

namespace {

py::dict draws_dict(const std::vector<std::string>& names, const Eigen::MatrixXd& draws) {
  py::dict d;
  d["names"] = names;
  d["draws"] = draws;
  return d;
}

py::dict ivw_dict(const IvwResult& r) {
  py::dict d;
  d["estimate"] = r.estimate;
  d["se"] = r.se;
  d["ci95"] = py::make_tuple(r.ci95.lo, r.ci95.hi);
  d["ratios"] = r.ratios;
  d["excluded"] = r.excluded;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Random-effect Bayesian Mendelian randomization with missing exposures";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<SimConfig>(m, "SimConfig")
      .def(py::init<>())
      .def_readwrite("n_total", &SimConfig::n_total)
      .def_readwrite("missing_rate", &SimConfig::missing_rate)
      .def_readwrite("iv_strength", &SimConfig::iv_strength)
      .def_readwrite("beta_true", &SimConfig::beta_true)
      .def_readwrite("maf_param", &SimConfig::maf_param)
      .def_readwrite("delta_true", &SimConfig::delta_true)
      .def_readwrite("sigma_true", &SimConfig::sigma_true)
      .def_property(
          "n_iv", [](const SimConfig& c) { return py::make_tuple(c.n_iv.l, c.n_iv.k, c.n_iv.m); },
          [](SimConfig& c, std::array<std::size_t, 3> v) { c.n_iv = {v[0], v[1], v[2]}; })
      .def_property(
          "v_range", [](const SimConfig& c) { return py::make_tuple(c.v_range.lo, c.v_range.hi); },
          [](SimConfig& c, std::array<double, 2> v) { c.v_range = {v[0], v[1]}; })
      .def_readwrite("seed", &SimConfig::seed)
      .def("validate", &SimConfig::validate)
      .def("__repr__", [](const SimConfig& c) { return "SimConfig(" + to_json(c).dump() + ")"; });

  py::class_<PriorSpec>(m, "PriorSpec")
      .def(py::init<>())
      .def_readwrite("beta_sd", &PriorSpec::beta_sd)
      .def_readwrite("alpha_sd", &PriorSpec::alpha_sd)
      .def_readwrite("delta_sd", &PriorSpec::delta_sd)
      .def_readwrite("v_sd", &PriorSpec::v_sd)
      .def_readwrite("ig_shape", &PriorSpec::ig_shape)
      .def_readwrite("ig_rate", &PriorSpec::ig_rate)
      .def_property(
          "ig_target", [](const PriorSpec& p) { return p.ig_target == IgTarget::sd ? "sd" : "variance"; },
          [](PriorSpec& p, const std::string& s) { p = prior_spec_from_json(json{{"ig_target", s}}, p); })
      .def("__repr__", [](const PriorSpec& p) { return "PriorSpec(" + to_json(p).dump() + ")"; });

  py::class_<McmcConfig>(m, "McmcConfig")
      .def(py::init<>())
      .def_readwrite("n_iter", &McmcConfig::n_iter)
      .def_readwrite("burn_in", &McmcConfig::burn_in)
      .def_readwrite("thin", &McmcConfig::thin)
      .def_readwrite("seed", &McmcConfig::seed)
      .def("kept", &McmcConfig::kept)
      .def("__repr__", [](const McmcConfig& c) { return "McmcConfig(" + to_json(c).dump() + ")"; });

  py::class_<CombinedDataset>(m, "Dataset")
      .def_property_readonly("n_a", [](const CombinedDataset& d) { return d.count(Study::A); })
      .def_property_readonly("n_b", [](const CombinedDataset& d) { return d.count(Study::B); })
      .def("__len__", [](const CombinedDataset& d) { return d.rows.size(); })
      .def("save", [](const CombinedDataset& d, const std::filesystem::path& p) { write_dataset(p, d); })
      .def("random_effects", [](const CombinedDataset& d) -> py::object {
        if (!d.truth) return py::none();
        return py::cast(d.truth->effects.v);
      });

  m.def("simulate", &simulate_dataset, py::arg("config"), "Simulate a two-study dataset.");
  m.def("load_dataset", py::overload_cast<const std::filesystem::path&>(&read_dataset), py::arg("path"));

  m.def(
      "fit",
      [](const CombinedDataset& d, const PriorSpec& p, const McmcConfig& c) {
        PosteriorDraws draws;
        {
          py::gil_scoped_release release;
          draws = run_chain(d, p, c);
        }
        return draws_dict(draws.names, draws.draws);
      },
      py::arg("data"), py::arg("priors") = PriorSpec{}, py::arg("mcmc") = McmcConfig{},
      "Run the Gibbs sampler; returns {'names', 'draws'}.");

  m.def(
      "ivw",
      [](const CombinedDataset& d) {
        const auto r = ivw_two_sample(d);
        return py::make_tuple(ivw_dict(r[0]), ivw_dict(r[1]));
      },
      py::arg("data"), "Two-sample IVW estimates for (beta1, beta2).");

  m.def(
      "fit_partitioned",
      [](const CombinedDataset& d, std::size_t j, const PriorSpec& p, const McmcConfig& c, std::size_t workers) {
        PartitionedFit fit;
        {
          py::gil_scoped_release release;
          fit = fit_partitioned(d, j, p, c, workers);
        }
        py::dict out = draws_dict(fit.aggregated.names, fit.aggregated.draws);
        out["mu_hat"] = fit.aggregated.mu_hat;
        py::list mus;
        for (const auto& s : fit.subsets) mus.append(s.mu);
        out["subset_means"] = mus;
        return out;
      },
      py::arg("data"), py::arg("subsets"), py::arg("priors") = PriorSpec{}, py::arg("mcmc") = McmcConfig{},
      py::arg("workers") = 1, "Partition, fit each subset and aggregate.");

  m.def(
      "summarize",
      [](const Eigen::VectorXd& x) {
        const Summary s = summarize(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
        py::dict d;
        d["mean"] = s.mean;
        d["sd"] = s.sd;
        d["ci95"] = py::make_tuple(s.ci95.lo, s.ci95.hi);
        return d;
      },
      py::arg("draws"));

  m.def(
      "score_replicates",
      [](const std::vector<std::tuple<double, double, double>>& reps, double beta_true) {
        std::vector<ReplicateEstimate> est;
        for (const auto& [e, lo, hi] : reps) est.push_back({e, {lo, hi}});
        const MetricsRow r = score_replicates(est, beta_true);
        py::dict d;
        d["replicates"] = r.replicates;
        d["mean"] = r.mean;
        d["sd"] = r.sd;
        d["coverage"] = r.coverage;
        d["power"] = r.power ? py::cast(*r.power) : py::none();
        return d;
      },
      py::arg("replicates"), py::arg("beta_true"), "replicates: list of (estimate, lo, hi).");

  m.def(
      "gkde2d",
      [](const Eigen::MatrixX2d& samples, std::size_t nx, std::size_t ny) {
        const DensityGrid g = gkde2d(samples, default_grid(samples, nx, ny));
        py::dict d;
        d["x_range"] = py::make_tuple(g.x.lo, g.x.hi);
        d["y_range"] = py::make_tuple(g.y.lo, g.y.hi);
        d["bandwidth"] = g.bandwidth;
        d["mode"] = g.mode();
        d["values"] = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                          g.values.data(), static_cast<Eigen::Index>(g.ny), static_cast<Eigen::Index>(g.nx))
                          .eval();
        return d;
      },
      py::arg("samples"), py::arg("nx") = 100, py::arg("ny") = 100,
      "Gaussian KDE on a padded grid; values[j, i] is the density at cell centre (x_i, y_j).");

  m.def("task_seed", &task_seed, py::arg("master_seed"), py::arg("config_index"), py::arg("replicate"),
        py::arg("subset"), py::arg("role"), "Seed of one harness task.");
  m.def("tag_word", [](const std::string& s) { return tag_word(s); });
}
