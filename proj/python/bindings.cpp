#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "bscen/data.hpp"
#include "bscen/errors.hpp"
#include "bscen/gibbs.hpp"
#include "bscen/girf.hpp"
#include "bscen/io.hpp"
#include "bscen/linear_oracle.hpp"
#include "bscen/pgas.hpp"
#include "bscen/restrictions.hpp"
#include "commands.hpp"

namespace py = pybind11;
using namespace bscen;

namespace {

// Retained draws of one chain.
struct Posterior {
  std::vector<ForecastModel> models;
  std::vector<Eigen::MatrixXd> coefficients;  // linear backend: n x (k + 1), intercept last
  std::vector<Eigen::MatrixXd> sigma;
};

py::array_t<double> stack_draws(const std::vector<Eigen::MatrixXd>& draws) {
  if (draws.empty()) return py::array_t<double>(std::vector<py::ssize_t>{0, 0, 0});
  const auto rows = draws.front().rows(), cols = draws.front().cols();
  py::array_t<double> out({static_cast<py::ssize_t>(draws.size()), static_cast<py::ssize_t>(rows), static_cast<py::ssize_t>(cols)});
  auto v = out.mutable_unchecked<3>();
  for (std::size_t d = 0; d < draws.size(); ++d)
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) v(static_cast<py::ssize_t>(d), i, j) = draws[d](i, j);
  return out;
}

Posterior estimate(const Panel& panel, const std::string& backend, int n_burn, int n_save, int thin, std::uint64_t seed,
                   int trees, bool heteroskedastic) {
  SamplerConfig c;
  if (backend == "linear") {
    c.backend = Backend::linear;
  } else if (backend == "bart") {
    c.backend = Backend::bart;
  } else {
    throw InputError("backend must be 'linear' or 'bart'");
  }
  c.n_burn = n_burn;
  c.n_save = n_save;
  c.thin = thin;
  c.seed = seed;
  c.trees = trees;
  c.heteroskedastic = heteroskedastic;
  c.validate();
  Posterior post;
  ChainTask task;
  task.on_draw = [&](int, const ModelState& st, Rng&) {
    post.models.push_back(st.snapshot());
    post.sigma.push_back(st.cov.Sigma);
    if (const auto* lin = std::get_if<LinearBackend>(&st.mean)) {
      Eigen::MatrixXd coef(lin->coef.A.rows(), lin->coef.A.cols() + 1);
      coef << lin->coef.A, lin->coef.intercept;
      post.coefficients.push_back(coef);
    }
  };
  py::gil_scoped_release release;
  run_chain(c, panel, task);
  return post;
}

Eigen::VectorXd origin_stack(const Panel& panel, std::optional<Eigen::Index> origin) {
  return panel.lag_stack(origin.value_or(panel.T() - 1));
}

}  // namespace

PYBIND11_MODULE(_bscen, m) {
  m.doc() = "Bayesian scenario analysis with linear or tree-ensemble conditional means";

  const auto& base_error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InputError>(m, "InputError", base_error.ptr());
  py::register_exception<DomainError>(m, "DomainError", base_error.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base_error.ptr());

  py::class_<Panel>(m, "Panel")
      .def_readonly("y", &Panel::y)
      .def_readonly("x", &Panel::x)
      .def_readonly("presample", &Panel::presample)
      .def_readonly("names", &Panel::names)
      .def_readonly("p", &Panel::p)
      .def_property_readonly("T", &Panel::T)
      .def_property_readonly("n", &Panel::n)
      .def_property_readonly("dates",
                             [](const Panel& p) {
                               std::vector<std::string> out;
                               for (const auto& q : p.dates) out.push_back(q.str());
                               return out;
                             })
      .def("lag_stack", &Panel::lag_stack, py::arg("t"))
      .def("full_y", &Panel::full_y);

  m.def("panel_from_matrix",
        [](const Eigen::MatrixXd& y, int p, std::vector<std::string> names) { return panel_from_matrix(y, p, std::move(names)); },
        py::arg("y"), py::arg("p"), py::arg("names") = std::vector<std::string>{});
  m.def("load_csv", &load_csv, py::arg("path"), py::arg("transforms") = std::map<std::string, int>{}, py::arg("p") = 4);

  py::class_<LinearSystem>(m, "LinearSystem")
      .def(py::init([](Eigen::MatrixXd A, Eigen::VectorXd c, Eigen::MatrixXd Sigma, std::optional<Eigen::MatrixXd> H_inv,
                       std::optional<Eigen::VectorXd> x_init) {
             LinearSystem s;
             s.A = std::move(A);
             s.c = std::move(c);
             s.Sigma = std::move(Sigma);
             s.H_inv = H_inv ? *H_inv : StructuralFactor::recursive(s.Sigma).H_inv;
             s.x_init = x_init ? *x_init : Eigen::VectorXd::Zero(s.A.cols());
             return s;
           }),
           py::arg("A"), py::arg("c"), py::arg("Sigma"), py::arg("H_inv") = py::none(), py::arg("x_init") = py::none())
      .def_readwrite("A", &LinearSystem::A)
      .def_readwrite("c", &LinearSystem::c)
      .def_readwrite("Sigma", &LinearSystem::Sigma)
      .def_readwrite("H_inv", &LinearSystem::H_inv)
      .def_readwrite("x_init", &LinearSystem::x_init)
      .def("stable", &LinearSystem::stable);

  py::class_<GaussianPath>(m, "GaussianPath")
      .def_readonly("mean", &GaussianPath::mean)
      .def_readonly("cov", &GaussianPath::cov)
      .def("mean_matrix", &GaussianPath::mean_matrix)
      .def("sd_matrix", &GaussianPath::sd_matrix)
      .def("quantile", &GaussianPath::quantile, py::arg("prob"));

  py::class_<RestrictionSet>(m, "RestrictionSet")
      .def(py::init([](int H) { return RestrictionSet::none(H); }), py::arg("H"))
      .def_property_readonly("H", &RestrictionSet::H)
      .def(
          "add_obs",
          [](RestrictionSet& s, int h, const Eigen::RowVectorXd& w, double target, double variance) {
            s.at(h).obs.append(w, target, variance);
          },
          py::arg("h"), py::arg("weights"), py::arg("target"), py::arg("variance") = kHardVariance)
      .def(
          "add_shock",
          [](RestrictionSet& s, int h, const Eigen::RowVectorXd& w, double target, double variance) {
            s.at(h).shock.append(w, target, variance);
          },
          py::arg("h"), py::arg("weights"), py::arg("target"), py::arg("variance") = kHardVariance);

  m.def(
      "load_restrictions",
      [](const std::string& text, const Panel& panel, const Eigen::MatrixXd& Sigma, int horizon) {
        return parse_restrictions(text, horizon).resolve(panel.names, Sigma, panel.y.bottomRows(1).transpose());
      },
      py::arg("text"), py::arg("panel"), py::arg("Sigma"), py::arg("horizon") = 0,
      "Resolve a restriction file (JSON text) against a panel and a covariance draw.");

  m.def("unconditional_path", &unconditional_path, py::arg("system"), py::arg("H"));
  m.def("closed_form_conditional_forecast", &closed_form_conditional_forecast, py::arg("system"), py::arg("restrictions"),
        py::arg("H"));
  m.def("closed_form_irf", &closed_form_irf, py::arg("system"), py::arg("shock"), py::arg("size"), py::arg("H"));
  m.def("simulate_linear",
        [](const LinearSystem& sys, Eigen::Index T, std::uint64_t seed, Eigen::Index burn) {
          Rng rng(seed);
          return simulate_linear(sys, T, rng, burn);
        },
        py::arg("system"), py::arg("T"), py::arg("seed") = 1, py::arg("burn") = 200);
  m.def("standard_normal_quantile", &standard_normal_quantile, py::arg("prob"));

  py::class_<Posterior>(m, "Posterior")
      .def("__len__", [](const Posterior& p) { return p.models.size(); })
      .def_property_readonly("sigma", [](const Posterior& p) { return stack_draws(p.sigma); })
      .def_property_readonly("coefficients", [](const Posterior& p) { return stack_draws(p.coefficients); });

  m.def("estimate", &estimate, py::arg("panel"), py::arg("backend") = "bart", py::arg("n_burn") = 2000,
        py::arg("n_save") = 3000, py::arg("thin") = 1, py::arg("seed") = 1, py::arg("trees") = 250,
        py::arg("heteroskedastic") = true);

  m.def(
      "conditional_forecast",
      [](const Posterior& post, const Panel& panel, const RestrictionSet& set, int particles, std::uint64_t seed,
         std::optional<Eigen::Index> origin, bool smoothed) {
        PgasOptions opt;
        opt.particles = particles;
        ForecastDraws draws;
        {
          py::gil_scoped_release release;
          Rng rng(seed);
          draws = forecast(post.models, origin_stack(panel, origin), set, opt, rng);
        }
        return stack_draws(smoothed ? draws.smoothed : draws.paths);
      },
      py::arg("posterior"), py::arg("panel"), py::arg("restrictions"), py::arg("particles") = 10, py::arg("seed") = 1,
      py::arg("origin") = py::none(), py::arg("smoothed") = false,
      "Draws x H x n array of restricted forecast paths, one per retained draw.");

  m.def(
      "sgirf",
      [](const Posterior& post, const Panel& panel, Eigen::Index shock, std::vector<double> sizes, int H,
         std::vector<Eigen::Index> origins, bool expectation, const std::string& mode, bool scale, int particles,
         std::uint64_t seed) {
        GirfSpec spec;
        spec.shock = shock;
        spec.sizes = std::move(sizes);
        spec.H = H;
        spec.origins = std::move(origins);
        spec.expectation = expectation;
        spec.scale_by_size = scale;
        if (mode == "recursive") {
          spec.mode = GirfMode::recursive;
        } else if (mode != "pgas") {
          throw InputError("mode must be 'pgas' or 'recursive'");
        }
        PgasOptions opt;
        opt.particles = particles;
        GirfResult res;
        {
          py::gil_scoped_release release;
          res = spec.mode == GirfMode::recursive ? sgirf_recursive(spec, post.models, panel, seed)
                                                 : sgirf(spec, post.models, panel, opt, seed);
        }
        py::list out;
        for (const auto& per_size : res.averaged) out.append(stack_draws(per_size));
        return out;
      },
      py::arg("posterior"), py::arg("panel"), py::arg("shock"), py::arg("sizes") = std::vector<double>{1.0},
      py::arg("H") = 20, py::arg("origins") = std::vector<Eigen::Index>{}, py::arg("expectation") = false,
      py::arg("mode") = "pgas", py::arg("scale") = true, py::arg("particles") = 10, py::arg("seed") = 1,
      "Structural GIRFs: one draws x H x n array per shock size, averaged over origins.");

  m.def(
      "run_command",
      [](const std::string& command, const std::filesystem::path& config, std::optional<std::uint64_t> seed,
         std::optional<std::filesystem::path> out) {
        cli::CommandOptions opt;
        opt.config = config;
        opt.seed = seed;
        opt.out = std::move(out);
        py::gil_scoped_release release;
        cli::run_command(command, opt);
      },
      py::arg("command"), py::arg("config"), py::arg("seed") = py::none(), py::arg("out") = py::none());
}
