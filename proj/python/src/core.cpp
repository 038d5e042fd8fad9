// pybind11 bindings for the plume library. Reports cross the boundary as JSON
// text and are decoded by the Python package.

#include "plume/bounds.h"
#include "plume/crossval.h"
#include "plume/data.h"
#include "plume/em.h"
#include "plume/io.h"
#include "plume/optim.h"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace plume;

namespace {

Dataset make_dataset(const Matrix& features, const Eigen::VectorXi& labels) { return {features, labels}; }

TrainConfig make_config(Index k, double gamma, double epsilon, const std::string& epsilon_mode,
                        const std::string& optimizer, const std::string& init, std::uint64_t seed, int max_em_iters,
                        int restarts) {
  TrainConfig cfg;
  cfg.k_experts = k;
  cfg.gamma = gamma;
  cfg.epsilon = epsilon;
  cfg.epsilon_mode = parse_epsilon_mode(epsilon_mode);
  cfg.optimizer = parse_optimizer(optimizer);
  cfg.init = parse_init(init);
  cfg.seed = seed;
  cfg.max_em_iters = max_em_iters;
  cfg.restarts = restarts;
  cfg.validate();
  return cfg;
}

AugmentedPoint point(const Vector& x) { return AugmentedPoint::from_features(x); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Polyhedral classifiers trained by mixture-of-experts EM";

  auto base = py::register_exception<Error>(m, "PlumeError");
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  auto data_error = py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", data_error.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init<Matrix, double>(), py::arg("weights"), py::arg("gamma"))
      .def_property_readonly("weights", &ModelParams::weights)
      .def_property_readonly("gamma", &ModelParams::gamma)
      .def_property_readonly("experts", &ModelParams::experts)
      .def_property_readonly("dim", &ModelParams::dim)
      .def("flat", &ModelParams::flat)
      .def("__eq__", &ModelParams::operator==)
      .def("__repr__", [](const ModelParams& p) {
        return "ModelParams(experts=" + std::to_string(p.experts()) + ", dim=" + std::to_string(p.dim()) +
               ", gamma=" + std::to_string(p.gamma()) + ")";
      });

  m.def("margins", &plume::margins, py::arg("params"), py::arg("features"));
  m.def("predict", &plume::predict, py::arg("params"), py::arg("features"));
  m.def(
      "gating", [](const ModelParams& p, const Vector& x) { return gating(p, point(x)); }, py::arg("params"),
      py::arg("x"));
  m.def(
      "posterior", [](const ModelParams& p, const Vector& x, int y) { return posterior(p, point(x), y); },
      py::arg("params"), py::arg("x"), py::arg("y"));
  m.def(
      "log_likelihood",
      [](const ModelParams& p, const Matrix& x, const Eigen::VectorXi& y) {
        return log_likelihood(p, make_dataset(x, y));
      },
      py::arg("params"), py::arg("features"), py::arg("labels"));
  m.def(
      "responsibilities",
      [](const ModelParams& p, const Matrix& x, const Eigen::VectorXi& y) {
        return responsibilities(p, make_dataset(x, y)).matrix();
      },
      py::arg("params"), py::arg("features"), py::arg("labels"));
  m.def(
      "q_value",
      [](const ModelParams& p, const Matrix& pi, const Matrix& x, const Eigen::VectorXi& y) {
        return q_value(p, Responsibilities(pi), make_dataset(x, y));
      },
      py::arg("params"), py::arg("pi"), py::arg("features"), py::arg("labels"));
  m.def(
      "q_gradient",
      [](const ModelParams& p, const Matrix& pi, const Matrix& x, const Eigen::VectorXi& y) {
        return q_gradient(p, Responsibilities(pi), make_dataset(x, y));
      },
      py::arg("params"), py::arg("pi"), py::arg("features"), py::arg("labels"));
  m.def(
      "q_hessian",
      [](const ModelParams& p, const Matrix& pi, const Matrix& x, const Eigen::VectorXi& y) {
        return q_hessian(p, Responsibilities(pi), make_dataset(x, y));
      },
      py::arg("params"), py::arg("pi"), py::arg("features"), py::arg("labels"));

  m.def(
      "standardize",
      [](const Matrix& x) {
        const Dataset d = standardize(make_dataset(x, Eigen::VectorXi::Ones(x.rows())));
        std::vector<std::pair<double, double>> scale;
        for (const auto& c : *d.feature_scale()) scale.emplace_back(c.shift, c.scale);
        return py::make_tuple(d.features(), scale);
      },
      py::arg("features"));

  m.def(
      "fit",
      [](const Matrix& x, const Eigen::VectorXi& y, Index k, double gamma, double epsilon,
         const std::string& epsilon_mode, const std::string& optimizer, const std::string& init, std::uint64_t seed,
         int max_em_iters, int restarts) {
        const TrainConfig cfg =
            make_config(k, gamma, epsilon, epsilon_mode, optimizer, init, seed, max_em_iters, restarts);
        const FitReport report = [&] {
          py::gil_scoped_release release;
          return fit(cfg, make_dataset(x, y));
        }();
        return py::make_tuple(report.final_params, to_json(report).dump());
      },
      py::arg("features"), py::arg("labels"), py::arg("k") = 2, py::arg("gamma") = 1.0, py::arg("epsilon") = 1e-6,
      py::arg("epsilon_mode") = "mean", py::arg("optimizer") = "bfgs", py::arg("init") = "random",
      py::arg("seed") = 0, py::arg("max_em_iters") = 500, py::arg("restarts") = 1);

  m.def(
      "cross_validate",
      [](const Matrix& x, const Eigen::VectorXi& y, std::vector<Index> k_grid, std::vector<double> gamma_grid,
         double epsilon, const std::string& optimizer, const std::string& init, std::uint64_t seed, int max_em_iters,
         int folds, int repeats, std::uint64_t cv_seed, bool stratified, bool standardize, int jobs) {
        CvOptions opt;
        opt.train = make_config(k_grid.empty() ? 2 : k_grid.front(), gamma_grid.empty() ? 1.0 : gamma_grid.front(),
                                epsilon, "mean", optimizer, init, seed, max_em_iters, 1);
        opt.k_grid = std::move(k_grid);
        opt.gamma_grid = std::move(gamma_grid);
        opt.plan = {folds, repeats, cv_seed, stratified};
        opt.standardize = standardize;
        opt.jobs = jobs;
        const CvReport report = [&] {
          py::gil_scoped_release release;
          return cross_validate(make_dataset(x, y), opt);
        }();
        return to_json(report).dump();
      },
      py::arg("features"), py::arg("labels"), py::arg("k_grid") = std::vector<Index>{2},
      py::arg("gamma_grid") = std::vector<double>{1.0}, py::arg("epsilon") = 1e-6, py::arg("optimizer") = "bfgs",
      py::arg("init") = "random", py::arg("seed") = 0, py::arg("max_em_iters") = 500, py::arg("folds") = 10,
      py::arg("repeats") = 10, py::arg("cv_seed") = 0, py::arg("stratified") = false, py::arg("standardize") = true,
      py::arg("jobs") = 1);

  m.def(
      "synthesize",
      [](Index k, Index dim, Index n, double margin, double noise, std::uint64_t seed, double offset) {
        SynthSpec spec;
        spec.k_hyperplanes = k;
        spec.dim = dim;
        spec.n_points = n;
        spec.margin = margin;
        spec.noise_flip = noise;
        spec.seed = seed;
        spec.offset = offset;
        const SynthResult r = synthesize(spec);
        return py::make_tuple(r.data.features(), r.data.labels(), r.true_params, r.flipped);
      },
      py::arg("k") = 2, py::arg("dim") = 2, py::arg("n") = 1000, py::arg("margin") = 0.0, py::arg("noise") = 0.0,
      py::arg("seed") = 0, py::arg("offset") = 1.0);

  m.def(
      "bound_for_model",
      [](const ModelParams& p, const Matrix& x, const Eigen::VectorXi& y, double delta) {
        return to_json(bound_for_model(p, make_dataset(x, y), delta)).dump();
      },
      py::arg("params"), py::arg("features"), py::arg("labels"), py::arg("delta") = 0.05);

  m.def(
      "load_csv",
      [](const std::string& path, int label_column, const std::string& label_map, std::vector<int> categorical,
         std::optional<bool> has_header) {
        CsvSchema schema;
        schema.label_column = label_column;
        if (!label_map.empty()) schema.label_mapping = parse_label_mapping(label_map);
        schema.categorical_columns = std::move(categorical);
        schema.has_header = has_header;
        const LoadResult r = load_csv(path, schema);
        return py::make_tuple(r.data.features(), r.data.labels(), r.summary.feature_names, r.summary.dropped_rows);
      },
      py::arg("path"), py::arg("label_column") = -1, py::arg("label_map") = "",
      py::arg("categorical") = std::vector<int>{}, py::arg("has_header") = py::none());

  m.def(
      "save_model",
      [](const ModelParams& p, const std::string& path) {
        save_model(ModelFile{kModelFormatVersion, p, std::nullopt, {}}, path);
      },
      py::arg("params"), py::arg("path"));
  m.def(
      "load_model", [](const std::string& path) { return load_model(path).params; }, py::arg("path"));
}
