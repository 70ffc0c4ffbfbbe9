#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "sodgp/cli.hpp"
#include "sodgp/dataio.hpp"
#include "sodgp/error.hpp"
#include "sodgp/predict.hpp"

namespace py = pybind11;
using namespace sodgp;

namespace {

struct History {
  std::vector<int> iteration;
  std::vector<double> elbo;
  std::vector<double> wall_ms;
};

History to_history(const TrainHistory& h) {
  History out;
  for (const HistoryRow& r : h.rows) {
    out.iteration.push_back(r.iteration);
    out.elbo.push_back(r.elbo.total);
    out.wall_ms.push_back(r.wall_ms);
  }
  return out;
}

// Predictive mean and variance in original units for raw inputs.
std::pair<Vector, Vector> predict_raw(const DgpModel& model, const Tensor& x, int samples, std::uint64_t seed) {
  const auto mixes = predict(model, model.standardization.apply_x(x), samples, seed);
  const double s = model.standardization.y_scale;
  Vector mean(static_cast<Eigen::Index>(mixes.size()));
  Vector var(mean.size());
  for (std::size_t i = 0; i < mixes.size(); ++i) {
    const auto& m = mixes[i];
    const double mu = m.mean();
    double second = 0.0;
    for (const Component& c : m.components) second += c.var + c.mean * c.mean;
    second /= static_cast<double>(m.components.size());
    const auto k = static_cast<Eigen::Index>(i);
    mean(k) = mu * s + model.standardization.y_mean;
    var(k) = (second - mu * mu + m.noise_var) * s * s;
  }
  return {mean, var};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Subset-of-data variational inference for GP and deep GP regression";

  py::register_exception<Error>(m, "SodgpError", PyExc_RuntimeError);

  py::class_<Dataset>(m, "Dataset")
      .def(py::init([](const Tensor& x, const Vector& y) {
             if (x.rows() != y.size()) throw py::value_error("x and y row counts differ");
             Dataset d;
             d.x = x;
             d.y = y;
             for (Eigen::Index c = 0; c < x.cols(); ++c) d.feature_names.push_back("x" + std::to_string(c));
             d.target_name = "y";
             return d;
           }),
           py::arg("x"), py::arg("y"))
      .def_readonly("x", &Dataset::x)
      .def_readonly("y", &Dataset::y)
      .def_readonly("feature_names", &Dataset::feature_names)
      .def_readonly("target_name", &Dataset::target_name)
      .def("__len__", &Dataset::rows);

  py::class_<Metrics>(m, "Metrics")
      .def_readonly("nlpp", &Metrics::nlpp)
      .def_readonly("rmse", &Metrics::rmse)
      .def("__repr__", [](const Metrics& x) {
        std::ostringstream s;
        s << "Metrics(nlpp=" << x.nlpp << ", rmse=" << x.rmse << ")";
        return s.str();
      });

  py::class_<History>(m, "TrainHistory")
      .def_readonly("iteration", &History::iteration)
      .def_readonly("elbo", &History::elbo)
      .def_readonly("wall_ms", &History::wall_ms);

  py::class_<DgpModel>(m, "Model")
      .def_property_readonly("num_layers", [](const DgpModel& d) { return d.arch.num_layers(); })
      .def_property_readonly("widths", [](const DgpModel& d) { return d.arch.widths(); })
      .def_property_readonly("subset_size", &DgpModel::subset_size)
      .def_readonly("num_train", &DgpModel::num_train)
      .def_property_readonly("parameters", [](const DgpModel& d) { return parameter_vector(d); })
      .def("predict", &predict_raw, py::arg("x"), py::arg("samples") = 50, py::arg("seed") = 0,
           "Predictive mean and variance in original units")
      .def("save", [](const DgpModel& d, const std::string& path) { save_model(d, path); })
      .def("to_json", [](const DgpModel& d) { return model_to_json(d); });

  m.def("load_csv", &load_csv, py::arg("path"), py::arg("target") = "", py::arg("header") = true);
  m.def("load_model", &load_model, py::arg("path"));

  m.def(
      "train",
      [](const Dataset& data, int hidden_layers, int subset_size, int iterations, int batch_size,
         double learning_rate, int samples, int log_every, double test_fraction, std::uint64_t seed,
         const std::string& subset_method) {
        RunConfig cfg;
        cfg.hidden_layers = hidden_layers;
        cfg.subset_size = subset_size;
        cfg.subset_method = subset_method;
        cfg.test_fraction = test_fraction;
        cfg.train.iterations = iterations;
        cfg.train.batch_size = batch_size;
        cfg.train.learning_rate = learning_rate;
        cfg.train.t_train = samples;
        cfg.train.log_every = log_every;
        cfg.train.seed = seed;
        cfg.validate();
        RunResult r = [&] {
          py::gil_scoped_release release;
          return train_run(cfg, data, seed);
        }();
        return py::make_tuple(std::move(r.model), to_history(r.history), std::move(r.split.test));
      },
      py::arg("data"), py::arg("hidden_layers") = 2, py::arg("subset_size") = 0, py::arg("iterations") = 20000,
      py::arg("batch_size") = 2000, py::arg("learning_rate") = 0.01, py::arg("samples") = 10,
      py::arg("log_every") = 100, py::arg("test_fraction") = 0.1, py::arg("seed") = 0,
      py::arg("subset_method") = "kmeans",
      "Split, standardize and train one model. Returns (model, history, test_set).");

  m.def(
      "evaluate",
      [](const DgpModel& model, const Dataset& test, int samples, std::uint64_t seed) {
        return evaluate(model, test.x, test.y, samples, seed);
      },
      py::arg("model"), py::arg("test"), py::arg("samples") = 50, py::arg("seed") = 0);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<std::string> full{"sodgp"};
        full.insert(full.end(), args.begin(), args.end());
        std::vector<const char*> argv;
        for (const auto& a : full) argv.push_back(a.c_str());
        std::ostringstream out;
        std::ostringstream err;
        const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command line tool in-process. Returns (exit_code, stdout, stderr).");
}
