#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rttlab/error.hpp"
#include "rttlab/generator.hpp"
#include "rttlab/metrics.hpp"
#include "rttlab/netem.hpp"
#include "rttlab/similarity.hpp"
#include "rttlab/transfer.hpp"

namespace py = pybind11;
using namespace rttlab;

namespace {

using Series = std::vector<double>;

TrainConfig make_config(int batch_size, int epochs, std::uint64_t seed, double learning_rate) {
  TrainConfig c;
  c.batch_size = batch_size;
  c.epochs = epochs;
  c.seed = seed;
  c.adam.learning_rate = learning_rate;
  return c;
}

py::dict report_dict(const TrainReport& r) {
  py::dict d;
  d["epoch_train_mse"] = r.epoch_train_mse;
  d["test_mse"] = r.test_mse;
  d["test_smape"] = r.test_smape;
  d["seconds"] = r.seconds;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "RTT trace modeling, transfer learning, synthesis and delay emulation";

  static py::exception<Error> error_type(m, "RttlabError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(error_type.ptr(), e.what());
    }
  });

  py::class_<RttTrace>(m, "RttTrace")
      .def(py::init<>())
      .def(py::init([](Series samples, double interval_ms, std::string context) {
             return RttTrace{std::move(samples), interval_ms, std::move(context)};
           }),
           py::arg("samples"), py::arg("interval_ms") = kDefaultIntervalMs, py::arg("context") = "")
      .def_readwrite("samples", &RttTrace::samples)
      .def_readwrite("interval_ms", &RttTrace::interval_ms)
      .def_readwrite("context", &RttTrace::context)
      .def("__len__", &RttTrace::size);

  m.def("parse_trace", &parse_trace, py::arg("document"));
  m.def("serialize_trace", &serialize_trace, py::arg("trace"));
  m.def(
      "standardize",
      [](const Series& s) {
        auto r = standardize(s);
        return py::make_tuple(r.values, r.standardizer.mean, r.standardizer.std);
      },
      py::arg("series"), "Returns (values, mean, std) using the population std.");

  m.def("smape", [](const Series& a, const Series& p) { return smape(a, p); }, py::arg("actual"), py::arg("predicted"));
  m.def("smape_improvement", &smape_improvement, py::arg("smape_specialized"), py::arg("smape_finetuned"));
  m.def("pearson", [](const Series& x, const Series& y) { return pearson(x, y); }, py::arg("x"), py::arg("y"));
  m.def("percentile", [](const Series& s, double p) { return percentile(s, p); }, py::arg("series"), py::arg("p"));
  m.def(
      "dtw",
      [](const Series& a, const Series& b) {
        const auto r = dtw(a, b);
        return py::make_tuple(r.cost, r.normalized);
      },
      py::arg("a"), py::arg("b"), "Returns (cost, cost / (len(a) + len(b))).");

  py::class_<LstmArchitecture>(m, "LstmArchitecture")
      .def(py::init([](int layers, int hidden, double dropout, double sigma) {
             LstmArchitecture a{layers, hidden, dropout, {}};
             a.probact.sigma = sigma;
             a.validate();
             return a;
           }),
           py::arg("num_layers") = 2, py::arg("hidden_units") = 8, py::arg("dropout_rate") = 0.5,
           py::arg("sigma") = 1.0)
      .def_readonly("num_layers", &LstmArchitecture::num_layers)
      .def_readonly("hidden_units", &LstmArchitecture::hidden_units)
      .def_readonly("dropout_rate", &LstmArchitecture::dropout_rate)
      .def("parameter_count", &LstmArchitecture::parameter_count);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init(&make_config), py::arg("batch_size") = 16, py::arg("epochs") = 700, py::arg("seed") = 0,
           py::arg("learning_rate") = 1e-5)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("seed", &TrainConfig::seed);

  py::class_<LstmModel>(m, "LstmModel")
      .def_property_readonly("architecture", &LstmModel::architecture)
      .def_property_readonly("context", [](const LstmModel& mdl) { return mdl.metadata.context; })
      .def_property_readonly("median_ms", [](const LstmModel& mdl) { return mdl.metadata.median_ms; })
      .def_property_readonly("test_smape", [](const LstmModel& mdl) { return mdl.metadata.test_smape; })
      .def_property_readonly("weights",
                             [](const LstmModel& mdl) {
                               const auto v = mdl.weights.values();
                               return Series(v.begin(), v.end());
                             })
      .def("__eq__", [](const LstmModel& a, const LstmModel& b) {
        return a.weights == b.weights && a.standardizer.mean == b.standardizer.mean &&
               a.standardizer.std == b.standardizer.std && a.metadata == b.metadata;
      });

  m.def("save_model", &save_model, py::arg("model"));
  m.def("load_model", &load_model, py::arg("document"));

  m.def(
      "train_specialized",
      [](const RttTrace& train, const LstmArchitecture& arch, const TrainConfig& cfg, const RttTrace* test) {
        auto r = [&] {
          py::gil_scoped_release release;
          return train_specialized(train, arch, cfg, test);
        }();
        return py::make_tuple(std::move(r.model), report_dict(r.report));
      },
      py::arg("train"), py::arg("architecture"), py::arg("config"), py::arg("test") = nullptr);
  m.def(
      "fine_tune",
      [](const LstmModel& source, const RttTrace& train, int k_frozen, const TrainConfig& cfg, const RttTrace* test) {
        auto r = [&] {
          py::gil_scoped_release release;
          return fine_tune(source, train, FreezeSpec{k_frozen}, cfg, test);
        }();
        return py::make_tuple(std::move(r.model), report_dict(r.report));
      },
      py::arg("source"), py::arg("train"), py::arg("k_frozen"), py::arg("config"), py::arg("test") = nullptr);
  m.def(
      "evaluate_model",
      [](const LstmModel& model, const RttTrace& test) {
        const auto ev = evaluate_model(model, test);
        return py::make_tuple(ev.mse, ev.smape);
      },
      py::arg("model"), py::arg("test"), "Returns (mse, smape) of deterministic one-step predictions.");

  m.def(
      "generate",
      [](const LstmModel& model, int length, std::optional<double> seed_value, std::uint64_t rng_seed,
         std::optional<double> sigma) {
        GenerationSpec spec;
        spec.length = length;
        spec.seed_value = seed_value;
        spec.rng_seed = rng_seed;
        spec.sigma = sigma;
        return generate(model, spec);
      },
      py::arg("model"), py::arg("length") = 2500, py::arg("seed_value") = py::none(), py::arg("rng_seed") = 0,
      py::arg("sigma") = py::none());

  m.def(
      "run_emulation",
      [](const RttTrace& trace, std::size_t pings, double update_interval_ms, double reconfig_cost_ms,
         double uplink_fraction) {
        DelayProfile profile;
        profile.trace = trace;
        profile.update_interval_ms = update_interval_ms;
        profile.reconfig_cost_ms = reconfig_cost_ms;
        profile.uplink_fraction = uplink_fraction;
        return run_emulation(profile, matching_schedule(profile, pings));
      },
      py::arg("trace"), py::arg("pings") = 600, py::arg("update_interval_ms") = 500.0,
      py::arg("reconfig_cost_ms") = 4.0, py::arg("uplink_fraction") = 0.5,
      "Replays the trace with one ping per window, sent just after each reconfiguration hold.");
  m.def(
      "evaluate_accuracy",
      [](const Series& input, const std::vector<Series>& runs) {
        const auto report = evaluate_accuracy(input, runs);
        py::list rows;
        for (const auto& r : report.rows) {
          py::dict d;
          d["percentile"] = r.percentile;
          d["input_ms"] = r.input_value;
          d["emulated_ms"] = r.measured_value;
          d["delta_ms"] = r.abs_delta;
          d["nrmse"] = r.nrmse;
          rows.append(d);
        }
        return rows;
      },
      py::arg("input_trace"), py::arg("runs"));
}
