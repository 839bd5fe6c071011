#include <memory>
#include <string>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "opflow/baselines.hpp"
#include "opflow/datagen.hpp"
#include "opflow/errors.hpp"
#include "opflow/experiment.hpp"
#include "opflow/laplacian.hpp"
#include "opflow/metrics.hpp"
#include "opflow/opinion.hpp"
#include "opflow/trainer.hpp"

namespace py = pybind11;
using namespace opflow;

namespace {

TrainConfig train_config(const std::string& json) {
  return json.empty() ? TrainConfig{} : train_config_from_json(nlohmann::json::parse(json));
}

struct Model {
  std::shared_ptr<OpinionModel> model;
  TrainReport report;
};

}  // namespace

PYBIND11_MODULE(_opflow, m) {
  m.doc() = "Opinion inference on dynamic graphs";

  py::register_exception<Error>(m, "OpflowError", PyExc_RuntimeError);

  py::class_<Opinion>(m, "Opinion")
      .def(py::init(&Opinion::make), py::arg("b"), py::arg("d"), py::arg("u"), py::arg("a") = kDefaultBaseRate)
      .def_static("vacuous", &Opinion::vacuous, py::arg("a") = kDefaultBaseRate)
      .def_property_readonly("b", &Opinion::b)
      .def_property_readonly("d", &Opinion::d)
      .def_property_readonly("u", &Opinion::u)
      .def_property_readonly("a", &Opinion::a)
      .def("__repr__", [](const Opinion& w) {
        return "Opinion(b=" + std::to_string(w.b()) + ", d=" + std::to_string(w.d()) + ", u=" +
               std::to_string(w.u()) + ", a=" + std::to_string(w.a()) + ")";
      });

  m.def("discount", &discount, py::arg("referral"), py::arg("source"));
  m.def("consensus", &consensus);
  m.def("projected_probability", &projected_probability);
  m.def(
      "from_evidence",
      [](std::size_t r, std::size_t s, double w, double a) { return from_evidence({r, s, w, a}); }, py::arg("r"),
      py::arg("s"), py::arg("prior_weight") = kDefaultPriorWeight, py::arg("base_rate") = kDefaultBaseRate);

  py::class_<Graph>(m, "Graph")
      .def(py::init([](std::size_t n, const std::vector<Edge>& edges, bool directed) {
             return Graph::from_edge_list(n, edges, directed);
           }),
           py::arg("n"), py::arg("edges"), py::arg("directed") = false)
      .def_property_readonly("num_nodes", &Graph::num_nodes)
      .def_property_readonly("num_edges", &Graph::num_edges)
      .def_property_readonly("directed", &Graph::directed)
      .def_property_readonly("edges", &Graph::edges)
      .def("neighbors", [](const Graph& g, std::size_t v) {
        const auto s = g.neighbors(v);
        return std::vector<std::size_t>(s.begin(), s.end());
      });
  m.def("line_graph", [](const Graph& g) { return line_graph(g).graph; });

  m.def(
      "cheb_apply",
      [](const Graph& g, const std::vector<double>& theta, const Matrix& x, bool normalized) {
        const auto lap =
            Laplacian::build(g, normalized ? LaplacianKind::normalized : LaplacianKind::unnormalized);
        return cheb_apply(lap, ChebCoeffs{theta}, x);
      },
      py::arg("graph"), py::arg("theta"), py::arg("signal"), py::arg("normalized") = true);
  m.def(
      "lambda_max",
      [](const Graph& g, bool normalized) {
        return Laplacian::build(g, normalized ? LaplacianKind::normalized : LaplacianKind::unnormalized)
            .lambda_max();
      },
      py::arg("graph"), py::arg("normalized") = true);

  py::class_<DynamicOpinionField>(m, "OpinionField")
      .def(py::init(&DynamicOpinionField::unobserved), py::arg("times"), py::arg("nodes"))
      .def_readwrite("b", &DynamicOpinionField::b)
      .def_readwrite("d", &DynamicOpinionField::d)
      .def_readwrite("u", &DynamicOpinionField::u)
      .def_readwrite("observed", &DynamicOpinionField::observed)
      .def_property_readonly("times", &DynamicOpinionField::times)
      .def_property_readonly("nodes", &DynamicOpinionField::nodes)
      .def("at", &DynamicOpinionField::at)
      .def("set", &DynamicOpinionField::set)
      .def("hide", &DynamicOpinionField::hide)
      .def("validate", &DynamicOpinionField::validate, py::arg("tol") = kMassTolerance);
  m.def("read_opinion_csv", &read_opinion_csv);
  m.def("write_opinion_csv", &write_opinion_csv);
  m.def("random_field", &random_field, py::arg("times"), py::arg("nodes"), py::arg("observed"), py::arg("seed"));

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("trust_graph", &Dataset::trust_graph)
      .def_readonly("model_graph", &Dataset::model_graph)
      .def_readonly("window", &Dataset::window)
      .def_readonly("truth", &Dataset::truth);
  m.def(
      "generate_dataset",
      [](std::size_t arcs, std::size_t times, std::size_t window, double avg_out_degree, std::uint64_t seed) {
        DatasetSpec spec;
        spec.nodes = arcs;
        spec.avg_out_degree = avg_out_degree;
        spec.window = window;
        spec.sim.realizations = times + window - 1;
        return make_dataset(spec, seed);
      },
      py::arg("arcs"), py::arg("times"), py::arg("window") = 38, py::arg("avg_out_degree") = 4.0,
      py::arg("seed") = 0);
  m.def("load_dataset", &load_dataset);
  m.def("save_dataset", &save_dataset);

  py::class_<SplitPlan>(m, "SplitPlan")
      .def_readonly("train_nodes", &SplitPlan::train_nodes)
      .def_readonly("test_nodes", &SplitPlan::test_nodes);
  m.def("make_split", &make_split, py::arg("field"), py::arg("test_ratio"), py::arg("seed"));
  m.def("training_view", &training_view);
  m.def("test_mask", &test_mask);
  m.def(
      "inject_conflicts",
      [](const DynamicOpinionField& f, const Graph& g, double ratio, std::uint64_t seed) {
        auto res = inject_conflicts(f, g, ratio, seed);
        std::vector<std::pair<std::size_t, std::size_t>> entries;
        for (const auto& inj : res.log) entries.emplace_back(inj.t, inj.node);
        return py::make_tuple(res.field, entries);
      },
      py::arg("field"), py::arg("graph"), py::arg("ratio"), py::arg("seed"));

  py::class_<Model>(m, "Model")
      .def_property_readonly("loss_history", [](const Model& mdl) { return mdl.report.loss_history; })
      .def_property_readonly("convergence", [](const Model& mdl) { return mdl.report.convergence_reason; })
      .def("predict", [](Model& mdl, const DynamicOpinionField& f) { return predict(*mdl.model, f); });
  m.def(
      "train",
      [](const Graph& g, const DynamicOpinionField& f, const std::string& config) {
        py::gil_scoped_release release;
        auto res = train(g, f, train_config(config));
        return Model{std::move(res.model), std::move(res.report)};
      },
      py::arg("graph"), py::arg("field"), py::arg("config_json") = "");

  m.def(
      "sl_predict",
      [](const Graph& g, const DynamicOpinionField& f, const std::string& config) {
        const auto cfg =
            config.empty() ? SlBaselineConfig{} : sl_config_from_json(nlohmann::json::parse(config));
        py::gil_scoped_release release;
        return sl_predict(g, f, cfg);
      },
      py::arg("graph"), py::arg("field"), py::arg("config_json") = "");

  m.def("b_mae", &b_mae);
  m.def("u_mae", &u_mae);

  m.def(
      "run_experiment",
      [](const std::string& config) {
        const auto cfg = experiment_config_from_json(nlohmann::json::parse(config));
        std::vector<RunResult> results;
        {
          py::gil_scoped_release release;
          results = run_matrix(cfg);
        }
        nlohmann::json out = nlohmann::json::array();
        for (const auto& r : results) out.push_back(to_json(r));
        return out.dump();
      },
      py::arg("config_json"));
}
