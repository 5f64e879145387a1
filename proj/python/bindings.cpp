#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "graphfb/graph.hpp"
#include "graphfb/models.hpp"
#include "graphfb/smoothness.hpp"
#include "graphfb/spectral.hpp"
#include "graphfb/synthetic.hpp"
#include "graphfb/trainer.hpp"

namespace py = pybind11;
using namespace graphfb;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

DenseMatrix to_dense(const Array& a) {
    if (a.ndim() == 1) {
        DenseMatrix m(static_cast<std::size_t>(a.shape(0)), 1);
        std::copy(a.data(), a.data() + a.size(), m.data().begin());
        return m;
    }
    if (a.ndim() != 2) throw Error("expected a 1-d or 2-d array");
    DenseMatrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), m.data().begin());
    return m;
}

Array to_numpy(const DenseMatrix& m) {
    Array out({m.rows(), m.cols()});
    std::copy(m.data().begin(), m.data().end(), out.mutable_data());
    return out;
}

py::object from_json(const std::string& text) {
    return py::module_::import("json").attr("loads")(text);
}

std::string to_json_text(const py::object& obj) {
    return py::module_::import("json").attr("dumps")(obj).cast<std::string>();
}

ModelSpec spec_from(const py::object& obj) { return ModelSpec::from_json(to_json_text(obj)); }

std::optional<double> opt_gamma(const py::object& g) {
    if (g.is_none()) return std::nullopt;
    return g.cast<double>();
}

}  // namespace

PYBIND11_MODULE(_graphfb, m) {
    m.doc() = "Graph filterbank networks: operators, smoothness measures and training";

    py::register_exception<Error>(m, "GraphfbError", PyExc_ValueError);

    py::class_<Graph>(m, "Graph")
        .def(py::init([](std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                         const Array& features, std::vector<int> labels, std::size_t n_classes) {
                 return Graph::from_edges(n, edges, to_dense(features), std::move(labels), n_classes);
             }),
             py::arg("n_nodes"), py::arg("edges"), py::arg("features"), py::arg("labels"),
             py::arg("n_classes"))
        .def_property_readonly("n_nodes", &Graph::n_nodes)
        .def_property_readonly("n_edges", &Graph::n_edges)
        .def_property_readonly("n_features", &Graph::n_features)
        .def_property_readonly("n_classes", &Graph::n_classes)
        .def_property_readonly("degrees", &Graph::degrees)
        .def_property_readonly("features", [](const Graph& g) { return to_numpy(g.features()); })
        .def_property_readonly("labels", [](const Graph& g) {
            return std::vector<int>(g.labels().begin(), g.labels().end());
        })
        .def("edge_list", &Graph::edge_list)
        .def("__repr__", [](const Graph& g) {
            return "<Graph n_nodes=" + std::to_string(g.n_nodes()) + " n_edges=" +
                   std::to_string(g.n_edges()) + ">";
        });

    m.def("load_dataset", &load_dataset, py::arg("path"), py::arg("row_normalize") = false);
    m.def("save_canonical", &save_canonical, py::arg("graph"), py::arg("path"));
    m.def("random_graph", &random_graph, py::arg("n_nodes"), py::arg("n_features"),
          py::arg("n_classes"), py::arg("p"), py::arg("seed"));
    m.def(
        "planted_partition",
        [](std::size_t n, std::size_t c, std::size_t f, double degree, double homophily, double signal,
           std::uint64_t seed) {
            return planted_partition({n, c, f, degree, homophily, signal}, seed);
        },
        py::arg("n_nodes") = 200, py::arg("n_classes") = 4, py::arg("n_features") = 16,
        py::arg("avg_degree") = 6.0, py::arg("homophily") = 0.1, py::arg("feature_signal") = 1.0,
        py::arg("seed") = 0);

    m.def(
        "operator_matrix",
        [](const Graph& g, const std::string& kind, const py::object& gamma) {
            return to_numpy(build_operator(g, parse_operator_kind(kind), opt_gamma(gamma)).to_dense());
        },
        py::arg("graph"), py::arg("kind"), py::arg("gamma") = py::none(),
        "Dense copy of an operator such as 'L_sym' or 'hatA_rw'.");
    m.def(
        "apply_operator",
        [](const Graph& g, const std::string& kind, const Array& x, const py::object& gamma) {
            return to_numpy(apply(build_operator(g, parse_operator_kind(kind), opt_gamma(gamma)), to_dense(x)));
        },
        py::arg("graph"), py::arg("kind"), py::arg("x"), py::arg("gamma") = py::none());
    m.def(
        "eigenvalues",
        [](const Graph& g, const std::string& kind, const py::object& gamma) {
            return dense_eig(build_operator(g, parse_operator_kind(kind), opt_gamma(gamma))).values;
        },
        py::arg("graph"), py::arg("kind"), py::arg("gamma") = py::none());
    m.def("operator_kinds", [] {
        std::vector<std::string> out;
        for (auto k : all_operator_kinds()) out.emplace_back(to_string(k));
        return out;
    });

    m.def(
        "s_value",
        [](const Graph& g, const std::string& kind, const Array& x) {
            return s_value(build_operator(g, parse_operator_kind(kind)), to_dense(x));
        },
        py::arg("graph"), py::arg("kind"), py::arg("x"));
    m.def(
        "dirichlet_energy",
        [](const Graph& g, const std::string& kind, const Array& x) {
            return dirichlet_energy(build_operator(g, parse_operator_kind(kind)), to_dense(x));
        },
        py::arg("graph"), py::arg("kind"), py::arg("x"));
    m.def(
        "smoothness_report",
        [](const Graph& g, const std::string& kind, const std::string& mode) {
            return from_json(to_json(smoothness_report(g, parse_operator_kind(kind), parse_feature_mode(mode))));
        },
        py::arg("graph"), py::arg("kind") = "L_sym", py::arg("feature_mode") = "raw");

    m.def(
        "eigengap_check",
        [](const Graph& g, double gamma) {
            auto r = eigengap_check(g, gamma);
            py::dict d;
            d["ratio_lazy"] = r.ratio_lazy;
            d["ratio_renorm"] = r.ratio_renorm;
            d["holds"] = r.holds;
            return d;
        },
        py::arg("graph"), py::arg("gamma"));
    m.def(
        "eigengap_sweep",
        [](std::size_t n, std::size_t trials, std::vector<double> gammas, std::uint64_t seed) {
            auto r = eigengap_sweep(n, trials, gammas, seed);
            return py::make_tuple(r.holds, r.total);
        },
        py::arg("max_n") = 30, py::arg("trials") = 200,
        py::arg("gammas") = std::vector<double>{0.5, 1.0, 2.0}, py::arg("seed") = 0);

    m.def(
        "make_splits",
        [](std::size_t n, std::array<double, 3> ratios, std::uint64_t seed, std::size_t count) {
            return from_json(splits_to_json(make_splits(n, ratios, seed, count)));
        },
        py::arg("n_nodes"), py::arg("ratios") = std::array<double, 3>{0.48, 0.32, 0.20},
        py::arg("seed") = 0, py::arg("count") = 10);

    m.def(
        "grad_check",
        [](const Graph& g, const py::object& spec, std::uint64_t seed) {
            return model_grad_check(g, spec_from(spec), seed).max_rel_err;
        },
        py::arg("graph"), py::arg("spec"), py::arg("seed") = 0,
        "Largest relative error between analytic and finite-difference gradients.");

    m.def(
        "predict",
        [](const Graph& g, const py::object& spec, std::uint64_t seed) {
            auto s = spec_from(spec);
            auto ps = init_params(s, g.n_features(), g.n_classes(), seed);
            return to_numpy(predict_logits(s, build_model_operators(g, s), ps, g.features()));
        },
        py::arg("graph"), py::arg("spec"), py::arg("seed") = 0,
        "Logits of a freshly initialized model.");

    m.def(
        "train",
        [](const Graph& g, const py::object& spec, const py::dict& split, double lr, double weight_decay,
           std::size_t max_epochs, std::size_t patience, std::uint64_t seed) {
            Split sp{split["train"].cast<std::vector<std::size_t>>(),
                     split["val"].cast<std::vector<std::size_t>>(),
                     split["test"].cast<std::vector<std::size_t>>()};
            TrainConfig cfg{lr, weight_decay, max_epochs, patience, seed};
            const ModelSpec s = spec_from(spec);
            TrainResult r;
            {
                py::gil_scoped_release release;
                r = train(g, s, cfg, sp);
            }
            py::dict d;
            d["test_accuracy"] = r.test_accuracy;
            d["val_accuracy"] = r.val_accuracy;
            d["best_epoch"] = r.best_epoch;
            d["epochs_run"] = r.epochs_run;
            d["alphas"] = r.alphas;
            d["output_s"] = r.output_s;
            d["label_s"] = r.label_s;
            d["logits"] = to_numpy(r.best_logits);
            std::vector<double> losses;
            for (const auto& h : r.history) losses.push_back(h.train_loss);
            d["train_loss"] = losses;
            return d;
        },
        py::arg("graph"), py::arg("spec"), py::arg("split"), py::arg("lr") = 0.05,
        py::arg("weight_decay") = 5e-4, py::arg("max_epochs") = 500, py::arg("patience") = 100,
        py::arg("seed") = 0);
}
