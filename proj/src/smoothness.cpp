#include "graphfb/smoothness.hpp"

#include <iostream>

#include <nlohmann/json.hpp>

namespace graphfb {

namespace {

// Above this many stored entries the energy sums switch to compensated
// accumulation so table values stay stable in the third decimal.
constexpr std::size_t kCompensatedNnz = 100000;

class Accumulator {
public:
    explicit Accumulator(bool compensated) : compensated_(compensated) {}

    void add(double v) {
        if (!compensated_) {
            sum_ += v;
            return;
        }
        const double y = v - carry_;
        const double t = sum_ + y;
        carry_ = (t - sum_) - y;
        sum_ = t;
    }

    double value() const { return sum_; }

private:
    bool compensated_;
    double sum_ = 0.0;
    double carry_ = 0.0;
};

}  // namespace

std::string_view to_string(FeatureMode mode) {
    return mode == FeatureMode::Raw ? "raw" : "rownorm";
}

FeatureMode parse_feature_mode(std::string_view name) {
    if (name == "raw") return FeatureMode::Raw;
    if (name == "rownorm" || name == "row-normalized") return FeatureMode::RowNormalized;
    throw Error("unknown feature mode '" + std::string(name) + "' (expected raw or rownorm)");
}

double dirichlet_energy(const SparseOperator& op, const DenseMatrix& x) {
    if (x.rows() != op.n()) {
        throw Error("dirichlet_energy: operator is " + std::to_string(op.n()) +
                    " wide but signal has " + std::to_string(x.rows()) + " rows");
    }
    if (!is_laplacian_kind(op.kind())) {
        std::cerr << "warning: dirichlet energy measured with non-Laplacian operator "
                  << to_string(op.kind()) << "\n";
    }
    const DenseMatrix lx = apply(op, x);
    const bool compensated = op.nnz() > kCompensatedNnz;
    double total = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) {
        Accumulator col(compensated);
        for (std::size_t r = 0; r < x.rows(); ++r) col.add(x(r, c) * lx(r, c));
        total += col.value();
    }
    return total;
}

double signal_energy(const DenseMatrix& x) {
    const bool compensated = x.size() > kCompensatedNnz;
    double total = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) {
        Accumulator col(compensated);
        for (std::size_t r = 0; r < x.rows(); ++r) col.add(x(r, c) * x(r, c));
        total += col.value();
    }
    return total;
}

Energies energies(const SparseOperator& op, const DenseMatrix& x) {
    Energies e;
    e.signal = signal_energy(x);
    if (!(e.signal > 0.0)) throw Error("zero signal: S-value undefined");
    e.dirichlet = dirichlet_energy(op, x);
    e.non_smooth = e.signal - e.dirichlet;
    e.s = e.dirichlet / e.signal;
    return e;
}

double s_value(const SparseOperator& op, const DenseMatrix& x) { return energies(op, x).s; }

DenseMatrix one_hot(std::span<const int> labels, std::size_t n_classes) {
    DenseMatrix y(labels.size(), n_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= n_classes) {
            throw Error("one_hot: label " + std::to_string(labels[i]) + " outside [0, " +
                        std::to_string(n_classes) + ")");
        }
        y(i, static_cast<std::size_t>(labels[i])) = 1.0;
    }
    return y;
}

SmoothnessReport smoothness_report(const Graph& graph, OperatorKind kind, FeatureMode mode,
                                   std::string dataset) {
    const auto op = build_operator(graph, kind);
    SmoothnessReport r;
    r.dataset = std::move(dataset);
    r.operator_kind = kind;
    r.feature_mode = mode;
    r.feature = energies(op, mode == FeatureMode::Raw ? graph.features()
                                                      : row_normalize(graph.features()));
    r.label = energies(op, one_hot(graph.labels(), graph.n_classes()));
    r.feature_s = r.feature.s;
    r.label_s = r.label.s;
    r.diff = r.label_s - r.feature_s;
    return r;
}

std::string to_json(const SmoothnessReport& report) {
    auto energies_json = [](const Energies& e) {
        return nlohmann::json{{"E_S", e.dirichlet}, {"E", e.signal}, {"E_NS", e.non_smooth}};
    };
    nlohmann::json j = {
        {"dataset", report.dataset},
        {"operator", std::string(to_string(report.operator_kind))},
        {"feature_S", report.feature_s},
        {"label_S", report.label_s},
        {"diff", report.diff},
        {"feature_mode", std::string(to_string(report.feature_mode))},
        {"energies", {{"feature", energies_json(report.feature)},
                      {"label", energies_json(report.label)}}},
    };
    return j.dump(2);
}

}  // namespace graphfb
