#pragma once

#include <span>
#include <string>
#include <string_view>

#include "graphfb/dense.hpp"
#include "graphfb/graph.hpp"
#include "graphfb/spectral.hpp"

namespace graphfb {

enum class FeatureMode { Raw, RowNormalized };

std::string_view to_string(FeatureMode mode);
FeatureMode parse_feature_mode(std::string_view name);

/// Energies of one signal block relative to an operator.
struct Energies {
    double dirichlet = 0.0;   // E_S = tr(Xᵀ L X)
    double signal = 0.0;      // E   = tr(Xᵀ X)
    double non_smooth = 0.0;  // E_NS = E - E_S, may be negative
    double s = 0.0;           // E_S / E
};

/// tr(Xᵀ M X). Intended for Laplacian kinds; other kinds are accepted so
/// affinity operators can be probed too.
double dirichlet_energy(const SparseOperator& op, const DenseMatrix& x);
double signal_energy(const DenseMatrix& x);

/// Full breakdown; throws on a zero signal.
Energies energies(const SparseOperator& op, const DenseMatrix& x);
double s_value(const SparseOperator& op, const DenseMatrix& x);

DenseMatrix one_hot(std::span<const int> labels, std::size_t n_classes);

struct SmoothnessReport {
    std::string dataset;
    OperatorKind operator_kind = OperatorKind::Lsym;
    FeatureMode feature_mode = FeatureMode::Raw;
    Energies feature;
    Energies label;
    double feature_s = 0.0;
    double label_s = 0.0;
    double diff = 0.0;  // label_s - feature_s
};

SmoothnessReport smoothness_report(const Graph& graph, OperatorKind kind, FeatureMode mode,
                                   std::string dataset = {});

std::string to_json(const SmoothnessReport& report);

}  // namespace graphfb
