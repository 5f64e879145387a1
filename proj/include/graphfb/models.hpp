#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "graphfb/autodiff.hpp"
#include "graphfb/graph.hpp"
#include "graphfb/spectral.hpp"

namespace graphfb {

enum class Arch { Mlp, Gcn, FbGcn, FbSage };
enum class ChannelMode { TwoChannel, LpOnly, HpOnly };
enum class TransformMode { Nonlinear, Linear };

std::string_view to_string(Arch arch);
std::string_view to_string(ChannelMode mode);
std::string_view to_string(TransformMode mode);
Arch parse_arch(std::string_view name);
ChannelMode parse_channel_mode(std::string_view name);
TransformMode parse_transform_mode(std::string_view name);

struct ModelSpec {
    Arch arch = Arch::Gcn;
    std::size_t n_layers = 2;
    std::size_t hidden_dim = 32;
    /// Propagation operator of the one-channel GCN.
    OperatorKind gcn_kind = OperatorKind::HatAsym;
    /// Filter pair of FB-GCN. FB-SAGE always uses I + hatA_rw / hatL_rw.
    OperatorKind lp_kind = OperatorKind::HatAsym;
    OperatorKind hp_kind = OperatorKind::HatLsym;
    /// Only for the lazy random walk pair.
    std::optional<double> gamma;
    double dropout = 0.5;
    ChannelMode channel_mode = ChannelMode::TwoChannel;
    TransformMode transform_mode = TransformMode::Nonlinear;

    bool is_filterbank() const noexcept { return arch == Arch::FbGcn || arch == Arch::FbSage; }
    /// Throws if the combination is not legal.
    void validate() const;
    /// Short identifier used in file names, e.g. "fb-gcn" or "fb-gcn-lp_only-linear".
    std::string label() const;
    std::string to_json() const;
    static ModelSpec from_json(const std::string& text);
};

/// Trainable tensors of one model, in a fixed order.
///
/// One-channel layers own `W<l>`; filterbank layers own `W_L<l>`, `W_H<l>` and
/// the unconstrained scalars `alpha_L<l>`, `alpha_H<l>` whose sigmoid gives the
/// effective mixing weights.
struct ParamSet {
    std::vector<Parameter> tensors;
    std::string init_scheme = "glorot_uniform";
    std::uint64_t seed = 0;

    Parameter& get(std::string_view name);
    const Parameter& get(std::string_view name) const;
    bool contains(std::string_view name) const;

    /// Effective (α_L, α_H) of layer l (0-based).
    std::pair<double, double> alphas(std::size_t layer) const;
};

double glorot_bound(std::size_t fan_in, std::size_t fan_out);

/// Layer widths [F, hidden, ..., C].
std::vector<std::size_t> layer_dims(const ModelSpec& spec, std::size_t n_features,
                                    std::size_t n_classes);

ParamSet init_params(const ModelSpec& spec, std::size_t n_features, std::size_t n_classes,
                     std::uint64_t seed);

/// Operators a model needs, built once per graph.
struct ModelOperators {
    std::optional<SparseOperator> gcn;
    std::optional<SparseOperator> lp;
    std::optional<SparseOperator> hp;
};

ModelOperators build_model_operators(const Graph& graph, const ModelSpec& spec);

struct ForwardOptions {
    bool train = false;
    Rng* rng = nullptr;  // required when train is set and dropout > 0
    /// Replaces the sigmoid-parameterized mixing weights of every layer.
    std::optional<std::pair<double, double>> fixed_alphas;
};

/// Intermediate nodes of one layer. Channels a model does not compute are unset.
struct LayerTrace {
    Var lp;
    Var hp;
    Var combined;
};

struct ForwardPass {
    Var logits;
    std::vector<LayerTrace> layers;
};

ForwardPass mlp_forward(Tape& tape, const ModelSpec& spec, ParamSet& params, Var x,
                        const ForwardOptions& options);
ForwardPass gcn_forward(Tape& tape, const ModelSpec& spec, const ModelOperators& ops,
                        ParamSet& params, Var x, const ForwardOptions& options);
ForwardPass fb_gcn_forward(Tape& tape, const ModelSpec& spec, const ModelOperators& ops,
                           ParamSet& params, Var x, const ForwardOptions& options);
ForwardPass fb_sage_forward(Tape& tape, const ModelSpec& spec, const ModelOperators& ops,
                            ParamSet& params, Var x, const ForwardOptions& options);

/// Dispatches on spec.arch.
ForwardPass forward(Tape& tape, const ModelSpec& spec, const ModelOperators& ops,
                    ParamSet& params, Var x, const ForwardOptions& options);

/// Inference-mode logits as a plain matrix.
DenseMatrix predict_logits(const ModelSpec& spec, const ModelOperators& ops, ParamSet& params,
                           const DenseMatrix& x);

/// Finite-difference check of the model's parameter gradients under the
/// full-node cross-entropy loss, dropout disabled. Mixing scalars are drawn
/// at random so their sigmoid gradient is exercised away from zero.
GradCheckReport model_grad_check(const Graph& graph, const ModelSpec& spec, std::uint64_t seed,
                                 const GradCheckOptions& options = {});

std::string params_to_json(const ModelSpec& spec, const ParamSet& params);
std::pair<ModelSpec, ParamSet> params_from_json(const std::string& text);

}  // namespace graphfb
