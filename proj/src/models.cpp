#include "graphfb/models.hpp"

#include <cmath>
#include <cstdio>
#include <functional>

#include <nlohmann/json.hpp>

namespace graphfb {

using nlohmann::json;

std::string_view to_string(Arch arch) {
    switch (arch) {
        case Arch::Mlp: return "mlp";
        case Arch::Gcn: return "gcn";
        case Arch::FbGcn: return "fb-gcn";
        case Arch::FbSage: return "fb-sage";
    }
    return "?";
}

std::string_view to_string(ChannelMode mode) {
    switch (mode) {
        case ChannelMode::TwoChannel: return "two_channel";
        case ChannelMode::LpOnly: return "lp_only";
        case ChannelMode::HpOnly: return "hp_only";
    }
    return "?";
}

std::string_view to_string(TransformMode mode) {
    return mode == TransformMode::Nonlinear ? "nonlinear" : "linear";
}

Arch parse_arch(std::string_view name) {
    for (Arch a : {Arch::Mlp, Arch::Gcn, Arch::FbGcn, Arch::FbSage})
        if (to_string(a) == name) return a;
    throw Error("unknown model '" + std::string(name) + "' (expected mlp, gcn, fb-gcn, fb-sage)");
}

ChannelMode parse_channel_mode(std::string_view name) {
    for (ChannelMode m : {ChannelMode::TwoChannel, ChannelMode::LpOnly, ChannelMode::HpOnly})
        if (to_string(m) == name) return m;
    throw Error("unknown channel mode '" + std::string(name) + "'");
}

TransformMode parse_transform_mode(std::string_view name) {
    if (name == "nonlinear") return TransformMode::Nonlinear;
    if (name == "linear") return TransformMode::Linear;
    throw Error("unknown transform mode '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// ModelSpec
// ---------------------------------------------------------------------------

void ModelSpec::validate() const {
    if (n_layers == 0) throw Error("model: n_layers must be at least 1");
    if (hidden_dim == 0) throw Error("model: hidden_dim must be at least 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw Error("model: dropout must lie in [0, 1)");
    if (!is_filterbank()) {
        if (channel_mode != ChannelMode::TwoChannel) {
            throw Error("model: channel mode " + std::string(to_string(channel_mode)) +
                        " is only legal for filterbank models");
        }
        if (transform_mode != TransformMode::Nonlinear) {
            throw Error("model: linear transform mode is only legal for filterbank models");
        }
    }
    if (arch == Arch::FbGcn) {
        if (!is_reconstruction_pair(lp_kind, hp_kind)) {
            throw Error("model: " + std::string(to_string(lp_kind)) + " / " +
                        std::string(to_string(hp_kind)) + " is not a perfect-reconstruction pair");
        }
        if (is_gamma_kind(lp_kind) != gamma.has_value()) {
            throw Error("model: gamma must be given exactly when the filter pair is lazy");
        }
    }
    if (arch == Arch::Gcn && is_gamma_kind(gcn_kind) != gamma.has_value()) {
        throw Error("model: gamma must be given exactly when the GCN operator takes one");
    }
}

std::string ModelSpec::label() const {
    std::string s(to_string(arch));
    if (channel_mode != ChannelMode::TwoChannel) s += "-" + std::string(to_string(channel_mode));
    if (transform_mode != TransformMode::Nonlinear) s += "-linear";
    return s;
}

std::string ModelSpec::to_json() const {
    json j = {{"arch", std::string(to_string(arch))},
              {"n_layers", n_layers},
              {"hidden_dim", hidden_dim},
              {"gcn_kind", std::string(to_string(gcn_kind))},
              {"lp_kind", std::string(to_string(lp_kind))},
              {"hp_kind", std::string(to_string(hp_kind))},
              {"dropout", dropout},
              {"channel_mode", std::string(to_string(channel_mode))},
              {"transform_mode", std::string(to_string(transform_mode))}};
    if (gamma) j["gamma"] = *gamma;
    return j.dump();
}

ModelSpec ModelSpec::from_json(const std::string& text) {
    try {
        auto j = json::parse(text);
        ModelSpec s;
        s.arch = parse_arch(j.at("arch").get<std::string>());
        s.n_layers = j.value("n_layers", s.n_layers);
        s.hidden_dim = j.value("hidden_dim", s.hidden_dim);
        if (j.contains("gcn_kind")) s.gcn_kind = parse_operator_kind(j["gcn_kind"].get<std::string>());
        if (j.contains("lp_kind")) s.lp_kind = parse_operator_kind(j["lp_kind"].get<std::string>());
        if (j.contains("hp_kind")) s.hp_kind = parse_operator_kind(j["hp_kind"].get<std::string>());
        if (j.contains("gamma") && !j["gamma"].is_null()) s.gamma = j["gamma"].get<double>();
        s.dropout = j.value("dropout", s.dropout);
        if (j.contains("channel_mode")) {
            s.channel_mode = parse_channel_mode(j["channel_mode"].get<std::string>());
        }
        if (j.contains("transform_mode")) {
            s.transform_mode = parse_transform_mode(j["transform_mode"].get<std::string>());
        }
        s.validate();
        return s;
    } catch (const json::exception& e) {
        throw Error("model spec: " + std::string(e.what()));
    }
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

Parameter& ParamSet::get(std::string_view name) {
    for (auto& p : tensors)
        if (p.name == name) return p;
    throw Error("no parameter named '" + std::string(name) + "'");
}

const Parameter& ParamSet::get(std::string_view name) const {
    for (const auto& p : tensors)
        if (p.name == name) return p;
    throw Error("no parameter named '" + std::string(name) + "'");
}

bool ParamSet::contains(std::string_view name) const {
    for (const auto& p : tensors)
        if (p.name == name) return true;
    return false;
}

namespace {
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
std::string indexed(const char* base, std::size_t l) { return base + std::to_string(l); }
}  // namespace

std::pair<double, double> ParamSet::alphas(std::size_t layer) const {
    return {sigmoid(get(indexed("alpha_L", layer)).value(0, 0)),
            sigmoid(get(indexed("alpha_H", layer)).value(0, 0))};
}

double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

std::vector<std::size_t> layer_dims(const ModelSpec& spec, std::size_t n_features,
                                    std::size_t n_classes) {
    std::vector<std::size_t> dims{n_features};
    for (std::size_t l = 0; l + 1 < spec.n_layers; ++l) dims.push_back(spec.hidden_dim);
    dims.push_back(n_classes);
    return dims;
}

ParamSet init_params(const ModelSpec& spec, std::size_t n_features, std::size_t n_classes,
                     std::uint64_t seed) {
    spec.validate();
    const auto dims = layer_dims(spec, n_features, n_classes);
    Rng rng(seed);
    ParamSet ps;
    ps.seed = seed;
    auto glorot = [&](std::string name, std::size_t in, std::size_t out) {
        const double bound = glorot_bound(in, out);
        Parameter p{std::move(name), DenseMatrix(in, out), DenseMatrix(in, out)};
        for (double& v : p.value.data()) v = rng.uniform(-bound, bound);
        ps.tensors.push_back(std::move(p));
    };
    for (std::size_t l = 0; l < spec.n_layers; ++l) {
        if (spec.is_filterbank()) {
            glorot(indexed("W_L", l), dims[l], dims[l + 1]);
            glorot(indexed("W_H", l), dims[l], dims[l + 1]);
            ps.tensors.push_back({indexed("alpha_L", l), DenseMatrix(1, 1), DenseMatrix(1, 1)});
            ps.tensors.push_back({indexed("alpha_H", l), DenseMatrix(1, 1), DenseMatrix(1, 1)});
        } else {
            glorot(indexed("W", l), dims[l], dims[l + 1]);
        }
    }
    return ps;
}

ModelOperators build_model_operators(const Graph& graph, const ModelSpec& spec) {
    spec.validate();
    ModelOperators ops;
    switch (spec.arch) {
        case Arch::Mlp:
            break;
        case Arch::Gcn:
            ops.gcn = build_operator(graph, spec.gcn_kind, spec.gamma);
            break;
        case Arch::FbGcn:
            if (spec.channel_mode != ChannelMode::HpOnly) {
                ops.lp = build_operator(graph, spec.lp_kind, spec.gamma);
            }
            if (spec.channel_mode != ChannelMode::LpOnly) {
                ops.hp = build_operator(graph, spec.hp_kind, spec.gamma);
            }
            break;
        case Arch::FbSage:
            // Fixed weights w_ij = 1/(D_ii + 1) over N_i ∪ {i} turn the
            // aggregator into I + hatA_rw and the diversifier into hatL_rw.
            ops.lp = build_operator(graph, OperatorKind::HatArw);
            ops.hp = build_operator(graph, OperatorKind::HatLrw);
            break;
    }
    return ops;
}

// ---------------------------------------------------------------------------
// Forward passes
// ---------------------------------------------------------------------------

namespace {

Var maybe_dropout(Tape& tape, Var x, const ModelSpec& spec, const ForwardOptions& options) {
    if (!options.train || spec.dropout == 0.0) return x;
    if (!options.rng) throw Error("forward: training with dropout requires an rng");
    return tape.dropout(x, spec.dropout, true, *options.rng);
}

void check_input(const Tape& tape, Var x, const ParamSet& params, const char* first) {
    const auto& w = params.get(first).value;
    if (tape.value(x).cols() != w.rows()) {
        throw Error("forward: input has " + std::to_string(tape.value(x).cols()) +
                    " features, model expects " + std::to_string(w.rows()));
    }
}

const SparseOperator& require(const std::optional<SparseOperator>& op, const char* what) {
    if (!op) throw Error(std::string("forward: missing ") + what + " operator");
    return *op;
}

using ChannelFilter = std::function<Var(Tape&, Var)>;

ForwardPass filterbank_forward(Tape& tape, const ModelSpec& spec, ParamSet& params, Var x,
                               const ForwardOptions& options, const ChannelFilter& lp_filter,
                               const ChannelFilter& hp_filter) {
    check_input(tape, x, params, "W_L0");
    const bool use_lp = spec.channel_mode != ChannelMode::HpOnly;
    const bool use_hp = spec.channel_mode != ChannelMode::LpOnly;

    auto fixed = options.fixed_alphas;
    if (spec.channel_mode == ChannelMode::LpOnly) fixed = std::pair{1.0, 0.0};
    if (spec.channel_mode == ChannelMode::HpOnly) fixed = std::pair{0.0, 1.0};

    ForwardPass out;
    Var h = x;
    for (std::size_t l = 0; l < spec.n_layers; ++l) {
        const bool last = l + 1 == spec.n_layers;
        Var in = maybe_dropout(tape, h, spec, options);
        LayerTrace trace;
        Var mixed;
        auto channel = [&](const char* w_name, const char* a_name, const ChannelFilter& filter,
                           double fixed_alpha, Var& slot) {
            Var z = tape.matmul(in, tape.parameter(params.get(indexed(w_name, l))));
            if (spec.transform_mode == TransformMode::Nonlinear) z = tape.relu(z);
            slot = filter(tape, z);
            Var alpha = fixed ? tape.constant(DenseMatrix(1, 1, fixed_alpha))
                              : tape.sigmoid(tape.parameter(params.get(indexed(a_name, l))));
            Var scaled = tape.scale(slot, alpha);
            mixed = mixed.valid() ? tape.add(mixed, scaled) : scaled;
        };
        if (use_lp) channel("W_L", "alpha_L", lp_filter, fixed ? fixed->first : 0.0, trace.lp);
        if (use_hp) channel("W_H", "alpha_H", hp_filter, fixed ? fixed->second : 0.0, trace.hp);
        h = last ? mixed : tape.relu(mixed);
        trace.combined = h;
        out.layers.push_back(trace);
    }
    out.logits = h;
    return out;
}

}  // namespace

ForwardPass mlp_forward(Tape& tape, const ModelSpec& spec, ParamSet& params, Var x,
                        const ForwardOptions& options) {
    check_input(tape, x, params, "W0");
    ForwardPass out;
    Var h = x;
    for (std::size_t l = 0; l < spec.n_layers; ++l) {
        Var in = maybe_dropout(tape, h, spec, options);
        Var z = tape.matmul(in, tape.parameter(params.get(indexed("W", l))));
        h = l + 1 == spec.n_layers ? z : tape.relu(z);
        out.layers.push_back({Var{}, Var{}, h});
    }
    out.logits = h;
    return out;
}

ForwardPass gcn_forward(Tape& tape, const ModelSpec& spec, const ModelOperators& ops,
                        ParamSet& params, Var x, const ForwardOptions& options) {
    check_input(tape, x, params, "W0");
    const SparseOperator& prop = require(ops.gcn, "GCN propagation");
    ForwardPass out;
    Var h = x;
    for (std::size_t l = 0; l < spec.n_layers; ++l) {
        Var in = maybe_dropout(tape, h, spec, options);
        Var z = tape.spmm(prop, tape.matmul(in, tape.parameter(params.get(indexed("W", l)))));
        h = l + 1 == spec.n_layers ? z : tape.relu(z);
        out.layers.push_back({z, Var{}, h});
    }
    out.logits = h;
    return out;
}

ForwardPass fb_gcn_forward(Tape& tape, const ModelSpec& spec, const ModelOperators& ops,
                           ParamSet& params, Var x, const ForwardOptions& options) {
    const SparseOperator* lp = ops.lp ? &*ops.lp : nullptr;
    const SparseOperator* hp = ops.hp ? &*ops.hp : nullptr;
    if (spec.channel_mode != ChannelMode::HpOnly && !lp) require(ops.lp, "low-pass");
    if (spec.channel_mode != ChannelMode::LpOnly && !hp) require(ops.hp, "high-pass");
    return filterbank_forward(
        tape, spec, params, x, options, [lp](Tape& t, Var z) { return t.spmm(*lp, z); },
        [hp](Tape& t, Var z) { return t.spmm(*hp, z); });
}

ForwardPass fb_sage_forward(Tape& tape, const ModelSpec& spec, const ModelOperators& ops,
                            ParamSet& params, Var x, const ForwardOptions& options) {
    const SparseOperator* mean = &require(ops.lp, "aggregation");
    const SparseOperator* diversify = &require(ops.hp, "diversification");
    return filterbank_forward(
        tape, spec, params, x, options,
        [mean](Tape& t, Var z) { return t.add(z, t.spmm(*mean, z)); },
        [diversify](Tape& t, Var z) { return t.spmm(*diversify, z); });
}

ForwardPass forward(Tape& tape, const ModelSpec& spec, const ModelOperators& ops,
                    ParamSet& params, Var x, const ForwardOptions& options) {
    switch (spec.arch) {
        case Arch::Mlp: return mlp_forward(tape, spec, params, x, options);
        case Arch::Gcn: return gcn_forward(tape, spec, ops, params, x, options);
        case Arch::FbGcn: return fb_gcn_forward(tape, spec, ops, params, x, options);
        case Arch::FbSage: return fb_sage_forward(tape, spec, ops, params, x, options);
    }
    throw Error("forward: unknown architecture");
}

DenseMatrix predict_logits(const ModelSpec& spec, const ModelOperators& ops, ParamSet& params,
                           const DenseMatrix& x) {
    Tape tape;
    auto pass = forward(tape, spec, ops, params, tape.constant(x), ForwardOptions{});
    return tape.value(pass.logits);
}

GradCheckReport model_grad_check(const Graph& graph, const ModelSpec& spec, std::uint64_t seed,
                                 const GradCheckOptions& options) {
    ModelSpec s = spec;
    s.dropout = 0.0;
    const auto ops = build_model_operators(graph, s);
    ParamSet params = init_params(s, graph.n_features(), graph.n_classes(), seed);
    Rng rng(Rng::mix(seed, 1));
    for (auto& p : params.tensors)
        if (p.name.rfind("alpha_", 0) == 0) p.value(0, 0) = rng.normal();

    std::vector<std::size_t> all(graph.n_nodes());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    LossFn loss = [&](bool with_grad) {
        Tape tape;
        auto pass = forward(tape, s, ops, params, tape.constant(graph.features()), {});
        Var l = tape.softmax_cross_entropy(pass.logits, graph.labels(), all);
        if (with_grad) tape.backward(l);
        return tape.value(l)(0, 0);
    };
    return grad_check(loss, params.tensors, options);
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {
std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}
}  // namespace

std::string params_to_json(const ModelSpec& spec, const ParamSet& params) {
    const std::string spec_json = spec.to_json();
    json j;
    j["spec"] = json::parse(spec_json);
    j["spec_hash"] = fnv1a_hex(spec_json);
    j["init"] = {{"scheme", params.init_scheme}, {"seed", params.seed}};
    j["tensors"] = json::array();
    for (const auto& p : params.tensors) {
        j["tensors"].push_back({{"name", p.name},
                                {"rows", p.value.rows()},
                                {"cols", p.value.cols()},
                                {"values", std::vector<double>(p.value.data().begin(),
                                                               p.value.data().end())}});
    }
    return j.dump();
}

std::pair<ModelSpec, ParamSet> params_from_json(const std::string& text) {
    try {
        auto j = json::parse(text);
        const std::string spec_json = j.at("spec").dump();
        ModelSpec spec = ModelSpec::from_json(spec_json);
        if (j.at("spec_hash").get<std::string>() != fnv1a_hex(spec.to_json())) {
            throw Error("parameter file: spec hash mismatch");
        }
        ParamSet ps;
        ps.init_scheme = j.at("init").at("scheme").get<std::string>();
        ps.seed = j.at("init").at("seed").get<std::uint64_t>();
        for (const auto& t : j.at("tensors")) {
            const auto rows = t.at("rows").get<std::size_t>();
            const auto cols = t.at("cols").get<std::size_t>();
            ps.tensors.push_back({t.at("name").get<std::string>(),
                                  DenseMatrix(rows, cols, t.at("values").get<std::vector<double>>()),
                                  DenseMatrix(rows, cols)});
        }
        return {spec, std::move(ps)};
    } catch (const json::exception& e) {
        throw Error("parameter file: " + std::string(e.what()));
    }
}

}  // namespace graphfb
