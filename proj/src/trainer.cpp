#include "graphfb/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include <nlohmann/json.hpp>

namespace graphfb {

using nlohmann::json;

void TrainConfig::validate() const {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw Error("train: lr must be finite and >= 0");
    if (!(weight_decay >= 0.0)) throw Error("train: weight_decay must be >= 0");
    if (max_epochs == 0) throw Error("train: max_epochs must be at least 1");
    if (patience > max_epochs) throw Error("train: patience exceeds max_epochs");
}

// ---------------------------------------------------------------------------
// Tuned hyperparameters
// ---------------------------------------------------------------------------

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (out == "film") out = "actor";
    return out;
}

struct TunedRow {
    const char* dataset;
    Hyperparameters gcn, mlp, fb_gcn, fb_gcn_lazy, fb_sage;
};

// {lr, weight_decay, dropout, hidden}
const TunedRow kTuned[] = {
    {"cornell", {.05, 5e-4, .4, 32}, {.05, 1e-4, .5, 32}, {.05, 1e-3, .3, 32}, {.05, 5e-4, .3, 32}, {.05, 5e-4, .1, 32}},
    {"wisconsin", {.05, 5e-4, .3, 32}, {.05, 1e-4, .4, 32}, {.05, 5e-4, .1, 32}, {.05, 5e-4, .4, 32}, {.05, 5e-4, .2, 32}},
    {"texas", {.05, 5e-5, .4, 32}, {.05, 5e-4, .3, 32}, {.05, 5e-4, .1, 32}, {.05, 1e-3, .3, 32}, {.1, 5e-4, .2, 32}},
    {"actor", {.05, 5e-4, .3, 32}, {.05, 5e-5, .9, 32}, {.05, 5e-3, .2, 32}, {.05, 5e-3, .2, 32}, {.05, 5e-4, .1, 32}},
    {"chameleon", {.05, 5e-5, .3, 32}, {.05, 5e-5, .3, 32}, {.05, 5e-5, .7, 32}, {.05, 5e-5, .7, 32}, {.05, 5e-4, .6, 32}},
    {"squirrel", {.05, 5e-5, .6, 32}, {.05, 5e-5, .4, 32}, {.05, 5e-5, .6, 32}, {.05, 5e-5, .6, 32}, {.05, 5e-4, .5, 32}},
    {"cora", {.05, 5e-5, .9, 32}, {.05, 5e-4, .4, 32}, {.05, 5e-4, .8, 32}, {.05, 5e-4, .7, 32}, {.05, 5e-5, .7, 32}},
    {"citeseer", {.05, 5e-4, .5, 32}, {.05, 5e-5, .6, 32}, {.05, 5e-3, .3, 32}, {.05, 5e-3, .3, 32}, {.05, 5e-5, .7, 32}},
    {"pubmed", {.05, 5e-5, .2, 32}, {.05, 1e-4, .1, 32}, {.05, 5e-4, .3, 32}, {.05, 5e-4, .2, 32}, {.05, 5e-5, .3, 32}},
};

}  // namespace

std::optional<Hyperparameters> tuned_hyperparameters(std::string_view dataset, Arch arch,
                                                     bool lazy) {
    const std::string key = lower(dataset);
    for (const auto& row : kTuned) {
        if (key != row.dataset) continue;
        switch (arch) {
            case Arch::Gcn: return row.gcn;
            case Arch::Mlp: return row.mlp;
            case Arch::FbGcn: return lazy ? row.fb_gcn_lazy : row.fb_gcn;
            case Arch::FbSage: return row.fb_sage;
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

std::vector<int> argmax_rows(const DenseMatrix& logits) {
    std::vector<int> out(logits.rows());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const auto row = logits.row(i);
        // max_element returns the first maximum, so ties go to the lower class.
        out[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

double accuracy(const DenseMatrix& logits, std::span<const int> labels,
                std::span<const std::size_t> nodes) {
    if (nodes.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i : nodes) {
        const auto row = logits.row(i);
        const auto pred = std::max_element(row.begin(), row.end()) - row.begin();
        if (pred == labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(nodes.size());
}

double output_smoothness(const DenseMatrix& logits, const Graph& graph, OutputEncoding encoding,
                         OperatorKind kind) {
    if (logits.rows() != graph.n_nodes()) {
        throw Error("output smoothness: logits have " + std::to_string(logits.rows()) +
                    " rows for a graph of " + std::to_string(graph.n_nodes()) + " nodes");
    }
    DenseMatrix y;
    if (encoding == OutputEncoding::Argmax) {
        const auto pred = argmax_rows(logits);
        y = one_hot(pred, logits.cols());
    } else {
        y = DenseMatrix(logits.rows(), logits.cols());
        for (std::size_t i = 0; i < logits.rows(); ++i) {
            const auto row = logits.row(i);
            const double mx = *std::max_element(row.begin(), row.end());
            double denom = 0.0;
            for (std::size_t j = 0; j < row.size(); ++j) denom += y(i, j) = std::exp(row[j] - mx);
            for (std::size_t j = 0; j < row.size(); ++j) y(i, j) /= denom;
        }
    }
    return s_value(build_operator(graph, kind), y);
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

void check_split(const Split& split, std::size_t n) {
    if (split.train.empty()) throw Error("train: split has no training nodes");
    for (const auto* part : {&split.train, &split.val, &split.test}) {
        for (std::size_t i : *part) {
            if (i >= n) {
                throw Error("train: split index " + std::to_string(i) + " out of range for " +
                            std::to_string(n) + " nodes");
            }
        }
    }
}

std::vector<std::pair<double, double>> current_alphas(const ModelSpec& spec,
                                                      const ParamSet& params) {
    std::vector<std::pair<double, double>> out;
    if (!spec.is_filterbank()) return out;
    for (std::size_t l = 0; l < spec.n_layers; ++l) {
        switch (spec.channel_mode) {
            case ChannelMode::TwoChannel: out.push_back(params.alphas(l)); break;
            case ChannelMode::LpOnly: out.emplace_back(1.0, 0.0); break;
            case ChannelMode::HpOnly: out.emplace_back(0.0, 1.0); break;
        }
    }
    return out;
}

double cross_entropy(const DenseMatrix& logits, std::span<const int> labels,
                     std::span<const std::size_t> nodes) {
    if (nodes.empty()) return 0.0;
    Tape tape;
    Var z = tape.constant(logits);
    return tape.value(tape.softmax_cross_entropy(z, labels, nodes))(0, 0);
}

}  // namespace

TrainResult train(const Graph& graph, const ModelSpec& spec, const TrainConfig& config,
                  const Split& split) {
    return train(graph, spec, build_model_operators(graph, spec), config, split);
}

TrainResult train(const Graph& graph, const ModelSpec& spec, const ModelOperators& ops,
                  const TrainConfig& config, const Split& split) {
    spec.validate();
    config.validate();
    check_split(split, graph.n_nodes());
    const auto start = std::chrono::steady_clock::now();

    ParamSet params = init_params(spec, graph.n_features(), graph.n_classes(),
                                  Rng::mix(config.seed, 0));
    Rng dropout_rng(Rng::mix(config.seed, 1));
    Adam adam({config.lr, 0.9, 0.999, 1e-8, config.weight_decay});
    const auto labels = graph.labels();

    TrainResult result;
    double best_val = -1.0;
    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        zero_grad(params.tensors);
        double train_loss;
        {
            Tape tape;
            ForwardOptions opts{true, &dropout_rng, std::nullopt};
            auto pass = forward(tape, spec, ops, params, tape.constant(graph.features()), opts);
            Var loss = tape.softmax_cross_entropy(pass.logits, labels, split.train);
            train_loss = tape.value(loss)(0, 0);
            if (!std::isfinite(train_loss)) {
                throw Error("train: non-finite loss at epoch " + std::to_string(epoch));
            }
            tape.backward(loss);
        }
        adam.step(params.tensors);

        const DenseMatrix logits = predict_logits(spec, ops, params, graph.features());
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = train_loss;
        rec.val_loss = cross_entropy(logits, labels, split.val);
        rec.train_acc = accuracy(logits, labels, split.train);
        rec.val_acc = accuracy(logits, labels, split.val);
        rec.test_acc = accuracy(logits, labels, split.test);
        rec.alphas = current_alphas(spec, params);

        if (rec.val_acc > best_val) {
            best_val = rec.val_acc;
            result.best_epoch = epoch;
            result.val_accuracy = rec.val_acc;
            result.test_accuracy = rec.test_acc;
            result.alphas = rec.alphas;
            result.best_logits = logits;
            result.best_params = params;
        }
        result.history.push_back(std::move(rec));
        result.epochs_run = epoch;
        if (epoch - result.best_epoch >= config.patience) break;
    }

    for (auto& p : result.best_params.tensors) p.zero_grad();
    result.output_s = output_smoothness(result.best_logits, graph);
    result.label_s =
        s_value(build_operator(graph, OperatorKind::HatLsym), one_hot(labels, graph.n_classes()));
    result.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

// ---------------------------------------------------------------------------
// Embeddings
// ---------------------------------------------------------------------------

EmbeddingChannel parse_embedding_channel(std::string_view name) {
    if (name == "lp") return EmbeddingChannel::Lp;
    if (name == "hp") return EmbeddingChannel::Hp;
    if (name == "combined") return EmbeddingChannel::Combined;
    throw Error("unknown channel '" + std::string(name) + "' (expected lp, hp, combined)");
}

std::string_view to_string(EmbeddingChannel channel) {
    switch (channel) {
        case EmbeddingChannel::Lp: return "lp";
        case EmbeddingChannel::Hp: return "hp";
        case EmbeddingChannel::Combined: return "combined";
    }
    return "?";
}

DenseMatrix embeddings(const Graph& graph, const ModelSpec& spec, ParamSet& params,
                       std::size_t layer, EmbeddingChannel channel) {
    if (layer == 0 || layer > spec.n_layers) {
        throw Error("embeddings: layer " + std::to_string(layer) + " outside [1, " +
                    std::to_string(spec.n_layers) + "]");
    }
    if (channel != EmbeddingChannel::Combined && !spec.is_filterbank()) {
        throw Error("embeddings: channel " + std::string(to_string(channel)) +
                    " is not available for " + spec.label());
    }
    const auto ops = build_model_operators(graph, spec);
    Tape tape;
    auto pass = forward(tape, spec, ops, params, tape.constant(graph.features()), {});
    const LayerTrace& t = pass.layers[layer - 1];
    const Var v = channel == EmbeddingChannel::Lp   ? t.lp
                  : channel == EmbeddingChannel::Hp ? t.hp
                                                    : t.combined;
    if (!v.valid()) {
        throw Error("embeddings: channel " + std::string(to_string(channel)) +
                    " is not computed by " + spec.label());
    }
    return tape.value(v);
}

namespace {
void append_double(std::string& out, double v) {
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, r.ptr);
}
}  // namespace

void export_embeddings(const Graph& graph, const ModelSpec& spec, ParamSet& params,
                       std::size_t layer, EmbeddingChannel channel,
                       const std::filesystem::path& file) {
    const DenseMatrix h = embeddings(graph, spec, params, layer, channel);
    std::string out;
    for (std::size_t i = 0; i < h.rows(); ++i) {
        for (double v : h.row(i)) {
            append_double(out, v);
            out += '\t';
        }
        out += std::to_string(graph.labels()[i]);
        out += '\n';
    }
    write_file_atomic(file, out);
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

std::string history_csv(const TrainResult& result) {
    std::string out = "epoch,train_loss,val_loss,train_acc,val_acc,test_acc\n";
    for (const auto& r : result.history) {
        out += std::to_string(r.epoch);
        for (double v : {r.train_loss, r.val_loss, r.train_acc, r.val_acc, r.test_acc}) {
            out += ',';
            append_double(out, v);
        }
        out += '\n';
    }
    return out;
}

std::string alphas_csv(const TrainResult& result) {
    std::string out = "epoch,layer,alpha_L,alpha_H\n";
    for (const auto& r : result.history) {
        for (std::size_t l = 0; l < r.alphas.size(); ++l) {
            out += std::to_string(r.epoch) + ',' + std::to_string(l) + ',';
            append_double(out, r.alphas[l].first);
            out += ',';
            append_double(out, r.alphas[l].second);
            out += '\n';
        }
    }
    return out;
}

const ModelSummary& ExperimentReport::model(std::string_view name) const {
    for (const auto& m : models)
        if (m.name == name) return m;
    throw Error("report: no model named '" + std::string(name) + "'");
}

std::string ExperimentReport::to_json() const {
    json j;
    j["dataset"] = dataset;
    j["label_S"] = label_s;
    j["models"] = json::array();
    for (const auto& m : models) {
        json jm = {{"name", m.name},
                   {"mean", m.mean},
                   {"std", m.stddev},
                   {"test_accuracies", m.test_accuracies},
                   {"best_epochs", m.best_epochs},
                   {"output_S", m.output_s},
                   {"median_S_gap", m.median_s_gap}};
        json alphas = json::array();
        for (const auto& per_split : m.alphas) {
            json layers = json::array();
            for (auto [lo, hi] : per_split) layers.push_back({lo, hi});
            alphas.push_back(layers);
        }
        jm["alphas"] = alphas;
        if (m.baseline) {
            jm["baseline"] = *m.baseline;
            jm["deltas"] = m.deltas;
            jm["mean_delta"] = m.mean_delta;
        }
        j["models"].push_back(jm);
    }
    return j.dump(2);
}

namespace {

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Population standard deviation.
double std_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

std::string file_safe(std::string s) {
    for (char& c : s) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
    }
    return s;
}

}  // namespace

ExperimentReport run_experiment(const Graph& graph, const std::vector<ExperimentEntry>& entries,
                                 const SplitSet& splits, const ExperimentOptions& options) {
    if (entries.empty()) throw Error("experiment: no models");
    if (splits.splits.empty()) throw Error("experiment: no splits");
    for (std::size_t a = 0; a < entries.size(); ++a) {
        for (std::size_t b = a + 1; b < entries.size(); ++b) {
            if (entries[a].name == entries[b].name) {
                throw Error("experiment: duplicate model name '" + entries[a].name + "'");
            }
        }
    }
    auto index_of = [&](const std::string& name) {
        for (std::size_t k = 0; k < entries.size(); ++k)
            if (entries[k].name == name) return k;
        throw Error("experiment: unknown baseline '" + name + "'");
    };
    for (const auto& e : entries) {
        if (e.baseline) index_of(*e.baseline);
        e.config.validate();
    }

    std::vector<ModelOperators> ops;
    for (const auto& e : entries) ops.push_back(build_model_operators(graph, e.spec));

    const std::size_t n_splits = splits.splits.size();
    const std::size_t n_jobs = entries.size() * n_splits;
    std::vector<TrainResult> results(n_jobs);
    std::vector<std::exception_ptr> errors(n_jobs);
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t job; (job = next.fetch_add(1)) < n_jobs;) {
            const std::size_t m = job / n_splits;
            const std::size_t s = job % n_splits;
            try {
                TrainConfig cfg = entries[m].config;
                cfg.seed = Rng::mix(cfg.seed, s);
                results[job] = train(graph, entries[m].spec, ops[m], cfg, splits.splits[s]);
            } catch (...) {
                errors[job] = std::current_exception();
            }
        }
    };
    const std::size_t workers = std::clamp<std::size_t>(options.workers, 1, n_jobs);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    ExperimentReport report;
    report.dataset = options.dataset;
    report.label_s = results.front().label_s;
    for (std::size_t m = 0; m < entries.size(); ++m) {
        ModelSummary sum;
        sum.name = entries[m].name;
        std::vector<double> gaps;
        for (std::size_t s = 0; s < n_splits; ++s) {
            const auto& r = results[m * n_splits + s];
            sum.test_accuracies.push_back(r.test_accuracy);
            sum.output_s.push_back(r.output_s);
            sum.best_epochs.push_back(r.best_epoch);
            sum.alphas.push_back(r.alphas);
            gaps.push_back(std::abs(r.output_s - r.label_s));
        }
        sum.mean = mean_of(sum.test_accuracies);
        sum.stddev = std_of(sum.test_accuracies);
        sum.median_s_gap = median_of(gaps);
        report.models.push_back(std::move(sum));
    }
    for (std::size_t m = 0; m < entries.size(); ++m) {
        if (!entries[m].baseline) continue;
        auto& sum = report.models[m];
        const auto& base = report.models[index_of(*entries[m].baseline)];
        sum.baseline = base.name;
        for (std::size_t s = 0; s < n_splits; ++s) {
            sum.deltas.push_back(sum.test_accuracies[s] - base.test_accuracies[s]);
        }
        sum.mean_delta = mean_of(sum.deltas);
    }

    if (options.out_dir) {
        const auto& dir = *options.out_dir;
        std::filesystem::create_directories(dir);
        for (std::size_t m = 0; m < entries.size(); ++m) {
            const std::string name = file_safe(entries[m].name);
            for (std::size_t s = 0; s < n_splits; ++s) {
                const auto& r = results[m * n_splits + s];
                const std::string tag = name + "_" + std::to_string(s);
                write_file_atomic(dir / ("history_" + tag + ".csv"), history_csv(r));
                if (entries[m].spec.is_filterbank()) {
                    write_file_atomic(dir / ("alphas_" + tag + ".csv"), alphas_csv(r));
                }
                write_file_atomic(dir / ("params_" + tag + ".json"),
                                  params_to_json(entries[m].spec, r.best_params));
            }
        }
        write_file_atomic(dir / "report.json", report.to_json());
    }
    return report;
}

}  // namespace graphfb
