// Command-line front end: dataset import, splits, smoothness, training,
// benchmarks, eigengap sweeps, gradient checks and exports.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "graphfb/graph.hpp"
#include "graphfb/models.hpp"
#include "graphfb/smoothness.hpp"
#include "graphfb/spectral.hpp"
#include "graphfb/synthetic.hpp"
#include "graphfb/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace graphfb;

namespace {

struct Globals {
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    std::string precision = "f64";
};

void emit_config(const std::string& command, const Globals& g, json args) {
    json j = {{"command", command},
              {"seed", g.seed},
              {"threads", g.threads},
              {"precision", g.precision},
              {"args", std::move(args)}};
    std::cerr << j.dump() << "\n";
}

// A dataset argument is used as given when it exists, otherwise it is looked
// up under $GRAPHFB_DATA_DIR.
fs::path resolve_data(const std::string& arg) {
    fs::path p(arg);
    if (fs::exists(p)) return p;
    if (const char* root = std::getenv("GRAPHFB_DATA_DIR")) {
        fs::path q = fs::path(root) / arg;
        if (fs::exists(q)) return q;
    }
    throw Error("dataset not found: " + arg);
}

std::string dataset_name(const fs::path& dir) {
    auto p = dir;
    if (p.filename().empty()) p = p.parent_path();
    return p.filename().string();
}

std::vector<double> parse_doubles(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    for (std::string tok; std::getline(ss, tok, ',');) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(tok, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != tok.size()) throw Error("not a number: '" + tok + "'");
        out.push_back(v);
    }
    return out;
}

json train_config_json(const TrainConfig& c) {
    return {{"lr", c.lr},
            {"weight_decay", c.weight_decay},
            {"max_epochs", c.max_epochs},
            {"patience", c.patience},
            {"seed", c.seed}};
}

TrainConfig train_config_from(const json& j, TrainConfig c) {
    c.lr = j.value("lr", c.lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.seed = j.value("seed", c.seed);
    return c;
}

SplitSet splits_for(const Graph& g, const std::string& file, std::size_t count,
                    std::uint64_t seed) {
    SplitSet s = file.empty() ? make_splits(g.n_nodes(), {0.48, 0.32, 0.20}, seed, count)
                              : load_splits(file);
    for (const auto& sp : s.splits) {
        if (sp.train.size() + sp.val.size() + sp.test.size() != g.n_nodes()) {
            throw Error("split file does not match the dataset's node count");
        }
    }
    return s;
}

void print_summary(const ExperimentReport& r) {
    for (const auto& m : r.models) {
        std::cout << m.name << ": test accuracy " << 100.0 * m.mean << " +/- " << 100.0 * m.stddev;
        if (m.baseline) std::cout << " (delta vs " << *m.baseline << " " << 100.0 * m.mean_delta << ")";
        std::cout << ", median |S_out - S_label| " << m.median_s_gap << "\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"graph filterbank toolkit"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "random seed");
    app.add_option("--threads", g.threads, "worker threads for benchmark and train")
        ->check(CLI::PositiveNumber);
    app.add_option("--precision", g.precision, "floating point precision")
        ->check(CLI::IsMember({"f64"}));

    // import
    auto* imp = app.add_subcommand("import", "convert raw node/edge files to a canonical dataset");
    std::string imp_nodes, imp_edges, imp_out;
    bool imp_rownorm = false;
    std::size_t imp_classes = 0;
    imp->add_option("--nodes", imp_nodes)->required();
    imp->add_option("--edges", imp_edges)->required();
    imp->add_option("--out", imp_out)->required();
    imp->add_flag("--row-normalize", imp_rownorm);
    imp->add_option("--n-classes", imp_classes, "declared class count (default: max label + 1)");

    // splits
    auto* spl = app.add_subcommand("splits", "generate random train/val/test splits");
    std::string spl_data, spl_ratios = "0.48,0.32,0.20", spl_out;
    std::size_t spl_count = 10;
    spl->add_option("--data", spl_data)->required();
    spl->add_option("--ratios", spl_ratios);
    spl->add_option("--count", spl_count);
    spl->add_option("--out", spl_out)->required();

    // smoothness
    auto* smo = app.add_subcommand("smoothness", "feature and label S-values");
    std::string smo_data, smo_op = "L_sym", smo_mode = "raw";
    std::optional<double> smo_gamma;
    smo->add_option("--data", smo_data)->required();
    smo->add_option("--operator", smo_op);
    smo->add_option("--feature-mode", smo_mode)->check(CLI::IsMember({"raw", "rownorm"}));
    smo->add_option("--gamma", smo_gamma);

    // train
    auto* trn = app.add_subcommand("train", "train one model over a split set");
    std::string trn_data, trn_model, trn_splits, trn_out;
    std::size_t trn_count = 10;
    std::optional<double> trn_lr, trn_wd, trn_dropout, trn_gamma;
    std::optional<std::size_t> trn_hidden;
    std::size_t trn_layers = 2, trn_epochs = 500, trn_patience = 100;
    std::string trn_channels = "two_channel", trn_transform = "nonlinear";
    std::string trn_gcn_op = "hatA_sym", trn_lp = "hatA_sym", trn_hp = "hatL_sym";
    bool trn_raw = false;
    trn->add_option("--data", trn_data)->required();
    trn->add_option("--model", trn_model)->required()->check(
        CLI::IsMember({"mlp", "gcn", "fb-gcn", "fb-sage"}));
    trn->add_option("--splits", trn_splits, "split file (default: generate --count splits)");
    trn->add_option("--count", trn_count);
    trn->add_option("--out", trn_out);
    trn->add_option("--lr", trn_lr);
    trn->add_option("--weight-decay", trn_wd);
    trn->add_option("--dropout", trn_dropout);
    trn->add_option("--hidden", trn_hidden);
    trn->add_option("--layers", trn_layers);
    trn->add_option("--epochs", trn_epochs);
    trn->add_option("--patience", trn_patience);
    trn->add_option("--gamma", trn_gamma, "lazy random walk pair when set (fb-gcn)");
    trn->add_option("--operator", trn_gcn_op, "gcn propagation operator");
    trn->add_option("--lp-operator", trn_lp);
    trn->add_option("--hp-operator", trn_hp);
    trn->add_option("--channels", trn_channels)->check(
        CLI::IsMember({"two_channel", "lp_only", "hp_only"}));
    trn->add_option("--transform", trn_transform)->check(CLI::IsMember({"nonlinear", "linear"}));
    trn->add_flag("--raw-features", trn_raw, "skip row normalization of features");

    // benchmark
    auto* bench = app.add_subcommand("benchmark", "multi-model, multi-split experiment");
    std::string bench_config, bench_out;
    bench->add_option("--config", bench_config)->required();
    bench->add_option("--out", bench_out)->required();

    // eigengap
    auto* eig = app.add_subcommand("eigengap", "compare lazy and renormalized eigengaps");
    std::string eig_data;
    std::optional<double> eig_gamma;
    bool eig_random = false;
    std::vector<std::string> eig_kv;
    eig->add_option("--data", eig_data);
    eig->add_option("--gamma", eig_gamma);
    eig->add_flag("--random", eig_random, "sweep random graphs: n=30 trials=200 gammas=0.5,1,2");
    eig->add_option("params", eig_kv, "key=value settings of the random sweep");

    // grad-check
    auto* gc = app.add_subcommand("grad-check", "finite-difference gradient check");
    std::string gc_model;
    std::size_t gc_n = 8, gc_f = 5, gc_graphs = 20;
    gc->add_option("--model", gc_model)->required()->check(
        CLI::IsMember({"mlp", "gcn", "fb-gcn", "fb-sage"}));
    gc->add_option("--n", gc_n)->check(CLI::Range(2, 200));
    gc->add_option("--f", gc_f)->check(CLI::PositiveNumber);
    gc->add_option("--graphs", gc_graphs)->check(CLI::PositiveNumber);

    // export-operator
    auto* exo = app.add_subcommand("export-operator", "write an operator as MatrixMarket");
    std::string exo_data, exo_op, exo_out;
    std::optional<double> exo_gamma;
    exo->add_option("--data", exo_data)->required();
    exo->add_option("--operator", exo_op)->required();
    exo->add_option("--gamma", exo_gamma);
    exo->add_option("--out", exo_out)->required();

    // export-embeddings
    auto* exe = app.add_subcommand("export-embeddings", "dump hidden representations of a run");
    std::string exe_run, exe_channel = "combined", exe_model, exe_out;
    std::size_t exe_layer = 1, exe_split = 0;
    exe->add_option("--run", exe_run)->required();
    exe->add_option("--layer", exe_layer);
    exe->add_option("--channel", exe_channel)->check(CLI::IsMember({"lp", "hp", "combined"}));
    exe->add_option("--model", exe_model, "model name (default: the only model of the run)");
    exe->add_option("--split", exe_split);
    exe->add_option("--out", exe_out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (*imp) {
            emit_config("import", g, {{"nodes", imp_nodes}, {"edges", imp_edges}, {"out", imp_out},
                                      {"row_normalize", imp_rownorm}, {"n_classes", imp_classes}});
            ImportOptions opts;
            opts.row_normalize = imp_rownorm;
            if (imp_classes > 0) opts.n_classes = imp_classes;
            auto r = import_raw(imp_nodes, imp_edges, opts);
            save_canonical(r.graph, imp_out);
            std::cout << json{{"n_nodes", r.graph.n_nodes()},
                              {"n_edges", r.graph.n_edges()},
                              {"n_features", r.graph.n_features()},
                              {"n_classes", r.graph.n_classes()},
                              {"dropped_self_loops", r.cleanup.self_loops},
                              {"dropped_duplicates", r.cleanup.duplicates}}
                             .dump()
                      << "\n";
        } else if (*spl) {
            emit_config("splits", g, {{"data", spl_data}, {"ratios", spl_ratios},
                                      {"count", spl_count}, {"out", spl_out}});
            const auto r = parse_doubles(spl_ratios);
            if (r.size() != 3) throw Error("--ratios needs three comma-separated values");
            const Graph graph = load_dataset(resolve_data(spl_data));
            save_splits(make_splits(graph.n_nodes(), {r[0], r[1], r[2]}, g.seed, spl_count), spl_out);
        } else if (*smo) {
            emit_config("smoothness", g, {{"data", smo_data}, {"operator", smo_op},
                                          {"feature_mode", smo_mode},
                                          {"gamma", smo_gamma ? json(*smo_gamma) : json()}});
            const auto dir = resolve_data(smo_data);
            const Graph graph = load_dataset(dir);
            const auto kind = parse_operator_kind(smo_op);
            SmoothnessReport rep;
            if (is_gamma_kind(kind)) {
                if (!smo_gamma) throw Error("operator " + smo_op + " requires --gamma");
                // Same computation as smoothness_report with an explicit gamma.
                const auto mode = parse_feature_mode(smo_mode);
                const auto op = build_operator(graph, kind, smo_gamma);
                const DenseMatrix x = mode == FeatureMode::RowNormalized
                                          ? row_normalize(graph.features())
                                          : graph.features();
                rep.dataset = dataset_name(dir);
                rep.operator_kind = kind;
                rep.feature_mode = mode;
                rep.feature = energies(op, x);
                rep.label = energies(op, one_hot(graph.labels(), graph.n_classes()));
                rep.feature_s = rep.feature.s;
                rep.label_s = rep.label.s;
                rep.diff = rep.label_s - rep.feature_s;
            } else {
                rep = smoothness_report(graph, kind, parse_feature_mode(smo_mode), dataset_name(dir));
            }
            std::cout << to_json(rep) << "\n";
        } else if (*trn) {
            const auto dir = resolve_data(trn_data);
            const std::string name = dataset_name(dir);
            const Arch arch = parse_arch(trn_model);
            const auto tuned = tuned_hyperparameters(name, arch, trn_gamma.has_value());
            const Hyperparameters hp = tuned.value_or(Hyperparameters{});

            ModelSpec spec;
            spec.arch = arch;
            spec.n_layers = trn_layers;
            spec.hidden_dim = trn_hidden.value_or(hp.hidden);
            spec.dropout = trn_dropout.value_or(hp.dropout);
            spec.gcn_kind = parse_operator_kind(trn_gcn_op);
            spec.lp_kind = parse_operator_kind(trn_lp);
            spec.hp_kind = parse_operator_kind(trn_hp);
            if (arch == Arch::FbGcn && trn_gamma) {
                spec.lp_kind = OperatorKind::Alrw;
                spec.hp_kind = OperatorKind::Llrw;
            }
            if ((arch == Arch::FbGcn && is_gamma_kind(spec.lp_kind)) ||
                (arch == Arch::Gcn && is_gamma_kind(spec.gcn_kind))) {
                spec.gamma = trn_gamma;
            }
            spec.channel_mode = parse_channel_mode(trn_channels);
            spec.transform_mode = parse_transform_mode(trn_transform);
            spec.validate();

            TrainConfig cfg;
            cfg.lr = trn_lr.value_or(hp.lr);
            cfg.weight_decay = trn_wd.value_or(hp.weight_decay);
            cfg.max_epochs = trn_epochs;
            cfg.patience = trn_patience;
            cfg.seed = g.seed;
            cfg.validate();

            json resolved = {{"data", dir.string()},
                             {"row_normalize", !trn_raw},
                             {"splits", trn_splits},
                             {"count", trn_count},
                             {"model", json::parse(spec.to_json())},
                             {"train", train_config_json(cfg)},
                             {"tuned_defaults", tuned.has_value()}};
            emit_config("train", g, resolved);

            const Graph graph = load_dataset(dir, !trn_raw);
            const SplitSet splits = splits_for(graph, trn_splits, trn_count, g.seed);
            ExperimentOptions opts;
            opts.workers = g.threads;
            opts.dataset = name;
            if (!trn_out.empty()) opts.out_dir = fs::path(trn_out);
            const auto report = run_experiment(graph, {{spec.label(), spec, cfg, std::nullopt}},
                                               splits, opts);
            if (opts.out_dir) {
                json run = {{"data", fs::absolute(dir).string()},
                            {"row_normalize", !trn_raw},
                            {"models", json::array({spec.label()})},
                            {"n_splits", splits.splits.size()},
                            {"resolved", resolved}};
                write_file_atomic(*opts.out_dir / "run.json", run.dump(2));
                save_splits(splits, *opts.out_dir / "splits.json");
            }
            print_summary(report);
        } else if (*bench) {
            const fs::path cfg_path(bench_config);
            json cfg = json::parse(read_file(cfg_path));
            const std::string data_arg = cfg.at("dataset").get<std::string>();
            fs::path dir = cfg_path.parent_path() / data_arg;
            if (!fs::exists(dir)) dir = resolve_data(data_arg);
            const bool rownorm = cfg.value("row_normalize", true);
            const TrainConfig base = train_config_from(cfg.value("train", json::object()),
                                                       TrainConfig{.seed = g.seed});
            std::vector<ExperimentEntry> entries;
            for (const auto& m : cfg.at("models")) {
                ExperimentEntry e;
                e.spec = ModelSpec::from_json(m.at("spec").dump());
                e.name = m.value("name", e.spec.label());
                e.config = train_config_from(m.value("train", json::object()), base);
                if (m.contains("baseline")) e.baseline = m["baseline"].get<std::string>();
                entries.push_back(std::move(e));
            }
            json resolved = cfg;
            resolved["dataset"] = dir.string();
            resolved["row_normalize"] = rownorm;
            resolved["train"] = train_config_json(base);
            emit_config("benchmark", g, resolved);

            const Graph graph = load_dataset(dir, rownorm);
            SplitSet splits;
            const json sp = cfg.value("splits", json::object());
            if (sp.is_string()) {
                fs::path f = cfg_path.parent_path() / sp.get<std::string>();
                splits = splits_for(graph, f.string(), 0, 0);
            } else {
                splits = splits_for(graph, "", sp.value("count", std::size_t{10}),
                                    sp.value("seed", g.seed));
            }
            ExperimentOptions opts;
            opts.workers = g.threads;
            opts.dataset = dataset_name(dir);
            opts.out_dir = fs::path(bench_out);
            const auto report = run_experiment(graph, entries, splits, opts);
            json names = json::array();
            for (const auto& e : entries) names.push_back(e.name);
            json run = {{"data", fs::absolute(dir).string()},
                        {"row_normalize", rownorm},
                        {"models", names},
                        {"n_splits", splits.splits.size()},
                        {"resolved", resolved}};
            write_file_atomic(fs::path(bench_out) / "run.json", run.dump(2));
            save_splits(splits, fs::path(bench_out) / "splits.json");
            print_summary(report);
        } else if (*eig) {
            if (eig_random) {
                std::size_t n = 30, trials = 200;
                std::vector<double> gammas{0.5, 1.0, 2.0};
                for (const auto& kv : eig_kv) {
                    const auto eq = kv.find('=');
                    if (eq == std::string::npos) throw Error("expected key=value, got '" + kv + "'");
                    const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
                    if (key == "n") {
                        n = static_cast<std::size_t>(parse_doubles(val).at(0));
                    } else if (key == "trials") {
                        trials = static_cast<std::size_t>(parse_doubles(val).at(0));
                    } else if (key == "gammas") {
                        gammas = parse_doubles(val);
                    } else {
                        throw Error("unknown sweep setting '" + key + "'");
                    }
                }
                emit_config("eigengap", g, {{"random", true}, {"n", n}, {"trials", trials},
                                            {"gammas", gammas}});
                const auto r = eigengap_sweep(n, trials, gammas, g.seed);
                std::cout << "min margin: " << r.min_margin << "\n";
                std::cout << "holds: " << r.holds << "/" << r.total << "\n";
                return r.holds == r.total ? 0 : 1;
            }
            if (eig_data.empty() || !eig_gamma) {
                throw Error("eigengap needs --data and --gamma, or --random");
            }
            emit_config("eigengap", g, {{"data", eig_data}, {"gamma", *eig_gamma}});
            const Graph graph = load_dataset(resolve_data(eig_data));
            const auto r = eigengap_check(graph, *eig_gamma);
            std::cout << json{{"lambda1_lazy", r.lambda1_lazy},   {"lambda2_lazy", r.lambda2_lazy},
                              {"lambda1_renorm", r.lambda1_renorm}, {"lambda2_renorm", r.lambda2_renorm},
                              {"ratio_lazy", r.ratio_lazy},       {"ratio_renorm", r.ratio_renorm},
                              {"holds", r.holds}}
                             .dump()
                      << "\n";
        } else if (*gc) {
            emit_config("grad-check", g, {{"model", gc_model}, {"n", gc_n}, {"f", gc_f},
                                          {"graphs", gc_graphs}});
            ModelSpec spec;
            spec.arch = parse_arch(gc_model);
            spec.hidden_dim = 4;
            spec.dropout = 0.0;
            double worst = 0.0;
            std::size_t checked = 0, kinks = 0;
            for (std::size_t k = 0; k < gc_graphs; ++k) {
                const auto seed = Rng::mix(g.seed, k);
                const Graph graph = random_graph(gc_n, gc_f, 3, 0.3, seed);
                const auto r = model_grad_check(graph, spec, seed);
                worst = std::max(worst, r.max_rel_err);
                checked += r.checked;
                kinks += r.skipped_kinks;
            }
            std::cout << "checked " << checked << " entries, skipped " << kinks << " at kinks\n";
            std::cout << "max_rel_err = " << worst << "\n";
            const bool pass = worst < 1e-5;
            std::cout << "max_rel_err < 1e-5: " << (pass ? "PASS" : "FAIL") << "\n";
            return pass ? 0 : 1;
        } else if (*exo) {
            emit_config("export-operator", g, {{"data", exo_data}, {"operator", exo_op},
                                               {"gamma", exo_gamma ? json(*exo_gamma) : json()},
                                               {"out", exo_out}});
            const Graph graph = load_dataset(resolve_data(exo_data));
            export_matrix_market(build_operator(graph, parse_operator_kind(exo_op), exo_gamma),
                                 exo_out);
        } else if (*exe) {
            const fs::path run_dir(exe_run);
            const json run = json::parse(read_file(run_dir / "run.json"));
            std::string model = exe_model;
            const auto& models = run.at("models");
            if (model.empty()) {
                if (models.size() != 1) throw Error("run has several models; pass --model");
                model = models[0].get<std::string>();
            }
            std::string safe = model;
            for (char& c : safe)
                if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.')
                    c = '_';
            const std::string tag = safe + "_" + std::to_string(exe_split);
            const fs::path out = exe_out.empty()
                                     ? run_dir / ("embeddings_" + tag + "_L" +
                                                  std::to_string(exe_layer) + "_" + exe_channel + ".tsv")
                                     : fs::path(exe_out);
            emit_config("export-embeddings", g, {{"run", exe_run}, {"model", model},
                                                 {"split", exe_split}, {"layer", exe_layer},
                                                 {"channel", exe_channel}, {"out", out.string()}});
            auto [spec, params] = params_from_json(read_file(run_dir / ("params_" + tag + ".json")));
            const Graph graph = load_dataset(run.at("data").get<std::string>(),
                                             run.value("row_normalize", true));
            export_embeddings(graph, spec, params, exe_layer, parse_embedding_channel(exe_channel),
                              out);
            std::cout << out.string() << "\n";
        }
    } catch (const std::exception& e) {
        std::string msg = e.what();
        for (char& c : msg)
            if (c == '\n') c = ' ';
        std::cerr << "error: " << msg << "\n";
        return 1;
    }
    return 0;
}
