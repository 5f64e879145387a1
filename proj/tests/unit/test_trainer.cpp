#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "graphfb/trainer.hpp"
#include "support.hpp"

using namespace graphfb;

namespace {

// Two clusters separated along the first feature; a ring of edges joins them.
Graph separable_toy(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    DenseMatrix x(n, 3);
    std::vector<int> labels(n);
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = static_cast<int>(i % 2);
        x(i, 0) = (labels[i] ? 1.0 : -1.0) * rng.uniform(1.0, 2.0);
        x(i, 1) = 0.1 * rng.normal();
        x(i, 2) = 0.1 * rng.normal();
        edges.emplace_back(i, (i + 1) % n);
    }
    return Graph::from_edges(n, edges, std::move(x), std::move(labels), 2);
}

Split all_split(std::size_t n) {
    Split s;
    for (std::size_t i = 0; i < n; ++i) (i % 5 < 3 ? s.train : i % 5 == 3 ? s.val : s.test).push_back(i);
    return s;
}

ModelSpec spec_for(Arch arch, double dropout = 0.0) {
    ModelSpec s;
    s.arch = arch;
    s.hidden_dim = 8;
    s.dropout = dropout;
    return s;
}

}  // namespace

TEST_CASE("least squares separates the toy, and so does a trained MLP") {
    auto g = separable_toy(40, 1);
    // Oracle: sign of the least-squares fit on feature 0 alone classifies every node.
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < 40; ++i) {
        const double y = g.labels()[i] ? 1.0 : -1.0;
        sxy += g.features()(i, 0) * y;
        sxx += g.features()(i, 0) * g.features()(i, 0);
    }
    for (std::size_t i = 0; i < 40; ++i) CHECK(((sxy / sxx) * g.features()(i, 0) > 0) == (g.labels()[i] == 1));

    TrainConfig cfg;
    cfg.max_epochs = 200;
    cfg.patience = 200;
    auto r = train(g, spec_for(Arch::Mlp), cfg, all_split(40));
    CHECK(r.test_accuracy == 1.0);
    CHECK(r.best_epoch <= 200);
}

TEST_CASE("lr = 0 freezes the parameters") {
    auto g = separable_toy(20, 2);
    TrainConfig cfg;
    cfg.lr = 0.0;
    cfg.max_epochs = 5;
    cfg.patience = 5;
    auto spec = spec_for(Arch::FbGcn, 0.5);
    auto r = train(g, spec, cfg, all_split(20));
    auto init = init_params(spec, 3, 2, Rng::mix(cfg.seed, 0));
    for (std::size_t k = 0; k < init.tensors.size(); ++k) CHECK(r.best_params.tensors[k].value == init.tensors[k].value);
    auto logits = predict_logits(spec, build_model_operators(g, spec), init, g.features());
    const auto split = all_split(20);
    CHECK(r.test_accuracy == accuracy(logits, g.labels(), split.test));
    for (const auto& h : r.history) CHECK(h.val_acc == r.history.front().val_acc);
    CHECK(r.best_epoch == 1);
}

TEST_CASE("training is deterministic and respects early stopping") {
    auto g = random_graph(60, 6, 3, 0.08, 3);
    const auto splits = make_splits(60, {0.48, 0.32, 0.20}, 1, 1);
    TrainConfig cfg;
    cfg.max_epochs = 120;
    cfg.patience = 15;
    cfg.seed = 42;
    for (Arch a : {Arch::Mlp, Arch::Gcn, Arch::FbGcn, Arch::FbSage}) {
        auto r1 = train(g, spec_for(a, 0.5), cfg, splits.splits[0]);
        auto r2 = train(g, spec_for(a, 0.5), cfg, splits.splits[0]);
        CHECK(r1.best_logits == r2.best_logits);
        CHECK(r1.history.size() == r2.history.size());
        for (std::size_t e = 0; e < r1.history.size(); ++e) CHECK(r1.history[e].train_loss == r2.history[e].train_loss);
        CHECK(r1.epochs_run <= r1.best_epoch + cfg.patience);
        CHECK(r1.history.size() == r1.epochs_run);
        CHECK(r1.test_accuracy >= 0.0);
        CHECK(r1.test_accuracy <= 1.0);
        // Best epoch is the first one reaching the maximum validation accuracy.
        double best = -1.0;
        std::size_t first = 0;
        for (const auto& h : r1.history)
            if (h.val_acc > best) best = h.val_acc, first = h.epoch;
        CHECK(r1.best_epoch == first);
        for (const auto& h : r1.history)
            for (auto [al, ah] : h.alphas) CHECK((al > 0 && al < 1 && ah > 0 && ah < 1));
    }
}

TEST_CASE("non-finite loss aborts with the epoch") {
    auto g = separable_toy(10, 4);
    auto x = g.features();
    x(0, 0) = std::numeric_limits<double>::quiet_NaN();
    auto bad = g.with_features(x);
    // A single linear layer, so no ReLU can mask the NaN before the loss.
    auto spec = spec_for(Arch::Mlp);
    spec.n_layers = 1;
    CHECK_THROWS_WITH_AS(train(bad, spec, TrainConfig{}, all_split(10)),
                         doctest::Contains("epoch 1"), Error);
}

TEST_CASE("config and split validation") {
    auto g = separable_toy(10, 4);
    TrainConfig cfg;
    cfg.patience = 600;
    CHECK_THROWS_AS(train(g, spec_for(Arch::Mlp), cfg, all_split(10)), Error);
    Split s = all_split(10);
    s.test.push_back(10);
    CHECK_THROWS_AS(train(g, spec_for(Arch::Mlp), TrainConfig{}, s), Error);
}

TEST_CASE("output smoothness") {
    auto g = random_graph(30, 2, 3, 0.15, 6);
    auto y = one_hot(g.labels(), 3);
    const double label_s = s_value(build_operator(g, OperatorKind::HatLsym), y);
    CHECK(output_smoothness(y, g) == label_s);
    DenseMatrix constant(30, 3);
    for (std::size_t i = 0; i < 30; ++i) constant(i, 1) = 1.0;
    CHECK(output_smoothness(constant, g, OutputEncoding::Argmax, OperatorKind::L) == 0.0);
    const double hat = output_smoothness(constant, g);
    CHECK(hat > 0.0);
    CHECK(hat < 0.5);
    // Large logits make softmax close to the one-hot encoding.
    auto sharp = y;
    sharp *= 50.0;
    CHECK(output_smoothness(sharp, g, OutputEncoding::Softmax) == doctest::Approx(label_s).epsilon(1e-9));
}

TEST_CASE("embeddings export") {
    auto g = random_graph(15, 4, 3, 0.3, 8);
    auto spec = spec_for(Arch::FbGcn);
    auto ps = init_params(spec, 4, 3, 1);
    auto h = embeddings(g, spec, ps, 1, EmbeddingChannel::Combined);
    CHECK(h.rows() == 15);
    CHECK(h.cols() == 8);
    const auto dir = testing::temp_dir("embeddings");
    export_embeddings(g, spec, ps, 1, EmbeddingChannel::Lp, dir / "lp.tsv");
    auto lp = embeddings(g, spec, ps, 1, EmbeddingChannel::Lp);
    std::ifstream in(dir / "lp.tsv");
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::vector<double> vals;
        for (std::string tok; std::getline(ss, tok, '\t');) vals.push_back(std::stod(tok));
        REQUIRE(vals.size() == 9);
        for (std::size_t c = 0; c < 8; ++c) CHECK(vals[c] == lp(row, c));
        CHECK(vals[8] == g.labels()[row]);
        ++row;
    }
    CHECK(row == 15);

    auto lp_only = spec;
    lp_only.channel_mode = ChannelMode::LpOnly;
    auto ps2 = init_params(lp_only, 4, 3, 1);
    CHECK_THROWS_AS(embeddings(g, lp_only, ps2, 1, EmbeddingChannel::Hp), Error);
    CHECK_THROWS_AS(embeddings(g, spec, ps, 3, EmbeddingChannel::Combined), Error);
    CHECK_THROWS_AS(embeddings(g, spec, ps, 0, EmbeddingChannel::Combined), Error);
    auto gcn = spec_for(Arch::Gcn);
    auto ps3 = init_params(gcn, 4, 3, 1);
    CHECK_THROWS_AS(embeddings(g, gcn, ps3, 1, EmbeddingChannel::Lp), Error);
    CHECK_THROWS_AS(parse_embedding_channel("mid"), Error);
}

TEST_CASE("experiments pair splits and are reproducible") {
    auto g = random_graph(50, 5, 3, 0.1, 9);
    auto splits = make_splits(50, {0.48, 0.32, 0.20}, 3, 4);
    TrainConfig cfg;
    cfg.max_epochs = 40;
    cfg.patience = 10;
    std::vector<ExperimentEntry> entries{
        {"gcn", spec_for(Arch::Gcn, 0.5), cfg, std::nullopt},
        {"gcn-again", spec_for(Arch::Gcn, 0.5), cfg, std::nullopt},
        {"fb", spec_for(Arch::FbGcn, 0.5), cfg, std::string("gcn")},
    };
    const auto dir = testing::temp_dir("experiment");
    ExperimentOptions opts;
    opts.out_dir = dir;
    opts.dataset = "toy";
    auto report = run_experiment(g, entries, splits, opts);
    CHECK(report.model("gcn").mean == report.model("gcn-again").mean);
    CHECK(report.model("gcn").test_accuracies == report.model("gcn-again").test_accuracies);
    const auto& fb = report.model("fb");
    REQUIRE(fb.deltas.size() == 4);
    double sum = 0.0;
    for (std::size_t s = 0; s < 4; ++s) {
        CHECK(fb.deltas[s] == fb.test_accuracies[s] - report.model("gcn").test_accuracies[s]);
        sum += fb.deltas[s];
    }
    CHECK(fb.mean_delta == doctest::Approx(sum / 4).epsilon(1e-15));
    for (const char* f : {"report.json", "history_fb_0.csv", "alphas_fb_3.csv", "params_gcn_1.json"})
        CHECK(std::filesystem::exists(dir / f));
    CHECK_FALSE(std::filesystem::exists(dir / "alphas_gcn_0.csv"));

    opts.workers = 3;
    opts.out_dir.reset();
    auto parallel = run_experiment(g, entries, splits, opts);
    for (std::size_t m = 0; m < 3; ++m)
        CHECK(parallel.models[m].test_accuracies == report.models[m].test_accuracies);

    entries[2].baseline = "nope";
    CHECK_THROWS_AS(run_experiment(g, entries, splits), Error);
}

TEST_CASE("tuned hyperparameters") {
    auto gcn = tuned_hyperparameters("Cornell", Arch::Gcn);
    REQUIRE(gcn);
    CHECK(gcn->lr == 0.05);
    CHECK(gcn->weight_decay == 5e-4);
    CHECK(gcn->dropout == 0.4);
    CHECK(gcn->hidden == 32);
    CHECK(tuned_hyperparameters("film", Arch::Mlp)->dropout == 0.9);
    CHECK(tuned_hyperparameters("actor", Arch::Mlp)->dropout == 0.9);
    CHECK(tuned_hyperparameters("texas", Arch::FbGcn, true)->weight_decay == 1e-3);
    CHECK(tuned_hyperparameters("texas", Arch::FbSage)->lr == 0.1);
    CHECK_FALSE(tuned_hyperparameters("ogbn-arxiv", Arch::Gcn));
}

TEST_CASE("filterbank beats GCN on a strongly heterophilic planted partition") {
    PlantedPartition pp;
    pp.n_nodes = 300;
    pp.homophily = 0.05;
    pp.feature_signal = 0.6;
    auto g = planted_partition(pp, 1);
    auto splits = make_splits(g.n_nodes(), {0.48, 0.32, 0.20}, 2, 3);
    TrainConfig cfg;
    cfg.max_epochs = 200;
    cfg.patience = 50;
    cfg.weight_decay = 5e-4;
    auto gcn = spec_for(Arch::Gcn, 0.3);
    gcn.hidden_dim = 16;
    auto fb = spec_for(Arch::FbGcn, 0.3);
    fb.hidden_dim = 16;
    auto report = run_experiment(g, {{"gcn", gcn, cfg, std::nullopt}, {"fb", fb, cfg, std::string("gcn")}}, splits);
    MESSAGE("gcn ", report.model("gcn").mean, " fb ", report.model("fb").mean);
    CHECK(report.model("fb").mean_delta > 0.03);
}
