#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>

#include "graphfb/graph.hpp"
#include "support.hpp"

using namespace graphfb;

namespace {
void write(const std::filesystem::path& p, const std::string& s) {
    std::ofstream(p) << s;
}
}  // namespace

TEST_CASE("from_edges canonicalizes") {
    EdgeCleanup cleanup;
    auto g = Graph::from_edges(3, std::vector<Edge>{{0, 1}, {1, 0}, {2, 2}}, DenseMatrix(3, 1),
                               {0, 0, 0}, 1, &cleanup);
    CHECK(g.n_edges() == 1);
    CHECK(cleanup.self_loops == 1);
    CHECK(cleanup.duplicates == 1);
    CHECK(g.has_edge(1, 0));
    CHECK_FALSE(g.has_edge(2, 2));
    CHECK(g.degree(2) == 0);
}

TEST_CASE("from_edges validates") {
    CHECK_THROWS_AS(Graph::from_edges(2, std::vector<Edge>{{0, 2}}, DenseMatrix(2, 1), {0, 0}, 1),
                    Error);
    CHECK_THROWS_AS(Graph::from_edges(2, std::vector<Edge>{{0, 1}}, DenseMatrix(2, 1), {0, 3}, 2),
                    Error);
    CHECK_THROWS_AS(Graph::from_edges(2, std::vector<Edge>{{0, 1}}, DenseMatrix(3, 1), {0, 0}, 1),
                    Error);
}

TEST_CASE("degree sum is twice the edge count") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto g = random_graph(25, 2, 3, 0.2, seed);
        const auto d = g.degrees();
        CHECK(std::accumulate(d.begin(), d.end(), std::size_t{0}) == 2 * g.n_edges());
        for (std::size_t i = 0; i < g.n_nodes(); ++i)
            for (std::size_t j : g.neighbors(i)) CHECK(g.has_edge(j, i));
    }
}

TEST_CASE("import_raw reads the triangle and applies the edge policy") {
    const auto dir = testing::temp_dir("import");
    write(dir / "nodes.txt", "node_id\tfeature\tlabel\n0\t1,0\t0\n1\t0,1\t1\n2\t1,1\t0\n");
    write(dir / "edges.txt", "node_id\tnode_id\n0\t1\n1\t2\n2\t0\n");
    auto r = import_raw(dir / "nodes.txt", dir / "edges.txt");
    CHECK(r.graph.n_nodes() == 3);
    CHECK(r.graph.n_features() == 2);
    CHECK(r.graph.n_classes() == 2);
    CHECK(r.graph.degrees() == std::vector<std::size_t>{2, 2, 2});

    write(dir / "edges2.txt", "0 1\n1 0\n2 2\n");
    r = import_raw(dir / "nodes.txt", dir / "edges2.txt");
    CHECK(r.graph.n_edges() == 1);
    CHECK(r.cleanup.self_loops == 1);

    auto rn = import_raw(dir / "nodes.txt", dir / "edges.txt", {true, std::nullopt});
    CHECK(rn.graph.features()(2, 0) == 0.5);
}

TEST_CASE("import_raw error paths") {
    const auto dir = testing::temp_dir("import_err");
    write(dir / "edges.txt", "0 1\n");
    write(dir / "empty_edges.txt", "");
    write(dir / "gap.txt", "0\t1\t0\n2\t1\t0\n");
    write(dir / "ragged.txt", "0\t1,2\t0\n1\t1\t0\n");
    write(dir / "ok.txt", "0\t1\t0\n1\t1\t2\n");
    CHECK_THROWS_WITH_AS(import_raw(dir / "gap.txt", dir / "edges.txt"),
                         doctest::Contains("not contiguous"), Error);
    CHECK_THROWS_WITH_AS(import_raw(dir / "ragged.txt", dir / "edges.txt"),
                         doctest::Contains("ragged"), Error);
    CHECK_THROWS_WITH_AS(import_raw(dir / "ok.txt", dir / "edges.txt", {false, 2}),
                         doctest::Contains("outside declared range"), Error);
    CHECK_THROWS_WITH_AS(import_raw(dir / "ok.txt", dir / "empty_edges.txt"),
                         doctest::Contains("empty edge set"), Error);
    CHECK_THROWS_AS(import_raw(dir / "absent.txt", dir / "edges.txt"), Error);
}

TEST_CASE("canonical round trip") {
    const auto dir = testing::temp_dir("canonical");
    auto g = random_graph(30, 4, 3, 0.15, 5);
    save_canonical(g, dir);
    const auto first = read_file(dir / "features.tsv") + read_file(dir / "edges.tsv");
    auto h = load_canonical(dir);
    CHECK(h == g);
    CHECK(h.features() == g.features());
    save_canonical(h, dir);
    CHECK(read_file(dir / "features.tsv") + read_file(dir / "edges.tsv") == first);
    CHECK(load_dataset(dir) == g);

    std::filesystem::remove(dir / "labels.tsv");
    CHECK_THROWS_WITH_AS(load_canonical(dir), doctest::Contains("missing labels"), Error);
}

TEST_CASE("canonical loader detects inconsistent meta") {
    const auto dir = testing::temp_dir("canonical_bad");
    save_canonical(testing::k3(), dir);
    write(dir / "meta.json", R"({"n_nodes": 4, "n_features": 1, "n_classes": 1})");
    CHECK_THROWS_WITH_AS(load_canonical(dir), doctest::Contains("inconsistency"), Error);
}

TEST_CASE("split sizes use floor then remainder") {
    const std::array<double, 3> r{0.48, 0.32, 0.20};
    CHECK(split_sizes(10, r) == std::array<std::size_t, 3>{4, 3, 3});
    CHECK(split_sizes(183, r) == std::array<std::size_t, 3>{87, 58, 38});
    auto s = make_splits(10, r, 7, 3);
    CHECK(s.splits.size() == 3);
    CHECK(s.splits[0].train.size() == 4);
    CHECK(s.splits[0].test.size() == 3);
}

TEST_CASE("splits partition the nodes and are deterministic") {
    const std::array<double, 3> r{0.48, 0.32, 0.20};
    auto a = make_splits(183, r, 11, 10);
    auto b = make_splits(183, r, 11, 10);
    CHECK(a == b);
    CHECK_FALSE(a == make_splits(183, r, 12, 10));
    CHECK_FALSE(a.splits[0] == a.splits[1]);
    for (const auto& s : a.splits) {
        std::vector<std::size_t> all;
        for (const auto* part : {&s.train, &s.val, &s.test}) all.insert(all.end(), part->begin(), part->end());
        std::sort(all.begin(), all.end());
        std::vector<std::size_t> want(183);
        std::iota(want.begin(), want.end(), 0);
        CHECK(all == want);
    }
    CHECK(splits_from_json(splits_to_json(a)) == a);
    CHECK_THROWS_AS(make_splits(10, {0.5, 0.3, 0.3}, 0, 1), Error);
    CHECK_THROWS_AS(make_splits(10, r, 0, 0), Error);
}

TEST_CASE("permuted relabels nodes") {
    auto g = random_graph(12, 3, 2, 0.3, 3);
    std::vector<std::size_t> perm(12);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(4);
    rng.shuffle(std::span(perm));
    auto h = g.permuted(perm);
    for (auto [i, j] : g.edge_list()) CHECK(h.has_edge(perm[i], perm[j]));
    CHECK(h.n_edges() == g.n_edges());
    for (std::size_t i = 0; i < 12; ++i) {
        CHECK(h.labels()[perm[i]] == g.labels()[i]);
        CHECK(h.features()(perm[i], 1) == g.features()(i, 1));
    }
}

TEST_CASE("row normalization") {
    DenseMatrix x(2, 2, std::vector<double>{1, 3, 0, 0});
    auto y = row_normalize(x);
    CHECK(y(0, 0) == 0.25);
    CHECK(y(0, 1) == 0.75);
    CHECK(y(1, 0) == 0.0);
}
