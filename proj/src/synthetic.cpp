#include "graphfb/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "graphfb/spectral.hpp"

namespace graphfb {

std::vector<Edge> erdos_renyi_edges(std::size_t n, double p, Rng& rng) {
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (rng.uniform() < p) edges.emplace_back(i, j);
    return edges;
}

std::vector<Edge> connected_edges(std::size_t n, double p, Rng& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span(order));
    std::vector<Edge> edges;
    // Attach each node to a uniformly chosen earlier node of the shuffled order.
    for (std::size_t k = 1; k < n; ++k) edges.emplace_back(order[k], order[rng.below(k)]);
    auto extra = erdos_renyi_edges(n, p, rng);
    edges.insert(edges.end(), extra.begin(), extra.end());
    return edges;
}

Graph random_graph(std::size_t n, std::size_t n_features, std::size_t n_classes, double p,
                   std::uint64_t seed) {
    if (n == 0 || n_classes == 0) throw Error("random graph: n and n_classes must be positive");
    Rng rng(seed);
    auto edges = connected_edges(n, p, rng);
    DenseMatrix x(n, n_features);
    for (double& v : x.data()) v = rng.normal();
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = static_cast<int>(i < n_classes ? i : rng.below(n_classes));
    }
    rng.shuffle(std::span(labels));
    return Graph::from_edges(n, edges, std::move(x), std::move(labels), n_classes);
}

Graph planted_partition(const PlantedPartition& c, std::uint64_t seed) {
    if (c.n_classes < 2 || c.n_nodes < c.n_classes) {
        throw Error("planted partition: need at least 2 classes and one node per class");
    }
    Rng rng(seed);
    const std::size_t n = c.n_nodes;
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % c.n_classes);
    rng.shuffle(std::span(labels));

    std::vector<std::vector<std::size_t>> members(c.n_classes);
    for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);

    const auto n_edges = static_cast<std::size_t>(c.avg_degree * static_cast<double>(n) / 2.0);
    std::vector<Edge> edges;
    while (edges.size() < n_edges) {
        const std::size_t i = rng.below(n);
        const auto ci = static_cast<std::size_t>(labels[i]);
        std::size_t cj = ci;
        if (rng.uniform() >= c.homophily) cj = (ci + 1 + rng.below(c.n_classes - 1)) % c.n_classes;
        const auto& pool = members[cj];
        const std::size_t j = pool[rng.below(pool.size())];
        if (j != i) edges.emplace_back(i, j);
    }
    // Keep every node reachable so normalized operators are defined everywhere.
    for (std::size_t i = 1; i < n; ++i) edges.emplace_back(i, rng.below(i));

    DenseMatrix means(c.n_classes, c.n_features);
    for (double& v : means.data()) v = rng.normal();
    DenseMatrix x(n, c.n_features);
    for (std::size_t i = 0; i < n; ++i) {
        const auto m = means.row(static_cast<std::size_t>(labels[i]));
        for (std::size_t f = 0; f < c.n_features; ++f) x(i, f) = c.feature_signal * m[f] + rng.normal();
    }
    return Graph::from_edges(n, edges, std::move(x), std::move(labels), c.n_classes);
}

EigengapSweep eigengap_sweep(std::size_t max_n, std::size_t trials, std::span<const double> gammas,
                             std::uint64_t seed) {
    if (max_n < 3) throw Error("eigengap sweep: need n >= 3 for a non-bipartite graph");
    Rng rng(seed);
    EigengapSweep out;
    out.min_margin = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < trials; ++t) {
        Graph g;
        do {
            const std::size_t n = 3 + rng.below(max_n - 2);
            const double p = rng.uniform(0.05, 0.6);
            g = Graph::from_edges(n, connected_edges(n, p, rng), DenseMatrix(n, 1, 1.0),
                                  std::vector<int>(n, 0), 1);
        } while (is_bipartite(g));
        for (double gamma : gammas) {
            const auto r = eigengap_check(g, gamma);
            ++out.total;
            if (r.holds) ++out.holds;
            out.min_margin = std::min(out.min_margin, r.ratio_lazy - r.ratio_renorm);
        }
    }
    return out;
}

}  // namespace graphfb
