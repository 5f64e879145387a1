#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "graphfb/dense.hpp"
#include "graphfb/graph.hpp"
#include "graphfb/random.hpp"
#include "graphfb/synthetic.hpp"

namespace testing {

using namespace graphfb;

inline Graph make_graph(std::size_t n, std::vector<Edge> edges, std::size_t f = 1,
                        std::size_t c = 1) {
    DenseMatrix x(n, f, 1.0);
    std::vector<int> labels(n, 0);
    return Graph::from_edges(n, edges, std::move(x), std::move(labels), c);
}

inline Graph k2() { return make_graph(2, {{0, 1}}); }
inline Graph k3() { return make_graph(3, {{0, 1}, {1, 2}, {0, 2}}); }
inline Graph p3() { return make_graph(3, {{0, 1}, {1, 2}}); }

/// Dense adjacency, built independently of the CSR code path.
inline DenseMatrix adjacency(const Graph& g) {
    DenseMatrix a(g.n_nodes(), g.n_nodes());
    for (auto [i, j] : g.edge_list()) a(i, j) = a(j, i) = 1.0;
    return a;
}

inline DenseMatrix column(std::vector<double> v) { return DenseMatrix::column(v); }

inline DenseMatrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
    Rng rng(seed);
    DenseMatrix m(r, c);
    for (double& v : m.data()) v = rng.normal();
    return m;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
    auto p = std::filesystem::temp_directory_path() / ("graphfb_test_" + tag);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace testing
