#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "graphfb/graph.hpp"
#include "graphfb/random.hpp"

namespace graphfb {

/// G(n, p) edge list.
std::vector<Edge> erdos_renyi_edges(std::size_t n, double p, Rng& rng);

/// Connected graph on n nodes: a random spanning tree plus G(n, p) extras.
std::vector<Edge> connected_edges(std::size_t n, double p, Rng& rng);

/// Connected graph with Gaussian features and uniform labels; the labels cover
/// every class when n >= n_classes.
Graph random_graph(std::size_t n, std::size_t n_features, std::size_t n_classes, double p,
                   std::uint64_t seed);

struct PlantedPartition {
    std::size_t n_nodes = 200;
    std::size_t n_classes = 4;
    std::size_t n_features = 16;
    double avg_degree = 6.0;
    /// Fraction of edges joining same-class endpoints.
    double homophily = 0.1;
    /// Scale of the class signal relative to unit Gaussian feature noise.
    double feature_signal = 1.0;
};

/// Planted-partition graph whose edges mostly cross classes when homophily is
/// low. Features are a noisy class-dependent mean.
Graph planted_partition(const PlantedPartition& config, std::uint64_t seed);

struct EigengapSweep {
    std::size_t holds = 0;
    std::size_t total = 0;
    /// Smallest ratio_lazy - ratio_renorm observed.
    double min_margin = 0.0;
};

/// Checks the lazy-vs-renormalized eigengap inequality on `trials` random
/// connected non-bipartite graphs with 3..max_n nodes, for every gamma.
EigengapSweep eigengap_sweep(std::size_t max_n, std::size_t trials, std::span<const double> gammas,
                             std::uint64_t seed);

}  // namespace graphfb
