#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "graphfb/dense.hpp"

namespace graphfb {

using Edge = std::pair<std::size_t, std::size_t>;

/// Counts of raw edge records that did not become stored edges.
struct EdgeCleanup {
    std::size_t self_loops = 0;
    std::size_t duplicates = 0;  // includes the reverse copy of an already-seen edge
};

/// Immutable undirected graph with node features and class labels.
///
/// Adjacency is kept in CSR form with sorted neighbor lists. Self-loops are
/// never stored; operators that need them add them at build time.
class Graph {
public:
    Graph() = default;

    /// Validates and canonicalizes an edge list. Directed input is symmetrized,
    /// duplicates and self-loops are dropped and counted in `cleanup`.
    static Graph from_edges(std::size_t n_nodes, std::span<const Edge> edges,
                            DenseMatrix features, std::vector<int> labels,
                            std::size_t n_classes, EdgeCleanup* cleanup = nullptr);

    std::size_t n_nodes() const noexcept { return labels_.size(); }
    std::size_t n_edges() const noexcept { return neighbors_.size() / 2; }
    std::size_t n_features() const noexcept { return features_.cols(); }
    std::size_t n_classes() const noexcept { return n_classes_; }

    std::size_t degree(std::size_t i) const noexcept { return offsets_[i + 1] - offsets_[i]; }
    std::span<const std::size_t> neighbors(std::size_t i) const noexcept {
        return {neighbors_.data() + offsets_[i], degree(i)};
    }
    bool has_edge(std::size_t i, std::size_t j) const;

    std::span<const std::size_t> offsets() const noexcept { return offsets_; }
    std::span<const std::size_t> column_indices() const noexcept { return neighbors_; }
    std::vector<std::size_t> degrees() const;

    const DenseMatrix& features() const noexcept { return features_; }
    std::span<const int> labels() const noexcept { return labels_; }

    /// Undirected edges with src < dst, sorted lexicographically.
    std::vector<Edge> edge_list() const;

    /// Same topology and labels with new node features.
    Graph with_features(DenseMatrix features) const;

    /// Relabels node i as perm[i].
    Graph permuted(std::span<const std::size_t> perm) const;

    friend bool operator==(const Graph&, const Graph&) = default;

private:
    std::vector<std::size_t> offsets_{0};
    std::vector<std::size_t> neighbors_;
    DenseMatrix features_;
    std::vector<int> labels_;
    std::size_t n_classes_ = 0;
};

/// Scales each feature row to unit L1 norm; all-zero rows are left as is.
DenseMatrix row_normalize(const DenseMatrix& features);

struct ImportOptions {
    bool row_normalize = false;
    /// Declared number of classes; inferred as max label + 1 when absent.
    std::optional<std::size_t> n_classes;
};

struct ImportResult {
    Graph graph;
    EdgeCleanup cleanup;
};

/// Reads a node file of `<id>\t<comma-separated features>\t<label>` lines and an
/// edge file of `<src> <dst>` lines. A leading non-numeric header line is skipped
/// in either file.
ImportResult import_raw(const std::filesystem::path& node_file,
                        const std::filesystem::path& edge_file, const ImportOptions& options = {});

void save_canonical(const Graph& graph, const std::filesystem::path& dir);
Graph load_canonical(const std::filesystem::path& dir);

/// Loads either a canonical directory or a directory holding raw
/// `out1_node_feature_label.txt` / `out1_graph_edges.txt` files.
Graph load_dataset(const std::filesystem::path& dir, bool row_normalize_features = false);

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;

    friend bool operator==(const Split&, const Split&) = default;
};

struct SplitSet {
    std::uint64_t seed = 0;
    std::array<double, 3> ratios{0.48, 0.32, 0.20};
    std::vector<Split> splits;

    friend bool operator==(const SplitSet&, const SplitSet&) = default;
};

/// Sizes of (train, val, test): floor for the first two, remainder to test.
std::array<std::size_t, 3> split_sizes(std::size_t n_nodes, const std::array<double, 3>& ratios);

/// `count` independent uniformly random partitions of [0, n_nodes).
SplitSet make_splits(std::size_t n_nodes, const std::array<double, 3>& ratios, std::uint64_t seed,
                     std::size_t count);

std::string splits_to_json(const SplitSet& splits);
SplitSet splits_from_json(const std::string& text);
void save_splits(const SplitSet& splits, const std::filesystem::path& file);
SplitSet load_splits(const std::filesystem::path& file);

/// Writes `content` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

}  // namespace graphfb
