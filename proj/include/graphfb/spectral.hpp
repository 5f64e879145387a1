#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "graphfb/dense.hpp"
#include "graphfb/graph.hpp"

namespace graphfb {

/// The Laplacian / affinity operator family.
///
/// Names follow the usual notation: `hat` marks the renormalized variants
/// built on A+I and D+I; `Lrw`/`Llrw` are the lazy random walk and its
/// high-pass complement; `HatArwGamma` is the γ-generalized renormalized walk.
enum class OperatorKind {
    L,
    Lsym,
    Lrw,
    Asym,
    Arw,
    HatAsym,
    HatArw,
    HatLsym,
    HatLrw,
    Alrw,
    Llrw,
    HatArwGamma,
};

std::string_view to_string(OperatorKind kind);
OperatorKind parse_operator_kind(std::string_view name);
std::vector<OperatorKind> all_operator_kinds();

bool is_gamma_kind(OperatorKind kind);
bool is_symmetric_kind(OperatorKind kind);
bool is_row_stochastic_kind(OperatorKind kind);
/// Positive semi-definite Laplacian-type kinds (high-pass filters).
bool is_laplacian_kind(OperatorKind kind);
/// Kinds that divide by the plain degree and therefore reject isolated nodes.
bool needs_positive_degree(OperatorKind kind);

/// High-pass partner of a low-pass kind with LP + HP = I, if any.
std::optional<OperatorKind> complement_of(OperatorKind kind);
bool is_reconstruction_pair(OperatorKind lp, OperatorKind hp);

/// Immutable CSR matrix tagged with its operator kind.
///
/// Non-symmetric kinds are all of the form S⁻¹B with S a positive diagonal
/// and B symmetric; `similarity_scale()` holds diag(S) so the symmetric twin
/// S^{1/2} M S^{-1/2} can be formed for eigensolving.
class SparseOperator {
public:
    SparseOperator(OperatorKind kind, std::optional<double> gamma, std::size_t n,
                   std::vector<std::size_t> row_offsets, std::vector<std::size_t> cols,
                   std::vector<double> values, std::vector<double> similarity_scale);

    OperatorKind kind() const noexcept { return kind_; }
    std::optional<double> gamma() const noexcept { return gamma_; }
    std::size_t n() const noexcept { return n_; }
    std::size_t nnz() const noexcept { return values_.size(); }

    std::span<const std::size_t> row_offsets() const noexcept { return offsets_; }
    std::span<const std::size_t> column_indices() const noexcept { return cols_; }
    std::span<const double> values() const noexcept { return values_; }
    std::span<const double> similarity_scale() const noexcept { return scale_; }

    /// Entry (i, j); zero when not stored.
    double at(std::size_t i, std::size_t j) const;

    DenseMatrix to_dense() const;

    /// Symmetric twin S^{1/2} M S^{-1/2}; the matrix itself for symmetric kinds.
    SparseOperator symmetric_twin() const;

private:
    OperatorKind kind_;
    std::optional<double> gamma_;
    std::size_t n_;
    std::vector<std::size_t> offsets_;
    std::vector<std::size_t> cols_;
    std::vector<double> values_;
    std::vector<double> scale_;
};

SparseOperator build_operator(const Graph& graph, OperatorKind kind,
                              std::optional<double> gamma = std::nullopt);

/// Sparse-dense product M·X with a fixed per-row summation order.
DenseMatrix apply(const SparseOperator& op, const DenseMatrix& x);
/// Mᵀ·X.
DenseMatrix apply_transposed(const SparseOperator& op, const DenseMatrix& x);

/// Entry-wise sum of two operators over the union of their patterns.
DenseMatrix dense_sum(const SparseOperator& a, const SparseOperator& b);

struct Eigendecomposition {
    std::vector<double> values;  // ascending
    /// Column i pairs with values[i]. Orthonormal for symmetric kinds; for the
    /// others these are the operator's own (unit-length) right eigenvectors,
    /// obtained from the symmetric twin by u = S^{-1/2} u_sym.
    DenseMatrix vectors;
    /// Orthonormal eigenvectors of the symmetric twin.
    DenseMatrix twin_vectors;
};

inline constexpr std::size_t kDefaultEigenCap = 3000;

Eigendecomposition dense_eig(const SparseOperator& op, std::size_t cap = kDefaultEigenCap);

/// Uᵀ·x for each column of x.
DenseMatrix graph_fourier(const DenseMatrix& basis, const DenseMatrix& x);
/// U·c, the inverse transform.
DenseMatrix inverse_graph_fourier(const DenseMatrix& basis, const DenseMatrix& coeffs);

bool is_connected(const Graph& graph);
/// Two-coloring BFS over every component.
bool is_bipartite(const Graph& graph);

struct EigengapResult {
    double lambda1_lazy = 0.0;
    double lambda2_lazy = 0.0;
    double lambda1_renorm = 0.0;
    double lambda2_renorm = 0.0;
    double ratio_lazy = 0.0;
    double ratio_renorm = 0.0;
    bool holds = false;
};

/// Compares λ₂/λ₁ of the γ-lazy random walk against the γ-renormalized walk.
EigengapResult eigengap_check(const Graph& graph, double gamma);

/// Writes the operator in MatrixMarket coordinate (general, real) format.
std::string to_matrix_market(const SparseOperator& op);
void export_matrix_market(const SparseOperator& op, const std::filesystem::path& file);

}  // namespace graphfb
