#include "graphfb/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <functional>

#include <Eigen/Dense>

namespace graphfb {

namespace {

struct KindInfo {
    OperatorKind kind;
    std::string_view name;
    bool symmetric;
    bool row_stochastic;
    bool laplacian;
    bool gamma;
    bool positive_degree;
};

constexpr KindInfo kKinds[] = {
    {OperatorKind::L, "L", true, false, true, false, false},
    {OperatorKind::Lsym, "L_sym", true, false, true, false, true},
    {OperatorKind::Lrw, "L_rw", false, false, true, false, true},
    {OperatorKind::Asym, "A_sym", true, false, false, false, true},
    {OperatorKind::Arw, "A_rw", false, true, false, false, true},
    {OperatorKind::HatAsym, "hatA_sym", true, false, false, false, false},
    {OperatorKind::HatArw, "hatA_rw", false, true, false, false, false},
    {OperatorKind::HatLsym, "hatL_sym", true, false, true, false, false},
    {OperatorKind::HatLrw, "hatL_rw", false, false, true, false, false},
    {OperatorKind::Alrw, "A_lrw", false, true, false, true, true},
    {OperatorKind::Llrw, "L_lrw", false, false, true, true, true},
    {OperatorKind::HatArwGamma, "hatA_rw_gamma", false, true, false, true, false},
};

const KindInfo& info(OperatorKind kind) {
    for (const auto& k : kKinds)
        if (k.kind == kind) return k;
    throw Error("unknown operator kind");
}

}  // namespace

std::string_view to_string(OperatorKind kind) { return info(kind).name; }

OperatorKind parse_operator_kind(std::string_view name) {
    for (const auto& k : kKinds)
        if (k.name == name) return k.kind;
    std::string known;
    for (const auto& k : kKinds) {
        if (!known.empty()) known += ", ";
        known += k.name;
    }
    throw Error("unknown operator '" + std::string(name) + "' (known: " + known + ")");
}

std::vector<OperatorKind> all_operator_kinds() {
    std::vector<OperatorKind> out;
    for (const auto& k : kKinds) out.push_back(k.kind);
    return out;
}

bool is_gamma_kind(OperatorKind kind) { return info(kind).gamma; }
bool is_symmetric_kind(OperatorKind kind) { return info(kind).symmetric; }
bool is_row_stochastic_kind(OperatorKind kind) { return info(kind).row_stochastic; }
bool is_laplacian_kind(OperatorKind kind) { return info(kind).laplacian; }
bool needs_positive_degree(OperatorKind kind) { return info(kind).positive_degree; }

std::optional<OperatorKind> complement_of(OperatorKind kind) {
    switch (kind) {
        case OperatorKind::Asym: return OperatorKind::Lsym;
        case OperatorKind::Lsym: return OperatorKind::Asym;
        case OperatorKind::Arw: return OperatorKind::Lrw;
        case OperatorKind::Lrw: return OperatorKind::Arw;
        case OperatorKind::HatAsym: return OperatorKind::HatLsym;
        case OperatorKind::HatLsym: return OperatorKind::HatAsym;
        case OperatorKind::HatArw: return OperatorKind::HatLrw;
        case OperatorKind::HatLrw: return OperatorKind::HatArw;
        case OperatorKind::Alrw: return OperatorKind::Llrw;
        case OperatorKind::Llrw: return OperatorKind::Alrw;
        default: return std::nullopt;
    }
}

bool is_reconstruction_pair(OperatorKind lp, OperatorKind hp) {
    return !is_laplacian_kind(lp) && complement_of(lp) == hp;
}

// ---------------------------------------------------------------------------
// SparseOperator
// ---------------------------------------------------------------------------

SparseOperator::SparseOperator(OperatorKind kind, std::optional<double> gamma, std::size_t n,
                               std::vector<std::size_t> row_offsets, std::vector<std::size_t> cols,
                               std::vector<double> values, std::vector<double> similarity_scale)
    : kind_(kind),
      gamma_(gamma),
      n_(n),
      offsets_(std::move(row_offsets)),
      cols_(std::move(cols)),
      values_(std::move(values)),
      scale_(std::move(similarity_scale)) {
    if (offsets_.size() != n_ + 1 || cols_.size() != values_.size() ||
        offsets_.back() != values_.size() || scale_.size() != n_) {
        throw Error("sparse operator: inconsistent CSR arrays");
    }
}

double SparseOperator::at(std::size_t i, std::size_t j) const {
    auto b = cols_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]);
    auto e = cols_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]);
    auto it = std::lower_bound(b, e, j);
    if (it == e || *it != j) return 0.0;
    return values_[static_cast<std::size_t>(it - cols_.begin())];
}

DenseMatrix SparseOperator::to_dense() const {
    DenseMatrix m(n_, n_);
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) m(i, cols_[k]) = values_[k];
    return m;
}

SparseOperator SparseOperator::symmetric_twin() const {
    if (is_symmetric_kind(kind_)) return *this;
    std::vector<double> vals(values_.size());
    for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) {
            vals[k] = values_[k] * std::sqrt(scale_[i] / scale_[cols_[k]]);
        }
    }
    return SparseOperator(kind_, gamma_, n_, offsets_, cols_, std::move(vals),
                          std::vector<double>(n_, 1.0));
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

SparseOperator build_operator(const Graph& graph, OperatorKind kind, std::optional<double> gamma) {
    const auto& ki = info(kind);
    if (ki.gamma) {
        if (!gamma) throw Error(std::string(ki.name) + " requires a gamma parameter");
        if (!(*gamma > 0.0) || !std::isfinite(*gamma)) {
            throw Error("invalid gamma for " + std::string(ki.name) + ": must be positive");
        }
    } else if (gamma) {
        throw Error(std::string(ki.name) + " does not take a gamma parameter");
    }

    const std::size_t n = graph.n_nodes();
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = static_cast<double>(graph.degree(i));
    if (ki.positive_degree) {
        for (std::size_t i = 0; i < n; ++i)
            if (d[i] == 0.0) throw Error("isolated node at index " + std::to_string(i));
    }
    const double g = gamma.value_or(0.0);

    // Diagonal entry, off-diagonal entry for neighbor j of i, and whether the
    // diagonal is stored at all.
    std::vector<double> inv_sqrt(n), scale(n, 1.0);
    bool has_diag = true;
    std::function<double(std::size_t)> diag;
    std::function<double(std::size_t, std::size_t)> off;

    switch (kind) {
        case OperatorKind::L:
            diag = [&](std::size_t i) { return d[i]; };
            off = [](std::size_t, std::size_t) { return -1.0; };
            break;
        case OperatorKind::Lsym:
            for (std::size_t i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(d[i]);
            diag = [](std::size_t) { return 1.0; };
            off = [&](std::size_t i, std::size_t j) { return -(inv_sqrt[i] * inv_sqrt[j]); };
            break;
        case OperatorKind::Lrw:
            scale = d;
            diag = [](std::size_t) { return 1.0; };
            off = [&](std::size_t i, std::size_t) { return -(1.0 / d[i]); };
            break;
        case OperatorKind::Asym:
            for (std::size_t i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(d[i]);
            has_diag = false;
            off = [&](std::size_t i, std::size_t j) { return inv_sqrt[i] * inv_sqrt[j]; };
            break;
        case OperatorKind::Arw:
            scale = d;
            has_diag = false;
            off = [&](std::size_t i, std::size_t) { return 1.0 / d[i]; };
            break;
        case OperatorKind::HatAsym:
            for (std::size_t i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(d[i] + 1.0);
            diag = [&](std::size_t i) { return inv_sqrt[i] * inv_sqrt[i]; };
            off = [&](std::size_t i, std::size_t j) { return inv_sqrt[i] * inv_sqrt[j]; };
            break;
        case OperatorKind::HatLsym:
            for (std::size_t i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(d[i] + 1.0);
            diag = [&](std::size_t i) { return 1.0 - inv_sqrt[i] * inv_sqrt[i]; };
            off = [&](std::size_t i, std::size_t j) { return -(inv_sqrt[i] * inv_sqrt[j]); };
            break;
        case OperatorKind::HatArw:
            for (std::size_t i = 0; i < n; ++i) scale[i] = d[i] + 1.0;
            diag = [&](std::size_t i) { return 1.0 / scale[i]; };
            off = [&](std::size_t i, std::size_t) { return 1.0 / scale[i]; };
            break;
        case OperatorKind::HatLrw:
            for (std::size_t i = 0; i < n; ++i) scale[i] = d[i] + 1.0;
            diag = [&](std::size_t i) { return 1.0 - 1.0 / scale[i]; };
            off = [&](std::size_t i, std::size_t) { return -(1.0 / scale[i]); };
            break;
        case OperatorKind::Alrw:
            scale = d;
            diag = [&](std::size_t) { return g / (1.0 + g); };
            off = [&](std::size_t i, std::size_t) { return (1.0 / d[i]) / (1.0 + g); };
            break;
        case OperatorKind::Llrw:
            scale = d;
            diag = [&](std::size_t) { return 1.0 - g / (1.0 + g); };
            off = [&](std::size_t i, std::size_t) { return -((1.0 / d[i]) / (1.0 + g)); };
            break;
        case OperatorKind::HatArwGamma:
            for (std::size_t i = 0; i < n; ++i) scale[i] = g + d[i];
            diag = [&](std::size_t i) { return g / scale[i]; };
            off = [&](std::size_t i, std::size_t) { return 1.0 / scale[i]; };
            break;
    }

    std::vector<std::size_t> offsets(n + 1, 0), cols;
    std::vector<double> vals;
    cols.reserve(graph.column_indices().size() + n);
    vals.reserve(cols.capacity());
    for (std::size_t i = 0; i < n; ++i) {
        bool diag_done = !has_diag;
        for (std::size_t j : graph.neighbors(i)) {
            if (!diag_done && j > i) {
                cols.push_back(i);
                vals.push_back(diag(i));
                diag_done = true;
            }
            cols.push_back(j);
            vals.push_back(off(i, j));
        }
        if (!diag_done) {
            cols.push_back(i);
            vals.push_back(diag(i));
        }
        offsets[i + 1] = cols.size();
    }
    return SparseOperator(kind, gamma, n, std::move(offsets), std::move(cols), std::move(vals),
                          std::move(scale));
}

// ---------------------------------------------------------------------------
// Application
// ---------------------------------------------------------------------------

DenseMatrix apply(const SparseOperator& op, const DenseMatrix& x) {
    if (x.rows() != op.n()) {
        throw Error("apply: operator is " + std::to_string(op.n()) + "x" + std::to_string(op.n()) +
                    " but signal has " + std::to_string(x.rows()) + " rows");
    }
    DenseMatrix y(x.rows(), x.cols());
    const auto offs = op.row_offsets();
    const auto cols = op.column_indices();
    const auto vals = op.values();
    const std::size_t f = x.cols();
    for (std::size_t i = 0; i < op.n(); ++i) {
        double* dst = y.row(i).data();
        for (std::size_t k = offs[i]; k < offs[i + 1]; ++k) {
            const double w = vals[k];
            const double* src = x.row(cols[k]).data();
            for (std::size_t c = 0; c < f; ++c) dst[c] += w * src[c];
        }
    }
    return y;
}

DenseMatrix apply_transposed(const SparseOperator& op, const DenseMatrix& x) {
    if (is_symmetric_kind(op.kind())) return apply(op, x);
    if (x.rows() != op.n()) {
        throw Error("apply_transposed: operator is " + std::to_string(op.n()) +
                    " wide but signal has " + std::to_string(x.rows()) + " rows");
    }
    DenseMatrix y(x.rows(), x.cols());
    const auto offs = op.row_offsets();
    const auto cols = op.column_indices();
    const auto vals = op.values();
    const std::size_t f = x.cols();
    for (std::size_t i = 0; i < op.n(); ++i) {
        const double* src = x.row(i).data();
        for (std::size_t k = offs[i]; k < offs[i + 1]; ++k) {
            const double w = vals[k];
            double* dst = y.row(cols[k]).data();
            for (std::size_t c = 0; c < f; ++c) dst[c] += w * src[c];
        }
    }
    return y;
}

DenseMatrix dense_sum(const SparseOperator& a, const SparseOperator& b) {
    if (a.n() != b.n()) throw Error("dense_sum: dimension mismatch");
    return a.to_dense() + b.to_dense();
}

// ---------------------------------------------------------------------------
// Eigensolver oracle
// ---------------------------------------------------------------------------

Eigendecomposition dense_eig(const SparseOperator& op, std::size_t cap) {
    const std::size_t n = op.n();
    if (n > cap) {
        throw Error("dense_eig: n=" + std::to_string(n) + " exceeds the cap of " +
                    std::to_string(cap));
    }
    const SparseOperator twin = op.symmetric_twin();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                              static_cast<Eigen::Index>(n));
    const auto offs = twin.row_offsets();
    const auto cols = twin.column_indices();
    const auto vals = twin.values();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = offs[i]; k < offs[i + 1]; ++k)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(cols[k])) = vals[k];
    m = 0.5 * (m + m.transpose()).eval();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
    if (solver.info() != Eigen::Success) throw Error("dense_eig: eigensolver did not converge");

    Eigendecomposition out;
    out.values.resize(n);
    out.twin_vectors = DenseMatrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = solver.eigenvalues()(static_cast<Eigen::Index>(j));
        for (std::size_t i = 0; i < n; ++i) {
            out.twin_vectors(i, j) =
                solver.eigenvectors()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
    }
    if (is_symmetric_kind(op.kind())) {
        out.vectors = out.twin_vectors;
        return out;
    }
    const auto s = op.similarity_scale();
    out.vectors = DenseMatrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = out.twin_vectors(i, j) / std::sqrt(s[i]);
            out.vectors(i, j) = v;
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) /= norm;
    }
    return out;
}

DenseMatrix graph_fourier(const DenseMatrix& basis, const DenseMatrix& x) {
    if (basis.rows() != x.rows()) {
        throw Error("graph_fourier: basis has " + std::to_string(basis.rows()) +
                    " rows, signal has " + std::to_string(x.rows()));
    }
    return matmul_tn(basis, x);
}

DenseMatrix inverse_graph_fourier(const DenseMatrix& basis, const DenseMatrix& coeffs) {
    if (basis.cols() != coeffs.rows()) throw Error("inverse_graph_fourier: dimension mismatch");
    return matmul(basis, coeffs);
}

// ---------------------------------------------------------------------------
// Topology checks and eigengap
// ---------------------------------------------------------------------------

bool is_connected(const Graph& graph) {
    const std::size_t n = graph.n_nodes();
    if (n == 0) return true;
    std::vector<char> seen(n, 0);
    std::deque<std::size_t> queue{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!queue.empty()) {
        auto u = queue.front();
        queue.pop_front();
        for (auto v : graph.neighbors(u)) {
            if (!seen[v]) {
                seen[v] = 1;
                ++count;
                queue.push_back(v);
            }
        }
    }
    return count == n;
}

bool is_bipartite(const Graph& graph) {
    const std::size_t n = graph.n_nodes();
    std::vector<int> color(n, -1);
    for (std::size_t s = 0; s < n; ++s) {
        if (color[s] != -1) continue;
        color[s] = 0;
        std::deque<std::size_t> queue{s};
        while (!queue.empty()) {
            auto u = queue.front();
            queue.pop_front();
            for (auto v : graph.neighbors(u)) {
                if (color[v] == -1) {
                    color[v] = 1 - color[u];
                    queue.push_back(v);
                } else if (color[v] == color[u]) {
                    return false;
                }
            }
        }
    }
    return true;
}

EigengapResult eigengap_check(const Graph& graph, double gamma) {
    if (!(gamma > 0.0)) throw Error("eigengap: gamma must be positive");
    if (graph.n_nodes() < 2) throw Error("eigengap: graph needs at least two nodes");
    if (!is_connected(graph)) throw Error("eigengap: graph is disconnected");
    if (is_bipartite(graph)) throw Error("eigengap: graph is bipartite");

    const auto lazy = dense_eig(build_operator(graph, OperatorKind::Alrw, gamma));
    const auto renorm = dense_eig(build_operator(graph, OperatorKind::HatArwGamma, gamma));
    const std::size_t n = graph.n_nodes();

    EigengapResult r;
    r.lambda1_lazy = lazy.values[n - 1];
    r.lambda2_lazy = lazy.values[n - 2];
    r.lambda1_renorm = renorm.values[n - 1];
    r.lambda2_renorm = renorm.values[n - 2];
    for (double l1 : {r.lambda1_lazy, r.lambda1_renorm}) {
        if (std::abs(l1 - 1.0) > 1e-10) {
            throw Error("eigengap: leading eigenvalue " + std::to_string(l1) + " is not 1");
        }
    }
    r.ratio_lazy = r.lambda2_lazy / r.lambda1_lazy;
    r.ratio_renorm = r.lambda2_renorm / r.lambda1_renorm;
    r.holds = r.ratio_lazy >= r.ratio_renorm - 1e-10;
    return r;
}

// ---------------------------------------------------------------------------
// MatrixMarket export
// ---------------------------------------------------------------------------

std::string to_matrix_market(const SparseOperator& op) {
    std::string out = "%%MatrixMarket matrix coordinate real general\n";
    out += "% operator " + std::string(to_string(op.kind()));
    if (op.gamma()) out += " gamma=" + std::to_string(*op.gamma());
    out += "\n";
    out += std::to_string(op.n()) + " " + std::to_string(op.n()) + " " + std::to_string(op.nnz()) +
           "\n";
    const auto offs = op.row_offsets();
    const auto cols = op.column_indices();
    const auto vals = op.values();
    char buf[64];
    for (std::size_t i = 0; i < op.n(); ++i) {
        for (std::size_t k = offs[i]; k < offs[i + 1]; ++k) {
            std::snprintf(buf, sizeof buf, "%zu %zu %.17g\n", i + 1, cols[k] + 1, vals[k]);
            out += buf;
        }
    }
    return out;
}

void export_matrix_market(const SparseOperator& op, const std::filesystem::path& file) {
    write_file_atomic(file, to_matrix_market(op));
}

}  // namespace graphfb
