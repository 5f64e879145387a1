#include "graphfb/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace graphfb {

void Parameter::zero_grad() {
    if (grad.same_shape(value)) {
        grad.fill(0.0);
    } else {
        grad = DenseMatrix(value.rows(), value.cols());
    }
}

void zero_grad(std::span<Parameter> params) {
    for (auto& p : params) p.zero_grad();
}

std::size_t parameter_count(std::span<const Parameter> params) {
    std::size_t n = 0;
    for (const auto& p : params) n += p.value.size();
    return n;
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

Tape::Node& Tape::node(Var v) {
    if (!v.valid()) throw Error("tape: use of an unset variable (backward before forward?)");
    if (v.tape_ != this || v.id_ >= nodes_.size()) throw Error("tape: variable from another tape");
    return nodes_[v.id_];
}

const Tape::Node& Tape::node(Var v) const {
    if (!v.valid()) throw Error("tape: use of an unset variable (backward before forward?)");
    if (v.tape_ != this || v.id_ >= nodes_.size()) throw Error("tape: variable from another tape");
    return nodes_[v.id_];
}

Var Tape::push(DenseMatrix value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(Var v, const DenseMatrix& g) {
    Node& n = nodes_[v.id_];
    if (!n.requires_grad) return;
    if (n.grad.empty() && !n.value.empty()) {
        n.grad = g;
    } else {
        n.grad += g;
    }
}

const DenseMatrix& Tape::value(Var v) const { return node(v).value; }
const DenseMatrix& Tape::grad(Var v) const { return node(v).grad; }
bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

Var Tape::constant(DenseMatrix value) { return push(std::move(value), false); }

Var Tape::variable(DenseMatrix value) { return push(std::move(value), true); }

Var Tape::parameter(Parameter& param) {
    Var v = push(param.value, true);
    nodes_[v.id_].param = &param;
    return v;
}

Var Tape::matmul(Var a, Var b) {
    DenseMatrix out = graphfb::matmul(node(a).value, node(b).value);
    const bool rg = node(a).requires_grad || node(b).requires_grad;
    Var r = push(std::move(out), rg);
    if (rg) {
        nodes_[r.id_].backward = [this, a, b, r] {
            const DenseMatrix& g = nodes_[r.id_].grad;
            if (nodes_[a.id_].requires_grad) accumulate(a, matmul_nt(g, nodes_[b.id_].value));
            if (nodes_[b.id_].requires_grad) accumulate(b, matmul_tn(nodes_[a.id_].value, g));
        };
    }
    return r;
}

Var Tape::spmm(const SparseOperator& op, Var x) {
    DenseMatrix out = apply(op, node(x).value);
    const bool rg = node(x).requires_grad;
    Var r = push(std::move(out), rg);
    if (rg) {
        const SparseOperator* opp = &op;
        nodes_[r.id_].backward = [this, opp, x, r] {
            accumulate(x, apply_transposed(*opp, nodes_[r.id_].grad));
        };
    }
    return r;
}

Var Tape::add(Var a, Var b) {
    if (!node(a).value.same_shape(node(b).value)) {
        throw Error("add: shape mismatch " + shape_str(node(a).value) + " vs " +
                    shape_str(node(b).value));
    }
    DenseMatrix out = node(a).value + node(b).value;
    const bool rg = node(a).requires_grad || node(b).requires_grad;
    Var r = push(std::move(out), rg);
    if (rg) {
        nodes_[r.id_].backward = [this, a, b, r] {
            const DenseMatrix g = nodes_[r.id_].grad;
            accumulate(a, g);
            accumulate(b, g);
        };
    }
    return r;
}

Var Tape::scale(Var x, Var s) {
    const DenseMatrix& sv = node(s).value;
    if (sv.rows() != 1 || sv.cols() != 1) {
        throw Error("scale: scalar operand must be 1x1, got " + shape_str(sv));
    }
    DenseMatrix out = sv(0, 0) * node(x).value;
    const bool rg = node(x).requires_grad || node(s).requires_grad;
    Var r = push(std::move(out), rg);
    if (rg) {
        nodes_[r.id_].backward = [this, x, s, r] {
            const DenseMatrix& g = nodes_[r.id_].grad;
            if (nodes_[x.id_].requires_grad) accumulate(x, nodes_[s.id_].value(0, 0) * g);
            if (nodes_[s.id_].requires_grad) {
                const auto gv = g.data();
                const auto xv = nodes_[x.id_].value.data();
                double acc = 0.0;
                for (std::size_t i = 0; i < gv.size(); ++i) acc += gv[i] * xv[i];
                accumulate(s, DenseMatrix(1, 1, acc));
            }
        };
    }
    return r;
}

Var Tape::relu(Var x) {
    DenseMatrix out = node(x).value;
    for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
    const bool rg = node(x).requires_grad;
    Var r = push(std::move(out), rg);
    if (rg) {
        nodes_[r.id_].backward = [this, x, r] {
            DenseMatrix g = nodes_[r.id_].grad;
            const auto xv = nodes_[x.id_].value.data();
            auto gv = g.data();
            for (std::size_t i = 0; i < gv.size(); ++i)
                if (!(xv[i] > 0.0)) gv[i] = 0.0;  // relu'(0) = 0
            accumulate(x, g);
        };
    }
    return r;
}

Var Tape::sigmoid(Var x) {
    DenseMatrix out = node(x).value;
    for (double& v : out.data()) v = 1.0 / (1.0 + std::exp(-v));
    const bool rg = node(x).requires_grad;
    Var r = push(std::move(out), rg);
    if (rg) {
        nodes_[r.id_].backward = [this, x, r] {
            DenseMatrix g = nodes_[r.id_].grad;
            const auto yv = nodes_[r.id_].value.data();
            auto gv = g.data();
            for (std::size_t i = 0; i < gv.size(); ++i) gv[i] *= yv[i] * (1.0 - yv[i]);
            accumulate(x, g);
        };
    }
    return r;
}

Var Tape::dropout(Var x, double p, bool train_mode, Rng& rng) {
    if (!(p >= 0.0 && p < 1.0)) {
        throw Error("dropout: probability " + std::to_string(p) + " outside [0, 1)");
    }
    if (!train_mode || p == 0.0) return x;
    const DenseMatrix& xv = node(x).value;
    const double keep_scale = 1.0 / (1.0 - p);
    DenseMatrix mask(xv.rows(), xv.cols());
    for (double& m : mask.data()) m = rng.uniform() >= p ? keep_scale : 0.0;
    DenseMatrix out = xv;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= mask.data()[i];
    const bool rg = node(x).requires_grad;
    Var r = push(std::move(out), rg);
    if (rg) {
        nodes_[r.id_].backward = [this, x, r, mask = std::move(mask)] {
            DenseMatrix g = nodes_[r.id_].grad;
            for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] *= mask.data()[i];
            accumulate(x, g);
        };
    }
    return r;
}

Var Tape::softmax_cross_entropy(Var logits, std::span<const int> labels,
                                std::span<const std::size_t> mask) {
    const DenseMatrix& z = node(logits).value;
    if (labels.size() != z.rows()) {
        throw Error("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                    std::to_string(z.rows()) + " rows of logits");
    }
    if (mask.empty()) throw Error("softmax_cross_entropy: empty mask");
    const std::size_t c = z.cols();
    DenseMatrix probs(mask.size(), c);
    double loss = 0.0;
    for (std::size_t k = 0; k < mask.size(); ++k) {
        const std::size_t i = mask[k];
        if (i >= z.rows()) throw Error("softmax_cross_entropy: mask index out of range");
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= c) {
            throw Error("softmax_cross_entropy: label " + std::to_string(y) + " outside [0, " +
                        std::to_string(c) + ")");
        }
        const auto row = z.row(i);
        const double mx = *std::max_element(row.begin(), row.end());
        double denom = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            probs(k, j) = std::exp(row[j] - mx);
            denom += probs(k, j);
        }
        for (std::size_t j = 0; j < c; ++j) probs(k, j) /= denom;
        loss -= (row[static_cast<std::size_t>(y)] - mx) - std::log(denom);
    }
    const double inv = 1.0 / static_cast<double>(mask.size());
    const bool rg = node(logits).requires_grad;
    Var r = push(DenseMatrix(1, 1, loss * inv), rg);
    if (rg) {
        std::vector<std::size_t> idx(mask.begin(), mask.end());
        std::vector<int> ys(labels.begin(), labels.end());
        nodes_[r.id_].backward = [this, logits, r, inv, idx = std::move(idx), ys = std::move(ys),
                                  probs = std::move(probs)] {
            const double upstream = nodes_[r.id_].grad(0, 0);
            const DenseMatrix& zv = nodes_[logits.id_].value;
            DenseMatrix g(zv.rows(), zv.cols());
            for (std::size_t k = 0; k < idx.size(); ++k) {
                const std::size_t i = idx[k];
                for (std::size_t j = 0; j < zv.cols(); ++j) {
                    g(i, j) += upstream * inv * probs(k, j);
                }
                g(i, static_cast<std::size_t>(ys[i])) -= upstream * inv;
            }
            accumulate(logits, g);
        };
    }
    return r;
}

Var Tape::sum(Var x) {
    const DenseMatrix& xv = node(x).value;
    double s = 0.0;
    for (double v : xv.data()) s += v;
    const bool rg = node(x).requires_grad;
    Var r = push(DenseMatrix(1, 1, s), rg);
    if (rg) {
        nodes_[r.id_].backward = [this, x, r] {
            const DenseMatrix& xv2 = nodes_[x.id_].value;
            accumulate(x, DenseMatrix(xv2.rows(), xv2.cols(), nodes_[r.id_].grad(0, 0)));
        };
    }
    return r;
}

void Tape::backward(Var loss) {
    Node& root = node(loss);
    if (root.value.rows() != 1 || root.value.cols() != 1) {
        throw Error("backward: loss must be 1x1, got " + shape_str(root.value));
    }
    for (auto& n : nodes_) n.grad = DenseMatrix();
    if (!root.requires_grad) return;
    root.grad = DenseMatrix(1, 1, 1.0);
    for (std::size_t id = loss.id_ + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (n.grad.empty()) continue;
        if (n.backward) n.backward();
        if (n.param) {
            Parameter& p = *n.param;
            if (!p.grad.same_shape(p.value)) p.grad = DenseMatrix(p.value.rows(), p.value.cols());
            p.grad += nodes_[id].grad;
        }
    }
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

void Adam::step(std::span<Parameter> params) {
    if (m_.empty()) {
        for (const auto& p : params) {
            m_.emplace_back(p.value.rows(), p.value.cols());
            v_.emplace_back(p.value.rows(), p.value.cols());
        }
    }
    if (m_.size() != params.size()) throw Error("adam: parameter list changed between steps");
    for (std::size_t k = 0; k < params.size(); ++k) {
        const auto& p = params[k];
        if (!p.grad.same_shape(p.value)) {
            throw Error("adam: parameter '" + p.name + "' has no gradient");
        }
        if (!m_[k].same_shape(p.value)) throw Error("adam: shape of '" + p.name + "' changed");
        for (double g : p.grad.data()) {
            if (!std::isfinite(g)) {
                throw Error("adam: non-finite gradient in parameter '" + p.name + "' at step " +
                            std::to_string(t_ + 1));
            }
        }
    }
    ++t_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto w = params[k].value.data();
        const auto g = params[k].grad.data();
        auto m = m_[k].data();
        auto v = v_[k].data();
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = g[i] + config_.weight_decay * w[i];
            m[i] = b1 * m[i] + (1.0 - b1) * gi;
            v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            w[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
        }
    }
}

// ---------------------------------------------------------------------------
// Finite-difference check
// ---------------------------------------------------------------------------

GradCheckReport grad_check(const LossFn& loss, std::span<Parameter> params,
                           const GradCheckOptions& options) {
    zero_grad(params);
    loss(true);
    std::vector<DenseMatrix> analytic;
    for (const auto& p : params) analytic.push_back(p.grad);

    GradCheckReport report;
    Rng rng(options.seed);
    const double h = options.eps;
    const double f0 = loss(false);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& p = params[k];
        std::vector<std::size_t> entries(p.value.size());
        std::iota(entries.begin(), entries.end(), std::size_t{0});
        if (entries.size() > options.max_entries_per_param) {
            rng.shuffle(std::span(entries));
            entries.resize(options.max_entries_per_param);
        }
        for (std::size_t e : entries) {
            double& w = p.value.data()[e];
            const double w0 = w;
            w = w0 + h;
            const double fp = loss(false);
            w = w0 - h;
            const double fm = loss(false);
            w = w0;

            const double forward = (fp - f0) / h;
            const double backward = (f0 - fm) / h;
            if (std::abs(forward - backward) >
                1e-3 * std::max(std::abs(forward), std::abs(backward)) + 1e-6) {
                ++report.skipped_kinks;
                continue;
            }
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[k].data()[e];
            const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
            const double rel = std::abs(a - numeric) / denom;
            ++report.checked;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst = p.name + "[" + std::to_string(e) + "]";
            }
        }
    }
    return report;
}

}  // namespace graphfb
