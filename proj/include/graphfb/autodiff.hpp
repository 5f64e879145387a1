#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "graphfb/dense.hpp"
#include "graphfb/random.hpp"
#include "graphfb/spectral.hpp"

namespace graphfb {

/// A trainable tensor. Gradients accumulate across backward passes until
/// zero_grad is called.
struct Parameter {
    std::string name;
    DenseMatrix value;
    DenseMatrix grad;

    void zero_grad();
};

void zero_grad(std::span<Parameter> params);
std::size_t parameter_count(std::span<const Parameter> params);

class Tape;

/// Handle to a node on a Tape.
class Var {
public:
    Var() = default;
    bool valid() const noexcept { return tape_ != nullptr; }
    std::size_t id() const noexcept { return id_; }

private:
    friend class Tape;
    Var(const Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
    const Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Eager reverse-mode tape over dense matrices.
///
/// Each op computes its value immediately and records a closure for its
/// adjoint. Node ids are assigned in creation order, which is a topological
/// order, so backward is a single reverse sweep. A tape is single-threaded;
/// any Parameter or SparseOperator it references must outlive it.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Leaf that never receives a gradient.
    Var constant(DenseMatrix value);
    /// Leaf whose gradient stays on the tape (see grad()).
    Var variable(DenseMatrix value);
    /// Leaf bound to a Parameter; backward adds into param.grad.
    Var parameter(Parameter& param);

    Var matmul(Var a, Var b);
    /// op·x with a constant operator.
    Var spmm(const SparseOperator& op, Var x);
    Var add(Var a, Var b);
    /// s·x where s is a 1x1 node.
    Var scale(Var x, Var s);
    Var relu(Var x);
    Var sigmoid(Var x);
    /// Inverted dropout: kept entries are divided by (1 - p). Identity when
    /// train_mode is false or p == 0.
    Var dropout(Var x, double p, bool train_mode, Rng& rng);
    /// Mean over `mask` of -log softmax(logits_i)[labels_i].
    Var softmax_cross_entropy(Var logits, std::span<const int> labels,
                              std::span<const std::size_t> mask);
    /// Sum of all entries as a 1x1 node.
    Var sum(Var x);

    /// Populates gradients of every node reachable from a 1x1 loss.
    void backward(Var loss);

    const DenseMatrix& value(Var v) const;
    /// Gradient of the last backward pass; empty if the node got none.
    const DenseMatrix& grad(Var v) const;
    bool requires_grad(Var v) const;

    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        DenseMatrix value;
        DenseMatrix grad;
        bool requires_grad = false;
        Parameter* param = nullptr;
        std::function<void()> backward;
    };

    Node& node(Var v);
    const Node& node(Var v) const;
    Var push(DenseMatrix value, bool requires_grad);
    /// Adds `g` into the gradient of `v`, allocating it on first use.
    void accumulate(Var v, const DenseMatrix& g);

    std::vector<Node> nodes_;
};

struct AdamConfig {
    double lr = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

/// Adam with classic L2 regularization: weight_decay·p is added to the gradient
/// before the moment updates.
class Adam {
public:
    explicit Adam(AdamConfig config) : config_(config) {}

    void step(std::span<Parameter> params);
    std::uint64_t steps() const noexcept { return t_; }
    const AdamConfig& config() const noexcept { return config_; }

private:
    AdamConfig config_;
    std::uint64_t t_ = 0;
    std::vector<DenseMatrix> m_;
    std::vector<DenseMatrix> v_;
};

struct GradCheckOptions {
    double eps = 1e-6;
    /// Denominator floor of the relative error; gradients smaller than this
    /// are compared in absolute terms.
    double floor = 1e-4;
    /// Entries checked per parameter (all when the tensor is smaller).
    std::size_t max_entries_per_param = std::numeric_limits<std::size_t>::max();
    std::uint64_t seed = 0;
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
    /// Entries whose one-sided differences disagree, i.e. the perturbation
    /// crossed a ReLU kink. They are excluded from max_rel_err.
    std::size_t skipped_kinks = 0;
    std::string worst;
};

/// Evaluates the loss; when `with_grad` is set it must also run backward so
/// gradients land in the parameters.
using LossFn = std::function<double(bool with_grad)>;

GradCheckReport grad_check(const LossFn& loss, std::span<Parameter> params,
                           const GradCheckOptions& options = {});

}  // namespace graphfb
