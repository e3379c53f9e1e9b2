// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace ticktack::ad {

using Matrix = Eigen::MatrixXd;

class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while its tape lives.
class Var {
public:
    Var() = default;

    [[nodiscard]] const Matrix& value() const;
    [[nodiscard]] const Matrix& grad() const;
    [[nodiscard]] Eigen::Index rows() const { return value().rows(); }
    [[nodiscard]] Eigen::Index cols() const { return value().cols(); }
    /// Value of a 1x1 node.
    [[nodiscard]] double scalar() const;
    [[nodiscard]] bool requires_grad() const;
    [[nodiscard]] Tape* tape() const noexcept { return tape_; }
    [[nodiscard]] int id() const noexcept { return id_; }

private:
    friend class Tape;
    Var(Tape* tape, int id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    int id_ = -1;
};

/// Records operations in creation order and replays them backwards.
/// Nodes created from inputs that do not require gradients store no
/// backward closure, so a tape doubles as a plain evaluator.
class Tape {
public:
    using Backward = std::function<void(const Matrix& grad_out)>;

    Var leaf(Matrix value, bool requires_grad = true);
    Var constant(Matrix value) { return leaf(std::move(value), false); }

    /// Creates an op node. `backward` runs only if some input requires grad.
    Var record(Matrix value, std::span<const Var> inputs, Backward backward);
    Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
        return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                      std::move(backward));
    }

    /// Seeds d(loss)/d(loss) = 1 and propagates to every leaf.
    void backward(Var loss);

    [[nodiscard]] const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)]->value; }
    [[nodiscard]] const Matrix& grad(int id) const;
    [[nodiscard]] bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)]->requires_grad; }

    /// Adds `g` into the gradient buffer of `v`; used by backward closures.
    void accumulate(const Var& v, const Matrix& g);
    template <typename Expr>
    void accumulate_expr(const Var& v, const Expr& g) {
        auto& node = *nodes_[static_cast<std::size_t>(v.id())];
        if (!node.requires_grad) return;
        if (node.grad.size() == 0) {
            node.grad = g;
        } else {
            node.grad += g;
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        Backward backward;
        bool requires_grad = false;
    };

    std::vector<std::unique_ptr<Node>> nodes_;
    Matrix empty_;
};

// Elementwise and structural ops. Shapes follow Eigen conventions; mismatches
// throw Error{DimensionMismatch}.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar_nodes(std::span<const Var> terms);  // sum of 1x1 nodes
Var matmul(Var a, Var b);
Var transpose(Var a);
Var gather_rows(Var table, std::span<const int> ids);
Var top_rows(Var a, Eigen::Index n);
Var cols(Var a, Eigen::Index start, Eigen::Index n);
Var hconcat(std::span<const Var> parts);
Var vconcat(std::span<const Var> parts);
Var rms_norm_rows(Var a, double eps = 1e-6);
Var gelu(Var a);
Var square(Var a);
/// Row-wise softmax with entries above the diagonal masked out.
Var causal_softmax_rows(Var scores);
/// Mean cross-entropy of each row's logits against targets[row].
Var cross_entropy_rows(Var logits, std::span<const int> targets);
Var mean_rows(Var a);
Var sum(Var a);
/// Divides every row by its L2 norm. Throws Error{ZeroVector} on a zero row.
Var normalize_rows(Var a);
/// Sum over entries of weights .* a with constant weights.
Var weighted_sum(Var a, const Matrix& weights);
/// Sum over entries of weights .* (a - anchor)^2 with constant anchor/weights.
Var weighted_sq_diff(Var a, const Matrix& anchor, const Matrix& weights);

}  // namespace ticktack::ad
