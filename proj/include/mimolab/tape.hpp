#pragma once

#include <functional>
#include <vector>

#include "mimolab/tensor.hpp"

namespace mimolab {

// Tape-based reverse-mode differentiation over a small fixed op set. A Var is
// an index into the tape; backward() walks the tape in reverse creation order
// and each node pushes its gradient into its parents.
class Tape {
  public:
    struct Var {
        int id = -1;
    };

    Var leaf(Tensor value, bool needs_grad = true);
    Var constant(Tensor value) { return leaf(std::move(value), false); }

    const Tensor& value(Var v) const { return nodes_[size_t(v.id)].value; }
    const Tensor& grad(Var v) const { return nodes_[size_t(v.id)].grad; }

    // out = a * b (matrix product)
    Var matmul(Var a, Var b);
    // out = a * b^T
    Var matmul_nt(Var a, Var b);
    Var add(Var a, Var b);
    // Adds a 1 x n row vector to every row of a.
    Var add_rowvec(Var a, Var bias);
    Var scale(Var a, double c);
    Var relu(Var a);
    // Per-row normalization (x - mean) / sqrt(var + eps), then elementwise
    // gain and shift (both 1 x n rows).
    Var layer_norm_rows(Var a, Var gain, Var shift, double eps = 1e-5);
    // Numerically stable row-wise softmax.
    Var softmax_rows(Var a);
    // Sum over rows of -log softmax(logits_row)[target]; output is 1 x 1.
    Var cross_entropy_sum(Var logits, const std::vector<int>& targets);
    Var concat_cols(const std::vector<Var>& parts);
    Var transpose(Var a);
    // Broadcasts a 1 x n row to `rows` identical rows.
    Var repeat_row(Var a, int rows);

    // out = input * weight + bias (bias broadcast over rows)
    Var affine(Var input, Var weight, Var bias) {
        return add_rowvec(matmul(input, weight), bias);
    }

    // Seeds d(root)/d(root) = 1 (root must be 1 x 1) and runs the whole tape
    // backward. Gradients of leaves are then available through grad().
    void backward(Var root);

    size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool needs_grad = false;
        std::function<void()> pull; // propagate this node's grad to parents
    };

    int push(Tensor value, bool needs_grad, std::function<void()> pull);
    // Gradient storage is allocated on first write so that forward-only nodes
    // (and whole inference tapes) never pay for zero-filled buffers.
    Tensor& grad_ref(int id) {
        Node& n = nodes_[size_t(id)];
        if (n.grad.size() == 0) {
            n.grad = Tensor::Zero(n.value.rows(), n.value.cols());
        }
        return n.grad;
    }

    std::vector<Node> nodes_;
};

using Var = Tape::Var;

} // namespace mimolab
