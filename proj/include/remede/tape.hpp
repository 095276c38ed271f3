#pragma once

#include <functional>
#include <vector>

#include "remede/tensor.hpp"

namespace remede {

// Handle to a tensor recorded on a tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Nodes are appended in evaluation order, so a single
// reverse sweep visits them in valid topological order. A tape belongs to one
// training run / one thread.
//
// soft mode swaps the straight-through forwards (round_st, hardmax_st) for
// their smooth surrogates so gradients become finite-difference checkable.
// It exists for tests only; training always runs hard.
class Tape {
  public:
    explicit Tape(bool soft_mode = false) : soft_(soft_mode) {}

    bool soft() const { return soft_; }

    // Records an input tensor (parameter or constant).
    Var input(Tensor value);

    // Records an op output. `back` receives the output gradient and must
    // accumulate into the input gradients via accumulate().
    using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;
    Var record(Tensor value, BackwardFn back);

    const Tensor& val(Var v) const { return nodes_[v.id].value; }

    // Gradient of the last backward() loss w.r.t. v. Zero tensor when v does
    // not influence the loss.
    const Tensor& grad(Var v) const { return grads_[v.id]; }

    // Accumulates g into v's gradient slot (used by backward rules).
    void accumulate(Var v, const Tensor& g);
    void accumulate_at(Var v, std::size_t index, double g);

    // Full reverse sweep from a scalar loss. Rebuilds the gradient map.
    void backward(Var loss);

    std::size_t node_count() const { return nodes_.size(); }

  private:
    struct Node {
        Tensor value;
        BackwardFn back;  // empty for inputs
    };
    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
    bool soft_;
};

// --- elementwise arithmetic (shapes must match exactly) ---
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double c);

// Sum of all entries -> scalar.
Var sum(Tape& t, Var a);

// Matrix [m x n] times vector [n] -> [m].
Var matvec(Tape& t, Var w, Var v);
// Matrix [m x n] transposed times vector [m] -> [n].
Var matvec_t(Tape& t, Var w, Var v);
// Row-wise dot of two equal-shape matrices -> vector of row sums of a.*b.
Var row_dot(Tape& t, Var a, Var b);
// Extract row i of a matrix -> vector.
Var row(Tape& t, Var m, std::size_t i);
// Same values, new shape (element count preserved).
Var reshape(Tape& t, Var a, std::vector<std::size_t> shape);
// Concatenate two vectors.
Var concat(Tape& t, Var a, Var b);

// --- activations ---
Var sigmoid(Tape& t, Var z);
Var tanh_act(Tape& t, Var z);

// --- straight-through estimators ---
// Forward: round half away from zero. Backward: identity.
// Soft mode: identity forward (the sigmoid value passes through).
Var round_st(Tape& t, Var z);
// Forward: one-hot at argmax (lowest index wins ties). Backward: softmax
// Jacobian at the same logits. Soft mode: softmax forward.
Var hardmax_st(Tape& t, Var logits);
// hardmax_st applied independently to each row of a matrix.
Var rowwise_hardmax_st(Tape& t, Var logits);

// --- classification ---
Var softmax(Tape& t, Var logits);
// -log softmax(logits)[target]; throws on out-of-range target.
Var cross_entropy(Tape& t, Var logits, std::size_t target);

// Plain-value helpers shared with the no-tape traversal path.
double sigmoid_scalar(double z);
// round_st's scalar forward; exactly how a hard split decides.
inline bool hard_split_true(double preact) {
    return std::round(sigmoid_scalar(preact)) >= 1.0;
}
void softmax_inplace(std::vector<double>& v);
std::size_t argmax_lowest(const std::vector<double>& v);
std::size_t argmax_lowest(const double* v, std::size_t n);

}  // namespace remede
