#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ampal/array.hpp"

namespace ampal::ad {

/// Handle into a Tape; cheap to copy.
struct Value {
    int id = -1;
};

/// Define-by-run reverse-mode tape over dense real arrays.
///
/// A tape is built per evaluation: wrap inputs as leaves (differentiable) or
/// constants, chain primitives, then call backward() on a scalar output and
/// read per-leaf gradients with grad(). Every primitive validates shapes and
/// fails fast on NaN/Inf outputs.
///
/// A single tape is single-threaded; independent tapes may run concurrently.
class Tape {
public:
    /// Differentiable input.
    Value leaf(Array a);
    /// Non-differentiable input (e.g. frozen model parameters).
    Value constant(Array a);

    /// Dilated causal/valid 1-D cross-correlation.
    /// input: [Cin,T] (or [T] == one channel), kernel: [Cout,Cin,K] (or [K]).
    /// With causal_pad the input is left-padded with (K-1)*dilation zeros so
    /// the output has length T and output[t] depends only on input[<=t];
    /// otherwise output length is T-(K-1)*dilation.
    Value conv1d_dilated(Value input, Value kernel, int dilation, bool causal_pad);

    /// Pointwise (1x1) convolution: input [Cin,T], kernel [Cout,Cin].
    Value conv1x1(Value input, Value kernel);

    /// Matrix-vector product: m [C,k], v [k] -> [C].
    Value matvec(Value m, Value v);

    /// Broadcast a per-channel vector over the time axis: x [C,T], b [C].
    Value add_bias_time(Value x, Value b);

    Value add(Value a, Value b);
    Value sub(Value a, Value b);
    Value mul(Value a, Value b);
    /// Multiply by a compile-time constant.
    Value scale(Value a, real c);
    Value tanh(Value a);
    Value sigmoid(Value a);
    Value square(Value a);
    /// Mean over all elements -> scalar.
    Value mean(Value a);
    /// Sum over all elements -> scalar.
    Value sum(Value a);
    /// Time slice [start, start+length) along the last axis of [C,T] or [T].
    Value slice_time(Value a, int64_t start, int64_t length);

    const Array& value(Value v) const;
    const std::vector<int64_t>& shape(Value v) const;

    /// Reverse pass from a scalar output. May be called once per tape.
    void backward(Value output);

    /// Gradient of the last backward() output w.r.t. a leaf. Leaves the
    /// output does not depend on get a zero gradient of matching shape.
    const Array& grad(Value leaf);

    size_t node_count() const { return nodes_.size(); }

private:
    enum class Op {
        Leaf, Const, Conv1d, Conv1x1, MatVec, AddBiasTime,
        Add, Sub, Mul, Scale, Tanh, Sigmoid, Square, Mean, Sum, SliceTime,
    };

    struct Node {
        Op op;
        int a = -1, b = -1;
        int dilation = 1;
        bool causal = false;
        real c = 0;           // scale factor
        int64_t start = 0;    // slice offset
        Array out;
        Array aux;            // padded conv input, kept for the reverse pass
        Array grad;
        bool needs_grad = false;
    };

    int push(Node n);
    Node& at(Value v);
    const Node& at(Value v) const;
    void check_valid(Value v) const;

    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

/// Central finite-difference gradient of an arbitrary scalar function of
/// flattened inputs; the independent oracle for gradient checks.
///
/// `f` receives the perturbed copies of `inputs` and returns a scalar.
/// Returns one gradient array per input.
std::vector<Array> finite_difference_gradient(
    const std::vector<Array>& inputs,
    const std::function<real(const std::vector<Array>&)>& f,
    real eps = 1e-5);

}  // namespace ampal::ad
