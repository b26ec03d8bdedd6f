#include "ampal/autodiff.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace ampal::ad {

namespace {

using Mat = Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;
using DynStride = Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>;
using ConstTapMap = Eigen::Map<const Mat, 0, DynStride>;
using TapMap = Eigen::Map<Mat, 0, DynStride>;

struct ConvDims {
    int64_t cin, t, cout, k;
    bool rank1_input;  // preserve rank-1 in/out convention
};

ConvDims conv_dims(const std::vector<int64_t>& in_shape,
                   const std::vector<int64_t>& kern_shape) {
    ConvDims d{};
    if (in_shape.size() == 1) {
        d.cin = 1;
        d.t = in_shape[0];
        d.rank1_input = true;
    } else if (in_shape.size() == 2) {
        d.cin = in_shape[0];
        d.t = in_shape[1];
        d.rank1_input = false;
    } else {
        throw std::invalid_argument("conv1d_dilated: input must be [T] or [Cin,T], got " +
                                    shape_to_string(in_shape));
    }
    if (kern_shape.size() == 1) {
        d.cout = 1;
        d.k = kern_shape[0];
        if (d.cin != 1) {
            throw std::invalid_argument("conv1d_dilated: rank-1 kernel requires 1 input channel");
        }
    } else if (kern_shape.size() == 3) {
        d.cout = kern_shape[0];
        d.k = kern_shape[2];
        if (kern_shape[1] != d.cin) {
            throw std::invalid_argument("conv1d_dilated: kernel Cin " +
                                        std::to_string(kern_shape[1]) +
                                        " does not match input channels " +
                                        std::to_string(d.cin));
        }
    } else {
        throw std::invalid_argument("conv1d_dilated: kernel must be [K] or [Cout,Cin,K], got " +
                                    shape_to_string(kern_shape));
    }
    if (d.t == 0) throw std::invalid_argument("conv1d_dilated: zero-length input");
    if (d.k < 1) throw std::invalid_argument("conv1d_dilated: kernel width must be >= 1");
    return d;
}

// Tap k of a [Cout,Cin,K] kernel viewed as a Cout x Cin matrix.
ConstTapMap kernel_tap(const Array& w, const ConvDims& d, int64_t k) {
    return ConstTapMap(w.data.data() + k, d.cout, d.cin,
                       DynStride(d.cin * d.k, d.k));
}

TapMap kernel_tap_mut(Array& w, const ConvDims& d, int64_t k) {
    return TapMap(w.data.data() + k, d.cout, d.cin,
                  DynStride(d.cin * d.k, d.k));
}

}  // namespace

int Tape::push(Node n) {
    if (n.op != Op::Leaf && n.op != Op::Const) {
        require_finite(n.out, "primitive output");
    }
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

Tape::Node& Tape::at(Value v) {
    check_valid(v);
    return nodes_[static_cast<size_t>(v.id)];
}

const Tape::Node& Tape::at(Value v) const {
    check_valid(v);
    return nodes_[static_cast<size_t>(v.id)];
}

void Tape::check_valid(Value v) const {
    if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
        throw std::invalid_argument("Value does not belong to this tape");
    }
}

Value Tape::leaf(Array a) {
    Node n;
    n.op = Op::Leaf;
    n.out = std::move(a);
    n.needs_grad = true;
    return {push(std::move(n))};
}

Value Tape::constant(Array a) {
    Node n;
    n.op = Op::Const;
    n.out = std::move(a);
    return {push(std::move(n))};
}

Value Tape::conv1d_dilated(Value input, Value kernel, int dilation, bool causal_pad) {
    if (dilation < 1) throw std::invalid_argument("conv1d_dilated: dilation must be >= 1");
    const Array& x = at(input).out;
    const Array& w = at(kernel).out;
    ConvDims d = conv_dims(x.shape, w.shape);

    const int64_t pad = causal_pad ? (d.k - 1) * dilation : 0;
    const int64_t t_out = causal_pad ? d.t : d.t - (d.k - 1) * dilation;
    if (t_out < 1) {
        throw std::invalid_argument(
            "conv1d_dilated: input length " + std::to_string(d.t) +
            " too short for K=" + std::to_string(d.k) +
            ", dilation=" + std::to_string(dilation) + " without padding");
    }

    Array xpad = Array::zeros({d.cin, d.t + pad});
    for (int64_t c = 0; c < d.cin; ++c) {
        std::copy(x.data.begin() + c * d.t, x.data.begin() + (c + 1) * d.t,
                  xpad.data.begin() + c * (d.t + pad) + pad);
    }

    Array out = d.rank1_input && d.cout == 1 ? Array::zeros({t_out})
                                             : Array::zeros({d.cout, t_out});
    {
        ConstMatMap xm(xpad.data.data(), d.cin, d.t + pad);
        MatMap ym(out.data.data(), d.cout, t_out);
        for (int64_t k = 0; k < d.k; ++k) {
            ym.noalias() += kernel_tap(w, d, k) * xm.block(0, k * dilation, d.cin, t_out);
        }
    }

    Node n;
    n.op = Op::Conv1d;
    n.a = input.id;
    n.b = kernel.id;
    n.dilation = dilation;
    n.causal = causal_pad;
    n.out = std::move(out);
    n.aux = std::move(xpad);
    n.needs_grad = at(input).needs_grad || at(kernel).needs_grad;
    return {push(std::move(n))};
}

Value Tape::conv1x1(Value input, Value kernel) {
    const Array& x = at(input).out;
    const Array& w = at(kernel).out;
    if (x.ndim() != 2 || w.ndim() != 2) {
        throw std::invalid_argument("conv1x1: expected input [Cin,T], kernel [Cout,Cin]");
    }
    if (w.dim(1) != x.dim(0)) {
        throw std::invalid_argument("conv1x1: kernel Cin " + std::to_string(w.dim(1)) +
                                    " does not match input channels " + std::to_string(x.dim(0)));
    }
    Array out = Array::zeros({w.dim(0), x.dim(1)});
    ConstMatMap xm(x.data.data(), x.dim(0), x.dim(1));
    ConstMatMap wm(w.data.data(), w.dim(0), w.dim(1));
    MatMap ym(out.data.data(), w.dim(0), x.dim(1));
    ym.noalias() = wm * xm;

    Node n;
    n.op = Op::Conv1x1;
    n.a = input.id;
    n.b = kernel.id;
    n.out = std::move(out);
    n.needs_grad = at(input).needs_grad || at(kernel).needs_grad;
    return {push(std::move(n))};
}

Value Tape::matvec(Value m, Value v) {
    const Array& a = at(m).out;
    const Array& x = at(v).out;
    if (a.ndim() != 2 || x.ndim() != 1 || a.dim(1) != x.dim(0)) {
        throw std::invalid_argument("matvec: need [C,k] x [k], got " +
                                    shape_to_string(a.shape) + " x " + shape_to_string(x.shape));
    }
    Array out = Array::zeros({a.dim(0)});
    ConstMatMap am(a.data.data(), a.dim(0), a.dim(1));
    Eigen::Map<const Eigen::Matrix<real, Eigen::Dynamic, 1>> xv(x.data.data(), x.dim(0));
    Eigen::Map<Eigen::Matrix<real, Eigen::Dynamic, 1>> yv(out.data.data(), a.dim(0));
    yv.noalias() = am * xv;

    Node n;
    n.op = Op::MatVec;
    n.a = m.id;
    n.b = v.id;
    n.out = std::move(out);
    n.needs_grad = at(m).needs_grad || at(v).needs_grad;
    return {push(std::move(n))};
}

Value Tape::add_bias_time(Value x, Value b) {
    const Array& xa = at(x).out;
    const Array& ba = at(b).out;
    if (xa.ndim() != 2 || ba.ndim() != 1 || ba.dim(0) != xa.dim(0)) {
        throw std::invalid_argument("add_bias_time: need [C,T] + [C], got " +
                                    shape_to_string(xa.shape) + " + " + shape_to_string(ba.shape));
    }
    Array out = xa;
    const int64_t c = xa.dim(0), t = xa.dim(1);
    for (int64_t ci = 0; ci < c; ++ci) {
        const real bias = ba[ci];
        for (int64_t ti = 0; ti < t; ++ti) out[ci * t + ti] += bias;
    }

    Node n;
    n.op = Op::AddBiasTime;
    n.a = x.id;
    n.b = b.id;
    n.out = std::move(out);
    n.needs_grad = at(x).needs_grad || at(b).needs_grad;
    return {push(std::move(n))};
}

namespace {
void require_same_shape(const Array& a, const Array& b, const char* op) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    shape_to_string(a.shape) + " vs " + shape_to_string(b.shape));
    }
}
}  // namespace

Value Tape::add(Value a, Value b) {
    const Array& xa = at(a).out;
    const Array& xb = at(b).out;
    require_same_shape(xa, xb, "add");
    Array out = xa;
    for (int64_t i = 0; i < out.size(); ++i) out[i] += xb[i];
    Node n;
    n.op = Op::Add;
    n.a = a.id;
    n.b = b.id;
    n.out = std::move(out);
    n.needs_grad = at(a).needs_grad || at(b).needs_grad;
    return {push(std::move(n))};
}

Value Tape::sub(Value a, Value b) {
    const Array& xa = at(a).out;
    const Array& xb = at(b).out;
    require_same_shape(xa, xb, "sub");
    Array out = xa;
    for (int64_t i = 0; i < out.size(); ++i) out[i] -= xb[i];
    Node n;
    n.op = Op::Sub;
    n.a = a.id;
    n.b = b.id;
    n.out = std::move(out);
    n.needs_grad = at(a).needs_grad || at(b).needs_grad;
    return {push(std::move(n))};
}

Value Tape::mul(Value a, Value b) {
    const Array& xa = at(a).out;
    const Array& xb = at(b).out;
    require_same_shape(xa, xb, "mul");
    Array out = xa;
    for (int64_t i = 0; i < out.size(); ++i) out[i] *= xb[i];
    Node n;
    n.op = Op::Mul;
    n.a = a.id;
    n.b = b.id;
    n.out = std::move(out);
    n.needs_grad = at(a).needs_grad || at(b).needs_grad;
    return {push(std::move(n))};
}

Value Tape::scale(Value a, real c) {
    Array out = at(a).out;
    for (auto& v : out.data) v *= c;
    Node n;
    n.op = Op::Scale;
    n.a = a.id;
    n.c = c;
    n.out = std::move(out);
    n.needs_grad = at(a).needs_grad;
    return {push(std::move(n))};
}

Value Tape::tanh(Value a) {
    Array out = at(a).out;
    for (auto& v : out.data) v = std::tanh(v);
    Node n;
    n.op = Op::Tanh;
    n.a = a.id;
    n.out = std::move(out);
    n.needs_grad = at(a).needs_grad;
    return {push(std::move(n))};
}

Value Tape::sigmoid(Value a) {
    Array out = at(a).out;
    for (auto& v : out.data) v = real(1) / (real(1) + std::exp(-v));
    Node n;
    n.op = Op::Sigmoid;
    n.a = a.id;
    n.out = std::move(out);
    n.needs_grad = at(a).needs_grad;
    return {push(std::move(n))};
}

Value Tape::square(Value a) {
    Array out = at(a).out;
    for (auto& v : out.data) v *= v;
    Node n;
    n.op = Op::Square;
    n.a = a.id;
    n.out = std::move(out);
    n.needs_grad = at(a).needs_grad;
    return {push(std::move(n))};
}

Value Tape::mean(Value a) {
    const Array& xa = at(a).out;
    if (xa.size() == 0) throw std::invalid_argument("mean of empty array");
    real s = 0;
    for (real v : xa.data) s += v;
    Node n;
    n.op = Op::Mean;
    n.a = a.id;
    n.out = Array::scalar(s / static_cast<real>(xa.size()));
    n.needs_grad = at(a).needs_grad;
    return {push(std::move(n))};
}

Value Tape::sum(Value a) {
    const Array& xa = at(a).out;
    real s = 0;
    for (real v : xa.data) s += v;
    Node n;
    n.op = Op::Sum;
    n.a = a.id;
    n.out = Array::scalar(s);
    n.needs_grad = at(a).needs_grad;
    return {push(std::move(n))};
}

Value Tape::slice_time(Value a, int64_t start, int64_t length) {
    const Array& xa = at(a).out;
    if (xa.ndim() != 1 && xa.ndim() != 2) {
        throw std::invalid_argument("slice_time: expected [T] or [C,T]");
    }
    const int64_t c = xa.ndim() == 2 ? xa.dim(0) : 1;
    const int64_t t = xa.ndim() == 2 ? xa.dim(1) : xa.dim(0);
    if (start < 0 || length < 1 || start + length > t) {
        throw std::invalid_argument("slice_time: range [" + std::to_string(start) + "," +
                                    std::to_string(start + length) + ") outside length " +
                                    std::to_string(t));
    }
    Array out = xa.ndim() == 2 ? Array::zeros({c, length}) : Array::zeros({length});
    for (int64_t ci = 0; ci < c; ++ci) {
        std::copy(xa.data.begin() + ci * t + start, xa.data.begin() + ci * t + start + length,
                  out.data.begin() + ci * length);
    }
    Node n;
    n.op = Op::SliceTime;
    n.a = a.id;
    n.start = start;
    n.out = std::move(out);
    n.needs_grad = at(a).needs_grad;
    return {push(std::move(n))};
}

const Array& Tape::value(Value v) const { return at(v).out; }

const std::vector<int64_t>& Tape::shape(Value v) const { return at(v).out.shape; }

void Tape::backward(Value output) {
    Node& out_node = at(output);
    if (!out_node.out.is_scalar()) {
        throw std::invalid_argument("backward: output must be scalar, got shape " +
                                    shape_to_string(out_node.out.shape));
    }
    if (backward_done_) {
        throw std::logic_error("backward: already run on this tape");
    }
    backward_done_ = true;

    out_node.grad = Array::full(out_node.out.shape, real(1));

    for (int i = output.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<size_t>(i)];
        if (!n.needs_grad || n.grad.data.empty()) continue;
        const Array& g = n.grad;

        auto grad_of = [&](int id) -> Array& {
            Node& m = nodes_[static_cast<size_t>(id)];
            if (m.grad.data.empty()) m.grad = Array::zeros(m.out.shape);
            return m.grad;
        };
        auto wants = [&](int id) {
            return id >= 0 && nodes_[static_cast<size_t>(id)].needs_grad;
        };

        switch (n.op) {
            case Op::Leaf:
            case Op::Const:
                break;
            case Op::Conv1d: {
                const Array& w = nodes_[static_cast<size_t>(n.b)].out;
                const Array& x = nodes_[static_cast<size_t>(n.a)].out;
                ConvDims d = conv_dims(x.shape, w.shape);
                const int64_t pad = n.causal ? (d.k - 1) * n.dilation : 0;
                const int64_t t_out = n.out.ndim() == 2 ? n.out.dim(1) : n.out.dim(0);
                ConstMatMap gy(g.data.data(), d.cout, t_out);
                ConstMatMap xpad(n.aux.data.data(), d.cin, d.t + pad);
                if (wants(n.b)) {
                    Array& gw = grad_of(n.b);
                    if (gw.ndim() == 1) {
                        ConvDims dk{1, d.t, 1, d.k, true};
                        for (int64_t k = 0; k < d.k; ++k) {
                            kernel_tap_mut(gw, dk, k).noalias() +=
                                gy * xpad.block(0, k * n.dilation, d.cin, t_out).transpose();
                        }
                    } else {
                        for (int64_t k = 0; k < d.k; ++k) {
                            kernel_tap_mut(gw, d, k).noalias() +=
                                gy * xpad.block(0, k * n.dilation, d.cin, t_out).transpose();
                        }
                    }
                }
                if (wants(n.a)) {
                    Array gxpad = Array::zeros({d.cin, d.t + pad});
                    MatMap gxm(gxpad.data.data(), d.cin, d.t + pad);
                    for (int64_t k = 0; k < d.k; ++k) {
                        gxm.block(0, k * n.dilation, d.cin, t_out).noalias() +=
                            kernel_tap(w, d, k).transpose() * gy;
                    }
                    Array& gx = grad_of(n.a);
                    for (int64_t c = 0; c < d.cin; ++c) {
                        for (int64_t ti = 0; ti < d.t; ++ti) {
                            gx[c * d.t + ti] += gxpad[c * (d.t + pad) + pad + ti];
                        }
                    }
                }
                break;
            }
            case Op::Conv1x1: {
                const Array& x = nodes_[static_cast<size_t>(n.a)].out;
                const Array& w = nodes_[static_cast<size_t>(n.b)].out;
                ConstMatMap gy(g.data.data(), w.dim(0), x.dim(1));
                if (wants(n.b)) {
                    Array& gw = grad_of(n.b);
                    MatMap gwm(gw.data.data(), w.dim(0), w.dim(1));
                    ConstMatMap xm(x.data.data(), x.dim(0), x.dim(1));
                    gwm.noalias() += gy * xm.transpose();
                }
                if (wants(n.a)) {
                    Array& gx = grad_of(n.a);
                    MatMap gxm(gx.data.data(), x.dim(0), x.dim(1));
                    ConstMatMap wm(w.data.data(), w.dim(0), w.dim(1));
                    gxm.noalias() += wm.transpose() * gy;
                }
                break;
            }
            case Op::MatVec: {
                const Array& a = nodes_[static_cast<size_t>(n.a)].out;
                const Array& x = nodes_[static_cast<size_t>(n.b)].out;
                if (wants(n.a)) {
                    Array& ga = grad_of(n.a);
                    for (int64_t r = 0; r < a.dim(0); ++r) {
                        for (int64_t cidx = 0; cidx < a.dim(1); ++cidx) {
                            ga[r * a.dim(1) + cidx] += g[r] * x[cidx];
                        }
                    }
                }
                if (wants(n.b)) {
                    Array& gx = grad_of(n.b);
                    for (int64_t r = 0; r < a.dim(0); ++r) {
                        for (int64_t cidx = 0; cidx < a.dim(1); ++cidx) {
                            gx[cidx] += g[r] * a[r * a.dim(1) + cidx];
                        }
                    }
                }
                break;
            }
            case Op::AddBiasTime: {
                const Array& x = nodes_[static_cast<size_t>(n.a)].out;
                const int64_t c = x.dim(0), t = x.dim(1);
                if (wants(n.a)) {
                    Array& gx = grad_of(n.a);
                    for (int64_t i2 = 0; i2 < gx.size(); ++i2) gx[i2] += g[i2];
                }
                if (wants(n.b)) {
                    Array& gb = grad_of(n.b);
                    for (int64_t ci = 0; ci < c; ++ci) {
                        real s = 0;
                        for (int64_t ti = 0; ti < t; ++ti) s += g[ci * t + ti];
                        gb[ci] += s;
                    }
                }
                break;
            }
            case Op::Add: {
                for (int id : {n.a, n.b}) {
                    if (!wants(id)) continue;
                    Array& gx = grad_of(id);
                    for (int64_t i2 = 0; i2 < gx.size(); ++i2) gx[i2] += g[i2];
                }
                break;
            }
            case Op::Sub: {
                if (wants(n.a)) {
                    Array& gx = grad_of(n.a);
                    for (int64_t i2 = 0; i2 < gx.size(); ++i2) gx[i2] += g[i2];
                }
                if (wants(n.b)) {
                    Array& gx = grad_of(n.b);
                    for (int64_t i2 = 0; i2 < gx.size(); ++i2) gx[i2] -= g[i2];
                }
                break;
            }
            case Op::Mul: {
                const Array& xa = nodes_[static_cast<size_t>(n.a)].out;
                const Array& xb = nodes_[static_cast<size_t>(n.b)].out;
                if (wants(n.a)) {
                    Array& gx = grad_of(n.a);
                    for (int64_t i2 = 0; i2 < gx.size(); ++i2) gx[i2] += g[i2] * xb[i2];
                }
                if (wants(n.b)) {
                    Array& gx = grad_of(n.b);
                    for (int64_t i2 = 0; i2 < gx.size(); ++i2) gx[i2] += g[i2] * xa[i2];
                }
                break;
            }
            case Op::Scale: {
                if (wants(n.a)) {
                    Array& gx = grad_of(n.a);
                    for (int64_t i2 = 0; i2 < gx.size(); ++i2) gx[i2] += g[i2] * n.c;
                }
                break;
            }
            case Op::Tanh: {
                if (wants(n.a)) {
                    Array& gx = grad_of(n.a);
                    for (int64_t i2 = 0; i2 < gx.size(); ++i2) {
                        const real y = n.out[i2];
                        gx[i2] += g[i2] * (real(1) - y * y);
                    }
                }
                break;
            }
            case Op::Sigmoid: {
                if (wants(n.a)) {
                    Array& gx = grad_of(n.a);
                    for (int64_t i2 = 0; i2 < gx.size(); ++i2) {
                        const real y = n.out[i2];
                        gx[i2] += g[i2] * y * (real(1) - y);
                    }
                }
                break;
            }
            case Op::Square: {
                if (wants(n.a)) {
                    const Array& xa = nodes_[static_cast<size_t>(n.a)].out;
                    Array& gx = grad_of(n.a);
                    for (int64_t i2 = 0; i2 < gx.size(); ++i2) {
                        gx[i2] += g[i2] * real(2) * xa[i2];
                    }
                }
                break;
            }
            case Op::Mean: {
                if (wants(n.a)) {
                    Array& gx = grad_of(n.a);
                    const real s = g[0] / static_cast<real>(gx.size());
                    for (auto& v : gx.data) v += s;
                }
                break;
            }
            case Op::Sum: {
                if (wants(n.a)) {
                    Array& gx = grad_of(n.a);
                    for (auto& v : gx.data) v += g[0];
                }
                break;
            }
            case Op::SliceTime: {
                if (wants(n.a)) {
                    const Array& xa = nodes_[static_cast<size_t>(n.a)].out;
                    const int64_t c = xa.ndim() == 2 ? xa.dim(0) : 1;
                    const int64_t t = xa.ndim() == 2 ? xa.dim(1) : xa.dim(0);
                    const int64_t len = n.out.ndim() == 2 ? n.out.dim(1) : n.out.dim(0);
                    Array& gx = grad_of(n.a);
                    for (int64_t ci = 0; ci < c; ++ci) {
                        for (int64_t ti = 0; ti < len; ++ti) {
                            gx[ci * t + n.start + ti] += g[ci * len + ti];
                        }
                    }
                }
                break;
            }
        }
    }
}

const Array& Tape::grad(Value leaf) {
    Node& n = at(leaf);
    if (n.op != Op::Leaf) {
        throw std::invalid_argument("grad: requested node is not a leaf");
    }
    if (!backward_done_) {
        throw std::logic_error("grad: backward() has not been run");
    }
    if (n.grad.data.empty()) n.grad = Array::zeros(n.out.shape);
    return n.grad;
}

std::vector<Array> finite_difference_gradient(
    const std::vector<Array>& inputs,
    const std::function<real(const std::vector<Array>&)>& f,
    real eps) {
    std::vector<Array> grads;
    grads.reserve(inputs.size());
    std::vector<Array> work = inputs;
    for (size_t i = 0; i < inputs.size(); ++i) {
        Array g = Array::zeros(inputs[i].shape);
        for (int64_t j = 0; j < g.size(); ++j) {
            const real orig = work[i][j];
            work[i][j] = orig + eps;
            const real fp = f(work);
            work[i][j] = orig - eps;
            const real fm = f(work);
            work[i][j] = orig;
            g[j] = (fp - fm) / (2 * eps);
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

}  // namespace ampal::ad
