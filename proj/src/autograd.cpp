#include "srcnet/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "srcnet/errors.hpp"

namespace srcnet::autograd {

const Tensor& Var::value() const {
    if (!valid()) throw ContractError("use of an unbound Var");
    return tape->value_at(id);
}

static void check_same_tape(Var a, Var b, const char* op) {
    if (!a.valid() || !b.valid() || a.tape != b.tape)
        throw ContractError(std::string(op) + ": operands recorded on different tapes");
}

Var Tape::push(const char* op, std::vector<int> inputs, Tensor value,
               std::function<void(Tape&, int, const Tensor&)> back) {
    Node n;
    n.op = op;
    n.value = std::move(value);
    n.inputs = std::move(inputs);
    for (int in : n.inputs) n.needs_grad = n.needs_grad || needs_grad_at(in);
    n.back = n.needs_grad ? std::move(back) : nullptr;
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Tensor value, bool requires_grad) {
    Node n;
    n.op = "leaf";
    n.value = std::move(value);
    n.needs_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(const std::string& name, Tensor value, bool requires_grad) {
    for (const Node& n : nodes_)
        if (n.name == name && !name.empty())
            throw ContractError("duplicate leaf name on tape: " + name);
    Var v = leaf(std::move(value), requires_grad);
    nodes_.back().name = name;
    return v;
}

float* Tape::grad_buf(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad) return nullptr;
    Tensor& g = grads_[static_cast<std::size_t>(id)];
    if (g.data.empty()) g = Tensor::zeros(n.value.dims);
    return g.data.data();
}

void Tape::backward(Var root) {
    if (!root.valid() || root.tape != this) throw ContractError("backward: root not on this tape");
    const Node& r = nodes_[static_cast<std::size_t>(root.id)];
    if (!r.value.dims.empty())
        throw ContractError("backward: root must be rank 0, got " + r.value.dims_str());

    grads_.assign(nodes_.size(), Tensor{});
    if (!r.needs_grad) return;  // nothing trainable reaches the root
    grads_[static_cast<std::size_t>(root.id)] = Tensor::scalar(1.0f);

    for (int i = root.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (!n.back || !n.needs_grad) continue;
        const Tensor& gout = grads_[static_cast<std::size_t>(i)];
        if (gout.data.empty()) continue;  // no gradient reached this node
        n.back(*this, i, gout);
    }
}

Tensor Tape::grad_of(Var v) const {
    if (!v.valid() || v.tape != this) throw ContractError("grad_of: Var not on this tape");
    if (static_cast<std::size_t>(v.id) < grads_.size() && !grads_[static_cast<std::size_t>(v.id)].data.empty())
        return grads_[static_cast<std::size_t>(v.id)];
    return Tensor::zeros(value_at(v.id).dims);
}

GradMap Tape::named_gradients() const {
    GradMap out;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Node& n = nodes_[i];
        if (n.name.empty() || !n.needs_grad || n.back) continue;
        if (i < grads_.size() && !grads_[i].data.empty())
            out[n.name] = grads_[i];
        else
            out[n.name] = Tensor::zeros(n.value.dims);
    }
    return out;
}

// ---- elementwise helpers ----------------------------------------------------

namespace {

template <typename Fwd, typename Bwd>
Var unary_elementwise(const char* op, Var x, Fwd fwd, Bwd bwd) {
    const Tensor& xv = x.value();
    Tensor out = Tensor::zeros(xv.dims);
    for (std::size_t i = 0; i < xv.data.size(); ++i) out.data[i] = fwd(xv.data[i]);
    return x.tape->push(op, {x.id}, std::move(out), [xid = x.id, bwd](Tape& t, int self, const Tensor& g) {
        float* gx = t.grad_buf(xid);
        if (!gx) return;
        const Tensor& xv = t.value_at(xid);
        const Tensor& yv = t.value_at(self);
        for (std::size_t i = 0; i < g.data.size(); ++i) gx[i] += g.data[i] * bwd(xv.data[i], yv.data[i]);
    });
}

}  // namespace

Var relu(Var x) {
    return unary_elementwise(
        "relu", x, [](float v) { return v > 0.0f ? v : 0.0f; },
        [](float v, float) { return v > 0.0f ? 1.0f : 0.0f; });
}

Var leaky_relu(Var x, float slope) {
    return unary_elementwise(
        "leaky_relu", x, [slope](float v) { return v > 0.0f ? v : slope * v; },
        [slope](float v, float) { return v > 0.0f ? 1.0f : slope; });
}

// Guard band keeps sigmoid outputs strictly inside (0,1) even when the input
// saturates float exp.
static constexpr float kSigmoidFloor = 1e-7f;
static constexpr float kSigmoidCeil = 1.0f - 1e-7f;

Var sigmoid(Var x) {
    return unary_elementwise(
        "sigmoid", x,
        [](float v) {
            float y;
            if (v >= 0.0f) {
                y = 1.0f / (1.0f + std::exp(-v));
            } else {
                const float e = std::exp(v);
                y = e / (1.0f + e);
            }
            return std::min(std::max(y, kSigmoidFloor), kSigmoidCeil);
        },
        [](float, float y) { return y * (1.0f - y); });
}

Var tanh(Var x) {
    return unary_elementwise(
        "tanh", x, [](float v) { return std::tanh(v); },
        [](float, float y) { return 1.0f - y * y; });
}

Var log(Var x, float eps) {
    if (eps <= 0.0f) throw ContractError("log: eps must be positive");
    return unary_elementwise(
        "log", x, [eps](float v) { return std::log(std::max(v, eps)); },
        [eps](float v, float) { return v > eps ? 1.0f / v : 0.0f; });
}

Var add(Var a, Var b) {
    check_same_tape(a, b, "add");
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (!av.same_dims(bv))
        throw ShapeError("add: dims mismatch " + av.dims_str() + " vs " + bv.dims_str());
    Tensor out = Tensor::zeros(av.dims);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = av.data[i] + bv.data[i];
    return a.tape->push("add", {a.id, b.id}, std::move(out), [aid = a.id, bid = b.id](Tape& t, int, const Tensor& g) {
        if (float* ga = t.grad_buf(aid))
            for (std::size_t i = 0; i < g.data.size(); ++i) ga[i] += g.data[i];
        if (float* gb = t.grad_buf(bid))
            for (std::size_t i = 0; i < g.data.size(); ++i) gb[i] += g.data[i];
    });
}

Var sub(Var a, Var b) {
    check_same_tape(a, b, "sub");
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (!av.same_dims(bv))
        throw ShapeError("sub: dims mismatch " + av.dims_str() + " vs " + bv.dims_str());
    Tensor out = Tensor::zeros(av.dims);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = av.data[i] - bv.data[i];
    return a.tape->push("sub", {a.id, b.id}, std::move(out), [aid = a.id, bid = b.id](Tape& t, int, const Tensor& g) {
        if (float* ga = t.grad_buf(aid))
            for (std::size_t i = 0; i < g.data.size(); ++i) ga[i] += g.data[i];
        if (float* gb = t.grad_buf(bid))
            for (std::size_t i = 0; i < g.data.size(); ++i) gb[i] -= g.data[i];
    });
}

Var mul(Var a, Var b) {
    check_same_tape(a, b, "mul");
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (!av.same_dims(bv))
        throw ShapeError("mul: dims mismatch " + av.dims_str() + " vs " + bv.dims_str());
    Tensor out = Tensor::zeros(av.dims);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = av.data[i] * bv.data[i];
    return a.tape->push("mul", {a.id, b.id}, std::move(out), [aid = a.id, bid = b.id](Tape& t, int, const Tensor& g) {
        const Tensor& av = t.value_at(aid);
        const Tensor& bv = t.value_at(bid);
        if (float* ga = t.grad_buf(aid))
            for (std::size_t i = 0; i < g.data.size(); ++i) ga[i] += g.data[i] * bv.data[i];
        if (float* gb = t.grad_buf(bid))
            for (std::size_t i = 0; i < g.data.size(); ++i) gb[i] += g.data[i] * av.data[i];
    });
}

Var add_const(Var x, float c) {
    return unary_elementwise(
        "add_const", x, [c](float v) { return v + c; }, [](float, float) { return 1.0f; });
}

Var mul_const(Var x, float c) {
    return unary_elementwise(
        "mul_const", x, [c](float v) { return v * c; }, [c](float, float) { return c; });
}

Var const_minus(float c, Var x) {
    return unary_elementwise(
        "const_minus", x, [c](float v) { return c - v; }, [](float, float) { return -1.0f; });
}

// ---- convolution -------------------------------------------------------------

namespace {

struct ConvGeom {
    int n, cin, h, w;     // input
    int cout, k;          // kernel
    int stride, pad;
    int ho, wo;           // output
};

ConvGeom conv_geometry(const Tensor& input, const Tensor& kernel, int stride, int padding, bool transpose) {
    if (input.rank() != 4)
        throw ShapeError("conv input must be rank 4 [N,C,H,W], got " + input.dims_str());
    if (kernel.rank() != 4)
        throw ShapeError("conv kernel must be rank 4, got " + kernel.dims_str());
    if (stride < 1) throw ContractError("conv stride must be >= 1");
    if (padding < 0) throw ContractError("conv padding must be >= 0");
    if (kernel.dim(2) != kernel.dim(3))
        throw ShapeError("conv kernel must be square, got " + kernel.dims_str());

    ConvGeom g{};
    g.n = input.dim(0);
    g.cin = input.dim(1);
    g.h = input.dim(2);
    g.w = input.dim(3);
    g.k = kernel.dim(2);
    g.stride = stride;
    g.pad = padding;
    if (!transpose) {
        if (kernel.dim(1) != g.cin)
            throw ShapeError("conv2d: kernel expects " + std::to_string(kernel.dim(1)) +
                             " input channels but input " + input.dims_str() + " has " + std::to_string(g.cin));
        g.cout = kernel.dim(0);
        if (g.k > g.h + 2 * padding || g.k > g.w + 2 * padding)
            throw ShapeError("conv2d: kernel " + kernel.dims_str() + " larger than padded input " + input.dims_str());
        g.ho = (g.h + 2 * padding - g.k) / stride + 1;
        g.wo = (g.w + 2 * padding - g.k) / stride + 1;
        if (g.ho < 1 || g.wo < 1)
            throw ShapeError("conv2d: empty output for input " + input.dims_str());
    } else {
        if (kernel.dim(0) != g.cin)
            throw ShapeError("conv2d_transpose: kernel " + kernel.dims_str() + " expects " +
                             std::to_string(kernel.dim(0)) + " input channels but input " + input.dims_str() +
                             " has " + std::to_string(g.cin));
        g.cout = kernel.dim(1);
        g.ho = (g.h - 1) * stride - 2 * padding + g.k;
        g.wo = (g.w - 1) * stride - 2 * padding + g.k;
        if (g.ho < 1 || g.wo < 1)
            throw ShapeError("conv2d_transpose: empty output for input " + input.dims_str());
    }
    return g;
}

// valid output-column range for a given kernel column: 0 <= ow*stride - pad + kw < w
inline void ow_range(int w, int stride, int pad, int kw, int wo, int& lo, int& hi) {
    const int off = kw - pad;
    lo = off < 0 ? (-off + stride - 1) / stride : 0;
    hi = wo;
    // ow*stride + off <= w-1  =>  ow <= (w-1-off)/stride, empty when negative
    const int span = w - 1 - off;
    const int maxw = span >= 0 ? span / stride : -1;
    if (maxw + 1 < hi) hi = maxw + 1;
    if (lo > hi) lo = hi;
}

// Every kernel below walks an "output plane per iteration" pattern: the
// destination of the outer loop body is disjoint from all other iterations
// and its accumulation order is fixed, so the loops parallelize without
// changing a single bit of the result.

void conv2d_forward(const float* in, const float* ker, float* out, const ConvGeom& g) {
    const std::int64_t in_plane = static_cast<std::int64_t>(g.h) * g.w;
    const std::int64_t out_plane = static_cast<std::int64_t>(g.ho) * g.wo;
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
    for (int n = 0; n < g.n; ++n) {
        for (int co = 0; co < g.cout; ++co) {
            float* op = out + (static_cast<std::int64_t>(n) * g.cout + co) * out_plane;
            for (int ci = 0; ci < g.cin; ++ci) {
                const float* ip = in + (static_cast<std::int64_t>(n) * g.cin + ci) * in_plane;
                const float* kp = ker + (static_cast<std::int64_t>(co) * g.cin + ci) * g.k * g.k;
                for (int kh = 0; kh < g.k; ++kh) {
                    for (int kw = 0; kw < g.k; ++kw) {
                        const float wv = kp[kh * g.k + kw];
                        if (wv == 0.0f) continue;
                        int lo, hi;
                        ow_range(g.w, g.stride, g.pad, kw, g.wo, lo, hi);
                        for (int oh = 0; oh < g.ho; ++oh) {
                            const int ih = oh * g.stride - g.pad + kh;
                            if (ih < 0 || ih >= g.h) continue;
                            const float* irow = ip + static_cast<std::int64_t>(ih) * g.w + (kw - g.pad);
                            float* orow = op + static_cast<std::int64_t>(oh) * g.wo;
                            for (int ow = lo; ow < hi; ++ow) orow[ow] += wv * irow[ow * g.stride];
                        }
                    }
                }
            }
        }
    }
}

void conv2d_backward_input(const float* gout, const float* ker, float* gin, const ConvGeom& g) {
    const std::int64_t in_plane = static_cast<std::int64_t>(g.h) * g.w;
    const std::int64_t out_plane = static_cast<std::int64_t>(g.ho) * g.wo;
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
    for (int n = 0; n < g.n; ++n) {
        for (int ci = 0; ci < g.cin; ++ci) {
            float* gip = gin + (static_cast<std::int64_t>(n) * g.cin + ci) * in_plane;
            for (int co = 0; co < g.cout; ++co) {
                const float* gp = gout + (static_cast<std::int64_t>(n) * g.cout + co) * out_plane;
                const float* kp = ker + (static_cast<std::int64_t>(co) * g.cin + ci) * g.k * g.k;
                for (int kh = 0; kh < g.k; ++kh) {
                    for (int kw = 0; kw < g.k; ++kw) {
                        const float wv = kp[kh * g.k + kw];
                        if (wv == 0.0f) continue;
                        int lo, hi;
                        ow_range(g.w, g.stride, g.pad, kw, g.wo, lo, hi);
                        for (int oh = 0; oh < g.ho; ++oh) {
                            const int ih = oh * g.stride - g.pad + kh;
                            if (ih < 0 || ih >= g.h) continue;
                            float* girow = gip + static_cast<std::int64_t>(ih) * g.w + (kw - g.pad);
                            const float* grow = gp + static_cast<std::int64_t>(oh) * g.wo;
                            for (int ow = lo; ow < hi; ++ow) girow[ow * g.stride] += wv * grow[ow];
                        }
                    }
                }
            }
        }
    }
}

void conv2d_backward_kernel(const float* gout, const float* in, float* gker, const ConvGeom& g) {
    const std::int64_t in_plane = static_cast<std::int64_t>(g.h) * g.w;
    const std::int64_t out_plane = static_cast<std::int64_t>(g.ho) * g.wo;
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
    for (int co = 0; co < g.cout; ++co) {
        for (int ci = 0; ci < g.cin; ++ci) {
            float* kp = gker + (static_cast<std::int64_t>(co) * g.cin + ci) * g.k * g.k;
            for (int n = 0; n < g.n; ++n) {
                const float* gp = gout + (static_cast<std::int64_t>(n) * g.cout + co) * out_plane;
                const float* ip = in + (static_cast<std::int64_t>(n) * g.cin + ci) * in_plane;
                for (int kh = 0; kh < g.k; ++kh) {
                    for (int kw = 0; kw < g.k; ++kw) {
                        int lo, hi;
                        ow_range(g.w, g.stride, g.pad, kw, g.wo, lo, hi);
                        float acc = 0.0f;
                        for (int oh = 0; oh < g.ho; ++oh) {
                            const int ih = oh * g.stride - g.pad + kh;
                            if (ih < 0 || ih >= g.h) continue;
                            const float* irow = ip + static_cast<std::int64_t>(ih) * g.w + (kw - g.pad);
                            const float* grow = gp + static_cast<std::int64_t>(oh) * g.wo;
                            for (int ow = lo; ow < hi; ++ow) acc += grow[ow] * irow[ow * g.stride];
                        }
                        kp[kh * g.k + kw] += acc;
                    }
                }
            }
        }
    }
}

// Transposed convolution as the exact adjoint of conv2d: output positions
// oh = ih*stride - pad + kh receive in[ih] * K[ci][co][kh][kw].
void tconv_forward(const float* in, const float* ker, float* out, const ConvGeom& g) {
    const std::int64_t in_plane = static_cast<std::int64_t>(g.h) * g.w;
    const std::int64_t out_plane = static_cast<std::int64_t>(g.ho) * g.wo;
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
    for (int n = 0; n < g.n; ++n) {
        for (int co = 0; co < g.cout; ++co) {
            float* op = out + (static_cast<std::int64_t>(n) * g.cout + co) * out_plane;
            for (int ci = 0; ci < g.cin; ++ci) {
                const float* ip = in + (static_cast<std::int64_t>(n) * g.cin + ci) * in_plane;
                const float* kp = ker + (static_cast<std::int64_t>(ci) * g.cout + co) * g.k * g.k;
                for (int kh = 0; kh < g.k; ++kh) {
                    for (int kw = 0; kw < g.k; ++kw) {
                        const float wv = kp[kh * g.k + kw];
                        if (wv == 0.0f) continue;
                        int lo, hi;
                        ow_range(g.wo, g.stride, g.pad, kw, g.w, lo, hi);
                        for (int ih = 0; ih < g.h; ++ih) {
                            const int oh = ih * g.stride - g.pad + kh;
                            if (oh < 0 || oh >= g.ho) continue;
                            const float* irow = ip + static_cast<std::int64_t>(ih) * g.w;
                            float* orow = op + static_cast<std::int64_t>(oh) * g.wo + (kw - g.pad);
                            for (int iw = lo; iw < hi; ++iw) orow[iw * g.stride] += wv * irow[iw];
                        }
                    }
                }
            }
        }
    }
}

void tconv_backward_input(const float* gout, const float* ker, float* gin, const ConvGeom& g) {
    const std::int64_t in_plane = static_cast<std::int64_t>(g.h) * g.w;
    const std::int64_t out_plane = static_cast<std::int64_t>(g.ho) * g.wo;
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
    for (int n = 0; n < g.n; ++n) {
        for (int ci = 0; ci < g.cin; ++ci) {
            float* gip = gin + (static_cast<std::int64_t>(n) * g.cin + ci) * in_plane;
            for (int co = 0; co < g.cout; ++co) {
                const float* gp = gout + (static_cast<std::int64_t>(n) * g.cout + co) * out_plane;
                const float* kp = ker + (static_cast<std::int64_t>(ci) * g.cout + co) * g.k * g.k;
                for (int kh = 0; kh < g.k; ++kh) {
                    for (int kw = 0; kw < g.k; ++kw) {
                        const float wv = kp[kh * g.k + kw];
                        if (wv == 0.0f) continue;
                        int lo, hi;
                        ow_range(g.wo, g.stride, g.pad, kw, g.w, lo, hi);
                        for (int ih = 0; ih < g.h; ++ih) {
                            const int oh = ih * g.stride - g.pad + kh;
                            if (oh < 0 || oh >= g.ho) continue;
                            float* girow = gip + static_cast<std::int64_t>(ih) * g.w;
                            const float* grow = gp + static_cast<std::int64_t>(oh) * g.wo + (kw - g.pad);
                            for (int iw = lo; iw < hi; ++iw) girow[iw] += wv * grow[iw * g.stride];
                        }
                    }
                }
            }
        }
    }
}

void tconv_backward_kernel(const float* gout, const float* in, float* gker, const ConvGeom& g) {
    const std::int64_t in_plane = static_cast<std::int64_t>(g.h) * g.w;
    const std::int64_t out_plane = static_cast<std::int64_t>(g.ho) * g.wo;
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
    for (int ci = 0; ci < g.cin; ++ci) {
        for (int co = 0; co < g.cout; ++co) {
            float* kp = gker + (static_cast<std::int64_t>(ci) * g.cout + co) * g.k * g.k;
            for (int n = 0; n < g.n; ++n) {
                const float* ip = in + (static_cast<std::int64_t>(n) * g.cin + ci) * in_plane;
                const float* gp = gout + (static_cast<std::int64_t>(n) * g.cout + co) * out_plane;
                for (int kh = 0; kh < g.k; ++kh) {
                    for (int kw = 0; kw < g.k; ++kw) {
                        int lo, hi;
                        ow_range(g.wo, g.stride, g.pad, kw, g.w, lo, hi);
                        float acc = 0.0f;
                        for (int ih = 0; ih < g.h; ++ih) {
                            const int oh = ih * g.stride - g.pad + kh;
                            if (oh < 0 || oh >= g.ho) continue;
                            const float* irow = ip + static_cast<std::int64_t>(ih) * g.w;
                            const float* grow = gp + static_cast<std::int64_t>(oh) * g.wo + (kw - g.pad);
                            for (int iw = lo; iw < hi; ++iw) acc += irow[iw] * grow[iw * g.stride];
                        }
                        kp[kh * g.k + kw] += acc;
                    }
                }
            }
        }
    }
}

}  // namespace

Var conv2d(Var input, Var kernel, int stride, int padding) {
    check_same_tape(input, kernel, "conv2d");
    const Tensor& iv = input.value();
    const Tensor& kv = kernel.value();
    ConvGeom g = conv_geometry(iv, kv, stride, padding, false);
    Tensor out = Tensor::zeros({g.n, g.cout, g.ho, g.wo});
    conv2d_forward(iv.data.data(), kv.data.data(), out.data.data(), g);
    return input.tape->push("conv2d", {input.id, kernel.id}, std::move(out),
                            [iid = input.id, kid = kernel.id, g](Tape& t, int, const Tensor& gout) {
                                const Tensor& iv = t.value_at(iid);
                                const Tensor& kv = t.value_at(kid);
                                if (float* gi = t.grad_buf(iid))
                                    conv2d_backward_input(gout.data.data(), kv.data.data(), gi, g);
                                if (float* gk = t.grad_buf(kid))
                                    conv2d_backward_kernel(gout.data.data(), iv.data.data(), gk, g);
                            });
}

Var conv2d_transpose(Var input, Var kernel, int stride, int padding) {
    check_same_tape(input, kernel, "conv2d_transpose");
    const Tensor& iv = input.value();
    const Tensor& kv = kernel.value();
    ConvGeom g = conv_geometry(iv, kv, stride, padding, true);
    Tensor out = Tensor::zeros({g.n, g.cout, g.ho, g.wo});
    tconv_forward(iv.data.data(), kv.data.data(), out.data.data(), g);
    return input.tape->push("conv2d_transpose", {input.id, kernel.id}, std::move(out),
                            [iid = input.id, kid = kernel.id, g](Tape& t, int, const Tensor& gout) {
                                const Tensor& iv = t.value_at(iid);
                                const Tensor& kv = t.value_at(kid);
                                if (float* gi = t.grad_buf(iid))
                                    tconv_backward_input(gout.data.data(), kv.data.data(), gi, g);
                                if (float* gk = t.grad_buf(kid))
                                    tconv_backward_kernel(gout.data.data(), iv.data.data(), gk, g);
                            });
}

// ---- structure ops -----------------------------------------------------------

Var concat_channels(Var a, Var b) {
    check_same_tape(a, b, "concat_channels");
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.rank() != 4 || bv.rank() != 4)
        throw ShapeError("concat_channels expects rank-4 operands, got " + av.dims_str() + " and " + bv.dims_str());
    if (av.dim(0) != bv.dim(0) || av.dim(2) != bv.dim(2) || av.dim(3) != bv.dim(3))
        throw ShapeError("concat_channels: spatial/batch mismatch " + av.dims_str() + " vs " + bv.dims_str());
    const int n = av.dim(0), ca = av.dim(1), cb = bv.dim(1), h = av.dim(2), w = av.dim(3);
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    Tensor out = Tensor::zeros({n, ca + cb, h, w});
    for (int i = 0; i < n; ++i) {
        std::memcpy(out.data.data() + (static_cast<std::int64_t>(i) * (ca + cb)) * plane,
                    av.data.data() + static_cast<std::int64_t>(i) * ca * plane,
                    sizeof(float) * static_cast<std::size_t>(ca * plane));
        std::memcpy(out.data.data() + (static_cast<std::int64_t>(i) * (ca + cb) + ca) * plane,
                    bv.data.data() + static_cast<std::int64_t>(i) * cb * plane,
                    sizeof(float) * static_cast<std::size_t>(cb * plane));
    }
    return a.tape->push("concat_channels", {a.id, b.id}, std::move(out),
                        [aid = a.id, bid = b.id, n, ca, cb, plane](Tape& t, int, const Tensor& g) {
                            float* ga = t.grad_buf(aid);
                            float* gb = t.grad_buf(bid);
                            for (int i = 0; i < n; ++i) {
                                const float* gs = g.data.data() + static_cast<std::int64_t>(i) * (ca + cb) * plane;
                                if (ga)
                                    for (std::int64_t j = 0; j < ca * plane; ++j)
                                        ga[static_cast<std::int64_t>(i) * ca * plane + j] += gs[j];
                                if (gb)
                                    for (std::int64_t j = 0; j < cb * plane; ++j)
                                        gb[static_cast<std::int64_t>(i) * cb * plane + j] += gs[ca * plane + j];
                            }
                        });
}

Var add_channel_bias(Var x, Var bias) {
    check_same_tape(x, bias, "add_channel_bias");
    const Tensor& xv = x.value();
    const Tensor& bv = bias.value();
    if (xv.rank() != 4) throw ShapeError("add_channel_bias expects rank-4 input, got " + xv.dims_str());
    if (bv.rank() != 1 || bv.dim(0) != xv.dim(1))
        throw ShapeError("add_channel_bias: bias " + bv.dims_str() + " does not match channels of " + xv.dims_str());
    const int n = xv.dim(0), c = xv.dim(1);
    const std::int64_t plane = static_cast<std::int64_t>(xv.dim(2)) * xv.dim(3);
    Tensor out = xv;
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            float* p = out.data.data() + (static_cast<std::int64_t>(i) * c + ch) * plane;
            const float bval = bv.data[static_cast<std::size_t>(ch)];
            for (std::int64_t j = 0; j < plane; ++j) p[j] += bval;
        }
    return x.tape->push("add_channel_bias", {x.id, bias.id}, std::move(out),
                        [xid = x.id, bid = bias.id, n, c, plane](Tape& t, int, const Tensor& g) {
                            if (float* gx = t.grad_buf(xid))
                                for (std::size_t i = 0; i < g.data.size(); ++i) gx[i] += g.data[i];
                            if (float* gb = t.grad_buf(bid)) {
                                for (int i = 0; i < n; ++i)
                                    for (int ch = 0; ch < c; ++ch) {
                                        const float* p = g.data.data() + (static_cast<std::int64_t>(i) * c + ch) * plane;
                                        double acc = 0.0;
                                        for (std::int64_t j = 0; j < plane; ++j) acc += p[j];
                                        gb[ch] += static_cast<float>(acc);
                                    }
                            }
                        });
}

Var instance_norm(Var x, Var gain, Var bias, float eps) {
    check_same_tape(x, gain, "instance_norm");
    check_same_tape(x, bias, "instance_norm");
    const Tensor& xv = x.value();
    const Tensor& gv = gain.value();
    const Tensor& bv = bias.value();
    if (xv.rank() != 4) throw ShapeError("instance_norm expects rank-4 input, got " + xv.dims_str());
    const int n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
    if (static_cast<std::int64_t>(h) * w < 2)
        throw ContractError("instance_norm: spatial size " + std::to_string(h) + "x" + std::to_string(w) +
                            " gives degenerate statistics (need H*W >= 2)");
    if (gv.rank() != 1 || gv.dim(0) != c || bv.rank() != 1 || bv.dim(0) != c)
        throw ShapeError("instance_norm: gain/bias must be [C] with C=" + std::to_string(c));
    if (eps <= 0.0f) throw ContractError("instance_norm: eps must be positive");

    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    Tensor out = Tensor::zeros(xv.dims);
    std::vector<float> means(static_cast<std::size_t>(n) * c), istds(static_cast<std::size_t>(n) * c);
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const float* p = xv.data.data() + (static_cast<std::int64_t>(i) * c + ch) * plane;
            double s = 0.0;
            for (std::int64_t j = 0; j < plane; ++j) s += p[j];
            const float mu = static_cast<float>(s / static_cast<double>(plane));
            double v = 0.0;
            for (std::int64_t j = 0; j < plane; ++j) {
                const double d = static_cast<double>(p[j]) - mu;
                v += d * d;
            }
            const float istd = 1.0f / std::sqrt(static_cast<float>(v / static_cast<double>(plane)) + eps);
            means[static_cast<std::size_t>(i) * c + ch] = mu;
            istds[static_cast<std::size_t>(i) * c + ch] = istd;
            float* q = out.data.data() + (static_cast<std::int64_t>(i) * c + ch) * plane;
            const float gn = gv.data[static_cast<std::size_t>(ch)];
            const float bs = bv.data[static_cast<std::size_t>(ch)];
            for (std::int64_t j = 0; j < plane; ++j) q[j] = gn * ((p[j] - mu) * istd) + bs;
        }

    return x.tape->push(
        "instance_norm", {x.id, gain.id, bias.id}, std::move(out),
        [xid = x.id, gid = gain.id, bid = bias.id, n, c, plane, means = std::move(means),
         istds = std::move(istds)](Tape& t, int, const Tensor& g) {
            const Tensor& xv = t.value_at(xid);
            const Tensor& gv = t.value_at(gid);
            float* gx = t.grad_buf(xid);
            float* gg = t.grad_buf(gid);
            float* gb = t.grad_buf(bid);
            for (int i = 0; i < n; ++i)
                for (int ch = 0; ch < c; ++ch) {
                    const std::int64_t base = (static_cast<std::int64_t>(i) * c + ch) * plane;
                    const float* xp = xv.data.data() + base;
                    const float* gp = g.data.data() + base;
                    const float mu = means[static_cast<std::size_t>(i) * c + ch];
                    const float istd = istds[static_cast<std::size_t>(i) * c + ch];
                    const float gn = gv.data[static_cast<std::size_t>(ch)];
                    double sum_g = 0.0, sum_gy = 0.0;
                    for (std::int64_t j = 0; j < plane; ++j) {
                        const float y = (xp[j] - mu) * istd;
                        sum_g += gp[j];
                        sum_gy += static_cast<double>(gp[j]) * y;
                    }
                    if (gg) gg[ch] += static_cast<float>(sum_gy);
                    if (gb) gb[ch] += static_cast<float>(sum_g);
                    if (gx) {
                        const float mg = static_cast<float>(sum_g / static_cast<double>(plane));
                        const float mgy = static_cast<float>(sum_gy / static_cast<double>(plane));
                        float* gxp = gx + base;
                        for (std::int64_t j = 0; j < plane; ++j) {
                            const float y = (xp[j] - mu) * istd;
                            gxp[j] += gn * istd * (gp[j] - mg - y * mgy);
                        }
                    }
                }
        });
}

// ---- reductions ---------------------------------------------------------------

Var mean(Var x) {
    const Tensor& xv = x.value();
    double acc = 0.0;
    for (float v : xv.data) acc += v;
    const auto n = static_cast<double>(xv.numel());
    Tensor out = Tensor::scalar(static_cast<float>(acc / n));
    return x.tape->push("mean", {x.id}, std::move(out), [xid = x.id, n](Tape& t, int, const Tensor& g) {
        if (float* gx = t.grad_buf(xid)) {
            const float gv = g.data[0] / static_cast<float>(n);
            const auto count = t.value_at(xid).data.size();
            for (std::size_t i = 0; i < count; ++i) gx[i] += gv;
        }
    });
}

Var mean_per_sample(Var x) {
    const Tensor& xv = x.value();
    if (xv.rank() < 1) throw ShapeError("mean_per_sample needs rank >= 1, got " + xv.dims_str());
    const int n = xv.dim(0);
    const std::int64_t per = xv.numel() / n;
    Tensor out = Tensor::zeros({n});
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        const float* p = xv.data.data() + static_cast<std::int64_t>(i) * per;
        for (std::int64_t j = 0; j < per; ++j) acc += p[j];
        out.data[static_cast<std::size_t>(i)] = static_cast<float>(acc / static_cast<double>(per));
    }
    return x.tape->push("mean_per_sample", {x.id}, std::move(out),
                        [xid = x.id, n, per](Tape& t, int, const Tensor& g) {
                            if (float* gx = t.grad_buf(xid))
                                for (int i = 0; i < n; ++i) {
                                    const float gv = g.data[static_cast<std::size_t>(i)] / static_cast<float>(per);
                                    float* p = gx + static_cast<std::int64_t>(i) * per;
                                    for (std::int64_t j = 0; j < per; ++j) p[j] += gv;
                                }
                        });
}

Var l2_norm(Var x) {
    const Tensor& xv = x.value();
    double acc = 0.0;
    for (float v : xv.data) acc += static_cast<double>(v) * v;
    const float norm = static_cast<float>(std::sqrt(acc));
    Tensor out = Tensor::scalar(norm);
    return x.tape->push("l2_norm", {x.id}, std::move(out), [xid = x.id, norm](Tape& t, int, const Tensor& g) {
        if (float* gx = t.grad_buf(xid)) {
            if (norm < 1e-12f) return;  // subgradient 0 at the origin
            const Tensor& xv = t.value_at(xid);
            const float s = g.data[0] / norm;
            for (std::size_t i = 0; i < xv.data.size(); ++i) gx[i] += s * xv.data[i];
        }
    });
}

Var l2_norm_per_sample(Var x) {
    const Tensor& xv = x.value();
    if (xv.rank() < 1) throw ShapeError("l2_norm_per_sample needs rank >= 1, got " + xv.dims_str());
    const int n = xv.dim(0);
    const std::int64_t per = xv.numel() / n;
    Tensor out = Tensor::zeros({n});
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        const float* p = xv.data.data() + static_cast<std::int64_t>(i) * per;
        for (std::int64_t j = 0; j < per; ++j) acc += static_cast<double>(p[j]) * p[j];
        out.data[static_cast<std::size_t>(i)] = static_cast<float>(std::sqrt(acc));
    }
    return x.tape->push("l2_norm_per_sample", {x.id}, std::move(out),
                        [xid = x.id, n, per](Tape& t, int self, const Tensor& g) {
                            if (float* gx = t.grad_buf(xid)) {
                                const Tensor& xv = t.value_at(xid);
                                const Tensor& norms = t.value_at(self);
                                for (int i = 0; i < n; ++i) {
                                    const float nv = norms.data[static_cast<std::size_t>(i)];
                                    if (nv < 1e-12f) continue;
                                    const float s = g.data[static_cast<std::size_t>(i)] / nv;
                                    const float* p = xv.data.data() + static_cast<std::int64_t>(i) * per;
                                    float* q = gx + static_cast<std::int64_t>(i) * per;
                                    for (std::int64_t j = 0; j < per; ++j) q[j] += s * p[j];
                                }
                            }
                        });
}

Var mse(Var a, Var b) {
    Var d = sub(a, b);
    return mean(mul(d, d));
}

// ---- Adam ----------------------------------------------------------------------

void ModelParams::add(std::string name, Tensor value) {
    for (const auto& e : entries)
        if (e.name == name) throw ContractError("duplicate parameter name: " + name);
    ParamEntry e;
    e.name = std::move(name);
    e.m1 = Tensor::zeros(value.dims);
    e.m2 = Tensor::zeros(value.dims);
    e.value = std::move(value);
    entries.push_back(std::move(e));
}

const ParamEntry* ModelParams::find(const std::string& name) const {
    for (const auto& e : entries)
        if (e.name == name) return &e;
    return nullptr;
}

std::int64_t ModelParams::parameter_count() const {
    std::int64_t n = 0;
    for (const auto& e : entries) n += e.value.numel();
    return n;
}

void adam_step(ModelParams& params, const GradMap& grads, Direction direction, const AdamConfig& cfg) {
    if (grads.size() != params.entries.size())
        throw ContractError("adam_step: gradient map has " + std::to_string(grads.size()) +
                            " entries, parameters have " + std::to_string(params.entries.size()));
    for (const auto& [name, g] : grads)
        if (!params.find(name)) throw ContractError("adam_step: gradient for unknown parameter " + name);

    params.step += 1;
    const double t = static_cast<double>(params.step);
    const float bc1 = 1.0f - static_cast<float>(std::pow(cfg.beta1, t));
    const float bc2 = 1.0f - static_cast<float>(std::pow(cfg.beta2, t));
    const float sign = direction == Direction::Descend ? -1.0f : 1.0f;

    for (auto& e : params.entries) {
        const auto it = grads.find(e.name);
        if (it == grads.end()) throw ContractError("adam_step: missing gradient for parameter " + e.name);
        const Tensor& g = it->second;
        if (!g.same_dims(e.value))
            throw ContractError("adam_step: gradient dims " + g.dims_str() + " do not match parameter " +
                                e.name + " " + e.value.dims_str());
        float* w = e.value.data.data();
        float* m1 = e.m1.data.data();
        float* m2 = e.m2.data.data();
        const float* gp = g.data.data();
        const std::size_t count = e.value.data.size();
        for (std::size_t i = 0; i < count; ++i) {
            m1[i] = cfg.beta1 * m1[i] + (1.0f - cfg.beta1) * gp[i];
            m2[i] = cfg.beta2 * m2[i] + (1.0f - cfg.beta2) * gp[i] * gp[i];
            const float mhat = m1[i] / bc1;
            const float vhat = m2[i] / bc2;
            w[i] += sign * cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

}  // namespace srcnet::autograd
