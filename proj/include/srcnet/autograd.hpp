#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "srcnet/tensor.hpp"

namespace srcnet::autograd {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid as long as the
/// tape lives.
struct Var {
    Tape* tape = nullptr;
    int id = -1;

    bool valid() const { return tape != nullptr && id >= 0; }
    const Tensor& value() const;
};

/// Gradients of named leaves, keyed by leaf name. Ordered so that iteration
/// is deterministic.
using GradMap = std::map<std::string, Tensor>;

/// Append-only record of one forward computation. Nodes are stored in
/// creation order, which is already a topological order, so backward() is a
/// single reverse sweep. Gradients never flow into subgraphs that contain no
/// trainable leaf; a leaf with requires_grad == false acts as a constant.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // ---- leaves -----------------------------------------------------------

    Var leaf(Tensor value, bool requires_grad = true);
    /// Named leaf; names must be unique per tape. Named trainable leaves are
    /// the ones collected by named_gradients().
    Var leaf(const std::string& name, Tensor value, bool requires_grad = true);
    Var constant(Tensor value) { return leaf(std::move(value), false); }

    // ---- backward ---------------------------------------------------------

    /// Reverse sweep from a rank-0 root. Fills gradients for every node that
    /// participates; leaves untouched by the root keep a zero gradient.
    void backward(Var root);

    /// Gradient of any recorded node (zeros of matching dims if none flowed).
    Tensor grad_of(Var v) const;

    /// Gradients of all named leaves with requires_grad, keyed by name.
    GradMap named_gradients() const;

    int node_count() const { return static_cast<int>(nodes_.size()); }

    // ---- low-level surface used by the op implementations ------------------

    /// Records an interior node. The backward body reads input values through
    /// the tape and accumulates via grad_buf(); it is dropped when no input
    /// needs a gradient.
    Var push(const char* op, std::vector<int> inputs, Tensor value,
             std::function<void(Tape&, int, const Tensor&)> back);

    const Tensor& value_at(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    bool needs_grad_at(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }

    /// Raw gradient buffer of a node, allocated (zeroed) on first use.
    /// Returns nullptr when the node does not need a gradient, so backward
    /// bodies can skip that work entirely.
    float* grad_buf(int id);

private:
    struct Node {
        const char* op;
        Tensor value;
        std::vector<int> inputs;
        bool needs_grad = false;
        std::string name;  // leaves only
        std::function<void(Tape&, int self, const Tensor& gout)> back;
    };

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
};

// ---- operations ------------------------------------------------------------

/// Cross-correlation. input [N,Cin,H,W] * kernel [Cout,Cin,k,k] -> [N,Cout,H',W']
/// with H' = (H + 2*padding - k)/stride + 1.
Var conv2d(Var input, Var kernel, int stride, int padding);

/// Adjoint of conv2d with the same kernel geometry. input [N,Cin,H,W] *
/// kernel [Cin,Cout,k,k] -> [N,Cout,H'',W''] with H'' = (H-1)*stride - 2*padding + k.
Var conv2d_transpose(Var input, Var kernel, int stride, int padding);

Var relu(Var x);
Var leaky_relu(Var x, float slope);
/// Numerically guarded logistic; outputs stay strictly inside (0,1).
Var sigmoid(Var x);
Var tanh(Var x);

/// Per-(sample,channel) normalization to mean 0 / variance 1, then affine
/// gain[C], bias[C]. Differentiable through the statistics.
Var instance_norm(Var x, Var gain, Var bias, float eps);

/// [N,Ca,H,W] ++ [N,Cb,H,W] -> [N,Ca+Cb,H,W], a first.
Var concat_channels(Var a, Var b);

/// x [N,C,H,W] + bias[C] broadcast over N,H,W.
Var add_channel_bias(Var x, Var bias);

/// Mean of all elements -> rank 0. Accumulates in double.
Var mean(Var x);
/// Per-sample mean over all non-batch axes: [N,...] -> [N].
Var mean_per_sample(Var x);
/// Elementwise ln(max(x, eps)); the clamp keeps saturated probabilities finite.
Var log(Var x, float eps);
/// sqrt(sum of squares) -> rank 0. Accumulates in double.
Var l2_norm(Var x);
/// Per-sample Euclidean norm: [N,...] -> [N].
Var l2_norm_per_sample(Var x);
/// Mean squared elementwise difference -> rank 0.
Var mse(Var a, Var b);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var add_const(Var x, float c);
Var mul_const(Var x, float c);
Var const_minus(float c, Var x);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(float c, Var x) { return mul_const(x, c); }
inline Var operator+(Var x, float c) { return add_const(x, c); }
inline Var operator-(float c, Var x) { return const_minus(c, x); }

// ---- optimizer --------------------------------------------------------------

/// One named parameter tensor with its Adam moments.
struct ParamEntry {
    std::string name;
    Tensor value;
    Tensor m1;
    Tensor m2;
};

enum class Direction { Ascend, Descend };

/// Ordered set of named parameters plus optimizer state. Order is creation
/// order and is part of the persistent format, so it never changes after init.
struct ModelParams {
    std::vector<ParamEntry> entries;
    std::int64_t step = 0;

    void add(std::string name, Tensor value);
    const ParamEntry* find(const std::string& name) const;
    std::int64_t parameter_count() const;
};

struct AdamConfig {
    float lr = 1e-4f;
    float beta1 = 0.5f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

/// Bias-corrected Adam. Ascend negates the update that Descend would apply.
/// Gradients must be keyed exactly like the parameter entries.
void adam_step(ModelParams& params, const GradMap& grads, Direction direction, const AdamConfig& cfg);

}  // namespace srcnet::autograd
