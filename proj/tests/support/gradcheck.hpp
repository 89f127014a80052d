#pragma once

// Finite-difference gradient harness. The function under test is
// f(inputs) = mean(op(inputs) .* w) for a fixed random weight tensor w.
// The numeric side runs entirely in double through the reference ops
// (central differences, step 1e-3); the analytic side is the float autograd
// backward. Agreement is checked as |a-b| <= tol * max(1, |a|, |b|).

#include <functional>
#include <string>
#include <vector>

#include "srcnet/autograd.hpp"
#include "srcnet/rng.hpp"
#include "srcnet/tensor.hpp"
#include "support/reference_ops.hpp"

namespace gradcheck {

using srcnet::RngStream;
using srcnet::Tensor;
namespace ag = srcnet::autograd;

inline Tensor random_tensor(std::vector<int> dims, RngStream& rng, float lo = -1.0f, float hi = 1.0f) {
    Tensor t = Tensor::zeros(std::move(dims));
    for (auto& v : t.data) v = lo + (hi - lo) * static_cast<float>(rng.uniform());
    return t;
}

/// Random values bounded away from zero (for kink-free activation checks).
inline Tensor random_tensor_away_from(std::vector<int> dims, RngStream& rng, float gap) {
    Tensor t = Tensor::zeros(std::move(dims));
    for (auto& v : t.data) {
        const float mag = gap + 2.0f * static_cast<float>(rng.uniform());
        v = rng.uniform() < 0.5 ? -mag : mag;
    }
    return t;
}

struct OpCase {
    std::string name;
    std::vector<Tensor> inputs;
    // Builds the autograd graph over leaves (same order as inputs).
    std::function<ag::Var(ag::Tape&, const std::vector<ag::Var>&)> build;
    // Double-precision forward over the same inputs.
    std::function<ref::RTensor(const std::vector<ref::RTensor>&)> ref_eval;
};

struct CheckResult {
    bool forward_ok = true;
    bool grad_ok = true;
    double max_forward_err = 0.0;
    double max_grad_err = 0.0;
    std::string detail;
};

inline double mixed_err(double a, double b) {
    const double scale = std::max({1.0, std::abs(a), std::abs(b)});
    return std::abs(a - b) / scale;
}

inline CheckResult run_case(const OpCase& c, RngStream& rng, double fd_step = 1e-3, double grad_tol = 1e-4,
                            double forward_tol = 1e-6) {
    CheckResult result;

    // double copies of the inputs
    std::vector<ref::RTensor> rinputs;
    for (const auto& t : c.inputs) rinputs.push_back(ref::from_float(t));

    // forward comparison
    const ref::RTensor rout = c.ref_eval(rinputs);
    Tensor weights;
    {
        ag::Tape tape;
        std::vector<ag::Var> leaves;
        for (const auto& t : c.inputs) leaves.push_back(tape.leaf(t, true));
        ag::Var out = c.build(tape, leaves);
        const Tensor& ov = out.value();
        if (ov.dims != rout.dims) {
            result.forward_ok = false;
            result.detail = c.name + ": output dims mismatch";
            return result;
        }
        for (std::size_t i = 0; i < ov.data.size(); ++i) {
            const double e = mixed_err(ov.data[i], rout.data[i]);
            result.max_forward_err = std::max(result.max_forward_err, e);
        }
        if (result.max_forward_err > forward_tol) result.forward_ok = false;

        // fixed weights, bounded away from zero so every output element matters
        weights = random_tensor_away_from(ov.dims, rng, 0.5f);
    }

    const ref::RTensor rweights = ref::from_float(weights);
    auto ref_loss = [&](const std::vector<ref::RTensor>& ins) {
        const ref::RTensor out = c.ref_eval(ins);
        double acc = 0.0;
        for (std::size_t i = 0; i < out.data.size(); ++i) acc += out.data[i] * rweights.data[i];
        return acc / static_cast<double>(out.data.size());
    };

    // analytic gradients
    std::vector<Tensor> analytic;
    {
        ag::Tape tape;
        std::vector<ag::Var> leaves;
        for (const auto& t : c.inputs) leaves.push_back(tape.leaf(t, true));
        ag::Var out = c.build(tape, leaves);
        ag::Var loss = ag::mean(ag::mul(out, tape.constant(weights)));
        tape.backward(loss);
        for (const auto& leaf : leaves) analytic.push_back(tape.grad_of(leaf));
    }

    // numeric gradients
    for (std::size_t t = 0; t < rinputs.size(); ++t) {
        for (std::size_t i = 0; i < rinputs[t].data.size(); ++i) {
            const double saved = rinputs[t].data[i];
            rinputs[t].data[i] = saved + fd_step;
            const double up = ref_loss(rinputs);
            rinputs[t].data[i] = saved - fd_step;
            const double down = ref_loss(rinputs);
            rinputs[t].data[i] = saved;
            const double fd = (up - down) / (2.0 * fd_step);
            const double an = static_cast<double>(analytic[t].data[i]);
            const double e = mixed_err(fd, an);
            if (e > result.max_grad_err) {
                result.max_grad_err = e;
                if (e > grad_tol) {
                    result.grad_ok = false;
                    result.detail = c.name + ": input " + std::to_string(t) + " elem " + std::to_string(i) +
                                    " fd=" + std::to_string(fd) + " analytic=" + std::to_string(an);
                }
            }
        }
    }
    return result;
}

}  // namespace gradcheck
