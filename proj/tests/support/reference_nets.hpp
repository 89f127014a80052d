#pragma once

// Double-precision mirrors of the two network forward passes, composed from
// the reference ops. Used for end-to-end finite-difference checks and as an
// independent statement of the documented architectures.

#include <map>
#include <string>

#include "srcnet/nets.hpp"
#include "support/reference_ops.hpp"

namespace ref {

using ParamMap = std::map<std::string, RTensor>;

inline ParamMap param_map(const srcnet::autograd::ModelParams& p) {
    ParamMap m;
    for (const auto& e : p.entries) m.emplace(e.name, from_float(e.value));
    return m;
}

inline RTensor generator_forward(const srcnet::nets::GeneratorConfig& cfg, const ParamMap& params,
                                 const RTensor& input, int zero_skip_level = 0) {
    std::vector<RTensor> skips;
    RTensor h = input;
    for (int i = 1; i <= cfg.depth; ++i) {
        const std::string block = "enc" + std::to_string(i);
        h = conv2d(h, params.at(block + "/conv/weight"), 2, 1);
        h = instance_norm(h, params.at(block + "/norm/gain"), params.at(block + "/norm/bias"), 1e-5);
        h = relu(h);
        skips.push_back(h);
    }
    RTensor d = skips.back();
    for (int j = 1; j <= cfg.depth; ++j) {
        if (j >= 2) {
            RTensor skip = skips[static_cast<std::size_t>(cfg.depth - j)];
            if (zero_skip_level == cfg.depth - j + 1)
                for (auto& v : skip.data) v = 0.0;
            d = concat_channels(d, skip);
        }
        const std::string block = "dec" + std::to_string(j);
        d = conv2d_transpose(d, params.at(block + "/conv/weight"), 2, 1);
        d = instance_norm(d, params.at(block + "/norm/gain"), params.at(block + "/norm/bias"), 1e-5);
        d = relu(d);
    }
    RTensor logits = conv2d(d, params.at("head/conv/weight"), 1, 0);
    logits = add_channel_bias(logits, params.at("head/conv/bias"));
    return sigmoid(logits);
}

inline RTensor discriminator_forward(const srcnet::nets::DiscriminatorConfig& cfg, const ParamMap& params,
                                     const RTensor& mask, const RTensor* conditioning = nullptr) {
    RTensor h = conditioning ? concat_channels(mask, *conditioning) : mask;
    for (int i = 1; i <= cfg.depth; ++i) {
        const std::string block = "block" + std::to_string(i);
        h = conv2d(h, params.at(block + "/conv/weight"), 2, 1);
        h = add_channel_bias(h, params.at(block + "/conv/bias"));
        h = leaky_relu(h, 0.2);
    }
    return sigmoid(mean_per_sample(h));
}

}  // namespace ref
