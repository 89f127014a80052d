#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "srcnet/autograd.hpp"
#include "srcnet/rng.hpp"
#include "srcnet/tensor.hpp"

namespace srcnet::nets {

/// Skip-connected encoder/decoder that maps an input image to a per-pixel
/// oil-probability map. Encoder: `depth` stride-2 conv blocks with channels
/// doubling from base_channels, capped at 8*base. Decoder mirrors it with
/// stride-2 transposed convs; each decoder stage past the first consumes the
/// concatenation of the previous decoder output and the mirrored encoder
/// activation. A 1x1 sigmoid head produces the map.
struct GeneratorConfig {
    int input_channels = 2;  // 1 = intensity only, 2 = intensity + local cross-section estimate
    int base_channels = 16;
    int depth = 4;
    int image_size = 64;  // power of two, >= 2^depth

    void validate() const;
    /// Encoder output channels at level i (1-based).
    int enc_channels(int level) const;
    /// Decoder output channels at stage j (1-based).
    int dec_channels(int stage) const;
};

/// Stride-2 conv + leaky-relu stack ending in a global mean and a sigmoid,
/// one probability per sample.
struct DiscriminatorConfig {
    int input_channels = 1;  // 1 = mask only, 2 = mask + conditioning image
    int base_channels = 16;
    int depth = 3;

    void validate() const;
    int block_channels(int level) const;
};

using autograd::ModelParams;
using autograd::Tape;
using autograd::Var;

/// Fresh generator parameters; weights N(0, 0.02), norm gains 1, biases 0.
ModelParams init_generator(const GeneratorConfig& config, RngStream& rng);
ModelParams init_discriminator(const DiscriminatorConfig& config, RngStream& rng);

/// Per-tape view of a parameter set. Binding registers every entry as a
/// named leaf exactly once; trainable == false freezes the whole net so no
/// gradient accumulates into it.
struct Binding {
    std::map<std::string, Var> vars;
    Var at(const std::string& name) const;
};

Binding bind_params(Tape& tape, const ModelParams& params, bool trainable);

/// Forward passes. Outputs live on the tape and are differentiable end to end.
Var generator_forward(Tape& tape, const GeneratorConfig& config, const Binding& params, Var input);
Var discriminator_forward(Tape& tape, const DiscriminatorConfig& config, const Binding& params, Var mask,
                          const Var* conditioning = nullptr);

struct Generator {
    GeneratorConfig config;
    ModelParams params;
};

struct Discriminator {
    DiscriminatorConfig config;
    ModelParams params;
};

Generator make_generator(const GeneratorConfig& config, std::uint64_t seed);
Discriminator make_discriminator(const DiscriminatorConfig& config, std::uint64_t seed);

/// Convenience inference on a throwaway tape.
Tensor generator_predict(const Generator& gen, const Tensor& input);
Tensor discriminator_predict(const Discriminator& disc, const Tensor& mask, const Tensor* conditioning = nullptr);

}  // namespace srcnet::nets
