#include "srcnet/nets.hpp"

#include <algorithm>
#include <cmath>

#include "srcnet/errors.hpp"

namespace srcnet::nets {

namespace ag = srcnet::autograd;

static constexpr float kNormEps = 1e-5f;
static constexpr float kLeakySlope = 0.2f;
static constexpr float kWeightStd = 0.02f;

void GeneratorConfig::validate() const {
    if (input_channels != 1 && input_channels != 2)
        throw ContractError("GeneratorConfig: input_channels must be 1 or 2");
    if (base_channels < 1) throw ContractError("GeneratorConfig: base_channels must be positive");
    if (depth < 1) throw ContractError("GeneratorConfig: depth must be positive");
    if (image_size < 1 || (image_size & (image_size - 1)) != 0)
        throw ContractError("GeneratorConfig: image_size must be a power of two");
    if (image_size < (1 << depth))
        throw ContractError("GeneratorConfig: image_size " + std::to_string(image_size) +
                            " is smaller than 2^depth = " + std::to_string(1 << depth));
}

int GeneratorConfig::enc_channels(int level) const {
    return std::min(base_channels << (level - 1), 8 * base_channels);
}

int GeneratorConfig::dec_channels(int stage) const {
    return stage < depth ? enc_channels(depth - stage) : base_channels;
}

void DiscriminatorConfig::validate() const {
    if (input_channels != 1 && input_channels != 2)
        throw ContractError("DiscriminatorConfig: input_channels must be 1 or 2");
    if (base_channels < 1) throw ContractError("DiscriminatorConfig: base_channels must be positive");
    if (depth < 1) throw ContractError("DiscriminatorConfig: depth must be >= 1");
}

int DiscriminatorConfig::block_channels(int level) const {
    return std::min(base_channels << (level - 1), 8 * base_channels);
}

namespace {

Tensor gaussian_weights(std::vector<int> dims, RngStream& rng) {
    Tensor t = Tensor::zeros(std::move(dims));
    for (auto& v : t.data) v = kWeightStd * static_cast<float>(rng.gaussian());
    return t;
}

}  // namespace

ModelParams init_generator(const GeneratorConfig& config, RngStream& rng) {
    config.validate();
    ModelParams p;
    int in_ch = config.input_channels;
    for (int i = 1; i <= config.depth; ++i) {
        const int out_ch = config.enc_channels(i);
        const std::string block = "enc" + std::to_string(i);
        p.add(block + "/conv/weight", gaussian_weights({out_ch, in_ch, 4, 4}, rng));
        p.add(block + "/norm/gain", Tensor::full({out_ch}, 1.0f));
        p.add(block + "/norm/bias", Tensor::zeros({out_ch}));
        in_ch = out_ch;
    }
    for (int j = 1; j <= config.depth; ++j) {
        const int skip_ch = j >= 2 ? config.enc_channels(config.depth - j + 1) : 0;
        const int tin_ch = (j == 1 ? config.enc_channels(config.depth) : config.dec_channels(j - 1)) + skip_ch;
        const int out_ch = config.dec_channels(j);
        const std::string block = "dec" + std::to_string(j);
        p.add(block + "/conv/weight", gaussian_weights({tin_ch, out_ch, 4, 4}, rng));
        p.add(block + "/norm/gain", Tensor::full({out_ch}, 1.0f));
        p.add(block + "/norm/bias", Tensor::zeros({out_ch}));
    }
    p.add("head/conv/weight", gaussian_weights({1, config.dec_channels(config.depth), 1, 1}, rng));
    p.add("head/conv/bias", Tensor::zeros({1}));
    return p;
}

ModelParams init_discriminator(const DiscriminatorConfig& config, RngStream& rng) {
    config.validate();
    ModelParams p;
    int in_ch = config.input_channels;
    for (int i = 1; i <= config.depth; ++i) {
        const int out_ch = config.block_channels(i);
        const std::string block = "block" + std::to_string(i);
        p.add(block + "/conv/weight", gaussian_weights({out_ch, in_ch, 4, 4}, rng));
        p.add(block + "/conv/bias", Tensor::zeros({out_ch}));
        in_ch = out_ch;
    }
    return p;
}

Var Binding::at(const std::string& name) const {
    const auto it = vars.find(name);
    if (it == vars.end()) throw ContractError("binding has no parameter named " + name);
    return it->second;
}

Binding bind_params(Tape& tape, const ModelParams& params, bool trainable) {
    Binding b;
    for (const auto& e : params.entries) b.vars.emplace(e.name, tape.leaf(e.name, e.value, trainable));
    return b;
}

Var generator_forward(Tape& tape, const GeneratorConfig& config, const Binding& params, Var input) {
    if (input.tape != &tape) throw ContractError("generator_forward: input recorded on a different tape");
    const Tensor& iv = input.value();
    if (iv.rank() != 4 || iv.dim(1) != config.input_channels)
        throw ShapeError("generator_forward: input " + iv.dims_str() + " does not match config channels " +
                         std::to_string(config.input_channels));
    if (iv.dim(2) != config.image_size || iv.dim(3) != config.image_size)
        throw ShapeError("generator_forward: input " + iv.dims_str() + " is not " +
                         std::to_string(config.image_size) + "x" + std::to_string(config.image_size));

    std::vector<Var> skips;
    Var h = input;
    for (int i = 1; i <= config.depth; ++i) {
        const std::string block = "enc" + std::to_string(i);
        h = ag::conv2d(h, params.at(block + "/conv/weight"), 2, 1);
        h = ag::instance_norm(h, params.at(block + "/norm/gain"), params.at(block + "/norm/bias"), kNormEps);
        h = ag::relu(h);
        skips.push_back(h);
    }

    Var d = skips.back();
    for (int j = 1; j <= config.depth; ++j) {
        if (j >= 2) d = ag::concat_channels(d, skips[static_cast<std::size_t>(config.depth - j)]);
        const std::string block = "dec" + std::to_string(j);
        d = ag::conv2d_transpose(d, params.at(block + "/conv/weight"), 2, 1);
        d = ag::instance_norm(d, params.at(block + "/norm/gain"), params.at(block + "/norm/bias"), kNormEps);
        d = ag::relu(d);
    }

    Var logits = ag::conv2d(d, params.at("head/conv/weight"), 1, 0);
    logits = ag::add_channel_bias(logits, params.at("head/conv/bias"));
    return ag::sigmoid(logits);
}

Var discriminator_forward(Tape& tape, const DiscriminatorConfig& config, const Binding& params, Var mask,
                          const Var* conditioning) {
    if (mask.tape != &tape) throw ContractError("discriminator_forward: mask recorded on a different tape");
    const Tensor& mv = mask.value();
    if (mv.rank() != 4 || mv.dim(1) != 1)
        throw ShapeError("discriminator_forward: mask must be [N,1,H,W], got " + mv.dims_str());
    if ((conditioning != nullptr) != (config.input_channels == 2))
        throw ContractError("discriminator_forward: conditioning image required iff input_channels == 2");

    Var h = mask;
    if (conditioning) {
        const Tensor& cv = conditioning->value();
        if (cv.rank() != 4 || cv.dim(1) != 1)
            throw ShapeError("discriminator_forward: conditioning must be [N,1,H,W], got " + cv.dims_str());
        h = ag::concat_channels(mask, *conditioning);
    }
    for (int i = 1; i <= config.depth; ++i) {
        const std::string block = "block" + std::to_string(i);
        h = ag::conv2d(h, params.at(block + "/conv/weight"), 2, 1);
        h = ag::add_channel_bias(h, params.at(block + "/conv/bias"));
        h = ag::leaky_relu(h, kLeakySlope);
    }
    return ag::sigmoid(ag::mean_per_sample(h));
}

Generator make_generator(const GeneratorConfig& config, std::uint64_t seed) {
    RngStream rng(derive_seed(seed, kStreamGenInit));
    return Generator{config, init_generator(config, rng)};
}

Discriminator make_discriminator(const DiscriminatorConfig& config, std::uint64_t seed) {
    RngStream rng(derive_seed(seed, kStreamDiscInit));
    return Discriminator{config, init_discriminator(config, rng)};
}

Tensor generator_predict(const Generator& gen, const Tensor& input) {
    Tape tape;
    Binding b = bind_params(tape, gen.params, false);
    return generator_forward(tape, gen.config, b, tape.constant(input)).value();
}

Tensor discriminator_predict(const Discriminator& disc, const Tensor& mask, const Tensor* conditioning) {
    Tape tape;
    Binding b = bind_params(tape, disc.params, false);
    if (conditioning) {
        Var cond = tape.constant(*conditioning);
        return discriminator_forward(tape, disc.config, b, tape.constant(mask), &cond).value();
    }
    return discriminator_forward(tape, disc.config, b, tape.constant(mask), nullptr).value();
}

}  // namespace srcnet::nets
