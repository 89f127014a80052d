#include "srcnet/checkpoint.hpp"

#include <cstdint>
#include <fstream>
#include <map>

#include "srcnet/errors.hpp"

namespace srcnet::io {

namespace {

constexpr char kMagic[4] = {'S', 'R', 'C', 'N'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw IoError(path + ": truncated checkpoint");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_block(std::ofstream& out, const std::string& name, const Tensor& t) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
    for (int d : t.dims) put_u32(out, static_cast<std::uint32_t>(d));
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(sizeof(float) * t.data.size()));
}

void put_scalar(std::ofstream& out, const std::string& name, float v) { put_block(out, name, Tensor::scalar(v)); }

void put_params(std::ofstream& out, const std::string& prefix, const autograd::ModelParams& p) {
    for (const auto& e : p.entries) put_block(out, prefix + "/" + e.name, e.value);
    for (const auto& e : p.entries) {
        put_block(out, "opt/" + prefix + "/" + e.name + "/m1", e.m1);
        put_block(out, "opt/" + prefix + "/" + e.name + "/m2", e.m2);
    }
    put_scalar(out, "cfg/" + prefix + "/step", static_cast<float>(p.step));
}

struct BlockMap {
    std::map<std::string, Tensor> blocks;
    std::string path;

    const Tensor& at(const std::string& name) const {
        const auto it = blocks.find(name);
        if (it == blocks.end()) throw IoError(path + ": checkpoint is missing block '" + name + "'");
        return it->second;
    }
    int scalar_int(const std::string& name) const { return static_cast<int>(at(name).item()); }
};

void fill_params(const BlockMap& bm, const std::string& prefix, autograd::ModelParams& p) {
    for (auto& e : p.entries) {
        const Tensor& v = bm.at(prefix + "/" + e.name);
        if (!v.same_dims(e.value))
            throw IoError(bm.path + ": parameter " + prefix + "/" + e.name + " has dims " + v.dims_str() +
                          ", architecture expects " + e.value.dims_str());
        e.value = v;
        e.m1 = bm.at("opt/" + prefix + "/" + e.name + "/m1");
        e.m2 = bm.at("opt/" + prefix + "/" + e.name + "/m2");
        if (!e.m1.same_dims(e.value) || !e.m2.same_dims(e.value))
            throw IoError(bm.path + ": optimizer state dims mismatch for " + prefix + "/" + e.name);
    }
    p.step = bm.scalar_int("cfg/" + prefix + "/step");
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(kMagic, 4);
    put_u32(out, kVersion);

    put_scalar(out, "cfg/epoch", static_cast<float>(ckpt.epoch));
    put_scalar(out, "cfg/gen/input_channels", static_cast<float>(ckpt.gen.config.input_channels));
    put_scalar(out, "cfg/gen/base_channels", static_cast<float>(ckpt.gen.config.base_channels));
    put_scalar(out, "cfg/gen/depth", static_cast<float>(ckpt.gen.config.depth));
    put_scalar(out, "cfg/gen/image_size", static_cast<float>(ckpt.gen.config.image_size));
    put_scalar(out, "cfg/disc/input_channels", static_cast<float>(ckpt.disc.config.input_channels));
    put_scalar(out, "cfg/disc/base_channels", static_cast<float>(ckpt.disc.config.base_channels));
    put_scalar(out, "cfg/disc/depth", static_cast<float>(ckpt.disc.config.depth));

    put_params(out, "gen", ckpt.gen.params);
    put_params(out, "disc", ckpt.disc.params);
    if (!out) throw IoError("short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != std::string(kMagic, 4))
        throw IoError(path.string() + ": not a checkpoint (bad magic)");
    const std::uint32_t version = get_u32(in, path.string());
    if (version != kVersion)
        throw IoError(path.string() + ": unsupported checkpoint version " + std::to_string(version));

    BlockMap bm;
    bm.path = path.string();
    while (true) {
        unsigned char first;
        if (!in.read(reinterpret_cast<char*>(&first), 1)) break;
        in.putback(static_cast<char>(first));
        const std::uint32_t name_len = get_u32(in, bm.path);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const std::uint32_t rank = get_u32(in, bm.path);
        std::vector<int> dims(rank);
        for (auto& d : dims) d = static_cast<int>(get_u32(in, bm.path));
        Tensor t = Tensor::zeros(dims);
        in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(sizeof(float) * t.data.size()));
        if (!in) throw IoError(bm.path + ": truncated block '" + name + "'");
        bm.blocks.emplace(std::move(name), std::move(t));
    }

    Checkpoint ckpt;
    ckpt.epoch = bm.scalar_int("cfg/epoch");
    ckpt.gen.config.input_channels = bm.scalar_int("cfg/gen/input_channels");
    ckpt.gen.config.base_channels = bm.scalar_int("cfg/gen/base_channels");
    ckpt.gen.config.depth = bm.scalar_int("cfg/gen/depth");
    ckpt.gen.config.image_size = bm.scalar_int("cfg/gen/image_size");
    ckpt.disc.config.input_channels = bm.scalar_int("cfg/disc/input_channels");
    ckpt.disc.config.base_channels = bm.scalar_int("cfg/disc/base_channels");
    ckpt.disc.config.depth = bm.scalar_int("cfg/disc/depth");

    // Rebuild canonical entry order from the recorded architecture, then fill
    // values from the file; any structural drift surfaces as a named mismatch.
    RngStream dummy(0);
    ckpt.gen.params = nets::init_generator(ckpt.gen.config, dummy);
    ckpt.disc.params = nets::init_discriminator(ckpt.disc.config, dummy);
    fill_params(bm, "gen", ckpt.gen.params);
    fill_params(bm, "disc", ckpt.disc.params);
    return ckpt;
}

}  // namespace srcnet::io
