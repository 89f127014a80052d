#pragma once

#include <filesystem>

#include "srcnet/nets.hpp"

namespace srcnet::io {

/// Training snapshot: both nets with optimizer state, plus the number of
/// completed epochs.
struct Checkpoint {
    nets::Generator gen;
    nets::Discriminator disc;
    int epoch = 0;
};

/// Binary container: magic "SRCN", format version u32, then repeated blocks
/// [name length u32, name bytes, rank u32, dims u32 x rank, f32 data], all
/// little-endian. Net parameters live under "gen/" and "disc/", optimizer
/// moments under "opt/", architecture and counters under "cfg/". Block order
/// is fixed, so save -> load -> save reproduces the file byte for byte.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace srcnet::io
