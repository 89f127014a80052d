#pragma once

#include <filesystem>

#include "srcnet/tensor.hpp"

namespace srcnet::io {

/// Grayscale PFM ("Pf"), little-endian (scale header -1.0), rows stored
/// bottom-up per the format convention. Image tensors are [1,1,H,W].
void write_pfm(const std::filesystem::path& path, const Tensor& image);
Tensor read_pfm(const std::filesystem::path& path);

/// Binary 8-bit PGM ("P5", maxval 255). Masks map 1 -> 255 and 0 -> 0 on
/// write; on read, values >= 128 become 1.
void write_pgm_mask(const std::filesystem::path& path, const Tensor& mask);
Tensor read_pgm_mask(const std::filesystem::path& path);

}  // namespace srcnet::io
