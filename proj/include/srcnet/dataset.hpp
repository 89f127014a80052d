#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "srcnet/sar.hpp"
#include "srcnet/tensor.hpp"

namespace srcnet::io {

/// One manifest line; scene_id is "<split>/scene_NNNNN".
struct ManifestRow {
    std::string scene_id;
    std::uint64_t seed = 0;
    double k_s = 1.0;
    double sea_sigma = 1.0;
    double contrast_ratio = 5.0;
    double spill_fraction = 0.2;
};

struct SceneRecord {
    std::string scene_id;
    Tensor intensity;  // [1,1,H,W]
    Tensor mask;       // [1,1,H,W], {0,1}
    ManifestRow meta;
};

struct Dataset {
    std::filesystem::path root;
    std::string split;
    std::vector<SceneRecord> scenes;

    int image_size() const;
};

struct SynthConfig {
    int train_scenes = 200;
    int test_scenes = 50;
    sar::SceneConfig scene;  // template; per-scene seed derived from master_seed
    std::uint64_t master_seed = 0;
};

/// Writes root/{train,test}/{images,masks}/scene_NNNNN.{pfm,pgm} and a single
/// manifest.csv at the root. The manifest is written last and acts as the
/// completion marker; scene indices run over train first, then test.
void synthesize_dataset(const std::filesystem::path& root, const SynthConfig& config);

/// Loads one split; requires a complete dataset (manifest present).
Dataset load_split(const std::filesystem::path& root, const std::string& split);

std::vector<ManifestRow> read_manifest(const std::filesystem::path& root);

}  // namespace srcnet::io
