#include "srcnet/dataset.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "srcnet/errors.hpp"
#include "srcnet/imageio.hpp"

namespace srcnet::io {

namespace fs = std::filesystem;

int Dataset::image_size() const {
    if (scenes.empty()) throw ContractError("dataset split '" + split + "' is empty");
    return scenes.front().intensity.dim(2);
}

static std::string scene_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "scene_%05d", index);
    return buf;
}

void synthesize_dataset(const fs::path& root, const SynthConfig& config) {
    if (config.train_scenes < 0 || config.test_scenes < 0)
        throw ContractError("synthesize_dataset: scene counts must be nonnegative");
    config.scene.validate();

    for (const char* split : {"train", "test"}) {
        fs::create_directories(root / split / "images");
        fs::create_directories(root / split / "masks");
    }

    std::vector<ManifestRow> rows;
    int index = 0;
    auto emit = [&](const std::string& split, int count) {
        for (int i = 0; i < count; ++i, ++index) {
            sar::SceneConfig sc = config.scene;
            sc.seed = derive_seed(config.master_seed, static_cast<std::uint64_t>(index));
            const sar::SyntheticScene scene = sar::synthesize_scene(sc);
            const std::string name = scene_name(index);
            write_pfm(root / split / "images" / (name + ".pfm"), scene.intensity);
            write_pgm_mask(root / split / "masks" / (name + ".pgm"), scene.mask);
            rows.push_back({split + "/" + name, sc.seed, sc.k_s, sc.sea_sigma, sc.contrast_ratio,
                            sc.spill_fraction});
        }
    };
    emit("train", config.train_scenes);
    emit("test", config.test_scenes);

    // Manifest last: its presence marks the dataset as complete.
    std::ofstream out(root / "manifest.csv");
    if (!out) throw IoError("cannot open manifest for writing under " + root.string());
    out << "scene_id,seed,k_s,sea_sigma,contrast_ratio,spill_fraction\n";
    char buf[192];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%" PRIu64 ",%.9g,%.9g,%.9g,%.9g", r.scene_id.c_str(), r.seed, r.k_s,
                      r.sea_sigma, r.contrast_ratio, r.spill_fraction);
        out << buf << '\n';
    }
}

std::vector<ManifestRow> read_manifest(const fs::path& root) {
    const fs::path path = root / "manifest.csv";
    std::ifstream in(path);
    if (!in)
        throw IoError("dataset at " + root.string() +
                      " is incomplete: manifest.csv missing (synthesis interrupted or wrong directory)");
    std::string line;
    if (!std::getline(in, line) || line != "scene_id,seed,k_s,sea_sigma,contrast_ratio,spill_fraction")
        throw IoError(path.string() + ": unexpected manifest header");
    std::vector<ManifestRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        ManifestRow r;
        std::string field;
        std::getline(ss, r.scene_id, ',');
        std::getline(ss, field, ',');
        r.seed = std::stoull(field);
        std::getline(ss, field, ',');
        r.k_s = std::stod(field);
        std::getline(ss, field, ',');
        r.sea_sigma = std::stod(field);
        std::getline(ss, field, ',');
        r.contrast_ratio = std::stod(field);
        if (!std::getline(ss, field)) throw IoError(path.string() + ": short manifest row '" + line + "'");
        r.spill_fraction = std::stod(field);
        rows.push_back(std::move(r));
    }
    return rows;
}

Dataset load_split(const fs::path& root, const std::string& split) {
    Dataset ds;
    ds.root = root;
    ds.split = split;
    for (const auto& row : read_manifest(root)) {
        if (row.scene_id.rfind(split + "/", 0) != 0) continue;
        const std::string name = row.scene_id.substr(split.size() + 1);
        SceneRecord rec;
        rec.scene_id = row.scene_id;
        rec.meta = row;
        rec.intensity = read_pfm(root / split / "images" / (name + ".pfm"));
        rec.mask = read_pgm_mask(root / split / "masks" / (name + ".pgm"));
        if (!rec.intensity.same_dims(rec.mask))
            throw IoError(row.scene_id + ": image dims " + rec.intensity.dims_str() + " do not match mask " +
                          rec.mask.dims_str());
        ds.scenes.push_back(std::move(rec));
    }
    return ds;
}

}  // namespace srcnet::io
