#include "srcnet/imageio.hpp"

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "srcnet/errors.hpp"

namespace srcnet::io {

static void check_image_dims(const Tensor& t, const char* what) {
    if (t.rank() != 4 || t.dim(0) != 1 || t.dim(1) != 1)
        throw ShapeError(std::string(what) + " expects [1,1,H,W], got " + t.dims_str());
}

void write_pfm(const std::filesystem::path& path, const Tensor& image) {
    check_image_dims(image, "write_pfm");
    const int h = image.dim(2), w = image.dim(3);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "Pf\n" << w << " " << h << "\n-1.0\n";
    // PFM stores the bottom row first.
    for (int y = h - 1; y >= 0; --y)
        out.write(reinterpret_cast<const char*>(image.data.data() + static_cast<std::size_t>(y) * w),
                  static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(w)));
    if (!out) throw IoError("short write to " + path.string());
}

Tensor read_pfm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "Pf") throw IoError(path.string() + ": not a grayscale PFM (magic '" + magic + "')");
    int w = 0, h = 0;
    double scale = 0.0;
    in >> w >> h >> scale;
    if (!in || w <= 0 || h <= 0) throw IoError(path.string() + ": bad PFM header");
    if (scale >= 0.0) throw IoError(path.string() + ": big-endian PFM is not supported");
    in.get();  // single whitespace after the scale
    Tensor img = Tensor::zeros({1, 1, h, w});
    for (int y = h - 1; y >= 0; --y)
        in.read(reinterpret_cast<char*>(img.data.data() + static_cast<std::size_t>(y) * w),
                static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(w)));
    if (!in) throw IoError(path.string() + ": truncated PFM payload");
    return img;
}

void write_pgm_mask(const std::filesystem::path& path, const Tensor& mask) {
    check_image_dims(mask, "write_pgm_mask");
    const int h = mask.dim(2), w = mask.dim(3);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "P5\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(w));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const float v = mask.data[static_cast<std::size_t>(y) * w + x];
            if (v != 0.0f && v != 1.0f) throw ContractError("write_pgm_mask: mask is not strictly binary");
            row[static_cast<std::size_t>(x)] = v == 1.0f ? 255 : 0;
        }
        out.write(reinterpret_cast<const char*>(row.data()), w);
    }
    if (!out) throw IoError("short write to " + path.string());
}

Tensor read_pgm_mask(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P5") throw IoError(path.string() + ": not a binary PGM (magic '" + magic + "')");
    int w = 0, h = 0, maxval = 0;
    in >> w >> h >> maxval;
    if (!in || w <= 0 || h <= 0 || maxval != 255) throw IoError(path.string() + ": bad PGM header");
    in.get();
    std::vector<unsigned char> buf(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!in) throw IoError(path.string() + ": truncated PGM payload");
    Tensor mask = Tensor::zeros({1, 1, h, w});
    for (std::size_t i = 0; i < buf.size(); ++i) mask.data[i] = buf[i] >= 128 ? 1.0f : 0.0f;
    return mask;
}

}  // namespace srcnet::io
