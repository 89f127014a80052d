#include "srcnet/sar.hpp"

#include <algorithm>
#include <cmath>

#include "srcnet/errors.hpp"

namespace srcnet::sar {

SeminalDistribution::SeminalDistribution(double k_s_, double sigma_) : k_s(k_s_), sigma(sigma_) {
    if (!(k_s > 0.0)) throw ContractError("SeminalDistribution: k_s must be positive");
    if (!(sigma > 0.0)) throw ContractError("SeminalDistribution: sigma must be positive");
}

double pdf(const SeminalDistribution& dist, double intensity) {
    if (intensity < 0.0) throw DomainError("pdf: intensity must be nonnegative");
    const double rate = dist.k_s * dist.sigma;
    return (1.0 / rate) * std::exp(-intensity / rate);
}

double log_pdf(const SeminalDistribution& dist, double intensity) {
    if (intensity < 0.0) throw DomainError("log_pdf: intensity must be nonnegative");
    const double rate = dist.k_s * dist.sigma;
    return -std::log(rate) - intensity / rate;
}

double sample(const SeminalDistribution& dist, RngStream& rng) {
    return rng.exponential(dist.mean());
}

Tensor sample_field(double k_s, const Tensor& sigma_field, RngStream& rng) {
    if (!(k_s > 0.0)) throw ContractError("sample_field: k_s must be positive");
    Tensor out = Tensor::zeros(sigma_field.dims);
    for (std::size_t i = 0; i < sigma_field.data.size(); ++i) {
        const double sigma = sigma_field.data[i];
        if (!(sigma > 0.0)) throw ContractError("sample_field: sigma field must be positive everywhere");
        out.data[i] = static_cast<float>(rng.exponential(k_s * sigma));
    }
    return out;
}

SeminalDistribution fit_mle(const std::vector<double>& samples, double k_s) {
    if (samples.empty()) throw EstimationError("fit_mle: empty sample");
    double acc = 0.0;
    for (double s : samples) {
        if (s < 0.0) throw EstimationError("fit_mle: negative intensity in sample");
        acc += s;
    }
    if (acc == 0.0) throw EstimationError("fit_mle: all-zero sample has no positive-sigma fit");
    if (!(k_s > 0.0)) throw ContractError("fit_mle: k_s must be positive");
    return SeminalDistribution(k_s, acc / static_cast<double>(samples.size()) / k_s);
}

Tensor estimate_sigma_map(const Tensor& intensity, int window, double k_s) {
    if (intensity.rank() != 4 || intensity.dim(0) != 1 || intensity.dim(1) != 1)
        throw ShapeError("estimate_sigma_map expects [1,1,H,W], got " + intensity.dims_str());
    if (window % 2 == 0 || window < 1) throw ContractError("estimate_sigma_map: window must be odd and positive");
    const int h = intensity.dim(2), w = intensity.dim(3);
    if (window > std::min(h, w)) throw ContractError("estimate_sigma_map: window exceeds image size");
    if (!(k_s > 0.0)) throw ContractError("estimate_sigma_map: k_s must be positive");

    const int r = window / 2;
    Tensor out = Tensor::zeros(intensity.dims);
    for (int y = 0; y < h; ++y) {
        const int y0 = std::max(0, y - r), y1 = std::min(h - 1, y + r);
        for (int x = 0; x < w; ++x) {
            const int x0 = std::max(0, x - r), x1 = std::min(w - 1, x + r);
            double acc = 0.0;
            for (int yy = y0; yy <= y1; ++yy)
                for (int xx = x0; xx <= x1; ++xx) acc += intensity.at4(0, 0, yy, xx);
            const double count = static_cast<double>((y1 - y0 + 1) * (x1 - x0 + 1));
            out.at4(0, 0, y, x) = static_cast<float>(acc / count / k_s);
        }
    }
    return out;
}

void SceneConfig::validate() const {
    if (height <= 0 || width <= 0) throw ContractError("SceneConfig: height/width must be positive");
    if (!(sea_sigma > 0.0)) throw ContractError("SceneConfig: sea_sigma must be positive");
    if (!(contrast_ratio > 1.0)) throw ContractError("SceneConfig: contrast_ratio must exceed 1 (spills are dark)");
    if (!(spill_fraction > 0.0 && spill_fraction < 1.0))
        throw ContractError("SceneConfig: spill_fraction must lie strictly inside (0,1)");
    if (blur_radius < 1) throw ContractError("SceneConfig: blur_radius must be positive");
    if (!(k_s > 0.0)) throw ContractError("SceneConfig: k_s must be positive");
}

namespace {

// Separable Gaussian blur with sigma = blur_radius and support +-2 sigma,
// replicated borders. Operates on a row-major H*W grid of doubles.
void gaussian_blur(std::vector<double>& grid, int h, int w, int radius) {
    const double sigma = static_cast<double>(radius);
    const int support = 2 * radius;
    std::vector<double> weights(static_cast<std::size_t>(support) * 2 + 1);
    double wsum = 0.0;
    for (int i = -support; i <= support; ++i) {
        const double v = std::exp(-static_cast<double>(i) * i / (2.0 * sigma * sigma));
        weights[static_cast<std::size_t>(i + support)] = v;
        wsum += v;
    }
    for (double& v : weights) v /= wsum;

    std::vector<double> tmp(grid.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -support; i <= support; ++i) {
                const int xx = std::clamp(x + i, 0, w - 1);
                acc += weights[static_cast<std::size_t>(i + support)] * grid[static_cast<std::size_t>(y) * w + xx];
            }
            tmp[static_cast<std::size_t>(y) * w + x] = acc;
        }
    for (int x = 0; x < w; ++x)
        for (int y = 0; y < h; ++y) {
            double acc = 0.0;
            for (int i = -support; i <= support; ++i) {
                const int yy = std::clamp(y + i, 0, h - 1);
                acc += weights[static_cast<std::size_t>(i + support)] * tmp[static_cast<std::size_t>(yy) * w + x];
            }
            grid[static_cast<std::size_t>(y) * w + x] = acc;
        }
}

}  // namespace

SyntheticScene synthesize_scene(const SceneConfig& config) {
    config.validate();
    const int h = config.height, w = config.width;
    const std::size_t count = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);

    RngStream rng(config.seed);

    // Irregular blobs: blurred white noise, thresholded at the requested quantile.
    std::vector<double> field(count);
    for (auto& v : field) v = rng.gaussian();
    gaussian_blur(field, h, w, config.blur_radius);

    std::vector<double> sorted(field);
    std::sort(sorted.begin(), sorted.end());
    const auto qidx = static_cast<std::size_t>((1.0 - config.spill_fraction) * static_cast<double>(count));
    const double threshold = sorted[std::min(qidx, count - 1)];

    SyntheticScene scene;
    scene.seed = config.seed;
    scene.mask = Tensor::zeros({1, 1, h, w});
    scene.sigma_field = Tensor::zeros({1, 1, h, w});
    scene.intensity = Tensor::zeros({1, 1, h, w});

    const double oil_sigma = config.sea_sigma / config.contrast_ratio;
    for (std::size_t i = 0; i < count; ++i) {
        const bool oil = field[i] >= threshold;
        scene.mask.data[i] = oil ? 1.0f : 0.0f;
        scene.sigma_field.data[i] = static_cast<float>(oil ? oil_sigma : config.sea_sigma);
    }
    // Intensities continue on the same stream, row-major.
    scene.intensity = sample_field(config.k_s, scene.sigma_field, rng);
    return scene;
}

}  // namespace srcnet::sar
