#pragma once

#include <cstdint>
#include <vector>

#include "srcnet/rng.hpp"
#include "srcnet/tensor.hpp"

namespace srcnet::sar {

/// Single-look SAR intensity model: I >= 0 is exponentially distributed with
/// mean k_s * sigma, where k_s is the detection-system constant and sigma the
/// normalized radar cross section. Oil films damp the cross section, so
/// slicks appear as dark patches.
struct SeminalDistribution {
    double k_s = 1.0;
    double sigma = 1.0;

    SeminalDistribution(double k_s_, double sigma_);

    double mean() const { return k_s * sigma; }
};

/// Density at a nonnegative intensity: (1/(k_s sigma)) exp(-I/(k_s sigma)).
double pdf(const SeminalDistribution& dist, double intensity);

/// ln pdf, computed as -ln(k_s sigma) - I/(k_s sigma).
double log_pdf(const SeminalDistribution& dist, double intensity);

/// Inverse-CDF draw: I = -k_s sigma ln(1 - u).
double sample(const SeminalDistribution& dist, RngStream& rng);

/// Per-pixel draws for a cross-section field: element i is a draw from
/// SeminalDistribution(k_s, sigma_field[i]), consumed row-major from the
/// stream.
Tensor sample_field(double k_s, const Tensor& sigma_field, RngStream& rng);

/// Maximum-likelihood fit with known k_s: sigma = mean(samples) / k_s.
SeminalDistribution fit_mle(const std::vector<double>& samples, double k_s);

/// Per-pixel cross-section estimate: local window mean of the intensity
/// divided by k_s. Windows are clamped at the image border. Window must be odd.
Tensor estimate_sigma_map(const Tensor& intensity, int window, double k_s);

struct SceneConfig {
    int height = 64;
    int width = 64;
    double sea_sigma = 1.0;
    double contrast_ratio = 5.0;   // sea sigma / oil sigma, > 1 so spills are dark
    double spill_fraction = 0.2;   // strictly inside (0,1)
    int blur_radius = 4;
    double k_s = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// One synthetic observation: speckled intensity, binary oil mask (1 = oil)
/// and the cross-section field that produced the intensity.
struct SyntheticScene {
    Tensor intensity;   // [1,1,H,W], >= 0
    Tensor mask;        // [1,1,H,W], exactly {0,1}
    Tensor sigma_field; // [1,1,H,W], > 0
    std::uint64_t seed = 0;
};

/// Builds a scene: blurred Gaussian noise is thresholded at the
/// (1 - spill_fraction) quantile to form irregular spill blobs, the sigma
/// field takes sea_sigma outside and sea_sigma/contrast_ratio inside, and the
/// intensity is drawn pixelwise from the seminal distribution over that field.
/// Identical configs produce bitwise-identical scenes.
SyntheticScene synthesize_scene(const SceneConfig& config);

}  // namespace srcnet::sar
