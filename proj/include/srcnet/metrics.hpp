#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "srcnet/tensor.hpp"

namespace srcnet::metrics {

/// Pixel-level 2x2 table with oil as the positive class.
struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t tn = 0;

    std::int64_t total() const { return tp + fp + fn + tn; }
    ConfusionCounts& operator+=(const ConfusionCounts& o);
};

/// Counts over two strictly binary masks of identical dims.
ConfusionCounts confusion(const Tensor& pred, const Tensor& truth);

/// (tp + tn) / total.
double accuracy(const ConfusionCounts& counts);

/// tp / (tp + fp + fn); defined as 1 when both masks are empty of oil.
double jaccard(const ConfusionCounts& counts);

/// Five-number summary with Tukey outliers. Quartiles use linear
/// interpolation on sorted data (inclusive method); outliers fall outside
/// [q1 - 1.5 IQR, q3 + 1.5 IQR]; min/max are taken over non-outliers.
struct BoxStats {
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
    std::vector<double> outliers;
};

BoxStats box_stats(const std::vector<double>& values);

/// Per-scene evaluation row as written to the metrics CSV.
struct SceneMetrics {
    std::string scene_id;
    double accuracy = 0.0;
    double jci = 0.0;
    ConfusionCounts counts;
};

void write_scene_metrics_csv(const std::filesystem::path& path, const std::vector<SceneMetrics>& rows);

void write_box_summary_csv(const std::filesystem::path& path,
                           const std::vector<std::pair<std::string, BoxStats>>& rows);

}  // namespace srcnet::metrics
