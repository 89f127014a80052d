#include "srcnet/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "srcnet/errors.hpp"

namespace srcnet::metrics {

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
}

static void require_binary(const Tensor& t, const char* which) {
    for (float v : t.data)
        if (v != 0.0f && v != 1.0f)
            throw ContractError(std::string("confusion: ") + which + " mask is not strictly binary");
}

ConfusionCounts confusion(const Tensor& pred, const Tensor& truth) {
    if (!pred.same_dims(truth))
        throw ShapeError("confusion: dims mismatch " + pred.dims_str() + " vs " + truth.dims_str());
    require_binary(pred, "predicted");
    require_binary(truth, "truth");
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const bool p = pred.data[i] == 1.0f;
        const bool t = truth.data[i] == 1.0f;
        if (p && t)
            ++c.tp;
        else if (p && !t)
            ++c.fp;
        else if (!p && t)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

double accuracy(const ConfusionCounts& counts) {
    const auto total = counts.total();
    if (total <= 0) throw ContractError("accuracy: zero pixel count");
    return static_cast<double>(counts.tp + counts.tn) / static_cast<double>(total);
}

double jaccard(const ConfusionCounts& counts) {
    const auto denom = counts.tp + counts.fp + counts.fn;
    if (denom == 0) return 1.0;  // no oil predicted, no oil present
    return static_cast<double>(counts.tp) / static_cast<double>(denom);
}

// Linear interpolation at rank p*(n-1) over sorted values.
static double quantile_sorted(const std::vector<double>& sorted, double p) {
    const std::size_t n = sorted.size();
    if (n == 1) return sorted[0];
    const double pos = p * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

BoxStats box_stats(const std::vector<double>& values) {
    if (values.empty()) throw ContractError("box_stats: empty input");
    std::vector<double> sorted(values);
    std::sort(sorted.begin(), sorted.end());

    BoxStats s;
    s.q1 = quantile_sorted(sorted, 0.25);
    s.median = quantile_sorted(sorted, 0.5);
    s.q3 = quantile_sorted(sorted, 0.75);
    const double iqr = s.q3 - s.q1;
    const double lo = s.q1 - 1.5 * iqr;
    const double hi = s.q3 + 1.5 * iqr;

    // The median always sits inside the fences, so at least one value survives.
    for (double v : sorted)
        if (v < lo || v > hi) s.outliers.push_back(v);
    std::size_t a = 0, b = sorted.size() - 1;
    while (sorted[a] < lo) ++a;
    while (sorted[b] > hi) --b;
    // Whiskers never retreat past the box: with interpolated quartiles a tiny
    // sample can place q1 below the smallest surviving value.
    s.min = std::min(sorted[a], s.q1);
    s.max = std::max(sorted[b], s.q3);
    return s;
}

void write_scene_metrics_csv(const std::filesystem::path& path, const std::vector<SceneMetrics>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "scene_id,accuracy,jci,tp,fp,fn,tn\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.6f,%.6f", r.accuracy, r.jci);
        out << r.scene_id << ',' << buf << ',' << r.counts.tp << ',' << r.counts.fp << ',' << r.counts.fn << ','
            << r.counts.tn << '\n';
    }
}

void write_box_summary_csv(const std::filesystem::path& path,
                           const std::vector<std::pair<std::string, BoxStats>>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "method_label,min,q1,median,q3,max,n_outliers\n";
    char buf[192];
    for (const auto& [label, s] : rows) {
        std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f,%.6f,%zu", s.min, s.q1, s.median, s.q3, s.max,
                      s.outliers.size());
        out << label << ',' << buf << '\n';
    }
}

}  // namespace srcnet::metrics
