#include "srcnet/theory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "srcnet/errors.hpp"

namespace srcnet::theory {

DiscreteDist::DiscreteDist(std::vector<double> p) : probs(std::move(p)) {
    if (probs.empty()) throw ContractError("DiscreteDist: empty support");
    double sum = 0.0;
    for (double v : probs) {
        if (v < 0.0) throw ContractError("DiscreteDist: negative probability");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw ContractError("DiscreteDist: probabilities sum to " + std::to_string(sum));
}

DiscreteDist DiscreteDist::normalized(std::vector<double> weights) {
    double sum = 0.0;
    for (double v : weights) {
        if (v < 0.0) throw ContractError("DiscreteDist: negative weight");
        sum += v;
    }
    if (sum <= 0.0) throw ContractError("DiscreteDist: weights sum to zero");
    for (double& v : weights) v /= sum;
    // renormalize once more so the sum check passes at 1e-12
    double s2 = 0.0;
    for (double v : weights) s2 += v;
    weights.back() += 1.0 - s2;
    return DiscreteDist(std::move(weights));
}

static void check_support(const DiscreteDist& a, const DiscreteDist& b, const char* op) {
    if (a.size() != b.size())
        throw ContractError(std::string(op) + ": support sizes differ (" + std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()) + ")");
}

double value_function(const DiscreteDist& p_data, const DiscreteDist& p_gen, const DiscriminatorTable& d) {
    check_support(p_data, p_gen, "value_function");
    if (d.values.size() != p_data.size())
        throw ContractError("value_function: discriminator table size mismatch");
    double acc = 0.0;
    for (std::size_t k = 0; k < p_data.size(); ++k) {
        const double dk = d.values[k];
        if (!(dk > 0.0 && dk < 1.0))
            throw ContractError("value_function: discriminator value outside (0,1)");
        acc += p_data.probs[k] * std::log(dk) + p_gen.probs[k] * std::log(1.0 - dk);
    }
    return acc;
}

DiscriminatorTable optimal_discriminator(const DiscreteDist& p_data, const DiscreteDist& p_gen, double clamp_eps) {
    check_support(p_data, p_gen, "optimal_discriminator");
    DiscriminatorTable d;
    d.values.resize(p_data.size());
    for (std::size_t k = 0; k < p_data.size(); ++k) {
        const double total = p_data.probs[k] + p_gen.probs[k];
        if (total <= 0.0)
            throw ContractError("optimal_discriminator: zero total mass at support point " + std::to_string(k));
        d.values[k] = std::clamp(p_data.probs[k] / total, clamp_eps, 1.0 - clamp_eps);
    }
    return d;
}

double c_of_g(const DiscreteDist& p_data, const DiscreteDist& p_gen) {
    check_support(p_data, p_gen, "c_of_g");
    double acc = 0.0;
    for (std::size_t k = 0; k < p_data.size(); ++k) {
        const double pd = p_data.probs[k];
        const double pg = p_gen.probs[k];
        const double total = pd + pg;
        if (total <= 0.0) throw ContractError("c_of_g: zero total mass at support point " + std::to_string(k));
        if (pd > 0.0) acc += pd * std::log(pd / total);
        if (pg > 0.0) acc += pg * std::log(pg / total);
    }
    return acc;
}

DiscriminatorTable gradient_ascent_d(const DiscreteDist& p_data, const DiscreteDist& p_gen, int steps, double lr) {
    check_support(p_data, p_gen, "gradient_ascent_d");
    if (steps < 1) throw ContractError("gradient_ascent_d: steps must be >= 1");
    const std::size_t k = p_data.size();
    std::vector<double> theta(k, 0.0);  // d = logistic(theta), starts at 1/2
    std::vector<double> d(k, 0.5);
    for (int s = 0; s < steps; ++s) {
        for (std::size_t i = 0; i < k; ++i) {
            // dV/dd = pd/d - pg/(1-d);  dd/dtheta = d(1-d)
            const double grad = (p_data.probs[i] / d[i] - p_gen.probs[i] / (1.0 - d[i])) * d[i] * (1.0 - d[i]);
            theta[i] += lr * grad;
            d[i] = 1.0 / (1.0 + std::exp(-theta[i]));
        }
    }
    DiscriminatorTable out;
    out.values = std::move(d);
    return out;
}

TheoryReport run_theory_trials(int trials, int perturbations, std::uint64_t seed) {
    if (trials < 0) throw ContractError("run_theory_trials: trials must be >= 0");
    constexpr double kMinusLog4 = -1.3862943611198906;  // -ln 4

    TheoryReport report;
    report.trials = trials;
    RngStream rng(seed);

    for (int t = 0; t < trials; ++t) {
        const auto k = static_cast<std::size_t>(2 + rng.below(15));  // K in [2,16]
        std::vector<double> wp(k), wq(k);
        // weights bounded away from zero keep the logs well conditioned
        for (auto& v : wp) v = 0.05 + rng.uniform();
        for (auto& v : wq) v = 0.05 + rng.uniform();
        const DiscreteDist p = DiscreteDist::normalized(std::move(wp));
        const DiscreteDist q = DiscreteDist::normalized(std::move(wq));

        if (std::abs(c_of_g(p, p) - kMinusLog4) > 1e-9) ++report.equilibrium_failures;

        const double c = c_of_g(p, q);
        const double gap = c - kMinusLog4;
        if (gap < -1e-12) ++report.lower_bound_failures;
        report.rows.push_back({t, c, std::max(gap, 0.0)});

        const DiscriminatorTable dstar = optimal_discriminator(p, q);
        const double vstar = value_function(p, q, dstar);
        for (int j = 0; j < perturbations; ++j) {
            DiscriminatorTable cand;
            cand.values.resize(k);
            for (auto& v : cand.values) v = std::clamp(rng.uniform(), 1e-9, 1.0 - 1e-9);
            if (value_function(p, q, cand) > vstar + 1e-12) {
                ++report.optimality_failures;
                break;
            }
        }
    }

    // Learned-vs-analytic agreement on a fixed-size support.
    {
        std::vector<double> wp(8), wq(8);
        for (auto& v : wp) v = 0.5 + rng.uniform();
        for (auto& v : wq) v = 0.5 + rng.uniform();
        const DiscreteDist p = DiscreteDist::normalized(std::move(wp));
        const DiscreteDist q = DiscreteDist::normalized(std::move(wq));
        const DiscriminatorTable learned = gradient_ascent_d(p, q, 2000, 0.1);
        const DiscriminatorTable dstar = optimal_discriminator(p, q);
        double linf = 0.0;
        for (std::size_t i = 0; i < learned.values.size(); ++i)
            linf = std::max(linf, std::abs(learned.values[i] - dstar.values[i]));
        report.ascent_linf = linf;
        report.ascent_ok = linf <= 0.01;
    }
    return report;
}

void write_theory_csv(const std::filesystem::path& path, const TheoryReport& report) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "trial,c_of_g,gap_to_minus_log4\n";
    char buf[96];
    for (const auto& row : report.rows) {
        std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g", row.trial, row.c, row.gap);
        out << buf << '\n';
    }
}

}  // namespace srcnet::theory
