#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "srcnet/rng.hpp"

namespace srcnet::theory {

/// Probability vector over a finite support.
struct DiscreteDist {
    std::vector<double> probs;

    explicit DiscreteDist(std::vector<double> p);
    static DiscreteDist normalized(std::vector<double> weights);

    std::size_t size() const { return probs.size(); }
};

/// Discriminator values in (0,1), one per support point.
struct DiscriminatorTable {
    std::vector<double> values;
};

/// sum_k p_data[k] log d[k] + p_gen[k] log(1 - d[k]). Natural log.
double value_function(const DiscreteDist& p_data, const DiscreteDist& p_gen, const DiscriminatorTable& d);

/// Closed-form maximizer d*[k] = p_data[k] / (p_data[k] + p_gen[k]), clamped
/// into (clamp_eps, 1 - clamp_eps) so downstream logs stay finite.
DiscriminatorTable optimal_discriminator(const DiscreteDist& p_data, const DiscreteDist& p_gen,
                                         double clamp_eps = 1e-12);

/// Value function at the optimal discriminator. Minimum -ln 4, attained only
/// when the two distributions coincide.
double c_of_g(const DiscreteDist& p_data, const DiscreteDist& p_gen);

/// Plain gradient ascent on the value function over logit-parameterized
/// discriminator values, starting from d = 1/2 everywhere.
DiscriminatorTable gradient_ascent_d(const DiscreteDist& p_data, const DiscreteDist& p_gen, int steps,
                                     double lr);

// ---- randomized verification -------------------------------------------------

struct TrialRow {
    int trial = 0;
    double c = 0.0;
    double gap = 0.0;  // c - (-ln 4), nonnegative
};

struct TheoryReport {
    int trials = 0;
    int equilibrium_failures = 0;   // |c_of_g(p,p) + ln 4| > 1e-9
    int optimality_failures = 0;    // some perturbed d beat d*
    int lower_bound_failures = 0;   // c_of_g(p,q) < -ln 4
    double ascent_linf = 0.0;       // L-inf gap between learned and closed-form d*
    bool ascent_ok = false;
    std::vector<TrialRow> rows;

    bool all_passed() const {
        return equilibrium_failures == 0 && optimality_failures == 0 && lower_bound_failures == 0 && ascent_ok;
    }
};

/// Runs `trials` randomized checks of the analytic claims on supports of size
/// <= 16, each trying `perturbations` random discriminators against d*, plus
/// one gradient-ascent-vs-closed-form comparison. Deterministic in the seed.
TheoryReport run_theory_trials(int trials, int perturbations, std::uint64_t seed);

void write_theory_csv(const std::filesystem::path& path, const TheoryReport& report);

}  // namespace srcnet::theory
