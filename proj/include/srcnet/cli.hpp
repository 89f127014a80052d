#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

namespace srcnet::cli {

/// Bad flags or option combinations; mapped to exit code 2.
struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct SynthOptions {
    std::filesystem::path out;
    int train_scenes = 200;
    int test_scenes = 50;
    int size = 64;
    std::optional<std::uint64_t> seed;
    double contrast = 5.0;
    double spill_fraction = 0.2;
    double ks = 1.0;
    double sea_sigma = 1.0;
    int blur_radius = 4;
};

struct TrainCliOptions {
    std::filesystem::path data;
    std::filesystem::path out;
    std::optional<std::filesystem::path> config_file;
    std::optional<std::filesystem::path> resume;

    std::optional<double> gamma_seg, gamma_sreg, lr;
    std::optional<int> m, epochs, eval_every;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> l2_mode;
    std::optional<bool> fresh_batch_per_phase, non_saturating;

    std::optional<int> gen_input_channels, gen_base_channels, gen_depth;
    std::optional<int> disc_input_channels, disc_base_channels, disc_depth;
};

struct EvalOptions {
    std::filesystem::path data;
    std::filesystem::path checkpoint;
    std::filesystem::path out;
    std::string split = "test";
    std::string label = "srcnet";
    double threshold = 0.5;
};

struct TheoryOptions {
    int trials = 100;
    int perturbations = 100;
    std::optional<std::uint64_t> seed;
    std::filesystem::path out_csv = "theory.csv";
};

// Command bodies, exposed so they can be driven without a process boundary.
// Each returns the process exit code.
int cmd_synth(const SynthOptions& options);
int cmd_train(const TrainCliOptions& options);
int cmd_eval(const EvalOptions& options);
int cmd_theory(const TheoryOptions& options);

/// Flag that wins over the SRCNET_SEED environment variable, which wins over 0.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag_seed);

/// Full argv entry point: parse, dispatch, map exceptions to exit codes
/// (0 success, 1 runtime/numeric failure, 2 usage error).
int run(int argc, const char* const* argv);

}  // namespace srcnet::cli
