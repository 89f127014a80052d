#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "srcnet/dataset.hpp"
#include "srcnet/metrics.hpp"
#include "srcnet/nets.hpp"

namespace srcnet::train {

enum class L2Mode { Mse, Norm };

/// Knobs of the alternating optimization. Defaults are the desk-scale setup;
/// gamma_seg/gamma_sreg weight the adversarial and regularizer terms.
struct TrainConfig {
    float gamma_seg = 1.0f;
    float gamma_sreg = 100.0f;
    float lr = 1e-4f;
    int m = 1;  // minibatch size
    int epochs = 50;
    std::uint64_t seed = 0;
    int eval_every = 5;
    L2Mode l2_mode = L2Mode::Mse;
    // Draw separate minibatches for the discriminator and generator phases of
    // one step instead of reusing the same batch.
    bool fresh_batch_per_phase = false;
    // Generator maximizes log D(G(x)) instead of minimizing log(1 - D(G(x))).
    bool non_saturating = false;

    void validate() const;
};

/// Clamp applied inside every log of the two objectives.
inline constexpr float kLogEps = 1e-7f;
/// Window of the local cross-section estimate fed to 2-channel generators.
inline constexpr int kSigmaWindow = 5;

struct TrainBatch {
    Tensor inputs;  // [m,Cin,H,W]
    Tensor truths;  // [m,1,H,W], strictly {0,1}
    Tensor cond;    // [m,1,H,W] conditioning image (raw intensity)

    int size() const { return inputs.dims.empty() ? 0 : inputs.dim(0); }
    void validate() const;
};

// ---- objective graphs ---------------------------------------------------------

/// Discriminator objective (ascended): gamma_seg * mean_i[log D(y_i) + log(1 - D(fake_i))].
/// `fakes` is used as-is; freeze the generator binding so it acts as a constant.
nets::Var disc_objective_graph(nets::Tape& tape, const nets::DiscriminatorConfig& dc,
                               const nets::Binding& d_params, nets::Var truths, nets::Var fakes,
                               const nets::Var* conditioning, const TrainConfig& cfg);

struct GenLossGraph {
    nets::Var total;  // scalar loss the generator descends
    nets::Var adv;    // gamma_seg-weighted adversarial term
    nets::Var reg;    // gamma_sreg-weighted regularizer term
};

/// Generator loss: mean_i[gamma_seg * log(1 - D(fake_i)) + gamma_sreg * R(y_i, fake_i)],
/// with R per config (mean squared error or Euclidean norm per sample).
GenLossGraph gen_loss_graph(nets::Tape& tape, const nets::DiscriminatorConfig& dc,
                            const nets::Binding& d_params, nets::Var fakes, nets::Var truths,
                            const nets::Var* conditioning, const TrainConfig& cfg);

// ---- value-level wrappers (build their own tapes) ------------------------------

float disc_objective(const nets::Discriminator& disc, const nets::Generator& gen, const TrainBatch& batch,
                     const TrainConfig& cfg);
float gen_loss(const nets::Discriminator& disc, const nets::Generator& gen, const TrainBatch& batch,
               const TrainConfig& cfg);

// ---- stepping -------------------------------------------------------------------

struct StepStats {
    float disc_objective = 0.0f;
    float gen_loss = 0.0f;
    float adv_term = 0.0f;
    float l2_term = 0.0f;
};

/// One Adam ascent on the discriminator against its objective, then one Adam
/// descent on the generator against its loss, in that order. Throws
/// NumericError naming the offending term when a loss turns non-finite.
StepStats train_step(nets::Discriminator& disc, nets::Generator& gen, const TrainBatch& disc_batch,
                     const TrainBatch& gen_batch, const TrainConfig& cfg);
StepStats train_step(nets::Discriminator& disc, nets::Generator& gen, const TrainBatch& batch,
                     const TrainConfig& cfg);

/// 1 where value > threshold, else 0; ties go to background.
Tensor binarize(const Tensor& prob_map, float threshold = 0.5f);

// ---- dataset preparation and evaluation ----------------------------------------

struct PreparedScene {
    std::string scene_id;
    Tensor input;  // [1,Cin,H,W] per generator config
    Tensor truth;  // [1,1,H,W]
    Tensor cond;   // [1,1,H,W] raw intensity
};

/// Builds model inputs for every scene: channel 0 is the raw intensity, and
/// 2-channel configs add the windowed cross-section estimate.
std::vector<PreparedScene> prepare_scenes(const io::Dataset& dataset, const nets::GeneratorConfig& config);

struct EvalSummary {
    std::vector<metrics::SceneMetrics> rows;
    double mean_accuracy = 0.0;
    double mean_jci = 0.0;
};

EvalSummary evaluate_generator(const nets::Generator& gen, const std::vector<PreparedScene>& scenes,
                               float threshold = 0.5f);

// ---- the outer loop --------------------------------------------------------------

struct RunRecord {
    int epoch = 0;
    float disc_objective = 0.0f;
    float gen_loss = 0.0f;
    float l2_term = 0.0f;
    std::optional<double> eval_accuracy;
    std::optional<double> eval_jci;
    double wall_seconds = 0.0;
};

void write_run_log(const std::filesystem::path& path, const std::vector<RunRecord>& records);

struct TrainSession {
    nets::Generator gen;
    nets::Discriminator disc;
    int completed_epochs = 0;
};

TrainSession make_session(const nets::GeneratorConfig& gc, const nets::DiscriminatorConfig& dc,
                          std::uint64_t seed);

/// Runs epochs completed_epochs+1 .. cfg.epochs with a seeded shuffle per
/// epoch, evaluating on the held-out split every eval_every epochs and at the
/// final epoch. When out_dir is set, writes run_log.csv plus
/// checkpoint_final.srcn and checkpoint_best.srcn (best test JCI).
std::vector<RunRecord> train(TrainSession& session, const io::Dataset& train_set, const io::Dataset& test_set,
                             const TrainConfig& cfg, const std::optional<std::filesystem::path>& out_dir);

}  // namespace srcnet::train
