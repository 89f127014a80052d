#include "srcnet/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "srcnet/checkpoint.hpp"
#include "srcnet/errors.hpp"
#include "srcnet/sar.hpp"

namespace srcnet::train {

namespace ag = srcnet::autograd;
using nets::Binding;
using nets::Tape;
using nets::Var;

void TrainConfig::validate() const {
    if (gamma_seg < 0.0f || gamma_sreg < 0.0f) throw ContractError("TrainConfig: gammas must be nonnegative");
    if (gamma_seg == 0.0f && gamma_sreg == 0.0f)
        throw ContractError("TrainConfig: gamma_seg and gamma_sreg cannot both be zero");
    if (!(lr > 0.0f)) throw ContractError("TrainConfig: lr must be positive");
    if (m < 1) throw ContractError("TrainConfig: minibatch size must be positive");
    if (epochs < 0) throw ContractError("TrainConfig: epochs must be nonnegative");
    if (eval_every < 1) throw ContractError("TrainConfig: eval_every must be positive");
}

void TrainBatch::validate() const {
    if (inputs.rank() != 4 || truths.rank() != 4)
        throw ShapeError("TrainBatch: inputs and truths must be rank 4");
    if (inputs.dim(0) != truths.dim(0))
        throw ShapeError("TrainBatch: batch size mismatch between inputs and truths");
    for (float v : truths.data)
        if (v != 0.0f && v != 1.0f) throw ContractError("TrainBatch: truths must be strictly {0,1}");
}

// ---- objective graphs ---------------------------------------------------------

Var disc_objective_graph(Tape& tape, const nets::DiscriminatorConfig& dc, const Binding& d_params,
                         Var truths, Var fakes, const Var* conditioning, const TrainConfig& cfg) {
    Var d_real = nets::discriminator_forward(tape, dc, d_params, truths, conditioning);
    Var d_fake = nets::discriminator_forward(tape, dc, d_params, fakes, conditioning);
    Var per_sample = ag::log(d_real, kLogEps) + ag::log(1.0f - d_fake, kLogEps);
    return ag::mul_const(ag::mean(per_sample), cfg.gamma_seg);
}

GenLossGraph gen_loss_graph(Tape& tape, const nets::DiscriminatorConfig& dc, const Binding& d_params,
                            Var fakes, Var truths, const Var* conditioning, const TrainConfig& cfg) {
    Var d_fake = nets::discriminator_forward(tape, dc, d_params, fakes, conditioning);
    Var adv_per = cfg.non_saturating ? ag::mul_const(ag::log(d_fake, kLogEps), -1.0f)
                                     : ag::log(1.0f - d_fake, kLogEps);
    Var diff = fakes - truths;
    Var reg_per = cfg.l2_mode == L2Mode::Mse ? ag::mean_per_sample(diff * diff) : ag::l2_norm_per_sample(diff);

    GenLossGraph g;
    g.total = ag::mean(ag::mul_const(adv_per, cfg.gamma_seg) + ag::mul_const(reg_per, cfg.gamma_sreg));
    g.adv = ag::mul_const(ag::mean(adv_per), cfg.gamma_seg);
    g.reg = ag::mul_const(ag::mean(reg_per), cfg.gamma_sreg);
    return g;
}

// ---- value-level wrappers -------------------------------------------------------

namespace {

struct PhaseGraph {
    Tape tape;
    Binding d_params;
    Binding g_params;
    Var truths;
    Var fakes;
    Var cond;
    const Var* cond_ptr = nullptr;
};

// Builds the shared part of either phase: bind both nets, feed the batch, run
// the generator. Which side is trainable decides where gradients flow.
void build_phase(PhaseGraph& pg, const nets::Discriminator& disc, const nets::Generator& gen,
                 const TrainBatch& batch, bool train_disc) {
    batch.validate();
    pg.d_params = nets::bind_params(pg.tape, disc.params, train_disc);
    pg.g_params = nets::bind_params(pg.tape, gen.params, !train_disc);
    Var x = pg.tape.constant(batch.inputs);
    pg.truths = pg.tape.constant(batch.truths);
    pg.fakes = nets::generator_forward(pg.tape, gen.config, pg.g_params, x);
    if (disc.config.input_channels == 2) {
        pg.cond = pg.tape.constant(batch.cond);
        pg.cond_ptr = &pg.cond;
    }
}

}  // namespace

float disc_objective(const nets::Discriminator& disc, const nets::Generator& gen, const TrainBatch& batch,
                     const TrainConfig& cfg) {
    PhaseGraph pg;
    build_phase(pg, disc, gen, batch, true);
    return disc_objective_graph(pg.tape, disc.config, pg.d_params, pg.truths, pg.fakes, pg.cond_ptr, cfg)
        .value()
        .item();
}

float gen_loss(const nets::Discriminator& disc, const nets::Generator& gen, const TrainBatch& batch,
               const TrainConfig& cfg) {
    PhaseGraph pg;
    build_phase(pg, disc, gen, batch, false);
    return gen_loss_graph(pg.tape, disc.config, pg.d_params, pg.fakes, pg.truths, pg.cond_ptr, cfg)
        .total.value()
        .item();
}

// ---- stepping --------------------------------------------------------------------

StepStats train_step(nets::Discriminator& disc, nets::Generator& gen, const TrainBatch& disc_batch,
                     const TrainBatch& gen_batch, const TrainConfig& cfg) {
    const ag::AdamConfig adam{cfg.lr, 0.5f, 0.999f, 1e-8f};
    StepStats stats;

    {
        PhaseGraph pg;
        build_phase(pg, disc, gen, disc_batch, true);
        Var obj = disc_objective_graph(pg.tape, disc.config, pg.d_params, pg.truths, pg.fakes, pg.cond_ptr, cfg);
        stats.disc_objective = obj.value().item();
        if (!std::isfinite(stats.disc_objective))
            throw NumericError("disc_objective is non-finite");
        pg.tape.backward(obj);
        ag::adam_step(disc.params, pg.tape.named_gradients(), ag::Direction::Ascend, adam);
    }
    {
        PhaseGraph pg;
        build_phase(pg, disc, gen, gen_batch, false);
        GenLossGraph g = gen_loss_graph(pg.tape, disc.config, pg.d_params, pg.fakes, pg.truths, pg.cond_ptr, cfg);
        stats.gen_loss = g.total.value().item();
        stats.adv_term = g.adv.value().item();
        stats.l2_term = g.reg.value().item();
        if (!std::isfinite(stats.gen_loss)) {
            const char* term = !std::isfinite(stats.l2_term) ? "regularizer term" : "adversarial term";
            throw NumericError(std::string("gen_loss is non-finite (") + term + ")");
        }
        pg.tape.backward(g.total);
        ag::adam_step(gen.params, pg.tape.named_gradients(), ag::Direction::Descend, adam);
    }
    return stats;
}

StepStats train_step(nets::Discriminator& disc, nets::Generator& gen, const TrainBatch& batch,
                     const TrainConfig& cfg) {
    return train_step(disc, gen, batch, batch, cfg);
}

Tensor binarize(const Tensor& prob_map, float threshold) {
    if (!(threshold > 0.0f && threshold < 1.0f)) throw ContractError("binarize: threshold must lie in (0,1)");
    Tensor out = Tensor::zeros(prob_map.dims);
    for (std::size_t i = 0; i < prob_map.data.size(); ++i)
        out.data[i] = prob_map.data[i] > threshold ? 1.0f : 0.0f;
    return out;
}

// ---- dataset preparation and evaluation --------------------------------------------

std::vector<PreparedScene> prepare_scenes(const io::Dataset& dataset, const nets::GeneratorConfig& config) {
    config.validate();
    if (dataset.scenes.empty()) throw ContractError("dataset split '" + dataset.split + "' is empty");
    std::vector<PreparedScene> out;
    out.reserve(dataset.scenes.size());
    for (const auto& scene : dataset.scenes) {
        if (scene.intensity.dim(2) != config.image_size || scene.intensity.dim(3) != config.image_size)
            throw ContractError("scene " + scene.scene_id + " is " + scene.intensity.dims_str() +
                                ", generator expects " + std::to_string(config.image_size) + "x" +
                                std::to_string(config.image_size));
        PreparedScene ps;
        ps.scene_id = scene.scene_id;
        ps.truth = scene.mask;
        ps.cond = scene.intensity;
        if (config.input_channels == 1) {
            ps.input = scene.intensity;
        } else {
            const Tensor sigma = sar::estimate_sigma_map(scene.intensity, kSigmaWindow, scene.meta.k_s);
            const int h = scene.intensity.dim(2), w = scene.intensity.dim(3);
            Tensor input = Tensor::zeros({1, 2, h, w});
            std::copy(scene.intensity.data.begin(), scene.intensity.data.end(), input.data.begin());
            std::copy(sigma.data.begin(), sigma.data.end(),
                      input.data.begin() + static_cast<std::ptrdiff_t>(h) * w);
            ps.input = std::move(input);
        }
        out.push_back(std::move(ps));
    }
    return out;
}

EvalSummary evaluate_generator(const nets::Generator& gen, const std::vector<PreparedScene>& scenes,
                               float threshold) {
    EvalSummary summary;
    for (const auto& scene : scenes) {
        const Tensor prob = nets::generator_predict(gen, scene.input);
        const Tensor pred = binarize(prob, threshold);
        metrics::SceneMetrics row;
        row.scene_id = scene.scene_id;
        row.counts = metrics::confusion(pred, scene.truth);
        row.accuracy = metrics::accuracy(row.counts);
        row.jci = metrics::jaccard(row.counts);
        summary.mean_accuracy += row.accuracy;
        summary.mean_jci += row.jci;
        summary.rows.push_back(std::move(row));
    }
    if (!summary.rows.empty()) {
        summary.mean_accuracy /= static_cast<double>(summary.rows.size());
        summary.mean_jci /= static_cast<double>(summary.rows.size());
    }
    return summary;
}

// ---- the outer loop -----------------------------------------------------------------

void write_run_log(const std::filesystem::path& path, const std::vector<RunRecord>& records) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "epoch,disc_objective,gen_loss,l2_term,eval_accuracy,eval_jci,wall_seconds\n";
    char buf[256];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f,", r.epoch, r.disc_objective, r.gen_loss, r.l2_term);
        out << buf;
        if (r.eval_accuracy) {
            std::snprintf(buf, sizeof buf, "%.6f", *r.eval_accuracy);
            out << buf;
        }
        out << ',';
        if (r.eval_jci) {
            std::snprintf(buf, sizeof buf, "%.6f", *r.eval_jci);
            out << buf;
        }
        std::snprintf(buf, sizeof buf, ",%.3f", r.wall_seconds);
        out << buf << '\n';
    }
}

TrainSession make_session(const nets::GeneratorConfig& gc, const nets::DiscriminatorConfig& dc,
                          std::uint64_t seed) {
    TrainSession s{nets::make_generator(gc, seed), nets::make_discriminator(dc, seed), 0};
    return s;
}

namespace {

TrainBatch assemble_batch(const std::vector<PreparedScene>& scenes, const std::vector<int>& order,
                          std::size_t begin, std::size_t end) {
    std::vector<const Tensor*> inputs, truths, conds;
    for (std::size_t i = begin; i < end; ++i) {
        const PreparedScene& ps = scenes[static_cast<std::size_t>(order[i])];
        inputs.push_back(&ps.input);
        truths.push_back(&ps.truth);
        conds.push_back(&ps.cond);
    }
    TrainBatch b;
    b.inputs = stack_batch(inputs);
    b.truths = stack_batch(truths);
    b.cond = stack_batch(conds);
    return b;
}

void shuffle_indices(std::vector<int>& order, RngStream& rng) {
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(i))]);
}

}  // namespace

std::vector<RunRecord> train(TrainSession& session, const io::Dataset& train_set, const io::Dataset& test_set,
                             const TrainConfig& cfg, const std::optional<std::filesystem::path>& out_dir) {
    cfg.validate();
    const auto train_scenes = prepare_scenes(train_set, session.gen.config);
    const auto test_scenes = prepare_scenes(test_set, session.gen.config);

    const std::size_t n = train_scenes.size();
    const auto m = static_cast<std::size_t>(cfg.m);
    std::vector<RunRecord> records;
    double best_jci = -1.0;

    const std::uint64_t shuffle_root = derive_seed(cfg.seed, kStreamShuffle);

    for (int epoch = session.completed_epochs + 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        RngStream shuffle_rng(derive_seed(shuffle_root, static_cast<std::uint64_t>(epoch)));
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        shuffle_indices(order, shuffle_rng);
        std::vector<int> order_g = order;
        if (cfg.fresh_batch_per_phase) shuffle_indices(order_g, shuffle_rng);

        double sum_disc = 0.0, sum_gen = 0.0, sum_l2 = 0.0;
        std::size_t steps = 0;
        for (std::size_t begin = 0; begin < n; begin += m, ++steps) {
            const std::size_t end = std::min(begin + m, n);
            const TrainBatch batch_d = assemble_batch(train_scenes, order, begin, end);
            StepStats stats;
            try {
                if (cfg.fresh_batch_per_phase) {
                    const TrainBatch batch_g = assemble_batch(train_scenes, order_g, begin, end);
                    stats = train_step(session.disc, session.gen, batch_d, batch_g, cfg);
                } else {
                    stats = train_step(session.disc, session.gen, batch_d, cfg);
                }
            } catch (const NumericError& e) {
                throw NumericError("epoch " + std::to_string(epoch) + " step " + std::to_string(steps + 1) +
                                   ": " + e.what());
            }
            sum_disc += stats.disc_objective;
            sum_gen += stats.gen_loss;
            sum_l2 += stats.l2_term;
        }

        RunRecord rec;
        rec.epoch = epoch;
        rec.disc_objective = static_cast<float>(sum_disc / static_cast<double>(steps));
        rec.gen_loss = static_cast<float>(sum_gen / static_cast<double>(steps));
        rec.l2_term = static_cast<float>(sum_l2 / static_cast<double>(steps));

        if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
            const EvalSummary summary = evaluate_generator(session.gen, test_scenes);
            rec.eval_accuracy = summary.mean_accuracy;
            rec.eval_jci = summary.mean_jci;
            if (out_dir && summary.mean_jci > best_jci) {
                best_jci = summary.mean_jci;
                io::save_checkpoint(*out_dir / "checkpoint_best.srcn",
                                    io::Checkpoint{session.gen, session.disc, epoch});
            }
        }

        rec.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        records.push_back(rec);
        session.completed_epochs = epoch;

        if (out_dir) write_run_log(*out_dir / "run_log.csv", records);
    }

    if (out_dir) {
        if (records.empty()) write_run_log(*out_dir / "run_log.csv", records);
        io::save_checkpoint(*out_dir / "checkpoint_final.srcn",
                            io::Checkpoint{session.gen, session.disc, session.completed_epochs});
    }
    return records;
}

}  // namespace srcnet::train
