#include "srcnet/cli.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "srcnet/checkpoint.hpp"
#include "srcnet/dataset.hpp"
#include "srcnet/errors.hpp"
#include "srcnet/imageio.hpp"
#include "srcnet/metrics.hpp"
#include "srcnet/theory.hpp"
#include "srcnet/training.hpp"

namespace srcnet::cli {

namespace fs = std::filesystem;

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag_seed) {
    if (flag_seed) return *flag_seed;
    if (const char* env = std::getenv("SRCNET_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw UsageError(std::string("SRCNET_SEED is not a valid unsigned integer: ") + env);
        }
    }
    return 0;
}

// ---- synth -----------------------------------------------------------------

int cmd_synth(const SynthOptions& options) {
    if (options.out.empty()) throw UsageError("--out is required");
    if (options.train_scenes < 0 || options.test_scenes < 0)
        throw UsageError("--train and --test must be nonnegative");
    if (options.size < 1) throw UsageError("--size must be positive");
    if (!(options.spill_fraction > 0.0 && options.spill_fraction < 1.0))
        throw UsageError("--spill-fraction must lie strictly inside (0,1)");
    if (!(options.contrast > 1.0)) throw UsageError("--contrast must exceed 1");
    if (!(options.ks > 0.0)) throw UsageError("--ks must be positive");
    if (!(options.sea_sigma > 0.0)) throw UsageError("--sea-sigma must be positive");
    if (options.blur_radius < 1) throw UsageError("--blur-radius must be positive");

    io::SynthConfig cfg;
    cfg.train_scenes = options.train_scenes;
    cfg.test_scenes = options.test_scenes;
    cfg.master_seed = resolve_seed(options.seed);
    cfg.scene.height = options.size;
    cfg.scene.width = options.size;
    cfg.scene.sea_sigma = options.sea_sigma;
    cfg.scene.contrast_ratio = options.contrast;
    cfg.scene.spill_fraction = options.spill_fraction;
    cfg.scene.blur_radius = options.blur_radius;
    cfg.scene.k_s = options.ks;

    io::synthesize_dataset(options.out, cfg);
    std::printf("wrote %d train and %d test scenes (%dx%d) under %s\n", cfg.train_scenes, cfg.test_scenes,
                options.size, options.size, options.out.string().c_str());
    return 0;
}

// ---- train -----------------------------------------------------------------

namespace {

struct MergedTrainSetup {
    train::TrainConfig train;
    nets::GeneratorConfig gen;
    nets::DiscriminatorConfig disc;
};

bool parse_bool(const std::string& value, const std::string& key) {
    if (value == "1" || value == "true") return true;
    if (value == "0" || value == "false") return false;
    throw UsageError("config key " + key + " expects 0/1/true/false, got '" + value + "'");
}

train::L2Mode parse_l2_mode(const std::string& value) {
    if (value == "mse") return train::L2Mode::Mse;
    if (value == "norm") return train::L2Mode::Norm;
    throw UsageError("l2_mode must be 'mse' or 'norm', got '" + value + "'");
}

void apply_config_file(const fs::path& path, MergedTrainSetup& setup) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string trimmed;
        for (char c : line)
            if (c != ' ' && c != '\t' && c != '\r') trimmed += c;
        if (trimmed.empty() || trimmed[0] == '#') continue;
        const auto eq = trimmed.find('=');
        if (eq == std::string::npos)
            throw UsageError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trimmed.substr(0, eq);
        const std::string value = trimmed.substr(eq + 1);
        try {
            if (key == "gamma_seg") setup.train.gamma_seg = std::stof(value);
            else if (key == "gamma_sreg") setup.train.gamma_sreg = std::stof(value);
            else if (key == "lr") setup.train.lr = std::stof(value);
            else if (key == "m") setup.train.m = std::stoi(value);
            else if (key == "epochs") setup.train.epochs = std::stoi(value);
            else if (key == "seed") setup.train.seed = std::stoull(value);
            else if (key == "eval_every") setup.train.eval_every = std::stoi(value);
            else if (key == "l2_mode") setup.train.l2_mode = parse_l2_mode(value);
            else if (key == "fresh_batch_per_phase") setup.train.fresh_batch_per_phase = parse_bool(value, key);
            else if (key == "non_saturating") setup.train.non_saturating = parse_bool(value, key);
            else if (key == "gen_input_channels") setup.gen.input_channels = std::stoi(value);
            else if (key == "gen_base_channels") setup.gen.base_channels = std::stoi(value);
            else if (key == "gen_depth") setup.gen.depth = std::stoi(value);
            else if (key == "gen_image_size") setup.gen.image_size = std::stoi(value);
            else if (key == "disc_input_channels") setup.disc.input_channels = std::stoi(value);
            else if (key == "disc_base_channels") setup.disc.base_channels = std::stoi(value);
            else if (key == "disc_depth") setup.disc.depth = std::stoi(value);
            else throw UsageError(path.string() + ":" + std::to_string(lineno) + ": unknown config key '" + key + "'");
        } catch (const UsageError&) {
            throw;
        } catch (const std::exception&) {
            throw UsageError(path.string() + ":" + std::to_string(lineno) + ": bad value for " + key);
        }
    }
}

void write_effective_config(const fs::path& path, const MergedTrainSetup& setup) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "gamma_seg = %.9g\n"
                  "gamma_sreg = %.9g\n"
                  "lr = %.9g\n"
                  "m = %d\n"
                  "epochs = %d\n"
                  "seed = %" PRIu64 "\n"
                  "eval_every = %d\n"
                  "l2_mode = %s\n"
                  "fresh_batch_per_phase = %d\n"
                  "non_saturating = %d\n",
                  static_cast<double>(setup.train.gamma_seg), static_cast<double>(setup.train.gamma_sreg),
                  static_cast<double>(setup.train.lr), setup.train.m, setup.train.epochs, setup.train.seed,
                  setup.train.eval_every, setup.train.l2_mode == train::L2Mode::Mse ? "mse" : "norm",
                  setup.train.fresh_batch_per_phase ? 1 : 0, setup.train.non_saturating ? 1 : 0);
    out << buf;
    std::snprintf(buf, sizeof buf,
                  "gen_input_channels = %d\n"
                  "gen_base_channels = %d\n"
                  "gen_depth = %d\n"
                  "gen_image_size = %d\n"
                  "disc_input_channels = %d\n"
                  "disc_base_channels = %d\n"
                  "disc_depth = %d\n",
                  setup.gen.input_channels, setup.gen.base_channels, setup.gen.depth, setup.gen.image_size,
                  setup.disc.input_channels, setup.disc.base_channels, setup.disc.depth);
    out << buf;
}

}  // namespace

int cmd_train(const TrainCliOptions& options) {
    if (options.data.empty() || options.out.empty()) throw UsageError("--data and --out are required");

    const io::Dataset train_set = io::load_split(options.data, "train");
    const io::Dataset test_set = io::load_split(options.data, "test");
    if (train_set.scenes.empty()) throw UsageError("dataset has no train scenes");
    if (test_set.scenes.empty()) throw UsageError("dataset has no test scenes");

    MergedTrainSetup setup;
    setup.gen.image_size = train_set.image_size();
    // seed precedence: --seed flag, then config file, then SRCNET_SEED, then 0
    setup.train.seed = resolve_seed(std::nullopt);
    if (options.config_file) apply_config_file(*options.config_file, setup);

    // command line wins over the config file
    if (options.gamma_seg) setup.train.gamma_seg = static_cast<float>(*options.gamma_seg);
    if (options.gamma_sreg) setup.train.gamma_sreg = static_cast<float>(*options.gamma_sreg);
    if (options.lr) setup.train.lr = static_cast<float>(*options.lr);
    if (options.m) setup.train.m = *options.m;
    if (options.epochs) setup.train.epochs = *options.epochs;
    if (options.eval_every) setup.train.eval_every = *options.eval_every;
    if (options.seed) setup.train.seed = *options.seed;
    if (options.l2_mode) setup.train.l2_mode = parse_l2_mode(*options.l2_mode);
    if (options.fresh_batch_per_phase) setup.train.fresh_batch_per_phase = *options.fresh_batch_per_phase;
    if (options.non_saturating) setup.train.non_saturating = *options.non_saturating;

    if (options.gen_input_channels) setup.gen.input_channels = *options.gen_input_channels;
    if (options.gen_base_channels) setup.gen.base_channels = *options.gen_base_channels;
    if (options.gen_depth) setup.gen.depth = *options.gen_depth;
    if (options.disc_input_channels) setup.disc.input_channels = *options.disc_input_channels;
    if (options.disc_base_channels) setup.disc.base_channels = *options.disc_base_channels;
    if (options.disc_depth) setup.disc.depth = *options.disc_depth;

    try {
        setup.train.validate();
        setup.gen.validate();
        setup.disc.validate();
    } catch (const ContractError& e) {
        throw UsageError(e.what());
    }

    train::TrainSession session;
    if (options.resume) {
        io::Checkpoint ckpt = io::load_checkpoint(*options.resume);
        session.gen = std::move(ckpt.gen);
        session.disc = std::move(ckpt.disc);
        session.completed_epochs = ckpt.epoch;
        // resumed runs keep the architecture recorded in the checkpoint
        setup.gen = session.gen.config;
        setup.disc = session.disc.config;
    } else {
        session = train::make_session(setup.gen, setup.disc, setup.train.seed);
    }

    fs::create_directories(options.out);
    write_effective_config(options.out / "effective_config.txt", setup);

    const auto records = train::train(session, train_set, test_set, setup.train, options.out);
    if (!records.empty() && records.back().eval_jci)
        std::printf("trained to epoch %d: test accuracy %.4f, test JCI %.4f\n", session.completed_epochs,
                    *records.back().eval_accuracy, *records.back().eval_jci);
    else
        std::printf("trained to epoch %d\n", session.completed_epochs);
    return 0;
}

// ---- eval ------------------------------------------------------------------

int cmd_eval(const EvalOptions& options) {
    if (options.data.empty() || options.checkpoint.empty() || options.out.empty())
        throw UsageError("--data, --checkpoint and --out are required");
    if (options.split != "train" && options.split != "test")
        throw UsageError("--split must be 'train' or 'test'");
    if (!(options.threshold > 0.0 && options.threshold < 1.0))
        throw UsageError("--threshold must lie strictly inside (0,1)");

    const io::Checkpoint ckpt = io::load_checkpoint(options.checkpoint);
    const io::Dataset dataset = io::load_split(options.data, options.split);
    const auto scenes = train::prepare_scenes(dataset, ckpt.gen.config);

    fs::create_directories(options.out / "masks");
    train::EvalSummary summary;
    for (const auto& scene : scenes) {
        const Tensor prob = nets::generator_predict(ckpt.gen, scene.input);
        const Tensor pred = train::binarize(prob, static_cast<float>(options.threshold));
        metrics::SceneMetrics row;
        row.scene_id = scene.scene_id;
        row.counts = metrics::confusion(pred, scene.truth);
        row.accuracy = metrics::accuracy(row.counts);
        row.jci = metrics::jaccard(row.counts);
        summary.mean_accuracy += row.accuracy;
        summary.mean_jci += row.jci;
        summary.rows.push_back(row);

        const auto slash = scene.scene_id.find('/');
        const std::string name = slash == std::string::npos ? scene.scene_id : scene.scene_id.substr(slash + 1);
        io::write_pgm_mask(options.out / "masks" / (name + ".pgm"), pred);
    }
    summary.mean_accuracy /= static_cast<double>(summary.rows.size());
    summary.mean_jci /= static_cast<double>(summary.rows.size());

    metrics::write_scene_metrics_csv(options.out / "metrics.csv", summary.rows);

    std::vector<double> accs, jcis;
    for (const auto& r : summary.rows) {
        accs.push_back(r.accuracy);
        jcis.push_back(r.jci);
    }
    metrics::write_box_summary_csv(options.out / "box_summary.csv",
                                   {{options.label + "/accuracy", metrics::box_stats(accs)},
                                    {options.label + "/jci", metrics::box_stats(jcis)}});

    std::printf("evaluated %zu scenes: mean accuracy %.4f, mean JCI %.4f\n", summary.rows.size(),
                summary.mean_accuracy, summary.mean_jci);
    return 0;
}

// ---- theory ----------------------------------------------------------------

int cmd_theory(const TheoryOptions& options) {
    if (options.trials < 0) throw UsageError("--trials must be nonnegative");
    if (options.perturbations < 0) throw UsageError("--perturbations must be nonnegative");

    const theory::TheoryReport report =
        theory::run_theory_trials(options.trials, options.perturbations, resolve_seed(options.seed));
    theory::write_theory_csv(options.out_csv, report);

    const auto line = [](const char* name, bool ok, const std::string& detail) {
        std::printf("%-22s %s%s%s\n", name, ok ? "PASS" : "FAIL", detail.empty() ? "" : "  ", detail.c_str());
    };
    line("equilibrium", report.equilibrium_failures == 0,
         std::to_string(report.trials) + " trials, " + std::to_string(report.equilibrium_failures) + " failures");
    line("optimal_discriminator", report.optimality_failures == 0,
         std::to_string(report.optimality_failures) + " beaten by perturbations");
    line("value_lower_bound", report.lower_bound_failures == 0,
         std::to_string(report.lower_bound_failures) + " below -ln 4");
    {
        char buf[64];
        std::snprintf(buf, sizeof buf, "L-inf %.6f", report.ascent_linf);
        line("gradient_ascent", report.ascent_ok, buf);
    }
    return report.all_passed() ? 0 : 1;
}

// ---- argv entry point --------------------------------------------------------

int run(int argc, const char* const* argv) {
    CLI::App app{"adversarial oil-spill segmentation on synthetic SAR imagery"};
    app.require_subcommand(1);

    SynthOptions synth;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
    synth_cmd->add_option("--out", synth.out, "output dataset directory")->required();
    synth_cmd->add_option("--train", synth.train_scenes, "number of training scenes");
    synth_cmd->add_option("--test", synth.test_scenes, "number of test scenes");
    synth_cmd->add_option("--size", synth.size, "scene height and width");
    synth_cmd->add_option("--seed", synth.seed, "master seed (SRCNET_SEED when absent)");
    synth_cmd->add_option("--contrast", synth.contrast, "sea/oil cross-section ratio");
    synth_cmd->add_option("--spill-fraction", synth.spill_fraction, "oil pixel fraction in (0,1)");
    synth_cmd->add_option("--ks", synth.ks, "detection system constant");
    synth_cmd->add_option("--sea-sigma", synth.sea_sigma, "sea cross section");
    synth_cmd->add_option("--blur-radius", synth.blur_radius, "blob smoothing radius");

    TrainCliOptions traincli;
    auto* train_cmd = app.add_subcommand("train", "train the segmentation nets");
    train_cmd->add_option("--data", traincli.data, "dataset directory")->required();
    train_cmd->add_option("--out", traincli.out, "run output directory")->required();
    train_cmd->add_option("--config", traincli.config_file, "key = value config file");
    train_cmd->add_option("--resume", traincli.resume, "checkpoint to continue from");
    train_cmd->add_option("--gamma_seg", traincli.gamma_seg, "adversarial loss weight");
    train_cmd->add_option("--gamma_sreg", traincli.gamma_sreg, "regularizer weight");
    train_cmd->add_option("--lr", traincli.lr, "Adam learning rate");
    train_cmd->add_option("--m", traincli.m, "minibatch size");
    train_cmd->add_option("--epochs", traincli.epochs, "training epochs");
    train_cmd->add_option("--seed", traincli.seed, "training seed (SRCNET_SEED when absent)");
    train_cmd->add_option("--eval_every", traincli.eval_every, "evaluation period in epochs");
    train_cmd->add_option("--l2_mode", traincli.l2_mode, "regularizer form: mse or norm");
    train_cmd->add_option("--fresh_batch_per_phase", traincli.fresh_batch_per_phase,
                          "draw separate batches for the two phases");
    train_cmd->add_option("--non_saturating", traincli.non_saturating, "non-saturating generator objective");
    train_cmd->add_option("--gen_input_channels", traincli.gen_input_channels, "1 or 2");
    train_cmd->add_option("--gen_base_channels", traincli.gen_base_channels, "generator width");
    train_cmd->add_option("--gen_depth", traincli.gen_depth, "generator encoder depth");
    train_cmd->add_option("--disc_input_channels", traincli.disc_input_channels, "1, or 2 for conditioning");
    train_cmd->add_option("--disc_base_channels", traincli.disc_base_channels, "discriminator width");
    train_cmd->add_option("--disc_depth", traincli.disc_depth, "discriminator depth");

    EvalOptions evalopt;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
    eval_cmd->add_option("--data", evalopt.data, "dataset directory")->required();
    eval_cmd->add_option("--checkpoint", evalopt.checkpoint, "checkpoint file")->required();
    eval_cmd->add_option("--out", evalopt.out, "evaluation output directory")->required();
    eval_cmd->add_option("--split", evalopt.split, "train or test");
    eval_cmd->add_option("--label", evalopt.label, "method label for the summary CSV");
    eval_cmd->add_option("--threshold", evalopt.threshold, "binarization threshold");

    TheoryOptions theoryopt;
    auto* theory_cmd = app.add_subcommand("theory", "verify the minimax analytics on discrete distributions");
    theory_cmd->add_option("--trials", theoryopt.trials, "number of random trials");
    theory_cmd->add_option("--perturbations", theoryopt.perturbations, "perturbations per trial");
    theory_cmd->add_option("--seed", theoryopt.seed, "seed (SRCNET_SEED when absent)");
    theory_cmd->add_option("--out", theoryopt.out_csv, "trial CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (synth_cmd->parsed()) return cmd_synth(synth);
        if (train_cmd->parsed()) return cmd_train(traincli);
        if (eval_cmd->parsed()) return cmd_eval(evalopt);
        if (theory_cmd->parsed()) return cmd_theory(theoryopt);
        std::fprintf(stderr, "no subcommand selected\n");
        return 2;
    } catch (const UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

}  // namespace srcnet::cli
