#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ostb/pipeline.hpp"

namespace fs = std::filesystem;
using namespace ostb;

namespace {

// Flags shared by tfr/train/eval; every one overrides a RunConfig field.
struct CommonFlags {
    std::string config_path;
    std::string dataset_root, manifest, cache_root, out_dir;
    std::string representation, architecture, model_preset;
    int image_side = -1;
    int64_t seed = -1;
    int jobs = -1;

    double beta = -1, gamma = -1;
    int voices = -1;
    int window = -1, hop = -1;

    double lr = -1;
    int epochs = -1, batches = -1, batch_size = -1;
    double dropout = -1;

    int n_train = -1, n_way = -1, trials = -1, repetitions = -1;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file");
        cmd->add_option("--root", dataset_root, "dataset root directory");
        cmd->add_option("--manifest", manifest, "manifest JSON path");
        cmd->add_option("--cache", cache_root, "image cache root");
        cmd->add_option("--out", out_dir, "run output directory");
        cmd->add_option("--kind", representation, "scalogram|spectrogram");
        cmd->add_option("--arch", architecture, "conv|residual");
        cmd->add_option("--model", model_preset, "desk|full");
        cmd->add_option("--side", image_side, "rendered image side");
        cmd->add_option("--seed", seed, "global seed");
        cmd->add_option("--jobs", jobs, "worker threads for transforms");
        cmd->add_option("--beta", beta, "Morse beta");
        cmd->add_option("--gamma", gamma, "Morse gamma");
        cmd->add_option("--voices", voices, "voices per octave");
        cmd->add_option("--window", window, "STFT window length");
        cmd->add_option("--hop", hop, "STFT hop");
        cmd->add_option("--lr", lr, "learning rate");
        cmd->add_option("--epochs", epochs, "training epochs");
        cmd->add_option("--batches", batches, "batches per epoch");
        cmd->add_option("--batch-size", batch_size, "pairs per batch");
        cmd->add_option("--dropout", dropout, "dropout rate");
        cmd->add_option("--n-train", n_train, "training classes per split");
        cmd->add_option("--n-way", n_way, "support classes per one-shot task");
        cmd->add_option("--trials", trials, "one-shot trials per run");
        cmd->add_option("--repetitions", repetitions, "train+eval repetitions");
    }

    RunConfig resolve() const {
        RunConfig c = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
        if (!dataset_root.empty()) c.dataset_root = dataset_root;
        if (!manifest.empty()) c.manifest_path = manifest;
        if (!cache_root.empty()) c.cache_root = cache_root;
        if (!out_dir.empty()) c.out_dir = out_dir;
        bool arch_changed = false;
        if (!architecture.empty()) {
            c.architecture = architecture_from_string(architecture);
            arch_changed = true;
        }
        if (!representation.empty()) c.representation = tfr_kind_from_string(representation);
        if (!model_preset.empty()) c.model_preset = model_preset;
        if (image_side >= 0) c.image_side = image_side;
        if (seed >= 0) c.seed = static_cast<uint64_t>(seed);
        if (jobs >= 0) c.jobs = jobs;
        if (beta >= 0) c.morse.beta = beta;
        if (gamma >= 0) c.morse.gamma = gamma;
        if (voices >= 0) c.morse.voices_per_octave = voices;
        if (window >= 0) c.stft.window_len = static_cast<std::size_t>(window);
        if (hop >= 0) c.stft.hop = static_cast<std::size_t>(hop);
        if (lr >= 0)
            c.train.lr = lr;
        else if (arch_changed && config_path.empty())
            c.train.lr = RunConfig::default_lr(c.architecture);
        if (epochs >= 0) c.train.epochs = epochs;
        if (batches >= 0) c.train.batches_per_epoch = batches;
        if (batch_size >= 0) c.train.batch_size = batch_size;
        if (dropout >= 0) c.train.dropout_rate = dropout;
        if (n_train >= 0) c.n_train = n_train;
        if (n_way >= 0) c.n_way = n_way;
        if (trials >= 0) c.trials = trials;
        if (repetitions >= 0) c.repetitions = repetitions;
        return c;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"One-shot musical instrument identification toolkit"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate the synthetic 8-class corpus");
    std::string synth_out = "data/synth";
    int clips_per_class = 20, synth_rate = 8000;
    double synth_duration = 1.0;
    int64_t synth_seed = 42;
    synth->add_option("--out", synth_out, "output dataset directory");
    synth->add_option("--clips-per-class", clips_per_class, "clips per class");
    synth->add_option("--rate", synth_rate, "sample rate in Hz");
    synth->add_option("--duration", synth_duration, "clip length in seconds");
    synth->add_option("--seed", synth_seed, "corpus seed");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "build a manifest from a dataset tree");
    std::string ingest_root, ingest_manifest;
    int ingest_quota = 0;
    ingest->add_option("--root", ingest_root, "dataset root")->required();
    ingest->add_option("--quota", ingest_quota, "files per class")->required();
    ingest->add_option("--out", ingest_manifest, "manifest path (default <root>/manifest.json)");

    // tfr / train / eval
    auto* tfr = app.add_subcommand("tfr", "populate the time-frequency image cache");
    CommonFlags tfr_flags;
    tfr_flags.attach(tfr);

    auto* train_cmd = app.add_subcommand("train", "train one model on one split");
    CommonFlags train_flags;
    train_flags.attach(train_cmd);

    auto* eval_cmd = app.add_subcommand("eval", "repeated train+eval protocol with baselines");
    CommonFlags eval_flags;
    eval_flags.attach(eval_cmd);

    // report
    auto* report = app.add_subcommand("report", "render the accuracy grid from eval CSVs");
    std::vector<std::string> report_inputs;
    std::string report_out = "report.txt", report_png;
    report->add_option("--in", report_inputs, "eval CSV files")->required();
    report->add_option("--out", report_out, "report text path");
    report->add_option("--png", report_png, "optional bar-chart PNG");

    // model info
    auto* model = app.add_subcommand("model", "model utilities");
    model->require_subcommand(1);
    auto* info = model->add_subcommand("info", "print architecture and parameter count");
    std::string info_ckpt;
    info->add_option("checkpoint", info_ckpt, "checkpoint path")->required();

    // repro
    auto* repro = app.add_subcommand("repro", "full split-grid protocol on a user-supplied corpus");
    CommonFlags repro_flags;
    repro_flags.attach(repro);
    std::vector<int> repro_splits;
    std::string repro_out = "runs/repro";
    repro->add_option("--splits", repro_splits, "training-set sizes (default 2 5 8 10 12)");
    repro->add_option("--repro-out", repro_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            const DatasetManifest m =
                cmd_synth(synth_out, clips_per_class, synth_rate, synth_duration,
                          static_cast<uint64_t>(synth_seed));
            std::cout << "synth: wrote " << m.classes.size() << " classes x " << m.per_class_quota
                      << " clips under " << synth_out << "\n";
            for (const auto& cls : m.classes) std::cout << "  " << cls << "\n";
        } else if (ingest->parsed()) {
            const std::string out_path =
                ingest_manifest.empty() ? (fs::path(ingest_root) / "manifest.json").string() : ingest_manifest;
            const DatasetManifest m = cmd_ingest(ingest_root, ingest_quota, out_path);
            std::cout << "ingest: " << m.classes.size() << " classes, quota " << m.per_class_quota
                      << ", manifest at " << out_path << "\n";
        } else if (tfr->parsed()) {
            const TfrStats stats = cmd_tfr(tfr_flags.resolve());
            std::cout << "tfr: computed " << stats.computed << ", cache hits " << stats.cache_hits
                      << ", cache dir " << stats.cache_dir << "\n";
        } else if (train_cmd->parsed()) {
            const TrainArtifacts art = cmd_train(train_flags.resolve());
            std::cout << "train: best epoch " << art.result.best_epoch << " (loss "
                      << art.result.best_loss << "), checkpoint " << art.checkpoint_path << "\n";
        } else if (eval_cmd->parsed()) {
            const EvalArtifacts art = cmd_eval(eval_flags.resolve());
            std::cout << render_table(art.rows) << "\neval: wrote " << art.eval_csv_path << "\n";
        } else if (report->parsed()) {
            std::cout << cmd_report(report_inputs, report_out, report_png);
            std::cout << "report: wrote " << report_out << "\n";
        } else if (info->parsed()) {
            std::cout << cmd_model_info(info_ckpt);
        } else if (repro->parsed()) {
            RunConfig rc = repro_flags.resolve();
            if (repro_splits.empty()) repro_splits = {2, 5, 8, 10, 12};
            cmd_repro(rc, repro_splits, repro_out);
            std::cout << "repro: reports under " << repro_out << "\n";
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
