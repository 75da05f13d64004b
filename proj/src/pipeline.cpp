#include "ostb/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "ostb/checkpoint.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ostb {

json RunConfig::to_json() const {
    json j;
    j["seed"] = seed;
    j["dataset_root"] = dataset_root;
    j["manifest"] = manifest_path;
    j["cache_root"] = cache_root;
    j["out_dir"] = out_dir;
    j["representation"] = to_string(representation);
    j["architecture"] = to_string(architecture);
    j["model_preset"] = model_preset;
    j["image_side"] = image_side;
    j["quota"] = quota;
    j["morse"] = {{"beta", morse.beta}, {"gamma", morse.gamma}, {"voices", morse.voices_per_octave}};
    j["stft"] = {{"window", stft.window_len}, {"hop", stft.hop}};
    j["train"] = {{"lr", train.lr},
                  {"epochs", train.epochs},
                  {"batches_per_epoch", train.batches_per_epoch},
                  {"batch_size", train.batch_size},
                  {"same_fraction", train.same_fraction},
                  {"dropout", train.dropout_rate}};
    j["eval"] = {{"n_train", n_train}, {"n_way", n_way}, {"trials", trials}, {"repetitions", repetitions}};
    j["jobs"] = jobs;
    return j;
}

RunConfig RunConfig::from_json(const json& j) {
    RunConfig c;
    const auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).template get<std::decay_t<decltype(field)>>();
    };
    get("seed", c.seed);
    get("dataset_root", c.dataset_root);
    get("manifest", c.manifest_path);
    get("cache_root", c.cache_root);
    get("out_dir", c.out_dir);
    if (j.contains("representation")) c.representation = tfr_kind_from_string(j.at("representation"));
    if (j.contains("architecture")) c.architecture = architecture_from_string(j.at("architecture"));
    get("model_preset", c.model_preset);
    get("image_side", c.image_side);
    get("quota", c.quota);
    if (j.contains("morse")) {
        const auto& m = j.at("morse");
        if (m.contains("beta")) c.morse.beta = m.at("beta").get<double>();
        if (m.contains("gamma")) c.morse.gamma = m.at("gamma").get<double>();
        if (m.contains("voices")) c.morse.voices_per_octave = m.at("voices").get<int>();
    }
    if (j.contains("stft")) {
        const auto& s = j.at("stft");
        if (s.contains("window")) c.stft.window_len = s.at("window").get<std::size_t>();
        if (s.contains("hop")) c.stft.hop = s.at("hop").get<std::size_t>();
    }
    bool lr_given = false;
    if (j.contains("train")) {
        const auto& t = j.at("train");
        if (t.contains("lr")) {
            c.train.lr = t.at("lr").get<double>();
            lr_given = true;
        }
        if (t.contains("epochs")) c.train.epochs = t.at("epochs").get<int>();
        if (t.contains("batches_per_epoch")) c.train.batches_per_epoch = t.at("batches_per_epoch").get<int>();
        if (t.contains("batch_size")) c.train.batch_size = t.at("batch_size").get<int>();
        if (t.contains("same_fraction")) c.train.same_fraction = t.at("same_fraction").get<double>();
        if (t.contains("dropout")) c.train.dropout_rate = t.at("dropout").get<double>();
    }
    if (!lr_given) c.train.lr = default_lr(c.architecture);
    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        if (e.contains("n_train")) c.n_train = e.at("n_train").get<int>();
        if (e.contains("n_way")) c.n_way = e.at("n_way").get<int>();
        if (e.contains("trials")) c.trials = e.at("trials").get<int>();
        if (e.contains("repetitions")) c.repetitions = e.at("repetitions").get<int>();
    }
    get("jobs", c.jobs);
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("bad config JSON in " + path + ": " + e.what());
    }
    return from_json(j);
}

void RunConfig::validate() const {
    if (dataset_root.empty()) throw ConfigError("config: dataset_root is required");
    if (image_side < 16) throw ConfigError("config: image_side too small");
    if (model_preset != "desk" && model_preset != "full")
        throw ConfigError("config: model_preset must be desk|full");
    if (model_preset == "full" && image_side != 224)
        throw ConfigError("config: the full-size models take 224x224 input");
    if (n_way < 1 || trials < 1 || repetitions < 1 || n_train < 1)
        throw ConfigError("config: eval settings must be positive");
    morse.validate();
    train.validate();
}

std::string RunConfig::effective_manifest() const {
    if (!manifest_path.empty()) return manifest_path;
    return (fs::path(dataset_root) / "manifest.json").string();
}

double RunConfig::default_lr(Architecture arch) { return arch == Architecture::Conv ? 6e-4 : 5e-4; }

DatasetManifest cmd_synth(const std::string& out_dir, int clips_per_class, int rate, double duration_s,
                          uint64_t seed) {
    if (clips_per_class < 1) throw ConfigError("synth: clips_per_class must be positive");
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw DataError("synth: cannot create " + out_dir + ": " + ec.message());

    const auto& presets = synth_presets();
    // Shared note range (one octave, log-uniform) so pitch never identifies
    // the class; timbre and envelope have to.
    const double note_lo = 220.0, note_hi = 440.0;

    for (std::size_t ci = 0; ci < presets.size(); ++ci) {
        const auto& preset = presets[ci];
        const fs::path cls_dir = fs::path(out_dir) / preset.name;
        fs::create_directories(cls_dir, ec);
        if (ec) throw DataError("synth: cannot create " + cls_dir.string() + ": " + ec.message());
        for (int i = 0; i < clips_per_class; ++i) {
            const uint64_t clip_seed = Rng::derive(seed, (ci << 20) | static_cast<uint64_t>(i));
            Rng note_rng(Rng::derive(clip_seed, 0x11));
            const double note = note_lo * std::pow(note_hi / note_lo, note_rng.uniform());
            AudioClip clip = synth_instrument(preset, note, duration_s, rate, clip_seed);
            char name[32];
            std::snprintf(name, sizeof(name), "%03d.wav", i);
            write_wav_16((cls_dir / name).string(), clip);
        }
    }

    DatasetManifest manifest = build_manifest(out_dir, clips_per_class);
    save_manifest((fs::path(out_dir) / "manifest.json").string(), manifest);
    return manifest;
}

DatasetManifest cmd_ingest(const std::string& root, int quota, const std::string& manifest_path) {
    DatasetManifest manifest = build_manifest(root, quota);
    save_manifest(manifest_path, manifest);
    return manifest;
}

ImageCache open_cache(const RunConfig& config) {
    const std::string digest = tfr_digest(config.representation, config.morse, config.stft, config.image_side);
    return ImageCache(config.cache_root, digest, config.representation, config.image_side);
}

TfrStats cmd_tfr(const RunConfig& config) {
    config.validate();
    const DatasetManifest manifest = load_manifest(config.effective_manifest());
    ImageCache cache = open_cache(config);
    const std::string digest = tfr_digest(config.representation, config.morse, config.stft, config.image_side);

    std::vector<std::string> todo;
    TfrStats stats;
    stats.cache_dir = cache.dir();
    for (const auto& cls : manifest.classes)
        for (const auto& rel : manifest.entries.at(cls)) {
            if (cache.contains(rel))
                ++stats.cache_hits;
            else
                todo.push_back(rel);
        }

    const int jobs = config.jobs > 0 ? config.jobs
                                     : std::max(1u, std::thread::hardware_concurrency());
    const auto compute = [&](const std::string& rel) {
        AudioClip clip = load_wav((fs::path(config.dataset_root) / rel).string());
        clip.source_id = rel;
        TfrMatrix matrix = config.representation == TfrKind::Scalogram
                               ? cwt_scalogram(clip, config.morse)
                               : stft_spectrogram(clip, config.stft.window_len, config.stft.hop);
        TfrImage img = render_image(matrix, config.image_side);
        img.source_id = rel;
        img.params_digest = digest;
        return img;
    };

    // Transforms run in parallel per chunk; cache writes stay sequential.
    const std::size_t chunk = 64;
    for (std::size_t base = 0; base < todo.size(); base += chunk) {
        const std::size_t end = std::min(todo.size(), base + chunk);
        std::vector<TfrImage> results(end - base);
        std::vector<std::string> errors(end - base);
        std::vector<std::thread> workers;
        std::atomic<std::size_t> next{base};
        for (int w = 0; w < jobs; ++w) {
            workers.emplace_back([&]() {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= end) break;
                    try {
                        results[i - base] = compute(todo[i]);
                    } catch (const std::exception& e) {
                        errors[i - base] = std::string(e.what());
                    }
                }
            });
        }
        for (auto& w : workers) w.join();
        for (std::size_t i = base; i < end; ++i) {
            if (!errors[i - base].empty())
                throw DataError("tfr: transform failed for clip '" + todo[i] + "': " + errors[i - base]);
            cache.put(todo[i], results[i - base]);
            ++stats.computed;
        }
        cache.save_index();
    }
    cache.save_index();
    return stats;
}

SiameseModel<float> build_model(const RunConfig& config, uint64_t seed) {
    Rng rng(seed);
    if (config.architecture == Architecture::Conv) {
        ConvSiameseConfig cfg =
            config.model_preset == "full" ? ConvSiameseConfig{} : desk_conv_config(config.image_side);
        cfg.dropout_rate = config.train.dropout_rate;
        return build_conv_siamese<float>(cfg, rng);
    }
    ResidualSiameseConfig cfg =
        config.model_preset == "full" ? ResidualSiameseConfig{} : desk_residual_config(config.image_side);
    return build_residual_siamese<float>(cfg, rng);
}

namespace {

void echo_config(const RunConfig& config) {
    fs::create_directories(config.out_dir);
    std::ofstream out(fs::path(config.out_dir) / "config.json", std::ios::trunc);
    out << config.to_json().dump(2) << "\n";
}

}  // namespace

TrainArtifacts cmd_train(const RunConfig& config) {
    config.validate();
    echo_config(config);
    const DatasetManifest manifest = load_manifest(config.effective_manifest());
    const ImageCache cache = open_cache(config);
    const ImageStore store = ImageStore::from_cache(cache, manifest);

    const ClassSplit split = split_classes(manifest, config.n_train, Rng::derive(config.seed, 0x5911));
    SiameseModel<float> model = build_model(config, Rng::derive(config.seed, 0x1417));

    TrainConfig tc = config.train;
    tc.seed = Rng::derive(config.seed, 0x7217);
    tc.representation = config.representation;

    TrainArtifacts art;
    art.checkpoint_path = (fs::path(config.out_dir) / "best.ckpt").string();
    art.loss_csv_path = (fs::path(config.out_dir) / "loss.csv").string();
    art.result = train(model, manifest, split, store, tc, art.checkpoint_path);
    write_loss_csv(art.loss_csv_path, art.result.curve);
    return art;
}

EvalArtifacts cmd_eval(const RunConfig& config) {
    config.validate();
    echo_config(config);
    const DatasetManifest manifest = load_manifest(config.effective_manifest());
    const ImageCache cache = open_cache(config);
    const ImageStore store = ImageStore::from_cache(cache, manifest);
    const int n_test = static_cast<int>(manifest.classes.size()) - config.n_train;

    std::vector<BaselineComparison> reps;
    const auto runner = [&](int rep, uint64_t rep_seed) -> double {
        const ClassSplit split = split_classes(manifest, config.n_train, Rng::derive(rep_seed, 0x5911));
        SiameseModel<float> model = build_model(config, Rng::derive(rep_seed, 0x1417));
        TrainConfig tc = config.train;
        tc.seed = Rng::derive(rep_seed, 0x7217);
        tc.representation = config.representation;

        char ckpt_name[48];
        std::snprintf(ckpt_name, sizeof(ckpt_name), "rep%02d.ckpt", rep + 1);
        TrainResult tr =
            train(model, manifest, split, store, tc, (fs::path(config.out_dir) / ckpt_name).string());
        char loss_name[48];
        std::snprintf(loss_name, sizeof(loss_name), "loss_rep%02d.csv", rep + 1);
        write_loss_csv((fs::path(config.out_dir) / loss_name).string(), tr.curve);

        Rng eval_rng(Rng::derive(rep_seed, 0xe7a1));
        const BaselineComparison cmp = run_evaluation_with_baselines(model, manifest, split, store,
                                                                     config.n_way, config.trials, eval_rng);
        reps.push_back(cmp);
        return cmp.model_acc;
    };

    const auto [max_acc, mean_acc] = protocol_max_mean(runner, config.repetitions, config.seed);

    const auto aggregate = [&](auto pick) {
        double mx = 0.0, sum = 0.0;
        for (const auto& r : reps) {
            mx = std::max(mx, pick(r));
            sum += pick(r);
        }
        return std::pair<double, double>{mx, sum / reps.size()};
    };
    const auto [nn_max, nn_mean] = aggregate([](const BaselineComparison& r) { return r.nn_acc; });
    const auto [rand_max, rand_mean] = aggregate([](const BaselineComparison& r) { return r.random_acc; });

    EvalArtifacts art;
    const std::string repr = to_string(config.representation);
    art.rows.push_back({config.n_train, n_test, to_string(config.architecture), repr, config.repetitions,
                        config.trials, max_acc, mean_acc});
    art.rows.push_back({config.n_train, n_test, "nearest_neighbor", repr, config.repetitions, config.trials,
                        nn_max, nn_mean});
    art.rows.push_back({config.n_train, n_test, "random", repr, config.repetitions, config.trials, rand_max,
                        rand_mean});
    art.eval_csv_path = (fs::path(config.out_dir) / "eval.csv").string();
    write_eval_csv(art.eval_csv_path, art.rows);
    return art;
}

std::string cmd_report(const std::vector<std::string>& eval_csvs, const std::string& out_path,
                       const std::string& png_path) {
    if (eval_csvs.empty()) throw ConfigError("report: no input CSVs");
    std::vector<EvalRow> rows;
    for (const auto& path : eval_csvs) {
        auto part = read_eval_csv(path);
        rows.insert(rows.end(), part.begin(), part.end());
    }
    const std::string table = render_table(rows);
    if (!out_path.empty()) {
        std::ofstream out(out_path, std::ios::trunc);
        if (!out) throw DataError("report: cannot open " + out_path);
        out << table;
    }
    if (!png_path.empty()) write_bar_chart_png(png_path, rows);
    return table;
}

std::string cmd_model_info(const std::string& checkpoint_path) {
    const SiameseModel<float> model = load_checkpoint(checkpoint_path);
    std::ostringstream out;
    out << "architecture: " << to_string(model.arch) << "\n";
    out << "input: " << model.input_side << "x" << model.input_side << "x" << model.input_channels << "\n";
    out << "embedding dim: " << model.embedding_dim << "\n\n";
    char buf[128];
    for (std::size_t i = 0; i < model.params.size(); ++i) {
        std::string shape;
        for (std::size_t d = 0; d < model.params[i]->shape.size(); ++d) {
            if (d) shape += "x";
            shape += std::to_string(model.params[i]->shape[d]);
        }
        std::snprintf(buf, sizeof(buf), "  %-28s %-16s %12lld\n", model.param_names[i].c_str(), shape.c_str(),
                      static_cast<long long>(model.params[i]->size()));
        out << buf;
    }
    out << "\ntotal parameters: " << param_count(model) << "\n";
    return out.str();
}

void cmd_repro(RunConfig config, const std::vector<int>& split_grid, const std::string& out_dir) {
    config.validate();
    const DatasetManifest manifest = load_manifest(config.effective_manifest());

    std::vector<std::string> csvs;
    for (int n_train : split_grid) {
        if (n_train < 1 || n_train >= static_cast<int>(manifest.classes.size()))
            throw ConfigError("repro: split " + std::to_string(n_train) + " out of range for " +
                              std::to_string(manifest.classes.size()) + " classes");
        for (TfrKind repr : {TfrKind::Scalogram, TfrKind::Spectrogram}) {
            RunConfig rc = config;
            rc.representation = repr;
            rc.n_train = n_train;
            rc.out_dir = (fs::path(out_dir) / (to_string(repr) + "_train" + std::to_string(n_train))).string();
            cmd_tfr(rc);
            EvalArtifacts art = cmd_eval(rc);
            csvs.push_back(art.eval_csv_path);
            std::cout << "repro: finished " << to_string(repr) << " with " << n_train << " training sets\n";
        }
    }
    cmd_report(csvs, (fs::path(out_dir) / "report.txt").string());
}

}  // namespace ostb
