#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ostb/episodes.hpp"
#include "ostb/oneshot.hpp"
#include "ostb/report.hpp"
#include "ostb/tfr.hpp"

namespace ostb {

// Effective configuration of a run. Loaded from a JSON document; every CLI
// flag overrides one field. The echoed copy in the run directory is the
// provenance record.
struct RunConfig {
    uint64_t seed = 42;

    std::string dataset_root;   // <root>/<class>/*.wav
    std::string manifest_path;  // defaults to <dataset_root>/manifest.json
    std::string cache_root = "cache";
    std::string out_dir = "runs/run";

    TfrKind representation = TfrKind::Scalogram;
    Architecture architecture = Architecture::Conv;
    std::string model_preset = "desk";  // desk | full
    int image_side = 64;
    int quota = 20;

    MorseParams morse;
    StftParams stft;

    TrainConfig train;

    int n_train = 6;
    int n_way = 2;
    int trials = 400;
    int repetitions = 3;

    int jobs = 0;  // 0 = hardware concurrency

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::string& path);
    void validate() const;

    std::string effective_manifest() const;
    // Default learning rate depends on the architecture when the config
    // does not pin one explicitly.
    static double default_lr(Architecture arch);
};

// synth: writes <out>/<class>/<index>.wav for the 8 presets plus a manifest.
DatasetManifest cmd_synth(const std::string& out_dir, int clips_per_class, int rate, double duration_s,
                          uint64_t seed);

// ingest: scans an existing dataset tree and writes the manifest.
DatasetManifest cmd_ingest(const std::string& root, int quota, const std::string& manifest_path);

struct TfrStats {
    int computed = 0;
    int cache_hits = 0;
    std::string cache_dir;
};

// tfr: renders one cached image per manifest clip; idempotent per digest.
TfrStats cmd_tfr(const RunConfig& config);

struct TrainArtifacts {
    std::string checkpoint_path;
    std::string loss_csv_path;
    TrainResult result;
};

TrainArtifacts cmd_train(const RunConfig& config);

struct EvalArtifacts {
    std::string eval_csv_path;
    std::vector<EvalRow> rows;
};

// eval: protocol_max_mean over `repetitions` full train+eval runs; emits the
// network row plus nearest-neighbor and random baseline rows on the same
// trials.
EvalArtifacts cmd_eval(const RunConfig& config);

// report: renders the text grid (and optionally a bar chart) from eval CSVs.
std::string cmd_report(const std::vector<std::string>& eval_csvs, const std::string& out_path,
                       const std::string& png_path = "");

std::string cmd_model_info(const std::string& checkpoint_path);

// repro: the full published protocol on a user-supplied corpus: splits over
// the class grid, ten repetitions each, both representations. Accuracy
// values are reported, never asserted.
void cmd_repro(RunConfig config, const std::vector<int>& split_grid, const std::string& out_dir);

// Build the configured model at the configured scale.
SiameseModel<float> build_model(const RunConfig& config, uint64_t seed);

ImageCache open_cache(const RunConfig& config);

}  // namespace ostb
