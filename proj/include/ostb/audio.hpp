#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ostb/rng.hpp"

namespace ostb {

// Mono audio excerpt. Samples live in [-1, 1] once loaded/synthesized.
struct AudioClip {
    std::vector<double> samples;
    int sample_rate = 0;
    std::string label;      // class name, empty when unknown
    std::string source_id;  // path or synthetic identifier

    double duration_s() const {
        return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }
};

// RIFF/PCM WAV reader. Accepts 8/16/24-bit integer and 32-bit float payloads,
// 1-2 channels; stereo is averaged to mono and integer samples are scaled to
// [-1, 1].
AudioClip load_wav(const std::string& path);

// 16-bit PCM mono writer.
void write_wav_16(const std::string& path, const AudioClip& clip);

// Band-limited resampling via a 64-tap Kaiser-windowed (beta = 8.6) sinc
// kernel. Output length = round(len * target / source).
AudioClip resample(const AudioClip& clip, int target_rate);

// Class-balanced catalog of a dataset laid out as <root>/<class>/*.wav.
struct DatasetManifest {
    std::vector<std::string> classes;                              // lexicographic
    std::map<std::string, std::vector<std::string>> entries;      // class -> paths
    int per_class_quota = 0;
};

// Scans root_dir, selecting exactly per_class_quota files per class
// (lexicographic order, so the manifest is reproducible without a seed).
DatasetManifest build_manifest(const std::string& root_dir, int per_class_quota);

void save_manifest(const std::string& path, const DatasetManifest& m);
DatasetManifest load_manifest(const std::string& path);

// Additive-synthesis stand-in for an instrument class: harmonic amplitude
// profile, ADSR envelope, vibrato as frequency modulation, noise floor.
struct SynthClassSpec {
    std::string name;
    double fundamental_hz = 220.0;           // preset reference note
    std::vector<double> harmonic_amplitudes; // index 0 = fundamental
    double attack_s = 0.01;
    double decay_s = 0.05;
    double sustain_level = 0.8;
    double release_s = 0.1;
    double vibrato_rate_hz = 0.0;
    double vibrato_depth_cents = 0.0;
    double noise_floor = 0.0;
};

// Eight fixed presets with distinct harmonic profiles and envelopes.
const std::vector<SynthClassSpec>& synth_presets();

AudioClip synth_instrument(const SynthClassSpec& spec, double note_hz, double duration_s,
                           int rate, uint64_t seed);

}  // namespace ostb
