#include "ostb/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ostb/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ostb {

namespace {

uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint16_t read_u16(std::istream& in) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

void write_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff), static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<char*>(b), 4);
}

void write_u16(std::ostream& out, uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>((v >> 8) & 0xff)};
    out.write(reinterpret_cast<char*>(b), 2);
}

// Zeroth-order modified Bessel function, power series.
double bessel_i0(double x) {
    double sum = 1.0, term = 1.0;
    const double half_x = x / 2.0;
    for (int k = 1; k <= 32; ++k) {
        term *= (half_x / k) * (half_x / k);
        sum += term;
        if (term < 1e-16 * sum) break;
    }
    return sum;
}

}  // namespace

AudioClip load_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("load_wav: cannot open " + path);

    char tag[4];
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "RIFF", 4) != 0) throw DataError("load_wav: not a RIFF file: " + path);
    read_u32(in);  // chunk size
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "WAVE", 4) != 0) throw DataError("load_wav: not a WAVE file: " + path);

    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t rate = 0;
    std::vector<char> payload;
    bool got_fmt = false, got_data = false;

    while (in && !(got_fmt && got_data)) {
        in.read(tag, 4);
        if (!in) break;
        uint32_t size = read_u32(in);
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            format = read_u16(in);
            channels = read_u16(in);
            rate = read_u32(in);
            read_u32(in);  // byte rate
            read_u16(in);  // block align
            bits = read_u16(in);
            if (size > 16) in.seekg(size - 16, std::ios::cur);
            got_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            payload.resize(size);
            in.read(payload.data(), size);
            if (static_cast<uint32_t>(in.gcount()) != size)
                throw DataError("load_wav: truncated data chunk in " + path);
            got_data = true;
        } else {
            in.seekg(size + (size & 1), std::ios::cur);
        }
    }
    if (!got_fmt || !got_data) throw DataError("load_wav: missing fmt/data chunk in " + path);
    if (payload.empty()) throw DataError("load_wav: zero-length payload in " + path);
    if (channels < 1 || channels > 2)
        throw DataError("load_wav: unsupported channel count " + std::to_string(channels) + " in " + path);
    if (rate == 0) throw DataError("load_wav: zero sample rate in " + path);

    const bool is_float = (format == 3);
    if (!is_float && format != 1) throw DataError("load_wav: unsupported format tag " + std::to_string(format) + " in " + path);
    if (is_float && bits != 32) throw DataError("load_wav: float WAV must be 32-bit in " + path);
    if (!is_float && bits != 8 && bits != 16 && bits != 24)
        throw DataError("load_wav: unsupported bit depth " + std::to_string(bits) + " in " + path);

    const int bytes_per = bits / 8;
    const std::size_t frames = payload.size() / (static_cast<std::size_t>(bytes_per) * channels);
    if (frames == 0) throw DataError("load_wav: zero-length payload in " + path);

    AudioClip clip;
    clip.sample_rate = static_cast<int>(rate);
    clip.source_id = path;
    clip.samples.resize(frames);

    const unsigned char* p = reinterpret_cast<const unsigned char*>(payload.data());
    for (std::size_t f = 0; f < frames; ++f) {
        double acc = 0.0;
        for (int c = 0; c < channels; ++c) {
            const unsigned char* s = p + (f * channels + c) * bytes_per;
            double v;
            if (is_float) {
                float fv;
                std::memcpy(&fv, s, 4);
                v = fv;
            } else if (bits == 8) {
                v = (static_cast<int>(s[0]) - 128) / 128.0;  // 8-bit WAV is unsigned
            } else if (bits == 16) {
                const int16_t iv = static_cast<int16_t>(s[0] | (s[1] << 8));
                v = iv / 32768.0;
            } else {  // 24-bit
                int32_t iv = s[0] | (s[1] << 8) | (s[2] << 16);
                if (iv & 0x800000) iv |= ~0xffffff;
                v = iv / 8388608.0;
            }
            acc += v;
        }
        clip.samples[f] = acc / channels;
    }
    return clip;
}

void write_wav_16(const std::string& path, const AudioClip& clip) {
    if (clip.samples.empty()) throw DataError("write_wav_16: empty clip");
    if (clip.sample_rate <= 0) throw DataError("write_wav_16: invalid sample rate");

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("write_wav_16: cannot open " + path);

    const uint32_t data_bytes = static_cast<uint32_t>(clip.samples.size() * 2);
    out.write("RIFF", 4);
    write_u32(out, 36 + data_bytes);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    write_u32(out, 16);
    write_u16(out, 1);  // PCM
    write_u16(out, 1);  // mono
    write_u32(out, static_cast<uint32_t>(clip.sample_rate));
    write_u32(out, static_cast<uint32_t>(clip.sample_rate) * 2);
    write_u16(out, 2);
    write_u16(out, 16);
    out.write("data", 4);
    write_u32(out, data_bytes);
    for (double s : clip.samples) {
        double v = std::clamp(s, -1.0, 1.0) * 32768.0;
        int iv = static_cast<int>(std::lround(v));
        iv = std::clamp(iv, -32768, 32767);
        write_u16(out, static_cast<uint16_t>(static_cast<int16_t>(iv)));
    }
    if (!out) throw DataError("write_wav_16: write failed for " + path);
}

AudioClip resample(const AudioClip& clip, int target_rate) {
    if (target_rate <= 0) throw DataError("resample: target rate must be positive");
    if (clip.samples.empty()) throw DataError("resample: empty clip");
    if (target_rate == clip.sample_rate) {
        AudioClip out = clip;
        return out;
    }

    const double ratio = static_cast<double>(target_rate) / clip.sample_rate;
    const std::size_t out_len =
        static_cast<std::size_t>(std::llround(static_cast<double>(clip.samples.size()) * ratio));

    constexpr int kTaps = 64;
    constexpr double kBeta = 8.6;
    const double i0_beta = bessel_i0(kBeta);
    // When downsampling, cut below the new Nyquist; slight rolloff keeps the
    // transition band inside the kernel's reach.
    const double cutoff = 0.97 * std::min(1.0, ratio);

    AudioClip out;
    out.sample_rate = target_rate;
    out.label = clip.label;
    out.source_id = clip.source_id;
    out.samples.resize(out_len);

    const int half = kTaps / 2;
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(clip.samples.size());
    for (std::size_t i = 0; i < out_len; ++i) {
        const double center = static_cast<double>(i) / ratio;  // position in source samples
        const std::ptrdiff_t k0 = static_cast<std::ptrdiff_t>(std::floor(center)) - half + 1;
        double acc = 0.0;
        for (std::ptrdiff_t k = k0; k < k0 + kTaps; ++k) {
            if (k < 0 || k >= n) continue;
            const double t = static_cast<double>(k) - center;  // in source-sample units
            const double x = M_PI * t * cutoff;
            const double sinc = (std::abs(x) < 1e-12) ? 1.0 : std::sin(x) / x;
            const double u = t / half;
            if (u <= -1.0 || u >= 1.0) continue;
            const double win = bessel_i0(kBeta * std::sqrt(1.0 - u * u)) / i0_beta;
            acc += clip.samples[k] * sinc * cutoff * win;
        }
        out.samples[i] = acc;
    }
    return out;
}

DatasetManifest build_manifest(const std::string& root_dir, int per_class_quota) {
    if (per_class_quota <= 0) throw ConfigError("build_manifest: quota must be positive");
    if (!fs::is_directory(root_dir)) throw DataError("build_manifest: not a directory: " + root_dir);

    DatasetManifest m;
    m.per_class_quota = per_class_quota;

    std::vector<std::string> class_dirs;
    for (const auto& e : fs::directory_iterator(root_dir))
        if (e.is_directory()) class_dirs.push_back(e.path().filename().string());
    std::sort(class_dirs.begin(), class_dirs.end());
    if (class_dirs.empty()) throw DataError("build_manifest: no class directories under " + root_dir);

    for (const auto& cls : class_dirs) {
        std::vector<std::string> files;
        for (const auto& e : fs::directory_iterator(fs::path(root_dir) / cls)) {
            if (!e.is_regular_file()) continue;
            auto ext = e.path().extension().string();
            std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
            if (ext == ".wav") files.push_back((fs::path(cls) / e.path().filename()).generic_string());
        }
        std::sort(files.begin(), files.end());
        if (static_cast<int>(files.size()) < per_class_quota)
            throw DataError("build_manifest: class '" + cls + "' has " + std::to_string(files.size()) +
                            " files, quota is " + std::to_string(per_class_quota));
        files.resize(per_class_quota);
        m.classes.push_back(cls);
        m.entries[cls] = std::move(files);
    }
    return m;
}

void save_manifest(const std::string& path, const DatasetManifest& m) {
    json j;
    j["classes"] = m.classes;
    j["quota"] = m.per_class_quota;
    j["entries"] = m.entries;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("save_manifest: cannot open " + path);
    out << j.dump(2) << "\n";
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_manifest: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("load_manifest: bad JSON in " + path + ": " + e.what());
    }
    DatasetManifest m;
    m.classes = j.at("classes").get<std::vector<std::string>>();
    m.per_class_quota = j.at("quota").get<int>();
    m.entries = j.at("entries").get<std::map<std::string, std::vector<std::string>>>();
    for (const auto& cls : m.classes) {
        auto it = m.entries.find(cls);
        if (it == m.entries.end() || static_cast<int>(it->second.size()) != m.per_class_quota)
            throw DataError("load_manifest: class '" + cls + "' does not match quota in " + path);
    }
    return m;
}

const std::vector<SynthClassSpec>& synth_presets() {
    static const std::vector<SynthClassSpec> presets = {
        // Near-pure sustained tone, organ-like.
        {"organ_pure", 220.0, {1.0, 0.08}, 0.02, 0.05, 0.92, 0.08, 0.0, 0.0, 0.002},
        // Breathy tone, soft onset, moderate vibrato.
        {"flute_breathy", 220.0, {1.0, 0.35, 0.12}, 0.09, 0.04, 0.85, 0.10, 5.0, 18.0, 0.015},
        // Odd-harmonic reed profile.
        {"reed_odd", 220.0, {1.0, 0.02, 0.62, 0.02, 0.40, 0.02, 0.25}, 0.03, 0.06, 0.85, 0.08, 0.0, 0.0, 0.004},
        // Bright brass: energy peaks above the fundamental.
        {"brass_bright", 220.0, {0.65, 1.0, 0.92, 0.78, 0.62, 0.50, 0.40, 0.32}, 0.05, 0.05, 0.88, 0.09, 6.0, 12.0, 0.006},
        // Sawtooth-flavored bowed string with wide vibrato.
        {"string_saw", 220.0, {1.0, 0.50, 0.33, 0.25, 0.20, 0.17, 0.14, 0.125, 0.11, 0.10}, 0.06, 0.05, 0.85, 0.10, 5.5, 28.0, 0.005},
        // Plucked string: instant attack, long decay to a quiet tail.
        {"pluck_decay", 220.0, {1.0, 0.60, 0.42, 0.28, 0.18}, 0.004, 0.45, 0.12, 0.20, 0.0, 0.0, 0.003},
        // Bell-like sparse partials, percussive onset.
        {"bell_sparse", 220.0, {1.0, 0.0, 0.0, 0.75, 0.0, 0.0, 0.45}, 0.002, 0.55, 0.18, 0.15, 0.0, 0.0, 0.003},
        // Dark two-partial tone with slow, deep vibrato.
        {"sub_dark", 220.0, {1.0, 0.15}, 0.04, 0.05, 0.90, 0.10, 3.0, 45.0, 0.004},
    };
    return presets;
}

AudioClip synth_instrument(const SynthClassSpec& spec, double note_hz, double duration_s,
                           int rate, uint64_t seed) {
    if (duration_s <= 0.0) throw DataError("synth_instrument: duration must be positive");
    if (rate <= 0) throw DataError("synth_instrument: rate must be positive");
    if (note_hz <= 0.0) throw DataError("synth_instrument: note frequency must be positive");
    const double nyquist = rate / 2.0;
    for (std::size_t h = 0; h < spec.harmonic_amplitudes.size(); ++h) {
        if (spec.harmonic_amplitudes[h] != 0.0 && note_hz * static_cast<double>(h + 1) >= nyquist)
            throw DataError("synth_instrument: harmonic " + std::to_string(h + 1) + " of " +
                            std::to_string(note_hz) + " Hz aliases at rate " + std::to_string(rate));
    }

    const std::size_t n = static_cast<std::size_t>(std::llround(duration_s * rate));
    AudioClip clip;
    clip.sample_rate = rate;
    clip.label = spec.name;
    clip.samples.assign(n, 0.0);

    Rng rng(seed);
    const double dt = 1.0 / rate;
    const std::size_t n_harm = spec.harmonic_amplitudes.size();

    // Vibrato modulates the fundamental; harmonics track it. Phase is
    // accumulated per sample so the modulation integrates exactly.
    std::vector<double> phase(n_harm, 0.0);
    const double depth = spec.vibrato_depth_cents / 1200.0;

    const double release_start = std::max(0.0, duration_s - spec.release_s);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = i * dt;
        const double mod = (spec.vibrato_rate_hz > 0.0)
                               ? std::pow(2.0, depth * std::sin(2.0 * M_PI * spec.vibrato_rate_hz * t))
                               : 1.0;
        const double f0 = note_hz * mod;

        double env;
        if (t < spec.attack_s) {
            env = t / spec.attack_s;
        } else if (t < spec.attack_s + spec.decay_s) {
            const double u = (t - spec.attack_s) / spec.decay_s;
            env = 1.0 + u * (spec.sustain_level - 1.0);
        } else {
            env = spec.sustain_level;
        }
        if (t > release_start && spec.release_s > 0.0) {
            const double u = (t - release_start) / spec.release_s;
            env *= std::max(0.0, 1.0 - u);
        }

        double v = 0.0;
        for (std::size_t h = 0; h < n_harm; ++h) {
            if (spec.harmonic_amplitudes[h] == 0.0) continue;
            phase[h] += 2.0 * M_PI * f0 * static_cast<double>(h + 1) * dt;
            v += spec.harmonic_amplitudes[h] * std::sin(phase[h]);
        }
        v *= env;
        if (spec.noise_floor > 0.0) v += spec.noise_floor * (2.0 * rng.uniform() - 1.0);
        clip.samples[i] = v;
    }

    double peak = 0.0;
    for (double s : clip.samples) peak = std::max(peak, std::abs(s));
    if (peak > 0.0) {
        const double g = 0.9 / peak;
        for (double& s : clip.samples) s *= g;
    }
    return clip;
}

}  // namespace ostb
