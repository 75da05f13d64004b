#include "ostb/tfr.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "ostb/errors.hpp"
#include "ostb/fft.hpp"

namespace ostb {

void MorseParams::validate() const {
    if (beta <= 0.0 || gamma <= 0.0) throw ConfigError("MorseParams: beta and gamma must be positive");
    if (beta * gamma < 1.0) throw ConfigError("MorseParams: beta*gamma must be >= 1");
    if (voices_per_octave < 4) throw ConfigError("MorseParams: voices_per_octave must be >= 4");
}

double MorseParams::peak_omega() const { return std::pow(beta / gamma, 1.0 / gamma); }

std::string MorseParams::digest_string() const {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "morse|beta=%.9g|gamma=%.9g|voices=%d", beta, gamma, voices_per_octave);
    return buf;
}

std::string StftParams::digest_string() const {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "stft|window=%zu|hop=%zu", window_len, hop);
    return buf;
}

std::string to_string(TfrKind kind) { return kind == TfrKind::Scalogram ? "scalogram" : "spectrogram"; }

TfrKind tfr_kind_from_string(const std::string& s) {
    if (s == "scalogram") return TfrKind::Scalogram;
    if (s == "spectrogram") return TfrKind::Spectrogram;
    throw ConfigError("unknown representation '" + s + "' (expected scalogram|spectrogram)");
}

namespace {

// Normalized magnitude of the Morse response at angular frequency x, with
// unit peak at x = peak. Evaluated in log space so large beta cannot
// overflow.
double morse_mag(double x, double beta, double gamma, double peak) {
    if (x <= 0.0) return 0.0;
    const double log_peak_val = beta * std::log(peak) - std::pow(peak, gamma);
    return std::exp(beta * std::log(x) - std::pow(x, gamma) - log_peak_val);
}

}  // namespace

MorseFilterBank morse_filter_bank(const MorseParams& params, std::size_t n_samples, int rate) {
    params.validate();
    if (rate <= 0) throw DataError("morse_filter_bank: rate must be positive");
    if (n_samples < 64) throw DataError("morse_filter_bank: need at least 64 samples, got " + std::to_string(n_samples));

    const double duration = static_cast<double>(n_samples) / rate;
    const double f_high = 0.45 * rate;
    // Lower bound: at least 4 cycles in the clip, and the wavelet's time
    // footprint (~sqrt(beta*gamma) periods) must fit inside it.
    const double f_low = std::max(4.0 / duration, std::sqrt(params.beta * params.gamma) / duration);
    if (f_high / f_low < 2.0)
        throw DataError("morse_filter_bank: clip too short to fit one octave (" + std::to_string(n_samples) +
                        " samples at " + std::to_string(rate) + " Hz)");

    const int voices = params.voices_per_octave;
    const int n_scales = static_cast<int>(std::floor(voices * std::log2(f_high / f_low))) + 1;

    MorseFilterBank bank;
    bank.n_fft = next_pow2(n_samples);
    bank.sample_rate = rate;
    bank.center_freqs_hz.resize(n_scales);
    bank.responses.resize(n_scales);

    const double peak = params.peak_omega();
    const std::size_t n_fft = bank.n_fft;
    const std::size_t n_pos = n_fft / 2;  // positive-frequency bins 1..n_fft/2

    for (int s = 0; s < n_scales; ++s) {
        // Ascending frequency: row 0 is the lowest scale.
        const double fc = f_high * std::pow(2.0, -static_cast<double>(n_scales - 1 - s) / voices);
        bank.center_freqs_hz[s] = fc;

        const double scale = peak / (2.0 * M_PI * fc);  // maps fc to the response peak
        std::vector<double>& r = bank.responses[s];
        r.assign(n_fft, 0.0);
        for (std::size_t k = 1; k <= n_pos; ++k) {
            const double omega = 2.0 * M_PI * static_cast<double>(k) * rate / static_cast<double>(n_fft);
            r[k] = morse_mag(scale * omega, params.beta, params.gamma, peak);
        }
        // DC and negative-frequency bins stay exactly zero (analyticity).
    }
    return bank;
}

TfrMatrix cwt_scalogram(const AudioClip& clip, const MorseParams& params) {
    if (clip.samples.empty()) throw DataError("cwt_scalogram: empty clip");
    const MorseFilterBank bank = morse_filter_bank(params, clip.samples.size(), clip.sample_rate);

    const std::size_t n = clip.samples.size();
    const std::size_t n_fft = bank.n_fft;

    double mean = 0.0;
    for (double s : clip.samples) mean += s;
    mean /= static_cast<double>(n);

    std::vector<cdouble> spectrum(n_fft, cdouble(0.0, 0.0));
    for (std::size_t i = 0; i < n; ++i) spectrum[i] = cdouble(clip.samples[i] - mean, 0.0);
    fft_inplace(spectrum, false);

    TfrMatrix m;
    m.kind = TfrKind::Scalogram;
    m.rows = bank.responses.size();
    m.cols = n;
    m.scale_axis_hz = bank.center_freqs_hz;
    m.time_axis_s.resize(n);
    for (std::size_t i = 0; i < n; ++i) m.time_axis_s[i] = static_cast<double>(i) / clip.sample_rate;
    m.magnitudes.resize(m.rows * m.cols);

    std::vector<cdouble> work(n_fft);
    for (std::size_t s = 0; s < m.rows; ++s) {
        const std::vector<double>& r = bank.responses[s];
        for (std::size_t k = 0; k < n_fft; ++k) work[k] = spectrum[k] * r[k];  // response is real
        fft_inplace(work, true);
        double* row = &m.magnitudes[s * m.cols];
        for (std::size_t i = 0; i < n; ++i) row[i] = std::abs(work[i]);
    }
    return m;
}

TfrMatrix stft_spectrogram(const AudioClip& clip, std::size_t window_len, std::size_t hop) {
    const std::size_t n = clip.samples.size();
    if (n == 0) throw DataError("stft_spectrogram: empty clip");
    if (hop == 0 || hop > window_len) throw DataError("stft_spectrogram: need 0 < hop <= window_len");
    if (window_len > n) throw DataError("stft_spectrogram: window longer than clip");

    const std::size_t frames = (n - window_len) / hop + 1;
    const std::size_t bins = window_len / 2 + 1;

    std::vector<double> window(window_len);
    for (std::size_t i = 0; i < window_len; ++i)
        window[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(window_len));

    TfrMatrix m;
    m.kind = TfrKind::Spectrogram;
    m.rows = bins;
    m.cols = frames;
    m.scale_axis_hz.resize(bins);
    for (std::size_t k = 0; k < bins; ++k)
        m.scale_axis_hz[k] = static_cast<double>(k) * clip.sample_rate / static_cast<double>(window_len);
    m.time_axis_s.resize(frames);
    m.magnitudes.resize(bins * frames);

    const bool pow2 = is_pow2(window_len);
    std::vector<cdouble> frame(window_len);
    for (std::size_t f = 0; f < frames; ++f) {
        const std::size_t start = f * hop;
        m.time_axis_s[f] = (static_cast<double>(start) + window_len / 2.0) / clip.sample_rate;
        for (std::size_t i = 0; i < window_len; ++i)
            frame[i] = cdouble(clip.samples[start + i] * window[i], 0.0);
        std::vector<cdouble> spec = pow2 ? fft(frame) : dft_naive(frame, false);
        for (std::size_t k = 0; k < bins; ++k) m.at(k, f) = std::abs(spec[k]);
    }
    return m;
}

TfrImage render_image(const TfrMatrix& matrix, int side) {
    if (matrix.rows == 0 || matrix.cols == 0) throw DataError("render_image: empty matrix");
    if (side < 2) throw ConfigError("render_image: side must be >= 2");

    constexpr double kEps = 1e-8;
    const std::size_t count = matrix.rows * matrix.cols;

    double peak = 0.0;
    for (std::size_t i = 0; i < count; ++i) peak = std::max(peak, matrix.magnitudes[i]);

    TfrImage img;
    img.side = side;
    img.kind = to_string(matrix.kind);
    img.gray.assign(static_cast<std::size_t>(side) * side, 0.0f);
    if (peak <= 0.0) return img;  // all-zero matrix -> all-zero image

    // Gain-normalize before the log so the rendered image is invariant to
    // positive rescaling of the magnitudes, then compress and min-max.
    std::vector<double> v(count);
    double vmin = std::numeric_limits<double>::infinity(), vmax = -vmin;
    for (std::size_t i = 0; i < count; ++i) {
        v[i] = std::log1p(matrix.magnitudes[i] / peak / kEps);
        vmin = std::min(vmin, v[i]);
        vmax = std::max(vmax, v[i]);
    }
    if (vmax <= vmin) return img;  // all-equal matrix -> all-zeros
    const double inv_range = 1.0 / (vmax - vmin);
    for (std::size_t i = 0; i < count; ++i) v[i] = (v[i] - vmin) * inv_range;

    // Bilinear resize with half-pixel centers.
    const double sy_scale = static_cast<double>(matrix.rows) / side;
    const double sx_scale = static_cast<double>(matrix.cols) / side;
    for (int y = 0; y < side; ++y) {
        double sy = (y + 0.5) * sy_scale - 0.5;
        sy = std::clamp(sy, 0.0, static_cast<double>(matrix.rows - 1));
        const std::size_t y0 = static_cast<std::size_t>(sy);
        const std::size_t y1 = std::min(y0 + 1, matrix.rows - 1);
        const double fy = sy - static_cast<double>(y0);
        for (int x = 0; x < side; ++x) {
            double sx = (x + 0.5) * sx_scale - 0.5;
            sx = std::clamp(sx, 0.0, static_cast<double>(matrix.cols - 1));
            const std::size_t x0 = static_cast<std::size_t>(sx);
            const std::size_t x1 = std::min(x0 + 1, matrix.cols - 1);
            const double fx = sx - static_cast<double>(x0);
            const double top = v[y0 * matrix.cols + x0] * (1.0 - fx) + v[y0 * matrix.cols + x1] * fx;
            const double bot = v[y1 * matrix.cols + x0] * (1.0 - fx) + v[y1 * matrix.cols + x1] * fx;
            img.gray[static_cast<std::size_t>(y) * side + x] = static_cast<float>(top * (1.0 - fy) + bot * fy);
        }
    }
    return img;
}

std::string tfr_digest(TfrKind kind, const MorseParams& morse, const StftParams& stft, int side) {
    std::string desc = to_string(kind) + "|" +
                       (kind == TfrKind::Scalogram ? morse.digest_string() : stft.digest_string()) +
                       "|side=" + std::to_string(side);
    // FNV-1a 64.
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : desc) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace ostb
