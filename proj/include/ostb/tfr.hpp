#pragma once

#include <string>
#include <vector>

#include "ostb/audio.hpp"

namespace ostb {

// Generalized Morse wavelet family: frequency response proportional to
// w^beta * exp(-w^gamma) on w > 0, zero elsewhere. Defaults follow the
// common analytic-CWT configuration (time-bandwidth 60).
struct MorseParams {
    double beta = 20.0;
    double gamma = 3.0;
    int voices_per_octave = 10;

    void validate() const;
    // Peak angular frequency of the unscaled response, (beta/gamma)^(1/gamma).
    double peak_omega() const;
    std::string digest_string() const;
};

// One analytic wavelet response per scale, sampled on the FFT grid of
// length n_fft = next_pow2(n_samples). Responses are exactly zero at DC and
// at every negative-frequency bin, and have unit peak magnitude.
struct MorseFilterBank {
    std::size_t n_fft = 0;
    int sample_rate = 0;
    std::vector<double> center_freqs_hz;        // ascending, one per scale
    std::vector<std::vector<double>> responses; // responses[s][k], k in [0, n_fft)
};

MorseFilterBank morse_filter_bank(const MorseParams& params, std::size_t n_samples, int rate);

enum class TfrKind { Scalogram, Spectrogram };

std::string to_string(TfrKind kind);
TfrKind tfr_kind_from_string(const std::string& s);

// Magnitude time-frequency matrix: rows are scales/bins (ascending
// frequency), columns are time frames.
struct TfrMatrix {
    std::vector<double> magnitudes;  // rows * cols, row-major
    std::size_t rows = 0, cols = 0;
    std::vector<double> scale_axis_hz;  // per-row center frequency, ascending
    std::vector<double> time_axis_s;    // per-column time
    TfrKind kind = TfrKind::Scalogram;

    double at(std::size_t r, std::size_t c) const { return magnitudes[r * cols + c]; }
    double& at(std::size_t r, std::size_t c) { return magnitudes[r * cols + c]; }
};

// FFT-path CWT: forward FFT of the zero-mean signal, per-scale multiply by
// the conjugated wavelet response, inverse FFT, complex magnitude.
TfrMatrix cwt_scalogram(const AudioClip& clip, const MorseParams& params);

// Hann-windowed one-sided magnitude STFT;
// frames = floor((len - window_len) / hop) + 1.
TfrMatrix stft_spectrogram(const AudioClip& clip, std::size_t window_len, std::size_t hop);

struct StftParams {
    std::size_t window_len = 256;
    std::size_t hop = 64;
    std::string digest_string() const;
};

// Rendered network input: side x side grayscale replicated into three
// identical channels when materialized. Row 0 of the plane is the lowest
// frequency row of the source matrix.
struct TfrImage {
    int side = 224;
    std::vector<float> gray;  // side * side, values in [0, 1]
    std::string source_id;
    std::string kind;
    std::string params_digest;

    float pixel(int y, int x, int /*channel*/) const { return gray[static_cast<std::size_t>(y) * side + x]; }
};

// Gain-normalize -> log-compress (log(1 + m / 1e-8)) -> min-max to [0, 1]
// (degenerate matrices map to all-zeros) -> bilinear resize with half-pixel
// centers. Invariant to positive rescaling of the input matrix.
TfrImage render_image(const TfrMatrix& matrix, int side = 224);

// Stable identifier for a (kind, transform params, image side) combination;
// keys the on-disk cache.
std::string tfr_digest(TfrKind kind, const MorseParams& morse, const StftParams& stft, int side);

}  // namespace ostb
