#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ostb/errors.hpp"
#include "ostb/fft.hpp"
#include "ostb/image_io.hpp"
#include "ostb/rng.hpp"
#include "ostb/tfr.hpp"

using namespace ostb;
namespace fs = std::filesystem;

namespace {

AudioClip tone(double hz, int rate, double seconds) {
    AudioClip c;
    c.sample_rate = rate;
    c.samples.resize(static_cast<std::size_t>(seconds * rate));
    for (std::size_t i = 0; i < c.samples.size(); ++i) c.samples[i] = std::sin(2.0 * M_PI * hz * i / rate);
    return c;
}

}  // namespace

TEST_CASE("morse responses are exactly zero at DC and negative frequencies") {
    MorseParams params;
    const MorseFilterBank bank = morse_filter_bank(params, 512, 8000);
    REQUIRE(!bank.responses.empty());
    for (const auto& r : bank.responses) {
        CHECK(r[0] == 0.0);
        for (std::size_t k = bank.n_fft / 2 + 1; k < bank.n_fft; ++k) CHECK(r[k] == 0.0);
    }
}

TEST_CASE("morse peak frequency matches a numerical maximization") {
    // Oracle: maximize w^beta * exp(-w^gamma) on a fine grid.
    const double beta = 20.0, gamma = 3.0;
    double best_w = 0.0, best_v = -1e300;
    for (double w = 0.5; w < 4.0; w += 1e-5) {
        const double v = beta * std::log(w) - std::pow(w, gamma);
        if (v > best_v) {
            best_v = v;
            best_w = w;
        }
    }
    MorseParams params;
    CHECK(params.peak_omega() == doctest::Approx(best_w).epsilon(1e-4));
    CHECK(params.peak_omega() == doctest::Approx(1.8821).epsilon(1e-3));
}

TEST_CASE("each response peaks at its scale's mapped frequency") {
    MorseParams params;
    const int rate = 8000;
    const MorseFilterBank bank = morse_filter_bank(params, 8000, rate);
    const double bin_hz = static_cast<double>(rate) / bank.n_fft;
    for (std::size_t s = 0; s < bank.responses.size(); s += 7) {
        const auto& r = bank.responses[s];
        std::size_t best = 0;
        for (std::size_t k = 0; k <= bank.n_fft / 2; ++k)
            if (r[k] > r[best]) best = k;
        const double peak_hz = best * bin_hz;
        CHECK(std::abs(peak_hz - bank.center_freqs_hz[s]) <= bin_hz + 1e-9);
        // Unit-peak normalization, sampled on the bin grid (the lowest
        // scales sit between bins).
        CHECK(r[best] <= 1.0 + 1e-12);
        CHECK(r[best] > 0.9);
    }
}

TEST_CASE("doubling voices_per_octave doubles the scale count within one") {
    MorseParams p10;
    p10.voices_per_octave = 10;
    MorseParams p20;
    p20.voices_per_octave = 20;
    const auto b10 = morse_filter_bank(p10, 4096, 8000);
    const auto b20 = morse_filter_bank(p20, 4096, 8000);
    const int n10 = static_cast<int>(b10.responses.size());
    const int n20 = static_cast<int>(b20.responses.size());
    CHECK(std::abs(n20 - 2 * n10) <= 1);
}

TEST_CASE("filter bank rejects clips that cannot fit an octave") {
    MorseParams params;
    CHECK_THROWS_AS(morse_filter_bank(params, 32, 8000), DataError);  // below 64 samples
    MorseParams wide;  // large time-bandwidth pushes f_low above f_high/2
    wide.beta = 200.0;
    CHECK_THROWS_AS(morse_filter_bank(wide, 80, 8000), DataError);
}

TEST_CASE("cwt of silence is identically zero") {
    AudioClip clip;
    clip.sample_rate = 8000;
    clip.samples.assign(2048, 0.0);
    const TfrMatrix m = cwt_scalogram(clip, MorseParams{});
    for (double v : m.magnitudes) CHECK(v == 0.0);
}

TEST_CASE("440 Hz tone: scalogram ridge within 5% over the middle 80% of frames") {
    const AudioClip clip = tone(440.0, 8000, 1.0);
    const TfrMatrix m = cwt_scalogram(clip, MorseParams{});

    const std::size_t lo = m.cols / 10, hi = m.cols - m.cols / 10;
    for (std::size_t c = lo; c < hi; ++c) {
        std::size_t best = 0;
        for (std::size_t r = 1; r < m.rows; ++r)
            if (m.at(r, c) > m.at(best, c)) best = r;
        const double f = m.scale_axis_hz[best];
        CHECK(std::abs(f - 440.0) / 440.0 <= 0.05);
    }
}

TEST_CASE("unit impulse localizes in time on every usable row") {
    AudioClip clip;
    clip.sample_rate = 8000;
    clip.samples.assign(8000, 0.0);
    const std::size_t impulse_at = 4000;
    clip.samples[impulse_at] = 1.0;
    MorseParams params;
    const TfrMatrix m = cwt_scalogram(clip, params);

    for (std::size_t r = 0; r < m.rows; ++r) {
        const double fc = m.scale_axis_hz[r];
        if (fc < 100.0) continue;  // support wider than the clip margin
        std::size_t best = 0;
        for (std::size_t c = 1; c < m.cols; ++c)
            if (m.at(r, c) > m.at(r, best)) best = c;
        const double support_samples = std::sqrt(params.beta * params.gamma) / fc * clip.sample_rate;
        CHECK(std::abs(static_cast<double>(best) - static_cast<double>(impulse_at)) <= support_samples);
    }
}

TEST_CASE("fft-path cwt matches a direct time-domain convolution oracle") {
    const int rate = 8000;
    const std::size_t n = 256;
    Rng rng(21);
    AudioClip clip;
    clip.sample_rate = rate;
    clip.samples.resize(n);
    for (auto& s : clip.samples) s = rng.uniform(-1.0, 1.0);

    MorseParams params;
    const MorseFilterBank bank = morse_filter_bank(params, n, rate);
    const TfrMatrix m = cwt_scalogram(clip, params);
    REQUIRE(m.rows == bank.responses.size());
    REQUIRE(bank.n_fft == n);

    double mean = 0.0;
    for (double s : clip.samples) mean += s;
    mean /= static_cast<double>(n);

    // Three scales spread over the bank.
    for (std::size_t s : {std::size_t(0), bank.responses.size() / 2, bank.responses.size() - 1}) {
        // Time-domain wavelet via the naive inverse DFT of the response.
        std::vector<cdouble> spec(n);
        for (std::size_t k = 0; k < n; ++k) spec[k] = cdouble(bank.responses[s][k], 0.0);
        const std::vector<cdouble> wavelet = dft_naive(spec, true);

        double row_peak = 0.0;
        for (std::size_t c = 0; c < n; ++c) row_peak = std::max(row_peak, m.at(s, c));

        for (std::size_t t = 0; t < n; ++t) {
            cdouble acc(0.0, 0.0);
            for (std::size_t u = 0; u < n; ++u) {
                const double x = clip.samples[u] - mean;
                acc += x * wavelet[(t + n - u) % n];
            }
            const double expected = std::abs(acc);
            const double got = m.at(s, t);
            const double denom = std::max(expected, 1e-9 * row_peak);
            CHECK(std::abs(got - expected) / denom <= 1e-4);
        }
    }
}

TEST_CASE("scalogram magnitude scales linearly with input gain") {
    const AudioClip clip = tone(523.25, 8000, 0.25);
    AudioClip scaled = clip;
    for (auto& s : scaled.samples) s *= -2.5;

    const TfrMatrix a = cwt_scalogram(clip, MorseParams{});
    const TfrMatrix b = cwt_scalogram(scaled, MorseParams{});
    REQUIRE(a.magnitudes.size() == b.magnitudes.size());
    double peak = 0.0;
    for (double v : a.magnitudes) peak = std::max(peak, 2.5 * v);
    // Relative to a floor of 1e-7 * peak: far off the ridge the magnitudes
    // are pure cancellation residue and carry no linearity information.
    for (std::size_t i = 0; i < a.magnitudes.size(); ++i) {
        const double expected = 2.5 * a.magnitudes[i];
        CHECK(std::abs(b.magnitudes[i] - expected) / std::max(expected, 1e-7 * peak) <= 1e-6);
    }
}

TEST_CASE("stft of silence is zero and errors propagate") {
    AudioClip clip;
    clip.sample_rate = 8000;
    clip.samples.assign(1024, 0.0);
    const TfrMatrix m = stft_spectrogram(clip, 256, 64);
    for (double v : m.magnitudes) CHECK(v == 0.0);

    CHECK_THROWS_AS(stft_spectrogram(clip, 2048, 64), DataError);
    CHECK_THROWS_AS(stft_spectrogram(clip, 256, 0), DataError);
    CHECK_THROWS_AS(stft_spectrogram(clip, 256, 512), DataError);
}

TEST_CASE("1 kHz tone peaks at bin 32 with a 256 window at 8 kHz") {
    const AudioClip clip = tone(1000.0, 8000, 0.5);
    const TfrMatrix m = stft_spectrogram(clip, 256, 64);
    for (std::size_t c = 0; c < m.cols; ++c) {
        std::size_t best = 0;
        for (std::size_t r = 1; r < m.rows; ++r)
            if (m.at(r, c) > m.at(best, c)) best = r;
        CHECK(best == 32);
    }
}

TEST_CASE("per-frame Parseval holds to 1e-6 relative") {
    Rng rng(31);
    AudioClip clip;
    clip.sample_rate = 8000;
    clip.samples.resize(2000);
    for (auto& s : clip.samples) s = rng.uniform(-1.0, 1.0);

    const std::size_t window = 256, hop = 128;
    const TfrMatrix m = stft_spectrogram(clip, window, hop);

    std::vector<double> w(window);
    for (std::size_t i = 0; i < window; ++i)
        w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(window));

    for (std::size_t f = 0; f < m.cols; ++f) {
        double time_energy = 0.0;
        for (std::size_t i = 0; i < window; ++i) {
            const double v = clip.samples[f * hop + i] * w[i];
            time_energy += v * v;
        }
        double spec_energy = m.at(0, f) * m.at(0, f) + m.at(m.rows - 1, f) * m.at(m.rows - 1, f);
        for (std::size_t k = 1; k + 1 < m.rows; ++k) spec_energy += 2.0 * m.at(k, f) * m.at(k, f);
        spec_energy /= static_cast<double>(window);
        CHECK(std::abs(time_energy - spec_energy) / std::max(time_energy, 1e-12) <= 1e-6);
    }
}

TEST_CASE("stft frame count formula holds across a sweep") {
    AudioClip clip;
    clip.sample_rate = 8000;
    for (std::size_t len : {300, 512, 777, 1024}) {
        clip.samples.assign(len, 0.1);
        for (std::size_t window : {64, 100, 256}) {
            if (window > len) continue;
            for (std::size_t hop : {std::size_t(1), std::size_t(7), std::size_t(32), window}) {
                const TfrMatrix m = stft_spectrogram(clip, window, hop);
                CHECK(m.cols == (len - window) / hop + 1);
                CHECK(m.rows == window / 2 + 1);
            }
        }
    }
}

TEST_CASE("render_image: degenerate inputs give all-zero images") {
    TfrMatrix m;
    m.rows = 5;
    m.cols = 9;
    m.magnitudes.assign(45, 0.0);
    const TfrImage z = render_image(m, 224);
    CHECK(z.side == 224);
    for (float p : z.gray) CHECK(p == 0.0f);

    m.magnitudes.assign(45, 3.7);  // all-equal
    const TfrImage e = render_image(m, 224);
    for (float p : e.gray) CHECK(p == 0.0f);
}

TEST_CASE("render_image: default shape is 224x224 with identical channels") {
    Rng rng(5);
    TfrMatrix m;
    m.rows = 30;
    m.cols = 50;
    m.magnitudes.resize(1500);
    for (auto& v : m.magnitudes) v = rng.uniform();
    const TfrImage img = render_image(m);
    CHECK(img.side == 224);
    CHECK(img.gray.size() == 224u * 224u);
    for (float p : img.gray) {
        CHECK(p >= 0.0f);
        CHECK(p <= 1.0f);
    }
    // The three materialized channels are the same plane by construction.
    for (int y : {0, 100, 223})
        for (int x : {0, 57, 223}) {
            CHECK(img.pixel(y, x, 0) == img.pixel(y, x, 1));
            CHECK(img.pixel(y, x, 1) == img.pixel(y, x, 2));
        }
}

TEST_CASE("render_image is bit-invariant to positive rescaling") {
    Rng rng(6);
    TfrMatrix m;
    m.rows = 20;
    m.cols = 33;
    m.magnitudes.resize(660);
    for (auto& v : m.magnitudes) v = rng.uniform() * 10.0;
    TfrMatrix m3 = m;
    for (auto& v : m3.magnitudes) v *= 3.0;

    const TfrImage a = render_image(m, 64);
    const TfrImage b = render_image(m3, 64);
    CHECK(a.gray == b.gray);
}

TEST_CASE("global max survives the resize within a 1-pixel neighborhood") {
    Rng rng(8);
    TfrMatrix m;
    m.rows = 11;
    m.cols = 17;
    m.magnitudes.resize(m.rows * m.cols);
    for (auto& v : m.magnitudes) v = rng.uniform(0.0, 0.3);
    const std::size_t max_r = 4, max_c = 12;
    m.at(max_r, max_c) = 1.0;

    const int side = 64;
    const TfrImage img = render_image(m, side);

    // Oracle: half-pixel-center coordinate mapping of the source max.
    const double exp_y = (max_r + 0.5) * side / static_cast<double>(m.rows) - 0.5;
    const double exp_x = (max_c + 0.5) * side / static_cast<double>(m.cols) - 0.5;

    int best = 0;
    for (int i = 1; i < side * side; ++i)
        if (img.gray[i] > img.gray[best]) best = i;
    const int by = best / side, bx = best % side;
    CHECK(std::abs(by - exp_y) <= 1.0);
    CHECK(std::abs(bx - exp_x) <= 1.0);
}

TEST_CASE("png and f32 sidecar round trip through the cache") {
    const fs::path dir = fs::temp_directory_path() / "ostb_tfr_cache";
    fs::remove_all(dir);

    Rng rng(14);
    TfrMatrix m;
    m.rows = 40;
    m.cols = 40;
    m.kind = TfrKind::Scalogram;
    m.magnitudes.resize(1600);
    for (auto& v : m.magnitudes) v = rng.uniform();
    TfrImage img = render_image(m, 32);
    img.source_id = "cls/clip.wav";
    img.params_digest = "feedbeef";

    ImageCache cache(dir.string(), "feedbeef", TfrKind::Scalogram, 32);
    CHECK(cache.put("cls/clip.wav", img));
    CHECK(!cache.put("cls/clip.wav", img));  // idempotent
    cache.save_index();

    const TfrImage back = cache.get("cls/clip.wav");
    CHECK(back.gray == img.gray);  // f32 sidecar is bit-exact

    // Reopen from disk.
    ImageCache cache2(dir.string(), "feedbeef", TfrKind::Scalogram, 32);
    CHECK(cache2.contains("cls/clip.wav"));
    CHECK(cache2.get("cls/clip.wav").gray == img.gray);

    // PNG exists and is a PNG.
    std::ifstream png((dir / "feedbeef" / "cls_clip.wav.png").string(), std::ios::binary);
    REQUIRE(png.good());
    char sig[8];
    png.read(sig, 8);
    CHECK(std::string(sig, 8) == std::string("\x89PNG\r\n\x1a\n", 8));
}

TEST_CASE("tfr digests separate kinds and parameter sets") {
    MorseParams morse;
    StftParams stft;
    const std::string a = tfr_digest(TfrKind::Scalogram, morse, stft, 64);
    const std::string b = tfr_digest(TfrKind::Spectrogram, morse, stft, 64);
    const std::string c = tfr_digest(TfrKind::Scalogram, morse, stft, 224);
    MorseParams morse2 = morse;
    morse2.beta = 30.0;
    const std::string d = tfr_digest(TfrKind::Scalogram, morse2, stft, 64);
    CHECK(a != b);
    CHECK(a != c);
    CHECK(a != d);
    CHECK(a == tfr_digest(TfrKind::Scalogram, morse, stft, 64));
}
