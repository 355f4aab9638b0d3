#pragma once

#include "ppap/dsp/audio.h"

#include <cstddef>
#include <vector>

namespace ppap::dsp {

inline constexpr double kLogFloor = 1e-10;

struct DspConfig {
    int sample_rate = 44100;
    int window_size = 4096;
    int hop = 2048;
    int mel_bins = 64;

    void validate() const;
};

// frame_count(L, W, H) = floor((L - W) / H) + 1, or 0 when L < W.
std::size_t frame_count(std::size_t length, std::size_t window_size, std::size_t hop);

// Row-major frames x (W/2 + 1) magnitudes for one channel.
struct MagnitudeFrames {
    std::size_t frames = 0;
    std::size_t bins = 0;
    std::vector<double> values;

    double at(std::size_t t, std::size_t k) const { return values[t * bins + k]; }
};

// Periodic Hann window of length n: 0.5 - 0.5 cos(2 pi i / n).
std::vector<double> hann_window(std::size_t n);

// Hann-windowed magnitude STFT with frames fully inside the signal. One entry
// per channel. Throws DataError("too short") if the clip is shorter than one
// window and UsageError on an odd window or zero hop.
std::vector<MagnitudeFrames> stft_magnitude(const AudioClip & clip, std::size_t window_size, std::size_t hop);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// F x (W/2 + 1) triangular filters with peak 1.0, centers equally spaced on
// the mel scale between 0 Hz and sr/2.
struct MelFilterbank {
    std::size_t mel_bins = 0;
    std::size_t fft_bins = 0;
    std::vector<double> weights;       // row-major mel_bins x fft_bins
    std::vector<double> center_hz;     // mel_bins

    double at(std::size_t m, std::size_t k) const { return weights[m * fft_bins + k]; }
};

MelFilterbank mel_filterbank(std::size_t mel_bins, int sample_rate, std::size_t fft_size);

// T x F x C log-mel tensor, row-major [t][f][c].
struct Spectrogram {
    std::size_t frames = 0;
    std::size_t mel_bins = 0;
    std::size_t channels = 0;
    std::vector<double> values;

    double & at(std::size_t t, std::size_t f, std::size_t c) { return values[(t * mel_bins + f) * channels + c]; }
    double at(std::size_t t, std::size_t f, std::size_t c) const { return values[(t * mel_bins + f) * channels + c]; }

    // All entries at ln(kLogFloor): what a silent clip produces.
    static Spectrogram silent(std::size_t frames, std::size_t mel_bins, std::size_t channels);
};

// ln(max(mel_energy, 1e-10)) with energy = |STFT|^2 projected through the
// filterbank. Rejects non-finite input and sample rates that differ from the
// config.
Spectrogram log_mel_spectrogram(const AudioClip & clip, const DspConfig & config = {});

} // namespace ppap::dsp
