#include "ppap/dsp/spectrogram.h"

#include "ppap/common/error.h"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

namespace ppap::dsp {

namespace {

// FFTW planning is not thread-safe; execution on distinct buffers is.
std::mutex & fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

class RealFft {
public:
    explicit RealFft(std::size_t n) : n_(n) {
        in_ = static_cast<double *>(fftw_malloc(sizeof(double) * n));
        out_ = static_cast<fftw_complex *>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)));
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
    }
    ~RealFft() {
        {
            std::lock_guard<std::mutex> lock(fftw_planner_mutex());
            fftw_destroy_plan(plan_);
        }
        fftw_free(in_);
        fftw_free(out_);
    }
    RealFft(const RealFft &) = delete;
    RealFft & operator=(const RealFft &) = delete;

    double * input() { return in_; }
    void execute() { fftw_execute(plan_); }
    double magnitude(std::size_t k) const { return std::hypot(out_[k][0], out_[k][1]); }

private:
    std::size_t n_;
    double * in_ = nullptr;
    fftw_complex * out_ = nullptr;
    fftw_plan plan_ = nullptr;
};

} // namespace

void DspConfig::validate() const {
    if (sample_rate <= 0) throw UsageError("sample_rate must be positive");
    if (window_size < 2 || window_size % 2 != 0) throw UsageError("window_size must be even and >= 2");
    if (hop < 1) throw UsageError("hop must be >= 1");
    if (mel_bins < 1) throw UsageError("mel_bins must be >= 1");
}

std::size_t frame_count(std::size_t length, std::size_t window_size, std::size_t hop) {
    if (length < window_size || hop == 0) return 0;
    return (length - window_size) / hop + 1;
}

std::vector<double> hann_window(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
    }
    return w;
}

std::vector<MagnitudeFrames> stft_magnitude(const AudioClip & clip, std::size_t window_size, std::size_t hop) {
    if (window_size < 2 || window_size % 2 != 0) throw UsageError("stft window size must be even and >= 2");
    if (hop < 1) throw UsageError("stft hop must be >= 1");
    clip.validate();
    const std::size_t length = clip.length();
    if (length < window_size) {
        throw DataError("clip too short for STFT: " + std::to_string(length) + " samples < window " +
                        std::to_string(window_size));
    }

    const std::size_t frames = frame_count(length, window_size, hop);
    const std::size_t bins = window_size / 2 + 1;
    const std::vector<double> window = hann_window(window_size);
    RealFft fft(window_size);

    std::vector<MagnitudeFrames> result(clip.channel_count());
    for (std::size_t c = 0; c < clip.channel_count(); ++c) {
        MagnitudeFrames & mf = result[c];
        mf.frames = frames;
        mf.bins = bins;
        mf.values.resize(frames * bins);
        const std::vector<float> & samples = clip.channels[c];
        for (std::size_t t = 0; t < frames; ++t) {
            double * in = fft.input();
            const std::size_t start = t * hop;
            for (std::size_t i = 0; i < window_size; ++i) in[i] = static_cast<double>(samples[start + i]) * window[i];
            fft.execute();
            for (std::size_t k = 0; k < bins; ++k) mf.values[t * bins + k] = fft.magnitude(k);
        }
    }
    return result;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank mel_filterbank(std::size_t mel_bins, int sample_rate, std::size_t fft_size) {
    if (mel_bins < 1) throw UsageError("mel_bins must be >= 1");
    if (fft_size < 2 || fft_size % 2 != 0) throw UsageError("fft_size must be even and >= 2");
    if (sample_rate <= 0) throw UsageError("sample_rate must be positive");
    const std::size_t bins = fft_size / 2 + 1;
    if (mel_bins > bins) {
        throw UsageError("mel_bins (" + std::to_string(mel_bins) + ") exceeds fft bins (" + std::to_string(bins) + ")");
    }

    const double nyquist = sample_rate / 2.0;
    const double mel_max = hz_to_mel(nyquist);
    std::vector<double> edges_hz(mel_bins + 2);
    for (std::size_t i = 0; i < edges_hz.size(); ++i) {
        edges_hz[i] = mel_to_hz(mel_max * static_cast<double>(i) / static_cast<double>(mel_bins + 1));
    }

    MelFilterbank fb;
    fb.mel_bins = mel_bins;
    fb.fft_bins = bins;
    fb.weights.assign(mel_bins * bins, 0.0);
    fb.center_hz.resize(mel_bins);
    const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(fft_size);

    for (std::size_t m = 0; m < mel_bins; ++m) {
        const double lo = edges_hz[m], center = edges_hz[m + 1], hi = edges_hz[m + 2];
        fb.center_hz[m] = center;
        bool any = false;
        for (std::size_t k = 0; k < bins; ++k) {
            const double f = static_cast<double>(k) * bin_hz;
            double w = 0.0;
            if (f > lo && f <= center) {
                w = (f - lo) / (center - lo);
            } else if (f > center && f < hi) {
                w = (hi - f) / (hi - center);
            }
            if (w > 0.0) {
                fb.weights[m * bins + k] = w;
                any = true;
            }
        }
        // Filters narrower than one FFT bin would otherwise be empty.
        if (!any) {
            const auto k = std::min(bins - 1, static_cast<std::size_t>(std::lround(center / bin_hz)));
            fb.weights[m * bins + k] = 1.0;
        }
    }
    return fb;
}

Spectrogram Spectrogram::silent(std::size_t frames, std::size_t mel_bins, std::size_t channels) {
    Spectrogram s;
    s.frames = frames;
    s.mel_bins = mel_bins;
    s.channels = channels;
    s.values.assign(frames * mel_bins * channels, std::log(kLogFloor));
    return s;
}

Spectrogram log_mel_spectrogram(const AudioClip & clip, const DspConfig & config) {
    config.validate();
    clip.validate();
    if (clip.sample_rate != config.sample_rate) {
        throw DataError("sample rate mismatch: clip is " + std::to_string(clip.sample_rate) + " Hz, model expects " +
                        std::to_string(config.sample_rate) + " Hz");
    }
    const auto window = static_cast<std::size_t>(config.window_size);
    const auto mags = stft_magnitude(clip, window, static_cast<std::size_t>(config.hop));
    const MelFilterbank fb = mel_filterbank(static_cast<std::size_t>(config.mel_bins), config.sample_rate, window);

    Spectrogram spec;
    spec.frames = mags.front().frames;
    spec.mel_bins = fb.mel_bins;
    spec.channels = clip.channel_count();
    spec.values.resize(spec.frames * spec.mel_bins * spec.channels);

    const double log_floor = std::log(kLogFloor);
    std::vector<double> energy(fb.fft_bins);
    for (std::size_t c = 0; c < spec.channels; ++c) {
        const MagnitudeFrames & mf = mags[c];
        for (std::size_t t = 0; t < spec.frames; ++t) {
            for (std::size_t k = 0; k < mf.bins; ++k) {
                const double m = mf.at(t, k);
                energy[k] = m * m;
            }
            for (std::size_t f = 0; f < fb.mel_bins; ++f) {
                const double * w = &fb.weights[f * fb.fft_bins];
                double e = 0.0;
                for (std::size_t k = 0; k < fb.fft_bins; ++k) e += w[k] * energy[k];
                spec.at(t, f, c) = e > kLogFloor ? std::log(e) : log_floor;
            }
        }
    }
    return spec;
}

} // namespace ppap::dsp
