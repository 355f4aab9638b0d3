#include "ppap/common/error.h"
#include "ppap/dsp/spectrogram.h"
#include "ppap/dsp/wav.h"

#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

using namespace ppap;
using namespace ppap::dsp;

namespace {

AudioClip noise_clip(std::size_t channels, std::size_t length, int sr, std::uint64_t seed, float amp = 0.3f) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(-amp, amp);
    AudioClip c = AudioClip::silence(sr, channels, length);
    for (auto & ch : c.channels) {
        for (auto & v : ch) v = u(rng);
    }
    return c;
}

// |sum_n w[n] x[n] e^{-2 pi i k n / W}| by direct summation.
double dft_magnitude(const std::vector<float> & x, std::size_t start, std::size_t W, std::size_t k) {
    std::complex<double> acc = 0.0;
    for (std::size_t n = 0; n < W; ++n) {
        const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / W);
        acc += w * x[start + n] * std::polar(1.0, -2.0 * std::numbers::pi * double(k * n) / double(W));
    }
    return std::abs(acc);
}

std::filesystem::path temp_path(const std::string & name) {
    return std::filesystem::temp_directory_path() / ("ppap_test_dsp_" + name);
}

} // namespace

TEST_CASE("frame count: 30 s at 44.1 kHz, W=4096, H=2048 gives 644") {
    CHECK(frame_count(30 * 44100, 4096, 2048) == 644);
    CHECK(frame_count(4095, 4096, 2048) == 0);
    CHECK(frame_count(4096, 4096, 2048) == 1);
    CHECK(frame_count(4096 + 2047, 4096, 2048) == 1);
    CHECK(frame_count(4096 + 2048, 4096, 2048) == 2);
}

TEST_CASE("periodic hann window") {
    const auto w = hann_window(8);
    CHECK(w[0] == doctest::Approx(0.0));
    CHECK(w[4] == doctest::Approx(1.0));
    CHECK(w[2] == doctest::Approx(0.5));
    CHECK(w[6] == doctest::Approx(w[2]));
}

TEST_CASE("STFT magnitudes match a brute-force DFT") {
    const AudioClip clip = noise_clip(2, 300, 8000, 11);
    const std::size_t W = 64, H = 16;
    const auto mags = stft_magnitude(clip, W, H);
    REQUIRE(mags.size() == 2);
    CHECK(mags[0].frames == frame_count(300, W, H));
    CHECK(mags[0].bins == W / 2 + 1);
    double worst = 0.0;
    for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t t = 0; t < mags[c].frames; ++t) {
            for (std::size_t k = 0; k < mags[c].bins; ++k) {
                worst = std::max(worst, std::abs(mags[c].at(t, k) - dft_magnitude(clip.channels[c], t * H, W, k)));
            }
        }
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("STFT argument errors") {
    const AudioClip clip = noise_clip(1, 100, 8000, 1);
    CHECK_THROWS_AS(stft_magnitude(clip, 63, 16), UsageError);
    CHECK_THROWS_AS(stft_magnitude(clip, 64, 0), UsageError);
    CHECK_THROWS_AS(stft_magnitude(clip, 128, 16), DataError);
}

TEST_CASE("HTK mel scale") {
    CHECK(hz_to_mel(0.0) == doctest::Approx(0.0));
    CHECK(hz_to_mel(700.0) == doctest::Approx(2595.0 * std::log10(2.0)));
    for (double hz : {10.0, 440.0, 8000.0, 22050.0}) CHECK(mel_to_hz(hz_to_mel(hz)) == doctest::Approx(hz));
}

TEST_CASE("mel filterbank matches an independent triangle construction") {
    const std::size_t F = 8, W = 256;
    const int sr = 8000;
    const MelFilterbank fb = mel_filterbank(F, sr, W);
    REQUIRE(fb.mel_bins == F);
    REQUIRE(fb.fft_bins == W / 2 + 1);
    const double top = 2595.0 * std::log10(1.0 + 4000.0 / 700.0);
    for (std::size_t m = 0; m < F; ++m) {
        auto edge = [&](std::size_t i) { return 700.0 * (std::pow(10.0, top * i / (F + 1) / 2595.0) - 1.0); };
        const double lo = edge(m), c = edge(m + 1), hi = edge(m + 2);
        CHECK(fb.center_hz[m] == doctest::Approx(c));
        for (std::size_t k = 0; k < fb.fft_bins; ++k) {
            const double f = double(k) * sr / W;
            const double expect = std::max(0.0, std::min((f - lo) / (c - lo), (hi - f) / (hi - c)));
            CHECK(fb.at(m, k) == doctest::Approx(expect).epsilon(1e-12));
        }
    }
    CHECK_THROWS(mel_filterbank(W, sr, W));
}

TEST_CASE("narrow filters fall back to the nearest bin") {
    const MelFilterbank fb = mel_filterbank(64, 44100, 256);
    for (std::size_t m = 0; m < fb.mel_bins; ++m) {
        double total = 0.0;
        for (std::size_t k = 0; k < fb.fft_bins; ++k) total += fb.at(m, k);
        CHECK(total > 0.0);
    }
}

TEST_CASE("log-mel shape, silence floor and 2 ln(alpha) scaling") {
    DspConfig cfg;
    cfg.mel_bins = 16;
    const AudioClip clip = noise_clip(2, 4096 + 9 * 2048, 44100, 3);
    const Spectrogram s = log_mel_spectrogram(clip, cfg);
    CHECK(s.frames == 10);
    CHECK(s.mel_bins == 16);
    CHECK(s.channels == 2);

    const Spectrogram quiet = log_mel_spectrogram(AudioClip::silence(44100, 1, 4096 * 2), cfg);
    for (double v : quiet.values) CHECK(v == std::log(kLogFloor));

    AudioClip scaled = clip;
    const float alpha = 0.25f;
    scaled.scale(alpha);
    const Spectrogram t = log_mel_spectrogram(scaled, cfg);
    double worst = 0.0;
    for (std::size_t i = 0; i < s.values.size(); ++i) {
        worst = std::max(worst, std::abs(t.values[i] - s.values[i] - 2.0 * std::log(double(alpha))));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("log-mel agrees with brute-force DFT energies through the filterbank") {
    DspConfig cfg;
    cfg.sample_rate = 8000;
    cfg.window_size = 64;
    cfg.hop = 32;
    cfg.mel_bins = 6;
    const AudioClip clip = noise_clip(1, 64 + 3 * 32, 8000, 5);
    const Spectrogram s = log_mel_spectrogram(clip, cfg);
    const MelFilterbank fb = mel_filterbank(6, 8000, 64);
    for (std::size_t t = 0; t < s.frames; ++t) {
        for (std::size_t f = 0; f < 6; ++f) {
            double e = 0.0;
            for (std::size_t k = 0; k < fb.fft_bins; ++k) {
                const double m = dft_magnitude(clip.channels[0], t * 32, 64, k);
                e += fb.at(f, k) * m * m;
            }
            CHECK(s.at(t, f, 0) == doctest::Approx(std::log(std::max(e, kLogFloor))).epsilon(1e-9));
        }
    }
}

TEST_CASE("log-mel input errors") {
    DspConfig cfg;
    AudioClip wrong_rate = noise_clip(1, 8192, 48000, 1);
    CHECK_THROWS_AS(log_mel_spectrogram(wrong_rate, cfg), DataError);
    AudioClip bad = noise_clip(1, 8192, 44100, 1);
    bad.channels[0][5] = std::nanf("");
    CHECK_THROWS_AS(log_mel_spectrogram(bad, cfg), DataError);
    CHECK_THROWS_AS(log_mel_spectrogram(noise_clip(1, 100, 44100, 1), cfg), DataError);
}

TEST_CASE("audio clip helpers") {
    AudioClip c = AudioClip::silence(44100, 2, 4);
    c.channels[0] = {2.0f, -3.0f, 0.5f, 0.0f};
    CHECK(c.clip_to_full_scale() == 2);
    CHECK(c.channels[0][0] == 1.0f);
    CHECK(c.channels[0][1] == -1.0f);
    AudioClip ragged = c;
    ragged.channels[1].pop_back();
    CHECK_THROWS_AS(ragged.validate(), DataError);
    AudioClip r = AudioClip::silence(44100, 1, 4);
    r.channels[0] = {0.5f, -0.5f, 0.5f, -0.5f};
    CHECK(r.rms() == doctest::Approx(0.5));
}

TEST_CASE("WAV round trip") {
    const AudioClip clip = noise_clip(2, 1000, 44100, 9, 0.9f);
    for (auto [enc, tol] : {std::pair{WavEncoding::float32, 0.0}, std::pair{WavEncoding::pcm24, 1.0 / 8388608.0},
                            std::pair{WavEncoding::pcm16, 1.0 / 32768.0}}) {
        const auto path = temp_path("roundtrip.wav");
        write_wav(path, clip, enc);
        const AudioClip back = read_wav(path);
        REQUIRE(back.channel_count() == 2);
        REQUIRE(back.length() == 1000);
        CHECK(back.sample_rate == 44100);
        double worst = 0.0;
        for (std::size_t c = 0; c < 2; ++c) {
            for (std::size_t n = 0; n < 1000; ++n) worst = std::max(worst, double(std::abs(back.channels[c][n] - clip.channels[c][n])));
        }
        CHECK(worst <= tol);
        std::filesystem::remove(path);
    }
}

TEST_CASE("WAV reader rejects garbage") {
    const auto path = temp_path("garbage.wav");
    std::ofstream(path) << "definitely not a wave file";
    CHECK_THROWS_AS(read_wav(path), DataError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(read_wav(temp_path("missing.wav")), DataError);
}
