#include "ppap/dsp/audio.h"

#include "ppap/common/error.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace ppap::dsp {

AudioClip AudioClip::silence(int sample_rate, std::size_t channels, std::size_t length) {
    AudioClip clip;
    clip.sample_rate = sample_rate;
    clip.channels.assign(channels, std::vector<float>(length, 0.0f));
    return clip;
}

void AudioClip::validate() const {
    if (channels.empty()) throw DataError("audio clip has no channels");
    if (sample_rate <= 0) throw DataError("audio clip has non-positive sample rate");
    const std::size_t n = channels.front().size();
    for (std::size_t c = 0; c < channels.size(); ++c) {
        if (channels[c].size() != n) {
            throw DataError("audio clip channel " + std::to_string(c) + " length differs from channel 0");
        }
        for (float s : channels[c]) {
            if (!std::isfinite(s)) throw DataError("audio clip contains NaN or Inf samples");
        }
    }
}

std::size_t AudioClip::clip_to_full_scale() {
    std::size_t clipped = 0;
    for (auto & ch : channels) {
        for (float & s : ch) {
            if (s > 1.0f) {
                s = 1.0f;
                ++clipped;
            } else if (s < -1.0f) {
                s = -1.0f;
                ++clipped;
            }
        }
    }
    return clipped;
}

void AudioClip::scale(float factor) {
    for (auto & ch : channels) {
        for (float & s : ch) s *= factor;
    }
}

double AudioClip::rms() const {
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto & ch : channels) {
        for (float s : ch) acc += static_cast<double>(s) * s;
        n += ch.size();
    }
    return n == 0 ? 0.0 : std::sqrt(acc / static_cast<double>(n));
}

} // namespace ppap::dsp
