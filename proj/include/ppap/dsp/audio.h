#pragma once

#include <cstddef>
#include <vector>

namespace ppap::dsp {

// Multi-channel clip in digital full scale. channels[c][n] in [-1, 1].
struct AudioClip {
    int sample_rate = 44100;
    std::vector<std::vector<float>> channels;

    std::size_t channel_count() const { return channels.size(); }
    std::size_t length() const { return channels.empty() ? 0 : channels.front().size(); }

    static AudioClip silence(int sample_rate, std::size_t channels, std::size_t length);

    // Throws DataError unless channels >= 1, all channels share a length and
    // every sample is finite.
    void validate() const;

    // Clamp every sample into [-1, 1]; returns how many were clamped.
    std::size_t clip_to_full_scale();

    void scale(float factor);
    double rms() const;  // over all channels
};

} // namespace ppap::dsp
