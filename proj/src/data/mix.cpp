#include "ppap/data/mix.h"

#include "ppap/common/error.h"
#include "ppap/common/log.h"

#include <cmath>
#include <string>

namespace ppap::data {

MixResult mix_with_gain(const dsp::AudioClip & soundscape, const dsp::AudioClip & masker, double gain) {
    soundscape.validate();
    masker.validate();
    if (soundscape.sample_rate != masker.sample_rate) throw DataError("mix: sample rates differ");
    if (soundscape.length() != masker.length()) {
        throw DataError("mix: soundscape has " + std::to_string(soundscape.length()) + " samples, masker " +
                        std::to_string(masker.length()));
    }
    if (masker.channel_count() != 1 && masker.channel_count() != soundscape.channel_count()) {
        throw DataError("mix: masker must be mono or match the soundscape channel count");
    }
    if (!std::isfinite(gain)) throw DataError("mix: gain is not finite");
    MixResult r{soundscape, 0};
    for (std::size_t c = 0; c < r.mixture.channel_count(); ++c) {
        const auto & m = masker.channels[masker.channel_count() == 1 ? 0 : c];
        auto & out = r.mixture.channels[c];
        for (std::size_t n = 0; n < out.size(); ++n) {
            out[n] = static_cast<float>(out[n] + gain * m[n]);
        }
    }
    r.clipped = r.mixture.clip_to_full_scale();
    if (r.clipped > 0) log::warn("mix: " + std::to_string(r.clipped) + " samples clipped to full scale");
    return r;
}

MixResult mix_at_smr(const dsp::AudioClip & soundscape, const dsp::AudioClip & masker,
                     const calib::GainLookupTable & table, const calib::SceneMeta & scene, double smr) {
    return mix_with_gain(soundscape, masker, calib::smr_to_gain(table, scene, smr));
}

} // namespace ppap::data
